//! Open-vocabulary to closed-vocabulary label alignment by embedding cosine.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::model::{DocumentKind, EmbeddingTable, FrameGraph, SceneGraphDocument, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentConfig {
    min_similarity: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self { min_similarity: 0.0 }
    }
}

impl AlignmentConfig {
    pub fn new(min_similarity: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&min_similarity) {
            return Err(Error::Config(format!("min_similarity {min_similarity} outside [-1, 1]")));
        }
        Ok(Self { min_similarity })
    }

    pub fn min_similarity(&self) -> f64 {
        self.min_similarity
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Alignment {
    Aligned { label: String, similarity: f64 },
    /// The label has no embedding.
    Unknown,
    /// Best match fell below the configured floor.
    BelowThreshold { best: String, similarity: f64 },
}

impl Alignment {
    pub fn label(&self) -> Option<&str> {
        match self {
            Alignment::Aligned { label, .. } => Some(label),
            _ => None,
        }
    }
}

/// Map `label` to its closest target. Exact matches win without consulting
/// the table; otherwise the highest-cosine target is chosen, ties going to
/// the lexicographically smallest label.
pub fn align_label(label: &str, targets: &BTreeSet<String>, table: &EmbeddingTable, cfg: &AlignmentConfig) -> Result<Alignment> {
    if targets.is_empty() {
        return Err(Error::Config("alignment target set is empty".to_string()));
    }
    if targets.contains(label) {
        return Ok(Alignment::Aligned {
            label: label.to_string(),
            similarity: 1.0,
        });
    }
    let missing: Vec<String> = targets.iter().filter(|t| !table.contains(t)).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingEmbeddings(missing));
    }
    let Some(query) = table.get(label) else {
        return Ok(Alignment::Unknown);
    };
    let mut best: Option<(&String, f64)> = None;
    // BTreeSet iterates in lexicographic order, so a strict `>` keeps the
    // smallest label among equal scores.
    for target in targets {
        let sim = crate::model::cosine(query, table.require(target)?)?;
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((target, sim));
        }
    }
    let (target, similarity) = best.ok_or_else(|| Error::Invariant("non-empty target set produced no best".into()))?;
    if similarity < cfg.min_similarity {
        return Ok(Alignment::BelowThreshold {
            best: target.clone(),
            similarity,
        });
    }
    Ok(Alignment::Aligned {
        label: target.clone(),
        similarity,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDocument {
    pub document: SceneGraphDocument,
    pub rejected: usize,
}

/// Align every subject/object against `vocab.objects` and every predicate
/// against `vocab.predicates`. Triplets with any unaligned component are
/// dropped and survivors re-ranked 1..n.
pub fn align_document(doc: &SceneGraphDocument, vocab: &Vocabulary, table: &EmbeddingTable, cfg: &AlignmentConfig) -> Result<AlignedDocument> {
    if doc.kind != DocumentKind::Prediction {
        return Err(Error::Config(format!(
            "video {}: only prediction documents are aligned",
            doc.video_id
        )));
    }
    let mut objects: HashMap<String, Option<String>> = HashMap::new();
    let mut predicates: HashMap<String, Option<String>> = HashMap::new();
    let lookup = |cache: &mut HashMap<String, Option<String>>, label: &str, targets: &BTreeSet<String>| -> Result<Option<String>> {
        if let Some(hit) = cache.get(label) {
            return Ok(hit.clone());
        }
        let aligned = align_label(label, targets, table, cfg)?.label().map(str::to_string);
        cache.insert(label.to_string(), aligned.clone());
        Ok(aligned)
    };

    let mut rejected = 0;
    let mut frames = Vec::with_capacity(doc.frames.len());
    for frame in &doc.frames {
        let mut kept = Vec::with_capacity(frame.len());
        for st in &frame.triplets {
            let t = &st.triplet;
            let s = lookup(&mut objects, t.subject(), &vocab.objects)?;
            let p = lookup(&mut predicates, t.predicate(), &vocab.predicates)?;
            let o = lookup(&mut objects, t.object(), &vocab.objects)?;
            match (s, p, o) {
                (Some(s), Some(p), Some(o)) => {
                    let mut aligned = st.clone();
                    aligned.triplet = t.with_labels(&s, &p, &o)?;
                    kept.push(aligned);
                }
                _ => rejected += 1,
            }
        }
        frames.push(FrameGraph::new(frame.frame_id.clone(), kept));
    }
    Ok(AlignedDocument {
        document: SceneGraphDocument::new(doc.video_id.clone(), frames, doc.kind)?,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FrameGraph, Triplet};

    /// 2-D table where cos(mug, cup) = 0.9 and cos(mug, glass) = 0.7.
    fn mug_table() -> EmbeddingTable {
        let angle = |c: f64| c.acos();
        let cup = 0.0f64;
        let mug = angle(0.9);
        // glass sits on the other side of mug so that mug-glass = 0.7
        let glass = mug + angle(0.7);
        EmbeddingTable::from_entries(
            2,
            [
                ("cup", vec![cup.cos(), cup.sin()]),
                ("mug", vec![mug.cos(), mug.sin()]),
                ("glass", vec![glass.cos(), glass.sin()]),
            ],
        )
        .unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_match_skips_embeddings() {
        let empty = EmbeddingTable::new(2).unwrap();
        let got = align_label("cup", &set(&["cup", "glass"]), &empty, &AlignmentConfig::default()).unwrap();
        assert_eq!(
            got,
            Alignment::Aligned {
                label: "cup".into(),
                similarity: 1.0
            }
        );
    }

    #[test]
    fn nearest_target_by_cosine() {
        let table = mug_table();
        assert!((table.similarity("mug", "glass").unwrap() - 0.7).abs() < 1e-12);
        let got = align_label("mug", &set(&["cup", "glass"]), &table, &AlignmentConfig::default()).unwrap();
        match got {
            Alignment::Aligned { label, similarity } => {
                assert_eq!(label, "cup");
                assert!((similarity - 0.9).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_rejected() {
        let got = align_label("zzz", &set(&["cup", "glass"]), &mug_table(), &AlignmentConfig::default()).unwrap();
        assert_eq!(got, Alignment::Unknown);
    }

    #[test]
    fn threshold_rejects() {
        let cfg = AlignmentConfig::new(0.95).unwrap();
        let got = align_label("mug", &set(&["cup", "glass"]), &mug_table(), &cfg).unwrap();
        assert!(matches!(got, Alignment::BelowThreshold { .. }));
        assert!(AlignmentConfig::new(1.5).is_err());
    }

    #[test]
    fn errors_on_bad_targets() {
        let table = mug_table();
        assert!(align_label("mug", &BTreeSet::new(), &table, &AlignmentConfig::default()).is_err());
        let err = align_label("mug", &set(&["cup", "plate"]), &table, &AlignmentConfig::default()).unwrap_err();
        assert!(err.to_string().contains("plate"));
    }

    #[test]
    fn ties_go_to_smallest_label() {
        let table = EmbeddingTable::from_entries(2, [("q", vec![1.0, 0.0]), ("b", vec![1.0, 1.0]), ("a", vec![1.0, -1.0])]).unwrap();
        let got = align_label("q", &set(&["b", "a"]), &table, &AlignmentConfig::default()).unwrap();
        assert_eq!(got.label(), Some("a"));
    }

    fn doc(triplets: &[(&str, &str, &str)]) -> SceneGraphDocument {
        let ts = triplets.iter().map(|(s, p, o)| Triplet::new(s, p, o).unwrap());
        SceneGraphDocument::new("v", vec![FrameGraph::from_triplets("f", ts)], DocumentKind::Prediction).unwrap()
    }

    fn vocab() -> Vocabulary {
        Vocabulary::new(&["person", "cup", "glass"], &["holding", "drinking from"]).unwrap()
    }

    fn table() -> EmbeddingTable {
        let mut t = mug_table();
        for (k, v) in [
            ("person", vec![-1.0, 0.0]),
            ("holding", vec![0.0, -1.0]),
            ("drinking from", vec![-1.0, -1.0]),
            ("grasping", vec![0.1, -1.0]),
        ] {
            t.insert(k, v).unwrap();
        }
        t
    }

    #[test]
    fn closed_vocabulary_document_is_a_fixed_point() {
        let d = doc(&[("person", "holding", "cup")]);
        let out = align_document(&d, &vocab(), &table(), &AlignmentConfig::default()).unwrap();
        assert_eq!(out.document, d);
        assert_eq!(out.rejected, 0);
    }

    #[test]
    fn unknown_predicate_drops_triplet_and_ranks_compact() {
        let d = doc(&[("person", "holding", "mug"), ("person", "flibbering", "cup"), ("person", "grasping", "cup")]);
        let out = align_document(&d, &vocab(), &table(), &AlignmentConfig::default()).unwrap();
        assert_eq!(out.rejected, 1);
        let f = &out.document.frames[0];
        assert_eq!(f.len(), 2);
        assert_eq!(f.triplets.iter().map(|t| t.rank).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(f.triplets[0].triplet, Triplet::new("person", "holding", "cup").unwrap());
        assert_eq!(f.triplets[1].triplet, Triplet::new("person", "holding", "cup").unwrap());
    }

    #[test]
    fn alignment_is_idempotent() {
        let d = doc(&[("person", "grasping", "mug"), ("mug", "holding", "person")]);
        let once = align_document(&d, &vocab(), &table(), &AlignmentConfig::default()).unwrap();
        let twice = align_document(&once.document, &vocab(), &table(), &AlignmentConfig::default()).unwrap();
        assert_eq!(once.document, twice.document);
        assert_eq!(twice.rejected, 0);
    }

    #[test]
    fn ground_truth_is_not_aligned() {
        let mut d = doc(&[]);
        d.kind = DocumentKind::GroundTruth;
        assert!(align_document(&d, &vocab(), &table(), &AlignmentConfig::default()).is_err());
    }
}
