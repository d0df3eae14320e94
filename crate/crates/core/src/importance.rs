//! Triplet importance (frame informativeness plus diversity against the
//! triplets already ranked), greedy importance ranking, and capped nDCG.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::metrics::pair_documents;
use crate::model::{cosine, frame_key, triplet_sentence, FrameGraph, SceneGraphDocument, ScoredTriplet, Triplet, EmbeddingTable};
use crate::par::Exec;

pub const DEFAULT_LAMBDA: f64 = 0.75;
pub const DEFAULT_P: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceConfig {
    lambda: f64,
    clamp_to_unit: bool,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            clamp_to_unit: true,
        }
    }
}

impl ImportanceConfig {
    pub fn new(lambda: f64, clamp_to_unit: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(Self { lambda, clamp_to_unit })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn clamp_to_unit(&self) -> bool {
        self.clamp_to_unit
    }

    fn clamp(&self, x: f64) -> f64 {
        if self.clamp_to_unit {
            x.clamp(0.0, 1.0)
        } else {
            x
        }
    }

    pub fn combine(&self, informativeness: f64, diversity: f64) -> f64 {
        self.lambda * informativeness + (1.0 - self.lambda) * diversity
    }
}

/// Frame embeddings (keyed by [`frame_key`]) and sentence embeddings (keyed
/// by [`triplet_sentence`]). Both may be the same table.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddingSpace<'a> {
    pub frames: &'a EmbeddingTable,
    pub text: &'a EmbeddingTable,
}

impl<'a> EmbeddingSpace<'a> {
    pub fn new(frames: &'a EmbeddingTable, text: &'a EmbeddingTable) -> Result<Self> {
        if frames.dimension() != text.dimension() {
            return Err(Error::Config(format!(
                "frame embeddings have dimension {} but text embeddings {}",
                frames.dimension(),
                text.dimension()
            )));
        }
        Ok(Self { frames, text })
    }

    pub fn shared(table: &'a EmbeddingTable) -> Self {
        Self { frames: table, text: table }
    }

    fn sentence(&self, t: &Triplet) -> Result<&'a [f64]> {
        self.text.require(&triplet_sentence(t))
    }
}

pub fn informativeness(t: &Triplet, frame_key: &str, space: &EmbeddingSpace, cfg: &ImportanceConfig) -> Result<f64> {
    let frame = space.frames.require(frame_key)?;
    Ok(cfg.clamp(cosine(frame, space.sentence(t)?)?))
}

pub fn diversity(t: &Triplet, previous: &[&Triplet], space: &EmbeddingSpace, cfg: &ImportanceConfig) -> Result<f64> {
    if previous.is_empty() {
        return Ok(1.0);
    }
    let v = space.sentence(t)?;
    let mut sum = 0.0;
    for p in previous {
        sum += cosine(space.sentence(p)?, v)?;
    }
    Ok(cfg.clamp(1.0 - sum / previous.len() as f64))
}

pub fn triplet_importance(t: &Triplet, previous: &[&Triplet], frame_key: &str, space: &EmbeddingSpace, cfg: &ImportanceConfig) -> Result<f64> {
    Ok(cfg.combine(
        informativeness(t, frame_key, space, cfg)?,
        diversity(t, previous, space, cfg)?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedTriplet {
    pub triplet: ScoredTriplet,
    pub ti: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredRanking {
    pub entries: Vec<RankedTriplet>,
}

impl ScoredRanking {
    pub fn from_rels(rels: &[f64]) -> Result<Self> {
        let filler = Triplet::new("x", "y", "z")?;
        Ok(Self {
            entries: rels
                .iter()
                .enumerate()
                .map(|(i, &ti)| RankedTriplet {
                    triplet: ScoredTriplet::unboxed(filler.clone(), i as u32 + 1),
                    ti,
                })
                .collect(),
        })
    }

    pub fn rels(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ti).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Frame graph in ranking order, ranks renumbered from 1.
    pub fn to_frame(&self, frame_id: &str) -> FrameGraph {
        FrameGraph::new(frame_id, self.entries.iter().map(|e| e.triplet.clone()).collect())
    }
}

/// Precomputed per-frame quantities for incremental scoring.
struct FrameVectors<'a> {
    informativeness: Vec<f64>,
    sentences: Vec<&'a [f64]>,
}

fn frame_vectors<'a>(frame: &FrameGraph, key: &str, space: &EmbeddingSpace<'a>, cfg: &ImportanceConfig) -> Result<FrameVectors<'a>> {
    let fv = space.frames.require(key)?;
    let mut informativeness = Vec::with_capacity(frame.len());
    let mut sentences = Vec::with_capacity(frame.len());
    for st in &frame.triplets {
        let s = space.sentence(&st.triplet)?;
        informativeness.push(cfg.clamp(cosine(fv, s)?));
        sentences.push(s);
    }
    Ok(FrameVectors {
        informativeness,
        sentences,
    })
}

/// Greedy diversity-aware ordering: at each step take the unselected
/// triplet of highest TI given the selected list, ties to the lower
/// original rank. Each entry carries its TI at selection time.
pub fn rank_by_importance(frame: &FrameGraph, frame_key: &str, space: &EmbeddingSpace, cfg: &ImportanceConfig) -> Result<ScoredRanking> {
    let fv = frame_vectors(frame, frame_key, space, cfg)?;
    let n = frame.len();
    let mut similarity_sum = vec![0.0; n];
    let mut selected = vec![false; n];
    let mut entries = Vec::with_capacity(n);
    for step in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| !selected[j]) {
            let d = if step == 0 {
                1.0
            } else {
                cfg.clamp(1.0 - similarity_sum[j] / step as f64)
            };
            let ti = cfg.combine(fv.informativeness[j], d);
            if best.is_none_or(|(_, b)| ti > b) {
                best = Some((j, ti));
            }
        }
        let (j, ti) = best.ok_or_else(|| Error::Invariant("greedy step found no candidate".into()))?;
        selected[j] = true;
        for k in (0..n).filter(|&k| !selected[k]) {
            similarity_sum[k] += cosine(fv.sentences[j], fv.sentences[k])?;
        }
        entries.push(RankedTriplet {
            triplet: frame.triplets[j].clone(),
            ti,
        });
    }
    Ok(ScoredRanking { entries })
}

/// TI of each triplet in its existing order, each scored against the
/// triplets before it.
pub fn score_in_order(frame: &FrameGraph, frame_key: &str, space: &EmbeddingSpace, cfg: &ImportanceConfig) -> Result<ScoredRanking> {
    let fv = frame_vectors(frame, frame_key, space, cfg)?;
    let mut entries = Vec::with_capacity(frame.len());
    for (i, st) in frame.triplets.iter().enumerate() {
        let d = if i == 0 {
            1.0
        } else {
            let mut sum = 0.0;
            for prev in &fv.sentences[..i] {
                sum += cosine(prev, fv.sentences[i])?;
            }
            cfg.clamp(1.0 - sum / i as f64)
        };
        entries.push(RankedTriplet {
            triplet: st.clone(),
            ti: cfg.combine(fv.informativeness[i], d),
        });
    }
    Ok(ScoredRanking { entries })
}

fn dcg(rels: impl Iterator<Item = f64>) -> f64 {
    rels.enumerate()
        .map(|(i, rel)| (rel.exp2() - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// `min(DCG_p(pred) / IDCG_p, 1)`. The ideal is `gt` in its given order,
/// which for greedy importance rankings is the selection order; 1.0 when
/// the ideal carries no gain.
pub fn ndcg_at(pred: &ScoredRanking, gt: &ScoredRanking, p: usize) -> Result<f64> {
    if p < 1 {
        return Err(Error::Config("nDCG cut-off p must be at least 1".to_string()));
    }
    let ideal = dcg(gt.entries.iter().take(p).map(|e| e.ti));
    if ideal <= 0.0 {
        return Ok(1.0);
    }
    let got = dcg(pred.entries.iter().take(p).map(|e| e.ti));
    Ok((got / ideal).min(1.0))
}

/// Every frame key and sentence needed to score `docs`, absent from the
/// space, sorted.
pub fn missing_keys(docs: &[&SceneGraphDocument], space: &EmbeddingSpace) -> Vec<String> {
    let mut missing = BTreeSet::new();
    for doc in docs {
        for frame in &doc.frames {
            let key = frame_key(&doc.video_id, &frame.frame_id);
            if !space.frames.contains(&key) {
                missing.insert(key);
            }
            for st in &frame.triplets {
                let s = triplet_sentence(&st.triplet);
                if !space.text.contains(&s) {
                    missing.insert(s);
                }
            }
        }
    }
    missing.into_iter().collect()
}

fn require_all(docs: &[&SceneGraphDocument], space: &EmbeddingSpace) -> Result<()> {
    let missing = missing_keys(docs, space);
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingEmbeddings(missing))
    }
}

/// Reorder every frame of `doc` by importance. Returns the reordered
/// document and each frame's TIs in the new order.
pub fn rank_document(doc: &SceneGraphDocument, space: &EmbeddingSpace, cfg: &ImportanceConfig) -> Result<(SceneGraphDocument, Vec<Vec<f64>>)> {
    require_all(&[doc], space)?;
    let mut frames = Vec::with_capacity(doc.frames.len());
    let mut tis = Vec::with_capacity(doc.frames.len());
    for frame in &doc.frames {
        let ranking = rank_by_importance(frame, &frame_key(&doc.video_id, &frame.frame_id), space, cfg)?;
        tis.push(ranking.rels());
        frames.push(ranking.to_frame(&frame.frame_id));
    }
    Ok((SceneGraphDocument::new(doc.video_id.clone(), frames, doc.kind)?, tis))
}

pub fn rank_documents(docs: &[SceneGraphDocument], space: &EmbeddingSpace, cfg: &ImportanceConfig, exec: Exec) -> Result<Vec<(SceneGraphDocument, Vec<Vec<f64>>)>> {
    require_all(&docs.iter().collect::<Vec<_>>(), space)?;
    exec.try_map(docs, |d| rank_document(d, space, cfg))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// nDCG@p averaged frame → video → corpus. Prediction relevances are TIs in
/// generation order; the ideal is the greedy ranking of the ground truth.
pub fn ndcg_report(preds: &[SceneGraphDocument], gts: &[SceneGraphDocument], space: &EmbeddingSpace, cfg: &ImportanceConfig, p: usize, exec: Exec) -> Result<f64> {
    if p < 1 {
        return Err(Error::Config("nDCG cut-off p must be at least 1".to_string()));
    }
    let pairs = pair_documents(preds, gts)?;
    let all: Vec<&SceneGraphDocument> = pairs.iter().flat_map(|(p, g)| [*p, *g]).collect();
    require_all(&all, space)?;
    let per_video = exec.try_map(&pairs, |(pd, gd)| {
        let mut values = Vec::with_capacity(gd.frames.len());
        for (pf, gf) in crate::metrics::pair_frames(pd, gd)? {
            let key = frame_key(&gd.video_id, &gf.frame_id);
            let pred = score_in_order(pf, &key, space, cfg)?;
            let ideal = rank_by_importance(gf, &key, space, cfg)?;
            values.push(ndcg_at(&pred, &ideal, p)?);
        }
        Ok::<_, Error>(mean(values.into_iter()))
    })?;
    Ok(mean(per_video.into_iter().flatten()).unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DocumentKind;

    fn t(s: &str, p: &str, o: &str) -> Triplet {
        Triplet::new(s, p, o).unwrap()
    }

    fn unit(theta: f64) -> Vec<f64> {
        vec![theta.cos(), theta.sin()]
    }

    #[test]
    fn importance_examples() {
        let cfg = ImportanceConfig::default();
        assert_eq!(cfg.lambda(), 0.75);
        assert!((cfg.combine(0.8, 0.4) - 0.7).abs() < 1e-12);
        for lambda in [0.0, 0.3, 1.0] {
            let c = ImportanceConfig::new(lambda, true).unwrap();
            assert_eq!(c.combine(1.0, 1.0), 1.0);
        }
        assert!(ImportanceConfig::new(1.2, true).is_err());
    }

    #[test]
    fn informativeness_from_constructed_table() {
        let a = t("person", "holding", "cup");
        let table = EmbeddingTable::from_entries(
            2,
            [
                ("frame://v/1".to_string(), unit(0.0)),
                (triplet_sentence(&a), unit(0.6f64.acos())),
            ],
        )
        .unwrap();
        let space = EmbeddingSpace::shared(&table);
        let cfg = ImportanceConfig::default();
        assert!((informativeness(&a, "frame://v/1", &space, &cfg).unwrap() - 0.6).abs() < 1e-12);
        let err = informativeness(&a, "frame://v/2", &space, &cfg).unwrap_err();
        assert!(err.to_string().contains("frame://v/2"));
    }

    #[test]
    fn diversity_examples() {
        let (a, b, c) = (t("a", "b", "c"), t("d", "e", "f"), t("g", "h", "i"));
        // cos(a, b) = 0.2 and cos(a, c) = 0.6
        let table = EmbeddingTable::from_entries(
            2,
            [
                (triplet_sentence(&a), unit(0.0)),
                (triplet_sentence(&b), unit(0.2f64.acos())),
                (triplet_sentence(&c), unit(-(0.6f64.acos()))),
            ],
        )
        .unwrap();
        let space = EmbeddingSpace::shared(&table);
        let cfg = ImportanceConfig::default();
        assert_eq!(diversity(&a, &[], &space, &cfg).unwrap(), 1.0);
        assert!(diversity(&a, &[&a], &space, &cfg).unwrap().abs() < 1e-12);
        assert!((diversity(&a, &[&b, &c], &space, &cfg).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn ndcg_hand_example() {
        let gt = ScoredRanking::from_rels(&[1.0, 0.5]).unwrap();
        let pred = ScoredRanking::from_rels(&[0.5, 1.0]).unwrap();
        let v = ndcg_at(&pred, &gt, 5).unwrap();
        assert!((v - 0.8285).abs() < 1e-4, "{v}");
        assert_eq!(ndcg_at(&gt, &gt, 5).unwrap(), 1.0);
        let better = ScoredRanking::from_rels(&[1.0, 1.0]).unwrap();
        assert_eq!(ndcg_at(&better, &gt, 5).unwrap(), 1.0);
        assert!(ndcg_at(&pred, &gt, 0).is_err());
        assert_eq!(ndcg_at(&pred, &ScoredRanking::default(), 3).unwrap(), 1.0);
    }

    fn frame_with(triplets: &[Triplet]) -> FrameGraph {
        FrameGraph::from_triplets("1", triplets.iter().cloned())
    }

    #[test]
    fn duplicate_is_pushed_back() {
        let (a, c) = (t("person", "holding", "cup"), t("person", "sitting on", "chair"));
        let table = EmbeddingTable::from_entries(
            2,
            [
                ("frame://v/1".to_string(), unit(0.0)),
                (triplet_sentence(&a), unit(0.3)),
                (triplet_sentence(&c), unit(-0.4)),
            ],
        )
        .unwrap();
        let space = EmbeddingSpace::shared(&table);
        let frame = frame_with(&[a.clone(), a.clone(), c.clone()]);
        let r = rank_by_importance(&frame, "frame://v/1", &space, &ImportanceConfig::default()).unwrap();
        let order: Vec<&Triplet> = r.entries.iter().map(|e| &e.triplet.triplet).collect();
        assert_eq!(order, vec![&a, &c, &a]);
        // first pick has diversity one
        let ti1 = 0.75 * 0.3f64.cos() + 0.25;
        assert!((r.entries[0].ti - ti1).abs() < 1e-12);
    }

    #[test]
    fn ideal_ranked_document_scores_one() {
        let ts = [t("a", "b", "c"), t("a", "b", "d"), t("a", "e", "c"), t("f", "b", "c")];
        let mut entries: Vec<(String, Vec<f64>)> = vec![("frame://v/1".to_string(), unit(0.1))];
        for (i, x) in ts.iter().enumerate() {
            entries.push((triplet_sentence(x), unit(0.4 * i as f64)));
        }
        let table = EmbeddingTable::from_entries(2, entries).unwrap();
        let space = EmbeddingSpace::shared(&table);
        let cfg = ImportanceConfig::default();
        let gt = SceneGraphDocument::new("v", vec![frame_with(&ts)], DocumentKind::Prediction).unwrap();
        let (ranked, _) = rank_document(&gt, &space, &cfg).unwrap();
        let v = ndcg_report(&[ranked], std::slice::from_ref(&gt), &space, &cfg, 5, Exec::Sequential).unwrap();
        assert!((v - 1.0).abs() < 1e-12);

        // reversed greedy order falls below one
        let (ranked, _) = rank_document(&gt, &space, &cfg).unwrap();
        let mut rev = ranked.clone();
        rev.frames[0].triplets.reverse();
        rev.frames[0].renumber();
        let v = ndcg_report(&[rev], std::slice::from_ref(&gt), &space, &cfg, 5, Exec::Sequential).unwrap();
        assert!(v < 1.0);
    }

    #[test]
    fn missing_keys_are_all_listed() {
        let ts = [t("a", "b", "c"), t("d", "e", "f")];
        let table = EmbeddingTable::from_entries(2, [(triplet_sentence(&ts[0]), unit(0.0))]).unwrap();
        let space = EmbeddingSpace::shared(&table);
        let doc = SceneGraphDocument::new("v", vec![frame_with(&ts)], DocumentKind::Prediction).unwrap();
        let err = rank_document(&doc, &space, &ImportanceConfig::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("frame://v/1") && msg.contains("a d is e f"), "{msg}");
    }
}
