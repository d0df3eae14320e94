//! Zero-shot and fine-tuning prompt texts.
//!
//! Wording lives in versioned template files under `templates/`; a template
//! is never edited in place, a new version is added instead. Few-shot
//! examples are written with the same serializer the parser inverts.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::importance::{rank_by_importance, EmbeddingSpace, ImportanceConfig};
use crate::model::{frame_key, FrameGraph, SceneGraphDocument, Vocabulary};
use crate::parser::{serialize_frames, RelationFormat, END_SENTINEL, FRAME_SEPARATOR};

const ZS_TRIPLET_V1: &str = include_str!("../templates/zs_triplet_v1.txt");
const ZS_QUAD_V1: &str = include_str!("../templates/zs_quad_v1.txt");
const FT_TRIPLET_V1: &str = include_str!("../templates/ft_triplet_v1.txt");

pub const DEFAULT_FEWSHOT: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptMode {
    ZeroShotTriplet,
    ZeroShotQuadruplet,
    FinetuneTriplet,
}

impl PromptMode {
    pub fn format(self) -> RelationFormat {
        match self {
            PromptMode::ZeroShotQuadruplet => RelationFormat::Quadruplet,
            _ => RelationFormat::Triplet,
        }
    }

    fn template(self) -> &'static str {
        match self {
            PromptMode::ZeroShotTriplet => ZS_TRIPLET_V1,
            PromptMode::ZeroShotQuadruplet => ZS_QUAD_V1,
            PromptMode::FinetuneTriplet => FT_TRIPLET_V1,
        }
    }

    fn is_zero_shot(self) -> bool {
        self != PromptMode::FinetuneTriplet
    }
}

/// One few-shot example is one document; its frames become `#frameid`
/// separated segments.
#[derive(Debug, Clone)]
pub struct PromptSpec {
    pub mode: PromptMode,
    pub vocab: Vocabulary,
    pub fewshot: Vec<SceneGraphDocument>,
    pub importance_ordered: bool,
}

impl PromptSpec {
    pub fn new(mode: PromptMode, vocab: Vocabulary) -> Self {
        Self {
            mode,
            vocab,
            fewshot: Vec::new(),
            importance_ordered: false,
        }
    }

    pub fn with_fewshot(mut self, examples: Vec<SceneGraphDocument>) -> Self {
        self.fewshot = examples;
        self
    }

    pub fn importance_ordered(mut self, on: bool) -> Self {
        self.importance_ordered = on;
        self
    }
}

fn bullet_list<'a>(labels: impl Iterator<Item = &'a String>) -> String {
    labels.map(|l| format!("- {l}")).collect::<Vec<_>>().join("\n")
}

/// `[1] dog, [2] cat`, numbered in order of first mention.
fn object_ids(frames: &[FrameGraph]) -> String {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut order = Vec::new();
    for st in frames.iter().flat_map(|f| &f.triplets) {
        for label in [st.triplet.subject(), st.triplet.object()] {
            if !ids.contains_key(label) {
                ids.insert(label, order.len() + 1);
                order.push(label);
            }
        }
    }
    order
        .iter()
        .enumerate()
        .map(|(i, l)| format!("[{}] {l}", i + 1))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Example frames, reordered by importance when requested.
pub fn example_frames(doc: &SceneGraphDocument, importance: Option<(&EmbeddingSpace, &ImportanceConfig)>) -> Result<Vec<FrameGraph>> {
    match importance {
        None => Ok(doc.frames.clone()),
        Some((space, cfg)) => doc
            .frames
            .iter()
            .map(|f| Ok(rank_by_importance(f, &frame_key(&doc.video_id, &f.frame_id), space, cfg)?.to_frame(&f.frame_id)))
            .collect(),
    }
}

/// The response text of one example, exactly as a model should produce it.
pub fn example_response(frames: &[FrameGraph], spec: &PromptSpec) -> Result<String> {
    let body = serialize_frames(frames, spec.mode.format(), spec.vocab.split.as_ref())?;
    Ok(match spec.mode {
        PromptMode::ZeroShotQuadruplet => format!("Objects: {}\n{body}", object_ids(frames)),
        _ => body,
    })
}

pub fn build_prompt(spec: &PromptSpec, importance: Option<(&EmbeddingSpace, &ImportanceConfig)>) -> Result<String> {
    if spec.vocab.objects.is_empty() || spec.vocab.predicates.is_empty() {
        return Err(Error::Config("prompt vocabulary is empty".to_string()));
    }
    if spec.importance_ordered && spec.mode.is_zero_shot() && spec.fewshot.is_empty() {
        return Err(Error::Config(
            "importance-ordered zero-shot prompts need at least one few-shot example".to_string(),
        ));
    }
    let importance = if spec.importance_ordered {
        Some(importance.ok_or_else(|| Error::Config("importance ordering needs embeddings".to_string()))?)
    } else {
        None
    };

    let mut examples = String::new();
    for (i, doc) in spec.fewshot.iter().enumerate() {
        let frames = example_frames(doc, importance)?;
        examples.push_str(&format!("\nExample {}:\n{}\n", i + 1, example_response(&frames, spec)?));
    }

    let mut text = spec
        .mode
        .template()
        .replace("{objects}", &bullet_list(spec.vocab.objects.iter()))
        .replace("{frame_separator}", FRAME_SEPARATOR)
        .replace("{end_sentinel}", END_SENTINEL);
    if spec.mode == PromptMode::ZeroShotQuadruplet {
        let split = spec
            .vocab
            .split
            .as_ref()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Config("quadruplet prompts need action and spatial predicate lists".to_string()))?;
        text = text
            .replace("{actions}", &bullet_list(split.actions.iter()))
            .replace("{spatial}", &bullet_list(split.spatial.iter()));
    } else {
        text = text.replace("{predicates}", &bullet_list(spec.vocab.predicates.iter()));
    }
    // examples last so that labels inside them are never taken for placeholders
    Ok(text.replace("{examples}", &examples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{triplet_sentence, DocumentKind, EmbeddingTable, Triplet};
    use crate::parser::parse_generation;

    fn t(s: &str, p: &str, o: &str) -> Triplet {
        Triplet::new(s, p, o).unwrap()
    }

    fn vocab() -> Vocabulary {
        Vocabulary::new(&["person", "cup", "chair"], &["holding", "sitting on", "looking at"]).unwrap()
    }

    fn example() -> SceneGraphDocument {
        SceneGraphDocument::new(
            "ex",
            vec![
                FrameGraph::from_triplets("1", [t("person", "holding", "cup"), t("person", "sitting on", "chair")]),
                FrameGraph::from_triplets("2", [t("person", "looking at", "cup")]),
            ],
            DocumentKind::Prediction,
        )
        .unwrap()
    }

    #[test]
    fn finetune_prompt_embeds_examples() {
        let spec = PromptSpec::new(PromptMode::FinetuneTriplet, vocab()).with_fewshot(vec![example()]);
        let p = build_prompt(&spec, None).unwrap();
        let block = p.split("Example 1:\n").nth(1).unwrap();
        assert_eq!(block.matches(END_SENTINEL).count(), 1);
        assert_eq!(block.matches(FRAME_SEPARATOR).count(), 1);
        assert_eq!(p, build_prompt(&spec, None).unwrap());
        for label in ["person", "cup", "chair", "holding", "sitting on", "looking at"] {
            assert_eq!(p.matches(&format!("- {label}\n")).count(), 1, "{label}");
        }
    }

    #[test]
    fn example_round_trips_through_parser() {
        let spec = PromptSpec::new(PromptMode::ZeroShotTriplet, vocab());
        let ex = example();
        let text = example_response(&ex.frames, &spec).unwrap();
        let ids: Vec<String> = ex.frames.iter().map(|f| f.frame_id.clone()).collect();
        let (frames, report) = parse_generation(&text, RelationFormat::Triplet, &ids);
        assert_eq!(frames, ex.frames);
        assert_eq!(report.lines_rejected, 0);
    }

    #[test]
    fn quadruplet_prompt() {
        let v = Vocabulary::new(&["dog", "cat"], &["chase behind", "behind", "chase"])
            .unwrap()
            .with_split(&["chase"], &["behind"]);
        let ex = SceneGraphDocument::new(
            "ex",
            vec![FrameGraph::from_triplets("1", [t("dog", "chase behind", "cat"), t("cat", "behind", "dog")])],
            DocumentKind::Prediction,
        )
        .unwrap();
        let spec = PromptSpec::new(PromptMode::ZeroShotQuadruplet, v.clone()).with_fewshot(vec![ex.clone()]);
        let p = build_prompt(&spec, None).unwrap();
        assert!(p.contains("Objects: [1] dog, [2] cat\n(dog, chase, behind, cat)\n(cat, , behind, dog)\n#sgend"));
        let (frames, _) = parse_generation(&example_response(&ex.frames, &spec).unwrap(), RelationFormat::Quadruplet, &["1".to_string()]);
        assert_eq!(frames, ex.frames);

        let untagged = Vocabulary::new(&["dog", "cat"], &["chase"]).unwrap();
        assert!(build_prompt(&PromptSpec::new(PromptMode::ZeroShotQuadruplet, untagged), None).is_err());
    }

    #[test]
    fn importance_ordering_requires_examples_and_reorders() {
        let spec = PromptSpec::new(PromptMode::ZeroShotTriplet, vocab()).importance_ordered(true);
        assert!(build_prompt(&spec, None).is_err());

        let ex = example();
        let mut entries: Vec<(String, Vec<f64>)> = vec![("frame://ex/1".into(), vec![1.0, 0.0]), ("frame://ex/2".into(), vec![1.0, 0.0])];
        for (st, angle) in ex.frames.iter().flat_map(|f| &f.triplets).zip([1.0f64, 0.2, 0.5]) {
            entries.push((triplet_sentence(&st.triplet), vec![angle.cos(), angle.sin()]));
        }
        let table = EmbeddingTable::from_entries(2, entries).unwrap();
        let space = EmbeddingSpace::shared(&table);
        let cfg = ImportanceConfig::default();
        let spec = spec.with_fewshot(vec![ex.clone()]);
        let p = build_prompt(&spec, Some((&space, &cfg))).unwrap();
        let ranked = rank_by_importance(&ex.frames[0], "frame://ex/1", &space, &cfg).unwrap();
        assert_eq!(ranked.entries[0].triplet.triplet, t("person", "sitting on", "chair"));
        assert!(p.contains("(person, sitting on, chair)\n(person, holding, cup)\n#frameid"));
    }
}
