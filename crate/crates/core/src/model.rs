//! Shared data model: boxes, triplets, frames, documents, vocabularies and
//! embedding tables.
//!
//! All types are plain values. Invariants are checked by the constructors;
//! once built, nothing here mutates behind a shared reference.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical form used for every label: lowercase, underscores read as
/// spaces, whitespace collapsed, trailing punctuation removed.
pub fn normalize_label(raw: &str) -> String {
    let spaced = raw.replace('_', " ").to_lowercase();
    let collapsed = spaced.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

/// Axis-aligned box in pixel corner coordinates, `(x1, y1)` top-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let invalid = |reason| Error::InvalidBox {
            x1,
            y1,
            x2,
            y2,
            reason,
        };
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        if x1 > x2 || y1 > y2 {
            return Err(invalid("corners out of order"));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn from_array(c: [f64; 4]) -> Result<Self> {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }

    pub fn union_area(&self, other: &BoundingBox) -> f64 {
        self.area() + other.area() - self.intersection_area(other)
    }
}

/// Intersection over union. Zero when the union is empty.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let union = a.union_area(b);
    if union <= 0.0 {
        return 0.0;
    }
    (a.intersection_area(b) / union).clamp(0.0, 1.0)
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            key: "<cosine operand>".to_string(),
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::DegenerateEmbedding("zero-norm vector".to_string()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A `⟨subject, predicate, object⟩` relation with normalized labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    subject: String,
    predicate: String,
    object: String,
}

impl Triplet {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Result<Self> {
        let t = Self {
            subject: normalize_label(subject),
            predicate: normalize_label(predicate),
            object: normalize_label(object),
        };
        for (role, label) in [
            ("subject", &t.subject),
            ("predicate", &t.predicate),
            ("object", &t.object),
        ] {
            if label.is_empty() {
                return Err(Error::EmptyLabel {
                    role,
                    subject: subject.to_string(),
                    predicate: predicate.to_string(),
                    object: object.to_string(),
                });
            }
        }
        Ok(t)
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn predicate(&self) -> &str {
        &self.predicate
    }

    pub fn object(&self) -> &str {
        &self.object
    }

    /// Same triplet with one or more labels replaced (labels re-normalized).
    pub fn with_labels(&self, subject: &str, predicate: &str, object: &str) -> Result<Self> {
        Self::new(subject, predicate, object)
    }

    pub fn is_symmetric(&self) -> bool {
        self.subject == self.object
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.predicate, self.object)
    }
}

/// Text rendering of a triplet used as its embedding key.
pub fn triplet_sentence(t: &Triplet) -> String {
    format!("a {} is {} {}", t.subject, t.predicate, t.object)
}

/// Embedding key of a video frame.
pub fn frame_key(video_id: &str, frame_id: &str) -> String {
    format!("frame://{video_id}/{frame_id}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTriplet {
    pub triplet: Triplet,
    pub score: Option<f64>,
    pub subject_box: Option<BoundingBox>,
    pub object_box: Option<BoundingBox>,
    /// 1-based position in the producing model's output order.
    pub rank: u32,
}

impl ScoredTriplet {
    pub fn unboxed(triplet: Triplet, rank: u32) -> Self {
        Self {
            triplet,
            score: None,
            subject_box: None,
            object_box: None,
            rank,
        }
    }

    pub fn boxed(triplet: Triplet, subject_box: BoundingBox, object_box: BoundingBox, rank: u32) -> Self {
        Self {
            triplet,
            score: None,
            subject_box: Some(subject_box),
            object_box: Some(object_box),
            rank,
        }
    }

    pub fn has_boxes(&self) -> bool {
        self.subject_box.is_some() && self.object_box.is_some()
    }

    pub fn without_boxes(&self) -> Self {
        Self {
            subject_box: None,
            object_box: None,
            ..self.clone()
        }
    }
}

/// Triplets of one frame. List order is the rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGraph {
    pub frame_id: String,
    pub triplets: Vec<ScoredTriplet>,
}

impl FrameGraph {
    pub fn new(frame_id: impl Into<String>, triplets: Vec<ScoredTriplet>) -> Self {
        let mut frame = Self {
            frame_id: frame_id.into(),
            triplets,
        };
        frame.renumber();
        frame
    }

    pub fn empty(frame_id: impl Into<String>) -> Self {
        Self::new(frame_id, Vec::new())
    }

    pub fn from_triplets(frame_id: impl Into<String>, triplets: impl IntoIterator<Item = Triplet>) -> Self {
        let triplets = triplets
            .into_iter()
            .map(|t| ScoredTriplet::unboxed(t, 0))
            .collect();
        Self::new(frame_id, triplets)
    }

    /// Reassign ranks 1..=n from list order.
    pub fn renumber(&mut self) {
        for (i, t) in self.triplets.iter_mut().enumerate() {
            t.rank = i as u32 + 1;
        }
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn check_ranks(&self) -> Result<()> {
        for (i, t) in self.triplets.iter().enumerate() {
            if t.rank as usize != i + 1 {
                return Err(Error::Invariant(format!(
                    "frame {}: triplet at position {} has rank {}",
                    self.frame_id,
                    i + 1,
                    t.rank
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    GroundTruth,
    Prediction,
}

/// Per-video collection of frame graphs in temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraphDocument {
    pub video_id: String,
    pub frames: Vec<FrameGraph>,
    pub kind: DocumentKind,
}

impl SceneGraphDocument {
    pub fn new(video_id: impl Into<String>, frames: Vec<FrameGraph>, kind: DocumentKind) -> Result<Self> {
        let doc = Self {
            video_id: video_id.into(),
            frames,
            kind,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.video_id.trim().is_empty() {
            return Err(Error::schema("video", "video_id must be non-empty"));
        }
        let mut seen = BTreeSet::new();
        for frame in &self.frames {
            if !seen.insert(frame.frame_id.as_str()) {
                return Err(Error::schema(
                    format!("video {}", self.video_id),
                    format!("duplicate frame_id {:?}", frame.frame_id),
                ));
            }
            frame.check_ranks()?;
            if self.kind == DocumentKind::GroundTruth {
                if let Some(t) = frame.triplets.iter().find(|t| !t.has_boxes()) {
                    return Err(Error::schema(
                        format!("video {} / frame {} / triplet {}", self.video_id, frame.frame_id, t.rank),
                        "ground truth requires boxes",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn frame(&self, frame_id: &str) -> Option<&FrameGraph> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    pub fn triplet_count(&self) -> usize {
        self.frames.iter().map(FrameGraph::len).sum()
    }

    /// Copy with every box removed, re-tagged as a prediction.
    pub fn strip_boxes(&self) -> Self {
        Self {
            video_id: self.video_id.clone(),
            frames: self
                .frames
                .iter()
                .map(|f| FrameGraph {
                    frame_id: f.frame_id.clone(),
                    triplets: f.triplets.iter().map(ScoredTriplet::without_boxes).collect(),
                })
                .collect(),
            kind: DocumentKind::Prediction,
        }
    }
}

/// Optional split of predicates into action and spatial parts, used by the
/// quadruplet format.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredicateSplit {
    pub actions: BTreeSet<String>,
    pub spatial: BTreeSet<String>,
}

impl PredicateSplit {
    /// Decompose a merged predicate into `(action, spatial)`; either part may
    /// be empty. `None` when the predicate cannot be built from the lists.
    pub fn split(&self, predicate: &str) -> Option<(String, String)> {
        if self.actions.contains(predicate) {
            return Some((predicate.to_string(), String::new()));
        }
        if self.spatial.contains(predicate) {
            return Some((String::new(), predicate.to_string()));
        }
        // longest action prefix first so "walk" does not shadow "walk past"
        let mut actions: Vec<&String> = self.actions.iter().collect();
        actions.sort_by_key(|a| std::cmp::Reverse(a.len()));
        for action in actions {
            if let Some(rest) = predicate.strip_prefix(action.as_str()) {
                if let Some(spatial) = rest.strip_prefix(' ') {
                    if self.spatial.contains(spatial) {
                        return Some((action.clone(), spatial.to_string()));
                    }
                }
            }
        }
        None
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty() && self.spatial.is_empty()
    }
}

/// Closed label sets of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub objects: BTreeSet<String>,
    pub predicates: BTreeSet<String>,
    pub split: Option<PredicateSplit>,
}

impl Vocabulary {
    pub fn new<S: AsRef<str>>(objects: &[S], predicates: &[S]) -> Result<Self> {
        let objects: BTreeSet<String> = objects
            .iter()
            .map(|s| normalize_label(s.as_ref()))
            .filter(|s| !s.is_empty())
            .collect();
        let predicates: BTreeSet<String> = predicates
            .iter()
            .map(|s| normalize_label(s.as_ref()))
            .filter(|s| !s.is_empty())
            .collect();
        if objects.is_empty() {
            return Err(Error::schema("vocabulary", "object list is empty"));
        }
        if predicates.is_empty() {
            return Err(Error::schema("vocabulary", "predicate list is empty"));
        }
        Ok(Self {
            objects,
            predicates,
            split: None,
        })
    }

    pub fn with_split<S: AsRef<str>>(mut self, actions: &[S], spatial: &[S]) -> Self {
        let norm = |v: &[S]| -> BTreeSet<String> {
            v.iter()
                .map(|s| normalize_label(s.as_ref()))
                .filter(|s| !s.is_empty())
                .collect()
        };
        self.split = Some(PredicateSplit {
            actions: norm(actions),
            spatial: norm(spatial),
        });
        self
    }

    /// Generated labels `object_0..` and `predicate_0..`.
    pub fn synthetic(objects: usize, predicates: usize) -> Result<Self> {
        let o: Vec<String> = (0..objects).map(|i| format!("object {i}")).collect();
        let p: Vec<String> = (0..predicates).map(|i| format!("predicate {i}")).collect();
        Self::new(&o, &p)
    }
}

/// Key → unit vector map. Vectors are normalized on insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("embedding dimension must be positive".to_string()));
        }
        Ok(Self {
            dimension,
            entries: HashMap::new(),
        })
    }

    pub fn from_entries<K: Into<String>>(dimension: usize, entries: impl IntoIterator<Item = (K, Vec<f64>)>) -> Result<Self> {
        let mut table = Self::new(dimension)?;
        for (k, v) in entries {
            table.insert(k, v)?;
        }
        Ok(table)
    }

    pub fn insert(&mut self, key: impl Into<String>, mut vector: Vec<f64>) -> Result<()> {
        let key = key.into();
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                key,
                expected: self.dimension,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateEmbedding(format!("{key:?} has non-finite components")));
        }
        let n = norm(&vector);
        if n == 0.0 {
            return Err(Error::DegenerateEmbedding(format!("{key:?} has zero norm")));
        }
        vector.iter_mut().for_each(|x| *x /= n);
        self.entries.insert(key, vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn require(&self, key: &str) -> Result<&[f64]> {
        self.get(key)
            .ok_or_else(|| Error::MissingEmbeddings(vec![key.to_string()]))
    }

    /// Cosine between two stored entries.
    pub fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        match (self.get(a), self.get(b)) {
            (Some(u), Some(v)) => cosine(u, v),
            (u, v) => {
                let mut missing = Vec::new();
                if u.is_none() {
                    missing.push(a.to_string());
                }
                if v.is_none() && a != b {
                    missing.push(b.to_string());
                }
                Err(Error::MissingEmbeddings(missing))
            }
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
