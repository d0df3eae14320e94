//! Synthetic ground truth and predictions with a known number of correct
//! triplets per frame.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{BoundingBox, DocumentKind, FrameGraph, SceneGraphDocument, ScoredTriplet, Triplet, Vocabulary};

const CANVAS_W: f64 = 640.0;
const CANVAS_H: f64 = 480.0;

/// Combination spaces up to this size are enumerated and shuffled rather
/// than rejection-sampled.
const ENUMERATE_LIMIT: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub videos: usize,
    pub frames_per_video: usize,
    pub gt_per_frame: usize,
    pub correct_k: usize,
    pub filler_k: usize,
    /// Shift of each predicted box as a fraction of its size.
    pub box_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            videos: 1,
            frames_per_video: 1,
            gt_per_frame: 7,
            correct_k: 7,
            filler_k: 0,
            box_jitter: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.correct_k > self.gt_per_frame {
            return Err(Error::Config(format!(
                "correct_k {} exceeds gt_per_frame {}",
                self.correct_k, self.gt_per_frame
            )));
        }
        if !(self.box_jitter.is_finite() && self.box_jitter >= 0.0) {
            return Err(Error::Config(format!("box_jitter {} must be >= 0", self.box_jitter)));
        }
        Ok(())
    }
}

struct Labels {
    objects: Vec<String>,
    predicates: Vec<String>,
}

impl Labels {
    fn combinations(&self) -> usize {
        self.objects.len().saturating_mul(self.objects.len()).saturating_mul(self.predicates.len())
    }

    fn triplet(&self, index: usize) -> Result<Triplet> {
        let n_o = self.objects.len();
        let p = index % self.predicates.len();
        let rest = index / self.predicates.len();
        Triplet::new(&self.objects[rest / n_o], &self.predicates[p], &self.objects[rest % n_o])
    }
}

/// `n` distinct combination indices in random order.
fn distinct_indices(rng: &mut ChaCha8Rng, space: usize, n: usize) -> Vec<usize> {
    if space <= ENUMERATE_LIMIT {
        let mut all: Vec<usize> = (0..space).collect();
        let (head, _) = all.partial_shuffle(rng, n);
        return head.to_vec();
    }
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let i = rng.random_range(0..space);
        if seen.insert(i) {
            out.push(i);
        }
    }
    out
}

fn random_box(rng: &mut ChaCha8Rng) -> Result<BoundingBox> {
    let w = rng.random_range(16.0..200.0);
    let h = rng.random_range(16.0..200.0);
    let x1 = rng.random_range(0.0..CANVAS_W - w);
    let y1 = rng.random_range(0.0..CANVAS_H - h);
    BoundingBox::new(x1, y1, x1 + w, y1 + h)
}

fn jitter(rng: &mut ChaCha8Rng, b: &BoundingBox, amount: f64) -> Result<BoundingBox> {
    let dx = amount * b.width() * rng.random_range(-1.0..=1.0);
    let dy = amount * b.height() * rng.random_range(-1.0..=1.0);
    BoundingBox::new(b.x1() + dx, b.y1() + dy, b.x2() + dx, b.y2() + dy)
}

/// Per frame: `gt_per_frame` distinct boxed ground-truth triplets; the
/// prediction is the first `correct_k` of them with jittered boxes,
/// followed by `filler_k` distinct triplets whose label combination does
/// not occur in the frame's ground truth. One ChaCha8 stream per seed.
pub fn generate(cfg: &SynthConfig, vocab: &Vocabulary) -> Result<(Vec<SceneGraphDocument>, Vec<SceneGraphDocument>)> {
    cfg.validate()?;
    let labels = Labels {
        objects: vocab.objects.iter().cloned().collect(),
        predicates: vocab.predicates.iter().cloned().collect(),
    };
    let needed = cfg.gt_per_frame + cfg.filler_k;
    if labels.combinations() < needed {
        return Err(Error::Config(format!(
            "vocabulary allows {} distinct triplets, {} needed per frame",
            labels.combinations(),
            needed
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gts = Vec::with_capacity(cfg.videos);
    let mut preds = Vec::with_capacity(cfg.videos);
    for v in 0..cfg.videos {
        let video_id = format!("synth_{v:04}");
        let mut gt_frames = Vec::with_capacity(cfg.frames_per_video);
        let mut pred_frames = Vec::with_capacity(cfg.frames_per_video);
        for f in 0..cfg.frames_per_video {
            let frame_id = format!("{:06}", f + 1);
            let indices = distinct_indices(&mut rng, labels.combinations(), needed);
            let mut gt = Vec::with_capacity(cfg.gt_per_frame);
            for &i in &indices[..cfg.gt_per_frame] {
                gt.push(ScoredTriplet::boxed(labels.triplet(i)?, random_box(&mut rng)?, random_box(&mut rng)?, 0));
            }
            let mut pred = Vec::with_capacity(cfg.correct_k + cfg.filler_k);
            for g in &gt[..cfg.correct_k] {
                let (Some(sb), Some(ob)) = (g.subject_box, g.object_box) else {
                    return Err(Error::Invariant("synthetic ground truth without boxes".into()));
                };
                let sb = jitter(&mut rng, &sb, cfg.box_jitter)?;
                let ob = jitter(&mut rng, &ob, cfg.box_jitter)?;
                pred.push(ScoredTriplet::boxed(g.triplet.clone(), sb, ob, 0));
            }
            for &i in &indices[cfg.gt_per_frame..] {
                pred.push(ScoredTriplet::boxed(labels.triplet(i)?, random_box(&mut rng)?, random_box(&mut rng)?, 0));
            }
            gt_frames.push(FrameGraph::new(frame_id.clone(), gt));
            pred_frames.push(FrameGraph::new(frame_id, pred));
        }
        gts.push(SceneGraphDocument::new(video_id.clone(), gt_frames, DocumentKind::GroundTruth)?);
        preds.push(SceneGraphDocument::new(video_id, pred_frames, DocumentKind::Prediction)?);
    }
    Ok((gts, preds))
}
