//! Matching and retrieval metrics: Recall@K / Precision@K under SGCLS*,
//! frame-wise SGDet and temporally aggregated SGDet, per-predicate class
//! means, and per-role entity breakdowns.
//!
//! Matching is greedy in prediction rank order under the No Constraints
//! regime: each prediction takes the first unmatched ground-truth triplet
//! with identical labels that also passes the box test, and every
//! ground-truth triplet is consumed at most once. Greedy matching is
//! prefix-consistent, so the hits within the top K are obtained from a
//! single match over the full prediction list.
//!
//! Per-frame values are averaged frame → video → corpus, unweighted at
//! each level, unless micro averaging is requested.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{iou, BoundingBox, FrameGraph, SceneGraphDocument, ScoredTriplet, Triplet};
use crate::par::Exec;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// The K columns used throughout the result tables.
pub const DEFAULT_KS: [usize; 5] = [1, 10, 20, 50, 100];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskVariant {
    SgclsStar,
    Sgdet,
    SgdetAgg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalTask {
    variant: TaskVariant,
    iou_threshold: f64,
}

impl EvalTask {
    /// Scene-graph classification on predicted boxes: labels only.
    pub fn sgcls_star() -> Self {
        Self {
            variant: TaskVariant::SgclsStar,
            iou_threshold: 0.0,
        }
    }

    pub fn sgdet() -> Self {
        Self {
            variant: TaskVariant::Sgdet,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
        }
    }

    pub fn sgdet_agg() -> Self {
        Self {
            variant: TaskVariant::SgdetAgg,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
        }
    }

    pub fn new(variant: TaskVariant, iou_threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&iou_threshold) {
            return Err(Error::Config(format!("IoU threshold {iou_threshold} outside [0, 1]")));
        }
        if variant == TaskVariant::SgclsStar && iou_threshold != 0.0 {
            return Err(Error::Config("sgcls-star always uses IoU threshold 0".to_string()));
        }
        Ok(Self { variant, iou_threshold })
    }

    pub fn variant(&self) -> TaskVariant {
        self.variant
    }

    pub fn iou_threshold(&self) -> f64 {
        self.iou_threshold
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            TaskVariant::SgclsStar => "sgcls-star",
            TaskVariant::Sgdet => "sgdet",
            TaskVariant::SgdetAgg => "sgdet-agg",
        }
    }
}

/// `(prediction rank, ground-truth index)` pairs of one frame.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchResult {
    pub pairs: Vec<(u32, usize)>,
}

impl MatchResult {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn boxes_pass(pred: &ScoredTriplet, gt: &ScoredTriplet, threshold: f64) -> bool {
    if threshold <= 0.0 {
        return true;
    }
    match (pred.subject_box, pred.object_box, gt.subject_box, gt.object_box) {
        (Some(ps), Some(po), Some(gs), Some(go)) => iou(&ps, &gs) >= threshold && iou(&po, &go) >= threshold,
        _ => false,
    }
}

/// Greedy rank-order matching of one frame with frame-wise IoU. A
/// prediction without boxes cannot match when the threshold is positive.
pub fn match_frame(pred: &FrameGraph, gt: &FrameGraph, task: &EvalTask) -> MatchResult {
    let threshold = task.iou_threshold;
    let mut used = vec![false; gt.len()];
    let mut pairs = Vec::new();
    for p in &pred.triplets {
        let hit = gt
            .triplets
            .iter()
            .enumerate()
            .position(|(j, g)| !used[j] && g.triplet == p.triplet && boxes_pass(p, g, threshold));
        if let Some(j) = hit {
            used[j] = true;
            pairs.push((p.rank, j));
        }
    }
    MatchResult { pairs }
}

/// Pair prediction frames with ground-truth frames by id, in ground-truth
/// order. Both documents must cover the same frame ids.
pub fn pair_frames<'a>(pred: &'a SceneGraphDocument, gt: &'a SceneGraphDocument) -> Result<Vec<(&'a FrameGraph, &'a FrameGraph)>> {
    if pred.video_id != gt.video_id {
        return Err(Error::schema(
            format!("video {}", gt.video_id),
            format!("paired with prediction video {}", pred.video_id),
        ));
    }
    let by_id: HashMap<&str, &FrameGraph> = pred.frames.iter().map(|f| (f.frame_id.as_str(), f)).collect();
    let mut pairs = Vec::with_capacity(gt.frames.len());
    for g in &gt.frames {
        let p = by_id.get(g.frame_id.as_str()).ok_or_else(|| {
            Error::schema(
                format!("video {} / frame {}", gt.video_id, g.frame_id),
                "frame missing from predictions",
            )
        })?;
        pairs.push((*p, g));
    }
    if pred.frames.len() != gt.frames.len() {
        let gt_ids: std::collections::HashSet<&str> = gt.frames.iter().map(|f| f.frame_id.as_str()).collect();
        let extra = pred
            .frames
            .iter()
            .find(|f| !gt_ids.contains(f.frame_id.as_str()))
            .map(|f| f.frame_id.clone())
            .unwrap_or_default();
        return Err(Error::schema(
            format!("video {} / frame {}", gt.video_id, extra),
            "frame missing from ground truth",
        ));
    }
    Ok(pairs)
}

/// Pair prediction documents with ground-truth documents by video id, in
/// ground-truth order.
pub fn pair_documents<'a>(preds: &'a [SceneGraphDocument], gts: &'a [SceneGraphDocument]) -> Result<Vec<(&'a SceneGraphDocument, &'a SceneGraphDocument)>> {
    let by_id: HashMap<&str, &SceneGraphDocument> = preds.iter().map(|d| (d.video_id.as_str(), d)).collect();
    let mut pairs = Vec::with_capacity(gts.len());
    for g in gts {
        let p = by_id
            .get(g.video_id.as_str())
            .ok_or_else(|| Error::schema(format!("video {}", g.video_id), "video missing from predictions"))?;
        pairs.push((*p, g));
    }
    if preds.len() != gts.len() {
        let gt_ids: std::collections::HashSet<&str> = gts.iter().map(|d| d.video_id.as_str()).collect();
        if let Some(extra) = preds.iter().find(|d| !gt_ids.contains(d.video_id.as_str())) {
            return Err(Error::schema(format!("video {}", extra.video_id), "video missing from ground truth"));
        }
        return Err(Error::schema("predictions", "duplicate video ids"));
    }
    Ok(pairs)
}

/// A maximal run of consecutive frames holding the same triplet. The k-th
/// occurrence of a label triplet within a frame continues the k-th lane of
/// the previous frame.
#[derive(Debug)]
struct Track<'a> {
    triplet: &'a Triplet,
    /// `(time index, position within frame)`, consecutive in time.
    members: Vec<(usize, usize)>,
}

impl Track<'_> {
    fn start(&self) -> usize {
        self.members[0].0
    }

    fn end(&self) -> usize {
        self.members[self.members.len() - 1].0
    }
}

fn build_tracks<'a>(frames: &[&'a FrameGraph]) -> Vec<Track<'a>> {
    let mut tracks: Vec<Track<'a>> = Vec::new();
    let mut open: HashMap<(&Triplet, usize), usize> = HashMap::new();
    for (t, frame) in frames.iter().enumerate() {
        let mut occurrences: HashMap<&Triplet, usize> = HashMap::new();
        let mut next_open = HashMap::with_capacity(frame.len());
        for (pos, st) in frame.triplets.iter().enumerate() {
            let k = occurrences.entry(&st.triplet).or_insert(0);
            let key = (&st.triplet, *k);
            *k += 1;
            let idx = match open.get(&key) {
                Some(&idx) => idx,
                None => {
                    tracks.push(Track {
                        triplet: &st.triplet,
                        members: Vec::new(),
                    });
                    tracks.len() - 1
                }
            };
            tracks[idx].members.push((t, pos));
            next_open.insert(key, idx);
        }
        open = next_open;
    }
    tracks
}

#[derive(Clone, Copy)]
enum Role {
    Subject,
    Object,
}

fn role_box(st: &ScoredTriplet, role: Role) -> Option<BoundingBox> {
    match role {
        Role::Subject => st.subject_box,
        Role::Object => st.object_box,
    }
}

/// Volume IoU of one role over the union of two tracks' frame spans. A
/// frame covered by one side only adds that side's area to the union; a
/// missing box counts as zero area.
fn volume_iou(pred: &Track, pred_frames: &[&FrameGraph], gt: &Track, gt_frames: &[&FrameGraph], role: Role) -> f64 {
    let pred_at = |t: usize| {
        pred.members
            .get(t.wrapping_sub(pred.start()))
            .filter(|_| t >= pred.start())
            .map(|&(_, pos)| role_box(&pred_frames[t].triplets[pos], role))
    };
    let gt_at = |t: usize| {
        gt.members
            .get(t.wrapping_sub(gt.start()))
            .filter(|_| t >= gt.start())
            .map(|&(_, pos)| role_box(&gt_frames[t].triplets[pos], role))
    };
    let area = |b: Option<BoundingBox>| b.map(|b| b.area()).unwrap_or(0.0);
    let (mut inter, mut union) = (0.0, 0.0);
    for t in pred.start().min(gt.start())..=pred.end().max(gt.end()) {
        match (pred_at(t), gt_at(t)) {
            (Some(Some(p)), Some(Some(g))) => {
                inter += p.intersection_area(&g);
                union += p.union_area(&g);
            }
            (Some(p), Some(g)) => union += area(p) + area(g),
            (Some(p), None) => union += area(p),
            (None, Some(g)) => union += area(g),
            (None, None) => {}
        }
    }
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Temporally aggregated matching for one video. Tracks with equal labels
/// and overlapping spans match greedily (prediction tracks ordered by start
/// frame, then rank) when `min(subject vIoU, object vIoU) >= threshold`.
/// Returns per-frame pairs for the frames where both matched tracks are
/// present, in ground-truth frame order.
pub fn aggregate_iou_match(pred: &SceneGraphDocument, gt: &SceneGraphDocument, threshold: f64) -> Result<Vec<MatchResult>> {
    let pairs = pair_frames(pred, gt)?;
    let pred_frames: Vec<&FrameGraph> = pairs.iter().map(|(p, _)| *p).collect();
    let gt_frames: Vec<&FrameGraph> = pairs.iter().map(|(_, g)| *g).collect();
    let pred_tracks = build_tracks(&pred_frames);
    let gt_tracks = build_tracks(&gt_frames);

    let mut used = vec![false; gt_tracks.len()];
    let mut results = vec![MatchResult::default(); gt_frames.len()];
    for pt in &pred_tracks {
        let hit = gt_tracks.iter().enumerate().position(|(j, gtk)| {
            !used[j]
                && gtk.triplet == pt.triplet
                && gtk.start() <= pt.end()
                && pt.start() <= gtk.end()
                && {
                    let s = volume_iou(pt, &pred_frames, gtk, &gt_frames, Role::Subject);
                    let o = volume_iou(pt, &pred_frames, gtk, &gt_frames, Role::Object);
                    s.min(o) >= threshold
                }
        });
        let Some(j) = hit else { continue };
        used[j] = true;
        let gtk = &gt_tracks[j];
        for &(t, ppos) in &pt.members {
            if t < gtk.start() || t > gtk.end() {
                continue;
            }
            let (_, gpos) = gtk.members[t - gtk.start()];
            results[t].pairs.push((pred_frames[t].triplets[ppos].rank, gpos));
        }
    }
    for r in &mut results {
        r.pairs.sort_unstable();
    }
    Ok(results)
}

/// Match outcome of one frame, enough to derive every top-K metric.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub frame_id: String,
    gt_classes: Vec<String>,
    pred_classes: Vec<String>,
    /// By prediction rank − 1.
    pred_hit: Vec<bool>,
    /// By ground-truth index: rank of the prediction that consumed it.
    gt_hit_rank: Vec<Option<u32>>,
}

impl FrameOutcome {
    pub fn new(pred: &FrameGraph, gt: &FrameGraph, matches: &MatchResult) -> Result<Self> {
        let mut pred_hit = vec![false; pred.len()];
        let mut gt_hit_rank = vec![None; gt.len()];
        for &(rank, j) in &matches.pairs {
            let slot = pred_hit
                .get_mut((rank as usize).wrapping_sub(1))
                .ok_or_else(|| Error::Invariant(format!("frame {}: match rank {rank} out of range", gt.frame_id)))?;
            let gslot = gt_hit_rank
                .get_mut(j)
                .ok_or_else(|| Error::Invariant(format!("frame {}: gt index {j} out of range", gt.frame_id)))?;
            if *slot || gslot.is_some() {
                return Err(Error::Invariant(format!("frame {}: match is not one-to-one", gt.frame_id)));
            }
            *slot = true;
            *gslot = Some(rank);
        }
        Ok(Self {
            frame_id: gt.frame_id.clone(),
            gt_classes: gt.triplets.iter().map(|t| t.triplet.predicate().to_string()).collect(),
            pred_classes: pred.triplets.iter().map(|t| t.triplet.predicate().to_string()).collect(),
            pred_hit,
            gt_hit_rank,
        })
    }

    pub fn gt_count(&self) -> usize {
        self.gt_classes.len()
    }

    pub fn predicted(&self) -> usize {
        self.pred_classes.len()
    }

    /// Predictions considered at K: `min(K, returned)`.
    pub fn returned(&self, k: usize) -> usize {
        k.min(self.pred_hit.len())
    }

    /// Matched predictions among the first K.
    pub fn hits(&self, k: usize) -> usize {
        self.pred_hit[..self.returned(k)].iter().filter(|&&h| h).count()
    }

    /// `None` for frames without ground truth.
    pub fn recall(&self, k: usize) -> Option<f64> {
        (self.gt_count() > 0).then(|| self.hits(k) as f64 / self.gt_count() as f64)
    }

    /// `None` when nothing was returned.
    pub fn precision(&self, k: usize) -> Option<f64> {
        let returned = self.returned(k);
        (returned > 0).then(|| self.hits(k) as f64 / returned as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoOutcome {
    pub video_id: String,
    pub frames: Vec<FrameOutcome>,
}

/// Match every frame of one video under `task`.
pub fn video_outcome(pred: &SceneGraphDocument, gt: &SceneGraphDocument, task: &EvalTask) -> Result<VideoOutcome> {
    let pairs = pair_frames(pred, gt)?;
    let matches: Vec<MatchResult> = match task.variant {
        TaskVariant::SgdetAgg => aggregate_iou_match(pred, gt, task.iou_threshold)?,
        _ => pairs.iter().map(|(p, g)| match_frame(p, g, task)).collect(),
    };
    let frames = pairs
        .iter()
        .zip(&matches)
        .map(|((p, g), m)| FrameOutcome::new(p, g, m))
        .collect::<Result<_>>()?;
    Ok(VideoOutcome {
        video_id: gt.video_id.clone(),
        frames,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Averaging {
    /// Mean over frames, then videos, then corpus.
    #[default]
    Macro,
    /// Pooled counts over the whole corpus.
    Micro,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn macro_average(videos: &[VideoOutcome], frame_value: impl Fn(&FrameOutcome) -> Option<f64>) -> f64 {
    mean(videos.iter().filter_map(|v| mean(v.frames.iter().filter_map(&frame_value)))).unwrap_or(0.0)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecallPrecision {
    pub recall_at: BTreeMap<usize, f64>,
    pub precision_at: BTreeMap<usize, f64>,
}

pub fn summarize(videos: &[VideoOutcome], ks: &[usize], averaging: Averaging) -> RecallPrecision {
    let mut out = RecallPrecision::default();
    for &k in ks {
        let (r, p) = match averaging {
            Averaging::Macro => (
                macro_average(videos, |f| f.recall(k)),
                macro_average(videos, |f| f.precision(k)),
            ),
            Averaging::Micro => {
                let frames = || videos.iter().flat_map(|v| &v.frames);
                let hits: usize = frames().map(|f| f.hits(k)).sum();
                let gt: usize = frames().map(FrameOutcome::gt_count).sum();
                let returned: usize = frames().map(|f| f.returned(k)).sum();
                (ratio(hits, gt), ratio(hits, returned))
            }
        };
        out.recall_at.insert(k, r);
        out.precision_at.insert(k, p);
    }
    out
}

/// Recall@K and Precision@K for one video.
pub fn recall_precision_at(pred: &SceneGraphDocument, gt: &SceneGraphDocument, task: &EvalTask, ks: &[usize]) -> Result<RecallPrecision> {
    let outcome = video_outcome(pred, gt, task)?;
    Ok(summarize(std::slice::from_ref(&outcome), ks, Averaging::Macro))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// Present for K where the class occurs in ground truth.
    pub recall_at: BTreeMap<usize, f64>,
    /// Present for K where the class occurs among the top-K predictions.
    pub precision_at: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerClass {
    pub classes: BTreeMap<String, ClassMetrics>,
    pub mean_recall_at: BTreeMap<usize, f64>,
    pub mean_precision_at: BTreeMap<usize, f64>,
}

#[derive(Default, Clone, Copy)]
struct ClassCounts {
    gt: usize,
    gt_matched: usize,
    pred: usize,
    pred_matched: usize,
}

/// Per-predicate recall and precision with counts pooled over the corpus,
/// and their unweighted means (recall over classes present in ground truth,
/// precision over classes present among the top-K predictions).
pub fn per_class_means(videos: &[VideoOutcome], ks: &[usize]) -> PerClass {
    let mut out = PerClass::default();
    for &k in ks {
        let mut counts: BTreeMap<&str, ClassCounts> = BTreeMap::new();
        for f in videos.iter().flat_map(|v| &v.frames) {
            for (class, hit) in f.gt_classes.iter().zip(&f.gt_hit_rank) {
                let c = counts.entry(class).or_default();
                c.gt += 1;
                if hit.is_some_and(|r| r as usize <= k) {
                    c.gt_matched += 1;
                }
            }
            let returned = f.returned(k);
            for (class, &hit) in f.pred_classes[..returned].iter().zip(&f.pred_hit[..returned]) {
                let c = counts.entry(class).or_default();
                c.pred += 1;
                if hit {
                    c.pred_matched += 1;
                }
            }
        }
        let mut recalls = Vec::new();
        let mut precisions = Vec::new();
        for (class, c) in counts {
            let entry = out.classes.entry(class.to_string()).or_default();
            if c.gt > 0 {
                let r = ratio(c.gt_matched, c.gt);
                entry.recall_at.insert(k, r);
                recalls.push(r);
            }
            if c.pred > 0 {
                let p = ratio(c.pred_matched, c.pred);
                entry.precision_at.insert(k, p);
                precisions.push(p);
            }
        }
        out.mean_recall_at.insert(k, mean(recalls.into_iter()).unwrap_or(0.0));
        out.mean_precision_at.insert(k, mean(precisions.into_iter()).unwrap_or(0.0));
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RoleScore {
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EntityBreakdown {
    pub subject: RoleScore,
    pub predicate: RoleScore,
    pub object: RoleScore,
}

fn multiset_overlap<'a>(pred: impl Iterator<Item = &'a str>, gt: impl Iterator<Item = &'a str>) -> usize {
    let mut pool: HashMap<&str, usize> = HashMap::new();
    for g in gt {
        *pool.entry(g).or_default() += 1;
    }
    pred.filter(|p| match pool.get_mut(p) {
        Some(n) if *n > 0 => {
            *n -= 1;
            true
        }
        _ => false,
    })
    .count()
}

type RoleFrameValues = [(Option<f64>, Option<f64>); 3];

fn entity_frame(pred: &FrameGraph, gt: &FrameGraph) -> RoleFrameValues {
    let role = |get: fn(&Triplet) -> &str| {
        let matched = multiset_overlap(
            pred.triplets.iter().map(|t| get(&t.triplet)),
            gt.triplets.iter().map(|t| get(&t.triplet)),
        );
        let p = (!pred.is_empty()).then(|| ratio(matched, pred.len()));
        let r = (!gt.is_empty()).then(|| ratio(matched, gt.len()));
        (p, r)
    };
    [role(Triplet::subject), role(Triplet::predicate), role(Triplet::object)]
}

/// Per-role multiset precision/recall over full generations (no K cut-off).
pub fn entity_breakdown(pairs: &[(&SceneGraphDocument, &SceneGraphDocument)], exec: Exec) -> Result<EntityBreakdown> {
    let per_video: Vec<Vec<RoleFrameValues>> = exec.try_map(pairs, |(p, g)| {
        Ok::<_, Error>(pair_frames(p, g)?.into_iter().map(|(pf, gf)| entity_frame(pf, gf)).collect())
    })?;
    let avg = |role: usize, precision: bool| {
        mean(per_video.iter().filter_map(|frames| {
            mean(frames.iter().filter_map(|f| if precision { f[role].0 } else { f[role].1 }))
        }))
        .unwrap_or(0.0)
    };
    let score = |role| RoleScore {
        precision: avg(role, true),
        recall: avg(role, false),
    };
    Ok(EntityBreakdown {
        subject: score(0),
        predicate: score(1),
        object: score(2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
}

pub fn pr_curve(summary: &RecallPrecision, ks: &[usize]) -> Vec<CurvePoint> {
    ks.iter()
        .map(|&k| CurvePoint {
            k,
            precision: summary.precision_at[&k],
            recall: summary.recall_at[&k],
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub recall_at: BTreeMap<usize, f64>,
    pub precision_at: BTreeMap<usize, f64>,
    pub mean_recall_at: BTreeMap<usize, f64>,
    pub mean_precision_at: BTreeMap<usize, f64>,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub entity: Option<EntityBreakdown>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportOptions {
    pub per_class: bool,
    pub entity: bool,
}

/// Corpus-level evaluation driver. Videos are matched independently (in
/// parallel when enabled); all reductions happen afterwards in video order.
#[derive(Debug, Clone)]
pub struct Evaluator {
    task: EvalTask,
    ks: Vec<usize>,
    averaging: Averaging,
    exec: Exec,
}

impl Evaluator {
    pub fn new(task: EvalTask, ks: &[usize]) -> Result<Self> {
        if ks.is_empty() {
            return Err(Error::Config("K list is empty".to_string()));
        }
        if ks.contains(&0) {
            return Err(Error::Config("K must be at least 1".to_string()));
        }
        let mut unique = Vec::with_capacity(ks.len());
        for &k in ks {
            if !unique.contains(&k) {
                unique.push(k);
            }
        }
        Ok(Self {
            task,
            ks: unique,
            averaging: Averaging::Macro,
            exec: Exec::default(),
        })
    }

    pub fn with_averaging(mut self, averaging: Averaging) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn task(&self) -> &EvalTask {
        &self.task
    }

    pub fn ks(&self) -> &[usize] {
        &self.ks
    }

    pub fn outcomes(&self, preds: &[SceneGraphDocument], gts: &[SceneGraphDocument]) -> Result<Vec<VideoOutcome>> {
        let pairs = pair_documents(preds, gts)?;
        self.exec.try_map(&pairs, |(p, g)| video_outcome(p, g, &self.task))
    }

    pub fn recall_precision(&self, preds: &[SceneGraphDocument], gts: &[SceneGraphDocument]) -> Result<RecallPrecision> {
        Ok(summarize(&self.outcomes(preds, gts)?, &self.ks, self.averaging))
    }

    pub fn pr_curve(&self, preds: &[SceneGraphDocument], gts: &[SceneGraphDocument]) -> Result<Vec<CurvePoint>> {
        Ok(pr_curve(&self.recall_precision(preds, gts)?, &self.ks))
    }

    pub fn report(&self, preds: &[SceneGraphDocument], gts: &[SceneGraphDocument], opts: ReportOptions) -> Result<MetricReport> {
        let outcomes = self.outcomes(preds, gts)?;
        let summary = summarize(&outcomes, &self.ks, self.averaging);
        let mut report = MetricReport {
            recall_at: summary.recall_at,
            precision_at: summary.precision_at,
            ..MetricReport::default()
        };
        if opts.per_class {
            let pc = per_class_means(&outcomes, &self.ks);
            report.per_class = pc.classes;
            report.mean_recall_at = pc.mean_recall_at;
            report.mean_precision_at = pc.mean_precision_at;
        }
        if opts.entity {
            report.entity = Some(entity_breakdown(&pair_documents(preds, gts)?, self.exec)?);
        }
        Ok(report)
    }
}
