//! File formats: scene-graph documents, vocabularies, embedding tables,
//! detector outputs, query manifests and metric reports.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{EntityBreakdown, MetricReport};
use crate::model::{
    BoundingBox, DocumentKind, EmbeddingTable, FrameGraph, SceneGraphDocument, ScoredTriplet, Triplet,
    Vocabulary,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraphFile {
    pub videos: Vec<VideoRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: String,
    pub triplets: Vec<TripletRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_box: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_box: Option<[f64; 4]>,
    /// Accepted on input only; must equal the list position.
    #[serde(default, skip_serializing)]
    pub rank: Option<u32>,
    /// Triplet importance, written by the importance ranker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ti: Option<f64>,
}

impl SceneGraphFile {
    pub fn from_documents(docs: &[SceneGraphDocument]) -> Self {
        let videos = docs
            .iter()
            .map(|doc| VideoRecord {
                video_id: doc.video_id.clone(),
                frames: doc
                    .frames
                    .iter()
                    .map(|f| FrameRecord {
                        frame_id: f.frame_id.clone(),
                        triplets: f.triplets.iter().map(TripletRecord::from_scored).collect(),
                    })
                    .collect(),
            })
            .collect();
        Self { videos }
    }

    pub fn into_documents(self, kind: DocumentKind) -> Result<Vec<SceneGraphDocument>> {
        let mut seen_videos = BTreeMap::new();
        let mut docs = Vec::with_capacity(self.videos.len());
        for (vi, video) in self.videos.into_iter().enumerate() {
            if video.video_id.trim().is_empty() {
                return Err(Error::schema(format!("videos[{vi}]"), "video_id must be non-empty"));
            }
            if seen_videos.insert(video.video_id.clone(), ()).is_some() {
                return Err(Error::schema(
                    format!("video {}", video.video_id),
                    "duplicate video_id",
                ));
            }
            let mut seen_frames = BTreeMap::new();
            let mut frames = Vec::with_capacity(video.frames.len());
            for frame in video.frames {
                if seen_frames.insert(frame.frame_id.clone(), ()).is_some() {
                    return Err(Error::schema(
                        format!("video {}", video.video_id),
                        format!("duplicate frame_id {:?}", frame.frame_id),
                    ));
                }
                let mut triplets = Vec::with_capacity(frame.triplets.len());
                for (ti, rec) in frame.triplets.into_iter().enumerate() {
                    let ctx = || format!("video {} / frame {} / triplet {}", video.video_id, frame.frame_id, ti + 1);
                    triplets.push(rec.into_scored(ti as u32 + 1, kind).map_err(|e| match e {
                        Error::Schema { message, .. } => Error::schema(ctx(), message),
                        other => Error::schema(ctx(), other.to_string()),
                    })?);
                }
                frames.push(FrameGraph {
                    frame_id: frame.frame_id,
                    triplets,
                });
            }
            docs.push(SceneGraphDocument::new(video.video_id, frames, kind)?);
        }
        Ok(docs)
    }
}

impl TripletRecord {
    pub fn from_scored(t: &ScoredTriplet) -> Self {
        Self {
            subject: t.triplet.subject().to_string(),
            predicate: t.triplet.predicate().to_string(),
            object: t.triplet.object().to_string(),
            score: t.score,
            subject_box: t.subject_box.map(BoundingBox::to_array),
            object_box: t.object_box.map(BoundingBox::to_array),
            rank: None,
            ti: None,
        }
    }

    fn into_scored(self, position: u32, kind: DocumentKind) -> Result<ScoredTriplet> {
        if let Some(rank) = self.rank {
            if rank != position {
                return Err(Error::schema("", format!("field rank: {rank} does not match list position {position}")));
            }
        }
        if let Some(score) = self.score {
            if !score.is_finite() {
                return Err(Error::schema("", "field score: non-finite value"));
            }
        }
        let triplet = Triplet::new(&self.subject, &self.predicate, &self.object)
            .map_err(|e| Error::schema("", e.to_string()))?;
        let parse_box = |field: &str, b: Option<[f64; 4]>| -> Result<Option<BoundingBox>> {
            b.map(|c| BoundingBox::from_array(c).map_err(|e| Error::schema("", format!("field {field}: {e}"))))
                .transpose()
        };
        let subject_box = parse_box("subject_box", self.subject_box)?;
        let object_box = parse_box("object_box", self.object_box)?;
        if kind == DocumentKind::GroundTruth && (subject_box.is_none() || object_box.is_none()) {
            let field = if subject_box.is_none() { "subject_box" } else { "object_box" };
            return Err(Error::schema("", format!("ground truth requires boxes (missing {field})")));
        }
        Ok(ScoredTriplet {
            triplet,
            score: self.score,
            subject_box,
            object_box,
            rank: position,
        })
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> Error + '_ {
    move |source| Error::Json {
        path: path.to_path_buf(),
        source,
    }
}

pub fn parse_scene_graphs(text: &str, kind: DocumentKind) -> Result<Vec<SceneGraphDocument>> {
    let file: SceneGraphFile = serde_json::from_str(text).map_err(|e| Error::schema("scene-graph file", e.to_string()))?;
    file.into_documents(kind)
}

pub fn load_scene_graphs(path: &Path, kind: DocumentKind) -> Result<Vec<SceneGraphDocument>> {
    let text = read_to_string(path)?;
    let file: SceneGraphFile = serde_json::from_str(&text).map_err(json_err(path))?;
    file.into_documents(kind)
}

pub fn scene_graphs_to_string(docs: &[SceneGraphDocument]) -> String {
    file_to_string(&SceneGraphFile::from_documents(docs))
}

pub fn file_to_string(file: &SceneGraphFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("scene-graph records always serialize");
    s.push('\n');
    s
}

pub fn write_scene_graphs(path: &Path, docs: &[SceneGraphDocument]) -> Result<()> {
    write_bytes(path, scene_graphs_to_string(docs).as_bytes())
}

#[derive(Debug, Deserialize)]
struct VocabularyFile {
    objects: Vec<String>,
    predicates: Vec<String>,
    #[serde(default)]
    actions: Option<Vec<String>>,
    #[serde(default)]
    spatial: Option<Vec<String>>,
}

pub fn parse_vocabulary(text: &str) -> Result<Vocabulary> {
    let file: VocabularyFile = serde_json::from_str(text).map_err(|e| Error::schema("vocabulary file", e.to_string()))?;
    vocabulary_from_file(file)
}

fn vocabulary_from_file(file: VocabularyFile) -> Result<Vocabulary> {
    let vocab = Vocabulary::new(&file.objects, &file.predicates)?;
    Ok(match (file.actions, file.spatial) {
        (None, None) => vocab,
        (a, s) => vocab.with_split(&a.unwrap_or_default(), &s.unwrap_or_default()),
    })
}

pub fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    let text = read_to_string(path)?;
    let file: VocabularyFile = serde_json::from_str(&text).map_err(json_err(path))?;
    vocabulary_from_file(file)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub key: String,
    pub vector: Vec<f64>,
}

/// Parse line-delimited embedding records. The first record fixes the
/// dimension. Records without a `vector` (e.g. a provenance header written
/// by the exporter) are skipped.
pub fn parse_embeddings(reader: impl BufRead) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::schema(format!("embeddings line {}", lineno + 1), e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| Error::schema(format!("embeddings line {}", lineno + 1), e.to_string()))?;
        if value.get("vector").is_none() && value.get("key").is_none() {
            continue;
        }
        let rec: EmbeddingRecord = serde_json::from_value(value)
            .map_err(|e| Error::schema(format!("embeddings line {}", lineno + 1), e.to_string()))?;
        let table = table.get_or_insert(EmbeddingTable::new(rec.vector.len().max(1))?);
        table.insert(rec.key, rec.vector)?;
    }
    match table {
        Some(t) => Ok(t),
        None => Err(Error::schema("embeddings", "file contains no records")),
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_embeddings(BufReader::new(file)).map_err(|e| match e {
        Error::Schema { context, message } => Error::schema(format!("{}: {context}", path.display()), message),
        other => other,
    })
}

/// Write a table with keys sorted, so output is reproducible.
pub fn write_embeddings(mut out: impl Write, table: &EmbeddingTable) -> std::io::Result<()> {
    let mut keys: Vec<&str> = table.keys().collect();
    keys.sort_unstable();
    for key in keys {
        let rec = EmbeddingRecord {
            key: key.to_string(),
            vector: table.get(key).expect("key listed by table").to_vec(),
        };
        writeln!(out, "{}", serde_json::to_string(&rec).expect("embedding records serialize"))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub video_id: String,
    pub frame_id: String,
    pub query: String,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionLine {
    video_id: String,
    frame_id: String,
    query: String,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    confidence: f64,
}

pub fn parse_detections(reader: impl BufRead) -> Result<Vec<DetectionRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let ctx = || format!("detections line {}", lineno + 1);
        let line = line.map_err(|e| Error::schema(ctx(), e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionLine = serde_json::from_str(&line).map_err(|e| Error::schema(ctx(), e.to_string()))?;
        if !(0.0..=1.0).contains(&rec.confidence) {
            return Err(Error::schema(
                ctx(),
                format!("confidence {} outside [0, 1]", rec.confidence),
            ));
        }
        if rec.query.trim().is_empty() {
            return Err(Error::schema(ctx(), "query must be non-empty"));
        }
        let bbox = BoundingBox::from_array(rec.bbox).map_err(|e| Error::schema(ctx(), e.to_string()))?;
        out.push(DetectionRecord {
            video_id: rec.video_id,
            frame_id: rec.frame_id,
            query: rec.query,
            bbox,
            confidence: rec.confidence,
        });
    }
    Ok(out)
}

pub fn load_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_detections(BufReader::new(file))
}

/// Detections grouped by `(video_id, frame_id, query)`, each group sorted by
/// descending confidence (file order among ties).
#[derive(Debug, Default)]
pub struct DetectionIndex {
    groups: HashMap<(String, String, String), Vec<DetectionRecord>>,
}

impl DetectionIndex {
    pub fn new(records: impl IntoIterator<Item = DetectionRecord>) -> Self {
        let mut groups: HashMap<(String, String, String), Vec<DetectionRecord>> = HashMap::new();
        for r in records {
            groups
                .entry((r.video_id.clone(), r.frame_id.clone(), r.query.clone()))
                .or_default()
                .push(r);
        }
        for group in groups.values_mut() {
            group.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        }
        Self { groups }
    }

    pub fn lookup(&self, video_id: &str, frame_id: &str, query: &str) -> &[DetectionRecord] {
        self.groups
            .get(&(video_id.to_string(), frame_id.to_string(), query.to_string()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub video_id: String,
    pub frame_id: String,
    pub query: String,
}

pub fn queries_to_jsonl(records: &[QueryRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("query records serialize") + "\n")
        .collect()
}

/// Serialized metric report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub task: String,
    pub k: Vec<usize>,
    pub recall: BTreeMap<usize, f64>,
    pub precision: BTreeMap<usize, f64>,
    pub mean_recall: BTreeMap<usize, f64>,
    pub mean_precision: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
    pub per_class: BTreeMap<String, ClassRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<EntityBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub recall: BTreeMap<usize, f64>,
    pub precision: BTreeMap<usize, f64>,
}

impl ReportFile {
    pub fn from_report(task: &str, ks: &[usize], report: &MetricReport) -> Self {
        Self {
            task: task.to_string(),
            k: ks.to_vec(),
            recall: report.recall_at.clone(),
            precision: report.precision_at.clone(),
            mean_recall: report.mean_recall_at.clone(),
            mean_precision: report.mean_precision_at.clone(),
            ndcg: BTreeMap::new(),
            per_class: report
                .per_class
                .iter()
                .map(|(class, m)| {
                    (
                        class.clone(),
                        ClassRecord {
                            recall: m.recall_at.clone(),
                            precision: m.precision_at.clone(),
                        },
                    )
                })
                .collect(),
            entity: report.entity.clone(),
        }
    }

    pub fn ndcg_only(p: usize, value: f64) -> Self {
        Self {
            task: "ndcg".to_string(),
            k: vec![p],
            recall: BTreeMap::new(),
            precision: BTreeMap::new(),
            mean_recall: BTreeMap::new(),
            mean_precision: BTreeMap::new(),
            ndcg: BTreeMap::from([(p, value)]),
            per_class: BTreeMap::new(),
            entity: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    /// One row per K: `task,k,recall,precision,mean_recall,mean_precision`.
    /// Missing values are left empty.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["task", "k", "recall", "precision", "mean_recall", "mean_precision"])?;
        let cell = |m: &BTreeMap<usize, f64>, k: usize| m.get(&k).map(f64::to_string).unwrap_or_default();
        for &k in &self.k {
            w.write_record([
                self.task.clone(),
                k.to_string(),
                cell(&self.recall, k),
                cell(&self.precision, k),
                cell(&self.mean_recall, k),
                cell(&self.mean_precision, k),
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Invariant(format!("csv buffer: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Invariant(e.to_string()))
    }
}

/// Read frame ids, one per line, ignoring blank lines.
pub fn parse_frame_ids(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_FRAMES: &str = r#"{"videos":[{"video_id":"v1","frames":[
        {"frame_id":"000001","triplets":[
            {"subject":"Person","predicate":"holding","object":"cup","subject_box":[0,0,10,10],"object_box":[1,1,2,2]},
            {"subject":"person","predicate":"looking_at","object":"cup","subject_box":[0,0,10,10],"object_box":[1,1,2,2]},
            {"subject":"person","predicate":"sitting on","object":"chair","subject_box":[0,0,10,10],"object_box":[3,3,9,9]}]},
        {"frame_id":"000002","triplets":[
            {"subject":"person","predicate":"holding","object":"cup","subject_box":[0,0,10,10],"object_box":[1,1,2,2]},
            {"subject":"person","predicate":"touching","object":"cup","subject_box":[0,0,10,10],"object_box":[1,1,2,2]},
            {"subject":"person","predicate":"beneath","object":"light","subject_box":[0,0,10,10],"object_box":[0,0,1,1]}]}]}]}"#;

    #[test]
    fn loads_documents_in_file_order() {
        let docs = parse_scene_graphs(TWO_FRAMES, DocumentKind::GroundTruth).unwrap();
        assert_eq!(docs.len(), 1);
        let doc = &docs[0];
        assert_eq!(doc.frames.len(), 2);
        assert_eq!(doc.frames[0].frame_id, "000001");
        assert_eq!(doc.frames[1].frame_id, "000002");
        assert_eq!(doc.frames[0].triplets.len(), 3);
        assert_eq!(doc.frames[0].triplets[0].triplet.subject(), "person");
        assert_eq!(doc.frames[0].triplets[1].triplet.predicate(), "looking at");
    }

    #[test]
    fn ground_truth_missing_box_is_rejected() {
        let text = r#"{"videos":[{"video_id":"v9","frames":[{"frame_id":"f3","triplets":[
            {"subject":"a","predicate":"b","object":"c","subject_box":[0,0,1,1]}]}]}]}"#;
        let err = parse_scene_graphs(text, DocumentKind::GroundTruth).unwrap_err().to_string();
        assert!(err.contains("ground truth requires boxes"), "{err}");
        assert!(err.contains("v9") && err.contains("f3") && err.contains("object_box"), "{err}");
        assert!(parse_scene_graphs(text, DocumentKind::Prediction).is_ok());
    }

    #[test]
    fn ranks_follow_list_order_not_scores() {
        let text = r#"{"videos":[{"video_id":"v","frames":[{"frame_id":"f","triplets":[
            {"subject":"a","predicate":"b","object":"c","score":0.9},
            {"subject":"a","predicate":"b","object":"d","score":0.7},
            {"subject":"a","predicate":"b","object":"e","score":0.8}]}]}]}"#;
        let docs = parse_scene_graphs(text, DocumentKind::Prediction).unwrap();
        let f = &docs[0].frames[0];
        let got: Vec<(u32, &str, Option<f64>)> = f
            .triplets
            .iter()
            .map(|t| (t.rank, t.triplet.object(), t.score))
            .collect();
        assert_eq!(got, vec![(1, "c", Some(0.9)), (2, "d", Some(0.7)), (3, "e", Some(0.8))]);
        // and the order survives a round trip
        let again = parse_scene_graphs(&scene_graphs_to_string(&docs), DocumentKind::Prediction).unwrap();
        assert_eq!(again, docs);
    }

    #[test]
    fn duplicate_frame_ids_rejected() {
        let text = r#"{"videos":[{"video_id":"v","frames":[{"frame_id":"f","triplets":[]},{"frame_id":"f","triplets":[]}]}]}"#;
        let err = parse_scene_graphs(text, DocumentKind::Prediction).unwrap_err().to_string();
        assert!(err.contains("duplicate frame_id"), "{err}");
    }

    #[test]
    fn explicit_rank_must_match_position() {
        let text = r#"{"videos":[{"video_id":"v","frames":[{"frame_id":"f","triplets":[
            {"subject":"a","predicate":"b","object":"c","rank":2}]}]}]}"#;
        assert!(parse_scene_graphs(text, DocumentKind::Prediction).is_err());
    }

    #[test]
    fn vocabulary_is_normalized() {
        let v = parse_vocabulary(r#"{"objects":["Person","CUP"],"predicates":["holding"]}"#).unwrap();
        assert_eq!(v.objects.iter().cloned().collect::<Vec<_>>(), vec!["cup", "person"]);
        assert_eq!(v.predicates.len(), 1);
        assert!(parse_vocabulary(r#"{"objects":[],"predicates":["x"]}"#).is_err());
        assert!(parse_vocabulary(r#"{"objects":["x"],"predicates":[]}"#).is_err());
    }

    #[test]
    fn embeddings_load_and_normalize() {
        let text = "{\"key\":\"a\",\"vector\":[2,0,0,0]}\n{\"key\":\"b\",\"vector\":[0,1,0,0]}\n{\"key\":\"c\",\"vector\":[0,0,3,4]}\n";
        let t = parse_embeddings(text.as_bytes()).unwrap();
        assert_eq!(t.dimension(), 4);
        assert_eq!(t.len(), 3);
        let n: f64 = t.get("a").unwrap().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-4);
    }

    #[test]
    fn embedding_dimension_mismatch_names_key() {
        let text = "{\"key\":\"a\",\"vector\":[1,0]}\n{\"key\":\"odd\",\"vector\":[1,0,0]}\n";
        let err = parse_embeddings(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("odd"), "{err}");
    }

    #[test]
    fn embedding_header_record_is_skipped() {
        let text = "{\"model\":\"clip\"}\n{\"key\":\"a\",\"vector\":[1,0]}\n";
        assert_eq!(parse_embeddings(text.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn detections() {
        let text = "{\"video_id\":\"v\",\"frame_id\":\"f\",\"query\":\"q\",\"box\":[0,0,1,1],\"confidence\":0.4}\n\
                    {\"video_id\":\"v\",\"frame_id\":\"f\",\"query\":\"q\",\"box\":[0,0,2,2],\"confidence\":0.9}\n";
        let recs = parse_detections(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        let index = DetectionIndex::new(recs);
        let got: Vec<f64> = index.lookup("v", "f", "q").iter().map(|d| d.confidence).collect();
        assert_eq!(got, vec![0.9, 0.4]);

        let bad = "{\"video_id\":\"v\",\"frame_id\":\"f\",\"query\":\"q\",\"box\":[0,0,1,1],\"confidence\":1.5}\n";
        assert!(parse_detections(bad.as_bytes()).is_err());
        assert!(parse_detections("".as_bytes()).unwrap().is_empty());
    }
}
