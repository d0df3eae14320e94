//! Referring-expression queries for an external detector, and assembly of
//! its detections back into boxed scene graphs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{DetectionIndex, QueryRecord};
use crate::model::{FrameGraph, SceneGraphDocument, Triplet};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Subject,
    Object,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundingQuery {
    pub triplet: Triplet,
    pub role: Role,
    pub text: String,
}

/// Subject and object queries. Predicates go in verbatim, so
/// `(person, holding, cup)` yields "The cup being holding by person.".
/// When subject and object share a label both roles use the subject text,
/// one query for the two instances.
pub fn make_queries(t: &Triplet) -> (GroundingQuery, GroundingQuery) {
    let subject_text = format!("The {} {} {}.", t.subject(), t.predicate(), t.object());
    let object_text = if t.is_symmetric() {
        subject_text.clone()
    } else {
        format!("The {} being {} by {}.", t.object(), t.predicate(), t.subject())
    };
    (
        GroundingQuery {
            triplet: t.clone(),
            role: Role::Subject,
            text: subject_text,
        },
        GroundingQuery {
            triplet: t.clone(),
            role: Role::Object,
            text: object_text,
        },
    )
}

/// Attach the highest-confidence detection of each query to its role.
/// Symmetric triplets take the top two detections of the shared query,
/// the stronger one going to the subject. Roles without a detection stay
/// unboxed; triplet order is untouched.
pub fn assemble_grounded(frame: &FrameGraph, video_id: &str, detections: &DetectionIndex) -> FrameGraph {
    let mut out = frame.clone();
    for st in &mut out.triplets {
        let (sq, oq) = make_queries(&st.triplet);
        let subject_hits = detections.lookup(video_id, &frame.frame_id, &sq.text);
        st.subject_box = subject_hits.first().map(|d| d.bbox);
        st.object_box = if st.triplet.is_symmetric() {
            subject_hits.get(1).map(|d| d.bbox)
        } else {
            detections.lookup(video_id, &frame.frame_id, &oq.text).first().map(|d| d.bbox)
        };
    }
    out
}

pub fn assemble_document(doc: &SceneGraphDocument, detections: &DetectionIndex) -> Result<SceneGraphDocument> {
    let frames = doc.frames.iter().map(|f| assemble_grounded(f, &doc.video_id, detections)).collect();
    SceneGraphDocument::new(doc.video_id.clone(), frames, doc.kind)
}

pub fn assemble_documents(docs: &[SceneGraphDocument], detections: &DetectionIndex, exec: Exec) -> Result<Vec<SceneGraphDocument>> {
    exec.try_map(docs, |d| assemble_document(d, detections))
}

/// Detector manifest: one record per distinct query text per frame, in
/// triplet order.
pub fn query_manifest(docs: &[SceneGraphDocument]) -> Vec<QueryRecord> {
    let mut out = Vec::new();
    for doc in docs {
        for frame in &doc.frames {
            let mut seen = HashSet::new();
            for st in &frame.triplets {
                let (s, o) = make_queries(&st.triplet);
                for q in [s, o] {
                    if seen.insert(q.text.clone()) {
                        out.push(QueryRecord {
                            video_id: doc.video_id.clone(),
                            frame_id: frame.frame_id.clone(),
                            query: q.text,
                        });
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::DetectionRecord;
    use crate::model::{BoundingBox, DocumentKind};

    fn t(s: &str, p: &str, o: &str) -> Triplet {
        Triplet::new(s, p, o).unwrap()
    }

    #[test]
    fn query_templates() {
        let (s, o) = make_queries(&t("person", "holding", "cup"));
        assert_eq!(s.text, "The person holding cup.");
        assert_eq!(o.text, "The cup being holding by person.");
        let (s, o) = make_queries(&t("dog", "chase", "cat"));
        assert_eq!((s.text.as_str(), o.text.as_str()), ("The dog chase cat.", "The cat being chase by dog."));
        let (s, o) = make_queries(&t("cat", "next to", "cat"));
        assert_eq!(s.text, o.text);
        assert_eq!((s.role, o.role), (Role::Subject, Role::Object));
    }

    fn det(query: &str, x: f64, confidence: f64) -> DetectionRecord {
        DetectionRecord {
            video_id: "v".into(),
            frame_id: "1".into(),
            query: query.into(),
            bbox: BoundingBox::new(x, 0.0, x + 10.0, 10.0).unwrap(),
            confidence,
        }
    }

    #[test]
    fn both_boxes_attached() {
        let frame = FrameGraph::from_triplets("1", [t("person", "holding", "cup")]);
        let idx = DetectionIndex::new([
            det("The person holding cup.", 0.0, 0.8),
            det("The person holding cup.", 50.0, 0.9),
            det("The cup being holding by person.", 5.0, 0.5),
        ]);
        let out = assemble_grounded(&frame, "v", &idx);
        assert_eq!(out.triplets[0].subject_box.unwrap().x1(), 50.0);
        assert_eq!(out.triplets[0].object_box.unwrap().x1(), 5.0);
    }

    #[test]
    fn symmetric_takes_top_two() {
        let frame = FrameGraph::from_triplets("1", [t("cat", "next to", "cat")]);
        let q = "The cat next to cat.";
        let idx = DetectionIndex::new([det(q, 20.0, 0.7), det(q, 10.0, 0.9)]);
        let out = assemble_grounded(&frame, "v", &idx);
        assert_eq!(out.triplets[0].subject_box.unwrap().x1(), 10.0);
        assert_eq!(out.triplets[0].object_box.unwrap().x1(), 20.0);
        let only = DetectionIndex::new([det(q, 10.0, 0.9)]);
        let out = assemble_grounded(&frame, "v", &only);
        assert!(out.triplets[0].subject_box.is_some() && out.triplets[0].object_box.is_none());
    }

    #[test]
    fn no_detections_leave_triplets_unboxed() {
        let frame = FrameGraph::from_triplets("1", [t("a", "b", "c"), t("d", "e", "f")]);
        let out = assemble_grounded(&frame, "v", &DetectionIndex::default());
        assert_eq!(out, frame);
        // a detection for another frame is not joined
        let mut other = det("The a b c.", 0.0, 0.9);
        other.frame_id = "2".into();
        let out = assemble_grounded(&frame, "v", &DetectionIndex::new([other]));
        assert_eq!(out, frame);
    }

    #[test]
    fn manifest_dedups_per_frame() {
        let frame = FrameGraph::from_triplets("1", [t("cat", "next to", "cat"), t("cat", "next to", "cat"), t("a", "b", "c")]);
        let doc = SceneGraphDocument::new("v", vec![frame], DocumentKind::Prediction).unwrap();
        let m = query_manifest(&[doc]);
        let texts: Vec<&str> = m.iter().map(|r| r.query.as_str()).collect();
        assert_eq!(texts, vec!["The cat next to cat.", "The a b c.", "The c being b by a."]);
    }
}
