//! Spatial-accuracy metrics: category recall and a relation-consistency
//! score over detection boxes, plus a geometric detector for staged scenes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{Aabb, CameraSpec, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionBox {
    pub label: String,
    /// `[x_min, y_min, x_max, y_max]` in pixels.
    pub bbox: [f64; 4],
    /// Distance from the camera; smaller is nearer.
    pub depth: f64,
}

impl DetectionBox {
    pub fn center_x(&self) -> f64 {
        0.5 * (self.bbox[0] + self.bbox[2])
    }

    pub fn area(&self) -> f64 {
        (self.bbox[2] - self.bbox[0]).max(0.0) * (self.bbox[3] - self.bbox[1]).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predicate {
    Left,
    Right,
    Front,
    Back,
    FrontLeft,
    FrontRight,
    BackLeft,
    BackRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AxisTest {
    Left,
    Right,
    Front,
    Back,
}

impl Predicate {
    fn tests(self) -> &'static [AxisTest] {
        use AxisTest as A;
        match self {
            Predicate::Left => &[A::Left],
            Predicate::Right => &[A::Right],
            Predicate::Front => &[A::Front],
            Predicate::Back => &[A::Back],
            Predicate::FrontLeft => &[A::Front, A::Left],
            Predicate::FrontRight => &[A::Front, A::Right],
            Predicate::BackLeft => &[A::Back, A::Left],
            Predicate::BackRight => &[A::Back, A::Right],
        }
    }

    /// Reads phrases like "at the front left of" or "back-right".
    pub fn from_phrase(text: &str) -> Option<Self> {
        let words: Vec<String> = text
            .to_lowercase()
            .split(|c: char| !c.is_alphabetic())
            .filter(|w| !w.is_empty() && !matches!(*w, "at" | "the" | "of" | "to" | "in"))
            .map(str::to_string)
            .collect();
        let has = |w: &str| words.iter().any(|x| x == w);
        let fb = if has("front") {
            Some(true)
        } else if has("back") || has("behind") {
            Some(false)
        } else {
            None
        };
        let lr = if has("left") {
            Some(true)
        } else if has("right") {
            Some(false)
        } else {
            None
        };
        Some(match (fb, lr) {
            (Some(true), None) => Predicate::Front,
            (Some(false), None) => Predicate::Back,
            (None, Some(true)) => Predicate::Left,
            (None, Some(false)) => Predicate::Right,
            (Some(true), Some(true)) => Predicate::FrontLeft,
            (Some(true), Some(false)) => Predicate::FrontRight,
            (Some(false), Some(true)) => Predicate::BackLeft,
            (Some(false), Some(false)) => Predicate::BackRight,
            (None, None) => return None,
        })
    }
}

/// `subject` is `predicate` of `object`, e.g. house front-left of trees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub subject: String,
    pub predicate: Predicate,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no relations to score")]
    EmptyRelationList,
    #[error("intended category set is empty")]
    EmptyIntendedSet,
    #[error("bad relations file: {0}")]
    BadRelations(String),
}

fn axis_holds(a: &DetectionBox, b: &DetectionBox, t: AxisTest) -> bool {
    match t {
        AxisTest::Left => a.center_x() < b.center_x(),
        AxisTest::Right => a.center_x() > b.center_x(),
        AxisTest::Front => a.depth < b.depth,
        AxisTest::Back => a.depth > b.depth,
    }
}

/// Whether `a` stands in `predicate` relation to `b`; composite predicates
/// need both axes.
pub fn relation_holds(a: &DetectionBox, b: &DetectionBox, predicate: Predicate) -> bool {
    predicate.tests().iter().all(|&t| axis_holds(a, b, t))
}

/// Largest box per label (lowercased); equal areas go to the smaller coordinates.
fn largest_by_label(boxes: &[DetectionBox]) -> BTreeMap<String, &DetectionBox> {
    let mut out: BTreeMap<String, &DetectionBox> = BTreeMap::new();
    for b in boxes {
        let key = b.label.to_lowercase();
        match out.get(&key) {
            Some(cur) if cur.area() > b.area() || (cur.area() == b.area() && cur_le(cur, b)) => {}
            _ => {
                out.insert(key, b);
            }
        }
    }
    out
}

/// Order-independent tie break between equal-area boxes.
fn cur_le(cur: &DetectionBox, b: &DetectionBox) -> bool {
    (cur.bbox, cur.depth).partial_cmp(&(b.bbox, b.depth)).is_some_and(|o| o.is_le())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationScore {
    pub relation: RelationSpec,
    /// In [0, 1].
    pub score: f64,
}

/// Per-relation agreement between target and generated detections.
///
/// A relation scores 0 when either category is absent from `generated`;
/// otherwise it is the fraction of its axis tests whose outcome matches the
/// target image. Categories absent from `target` are compared against the
/// relation as stated.
pub fn uni_det_relations(target: &[DetectionBox], generated: &[DetectionBox], relations: &[RelationSpec]) -> Result<Vec<RelationScore>, EvalError> {
    if relations.is_empty() {
        return Err(EvalError::EmptyRelationList);
    }
    let tgt = largest_by_label(target);
    let gen_ = largest_by_label(generated);
    Ok(relations
        .iter()
        .map(|r| {
            let (s, o) = (r.subject.to_lowercase(), r.object.to_lowercase());
            let score = match (gen_.get(&s), gen_.get(&o)) {
                (Some(ga), Some(gb)) => {
                    let tests = r.predicate.tests();
                    let agree = tests
                        .iter()
                        .filter(|&&t| {
                            let want = match (tgt.get(&s), tgt.get(&o)) {
                                (Some(ta), Some(tb)) => axis_holds(ta, tb, t),
                                _ => true,
                            };
                            axis_holds(ga, gb, t) == want
                        })
                        .count();
                    agree as f64 / tests.len() as f64
                }
                _ => 0.0,
            };
            RelationScore { relation: r.clone(), score }
        })
        .collect())
}

/// Mean relation agreement × 100.
pub fn uni_det_score(target: &[DetectionBox], generated: &[DetectionBox], relations: &[RelationSpec]) -> Result<f64, EvalError> {
    let per = uni_det_relations(target, generated, relations)?;
    Ok(100.0 * per.iter().map(|r| r.score).sum::<f64>() / per.len() as f64)
}

/// Share of intended categories that were detected, × 100. Case-insensitive.
pub fn recall_score(detected: &BTreeSet<String>, intended: &BTreeSet<String>) -> Result<f64, EvalError> {
    if intended.is_empty() {
        return Err(EvalError::EmptyIntendedSet);
    }
    let det: BTreeSet<String> = detected.iter().map(|s| s.to_lowercase()).collect();
    let want: BTreeSet<String> = intended.iter().map(|s| s.to_lowercase()).collect();
    Ok(100.0 * want.intersection(&det).count() as f64 / want.len() as f64)
}

fn project_bounds(bounds: &Aabb, label: &str, camera: &CameraSpec) -> Option<DetectionBox> {
    let pts: Vec<(f64, f64)> = bounds.corners().iter().filter_map(|&c| camera.project(c)).map(|(x, y, _)| (x, y)).collect();
    if pts.is_empty() {
        return None;
    }
    let (w, h) = (camera.image_width as f64, camera.image_height as f64);
    let x0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).max(0.0);
    let y0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).max(0.0);
    let x1 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).min(w);
    let y1 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).min(h);
    if x0 >= x1 || y0 >= y1 {
        return None;
    }
    Some(DetectionBox {
        label: label.to_string(),
        bbox: [x0, y0, x1, y1],
        depth: -camera.to_view(bounds.center()).z,
    })
}

/// Ground-truth boxes for a staged scene: each object's (and avatar's, as
/// `person`) projected world bounds clipped to the frame.
pub fn oracle_detections(scene: &Scene, camera: &CameraSpec) -> Vec<DetectionBox> {
    let objects = scene.objects.iter().filter_map(|o| project_bounds(&o.world_bounds(), &o.category, camera));
    let avatars = scene.avatars.iter().filter_map(|a| project_bounds(&a.world_bounds(), "person", camera));
    objects.chain(avatars).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub recall: f64,
    pub uni_det: f64,
    pub per_relation: Vec<RelationScore>,
    /// Intended categories not detected.
    pub missing: Vec<String>,
}

pub fn evaluate(
    target: &[DetectionBox],
    generated: &[DetectionBox],
    relations: &[RelationSpec],
    intended: &BTreeSet<String>,
) -> Result<MetricReport, EvalError> {
    let detected: BTreeSet<String> = generated.iter().map(|d| d.label.to_lowercase()).collect();
    let recall = recall_score(&detected, intended)?;
    let per_relation = uni_det_relations(target, generated, relations)?;
    let uni_det = 100.0 * per_relation.iter().map(|r| r.score).sum::<f64>() / per_relation.len() as f64;
    let missing = intended.iter().map(|s| s.to_lowercase()).filter(|s| !detected.contains(s)).collect();
    Ok(MetricReport {
        recall,
        uni_det,
        per_relation,
        missing,
    })
}

pub fn parse_relations(text: &str) -> Result<Vec<RelationSpec>, EvalError> {
    serde_json::from_str(text).map_err(|e| EvalError::BadRelations(e.to_string()))
}

/// The five relations of the shipped evaluation scene.
pub fn shipped_relations() -> Vec<RelationSpec> {
    parse_relations(include_str!("../resources/eval/relations.json")).expect("shipped fixture parses")
}

/// The six intended categories of the shipped evaluation scene.
pub fn shipped_intended() -> BTreeSet<String> {
    serde_json::from_str(include_str!("../resources/eval/intended.json")).expect("shipped fixture parses")
}

const SPATIAL_SCORE_PROMPT: &str = include_str!("../resources/prompts/spatial_score.txt");

/// Captioning instruction for caption-based text/image scoring.
pub const CAPTION_PROMPT: &str = include_str!("../resources/prompts/caption.txt");

/// Vision-judge instruction for a generated image, `[prompt]` filled in.
pub fn spatial_score_prompt(prompt: &str) -> String {
    SPATIAL_SCORE_PROMPT.trim_end().replace("[prompt]", prompt)
}

#[cfg(test)]
mod tests {
    use super::*;

/// Boxes at the given screen-x centers and depths, 20 px wide.
fn boxes_at(items: &[(&str, f64, f64)]) -> Vec<DetectionBox> {
    items
        .iter()
        .map(|&(label, cx, depth)| DetectionBox {
            label: label.to_string(),
            bbox: [cx - 10.0, 10.0, cx + 10.0, 30.0],
            depth,
        })
        .collect()
}


    #[test]
    fn axis_relations() {
        let b = boxes_at(&[("a", 10.0, 1.0), ("b", 50.0, 2.0)]);
        assert!(relation_holds(&b[0], &b[1], Predicate::FrontLeft));
        assert!(!relation_holds(&b[0], &b[1], Predicate::BackLeft));
        assert!(relation_holds(&b[1], &b[0], Predicate::BackRight));
        let same = boxes_at(&[("a", 30.0, 1.0), ("b", 30.0, 2.0)]);
        assert!(!relation_holds(&same[0], &same[1], Predicate::Left));
        assert!(!relation_holds(&same[0], &same[1], Predicate::Right));
    }

    #[test]
    fn phrases() {
        assert_eq!(Predicate::from_phrase("at the front left of"), Some(Predicate::FrontLeft));
        assert_eq!(Predicate::from_phrase("at the back of"), Some(Predicate::Back));
        assert_eq!(Predicate::from_phrase("at the back right of"), Some(Predicate::BackRight));
        assert_eq!(Predicate::from_phrase("near"), None);
    }

    #[test]
    fn fixture_shape() {
        assert_eq!(shipped_relations().len(), 5);
        assert_eq!(shipped_intended().len(), 6);
        assert_eq!(shipped_relations()[0].predicate, Predicate::FrontLeft);
    }

    #[test]
    fn errors() {
        assert_eq!(recall_score(&BTreeSet::new(), &BTreeSet::new()), Err(EvalError::EmptyIntendedSet));
        assert_eq!(uni_det_score(&[], &[], &[]), Err(EvalError::EmptyRelationList));
    }
}
