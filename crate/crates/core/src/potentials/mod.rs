//! Unary and pairwise costs for the partitioning problem.
//!
//! Every cost is the log-odds `log((1 - p) / p)` of a probability: negative
//! when `p > 0.5`, so likely nodes and edges lower the objective.
//!
//! * nodes: `p` is the detector confidence;
//! * same-type spatial edges: `p` is the IoU of the two detection boxes;
//! * cross-type spatial edges: `p` comes from a [`SpatialModel`];
//! * temporal edges: `p` comes from a logistic model over
//!   [`TemporalFeatures`] built from dense correspondences.

mod logistic;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, derive_bbox, iou, SpatioTemporalGraph};
use crate::metrics::pckh_threshold;
use crate::model::io::{read_records, to_jsonl};
use crate::model::{
    clamp_probability, write_atomic, BoundingBox, Correspondence, Detection, DetectionId, Frame,
    GroundTruthPose, JointType, PersonId,
};

pub use logistic::{
    sigmoid, train_logistic, train_logistic_with_history, LogisticModel, Sample, TrainConfig,
};

/// Number of temporal features: five base terms and their squares.
pub const TEMPORAL_FEATURE_DIM: usize = 10;

/// Per joint-type pair block of the geometric spatial model:
/// `[1, dx, dy, dx^2, dy^2, dist]`.
pub const SPATIAL_BLOCK: usize = 6;

/// `log((1 - p) / p)`.
pub fn unary_cost(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

/// Same as [`unary_cost`]; edges use the identical log-odds form.
pub fn edge_cost(p: f64) -> f64 {
    unary_cost(p)
}

/// Correspondences looked up by frame pair, in either direction.
#[derive(Clone, Debug, Default)]
pub struct CorrespondenceIndex {
    records: Vec<Correspondence>,
    by_pair: HashMap<(Frame, Frame), usize>,
}

impl CorrespondenceIndex {
    pub fn new(records: Vec<Correspondence>) -> Self {
        let mut by_pair = HashMap::with_capacity(records.len());
        for (i, c) in records.iter().enumerate() {
            by_pair.entry((c.frame_a, c.frame_b)).or_insert(i);
        }
        CorrespondenceIndex { records, by_pair }
    }

    /// Matched points oriented from `fa` to `fb`.
    pub fn pairs(&self, fa: Frame, fb: Frame) -> Result<PairIter<'_>> {
        if let Some(&i) = self.by_pair.get(&(fa, fb)) {
            let c = &self.records[i];
            Ok(PairIter {
                src: &c.points_a,
                dst: &c.points_b,
                pos: 0,
            })
        } else if let Some(&i) = self.by_pair.get(&(fb, fa)) {
            let c = &self.records[i];
            Ok(PairIter {
                src: &c.points_b,
                dst: &c.points_a,
                pos: 0,
            })
        } else {
            Err(Error::MissingCorrespondence(fa, fb))
        }
    }

    pub fn records(&self) -> &[Correspondence] {
        &self.records
    }
}

pub struct PairIter<'a> {
    src: &'a [crate::model::Point],
    dst: &'a [crate::model::Point],
    pos: usize,
}

impl<'a> Iterator for PairIter<'a> {
    type Item = (crate::model::Point, crate::model::Point);

    fn next(&mut self) -> Option<Self::Item> {
        let i = self.pos;
        if i < self.src.len() {
            self.pos += 1;
            Some((self.src[i], self.dst[i]))
        } else {
            None
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TemporalFeatures {
    /// Matched key-points shared by both boxes over those touching either.
    pub match_ratio: f64,
    pub min_score: f64,
    /// Position offset `pos(a) - pos(b)` over the mean box side.
    pub dx: f64,
    pub dy: f64,
    pub dist: f64,
}

impl TemporalFeatures {
    /// Base features followed by their element-wise squares.
    pub fn to_vec(&self) -> [f64; TEMPORAL_FEATURE_DIM] {
        let base = [self.match_ratio, self.min_score, self.dx, self.dy, self.dist];
        let mut out = [0.0; TEMPORAL_FEATURE_DIM];
        for (i, v) in base.iter().enumerate() {
            out[i] = *v;
            out[i + 5] = v * v;
        }
        out
    }
}

/// Features for a temporal pair of detections.
///
/// A matched pair counts towards the intersection when its source point lies
/// in `a`'s box and its target point in `b`'s box, and towards the union when
/// either holds.
pub fn temporal_features(
    a: &Detection,
    b: &Detection,
    corr: &CorrespondenceIndex,
) -> Result<TemporalFeatures> {
    let (ba, bb) = (derive_bbox(a), derive_bbox(b));
    temporal_features_with_boxes(a, &ba, b, &bb, corr)
}

fn temporal_features_with_boxes(
    a: &Detection,
    ba: &BoundingBox,
    b: &Detection,
    bb: &BoundingBox,
    corr: &CorrespondenceIndex,
) -> Result<TemporalFeatures> {
    let (mut inter, mut union) = (0usize, 0usize);
    for (p, q) in corr.pairs(a.frame, b.frame)? {
        let (in_a, in_b) = (ba.contains(p), bb.contains(q));
        inter += (in_a && in_b) as usize;
        union += (in_a || in_b) as usize;
    }
    let match_ratio = if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    };
    let norm = (ba.side + bb.side) / 2.0;
    let d = (a.pos - b.pos) * (1.0 / norm);
    Ok(TemporalFeatures {
        match_ratio,
        min_score: a.score.min(b.score),
        dx: d.x,
        dy: d.y,
        dist: d.norm(),
    })
}

pub fn temporal_probability(f: &TemporalFeatures, m: &LogisticModel) -> Result<f64> {
    m.probability(&f.to_vec())
}

fn pair_index(lo: usize, hi: usize, joint_count: usize) -> usize {
    debug_assert!(lo < hi && hi < joint_count);
    lo * (2 * joint_count - lo - 1) / 2 + (hi - lo - 1)
}

/// Dimension of the geometric spatial model for `joint_count` joint types.
pub fn spatial_feature_dim(joint_count: usize) -> usize {
    SPATIAL_BLOCK * joint_count * joint_count.saturating_sub(1) / 2
}

/// Sparse geometric features of a cross-type pair: the offset from the lower
/// joint type to the higher one, over the mean box side, placed in the block
/// belonging to that type pair. `None` for same-type pairs.
pub fn spatial_features(
    a: &Detection,
    b: &Detection,
    joint_count: usize,
) -> Option<Vec<(usize, f64)>> {
    if a.joint == b.joint {
        return None;
    }
    let (lo, hi) = if a.joint < b.joint { (a, b) } else { (b, a) };
    let norm = (derive_bbox(lo).side + derive_bbox(hi).side) / 2.0;
    let d = (lo.pos - hi.pos) * (1.0 / norm);
    let base = SPATIAL_BLOCK * pair_index(lo.joint.index(), hi.joint.index(), joint_count);
    let vals = [1.0, d.x, d.y, d.x * d.x, d.y * d.y, d.norm()];
    Some(vals.iter().enumerate().map(|(k, &v)| (base + k, v)).collect())
}

/// Source of cross-type spatial probabilities.
#[derive(Clone, Debug)]
pub enum SpatialModel {
    /// Logistic model over [`spatial_features`].
    Geometric {
        joint_count: usize,
        model: LogisticModel,
    },
    /// Explicit per-edge probabilities keyed by `(min id, max id)`.
    EdgeTable(HashMap<(DetectionId, DetectionId), f64>),
}

#[derive(Serialize, Deserialize)]
struct EdgeProbabilityRecord {
    a: DetectionId,
    b: DetectionId,
    p: f64,
}

impl SpatialModel {
    /// Wrap a geometric model; the joint count is recovered from its size.
    pub fn geometric(model: LogisticModel) -> Result<Self> {
        let dim = model.feature_dim();
        let joint_count = (2..=1024)
            .find(|&j| spatial_feature_dim(j) == dim)
            .ok_or_else(|| {
                Error::validation(format!(
                    "{dim} weights do not fit a geometric spatial model for any joint count"
                ))
            })?;
        Ok(SpatialModel::Geometric { joint_count, model })
    }

    pub fn read_edge_table(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut table = HashMap::new();
        for (line, r) in read_records::<EdgeProbabilityRecord>(path)? {
            if !(0.0..=1.0).contains(&r.p) {
                return Err(Error::validation(format!(
                    "{}:{line}: probability {} outside [0, 1]",
                    path.display(),
                    r.p
                )));
            }
            table.insert((r.a.min(r.b), r.a.max(r.b)), r.p);
        }
        Ok(SpatialModel::EdgeTable(table))
    }

    pub fn write_edge_table(
        path: impl AsRef<Path>,
        table: &BTreeMap<(DetectionId, DetectionId), f64>,
    ) -> Result<()> {
        let text = to_jsonl(
            table
                .iter()
                .map(|(&(a, b), &p)| EdgeProbabilityRecord { a, b, p }),
        )?;
        write_atomic(path, text.as_bytes())
    }
}

/// Probability that two same-frame detections belong to one person.
pub fn spatial_probability(
    a: &Detection,
    b: &Detection,
    model: Option<&SpatialModel>,
) -> Result<f64> {
    if a.joint == b.joint {
        return Ok(clamp_probability(iou(&derive_bbox(a), &derive_bbox(b))));
    }
    match model {
        None => Err(Error::Config(
            "cross-type spatial edge needs a spatial model or an edge probability file".into(),
        )),
        Some(SpatialModel::Geometric { joint_count, model }) => {
            if a.joint.index() >= *joint_count || b.joint.index() >= *joint_count {
                return Err(Error::Config(format!(
                    "spatial model covers {joint_count} joint types, got types {} and {}",
                    a.joint.0, b.joint.0
                )));
            }
            let feats = spatial_features(a, b, *joint_count).expect("cross-type pair");
            Ok(clamp_probability(sigmoid(model.sparse_logit(&feats)?)))
        }
        Some(SpatialModel::EdgeTable(t)) => t
            .get(&(a.id.min(b.id), a.id.max(b.id)))
            .map(|&p| clamp_probability(p))
            .ok_or_else(|| {
                Error::Config(format!(
                    "edge probability file has no entry for detections {} and {}",
                    a.id, b.id
                ))
            }),
    }
}

/// Costs for every node and edge of a graph.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PotentialTable {
    pub node_cost: BTreeMap<DetectionId, f64>,
    pub spatial_cost: BTreeMap<(DetectionId, DetectionId), f64>,
    pub temporal_cost: BTreeMap<(DetectionId, DetectionId), f64>,
}

pub fn build_potentials(
    g: &SpatioTemporalGraph,
    corr: &CorrespondenceIndex,
    temporal_model: &LogisticModel,
    spatial_model: Option<&SpatialModel>,
) -> Result<PotentialTable> {
    if temporal_model.feature_dim() != TEMPORAL_FEATURE_DIM {
        return Err(Error::Dimension {
            expected: TEMPORAL_FEATURE_DIM,
            got: temporal_model.feature_dim(),
        });
    }
    let mut table = PotentialTable::default();
    for d in &g.nodes {
        table.node_cost.insert(d.id, unary_cost(d.score));
    }
    for e in &g.spatial_edges {
        let (ia, ib) = (position(g, e.a)?, position(g, e.b)?);
        let (a, b) = (&g.nodes[ia], &g.nodes[ib]);
        let p = if a.joint == b.joint {
            clamp_probability(iou(&g.boxes[ia], &g.boxes[ib]))
        } else {
            spatial_probability(a, b, spatial_model)?
        };
        table.spatial_cost.insert((e.a, e.b), edge_cost(p));
    }
    for e in &g.temporal_edges {
        let (ia, ib) = (position(g, e.a)?, position(g, e.b)?);
        let f = temporal_features_with_boxes(
            &g.nodes[ia],
            &g.boxes[ia],
            &g.nodes[ib],
            &g.boxes[ib],
            corr,
        )?;
        let p = temporal_probability(&f, temporal_model)?;
        table.temporal_cost.insert((e.a, e.b), edge_cost(p));
    }
    Ok(table)
}

fn position(g: &SpatioTemporalGraph, id: DetectionId) -> Result<usize> {
    g.node_position(id)
        .ok_or_else(|| Error::Internal(format!("edge refers to unknown detection {id}")))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PotentialRecord {
    Node { id: DetectionId, cost: f64 },
    Spatial { a: DetectionId, b: DetectionId, cost: f64 },
    Temporal { a: DetectionId, b: DetectionId, cost: f64 },
}

pub fn write_potentials(path: impl AsRef<Path>, t: &PotentialTable) -> Result<()> {
    let nodes = t
        .node_cost
        .iter()
        .map(|(&id, &cost)| PotentialRecord::Node { id, cost });
    let spatial = t
        .spatial_cost
        .iter()
        .map(|(&(a, b), &cost)| PotentialRecord::Spatial { a, b, cost });
    let temporal = t
        .temporal_cost
        .iter()
        .map(|(&(a, b), &cost)| PotentialRecord::Temporal { a, b, cost });
    let text = to_jsonl(nodes.chain(spatial).chain(temporal))?;
    write_atomic(path, text.as_bytes())
}

pub fn read_potentials(path: impl AsRef<Path>) -> Result<PotentialTable> {
    let path = path.as_ref();
    let mut t = PotentialTable::default();
    for (line, r) in read_records::<PotentialRecord>(path)? {
        let (cost, dup) = match r {
            PotentialRecord::Node { id, cost } => (cost, t.node_cost.insert(id, cost)),
            PotentialRecord::Spatial { a, b, cost } => (cost, t.spatial_cost.insert((a, b), cost)),
            PotentialRecord::Temporal { a, b, cost } => {
                (cost, t.temporal_cost.insert((a, b), cost))
            }
        };
        if !cost.is_finite() || dup.is_some() {
            return Err(Error::validation(format!(
                "{}:{line}: duplicate or non-finite cost",
                path.display()
            )));
        }
    }
    Ok(t)
}

/// Match each detection to a ground-truth person whose same-type joint lies
/// within the PCKh threshold (closest wins, ties to the smaller person id).
pub fn label_detections(
    dets: &[Detection],
    gt: &[GroundTruthPose],
    pckh_ratio: f64,
) -> Result<Vec<Option<PersonId>>> {
    let mut by_frame: BTreeMap<Frame, Vec<&GroundTruthPose>> = BTreeMap::new();
    for p in gt {
        by_frame.entry(p.frame).or_default().push(p);
    }
    let mut thresholds = HashMap::new();
    for p in gt {
        thresholds.insert((p.frame, p.person_id), pckh_threshold(p, pckh_ratio)?);
    }
    Ok(dets
        .iter()
        .map(|d| {
            let poses = by_frame.get(&d.frame)?;
            poses
                .iter()
                .filter_map(|p| {
                    let j = p.joint(d.joint)?;
                    let dist = j.pos.distance(d.pos);
                    (dist <= thresholds[&(p.frame, p.person_id)]).then_some((dist, p.person_id))
                })
                .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
                .map(|(_, id)| id)
        })
        .collect())
}

/// Temporal training samples: one per temporal edge of `g`, positive iff both
/// endpoints are labelled with the same person.
pub fn temporal_training_samples(
    g: &SpatioTemporalGraph,
    corr: &CorrespondenceIndex,
    labels: &HashMap<DetectionId, PersonId>,
) -> Result<Vec<Sample>> {
    g.temporal_edges
        .iter()
        .map(|e| {
            let (ia, ib) = (position(g, e.a)?, position(g, e.b)?);
            let f = temporal_features_with_boxes(
                &g.nodes[ia],
                &g.boxes[ia],
                &g.nodes[ib],
                &g.boxes[ib],
                corr,
            )?;
            let same = matches!((labels.get(&e.a), labels.get(&e.b)), (Some(x), Some(y)) if x == y);
            Ok(Sample::dense(&f.to_vec(), same))
        })
        .collect()
}

/// Spatial training samples: one per cross-type same-frame pair, positive iff
/// both detections are labelled with the same person.
pub fn spatial_training_samples(
    dets: &[Detection],
    labels: &HashMap<DetectionId, PersonId>,
    joint_count: usize,
) -> Vec<Sample> {
    let mut by_frame: BTreeMap<Frame, Vec<&Detection>> = BTreeMap::new();
    for d in dets {
        by_frame.entry(d.frame).or_default().push(d);
    }
    let mut out = Vec::new();
    for frame in by_frame.values() {
        for (i, a) in frame.iter().enumerate() {
            for b in &frame[i + 1..] {
                if let Some(f) = spatial_features(a, b, joint_count) {
                    let same = matches!((labels.get(&a.id), labels.get(&b.id)), (Some(x), Some(y)) if x == y);
                    out.push(Sample::sparse(f, same));
                }
            }
        }
    }
    out
}

pub fn joint_types_in(dets: &[Detection]) -> usize {
    dets.iter()
        .map(|d| d.joint.index() + 1)
        .max()
        .unwrap_or(0)
}

/// Convenience: `JointType` of each pair block, in block order.
pub fn spatial_blocks(joint_count: usize) -> Vec<(JointType, JointType)> {
    let mut out = Vec::new();
    for lo in 0..joint_count {
        for hi in lo + 1..joint_count {
            out.push((JointType(lo as u16), JointType(hi as u16)));
        }
    }
    out
}

fn person_labels(
    dets: &[Detection],
    gt: &[GroundTruthPose],
    pckh_ratio: f64,
) -> Result<HashMap<DetectionId, PersonId>> {
    let labels = label_detections(dets, gt, pckh_ratio)?;
    Ok(dets
        .iter()
        .zip(labels)
        .filter_map(|(d, l)| Some((d.id, l?)))
        .collect())
}

/// Fit the temporal model on the temporal edges of the graph over `dets`.
pub fn train_temporal_model(
    dets: &[Detection],
    gt: &[GroundTruthPose],
    corr: &CorrespondenceIndex,
    tau: u32,
    pckh_ratio: f64,
    cfg: &TrainConfig,
) -> Result<LogisticModel> {
    let labels = person_labels(dets, gt, pckh_ratio)?;
    let g = build_graph(dets, tau)?;
    let samples = temporal_training_samples(&g, corr, &labels)?;
    train_logistic(&samples, TEMPORAL_FEATURE_DIM, cfg)
}

/// Fit the geometric cross-type model on all same-frame pairs of `dets`.
pub fn train_spatial_model(
    dets: &[Detection],
    gt: &[GroundTruthPose],
    joint_count: usize,
    pckh_ratio: f64,
    cfg: &TrainConfig,
) -> Result<LogisticModel> {
    let labels = person_labels(dets, gt, pckh_ratio)?;
    let samples = spatial_training_samples(dets, &labels, joint_count);
    train_logistic(&samples, spatial_feature_dim(joint_count), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::model::Point;
    use proptest::prelude::*;

    fn det(id: u32, frame: u32, joint: u16, x: f64, y: f64, score: f64) -> Detection {
        Detection::new(id, frame, JointType(joint), Point::new(x, y), score, 1.0).unwrap()
    }

    #[test]
    fn unary_values() {
        assert_eq!(unary_cost(0.5), 0.0);
        assert!((unary_cost(0.9) - (-2.197_224_577_336_219_4)).abs() < 1e-12);
        for p in [0.01, 0.3, 0.77, 0.999] {
            assert!((unary_cost(p) + unary_cost(1.0 - p)).abs() < 1e-12);
        }
    }

    #[test]
    fn same_type_spatial_probability_is_iou() {
        let a = det(0, 0, 2, 0.0, 0.0, 0.9);
        let same = det(1, 0, 2, 0.0, 0.0, 0.9);
        let far = det(2, 0, 2, 500.0, 0.0, 0.9);
        let third = det(3, 0, 2, 35.0, 0.0, 0.9);
        assert_eq!(spatial_probability(&a, &same, None).unwrap(), 1.0 - 1e-6);
        assert_eq!(spatial_probability(&a, &far, None).unwrap(), 1e-6);
        assert!((spatial_probability(&a, &third, None).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cross_type_needs_model() {
        let a = det(0, 0, 0, 0.0, 0.0, 0.9);
        let b = det(1, 0, 1, 0.0, 0.0, 0.9);
        assert!(matches!(spatial_probability(&a, &b, None), Err(Error::Config(_))));
        let table = SpatialModel::EdgeTable(HashMap::from([((0, 1), 0.8)]));
        assert_eq!(spatial_probability(&b, &a, Some(&table)).unwrap(), 0.8);
    }

    fn corr_for(points_a: Vec<Point>, points_b: Vec<Point>) -> CorrespondenceIndex {
        CorrespondenceIndex::new(vec![Correspondence::new(0, 1, points_a, points_b).unwrap()])
    }

    #[test]
    fn temporal_feature_cases() {
        let a = det(0, 0, 0, 100.0, 100.0, 0.9);
        let b = det(1, 1, 0, 100.0, 100.0, 0.8);
        let inside = vec![Point::new(100.0, 100.0), Point::new(110.0, 90.0)];
        let f = temporal_features(&a, &b, &corr_for(inside.clone(), inside)).unwrap();
        assert_eq!(f.match_ratio, 1.0);
        assert_eq!((f.dx, f.dy, f.dist), (0.0, 0.0, 0.0));
        assert_eq!(f.min_score, 0.8);

        let outside = vec![Point::new(500.0, 500.0)];
        let f = temporal_features(&a, &b, &corr_for(outside.clone(), outside)).unwrap();
        assert_eq!(f.match_ratio, 0.0);

        let c = det(2, 1, 0, 65.0, 100.0, 0.8);
        let f = temporal_features(&a, &c, &corr_for(vec![], vec![])).unwrap();
        assert!((f.dx - 0.5).abs() < 1e-12);
        assert!((f.dist - 0.5).abs() < 1e-12);

        let missing = det(3, 4, 0, 0.0, 0.0, 0.5);
        assert!(matches!(
            temporal_features(&a, &missing, &corr_for(vec![], vec![])),
            Err(Error::MissingCorrespondence(0, 4))
        ));
    }

    #[test]
    fn partial_overlap_ratio() {
        let a = det(0, 0, 0, 0.0, 0.0, 0.9);
        let b = det(1, 1, 0, 0.0, 0.0, 0.9);
        // Pair 0: both inside. Pair 1: source inside only. Pair 2: target inside
        // only. Pair 3: neither.
        let src = vec![
            Point::new(1.0, 1.0),
            Point::new(2.0, 2.0),
            Point::new(300.0, 0.0),
            Point::new(300.0, 0.0),
        ];
        let dst = vec![
            Point::new(1.0, 1.0),
            Point::new(300.0, 0.0),
            Point::new(3.0, 3.0),
            Point::new(300.0, 0.0),
        ];
        let f = temporal_features(&a, &b, &corr_for(src, dst)).unwrap();
        assert!((f.match_ratio - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn temporal_probability_matches_high_precision_sigmoid() {
        // Logit -1.27625; reference sigmoid evaluated with 50-digit arithmetic.
        let m = LogisticModel {
            weights: vec![0.3, -1.2, 0.5, 0.25, -0.7, 0.05, 0.1, -0.2, 0.3, 0.15],
            bias: -0.4,
        };
        let f = TemporalFeatures {
            match_ratio: 0.6,
            min_score: 0.85,
            dx: 0.2,
            dy: -0.1,
            dist: 0.3,
        };
        let p = temporal_probability(&f, &m).unwrap();
        assert!((p - 0.218_189_232_622_150_83).abs() < 1e-15, "{p}");
    }

    #[test]
    fn potentials_for_tiny_graph() {
        let g = build_graph(&[det(0, 0, 0, 0.0, 0.0, 0.9)], 3).unwrap();
        let t = build_potentials(&g, &CorrespondenceIndex::default(), &LogisticModel::zeros(10), None)
            .unwrap();
        assert!((t.node_cost[&0] - (-2.197_224_577_336_219)).abs() < 1e-12);

        let g = build_graph(&[det(0, 0, 0, 0.0, 0.0, 0.9), det(1, 0, 0, 900.0, 0.0, 0.9)], 3).unwrap();
        let t = build_potentials(&g, &CorrespondenceIndex::default(), &LogisticModel::zeros(10), None)
            .unwrap();
        let psi = t.spatial_cost[&(0, 1)];
        assert!((psi - ((1.0 - 1e-6) / 1e-6f64).ln()).abs() < 1e-9);
        assert!((psi - 13.815_509_557_963_773).abs() < 1e-6);

        let g = build_graph(&[det(0, 0, 0, 0.0, 0.0, 0.9), det(1, 1, 0, 0.0, 0.0, 0.9)], 3).unwrap();
        let corr = corr_for(vec![], vec![]);
        let t = build_potentials(&g, &corr, &LogisticModel::zeros(10), None).unwrap();
        assert_eq!(t.temporal_cost[&(0, 1)], 0.0);
    }

    #[test]
    fn geometric_model_dimension_is_recovered() {
        let m = SpatialModel::geometric(LogisticModel::zeros(spatial_feature_dim(14))).unwrap();
        assert!(matches!(m, SpatialModel::Geometric { joint_count: 14, .. }));
        assert!(SpatialModel::geometric(LogisticModel::zeros(7)).is_err());
    }

    #[test]
    fn potential_file_round_trip() {
        let mut t = PotentialTable::default();
        t.node_cost.insert(3, -1.25);
        t.spatial_cost.insert((3, 4), 0.1);
        t.temporal_cost.insert((3, 9), 1.0 / 7.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.jsonl");
        write_potentials(&p, &t).unwrap();
        assert_eq!(read_potentials(&p).unwrap(), t);
    }

    proptest! {
        #[test]
        fn cost_sign_follows_probability(p in 1e-6f64..(1.0 - 1e-6)) {
            let c = unary_cost(p);
            prop_assert_eq!(c < 0.0, p > 0.5);
        }

        #[test]
        fn low_iou_is_repulsive(x in 0.0f64..400.0, y in 0.0f64..400.0) {
            let a = det(0, 0, 1, 0.0, 0.0, 0.9);
            let b = det(1, 0, 1, x, y, 0.9);
            let p = spatial_probability(&a, &b, None).unwrap();
            if iou(&derive_bbox(&a), &derive_bbox(&b)) <= 0.1 {
                prop_assert!(edge_cost(p) >= 9f64.ln() - 1e-12);
            }
        }

        #[test]
        fn temporal_features_swap_symmetric(
            ax in 0.0f64..200.0, ay in 0.0f64..200.0, bx in 0.0f64..200.0, by in 0.0f64..200.0,
            pts in proptest::collection::vec((0.0f64..200.0, 0.0f64..200.0, 0.0f64..200.0, 0.0f64..200.0), 0..30),
        ) {
            let a = det(0, 0, 0, ax, ay, 0.7);
            let b = det(1, 1, 0, bx, by, 0.6);
            let src = pts.iter().map(|p| Point::new(p.0, p.1)).collect();
            let dst = pts.iter().map(|p| Point::new(p.2, p.3)).collect();
            let corr = corr_for(src, dst);
            let f = temporal_features(&a, &b, &corr).unwrap();
            let r = temporal_features(&b, &a, &corr).unwrap();
            prop_assert_eq!(f.match_ratio, r.match_ratio);
            prop_assert_eq!(f.min_score, r.min_score);
            prop_assert!((f.dist - r.dist).abs() < 1e-12);
            prop_assert_eq!(f.dx, -r.dx);
            prop_assert_eq!(f.dy, -r.dy);
        }
    }
}
