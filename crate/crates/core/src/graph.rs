//! The spatio-temporal graph over joint detections.
//!
//! Spatial edges fully connect the detections of one frame regardless of
//! joint type. Temporal edges connect detections of the same joint type that
//! are between 1 and `tau` frames apart.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::io::{read_records, to_jsonl};
use crate::model::{write_atomic, BoundingBox, Detection, DetectionId, Frame, JointType, Point};

/// Box side in pixels for a detection found at pyramid scale 1.
pub const BOX_SIDE_AT_UNIT_SCALE: f64 = 70.0;

pub const DEFAULT_TAU: u32 = 3;
pub const DEFAULT_NMS_IOU: f64 = 0.7;

/// Square box of side `70 / scale` centred on the detection.
pub fn derive_bbox(d: &Detection) -> BoundingBox {
    BoundingBox {
        center: d.pos,
        side: BOX_SIDE_AT_UNIT_SCALE / d.scale,
    }
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ha, hb) = (a.side / 2.0, b.side / 2.0);
    let w = (a.center.x + ha).min(b.center.x + hb) - (a.center.x - ha).max(b.center.x - hb);
    let h = (a.center.y + ha).min(b.center.y + hb) - (a.center.y - ha).max(b.center.y - hb);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Greedy non-maximum suppression within each `(frame, joint type)` group.
///
/// Detections are visited by descending score (ties: lower id first) and kept
/// iff their IoU with every already kept detection of the group is at most
/// `iou_threshold`. Survivors are returned in input order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut groups: BTreeMap<(Frame, JointType), Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        groups.entry((d.frame, d.joint)).or_default().push(i);
    }
    let mut keep = vec![false; dets.len()];
    for members in groups.values_mut() {
        members.sort_by(|&a, &b| {
            dets[b]
                .score
                .total_cmp(&dets[a].score)
                .then(dets[a].id.cmp(&dets[b].id))
        });
        let mut kept: Vec<BoundingBox> = Vec::new();
        for &i in members.iter() {
            let bb = derive_bbox(&dets[i]);
            if kept.iter().all(|k| iou(k, &bb) <= iou_threshold) {
                kept.push(bb);
                keep[i] = true;
            }
        }
    }
    dets.iter()
        .zip(keep)
        .filter_map(|(d, k)| k.then_some(*d))
        .collect()
}

/// Undirected spatial edge, `a < b`, both endpoints in one frame.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpatialEdge {
    pub a: DetectionId,
    pub b: DetectionId,
}

/// Temporal edge from the earlier detection `a` to the later detection `b`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TemporalEdge {
    pub a: DetectionId,
    pub b: DetectionId,
}

#[derive(Clone, Debug)]
pub struct SpatioTemporalGraph {
    /// Nodes sorted by `(frame, id)`.
    pub nodes: Vec<Detection>,
    /// `boxes[i]` belongs to `nodes[i]`.
    pub boxes: Vec<BoundingBox>,
    /// Sorted by `(frame, a, b)`.
    pub spatial_edges: Vec<SpatialEdge>,
    /// Sorted by `(frame(a), frame(b), a, b)`.
    pub temporal_edges: Vec<TemporalEdge>,
    pub tau: u32,
    position: HashMap<DetectionId, usize>,
}

impl SpatioTemporalGraph {
    pub fn node_position(&self, id: DetectionId) -> Option<usize> {
        self.position.get(&id).copied()
    }

    pub fn node(&self, id: DetectionId) -> Option<&Detection> {
        self.node_position(id).map(|i| &self.nodes[i])
    }

    pub fn bbox(&self, id: DetectionId) -> Option<&BoundingBox> {
        self.node_position(id).map(|i| &self.boxes[i])
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Build the graph over (already suppressed) detections.
pub fn build_graph(dets: &[Detection], tau: u32) -> Result<SpatioTemporalGraph> {
    if tau == 0 {
        return Err(Error::Config("tau must be at least 1".into()));
    }
    let mut nodes = dets.to_vec();
    nodes.sort_by_key(|d| (d.frame, d.id));
    let mut position = HashMap::with_capacity(nodes.len());
    for (i, d) in nodes.iter().enumerate() {
        if position.insert(d.id, i).is_some() {
            return Err(Error::validation(format!("duplicate detection id {}", d.id)));
        }
    }
    let boxes = nodes.iter().map(derive_bbox).collect();

    let mut by_frame: BTreeMap<Frame, Vec<usize>> = BTreeMap::new();
    for (i, d) in nodes.iter().enumerate() {
        by_frame.entry(d.frame).or_default().push(i);
    }

    let mut spatial_edges = Vec::new();
    for members in by_frame.values() {
        let mut ids: Vec<DetectionId> = members.iter().map(|&i| nodes[i].id).collect();
        ids.sort_unstable();
        for (k, &a) in ids.iter().enumerate() {
            for &b in &ids[k + 1..] {
                spatial_edges.push(SpatialEdge { a, b });
            }
        }
    }

    let mut temporal_edges = Vec::new();
    for (&f, members) in &by_frame {
        for df in 1..=tau {
            let Some(later) = f.checked_add(df).and_then(|g| by_frame.get(&g)) else {
                continue;
            };
            let mut pairs = Vec::new();
            for &i in members {
                for &j in later {
                    if nodes[i].joint == nodes[j].joint {
                        pairs.push(TemporalEdge {
                            a: nodes[i].id,
                            b: nodes[j].id,
                        });
                    }
                }
            }
            pairs.sort_unstable();
            temporal_edges.extend(pairs);
        }
    }

    Ok(SpatioTemporalGraph {
        nodes,
        boxes,
        spatial_edges,
        temporal_edges,
        tau,
        position,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum GraphRecord {
    Graph {
        tau: u32,
    },
    Node {
        id: DetectionId,
        frame: Frame,
        joint: u16,
        x: f64,
        y: f64,
        score: f64,
        scale: f64,
    },
    Spatial {
        a: DetectionId,
        b: DetectionId,
    },
    Temporal {
        a: DetectionId,
        b: DetectionId,
    },
}

/// Debug dump: a `graph` header line, then node lines, then edge lines.
pub fn write_graph(path: impl AsRef<Path>, g: &SpatioTemporalGraph) -> Result<()> {
    let header = std::iter::once(GraphRecord::Graph { tau: g.tau });
    let nodes = g.nodes.iter().map(|d| GraphRecord::Node {
        id: d.id,
        frame: d.frame,
        joint: d.joint.0,
        x: d.pos.x,
        y: d.pos.y,
        score: d.score,
        scale: d.scale,
    });
    let spatial = g
        .spatial_edges
        .iter()
        .map(|e| GraphRecord::Spatial { a: e.a, b: e.b });
    let temporal = g
        .temporal_edges
        .iter()
        .map(|e| GraphRecord::Temporal { a: e.a, b: e.b });
    let text = to_jsonl(header.chain(nodes).chain(spatial).chain(temporal))?;
    write_atomic(path, text.as_bytes())
}

/// Read a graph dump. Edges are rebuilt from the nodes and `tau`; the edge
/// lines in the file must agree with the rebuilt sets.
pub fn read_graph(path: impl AsRef<Path>) -> Result<SpatioTemporalGraph> {
    let path = path.as_ref();
    let records: Vec<(usize, GraphRecord)> = read_records(path)?;
    let mut tau = None;
    let mut nodes = Vec::new();
    let mut spatial = Vec::new();
    let mut temporal = Vec::new();
    for (_, r) in records {
        match r {
            GraphRecord::Graph { tau: t } => tau = Some(t),
            GraphRecord::Node {
                id,
                frame,
                joint,
                x,
                y,
                score,
                scale,
            } => nodes.push(Detection::new(
                id,
                frame,
                JointType(joint),
                Point::new(x, y),
                score,
                scale,
            )?),
            GraphRecord::Spatial { a, b } => spatial.push(SpatialEdge { a, b }),
            GraphRecord::Temporal { a, b } => temporal.push(TemporalEdge { a, b }),
        }
    }
    let tau = tau.ok_or_else(|| Error::validation("graph file has no header line"))?;
    let g = build_graph(&nodes, tau)?;
    spatial.sort_by_key(|e| (g.node(e.a).map(|d| d.frame), e.a, e.b));
    if spatial != g.spatial_edges || temporal != g.temporal_edges {
        return Err(Error::validation(
            "graph file edges do not match the edges implied by its nodes and tau",
        ));
    }
    Ok(g)
}
