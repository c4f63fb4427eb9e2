//! Windowed tracking: build, solve and stitch one batch of frames at a time,
//! then decode person tracks from the selected nodes and edges.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, nms, SpatioTemporalGraph, DEFAULT_NMS_IOU, DEFAULT_TAU};
use crate::ilp::{Families, IlpInstance, VarKey};
use crate::model::{Detection, DetectionId, Frame, JointType, Point, PoseTracks, Track, TrackEntry};
use crate::potentials::{build_potentials, CorrespondenceIndex, LogisticModel, PotentialTable, SpatialModel};
use crate::solver::{solve, Assignment, SolveStats, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub batch_size: u32,
    pub tau: u32,
    pub min_frames: u32,
    pub min_avg_nodes: f64,
    pub nms_iou: f64,
    pub solver: SolverConfig,
    pub families: Families,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            batch_size: 31,
            tau: DEFAULT_TAU,
            min_frames: 7,
            min_avg_nodes: 6.0,
            nms_iou: DEFAULT_NMS_IOU,
            solver: SolverConfig {
                node_limit: 1_000,
                ..SolverConfig::default()
            },
            families: Families::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.tau == 0 || self.min_frames == 0 {
            return Err(Error::Config(
                "batch_size, tau and min_frames must be at least 1".into(),
            ));
        }
        if !(self.min_avg_nodes >= 0.0 && self.min_avg_nodes.is_finite()) {
            return Err(Error::Config(format!(
                "min_avg_nodes must be non-negative, got {}",
                self.min_avg_nodes
            )));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(Error::Config(format!("nms_iou must lie in [0, 1], got {}", self.nms_iou)));
        }
        self.solver.validate()
    }
}

pub struct Models {
    pub temporal: LogisticModel,
    pub spatial: Option<SpatialModel>,
}

/// Detections that ended up in one connected component.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Sorted by id.
    pub members: Vec<Detection>,
}

impl Partition {
    pub fn first_frame(&self) -> Frame {
        self.members.iter().map(|d| d.frame).min().unwrap_or(0)
    }

    /// `max frame - min frame + 1`.
    pub fn frame_span(&self) -> u32 {
        let lo = self.members.iter().map(|d| d.frame).min();
        let hi = self.members.iter().map(|d| d.frame).max();
        match (lo, hi) {
            (Some(lo), Some(hi)) => hi - lo + 1,
            _ => 0,
        }
    }

    /// Members per distinct occupied frame.
    pub fn avg_nodes_per_frame(&self) -> f64 {
        let frames: BTreeSet<Frame> = self.members.iter().map(|d| d.frame).collect();
        if frames.is_empty() {
            0.0
        } else {
            self.members.len() as f64 / frames.len() as f64
        }
    }

    /// Whether some frame holds two members of one joint type.
    pub fn has_duplicate_types(&self) -> bool {
        let mut seen = BTreeSet::new();
        !self.members.iter().all(|d| seen.insert((d.frame, d.joint)))
    }
}

fn find(parent: &mut HashMap<DetectionId, DetectionId>, x: DetectionId) -> DetectionId {
    let mut root = x;
    while parent[&root] != root {
        root = parent[&root];
    }
    let mut cur = x;
    while parent[&cur] != root {
        let next = parent[&cur];
        parent.insert(cur, root);
        cur = next;
    }
    root
}

/// Connected components over selected nodes and active edges, ordered by
/// smallest member id.
pub fn partitions_from(
    selected: &[Detection],
    active_edges: impl IntoIterator<Item = (DetectionId, DetectionId)>,
) -> Vec<Partition> {
    let mut parent: HashMap<DetectionId, DetectionId> = selected.iter().map(|d| (d.id, d.id)).collect();
    for (a, b) in active_edges {
        if !parent.contains_key(&a) || !parent.contains_key(&b) {
            continue;
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent.insert(ra.max(rb), ra.min(rb));
        }
    }
    let mut groups: BTreeMap<DetectionId, Vec<Detection>> = BTreeMap::new();
    let mut sorted = selected.to_vec();
    sorted.sort_by_key(|d| d.id);
    for d in sorted {
        let r = find(&mut parent, d.id);
        groups.entry(r).or_default().push(d);
    }
    let mut parts: Vec<Partition> = groups.into_values().map(|members| Partition { members }).collect();
    parts.sort_by_key(|p| p.members[0].id);
    parts
}

/// Partitions induced by a solved instance over graph `g`.
pub fn extract_partitions(
    g: &SpatioTemporalGraph,
    inst: &IlpInstance,
    assignment: &Assignment,
) -> Vec<Partition> {
    let selected: Vec<Detection> = g
        .nodes
        .iter()
        .filter(|d| inst.index.node_var(d.id).is_some_and(|v| assignment.values[v]))
        .copied()
        .collect();
    partitions_from(&selected, active_edges(inst, assignment))
}

fn active_edges<'a>(
    inst: &'a IlpInstance,
    assignment: &'a Assignment,
) -> impl Iterator<Item = (DetectionId, DetectionId)> + 'a {
    (inst.index.node_count()..inst.var_count()).filter_map(move |v| {
        match (assignment.values[v], inst.index.key(v)) {
            (true, VarKey::Edge(a, b)) => Some((a, b)),
            _ => None,
        }
    })
}

pub fn filter_partitions(parts: Vec<Partition>, cfg: &TrackerConfig) -> Vec<Partition> {
    parts
        .into_iter()
        .filter(|p| p.frame_span() >= cfg.min_frames && p.avg_nodes_per_frame() >= cfg.min_avg_nodes)
        .collect()
}

/// One joint per `(frame, type)`: the score-weighted mean position of the
/// members there, with the highest member score.
pub fn merge_duplicates(p: &Partition) -> Vec<TrackEntry> {
    let mut slots: BTreeMap<(Frame, JointType), Vec<&Detection>> = BTreeMap::new();
    for d in &p.members {
        slots.entry((d.frame, d.joint)).or_default().push(d);
    }
    slots
        .into_iter()
        .map(|((frame, joint), ds)| {
            if let [d] = ds.as_slice() {
                return TrackEntry {
                    frame,
                    joint,
                    pos: d.pos,
                    score: d.score,
                };
            }
            let w: f64 = ds.iter().map(|d| d.score).sum();
            let x = ds.iter().map(|d| d.score * d.pos.x).sum::<f64>() / w;
            let y = ds.iter().map(|d| d.score * d.pos.y).sum::<f64>() / w;
            let score = ds.iter().map(|d| d.score).fold(f64::MIN, f64::max);
            TrackEntry {
                frame,
                joint,
                pos: Point::new(x, y),
                score,
            }
        })
        .collect()
}

/// Kept partitions become tracks numbered by first frame, then smallest id.
fn finish(parts: Vec<Partition>, cfg: &TrackerConfig) -> (PoseTracks, Vec<Partition>) {
    let mut kept = filter_partitions(parts, cfg);
    kept.sort_by_key(|p| (p.first_frame(), p.members[0].id));
    let tracks = kept
        .iter()
        .enumerate()
        .map(|(i, p)| Track {
            id: i as u32,
            entries: merge_duplicates(p),
        })
        .collect();
    (PoseTracks { tracks }, kept)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub first_frame: Frame,
    pub last_frame: Frame,
    pub nodes: usize,
    pub variables: usize,
    pub fixed: usize,
    pub objective: f64,
    pub solve: SolveStats,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackStats {
    pub detections: usize,
    pub after_nms: usize,
    pub windows: Vec<WindowStats>,
    pub partitions: usize,
    pub tracks: usize,
    /// Every window was solved to proven optimality.
    pub proven_optimal: bool,
}

pub struct TrackOutput {
    pub tracks: PoseTracks,
    /// Kept partitions before duplicate merging, in track order.
    pub partitions: Vec<Partition>,
    pub stats: TrackStats,
}

/// Per-window data handed to an observer.
pub struct WindowView<'a> {
    pub index: usize,
    pub graph: &'a SpatioTemporalGraph,
    pub potentials: &'a PotentialTable,
    pub instance: &'a IlpInstance,
}

pub fn track(
    dets: &[Detection],
    corr: &CorrespondenceIndex,
    models: &Models,
    cfg: &TrackerConfig,
) -> Result<TrackOutput> {
    track_observed(dets, corr, models, cfg, |_| Ok(()))
}

/// [`track`], calling `observe` on every window before it is solved.
pub fn track_observed(
    dets: &[Detection],
    corr: &CorrespondenceIndex,
    models: &Models,
    cfg: &TrackerConfig,
    mut observe: impl FnMut(&WindowView<'_>) -> Result<()>,
) -> Result<TrackOutput> {
    cfg.validate()?;
    let kept = nms(dets, cfg.nms_iou);
    let mut stats = TrackStats {
        detections: dets.len(),
        after_nms: kept.len(),
        proven_optimal: true,
        ..TrackStats::default()
    };
    let Some(first) = kept.iter().map(|d| d.frame).min() else {
        return Ok(TrackOutput {
            tracks: PoseTracks::default(),
            partitions: Vec::new(),
            stats,
        });
    };
    let mut windows: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for d in &kept {
        windows.entry((d.frame - first) / cfg.batch_size).or_default().push(*d);
    }

    let mut decided_nodes: BTreeMap<DetectionId, (Detection, bool)> = BTreeMap::new();
    let mut decided_edges: HashMap<(DetectionId, DetectionId), bool> = HashMap::new();
    for (index, (w, window_dets)) in windows.into_iter().enumerate() {
        let start = first + w * cfg.batch_size;
        let trailing_from = start.saturating_sub(cfg.tau);
        let mut fixed: BTreeMap<VarKey, bool> = BTreeMap::new();
        let mut nodes = window_dets.clone();
        for (&id, &(d, sel)) in &decided_nodes {
            if d.frame >= trailing_from && d.frame < start {
                nodes.push(d);
                fixed.insert(VarKey::Node(id), sel);
            }
        }
        let g = build_graph(&nodes, cfg.tau)?;
        let trailing: BTreeSet<DetectionId> = fixed.keys().filter_map(|k| match k {
            VarKey::Node(id) => Some(*id),
            VarKey::Edge(..) => None,
        }).collect();
        let pairs = g
            .spatial_edges
            .iter()
            .map(|e| (e.a, e.b))
            .chain(g.temporal_edges.iter().map(|e| (e.a, e.b)));
        for (a, b) in pairs {
            if trailing.contains(&a) && trailing.contains(&b) {
                if let Some(&x) = decided_edges.get(&(a, b)) {
                    fixed.insert(VarKey::Edge(a, b), x);
                }
            }
        }
        let pot = build_potentials(&g, corr, &models.temporal, models.spatial.as_ref())?;
        let inst = IlpInstance::build(&g, &pot, &fixed, cfg.families)?;
        observe(&WindowView {
            index,
            graph: &g,
            potentials: &pot,
            instance: &inst,
        })?;
        let (a, solve_stats) = solve(&inst, &cfg.solver)?;
        if !solve_stats.proven_optimal {
            log::warn!(
                "window starting at frame {start} not solved to optimality; keeping the incumbent"
            );
            stats.proven_optimal = false;
        }
        for (v, &x) in a.values.iter().enumerate() {
            match inst.index.key(v) {
                VarKey::Node(id) => {
                    let d = *g.node(id).expect("node of the graph");
                    decided_nodes.insert(id, (d, x));
                }
                VarKey::Edge(p, q) => {
                    decided_edges.insert((p, q), x);
                }
            }
        }
        stats.windows.push(WindowStats {
            first_frame: start,
            last_frame: g.nodes.iter().map(|d| d.frame).max().unwrap_or(start),
            nodes: g.nodes.len(),
            variables: inst.var_count(),
            fixed: inst.fixed.len(),
            objective: a.objective,
            solve: solve_stats,
        });
    }

    let selected: Vec<Detection> = decided_nodes
        .values()
        .filter(|(_, sel)| *sel)
        .map(|(d, _)| *d)
        .collect();
    let mut edges: Vec<(DetectionId, DetectionId)> = decided_edges
        .iter()
        .filter(|(_, &x)| x)
        .map(|(&e, _)| e)
        .collect();
    edges.sort_unstable();
    let parts = partitions_from(&selected, edges);
    stats.partitions = parts.len();
    let (tracks, partitions) = finish(parts, cfg);
    stats.tracks = tracks.tracks.len();
    Ok(TrackOutput {
        tracks,
        partitions,
        stats,
    })
}

/// Single solve over all frames, for comparison with the windowed pipeline.
pub fn track_one_shot(
    dets: &[Detection],
    corr: &CorrespondenceIndex,
    models: &Models,
    cfg: &TrackerConfig,
) -> Result<TrackOutput> {
    cfg.validate()?;
    let kept = nms(dets, cfg.nms_iou);
    let g = build_graph(&kept, cfg.tau)?;
    let pot = build_potentials(&g, corr, &models.temporal, models.spatial.as_ref())?;
    let inst = IlpInstance::build(&g, &pot, &BTreeMap::new(), cfg.families)?;
    let (a, solve_stats) = solve(&inst, &cfg.solver)?;
    let parts = extract_partitions(&g, &inst, &a);
    let n_parts = parts.len();
    let (tracks, partitions) = finish(parts, cfg);
    let stats = TrackStats {
        detections: dets.len(),
        after_nms: kept.len(),
        proven_optimal: solve_stats.proven_optimal,
        windows: vec![WindowStats {
            first_frame: kept.iter().map(|d| d.frame).min().unwrap_or(0),
            last_frame: kept.iter().map(|d| d.frame).max().unwrap_or(0),
            nodes: g.nodes.len(),
            variables: inst.var_count(),
            fixed: 0,
            objective: a.objective,
            solve: solve_stats,
        }],
        partitions: n_parts,
        tracks: tracks.tracks.len(),
    };
    Ok(TrackOutput {
        tracks,
        partitions,
        stats,
    })
}
