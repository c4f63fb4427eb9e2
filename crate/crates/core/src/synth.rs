//! Deterministic synthetic scenes: annotated people walking with constant
//! velocity, noisy joint detections and dense point correspondences.
//!
//! All randomness comes from one `ChaCha8Rng` seeded with `seed`, drawn in
//! this order: per-person parameters, per-frame motion noise, occlusion
//! episodes, detections (people, then false positives, frame by frame) and
//! finally correspondence jitter. Every draw happens regardless of whether the
//! corresponding rate or noise level is zero.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, SpatioTemporalGraph, BOX_SIDE_AT_UNIT_SCALE};
use crate::model::{
    write_annotations, write_correspondences, write_detections, AnnotatedJoint, Correspondence,
    Detection, Frame, GroundTruthPose, JointType, Point, Rect, DEFAULT_JOINT_COUNT,
};
use crate::potentials::PotentialTable;

pub const JOINT_NAMES: [&str; DEFAULT_JOINT_COUNT] = [
    "head_top",
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
];

/// Joint offsets from the pelvis in units of the person's box side.
const TEMPLATE: [(f64, f64); DEFAULT_JOINT_COUNT] = [
    (0.0, -1.6),
    (0.0, -1.15),
    (-0.35, -1.05),
    (-0.45, -0.6),
    (-0.5, -0.15),
    (0.35, -1.05),
    (0.45, -0.6),
    (0.5, -0.15),
    (-0.2, 0.0),
    (-0.2, 0.6),
    (-0.2, 1.2),
    (0.2, 0.0),
    (0.2, 0.6),
    (0.2, 1.2),
];

/// Joint groups hidden together by an occlusion episode.
const LIMBS: [&[u16]; 5] = [&[0, 1], &[2, 3, 4], &[5, 6, 7], &[8, 9, 10], &[11, 12, 13]];

const HEAD_HALF_WIDTH: f64 = 0.225;
const HEAD_TOP: f64 = -1.65;
const HEAD_BOTTOM: f64 = -1.1;

/// Region sampled for correspondences, relative to the pelvis.
const REGION_X: (f64, f64) = (-0.75, 0.75);
const REGION_Y: (f64, f64) = (-1.8, 1.4);
const REGION_STEP: f64 = 0.25;
const BACKGROUND_STEP: f64 = 80.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub persons: usize,
    pub frames: u32,
    pub joint_count: usize,
    pub width: f64,
    pub height: f64,
    /// Largest per-axis velocity in pixels per frame.
    pub max_speed: f64,
    /// Standard deviation of the per-frame root jitter.
    pub motion_noise: f64,
    /// Standard deviation of detection positions around the true joints.
    pub noise: f64,
    pub miss: f64,
    /// Probability of one false positive per frame and joint type.
    pub fp: f64,
    pub occlusions: usize,
    pub occlusion_frames: (u32, u32),
    /// Detector scale range; a person's box side is `70 / scale`.
    pub scale_range: (f64, f64),
    /// Horizontal distance between neighbouring people; `None` spreads them
    /// evenly across the image.
    pub spacing: Option<f64>,
    /// Correspondences are produced for frame pairs up to this far apart.
    pub corr_span: u32,
    pub corr_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            persons: 3,
            frames: 41,
            joint_count: DEFAULT_JOINT_COUNT,
            width: 1280.0,
            height: 720.0,
            max_speed: 1.5,
            motion_noise: 0.0,
            noise: 0.0,
            miss: 0.0,
            fp: 0.0,
            occlusions: 0,
            occlusion_frames: (4, 10),
            scale_range: (0.9, 1.2),
            spacing: None,
            corr_span: 3,
            corr_jitter: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let rate = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        rate("miss", self.miss)?;
        rate("fp", self.fp)?;
        let non_negative = [
            ("noise", self.noise),
            ("motion_noise", self.motion_noise),
            ("max_speed", self.max_speed),
            ("corr_jitter", self.corr_jitter),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::Config("image size must be positive".into()));
        }
        if self.joint_count == 0 || self.joint_count > DEFAULT_JOINT_COUNT {
            return Err(Error::Config(format!(
                "joint_count must be between 1 and {DEFAULT_JOINT_COUNT}"
            )));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("invalid scale range ({lo}, {hi})")));
        }
        let (a, b) = self.occlusion_frames;
        if a == 0 || a > b {
            return Err(Error::Config(format!("invalid occlusion duration range ({a}, {b})")));
        }
        if let Some(s) = self.spacing {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Config(format!("invalid spacing {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthScene {
    pub annotations: Vec<GroundTruthPose>,
    pub detections: Vec<Detection>,
    pub correspondences: Vec<Correspondence>,
}

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const DETECTIONS_FILE: &str = "detections.jsonl";
pub const CORRESPONDENCES_FILE: &str = "correspondences.jsonl";

impl SynthScene {
    /// Write the three files into `dir`, creating it if needed.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_annotations(dir.join(ANNOTATIONS_FILE), &self.annotations)?;
        write_detections(dir.join(DETECTIONS_FILE), &self.detections)?;
        write_correspondences(dir.join(CORRESPONDENCES_FILE), &self.correspondences)
    }
}

struct Person {
    scale: f64,
    roots: Vec<Point>,
}

impl Person {
    fn unit(&self) -> f64 {
        BOX_SIDE_AT_UNIT_SCALE / self.scale
    }

    fn joint(&self, f: usize, j: usize) -> Point {
        let (ox, oy) = TEMPLATE[j];
        self.roots[f] + Point::new(ox, oy) * self.unit()
    }

    fn contains(&self, f: usize, p: Point) -> bool {
        let d = p - self.roots[f];
        let u = self.unit();
        d.x >= REGION_X.0 * u && d.x <= REGION_X.1 * u && d.y >= REGION_Y.0 * u && d.y <= REGION_Y.1 * u
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthScene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let frames = cfg.frames as usize;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let spacing = cfg
        .spacing
        .unwrap_or(cfg.width / (cfg.persons as f64 + 1.0));
    let first_x = cfg.width / 2.0 - spacing * (cfg.persons as f64 - 1.0) / 2.0;
    let mut people = Vec::with_capacity(cfg.persons);
    let mut velocities = Vec::with_capacity(cfg.persons);
    for i in 0..cfg.persons {
        let scale = uniform(&mut rng, cfg.scale_range.0, cfg.scale_range.1);
        let vx = uniform(&mut rng, -cfg.max_speed, cfg.max_speed);
        let vy = uniform(&mut rng, -cfg.max_speed, cfg.max_speed) / 3.0;
        let start = Point::new(first_x + spacing * i as f64, cfg.height * 0.55);
        people.push(Person {
            scale,
            roots: vec![start],
        });
        velocities.push(Point::new(vx, vy));
    }
    for f in 1..frames {
        for (p, v) in people.iter_mut().zip(&velocities) {
            let jitter = Point::new(
                std_normal.sample(&mut rng) * cfg.motion_noise,
                std_normal.sample(&mut rng) * cfg.motion_noise,
            );
            let next = p.roots[f - 1] + *v + jitter;
            p.roots.push(next);
        }
    }

    // (person, frame, joint) triples hidden by occlusion.
    let mut hidden = BTreeSet::new();
    for _ in 0..cfg.occlusions {
        let person = rng.random_range(0..cfg.persons.max(1));
        let limb = LIMBS[rng.random_range(0..LIMBS.len())];
        let len = rng.random_range(cfg.occlusion_frames.0..=cfg.occlusion_frames.1);
        let start = rng.random_range(0..cfg.frames.max(1));
        if cfg.persons == 0 {
            continue;
        }
        for f in start..(start + len).min(cfg.frames) {
            for &j in limb {
                if (j as usize) < cfg.joint_count {
                    hidden.insert((person, f, j));
                }
            }
        }
    }

    let mut annotations = Vec::new();
    for f in 0..frames {
        for (i, p) in people.iter().enumerate() {
            let u = p.unit();
            let r = p.roots[f];
            let head = Rect::new(
                r.x - HEAD_HALF_WIDTH * u,
                r.y + HEAD_TOP * u,
                r.x + HEAD_HALF_WIDTH * u,
                r.y + HEAD_BOTTOM * u,
            )?;
            let joints = (0..cfg.joint_count)
                .map(|j| AnnotatedJoint {
                    joint: JointType(j as u16),
                    pos: p.joint(f, j),
                    occluded: hidden.contains(&(i, f as Frame, j as u16)),
                })
                .collect();
            annotations.push(GroundTruthPose::new(f as Frame, i as u32, head, joints)?);
        }
    }

    let mut detections = Vec::new();
    for f in 0..frames {
        for (i, p) in people.iter().enumerate() {
            for j in 0..cfg.joint_count {
                let drop = rng.random::<f64>() < cfg.miss;
                let dx = std_normal.sample(&mut rng) * cfg.noise;
                let dy = std_normal.sample(&mut rng) * cfg.noise;
                let score = uniform(&mut rng, 0.75, 0.98);
                if drop || hidden.contains(&(i, f as Frame, j as u16)) {
                    continue;
                }
                let pos = p.joint(f, j) + Point::new(dx, dy);
                let id = detections.len() as u32;
                detections.push(Detection::new(id, f as Frame, JointType(j as u16), pos, score, p.scale)?);
            }
        }
        for j in 0..cfg.joint_count {
            let emit = rng.random::<f64>() < cfg.fp;
            let pos = Point::new(uniform(&mut rng, 0.0, cfg.width), uniform(&mut rng, 0.0, cfg.height));
            let score = uniform(&mut rng, 0.5, 0.7);
            let scale = uniform(&mut rng, cfg.scale_range.0, cfg.scale_range.1);
            if emit {
                let id = detections.len() as u32;
                detections.push(Detection::new(id, f as Frame, JointType(j as u16), pos, score, scale)?);
            }
        }
    }

    let mut background = Vec::new();
    let mut y = BACKGROUND_STEP / 2.0;
    while y < cfg.height {
        let mut x = BACKGROUND_STEP / 2.0;
        while x < cfg.width {
            background.push(Point::new(x, y));
            x += BACKGROUND_STEP;
        }
        y += BACKGROUND_STEP;
    }
    let mut correspondences = Vec::new();
    for f in 0..frames {
        for span in 1..=cfg.corr_span as usize {
            let g = f + span;
            if g >= frames {
                break;
            }
            let (mut src, mut dst) = (Vec::new(), Vec::new());
            for p in &people {
                let u = p.unit();
                let delta = p.roots[g] - p.roots[f];
                let nx = ((REGION_X.1 - REGION_X.0) / REGION_STEP).round() as usize;
                let ny = ((REGION_Y.1 - REGION_Y.0) / REGION_STEP).round() as usize;
                for iy in 0..=ny {
                    for ix in 0..=nx {
                        let off = Point::new(
                            REGION_X.0 + ix as f64 * REGION_STEP,
                            REGION_Y.0 + iy as f64 * REGION_STEP,
                        ) * u;
                        let a = p.roots[f] + off;
                        src.push(a);
                        dst.push(a + delta);
                    }
                }
            }
            for &b in &background {
                if !people.iter().any(|p| p.contains(f, b) || p.contains(g, b)) {
                    src.push(b);
                    dst.push(b);
                }
            }
            for q in dst.iter_mut() {
                q.x += std_normal.sample(&mut rng) * cfg.corr_jitter;
                q.y += std_normal.sample(&mut rng) * cfg.corr_jitter;
            }
            correspondences.push(Correspondence::new(f as Frame, g as Frame, src, dst)?);
        }
    }

    Ok(SynthScene {
        annotations,
        detections,
        correspondences,
    })
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// A small random graph with random costs, for checking the solver against
/// exhaustive search. Detections are added one at a time over 2 to 4 frames
/// and up to 3 joint types until one more would exceed `max_vars` variables.
pub fn random_problem(seed: u64, max_vars: usize) -> Result<(SpatioTemporalGraph, PotentialTable)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = rng.random_range(2..=4u32);
    let tau = rng.random_range(1..=3u32);
    let types = rng.random_range(1..=3u16);
    let target = rng.random_range(2..=12usize);
    let mut dets: Vec<Detection> = Vec::new();
    let mut g = build_graph(&dets, tau)?;
    for id in 0..target as u32 {
        let f = rng.random_range(0..frames);
        let j = rng.random_range(0..types);
        let x = uniform(&mut rng, 0.0, 200.0);
        let y = uniform(&mut rng, 0.0, 200.0);
        let d = Detection::new(id, f, JointType(j), Point::new(x, y), 0.5, 1.0)?;
        dets.push(d);
        let next = build_graph(&dets, tau)?;
        if next.nodes.len() + next.spatial_edges.len() + next.temporal_edges.len() > max_vars {
            dets.pop();
            break;
        }
        g = next;
    }
    let mut pot = PotentialTable::default();
    let mut cost = || uniform(&mut rng, -3.0, 3.0);
    for d in &g.nodes {
        pot.node_cost.insert(d.id, cost());
    }
    for e in &g.spatial_edges {
        pot.spatial_cost.insert((e.a, e.b), cost());
    }
    for e in &g.temporal_edges {
        pot.temporal_cost.insert((e.a, e.b), cost());
    }
    Ok((g, pot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::derive_bbox;

    #[test]
    fn clean_detections_sit_on_joints() {
        let scene = generate(&SynthConfig::default()).unwrap();
        assert_eq!(scene.annotations.len(), 3 * 41);
        assert_eq!(scene.detections.len(), 3 * 41 * 14);
        for d in &scene.detections {
            let p = scene
                .annotations
                .iter()
                .filter(|a| a.frame == d.frame)
                .find_map(|a| a.joint(d.joint).filter(|j| j.pos == d.pos));
            assert!(p.is_some(), "detection {} is off its joint", d.id);
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let cfg = SynthConfig {
            seed: 11,
            noise: 2.0,
            miss: 0.1,
            fp: 0.2,
            occlusions: 3,
            motion_noise: 0.5,
            corr_jitter: 0.5,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 12, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn full_miss_rate_gives_no_detections() {
        let cfg = SynthConfig {
            miss: 1.0,
            ..SynthConfig::default()
        };
        let s = generate(&cfg).unwrap();
        assert!(s.detections.is_empty());
        assert!(!s.annotations.is_empty());
    }

    #[test]
    fn occluded_joints_are_not_detected() {
        let cfg = SynthConfig {
            occlusions: 4,
            seed: 3,
            ..SynthConfig::default()
        };
        let s = generate(&cfg).unwrap();
        let occluded: usize = s
            .annotations
            .iter()
            .map(|a| a.joints.iter().filter(|j| j.occluded).count())
            .sum();
        assert!(occluded > 0);
        assert_eq!(s.detections.len() + occluded, 3 * 41 * 14);
    }

    #[test]
    fn correspondences_follow_people() {
        let s = generate(&SynthConfig::default()).unwrap();
        assert_eq!(s.correspondences.len(), 40 + 39 + 38);
        // Points inside a joint box in frame 0 land in the same joint's box in
        // frame 1.
        let c = &s.correspondences[0];
        assert_eq!((c.frame_a, c.frame_b), (0, 1));
        let a = s.detections.iter().find(|d| d.frame == 0).unwrap();
        let b = s
            .detections
            .iter()
            .find(|d| d.frame == 1 && d.joint == a.joint && d.pos.distance(a.pos) < 10.0)
            .unwrap();
        let (ba, bb) = (derive_bbox(a), derive_bbox(b));
        let inside: Vec<_> = c.points_a.iter().zip(&c.points_b).filter(|(p, _)| ba.contains(**p)).collect();
        assert!(inside.len() >= 9);
        assert!(inside.iter().all(|(_, q)| bb.contains(**q)));
    }

    #[test]
    fn scene_files_round_trip() {
        let s = generate(&SynthConfig {
            frames: 5,
            noise: 1.0,
            ..SynthConfig::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.write(dir.path()).unwrap();
        let dets = crate::model::read_detections(dir.path().join(DETECTIONS_FILE), 14).unwrap();
        assert_eq!(dets, s.detections);
        let gt = crate::model::read_annotations(dir.path().join(ANNOTATIONS_FILE), 14).unwrap();
        assert_eq!(gt, s.annotations);
        let corr = crate::model::read_correspondences(dir.path().join(CORRESPONDENCES_FILE)).unwrap();
        assert_eq!(corr, s.correspondences);
    }

    #[test]
    fn random_problems_respect_the_size_limit() {
        for seed in 0..50 {
            let (g, pot) = random_problem(seed, 22).unwrap();
            let vars = g.nodes.len() + g.spatial_edges.len() + g.temporal_edges.len();
            assert!(vars <= 22);
            assert_eq!(
                pot.node_cost.len() + pot.spatial_cost.len() + pot.temporal_cost.len(),
                vars
            );
        }
    }
}
