//! Domain types shared by every stage of the pipeline.
//!
//! Everything here is a plain immutable value once constructed. The
//! constructors enforce the invariants (score clamping, positive scale,
//! well-formed head boxes) so downstream code never has to re-check them.

pub(crate) mod io;

use std::collections::BTreeSet;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    read_annotations, read_correspondences, read_detections, read_tracks, write_annotations,
    write_atomic, write_correspondences, write_detections, write_tracks,
};

/// Scores are clamped into `[SCORE_EPS, 1 - SCORE_EPS]` so log-odds stay finite.
pub const SCORE_EPS: f64 = 1e-6;

/// Number of annotated body joints in the default skeleton.
pub const DEFAULT_JOINT_COUNT: usize = 14;

pub type DetectionId = u32;
pub type Frame = u32;
pub type PersonId = u32;
pub type TrackId = u32;

/// Clamp a probability into the open interval used throughout the crate.
pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointType(pub u16);

impl JointType {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn check(self, joint_count: usize) -> Result<Self> {
        if self.index() < joint_count {
            Ok(self)
        } else {
            Err(Error::validation(format!(
                "joint type {} out of range for {joint_count} joints",
                self.0
            )))
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// One body-joint hypothesis.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Detection {
    pub id: DetectionId,
    pub frame: Frame,
    pub joint: JointType,
    pub pos: Point,
    /// Detector confidence, always inside `[SCORE_EPS, 1 - SCORE_EPS]`.
    pub score: f64,
    /// Pyramid scale the detector ran at.
    pub scale: f64,
}

impl Detection {
    /// Validating constructor. Scores of exactly 0 or 1 are clamped; anything
    /// outside `[0, 1]` is rejected.
    pub fn new(
        id: DetectionId,
        frame: Frame,
        joint: JointType,
        pos: Point,
        score: f64,
        scale: f64,
    ) -> Result<Self> {
        if !pos.is_finite() {
            return Err(Error::validation(format!("detection {id}: non-finite position")));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::validation(format!(
                "detection {id}: score {score} outside [0, 1]"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::validation(format!(
                "detection {id}: scale must be positive, got {scale}"
            )));
        }
        Ok(Detection {
            id,
            frame,
            joint,
            pos,
            score: clamp_probability(score),
            scale,
        })
    }
}

/// Axis-aligned square box.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BoundingBox {
    pub center: Point,
    pub side: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: Point) -> bool {
        let h = self.side / 2.0;
        (p.x - self.center.x).abs() <= h && (p.y - self.center.y).abs() <= h
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }
}

/// Axis-aligned rectangle `[x0, y0, x1, y1]` with `x0 < x1`, `y0 < y1`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return Err(Error::validation("head box has non-finite coordinates"));
        }
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::validation(format!(
                "head box [{x0}, {y0}, {x1}, {y1}] must have positive width and height"
            )));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn scaled(&self, k: f64) -> Rect {
        Rect {
            x0: self.x0 * k,
            y0: self.y0 * k,
            x1: self.x1 * k,
            y1: self.y1 * k,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct AnnotatedJoint {
    pub joint: JointType,
    pub pos: Point,
    pub occluded: bool,
}

/// Annotated pose of one person in one frame. Truncated joints are absent.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthPose {
    pub frame: Frame,
    pub person_id: PersonId,
    pub head_box: Rect,
    pub joints: Vec<AnnotatedJoint>,
}

impl GroundTruthPose {
    pub fn new(
        frame: Frame,
        person_id: PersonId,
        head_box: Rect,
        joints: Vec<AnnotatedJoint>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for j in &joints {
            if !seen.insert(j.joint) {
                return Err(Error::validation(format!(
                    "frame {frame}, person {person_id}: joint type {} listed twice",
                    j.joint.0
                )));
            }
            if !j.pos.is_finite() {
                return Err(Error::validation(format!(
                    "frame {frame}, person {person_id}: non-finite joint position"
                )));
            }
        }
        Ok(GroundTruthPose {
            frame,
            person_id,
            head_box,
            joints,
        })
    }

    pub fn joint(&self, joint: JointType) -> Option<&AnnotatedJoint> {
        self.joints.iter().find(|j| j.joint == joint)
    }
}

/// Matched key-point pairs between two frames.
#[derive(Clone, Debug, PartialEq)]
pub struct Correspondence {
    pub frame_a: Frame,
    pub frame_b: Frame,
    pub points_a: Vec<Point>,
    pub points_b: Vec<Point>,
}

impl Correspondence {
    pub fn new(
        frame_a: Frame,
        frame_b: Frame,
        points_a: Vec<Point>,
        points_b: Vec<Point>,
    ) -> Result<Self> {
        if frame_a == frame_b {
            return Err(Error::validation(format!(
                "correspondence links frame {frame_a} to itself"
            )));
        }
        if points_a.len() != points_b.len() {
            return Err(Error::validation(format!(
                "correspondence {frame_a}->{frame_b}: {} source points but {} targets",
                points_a.len(),
                points_b.len()
            )));
        }
        Ok(Correspondence {
            frame_a,
            frame_b,
            points_a,
            points_b,
        })
    }

    /// The same matches seen from the other frame.
    pub fn reversed(&self) -> Correspondence {
        Correspondence {
            frame_a: self.frame_b,
            frame_b: self.frame_a,
            points_a: self.points_b.clone(),
            points_b: self.points_a.clone(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TrackEntry {
    pub frame: Frame,
    pub joint: JointType,
    pub pos: Point,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub id: TrackId,
    pub entries: Vec<TrackEntry>,
}

/// Tracked poses: one track per person, at most one joint of each type per frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoseTracks {
    pub tracks: Vec<Track>,
}

impl PoseTracks {
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for t in &self.tracks {
            if !ids.insert(t.id) {
                return Err(Error::validation(format!("track id {} used twice", t.id)));
            }
            let mut slots = BTreeSet::new();
            for e in &t.entries {
                if !slots.insert((e.frame, e.joint)) {
                    return Err(Error::validation(format!(
                        "track {}: joint {} appears twice in frame {}",
                        t.id, e.joint.0, e.frame
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn entry_count(&self) -> usize {
        self.tracks.iter().map(|t| t.entries.len()).sum()
    }
}
