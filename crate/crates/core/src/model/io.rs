//! Line-delimited JSON readers and writers for detections, annotations,
//! correspondences and tracks. One object per line, UTF-8, LF.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    AnnotatedJoint, Correspondence, Detection, DetectionId, Frame, GroundTruthPose, JointType,
    PersonId, Point, PoseTracks, Rect, Track, TrackEntry, TrackId,
};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct DetectionRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<DetectionId>,
    frame: Frame,
    joint: u16,
    x: f64,
    y: f64,
    score: f64,
    scale: f64,
}

#[derive(Serialize, Deserialize)]
struct JointRecord {
    #[serde(rename = "type")]
    joint: u16,
    x: f64,
    y: f64,
    occluded: bool,
}

#[derive(Serialize, Deserialize)]
struct AnnotationRecord {
    frame: Frame,
    person: PersonId,
    head: [f64; 4],
    joints: Vec<JointRecord>,
}

#[derive(Serialize, Deserialize)]
struct CorrespondenceRecord {
    frame_a: Frame,
    frame_b: Frame,
    points_a: Vec<[f64; 2]>,
    points_b: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct TrackRecord {
    track: TrackId,
    frame: Frame,
    joint: u16,
    x: f64,
    y: f64,
    score: f64,
}

/// Parse every non-blank line of `path`, tagging each record with its 1-based
/// line number.
pub(crate) fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

pub(crate) fn to_jsonl<T: Serialize>(records: impl IntoIterator<Item = T>) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Write `bytes` to `path` through a temporary file in the same directory,
/// then rename it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn at_line(path: &Path, line: usize, err: Error) -> Error {
    match err {
        Error::Validation(msg) => Error::Validation(format!("{}:{line}: {msg}", path.display())),
        other => other,
    }
}

/// Read detections. Records without an `id` get their 0-based record index.
pub fn read_detections(path: impl AsRef<Path>, joint_count: usize) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    let records: Vec<(usize, DetectionRecord)> = read_records(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (index, (line, r)) in records.into_iter().enumerate() {
        let id = r.id.unwrap_or(index as DetectionId);
        let det = JointType(r.joint)
            .check(joint_count)
            .and_then(|j| Detection::new(id, r.frame, j, Point::new(r.x, r.y), r.score, r.scale))
            .map_err(|e| at_line(path, line, e))?;
        if !seen.insert(id) {
            return Err(at_line(
                path,
                line,
                Error::validation(format!("duplicate detection id {id}")),
            ));
        }
        out.push(det);
    }
    Ok(out)
}

/// Write detections. The `id` field is only emitted when it differs from the
/// record index, so files produced here stay in the plain six-field format.
pub fn write_detections(path: impl AsRef<Path>, dets: &[Detection]) -> Result<()> {
    let text = to_jsonl(dets.iter().enumerate().map(|(i, d)| DetectionRecord {
        id: (d.id as usize != i).then_some(d.id),
        frame: d.frame,
        joint: d.joint.0,
        x: d.pos.x,
        y: d.pos.y,
        score: d.score,
        scale: d.scale,
    }))?;
    write_atomic(path, text.as_bytes())
}

pub fn read_annotations(
    path: impl AsRef<Path>,
    joint_count: usize,
) -> Result<Vec<GroundTruthPose>> {
    let path = path.as_ref();
    let records: Vec<(usize, AnnotationRecord)> = read_records(path)?;
    let mut keys = BTreeSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, r) in records {
        let pose = (|| {
            let [x0, y0, x1, y1] = r.head;
            let head = Rect::new(x0, y0, x1, y1)?;
            let joints = r
                .joints
                .iter()
                .map(|j| {
                    Ok(AnnotatedJoint {
                        joint: JointType(j.joint).check(joint_count)?,
                        pos: Point::new(j.x, j.y),
                        occluded: j.occluded,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            GroundTruthPose::new(r.frame, r.person, head, joints)
        })()
        .map_err(|e| at_line(path, line, e))?;
        if !keys.insert((pose.frame, pose.person_id)) {
            return Err(at_line(
                path,
                line,
                Error::validation(format!(
                    "person {} annotated twice in frame {}",
                    pose.person_id, pose.frame
                )),
            ));
        }
        out.push(pose);
    }
    Ok(out)
}

pub fn write_annotations(path: impl AsRef<Path>, poses: &[GroundTruthPose]) -> Result<()> {
    let text = to_jsonl(poses.iter().map(|p| AnnotationRecord {
        frame: p.frame,
        person: p.person_id,
        head: [p.head_box.x0, p.head_box.y0, p.head_box.x1, p.head_box.y1],
        joints: p
            .joints
            .iter()
            .map(|j| JointRecord {
                joint: j.joint.0,
                x: j.pos.x,
                y: j.pos.y,
                occluded: j.occluded,
            })
            .collect(),
    }))?;
    write_atomic(path, text.as_bytes())
}

pub fn read_correspondences(path: impl AsRef<Path>) -> Result<Vec<Correspondence>> {
    let path = path.as_ref();
    let records: Vec<(usize, CorrespondenceRecord)> = read_records(path)?;
    records
        .into_iter()
        .map(|(line, r)| {
            let pts = |v: Vec<[f64; 2]>| v.into_iter().map(|[x, y]| Point::new(x, y)).collect();
            Correspondence::new(r.frame_a, r.frame_b, pts(r.points_a), pts(r.points_b))
                .map_err(|e| at_line(path, line, e))
        })
        .collect()
}

pub fn write_correspondences(path: impl AsRef<Path>, corr: &[Correspondence]) -> Result<()> {
    let pts = |v: &[Point]| v.iter().map(|p| [p.x, p.y]).collect();
    let text = to_jsonl(corr.iter().map(|c| CorrespondenceRecord {
        frame_a: c.frame_a,
        frame_b: c.frame_b,
        points_a: pts(&c.points_a),
        points_b: pts(&c.points_b),
    }))?;
    write_atomic(path, text.as_bytes())
}

/// Read tracks. Entries are grouped by track id; tracks keep the order of
/// their first line and entries keep file order.
pub fn read_tracks(path: impl AsRef<Path>) -> Result<PoseTracks> {
    let path = path.as_ref();
    let records: Vec<(usize, TrackRecord)> = read_records(path)?;
    let mut order: Vec<TrackId> = Vec::new();
    let mut by_id: BTreeMap<TrackId, Vec<TrackEntry>> = BTreeMap::new();
    for (line, r) in records {
        if !(r.x.is_finite() && r.y.is_finite() && (0.0..=1.0).contains(&r.score)) {
            return Err(at_line(
                path,
                line,
                Error::validation("track entry needs finite position and score in [0, 1]"),
            ));
        }
        let entries = by_id.entry(r.track).or_insert_with(|| {
            order.push(r.track);
            Vec::new()
        });
        entries.push(TrackEntry {
            frame: r.frame,
            joint: JointType(r.joint),
            pos: Point::new(r.x, r.y),
            score: r.score,
        });
    }
    let tracks = PoseTracks {
        tracks: order
            .into_iter()
            .map(|id| Track {
                id,
                entries: by_id.remove(&id).unwrap_or_default(),
            })
            .collect(),
    };
    tracks.validate()?;
    Ok(tracks)
}

pub fn write_tracks(path: impl AsRef<Path>, tracks: &PoseTracks) -> Result<()> {
    let text = to_jsonl(tracks.tracks.iter().flat_map(|t| {
        t.entries.iter().map(move |e| TrackRecord {
            track: t.id,
            frame: e.frame,
            joint: e.joint.0,
            x: e.pos.x,
            y: e.pos.y,
            score: e.score,
        })
    }))?;
    write_atomic(path, text.as_bytes())
}
