//! PCKh-based pose and tracking evaluation.
//!
//! Pose accuracy is average precision per joint type over predictions ranked
//! by score. Tracking follows CLEAR MOT with every `(person, joint type)`
//! trajectory treated as its own target; only joints of the same type match.

mod assignment;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Frame, GroundTruthPose, JointType, PersonId, Point, PoseTracks, Track, TrackEntry, TrackId,
    SCORE_EPS,
};

pub use assignment::max_matching_min_cost;

pub const DEFAULT_PCKH_RATIO: f64 = 0.2;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PckhConfig {
    pub ratio: f64,
}

impl Default for PckhConfig {
    fn default() -> Self {
        PckhConfig {
            ratio: DEFAULT_PCKH_RATIO,
        }
    }
}

/// `ratio` times the head-box diagonal.
pub fn pckh_threshold(gt: &GroundTruthPose, ratio: f64) -> Result<f64> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Config(format!(
            "PCKh ratio must be positive, got {ratio}"
        )));
    }
    let diag = gt.head_box.diagonal();
    if !(diag > 0.0 && diag.is_finite()) {
        return Err(Error::validation(format!(
            "frame {}, person {}: head box has no area",
            gt.frame, gt.person_id
        )));
    }
    Ok(ratio * diag)
}

/// One tracked pose in one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictedPose {
    pub track: TrackId,
    pub joints: Vec<(JointType, Point, f64)>,
}

impl PredictedPose {
    /// Mean joint score.
    pub fn score(&self) -> f64 {
        if self.joints.is_empty() {
            0.0
        } else {
            self.joints.iter().map(|j| j.2).sum::<f64>() / self.joints.len() as f64
        }
    }
}

/// Per-frame poses, tracks in id order.
pub fn poses_by_frame(tracks: &PoseTracks) -> BTreeMap<Frame, Vec<PredictedPose>> {
    let mut sorted: Vec<_> = tracks.tracks.iter().collect();
    sorted.sort_by_key(|t| t.id);
    let mut out: BTreeMap<Frame, Vec<PredictedPose>> = BTreeMap::new();
    for t in sorted {
        let mut frames: BTreeMap<Frame, Vec<(JointType, Point, f64)>> = BTreeMap::new();
        for e in &t.entries {
            frames.entry(e.frame).or_default().push((e.joint, e.pos, e.score));
        }
        for (f, mut joints) in frames {
            joints.sort_by_key(|j| j.0);
            out.entry(f).or_default().push(PredictedPose {
                track: t.id,
                joints,
            });
        }
    }
    out
}

struct GtFrame<'a> {
    pose: &'a GroundTruthPose,
    threshold: f64,
}

fn gt_by_frame(gt: &[GroundTruthPose], ratio: f64) -> Result<BTreeMap<Frame, Vec<GtFrame<'_>>>> {
    let mut out: BTreeMap<Frame, Vec<GtFrame<'_>>> = BTreeMap::new();
    for p in gt {
        out.entry(p.frame).or_default().push(GtFrame {
            pose: p,
            threshold: pckh_threshold(p, ratio)?,
        });
    }
    for v in out.values_mut() {
        v.sort_by_key(|g| g.pose.person_id);
    }
    Ok(out)
}

fn is_correct(pos: Point, gt: &GtFrame<'_>, joint: JointType) -> Option<f64> {
    let j = gt.pose.joint(joint)?;
    let d = pos.distance(j.pos);
    (d <= gt.threshold).then_some(d / gt.threshold)
}

/// Greedy one-to-one pose matching within a frame.
///
/// Predictions go in descending pose score (ties: input order). Each takes the
/// free ground-truth pose with the most correct joints (at least one), then
/// the smaller mean normalised distance over those joints, then the smaller
/// person id. Returns the ground-truth index per prediction.
pub fn match_poses(
    preds: &[PredictedPose],
    gts: &[GroundTruthPose],
    ratio: f64,
) -> Result<Vec<Option<usize>>> {
    let frames: Vec<GtFrame<'_>> = gts
        .iter()
        .map(|p| {
            Ok(GtFrame {
                pose: p,
                threshold: pckh_threshold(p, ratio)?,
            })
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&GtFrame<'_>> = frames.iter().collect();
    Ok(match_frame(preds, &refs))
}

fn match_frame(preds: &[PredictedPose], gts: &[&GtFrame<'_>]) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score().total_cmp(&preds[a].score()).then(a.cmp(&b)));
    let mut taken = vec![false; gts.len()];
    let mut out = vec![None; preds.len()];
    for i in order {
        let mut best: Option<(usize, f64, PersonId, usize)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let (mut correct, mut dist) = (0usize, 0.0);
            for &(joint, pos, _) in &preds[i].joints {
                if let Some(d) = is_correct(pos, gt, joint) {
                    correct += 1;
                    dist += d;
                }
            }
            if correct == 0 {
                continue;
            }
            let mean = dist / correct as f64;
            let id = gt.pose.person_id;
            let better = match best {
                None => true,
                Some((c, m, p, _)) => {
                    correct > c || (correct == c && (mean < m || (mean == m && id < p)))
                }
            };
            if better {
                best = Some((correct, mean, id, g));
            }
        }
        if let Some((.., g)) = best {
            taken[g] = true;
            out[i] = Some(g);
        }
    }
    out
}

/// Average precision of ranked predictions (`true` = correct) against `n_gt`
/// positives, using the monotone precision envelope. Result in `[0, 1]`.
pub fn average_precision(ranked: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    for (k, &hit) in ranked.iter().enumerate() {
        tp += hit as usize;
        precision.push(tp as f64 / (k + 1) as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    for (k, &hit) in ranked.iter().enumerate() {
        if hit {
            ap += precision[k];
        }
    }
    ap / n_gt as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoseAccuracy {
    /// Fraction in `[0, 1]` per joint type that has ground truth.
    pub per_joint_ap: BTreeMap<JointType, f64>,
    /// Mean of `per_joint_ap`; 0 when there is no ground truth.
    pub map: f64,
}

/// Pose mAP. Joints of a matched prediction are correct when within the
/// matched person's threshold of the same-type joint; all other predicted
/// joints are false positives. With `occlusion_aware`, occluded ground-truth
/// joints that were not correctly predicted leave the denominator.
pub fn pose_map(
    tracks: &PoseTracks,
    gt: &[GroundTruthPose],
    ratio: f64,
    occlusion_aware: bool,
) -> Result<PoseAccuracy> {
    let gt_frames = gt_by_frame(gt, ratio)?;
    let preds = poses_by_frame(tracks);
    // (score, frame, track, correct) per joint type.
    let mut items: BTreeMap<JointType, Vec<(f64, Frame, TrackId, bool)>> = BTreeMap::new();
    let mut n_gt: BTreeMap<JointType, usize> = BTreeMap::new();
    let mut hit_gt: BTreeSet<(Frame, PersonId, JointType)> = BTreeSet::new();
    let empty = Vec::new();

    let frames: BTreeSet<Frame> = gt_frames.keys().chain(preds.keys()).copied().collect();
    for f in frames {
        let g: Vec<&GtFrame<'_>> = gt_frames.get(&f).map_or(Vec::new(), |v| v.iter().collect());
        let p = preds.get(&f).unwrap_or(&empty);
        let m = match_frame(p, &g);
        for (pose, gi) in p.iter().zip(&m) {
            for &(joint, pos, score) in &pose.joints {
                let ok = gi.is_some_and(|gi| is_correct(pos, g[gi], joint).is_some());
                if ok {
                    let gi = gi.expect("matched");
                    hit_gt.insert((f, g[gi].pose.person_id, joint));
                }
                items.entry(joint).or_default().push((score, f, pose.track, ok));
            }
        }
    }
    for p in gt {
        for j in &p.joints {
            let counted = !(occlusion_aware && j.occluded)
                || hit_gt.contains(&(p.frame, p.person_id, j.joint));
            let slot = n_gt.entry(j.joint).or_default();
            if counted {
                *slot += 1;
            }
        }
    }
    let mut per_joint_ap = BTreeMap::new();
    for (&joint, &n) in &n_gt {
        if n == 0 {
            continue;
        }
        let mut list = items.remove(&joint).unwrap_or_default();
        list.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let ranked: Vec<bool> = list.iter().map(|x| x.3).collect();
        per_joint_ap.insert(joint, average_precision(&ranked, n));
    }
    let map = if per_joint_ap.is_empty() {
        0.0
    } else {
        per_joint_ap.values().sum::<f64>() / per_joint_ap.len() as f64
    };
    Ok(PoseAccuracy { per_joint_ap, map })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct TrackingReport {
    pub MOTA: f64,
    pub MOTP: f64,
    pub Rcll: f64,
    pub Prcn: f64,
    pub MT: usize,
    pub ML: usize,
    pub IDs: usize,
    pub FM: usize,
    pub GT: usize,
    pub TP: usize,
    pub FP: usize,
    pub FN: usize,
    /// Number of `(person, joint type)` trajectories evaluated.
    pub trajectories: usize,
}

type GtJoint = (PersonId, Point, f64, bool);

#[derive(Default)]
struct TargetState {
    last_track: Option<TrackId>,
    in_gap: bool,
    present: usize,
    matched: usize,
}

/// CLEAR MOT over joint trajectories.
pub fn track_metrics(
    tracks: &PoseTracks,
    gt: &[GroundTruthPose],
    ratio: f64,
    occlusion_aware: bool,
) -> Result<TrackingReport> {
    let gt_frames = gt_by_frame(gt, ratio)?;
    // Predicted joints per (frame, type): (track, position).
    let mut pred: BTreeMap<(Frame, JointType), Vec<(TrackId, Point)>> = BTreeMap::new();
    for t in &tracks.tracks {
        for e in &t.entries {
            pred.entry((e.frame, e.joint)).or_default().push((t.id, e.pos));
        }
    }
    for v in pred.values_mut() {
        v.sort_by_key(|p| p.0);
    }
    // (person, position, threshold, occluded) per frame and joint type.
    let mut gt_joints: BTreeMap<(Frame, JointType), Vec<GtJoint>> = BTreeMap::new();
    for (&f, poses) in &gt_frames {
        for g in poses {
            for j in &g.pose.joints {
                gt_joints
                    .entry((f, j.joint))
                    .or_default()
                    .push((g.pose.person_id, j.pos, g.threshold, j.occluded));
            }
        }
    }

    let mut r = TrackingReport::default();
    let mut targets: BTreeMap<(PersonId, JointType), TargetState> = BTreeMap::new();
    let mut prev: HashMap<(PersonId, JointType), (Frame, TrackId)> = HashMap::new();
    let mut motp_sum = 0.0;
    let keys: BTreeSet<(Frame, JointType)> = pred.keys().chain(gt_joints.keys()).copied().collect();
    let none = Vec::new();
    for key @ (f, joint) in keys {
        let g = gt_joints.get(&key).unwrap_or(&none);
        let p = pred.get(&key).map_or(&[][..], |v| v.as_slice());
        let mut g_match: Vec<Option<usize>> = vec![None; g.len()];
        let mut p_used = vec![false; p.len()];

        // Keep last frame's pairs that are still within threshold.
        for (gi, &(person, pos, thr, _)) in g.iter().enumerate() {
            let Some(&(pf, track)) = prev.get(&(person, joint)) else {
                continue;
            };
            if f == 0 || pf != f - 1 {
                continue;
            }
            if let Some(pi) = p.iter().position(|x| x.0 == track) {
                if !p_used[pi] && p[pi].1.distance(pos) <= thr {
                    g_match[gi] = Some(pi);
                    p_used[pi] = true;
                }
            }
        }
        let free_g: Vec<usize> = (0..g.len()).filter(|&i| g_match[i].is_none()).collect();
        let free_p: Vec<usize> = (0..p.len()).filter(|&i| !p_used[i]).collect();
        let cost: Vec<Vec<Option<f64>>> = free_g
            .iter()
            .map(|&gi| {
                free_p
                    .iter()
                    .map(|&pi| {
                        let d = p[pi].1.distance(g[gi].1);
                        (d <= g[gi].2).then_some(d)
                    })
                    .collect()
            })
            .collect();
        for (k, m) in max_matching_min_cost(&cost).into_iter().enumerate() {
            if let Some(c) = m {
                g_match[free_g[k]] = Some(free_p[c]);
                p_used[free_p[c]] = true;
            }
        }

        for (gi, &(person, pos, thr, occluded)) in g.iter().enumerate() {
            let st = targets.entry((person, joint)).or_default();
            match g_match[gi] {
                Some(pi) => {
                    let track = p[pi].0;
                    r.TP += 1;
                    r.GT += 1;
                    motp_sum += 1.0 - p[pi].1.distance(pos) / thr;
                    if st.last_track.is_some_and(|t| t != track) {
                        r.IDs += 1;
                    }
                    if st.in_gap {
                        r.FM += 1;
                        st.in_gap = false;
                    }
                    st.last_track = Some(track);
                    st.present += 1;
                    st.matched += 1;
                    prev.insert((person, joint), (f, track));
                }
                None if occlusion_aware && occluded => {}
                None => {
                    r.FN += 1;
                    r.GT += 1;
                    st.present += 1;
                    if st.last_track.is_some() {
                        st.in_gap = true;
                    }
                }
            }
        }
        r.FP += p_used.iter().filter(|u| !**u).count();
    }

    for st in targets.values() {
        if st.present == 0 {
            continue;
        }
        r.trajectories += 1;
        if 5 * st.matched >= 4 * st.present {
            r.MT += 1;
        }
        if 5 * st.matched <= st.present {
            r.ML += 1;
        }
    }
    let gt_total = r.GT.max(1) as f64;
    let errors = (r.FN + r.FP + r.IDs) as f64;
    r.MOTA = 100.0 * (gt_total - errors) / gt_total;
    r.MOTP = if r.TP == 0 {
        0.0
    } else {
        100.0 * motp_sum / r.TP as f64
    };
    r.Rcll = if r.GT == 0 {
        0.0
    } else {
        100.0 * r.TP as f64 / r.GT as f64
    };
    r.Prcn = if r.TP + r.FP == 0 {
        0.0
    } else {
        100.0 * r.TP as f64 / (r.TP + r.FP) as f64
    };
    Ok(r)
}

/// Ground truth read as a prediction: one track per person id, every
/// annotated joint with score 1.
pub fn tracks_from_annotations(gt: &[GroundTruthPose]) -> PoseTracks {
    let mut by_person: BTreeMap<PersonId, Vec<TrackEntry>> = BTreeMap::new();
    for p in gt {
        let entries = by_person.entry(p.person_id).or_default();
        entries.extend(p.joints.iter().map(|j| TrackEntry {
            frame: p.frame,
            joint: j.joint,
            pos: j.pos,
            score: 1.0 - SCORE_EPS,
        }));
    }
    PoseTracks {
        tracks: by_person
            .into_iter()
            .map(|(id, mut entries)| {
                entries.sort_by_key(|e| (e.frame, e.joint));
                Track { id, entries }
            })
            .collect(),
    }
}

/// Serialised evaluation result. Percentages are in `[0, 100]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct EvalReport {
    pub mAP: f64,
    /// Keyed by joint type index.
    pub per_joint_ap: BTreeMap<String, f64>,
    pub MOTA: f64,
    pub MOTP: f64,
    pub Rcll: f64,
    pub Prcn: f64,
    pub MT: usize,
    pub ML: usize,
    pub IDs: usize,
    pub FM: usize,
    pub occlusion_aware: bool,
    pub GT: usize,
    pub TP: usize,
    pub FP: usize,
    pub FN: usize,
}

pub fn evaluate(
    tracks: &PoseTracks,
    gt: &[GroundTruthPose],
    cfg: &PckhConfig,
    occlusion_aware: bool,
) -> Result<EvalReport> {
    let pose = pose_map(tracks, gt, cfg.ratio, occlusion_aware)?;
    let t = track_metrics(tracks, gt, cfg.ratio, occlusion_aware)?;
    Ok(EvalReport {
        mAP: 100.0 * pose.map,
        per_joint_ap: pose
            .per_joint_ap
            .iter()
            .map(|(j, ap)| (j.0.to_string(), 100.0 * ap))
            .collect(),
        MOTA: t.MOTA,
        MOTP: t.MOTP,
        Rcll: t.Rcll,
        Prcn: t.Prcn,
        MT: t.MT,
        ML: t.ML,
        IDs: t.IDs,
        FM: t.FM,
        occlusion_aware,
        GT: t.GT,
        TP: t.TP,
        FP: t.FP,
        FN: t.FN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AnnotatedJoint, Rect};
    use proptest::prelude::*;

    fn head() -> Rect {
        // Diagonal 100, so the default threshold is 20 px.
        Rect::new(0.0, 0.0, 60.0, 80.0).unwrap()
    }

    fn pose(frame: Frame, person: PersonId, joints: &[(u16, f64, f64, bool)]) -> GroundTruthPose {
        let joints = joints
            .iter()
            .map(|&(j, x, y, occluded)| AnnotatedJoint {
                joint: JointType(j),
                pos: Point::new(x, y),
                occluded,
            })
            .collect();
        GroundTruthPose::new(frame, person, head(), joints).unwrap()
    }

    fn entry(frame: Frame, joint: u16, x: f64, y: f64, score: f64) -> TrackEntry {
        TrackEntry {
            frame,
            joint: JointType(joint),
            pos: Point::new(x, y),
            score,
        }
    }

    fn tracks(list: Vec<(TrackId, Vec<TrackEntry>)>) -> PoseTracks {
        PoseTracks {
            tracks: list
                .into_iter()
                .map(|(id, entries)| Track { id, entries })
                .collect(),
        }
    }

    #[test]
    fn threshold_examples() {
        let p = pose(0, 0, &[]);
        assert_eq!(pckh_threshold(&p, 0.2).unwrap(), 20.0);
        assert_eq!(pckh_threshold(&p, 0.3).unwrap(), 30.0);
        let mut bad = p.clone();
        bad.head_box = Rect {
            x0: 1.0,
            y0: 1.0,
            x1: 1.0,
            y1: 1.0,
        };
        assert!(pckh_threshold(&bad, 0.2).is_err());
    }

    #[test]
    fn greedy_pose_matching() {
        let gt = vec![pose(0, 4, &[(0, 10.0, 10.0, false), (1, 50.0, 10.0, false)])];
        let on = PredictedPose {
            track: 0,
            joints: vec![(JointType(0), Point::new(10.0, 10.0), 0.9)],
        };
        let off = PredictedPose {
            track: 1,
            joints: vec![(JointType(0), Point::new(200.0, 10.0), 0.99)],
        };
        assert_eq!(match_poses(std::slice::from_ref(&on), &gt, 0.2).unwrap(), vec![Some(0)]);
        assert_eq!(match_poses(&[off], &gt, 0.2).unwrap(), vec![None]);
        let weaker = PredictedPose {
            track: 2,
            joints: vec![(JointType(0), Point::new(11.0, 10.0), 0.5)],
        };
        assert_eq!(
            match_poses(&[weaker, on], &gt, 0.2).unwrap(),
            vec![None, Some(0)]
        );
    }

    #[test]
    fn ap_rank_swap() {
        assert_eq!(average_precision(&[true, false], 1), 1.0);
        assert_eq!(average_precision(&[false, true], 1), 0.5);
        assert_eq!(average_precision(&[], 3), 0.0);
    }

    #[test]
    fn ap_fixture_through_pose_map() {
        let gt = vec![pose(0, 0, &[(0, 10.0, 10.0, false)])];
        let good = |s| (0, vec![entry(0, 0, 10.0, 10.0, s)]);
        let bad = |s| (1, vec![entry(0, 0, 300.0, 10.0, s)]);
        let first = pose_map(&tracks(vec![good(0.9), bad(0.4)]), &gt, 0.2, false).unwrap();
        assert_eq!(first.map, 1.0);
        let second = pose_map(&tracks(vec![good(0.4), bad(0.9)]), &gt, 0.2, false).unwrap();
        assert_eq!(second.map, 0.5);
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let gt: Vec<_> = (0..5)
            .map(|f| pose(f, 1, &[(0, 10.0, 10.0, false), (1, 40.0, 40.0, true)]))
            .collect();
        let perfect = tracks(vec![(
            3,
            gt.iter()
                .flat_map(|p| p.joints.iter().map(|j| entry(p.frame, j.joint.0, j.pos.x, j.pos.y, 0.9)))
                .collect(),
        )]);
        let r = evaluate(&perfect, &gt, &PckhConfig::default(), false).unwrap();
        assert_eq!((r.mAP, r.MOTA, r.MOTP, r.IDs, r.FM, r.MT), (100.0, 100.0, 100.0, 0, 0, 2));
        let none = evaluate(&PoseTracks::default(), &gt, &PckhConfig::default(), false).unwrap();
        assert_eq!((none.mAP, none.MOTA, none.ML), (0.0, 0.0, 2));
    }

    /// One target over 10 frames: track 1 for frames 0-4, nothing for 5-6,
    /// track 2 for 7-9, and a stray prediction in frame 0.
    fn mota_fixture() -> (PoseTracks, Vec<GroundTruthPose>) {
        let gt: Vec<_> = (0..10).map(|f| pose(f, 0, &[(0, 100.0, 100.0, false)])).collect();
        let t = tracks(vec![
            (1, (0..5).map(|f| entry(f, 0, 100.0, 100.0, 0.9)).collect()),
            (2, (7..10).map(|f| entry(f, 0, 100.0, 100.0, 0.9)).collect()),
            (3, vec![entry(0, 0, 500.0, 500.0, 0.9)]),
        ]);
        (t, gt)
    }

    #[test]
    fn mota_fixture_is_sixty() {
        let (t, gt) = mota_fixture();
        let r = track_metrics(&t, &gt, 0.2, false).unwrap();
        assert_eq!((r.GT, r.FN, r.FP, r.IDs), (10, 2, 1, 1));
        assert_eq!(r.MOTA, 60.0);
        assert_eq!(r.FM, 1);
        assert_eq!(r.MT, 1, "8 of 10 frames is mostly tracked");
    }

    #[test]
    fn mostly_tracked_boundary() {
        let gt: Vec<_> = (0..10).map(|f| pose(f, 0, &[(0, 0.0, 0.0, false)])).collect();
        let seven = tracks(vec![(0, (0..7).map(|f| entry(f, 0, 0.0, 0.0, 0.9)).collect())]);
        assert_eq!(track_metrics(&seven, &gt, 0.2, false).unwrap().MT, 0);
        let two = tracks(vec![(0, (0..2).map(|f| entry(f, 0, 0.0, 0.0, 0.9)).collect())]);
        assert_eq!(track_metrics(&two, &gt, 0.2, false).unwrap().ML, 1);
    }

    #[test]
    fn persistence_beats_closer_candidate() {
        let gt: Vec<_> = (0..2).map(|f| pose(f, 0, &[(0, 0.0, 0.0, false)])).collect();
        let t = tracks(vec![
            (5, vec![entry(0, 0, 0.0, 0.0, 0.9), entry(1, 0, 10.0, 0.0, 0.9)]),
            (6, vec![entry(1, 0, 1.0, 0.0, 0.9)]),
        ]);
        let r = track_metrics(&t, &gt, 0.2, false).unwrap();
        assert_eq!((r.IDs, r.FP, r.TP), (0, 1, 2));
    }

    #[test]
    fn occlusion_aware_drops_unpredicted_occluded() {
        let gt = vec![pose(0, 0, &[(0, 0.0, 0.0, false), (1, 50.0, 0.0, true)])];
        let t = tracks(vec![(0, vec![entry(0, 0, 0.0, 0.0, 0.9)])]);
        let plain = evaluate(&t, &gt, &PckhConfig::default(), false).unwrap();
        let aware = evaluate(&t, &gt, &PckhConfig::default(), true).unwrap();
        assert_eq!((plain.MOTA, plain.FN), (50.0, 1));
        assert_eq!((aware.MOTA, aware.FN, aware.GT), (100.0, 0, 1));
        assert_eq!((plain.mAP, aware.mAP), (50.0, 100.0));
        // A misplaced prediction on the occluded joint is a false positive.
        let wrong = tracks(vec![(0, vec![entry(0, 0, 0.0, 0.0, 0.9), entry(0, 1, 300.0, 0.0, 0.9)])]);
        let r = evaluate(&wrong, &gt, &PckhConfig::default(), true).unwrap();
        assert_eq!((r.FP, r.FN, r.GT), (1, 0, 1));
    }

    #[test]
    fn report_keys() {
        let (t, gt) = mota_fixture();
        let r = evaluate(&t, &gt, &PckhConfig::default(), false).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for k in ["mAP", "per_joint_ap", "MOTA", "MOTP", "Rcll", "Prcn", "MT", "ML", "IDs", "FM"] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
    }

    fn arb_scene() -> impl Strategy<Value = (PoseTracks, Vec<GroundTruthPose>)> {
        // Two people over six frames, two joint types; predictions are noisy
        // copies with random track ids, some dropped.
        (
            proptest::collection::vec((-30.0f64..30.0, -30.0f64..30.0, 0.1f64..1.0, 0u32..3, any::<bool>(), any::<bool>()), 24),
        )
            .prop_map(|(noise,)| {
                let mut gt = Vec::new();
                let mut by_track: BTreeMap<TrackId, Vec<TrackEntry>> = BTreeMap::new();
                let mut k = 0;
                for f in 0..6 {
                    for person in 0..2u32 {
                        let base = 100.0 + 200.0 * person as f64;
                        let mut joints = Vec::new();
                        for j in 0..2u16 {
                            let (dx, dy, s, track, drop, occ) = noise[k];
                            k += 1;
                            let pos = (base + 30.0 * j as f64, 100.0);
                            joints.push((j, pos.0, pos.1, occ));
                            if !drop {
                                let slot = by_track.entry(track * 2 + person).or_default();
                                slot.push(entry(f, j, pos.0 + dx, pos.1 + dy, s));
                            }
                        }
                        gt.push(pose(f, person, &joints));
                    }
                }
                (tracks(by_track.into_iter().collect()), gt)
            })
    }

    proptest! {
        #[test]
        fn mota_invariant_under_relabelling((t, gt) in arb_scene(), shift in 1u32..50) {
            let renamed = PoseTracks {
                tracks: t.tracks.iter().map(|tr| Track { id: 1000 - tr.id * shift, entries: tr.entries.clone() }).collect(),
            };
            let a = track_metrics(&t, &gt, 0.2, false).unwrap();
            let b = track_metrics(&renamed, &gt, 0.2, false).unwrap();
            prop_assert_eq!(a.MOTA, b.MOTA);
            prop_assert_eq!(a.IDs, b.IDs);
        }

        #[test]
        fn appending_false_positives_never_helps((t, gt) in arb_scene(), extra in proptest::collection::vec((0u32..6, 0u16..2, 0.0f64..1.0), 1..6)) {
            let mut more = t.clone();
            more.tracks.push(Track {
                id: 999,
                entries: extra.iter().map(|&(f, j, s)| entry(f, j, 5000.0, 5000.0 + f as f64, s)).collect(),
            });
            // Deduplicate (frame, joint) slots introduced by the generator.
            let mut seen = BTreeSet::new();
            more.tracks.last_mut().unwrap().entries.retain(|e| seen.insert((e.frame, e.joint)));
            for aware in [false, true] {
                let a = evaluate(&t, &gt, &PckhConfig::default(), aware).unwrap();
                let b = evaluate(&more, &gt, &PckhConfig::default(), aware).unwrap();
                prop_assert!(b.mAP <= a.mAP + 1e-9);
                prop_assert!(b.MOTA <= a.MOTA);
            }
        }

        #[test]
        fn correctness_is_scale_covariant((t, gt) in arb_scene(), c in 0.1f64..10.0) {
            let scaled_gt: Vec<_> = gt.iter().map(|p| {
                let mut q = p.clone();
                q.head_box = p.head_box.scaled(c);
                for j in &mut q.joints { j.pos = j.pos * c; }
                q
            }).collect();
            let scaled_t = PoseTracks {
                tracks: t.tracks.iter().map(|tr| Track {
                    id: tr.id,
                    entries: tr.entries.iter().map(|e| TrackEntry { pos: e.pos * c, ..*e }).collect(),
                }).collect(),
            };
            let a = track_metrics(&t, &gt, 0.2, false).unwrap();
            let b = track_metrics(&scaled_t, &scaled_gt, 0.2, false).unwrap();
            prop_assert_eq!((a.TP, a.FP, a.FN), (b.TP, b.FP, b.FN));
            let pa = pose_map(&t, &gt, 0.2, false).unwrap();
            let pb = pose_map(&scaled_t, &scaled_gt, 0.2, false).unwrap();
            prop_assert!((pa.map - pb.map).abs() < 1e-12);
        }

        #[test]
        fn deleting_misplaced_occluded_predictions_never_hurts((t, gt) in arb_scene()) {
            // Equal scores keep pose ranking unchanged when joints are removed.
            let flat = PoseTracks {
                tracks: t.tracks.iter().map(|tr| Track {
                    id: tr.id,
                    entries: tr.entries.iter().map(|e| TrackEntry { score: 0.5, ..*e }).collect(),
                }).collect(),
            };
            let misplaced = |e: &TrackEntry| {
                let here: Vec<_> = gt.iter().filter(|p| p.frame == e.frame).collect();
                let near_any = here.iter().any(|p| p.joint(e.joint).is_some_and(|j| j.pos.distance(e.pos) <= 20.0));
                let occluded_slot = here.iter().any(|p| p.joint(e.joint).is_some_and(|j| j.occluded));
                occluded_slot && !near_any
            };
            let cleaned = PoseTracks {
                tracks: flat.tracks.iter().map(|tr| Track {
                    id: tr.id,
                    entries: tr.entries.iter().filter(|e| !misplaced(e)).copied().collect(),
                }).collect(),
            };
            let a = evaluate(&flat, &gt, &PckhConfig::default(), true).unwrap();
            let b = evaluate(&cleaned, &gt, &PckhConfig::default(), true).unwrap();
            prop_assert!(b.mAP >= a.mAP - 1e-9);
            prop_assert!(b.MOTA >= a.MOTA);
            prop_assert!(b.Prcn >= a.Prcn);
            prop_assert!(b.Rcll >= a.Rcll);
            prop_assert!(b.MOTP >= a.MOTP - 1e-9);
            prop_assert!(b.MT >= a.MT);
        }
    }
}
