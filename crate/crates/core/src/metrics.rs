//! Detection precision/recall and CLEAR MOT tracking evaluation.
//!
//! Tracking scores follow the CLEAR MOT protocol: correspondences persist
//! from frame to frame while they remain above the match threshold, new
//! correspondences are formed by an optimal assignment maximizing total
//! overlap, and a mismatch is charged whenever a ground-truth object's track
//! id changes relative to its last established correspondence.
//!
//! `MOTP = sum(d) / sum(c)` over matched pairs (overlap in `iou` mode, pixel
//! error in `center_distance` mode); `MOTA = 1 - (misses + false positives +
//! mismatches) / total ground truth`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_matching;
use crate::types::{center_distance, iou, Detection, GroundTruthObject, TrackRecord};
use crate::{Error, Result};

/// Distance definition reported by MOTP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MotpMode {
    #[default]
    Iou,
    CenterDistance,
}

/// Matching threshold and MOTP distance choice.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Minimum IoU for a truth/hypothesis pair to count as a match.
    pub match_threshold_iou: f64,
    pub motp_mode: MotpMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            match_threshold_iou: 0.5,
            motp_mode: MotpMode::Iou,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.match_threshold_iou > 0.0 && self.match_threshold_iou <= 1.0) {
            return Err(Error::Config("match_threshold_iou must be in (0, 1]".into()));
        }
        Ok(())
    }
}

// --- precision / recall ------------------------------------------------------

/// Detection-level counts and rates.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    /// Set when `tp + fp == 0` (precision defaults to 1 by convention).
    pub precision_denominator_empty: bool,
    /// Set when `tp + fn == 0` (recall defaults to 1 by convention).
    pub recall_denominator_empty: bool,
}

fn group_by_frame<T, F: Fn(&T) -> u64>(items: &[T], frame_of: F) -> BTreeMap<u64, Vec<&T>> {
    let mut map: BTreeMap<u64, Vec<&T>> = BTreeMap::new();
    for item in items {
        map.entry(frame_of(item)).or_default().push(item);
    }
    map
}

/// Frame-by-frame greedy matching by descending IoU, one-to-one, then the
/// usual aggregate rates.
pub fn precision_recall(
    truth: &[GroundTruthObject],
    detections: &[Detection],
    cfg: &EvalConfig,
) -> Result<PrecisionRecall> {
    cfg.validate()?;
    let truth_by_frame = group_by_frame(truth, |g| g.frame);
    let dets_by_frame = group_by_frame(detections, |d| d.frame);
    let mut frames: Vec<u64> = truth_by_frame.keys().chain(dets_by_frame.keys()).cloned().collect();
    frames.sort_unstable();
    frames.dedup();

    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    let empty_gt = Vec::new();
    let empty_det = Vec::new();
    for f in frames {
        let gts = truth_by_frame.get(&f).unwrap_or(&empty_gt);
        let dets = dets_by_frame.get(&f).unwrap_or(&empty_det);
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (gi, g) in gts.iter().enumerate() {
            for (di, d) in dets.iter().enumerate() {
                let v = iou(&g.box_, &d.box_);
                if v >= cfg.match_threshold_iou {
                    pairs.push((v, gi, di));
                }
            }
        }
        pairs.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut gt_used = vec![false; gts.len()];
        let mut det_used = vec![false; dets.len()];
        let mut matched = 0u64;
        for (_, gi, di) in pairs {
            if !gt_used[gi] && !det_used[di] {
                gt_used[gi] = true;
                det_used[di] = true;
                matched += 1;
            }
        }
        tp += matched;
        fp += dets.len() as u64 - matched;
        fn_ += gts.len() as u64 - matched;
    }

    let precision_denominator_empty = tp + fp == 0;
    let recall_denominator_empty = tp + fn_ == 0;
    Ok(PrecisionRecall {
        precision: if precision_denominator_empty {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        },
        recall: if recall_denominator_empty {
            1.0
        } else {
            tp as f64 / (tp + fn_) as f64
        },
        tp,
        fp,
        fn_,
        precision_denominator_empty,
        recall_denominator_empty,
    })
}

// --- CLEAR MOT ---------------------------------------------------------------

/// Running CLEAR MOT tallies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotTallies {
    pub matches: u64,
    pub misses: u64,
    pub false_positives: u64,
    pub mismatches: u64,
    pub gt_total: u64,
    pub distance_sum: f64,
}

impl MotTallies {
    pub fn add(&mut self, other: &MotTallies) {
        self.matches += other.matches;
        self.misses += other.misses;
        self.false_positives += other.false_positives;
        self.mismatches += other.mismatches;
        self.gt_total += other.gt_total;
        self.distance_sum += other.distance_sum;
    }
}

/// Final scores plus the tallies behind them.
#[derive(Debug, Clone)]
pub struct MotResult {
    /// Average match distance (overlap or pixel error); NaN when no matches
    /// were ever made.
    pub motp: f64,
    /// NaN when the ground truth is empty.
    pub mota: f64,
    pub tallies: MotTallies,
    pub zero_matches: bool,
}

/// Frame-sequential CLEAR MOT evaluator carrying correspondence state.
#[derive(Debug, Clone)]
pub struct MotAccumulator {
    cfg: EvalConfig,
    /// Current correspondences (ground-truth id -> track id).
    correspondence: HashMap<u64, u64>,
    /// Last established correspondence per ground-truth id, for mismatch
    /// counting across gaps.
    last_track: HashMap<u64, u64>,
    pub tallies: MotTallies,
}

impl MotAccumulator {
    pub fn new(cfg: EvalConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(MotAccumulator {
            cfg,
            correspondence: HashMap::new(),
            last_track: HashMap::new(),
            tallies: MotTallies::default(),
        })
    }

    /// Feeds one frame of aligned ground truth and track hypotheses.
    pub fn observe_frame(&mut self, truth: &[&GroundTruthObject], tracks: &[&TrackRecord]) {
        let thr = self.cfg.match_threshold_iou;
        let mut gt_matched = vec![false; truth.len()];
        let mut tr_matched = vec![false; tracks.len()];
        let mut new_correspondence: HashMap<u64, u64> = HashMap::new();
        let mut frame_matches: Vec<(usize, usize)> = Vec::new();

        // keep still-valid correspondences from the previous frame
        for (gi, g) in truth.iter().enumerate() {
            if let Some(&tid) = self.correspondence.get(&g.id) {
                if let Some(ti) = tracks.iter().position(|t| t.track_id == tid) {
                    if iou(&g.box_, &tracks[ti].box_) >= thr {
                        gt_matched[gi] = true;
                        tr_matched[ti] = true;
                        new_correspondence.insert(g.id, tid);
                        frame_matches.push((gi, ti));
                    }
                }
            }
        }

        // optimal assignment over the remaining pairs, maximizing total IoU
        let free_gt: Vec<usize> = (0..truth.len()).filter(|&i| !gt_matched[i]).collect();
        let free_tr: Vec<usize> = (0..tracks.len()).filter(|&i| !tr_matched[i]).collect();
        if !free_gt.is_empty() && !free_tr.is_empty() {
            let weights: Vec<Vec<f64>> = free_gt
                .iter()
                .map(|&gi| {
                    free_tr
                        .iter()
                        .map(|&ti| {
                            let v = iou(&truth[gi].box_, &tracks[ti].box_);
                            if v >= thr {
                                v
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            for (row, assigned) in max_weight_matching(&weights).into_iter().enumerate() {
                let Some(col) = assigned else { continue };
                let (gi, ti) = (free_gt[row], free_tr[col]);
                let g = truth[gi];
                let tid = tracks[ti].track_id;
                gt_matched[gi] = true;
                tr_matched[ti] = true;
                // a changed id relative to the last established pairing is a
                // mismatch
                if let Some(&prev) = self.last_track.get(&g.id) {
                    if prev != tid {
                        self.tallies.mismatches += 1;
                    }
                }
                new_correspondence.insert(g.id, tid);
                frame_matches.push((gi, ti));
            }
        }

        for (gi, ti) in &frame_matches {
            let g = truth[*gi];
            let t = tracks[*ti];
            self.last_track.insert(g.id, t.track_id);
            self.tallies.distance_sum += match self.cfg.motp_mode {
                MotpMode::Iou => iou(&g.box_, &t.box_),
                MotpMode::CenterDistance => center_distance(&g.box_, &t.box_),
            };
        }
        let c = frame_matches.len() as u64;
        self.tallies.matches += c;
        self.tallies.gt_total += truth.len() as u64;
        self.tallies.misses += truth.len() as u64 - c;
        self.tallies.false_positives += tracks.len() as u64 - c;
        self.correspondence = new_correspondence;
    }

    pub fn finalize(&self) -> MotResult {
        let t = &self.tallies;
        let zero_matches = t.matches == 0;
        let motp = if zero_matches {
            f64::NAN
        } else {
            t.distance_sum / t.matches as f64
        };
        let mota = if t.gt_total == 0 {
            f64::NAN
        } else {
            1.0 - (t.misses + t.false_positives + t.mismatches) as f64 / t.gt_total as f64
        };
        MotResult {
            motp,
            mota,
            tallies: t.clone(),
            zero_matches,
        }
    }
}

/// Evaluates a whole sequence. The truth stream defines the frame span;
/// track records outside it are a frame-alignment error.
pub fn evaluate_mot(
    truth: &[GroundTruthObject],
    tracks: &[TrackRecord],
    cfg: &EvalConfig,
) -> Result<MotResult> {
    let mut acc = MotAccumulator::new(cfg.clone())?;
    if truth.is_empty() {
        if tracks.is_empty() {
            return Ok(acc.finalize());
        }
        return Err(Error::InvalidInput(
            "frame ranges misaligned: track records present but ground truth is empty".into(),
        ));
    }
    let first = truth.iter().map(|g| g.frame).min().unwrap();
    let last = truth.iter().map(|g| g.frame).max().unwrap();
    if let Some(bad) = tracks.iter().find(|t| t.frame < first || t.frame > last) {
        return Err(Error::InvalidInput(format!(
            "frame ranges misaligned: track record at frame {} outside ground-truth span {}..={}",
            bad.frame, first, last
        )));
    }
    let truth_by_frame = group_by_frame(truth, |g| g.frame);
    let tracks_by_frame = group_by_frame(tracks, |t| t.frame);
    let empty_gt = Vec::new();
    let empty_tr = Vec::new();
    for f in first..=last {
        let gts = truth_by_frame.get(&f).unwrap_or(&empty_gt);
        let trs = tracks_by_frame.get(&f).unwrap_or(&empty_tr);
        acc.observe_frame(gts, trs);
    }
    Ok(acc.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BoundingBox;

    fn gt(frame: u64, id: u64, x: f64, y: f64) -> GroundTruthObject {
        GroundTruthObject {
            frame,
            id,
            box_: BoundingBox::new(x, y, 10.0, 10.0).unwrap(),
            velocity: (0.0, 0.0),
            heading: 0.0,
        }
    }

    fn tr(frame: u64, id: u64, x: f64, y: f64) -> TrackRecord {
        TrackRecord {
            frame,
            track_id: id,
            box_: BoundingBox::new(x, y, 10.0, 10.0).unwrap(),
        }
    }

    fn det(frame: u64, x: f64, y: f64) -> Detection {
        Detection {
            frame,
            box_: BoundingBox::new(x, y, 10.0, 10.0).unwrap(),
            score: 1.0,
        }
    }

    #[test]
    fn precision_recall_perfect() {
        let truth = vec![gt(0, 1, 0.0, 0.0), gt(0, 2, 50.0, 0.0)];
        let dets = vec![det(0, 0.0, 0.0), det(0, 50.0, 0.0)];
        let pr = precision_recall(&truth, &dets, &EvalConfig::default()).unwrap();
        assert_eq!(pr.precision, 1.0);
        assert_eq!(pr.recall, 1.0);
        assert_eq!((pr.tp, pr.fp, pr.fn_), (2, 0, 0));
    }

    #[test]
    fn precision_recall_no_detections_flags_empty_denominator() {
        let truth = vec![gt(0, 1, 0.0, 0.0)];
        let pr = precision_recall(&truth, &[], &EvalConfig::default()).unwrap();
        assert_eq!(pr.recall, 0.0);
        assert_eq!(pr.precision, 1.0);
        assert!(pr.precision_denominator_empty);
        assert!(!pr.recall_denominator_empty);
    }

    #[test]
    fn precision_recall_hand_counted_fixture() {
        // 2 truth, 3 detections, 2 valid matches
        let truth = vec![gt(0, 1, 0.0, 0.0), gt(0, 2, 50.0, 0.0)];
        let dets = vec![
            det(0, 1.0, 0.0),   // matches gt 1
            det(0, 51.0, 0.0),  // matches gt 2
            det(0, 100.0, 0.0), // false positive
        ];
        let pr = precision_recall(&truth, &dets, &EvalConfig::default()).unwrap();
        assert!((pr.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(pr.recall, 1.0);
    }

    #[test]
    fn mot_perfect_tracker() {
        let mut truth = Vec::new();
        let mut tracks = Vec::new();
        for f in 0..10 {
            truth.push(gt(f, 1, f as f64 * 3.0, 0.0));
            tracks.push(tr(f, 7, f as f64 * 3.0, 0.0));
        }
        let r = evaluate_mot(&truth, &tracks, &EvalConfig::default()).unwrap();
        assert_eq!(r.mota, 1.0);
        assert_eq!(r.motp, 1.0);
        assert_eq!(r.tallies.mismatches, 0);
    }

    #[test]
    fn mot_empty_tracker_all_misses() {
        let truth: Vec<_> = (0..10).map(|f| gt(f, 1, 0.0, 0.0)).collect();
        let r = evaluate_mot(&truth, &[], &EvalConfig::default()).unwrap();
        assert_eq!(r.mota, 0.0);
        assert!(r.motp.is_nan());
        assert!(r.zero_matches);
        assert_eq!(r.tallies.misses, 10);
    }

    #[test]
    fn mot_single_id_swap_fixture() {
        // one object over 10 frames, perfect boxes, track id changes at
        // frame 6: one mismatch, MOTA 0.9, MOTP(iou) 1.0
        let mut truth = Vec::new();
        let mut tracks = Vec::new();
        for f in 0..10u64 {
            truth.push(gt(f, 1, f as f64 * 3.0, 0.0));
            let id = if f < 6 { 1 } else { 2 };
            tracks.push(tr(f, id, f as f64 * 3.0, 0.0));
        }
        let r = evaluate_mot(&truth, &tracks, &EvalConfig::default()).unwrap();
        assert_eq!(r.tallies.mismatches, 1);
        assert!((r.mota - 0.9).abs() < 1e-9);
        assert!((r.motp - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mota_can_go_negative_with_fp_spam() {
        let truth: Vec<_> = (0..5).map(|f| gt(f, 1, 0.0, 0.0)).collect();
        let mut tracks = Vec::new();
        for f in 0..5u64 {
            tracks.push(tr(f, 1, 0.0, 0.0));
            // spam far-away hypotheses
            for k in 0..4u64 {
                tracks.push(tr(f, 100 + k, 200.0 + 50.0 * k as f64, 200.0));
            }
        }
        let r = evaluate_mot(&truth, &tracks, &EvalConfig::default()).unwrap();
        assert!(r.mota < 0.0);
        assert!(r.mota <= 1.0);
    }

    #[test]
    fn motp_iou_bounded_below_by_threshold() {
        let truth = vec![gt(0, 1, 0.0, 0.0), gt(1, 1, 0.0, 0.0)];
        let tracks = vec![tr(0, 5, 2.0, 0.0), tr(1, 5, 1.0, 0.0)];
        let cfg = EvalConfig::default();
        let r = evaluate_mot(&truth, &tracks, &cfg).unwrap();
        assert!(r.motp >= cfg.match_threshold_iou && r.motp <= 1.0);
    }

    #[test]
    fn persistent_pair_never_charged_mismatch() {
        // pair survives threshold every frame despite another track nearby
        let mut truth = Vec::new();
        let mut tracks = Vec::new();
        for f in 0..20u64 {
            truth.push(gt(f, 1, f as f64, 0.0));
            tracks.push(tr(f, 3, f as f64 + 1.0, 0.0));
            tracks.push(tr(f, 4, f as f64 + 3.0, 0.0));
        }
        let r = evaluate_mot(&truth, &tracks, &EvalConfig::default()).unwrap();
        assert_eq!(r.tallies.mismatches, 0);
    }

    #[test]
    fn correspondence_survives_gap_without_mismatch() {
        // track vanishes for two frames then returns with the same id
        let mut truth = Vec::new();
        let mut tracks = Vec::new();
        for f in 0..10u64 {
            truth.push(gt(f, 1, 0.0, 0.0));
            if !(4..6).contains(&f) {
                tracks.push(tr(f, 9, 0.0, 0.0));
            }
        }
        let r = evaluate_mot(&truth, &tracks, &EvalConfig::default()).unwrap();
        assert_eq!(r.tallies.mismatches, 0);
        assert_eq!(r.tallies.misses, 2);
    }

    #[test]
    fn tallies_decompose_across_frame_partition() {
        let mut truth = Vec::new();
        let mut tracks = Vec::new();
        for f in 0..12u64 {
            truth.push(gt(f, 1, f as f64, 0.0));
            truth.push(gt(f, 2, 40.0 + f as f64, 0.0));
            let id = if f < 7 { 10 } else { 11 };
            tracks.push(tr(f, id, f as f64 + 1.0, 0.0));
            if f % 3 != 0 {
                tracks.push(tr(f, 20, 40.0 + f as f64, 1.0));
            }
        }
        let full = evaluate_mot(&truth, &tracks, &EvalConfig::default()).unwrap();

        // same stream fed through one accumulator with a snapshot at the cut
        let cfg = EvalConfig::default();
        let mut acc = MotAccumulator::new(cfg).unwrap();
        let tbf = group_by_frame(&truth, |g: &GroundTruthObject| g.frame);
        let rbf = group_by_frame(&tracks, |t: &TrackRecord| t.frame);
        let empty_gt = Vec::new();
        let empty_tr = Vec::new();
        for f in 0..6u64 {
            acc.observe_frame(
                tbf.get(&f).unwrap_or(&empty_gt),
                rbf.get(&f).unwrap_or(&empty_tr),
            );
        }
        let first_half = acc.tallies.clone();
        for f in 6..12u64 {
            acc.observe_frame(
                tbf.get(&f).unwrap_or(&empty_gt),
                rbf.get(&f).unwrap_or(&empty_tr),
            );
        }
        let mut second_half = acc.tallies.clone();
        second_half.matches -= first_half.matches;
        second_half.misses -= first_half.misses;
        second_half.false_positives -= first_half.false_positives;
        second_half.mismatches -= first_half.mismatches;
        second_half.gt_total -= first_half.gt_total;
        second_half.distance_sum -= first_half.distance_sum;

        let mut recombined = first_half.clone();
        recombined.add(&second_half);
        assert_eq!(recombined.matches, full.tallies.matches);
        assert_eq!(recombined.misses, full.tallies.misses);
        assert_eq!(recombined.false_positives, full.tallies.false_positives);
        assert_eq!(recombined.mismatches, full.tallies.mismatches);
        assert_eq!(recombined.gt_total, full.tallies.gt_total);
        assert!((recombined.distance_sum - full.tallies.distance_sum).abs() < 1e-9);
    }

    #[test]
    fn misaligned_frames_error() {
        let truth = vec![gt(0, 1, 0.0, 0.0)];
        let tracks = vec![tr(5, 1, 0.0, 0.0)];
        assert!(evaluate_mot(&truth, &tracks, &EvalConfig::default()).is_err());
    }
}
