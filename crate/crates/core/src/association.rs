//! Greedy detection-to-track assignment with distance and motion-tendency
//! gates, plus track lifecycle management.

use crate::tracker::{update, KalmanConfig, TrackState, TrackStatus, MIN_DIRECTED_SPEED};
use crate::types::{center_distance, Detection};
use crate::{Error, Result};

/// Gating and lifecycle thresholds. The JSON-facing schema (degree-valued
/// angles) lives in [`crate::pipeline::TrackerSettings`].
#[derive(Debug, Clone)]
pub struct AssociationConfig {
    /// Maximum center distance for a candidate pair, pixels.
    pub gate_distance: f64,
    /// Maximum angle between track velocity and the displacement toward a
    /// detection, radians.
    pub tendency_max_angle: f64,
    /// Consecutive hits before a tentative track is confirmed.
    pub t_confirm: u32,
    /// Consecutive misses a track survives.
    pub t_miss: u32,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        AssociationConfig {
            gate_distance: 40.0,
            tendency_max_angle: 90.0_f64.to_radians(),
            t_confirm: 2,
            t_miss: 5,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gate_distance <= 0.0 {
            return Err(Error::Config("gate_distance must be positive".into()));
        }
        if self.t_confirm < 1 || self.t_miss < 1 {
            return Err(Error::Config("t_confirm and t_miss must be >= 1".into()));
        }
        Ok(())
    }
}

/// Assignment produced by [`associate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationResult {
    /// `(track_id, detection index)` pairs.
    pub matches: Vec<(u64, usize)>,
    pub unmatched_tracks: Vec<u64>,
    pub unmatched_detections: Vec<usize>,
}

/// True when a detection lies along the track's motion tendency: the angle
/// between the velocity and the displacement toward the detection center is
/// within the tolerance. Stationary tracks accept any direction.
///
/// The displacement is taken from the track's pre-prediction position
/// (`position - velocity` under the constant-velocity model); measuring from
/// the predicted position itself would reject detections the prediction has
/// slightly overshot, which rejects roughly half of all perfect
/// associations.
pub fn motion_consistent(track: &TrackState, det: &Detection, cfg: &AssociationConfig) -> bool {
    let speed = track.speed();
    if speed < MIN_DIRECTED_SPEED {
        return true;
    }
    let (px, py) = track.position();
    let (vx, vy) = track.velocity();
    let (cx, cy) = det.box_.center();
    let (dx, dy) = (cx - (px - vx), cy - (py - vy));
    let dist = (dx * dx + dy * dy).sqrt();
    if dist == 0.0 {
        return true;
    }
    let cos_angle = (dx * vx + dy * vy) / (dist * speed);
    cos_angle.clamp(-1.0, 1.0).acos() <= cfg.tendency_max_angle
}

/// Greedy nearest-first assignment over gated pairs.
///
/// All pairs passing both gates are sorted by center distance ascending with
/// ties broken by `(track_id, detection index)`; pairs are accepted greedily
/// while both sides are unassigned, so the matching is injective both ways
/// and deterministic.
pub fn associate(
    tracks: &[TrackState],
    detections: &[Detection],
    cfg: &AssociationConfig,
) -> AssociationResult {
    let mut pairs: Vec<(f64, u64, usize)> = Vec::new();
    for track in tracks {
        let tb = track.bounding_box();
        for (di, det) in detections.iter().enumerate() {
            let dist = center_distance(&tb, &det.box_);
            if dist <= cfg.gate_distance && motion_consistent(track, det, cfg) {
                pairs.push((dist, track.track_id, di));
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut matches = Vec::new();
    let mut track_taken: Vec<u64> = Vec::new();
    let mut det_taken = vec![false; detections.len()];
    for (_, tid, di) in pairs {
        if det_taken[di] || track_taken.contains(&tid) {
            continue;
        }
        track_taken.push(tid);
        det_taken[di] = true;
        matches.push((tid, di));
    }
    let unmatched_tracks = tracks
        .iter()
        .map(|t| t.track_id)
        .filter(|id| !track_taken.contains(id))
        .collect();
    let unmatched_detections = (0..detections.len()).filter(|&i| !det_taken[i]).collect();
    AssociationResult {
        matches,
        unmatched_tracks,
        unmatched_detections,
    }
}

/// Applies one frame of lifecycle transitions.
///
/// Matched tracks receive a Kalman update with the detection center, adopt
/// the detection's box size and score a consecutive hit; unmatched tracks
/// accrue a miss and die past `t_miss`; each unmatched detection births a
/// tentative track with zero velocity; tentative tracks with enough
/// consecutive hits become confirmed. Track ids are never reused.
pub fn step_lifecycle(
    tracks: &mut Vec<TrackState>,
    assoc: &AssociationResult,
    detections: &[Detection],
    kcfg: &KalmanConfig,
    cfg: &AssociationConfig,
    next_id: &mut u64,
) -> Result<()> {
    for &(tid, di) in &assoc.matches {
        let det = &detections[di];
        let track = tracks
            .iter_mut()
            .find(|t| t.track_id == tid)
            .expect("matched track exists");
        let mut updated = update(track, det.box_.center(), kcfg)?;
        updated.box_size = (det.box_.w, det.box_.h);
        updated.hits = track.hits + 1;
        updated.misses = 0;
        if updated.status == TrackStatus::Tentative && updated.hits >= cfg.t_confirm {
            updated.status = TrackStatus::Confirmed;
        }
        *track = updated;
    }
    for &tid in &assoc.unmatched_tracks {
        let track = tracks
            .iter_mut()
            .find(|t| t.track_id == tid)
            .expect("unmatched track exists");
        track.misses += 1;
        track.hits = 0;
        if track.misses > cfg.t_miss {
            track.status = TrackStatus::Dead;
        }
    }
    for &di in &assoc.unmatched_detections {
        let det = &detections[di];
        let mut t = TrackState::new(*next_id, det.box_.center(), (det.box_.w, det.box_.h), kcfg);
        *next_id += 1;
        if cfg.t_confirm <= 1 {
            t.status = TrackStatus::Confirmed;
        }
        tracks.push(t);
    }
    tracks.retain(|t| t.is_alive());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BoundingBox;
    use nalgebra::Vector4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn det(cx: f64, cy: f64) -> Detection {
        Detection {
            frame: 0,
            box_: BoundingBox::centered(cx, cy, 8.0, 8.0),
            score: 1.0,
        }
    }

    fn track_at(id: u64, pos: (f64, f64), vel: (f64, f64)) -> TrackState {
        let kcfg = KalmanConfig::default();
        let mut t = TrackState::new(id, pos, (8.0, 8.0), &kcfg);
        t.theta = Vector4::new(pos.0, pos.1, vel.0, vel.1);
        t
    }

    #[test]
    fn motion_gate_examples() {
        let cfg = AssociationConfig::default(); // 90 degrees
        let moving = track_at(1, (0.0, 0.0), (3.0, 0.0));
        assert!(motion_consistent(&moving, &det(10.0, 0.0), &cfg));
        assert!(!motion_consistent(&moving, &det(-10.0, 0.0), &cfg));
        let stationary = track_at(2, (0.0, 0.0), (0.0, 0.0));
        assert!(motion_consistent(&stationary, &det(-10.0, 0.0), &cfg));
    }

    #[test]
    fn associate_no_tracks_leaves_detections_unmatched() {
        let out = associate(&[], &[det(0.0, 0.0), det(5.0, 5.0)], &AssociationConfig::default());
        assert!(out.matches.is_empty());
        assert_eq!(out.unmatched_detections, vec![0, 1]);
    }

    #[test]
    fn associate_picks_nearest() {
        let tracks = vec![track_at(1, (0.0, 0.0), (0.0, 0.0))];
        let dets = vec![det(7.0, 0.0), det(3.0, 0.0)];
        let out = associate(&tracks, &dets, &AssociationConfig::default());
        assert_eq!(out.matches, vec![(1, 1)]);
        assert_eq!(out.unmatched_detections, vec![0]);
    }

    /// Straightforward reimplementation used as the greedy oracle.
    fn greedy_oracle(
        tracks: &[TrackState],
        dets: &[Detection],
        cfg: &AssociationConfig,
    ) -> Vec<(u64, usize)> {
        let mut pairs = Vec::new();
        for t in tracks {
            for (i, d) in dets.iter().enumerate() {
                let dist = center_distance(&t.bounding_box(), &d.box_);
                if dist <= cfg.gate_distance && motion_consistent(t, d, cfg) {
                    pairs.push((dist, t.track_id, i));
                }
            }
        }
        pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut used_t = std::collections::HashSet::new();
        let mut used_d = std::collections::HashSet::new();
        let mut out = Vec::new();
        for (_, tid, di) in pairs {
            if !used_t.contains(&tid) && !used_d.contains(&di) {
                used_t.insert(tid);
                used_d.insert(di);
                out.push((tid, di));
            }
        }
        out
    }

    #[test]
    fn associate_matches_reimplementation_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = AssociationConfig::default();
        for _ in 0..100 {
            let tracks: Vec<TrackState> = (0..3)
                .map(|i| {
                    track_at(
                        i + 1,
                        (rng.gen_range(0.0..60.0), rng.gen_range(0.0..60.0)),
                        (0.0, 0.0),
                    )
                })
                .collect();
            let dets: Vec<Detection> = (0..3)
                .map(|_| det(rng.gen_range(0.0..60.0), rng.gen_range(0.0..60.0)))
                .collect();
            let got = associate(&tracks, &dets, &cfg);
            let want = greedy_oracle(&tracks, &dets, &cfg);
            assert_eq!(got.matches, want);

            // injectivity both ways
            let t_ids: std::collections::HashSet<_> =
                got.matches.iter().map(|&(t, _)| t).collect();
            let d_ids: std::collections::HashSet<_> =
                got.matches.iter().map(|&(_, d)| d).collect();
            assert_eq!(t_ids.len(), got.matches.len());
            assert_eq!(d_ids.len(), got.matches.len());

            // determinism
            let again = associate(&tracks, &dets, &cfg);
            assert_eq!(got, again);

            // every emitted match satisfies both gates
            for &(tid, di) in &got.matches {
                let t = tracks.iter().find(|t| t.track_id == tid).unwrap();
                assert!(
                    center_distance(&t.bounding_box(), &dets[di].box_) <= cfg.gate_distance
                );
                assert!(motion_consistent(t, &dets[di], &cfg));
            }
        }
    }

    #[test]
    fn greedy_total_distance_is_at_least_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = AssociationConfig {
            gate_distance: 1000.0,
            ..AssociationConfig::default()
        };
        for _ in 0..50 {
            let tracks: Vec<TrackState> = (0..3)
                .map(|i| {
                    track_at(
                        i + 1,
                        (rng.gen_range(0.0..60.0), rng.gen_range(0.0..60.0)),
                        (0.0, 0.0),
                    )
                })
                .collect();
            let dets: Vec<Detection> = (0..3)
                .map(|_| det(rng.gen_range(0.0..60.0), rng.gen_range(0.0..60.0)))
                .collect();
            let got = associate(&tracks, &dets, &cfg);
            let greedy_total: f64 = got
                .matches
                .iter()
                .map(|&(tid, di)| {
                    let t = tracks.iter().find(|t| t.track_id == tid).unwrap();
                    center_distance(&t.bounding_box(), &dets[di].box_)
                })
                .sum();

            // brute force over all 3! complete assignments
            let mut optimal = f64::INFINITY;
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            for p in perms {
                let total: f64 = (0..3)
                    .map(|i| center_distance(&tracks[i].bounding_box(), &dets[p[i]].box_))
                    .sum();
                optimal = optimal.min(total);
            }
            assert!(greedy_total >= optimal - 1e-9);
        }
    }

    #[test]
    fn lifecycle_confirmation_delay_and_death() {
        let kcfg = KalmanConfig::default();
        let cfg = AssociationConfig::default(); // t_confirm = 2, t_miss = 5
        let mut tracks = Vec::new();
        let mut next_id = 1;

        // frame 0: fresh detection births a tentative track
        let d0 = vec![det(10.0, 10.0)];
        let assoc = associate(&tracks, &d0, &cfg);
        step_lifecycle(&mut tracks, &assoc, &d0, &kcfg, &cfg, &mut next_id).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].status, TrackStatus::Tentative);

        // frame 1: second consecutive hit confirms
        let d1 = vec![det(10.5, 10.0)];
        let assoc = associate(&tracks, &d1, &cfg);
        assert_eq!(assoc.matches.len(), 1);
        step_lifecycle(&mut tracks, &assoc, &d1, &kcfg, &cfg, &mut next_id).unwrap();
        assert_eq!(tracks[0].status, TrackStatus::Confirmed);

        // misses accumulate; the track dies past t_miss
        for _ in 0..cfg.t_miss {
            let assoc = associate(&tracks, &[], &cfg);
            step_lifecycle(&mut tracks, &assoc, &[], &kcfg, &cfg, &mut next_id).unwrap();
            assert_eq!(tracks.len(), 1);
        }
        let assoc = associate(&tracks, &[], &cfg);
        step_lifecycle(&mut tracks, &assoc, &[], &kcfg, &cfg, &mut next_id).unwrap();
        assert!(tracks.is_empty());
    }

    #[test]
    fn track_ids_never_reused() {
        let kcfg = KalmanConfig::default();
        let cfg = AssociationConfig {
            gate_distance: 1.0, // force every detection to be a new birth
            t_miss: 1,
            ..AssociationConfig::default()
        };
        let mut tracks = Vec::new();
        let mut next_id = 1;
        let mut seen = std::collections::HashSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let dets: Vec<Detection> = (0..3)
                .map(|_| det(rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0)))
                .collect();
            let assoc = associate(&tracks, &dets, &cfg);
            step_lifecycle(&mut tracks, &assoc, &dets, &kcfg, &cfg, &mut next_id).unwrap();
            for t in &tracks {
                seen.insert(t.track_id);
            }
        }
        // every id issued exactly once: the counter is strictly monotone
        assert_eq!(seen.len() as u64, next_id - 1);
    }
}
