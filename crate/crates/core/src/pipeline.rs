//! Frame-by-frame tracking loop: force computation, constrained prediction,
//! association and lifecycle, emitting confirmed track records.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::association::{associate, step_lifecycle, AssociationConfig};
use crate::tracker::{
    predict, traffic_force, AgentPrediction, GbmConfig, KalmanConfig, TrackState, TrackStatus,
    MIN_DIRECTED_SPEED,
};
use crate::types::{BoundingBox, Detection, TrackRecord};
use crate::Result;

/// JSON-facing tracker settings (angles in degrees).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerSettings {
    pub sigma_d: f64,
    pub sigma_w: f64,
    pub kappa: f64,
    pub lambda_min: f64,
    pub heading_tolerance_deg: f64,
    pub front_only: bool,
    pub q_scale: f64,
    pub r_scale: f64,
    pub gate_distance: f64,
    pub tendency_max_angle_deg: f64,
    pub t_confirm: u32,
    pub t_miss: u32,
}

impl Default for TrackerSettings {
    fn default() -> Self {
        let g = GbmConfig::default();
        let a = AssociationConfig::default();
        TrackerSettings {
            sigma_d: g.sigma_d,
            sigma_w: g.sigma_w,
            kappa: g.kappa,
            lambda_min: g.lambda_min,
            heading_tolerance_deg: g.heading_tolerance.to_degrees(),
            front_only: g.front_only,
            q_scale: 0.05,
            r_scale: 2.0,
            gate_distance: a.gate_distance,
            tendency_max_angle_deg: a.tendency_max_angle.to_degrees(),
            t_confirm: a.t_confirm,
            t_miss: a.t_miss,
        }
    }
}

impl TrackerSettings {
    pub fn to_configs(&self) -> Result<(GbmConfig, KalmanConfig, AssociationConfig)> {
        let gbm = GbmConfig {
            sigma_d: self.sigma_d,
            sigma_w: self.sigma_w,
            kappa: self.kappa,
            lambda_min: self.lambda_min,
            heading_tolerance: self.heading_tolerance_deg.to_radians(),
            front_only: self.front_only,
        };
        gbm.validate()?;
        let assoc = AssociationConfig {
            gate_distance: self.gate_distance,
            tendency_max_angle: self.tendency_max_angle_deg.to_radians(),
            t_confirm: self.t_confirm,
            t_miss: self.t_miss,
        };
        assoc.validate()?;
        Ok((gbm, KalmanConfig::new(self.q_scale, self.r_scale), assoc))
    }
}

/// Stateful multi-vehicle tracker advanced one frame at a time.
pub struct TrackingPipeline {
    pub tracks: Vec<TrackState>,
    next_id: u64,
    prev_predictions: HashMap<u64, (f64, f64)>,
    kcfg: KalmanConfig,
    gcfg: GbmConfig,
    acfg: AssociationConfig,
    use_gbm: bool,
}

impl TrackingPipeline {
    pub fn new(kcfg: KalmanConfig, gcfg: GbmConfig, acfg: AssociationConfig, use_gbm: bool) -> Self {
        TrackingPipeline {
            tracks: Vec::new(),
            next_id: 1,
            prev_predictions: HashMap::new(),
            kcfg,
            gcfg,
            acfg,
            use_gbm,
        }
    }

    pub fn from_settings(settings: &TrackerSettings, use_gbm: bool) -> Result<Self> {
        let (gcfg, kcfg, acfg) = settings.to_configs()?;
        Ok(TrackingPipeline::new(kcfg, gcfg, acfg, use_gbm))
    }

    /// Advances one frame: predicts every track under the traffic-force
    /// constraint, associates the detections, applies lifecycle transitions
    /// and returns records for confirmed tracks matched on this frame.
    pub fn step(&mut self, frame: u64, detections: &[Detection]) -> Result<Vec<TrackRecord>> {
        // plain (undamped) predictions drive the force terms
        let predictions: Vec<AgentPrediction> = self
            .tracks
            .iter()
            .map(|t| {
                let p = self.kcfg.transition * t.theta + self.kcfg.control * self.kcfg.control_input;
                let speed = (p[2] * p[2] + p[3] * p[3]).sqrt();
                AgentPrediction {
                    position: (p[0], p[1]),
                    velocity: (p[2], p[3]),
                    heading: (speed >= MIN_DIRECTED_SPEED).then(|| p[3].atan2(p[2])),
                }
            })
            .collect();
        let prev: Vec<(f64, f64)> = self
            .tracks
            .iter()
            .zip(&predictions)
            .map(|(t, p)| *self.prev_predictions.get(&t.track_id).unwrap_or(&p.position))
            .collect();

        for i in 0..self.tracks.len() {
            let tf = if self.use_gbm {
                traffic_force(i, &predictions, &prev, &self.gcfg)
            } else {
                0.0
            };
            let mut advanced = predict(&self.tracks[i], tf, &self.kcfg, &self.gcfg);
            advanced.age = self.tracks[i].age + 1;
            self.tracks[i] = advanced;
        }
        self.prev_predictions = self
            .tracks
            .iter()
            .zip(&predictions)
            .map(|(t, p)| (t.track_id, p.position))
            .collect();

        let assoc = associate(&self.tracks, detections, &self.acfg);
        step_lifecycle(
            &mut self.tracks,
            &assoc,
            detections,
            &self.kcfg,
            &self.acfg,
            &mut self.next_id,
        )?;

        // every confirmed, still-alive track reports a box each frame:
        // the corrected box when matched, the predicted box while coasting
        let mut records: Vec<TrackRecord> = self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed)
            .map(|t| TrackRecord {
                frame,
                track_id: t.track_id,
                box_: t.bounding_box(),
            })
            .collect();
        records.sort_by_key(|r| r.track_id);
        Ok(records)
    }

    /// Runs a whole per-frame detection stream (frames keyed by index).
    pub fn run(
        &mut self,
        frames: impl IntoIterator<Item = (u64, Vec<Detection>)>,
    ) -> Result<Vec<TrackRecord>> {
        let mut out = Vec::new();
        for (frame, dets) in frames {
            out.extend(self.step(frame, &dets)?);
        }
        Ok(out)
    }
}

/// Groups a flat detection list into consecutive per-frame buckets covering
/// `0..=max_frame` (empty frames included).
pub fn group_detections_by_frame(detections: &[Detection], max_frame: u64) -> Vec<(u64, Vec<Detection>)> {
    let mut frames: Vec<(u64, Vec<Detection>)> =
        (0..=max_frame).map(|f| (f, Vec::new())).collect();
    for d in detections {
        if d.frame <= max_frame {
            frames[d.frame as usize].1.push(*d);
        }
    }
    frames
}

/// The last frame index mentioned by either stream, if any.
pub fn max_frame_of(detections: &[Detection], extra: Option<u64>) -> Option<u64> {
    let from_dets = detections.iter().map(|d| d.frame).max();
    match (from_dets, extra) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

/// Convenience: box of a confirmed track record centered on the posterior.
pub fn record_box(center: (f64, f64), size: (f64, f64)) -> BoundingBox {
    BoundingBox::centered(center.0, center.1, size.0, size.1)
}
