//! Kalman state estimation constrained by a traffic force.
//!
//! Each track carries a constant-velocity state `(px, py, vx, vy)`. Before
//! the prediction step, a traffic force is accumulated from same-direction
//! neighbours: a Gaussian repulsion in the current predicted distance,
//! weighted by a Gaussian influence in the previous predicted distance. The
//! force damps the predicted velocity, so a vehicle closing in on its group
//! decelerates instead of extrapolating into it. With zero force the
//! prediction is the plain Kalman prediction.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x1, Vector1, Vector2, Vector4};

use crate::{Error, Result};

/// Tracks slower than this (pixels/frame) are direction-neutral: heading is
/// undefined at rest, so they neither exert nor receive traffic force.
pub const MIN_DIRECTED_SPEED: f64 = 0.5;

/// Track lifecycle phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

/// Per-vehicle Kalman state with lifecycle bookkeeping.
#[derive(Debug, Clone)]
pub struct TrackState {
    /// `(px, py, vx, vy)` in pixels and pixels/frame.
    pub theta: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    pub track_id: u64,
    /// Frames since birth.
    pub age: u64,
    /// Consecutive unassociated frames.
    pub misses: u32,
    /// Consecutive associated frames.
    pub hits: u32,
    pub status: TrackStatus,
    /// Box extent carried alongside the point state, pixels.
    pub box_size: (f64, f64),
}

impl TrackState {
    pub fn new(track_id: u64, position: (f64, f64), box_size: (f64, f64), kcfg: &KalmanConfig) -> Self {
        TrackState {
            theta: Vector4::new(position.0, position.1, 0.0, 0.0),
            covariance: kcfg.initial_covariance,
            track_id,
            age: 0,
            misses: 0,
            hits: 1,
            status: TrackStatus::Tentative,
            box_size,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.theta[0], self.theta[1])
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.theta[2], self.theta[3])
    }

    pub fn speed(&self) -> f64 {
        (self.theta[2].powi(2) + self.theta[3].powi(2)).sqrt()
    }

    /// Velocity direction, radians; `None` below the directed-speed floor.
    pub fn heading(&self) -> Option<f64> {
        if self.speed() < MIN_DIRECTED_SPEED {
            None
        } else {
            Some(self.theta[3].atan2(self.theta[2]))
        }
    }

    pub fn bounding_box(&self) -> crate::types::BoundingBox {
        crate::types::BoundingBox::centered(self.theta[0], self.theta[1], self.box_size.0, self.box_size.1)
    }

    pub fn is_alive(&self) -> bool {
        self.status != TrackStatus::Dead
    }
}

/// Traffic-force parameters. The JSON-facing schema (degree-valued angles)
/// lives in [`crate::pipeline::TrackerSettings`].
#[derive(Debug, Clone)]
pub struct GbmConfig {
    /// Avoidance distance scale, pixels.
    pub sigma_d: f64,
    /// Influence radius, pixels.
    pub sigma_w: f64,
    /// Force-to-damping gain in `[0, 1]`.
    pub kappa: f64,
    /// Damping floor in `(0, 1]`.
    pub lambda_min: f64,
    /// Maximum heading difference for two vehicles to interact, radians.
    pub heading_tolerance: f64,
    /// Restrict interaction to neighbours ahead of the target.
    pub front_only: bool,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            sigma_d: 8.0,
            sigma_w: 8.0,
            kappa: 0.3,
            lambda_min: 0.2,
            heading_tolerance: 45.0_f64.to_radians(),
            front_only: true,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_d <= 0.0 || self.sigma_w <= 0.0 {
            return Err(Error::Config("sigma_d and sigma_w must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::Config("kappa must be in [0, 1]".into()));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min <= 1.0) {
            return Err(Error::Config("lambda_min must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Process/observation model. The default transition is constant velocity
/// (position advances by velocity each frame) and the observation is the
/// position with isotropic Gaussian noise.
#[derive(Debug, Clone)]
pub struct KalmanConfig {
    pub transition: Matrix4<f64>,
    pub control: Matrix4x1<f64>,
    pub control_input: Vector1<f64>,
    pub process_noise: Matrix4<f64>,
    pub observation: Matrix2x4<f64>,
    pub observation_noise: Matrix2<f64>,
    pub initial_covariance: Matrix4<f64>,
}

impl KalmanConfig {
    /// Constant-velocity model with isotropic noise scales.
    pub fn new(q_scale: f64, r_scale: f64) -> Self {
        let transition = Matrix4::new(
            1.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        );
        let observation = Matrix2x4::new(
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0,
        );
        KalmanConfig {
            transition,
            control: Matrix4x1::zeros(),
            control_input: Vector1::zeros(),
            process_noise: Matrix4::identity() * q_scale,
            observation,
            observation_noise: Matrix2::identity() * r_scale,
            initial_covariance: Matrix4::from_diagonal(&Vector4::new(
                2.0 * r_scale,
                2.0 * r_scale,
                10.0,
                10.0,
            )),
        }
    }
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig::new(0.05, 2.0)
    }
}

/// Gaussian repulsion between two vehicles at predicted distance `d`:
/// `exp(-d^2 / (2 sigma_d^2))`, in `(0, 1]` and strictly decreasing in `d`.
pub fn pairwise_force(d: f64, sigma_d: f64) -> f64 {
    debug_assert!(sigma_d > 0.0 && d >= 0.0);
    (-(d * d) / (2.0 * sigma_d * sigma_d)).exp()
}

/// Influence weight from the previous predicted distance:
/// `exp(-prev_dist^2 / (2 sigma_w^2))`.
pub fn influence_weight(prev_dist: f64, sigma_w: f64) -> f64 {
    debug_assert!(sigma_w > 0.0);
    (-(prev_dist * prev_dist) / (2.0 * sigma_w * sigma_w)).exp()
}

/// Predicted kinematics of one agent when forces are evaluated.
#[derive(Debug, Clone, Copy)]
pub struct AgentPrediction {
    pub position: (f64, f64),
    pub velocity: (f64, f64),
    /// Heading, radians; `None` for direction-neutral (slow) agents.
    pub heading: Option<f64>,
}

impl AgentPrediction {
    pub fn speed(&self) -> f64 {
        (self.velocity.0.powi(2) + self.velocity.1.powi(2)).sqrt()
    }
}

fn heading_gap(a: f64, b: f64) -> f64 {
    let mut d = (a - b).abs() % (2.0 * std::f64::consts::PI);
    if d > std::f64::consts::PI {
        d = 2.0 * std::f64::consts::PI - d;
    }
    d
}

/// Total traffic force on `target` from its same-direction neighbours.
///
/// A neighbour contributes `influence_weight * pairwise_force` when its
/// heading matches the target's within the tolerance and, if `front_only`,
/// it lies ahead of the target along the target's velocity. Direction-neutral
/// agents neither exert nor receive force. `predictions` and
/// `prev_predictions` are index-aligned.
pub fn traffic_force(
    target: usize,
    predictions: &[AgentPrediction],
    prev_predictions: &[(f64, f64)],
    cfg: &GbmConfig,
) -> f64 {
    debug_assert_eq!(predictions.len(), prev_predictions.len());
    let me = &predictions[target];
    let Some(my_heading) = me.heading else {
        return 0.0;
    };
    let mut total = 0.0;
    for (j, other) in predictions.iter().enumerate() {
        if j == target {
            continue;
        }
        let Some(their_heading) = other.heading else {
            continue;
        };
        if heading_gap(my_heading, their_heading) > cfg.heading_tolerance {
            continue;
        }
        if cfg.front_only {
            let to_other = (
                other.position.0 - me.position.0,
                other.position.1 - me.position.1,
            );
            let along = to_other.0 * me.velocity.0 + to_other.1 * me.velocity.1;
            if along <= 0.0 {
                continue;
            }
        }
        let d = ((me.position.0 - other.position.0).powi(2)
            + (me.position.1 - other.position.1).powi(2))
        .sqrt();
        let prev_d = ((prev_predictions[target].0 - prev_predictions[j].0).powi(2)
            + (prev_predictions[target].1 - prev_predictions[j].1).powi(2))
        .sqrt();
        total += influence_weight(prev_d, cfg.sigma_w) * pairwise_force(d, cfg.sigma_d);
    }
    total
}

/// Damping factor for a given traffic force: `max(1 - kappa * min(tf, 1),
/// lambda_min)`, always in `[lambda_min, 1]`.
pub fn damping_factor(tf: f64, cfg: &GbmConfig) -> f64 {
    (1.0 - cfg.kappa * tf.min(1.0)).max(cfg.lambda_min)
}

/// Prediction step under the traffic-force constraint.
///
/// The state advances through the transition model; the velocity is then
/// scaled by the damping factor and the position pulled back so that it
/// advances by the damped velocity. With `tf = 0` this is exactly the plain
/// Kalman prediction.
pub fn predict(state: &TrackState, tf: f64, kcfg: &KalmanConfig, gcfg: &GbmConfig) -> TrackState {
    debug_assert!(tf >= 0.0);
    debug_assert!(state.is_alive());
    let lambda = damping_factor(tf, gcfg);
    let predicted = kcfg.transition * state.theta + kcfg.control * kcfg.control_input;
    let theta = Vector4::new(
        predicted[0] - (1.0 - lambda) * predicted[2],
        predicted[1] - (1.0 - lambda) * predicted[3],
        lambda * predicted[2],
        lambda * predicted[3],
    );
    let damp = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, lambda, lambda));
    let a = damp * kcfg.transition;
    let covariance = a * state.covariance * a.transpose() + kcfg.process_noise;
    TrackState {
        theta,
        covariance,
        ..*state
    }
}

/// Standard Kalman measurement update with a position observation.
pub fn update(state: &TrackState, measurement: (f64, f64), kcfg: &KalmanConfig) -> Result<TrackState> {
    if !measurement.0.is_finite() || !measurement.1.is_finite() {
        return Err(Error::InvalidInput("non-finite measurement".into()));
    }
    let z = Vector2::new(measurement.0, measurement.1);
    let h = kcfg.observation;
    let innovation = z - h * state.theta;
    let s = h * state.covariance * h.transpose() + kcfg.observation_noise;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("singular innovation covariance".into()))?;
    let gain = state.covariance * h.transpose() * s_inv;
    let theta = state.theta + gain * innovation;
    // Joseph form keeps the posterior symmetric PSD
    let ikh = Matrix4::identity() - gain * h;
    let covariance =
        ikh * state.covariance * ikh.transpose() + gain * kcfg.observation_noise * gain.transpose();
    let covariance = (covariance + covariance.transpose()) * 0.5;
    Ok(TrackState {
        theta,
        covariance,
        ..*state
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn agent(pos: (f64, f64), vel: (f64, f64)) -> AgentPrediction {
        let speed = (vel.0 * vel.0 + vel.1 * vel.1).sqrt();
        AgentPrediction {
            position: pos,
            velocity: vel,
            heading: (speed >= MIN_DIRECTED_SPEED).then(|| vel.1.atan2(vel.0)),
        }
    }

    #[test]
    fn pairwise_force_closed_forms() {
        assert_eq!(pairwise_force(0.0, 8.0), 1.0);
        assert_relative_eq!(pairwise_force(8.0, 8.0), (-0.5f64).exp(), epsilon = 1e-15);
        assert!(pairwise_force(80.0, 8.0) < 1e-20);
    }

    #[test]
    fn influence_weight_closed_forms() {
        assert_eq!(influence_weight(0.0, 8.0), 1.0);
        assert_relative_eq!(influence_weight(8.0, 8.0), (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(influence_weight(24.0, 8.0), (-4.5f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn forces_strictly_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let sigma = rng.gen_range(0.5..20.0);
            // stay clear of exp underflow so strictness is observable
            let a: f64 = rng.gen_range(0.0..10.0 * sigma);
            let b = (a + rng.gen_range(0.01..2.0 * sigma)).min(30.0 * sigma);
            assert!(pairwise_force(b, sigma) < pairwise_force(a, sigma));
            assert!(influence_weight(b, sigma) < influence_weight(a, sigma));
        }
    }

    #[test]
    fn traffic_force_single_vehicle_is_zero() {
        let preds = vec![agent((0.0, 0.0), (2.0, 0.0))];
        let prev = vec![(0.0, 0.0)];
        assert_eq!(traffic_force(0, &preds, &prev, &GbmConfig::default()), 0.0);
    }

    #[test]
    fn traffic_force_two_vehicle_closed_form() {
        let cfg = GbmConfig::default(); // sigma_d = sigma_w = 8
        let preds = vec![
            agent((0.0, 0.0), (2.0, 0.0)),
            agent((8.0, 0.0), (2.0, 0.0)), // ahead, same heading, d = sigma_d
        ];
        let prev = vec![(0.0, 0.0), (8.0, 0.0)]; // prev dist = sigma_w
        let tf = traffic_force(0, &preds, &prev, &cfg);
        assert_relative_eq!(tf, (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn traffic_force_opposite_headings_excluded() {
        let cfg = GbmConfig::default();
        let preds = vec![
            agent((0.0, 0.0), (2.0, 0.0)),
            agent((4.0, 0.0), (-2.0, 0.0)),
        ];
        let prev = vec![(0.0, 0.0), (4.0, 0.0)];
        assert_eq!(traffic_force(0, &preds, &prev, &cfg), 0.0);
        assert_eq!(traffic_force(1, &preds, &prev, &cfg), 0.0);
    }

    #[test]
    fn traffic_force_front_gate() {
        let cfg = GbmConfig::default();
        let preds = vec![
            agent((10.0, 0.0), (2.0, 0.0)),
            agent((0.0, 0.0), (2.0, 0.0)), // behind target 0
        ];
        let prev = vec![(10.0, 0.0), (0.0, 0.0)];
        assert_eq!(traffic_force(0, &preds, &prev, &cfg), 0.0);
        assert!(traffic_force(1, &preds, &prev, &cfg) > 0.0);
    }

    #[test]
    fn traffic_force_neutral_agents_excluded() {
        let cfg = GbmConfig::default();
        let preds = vec![
            agent((0.0, 0.0), (2.0, 0.0)),
            agent((4.0, 0.0), (0.1, 0.0)), // below the directed-speed floor
        ];
        let prev = vec![(0.0, 0.0), (4.0, 0.0)];
        assert_eq!(traffic_force(0, &preds, &prev, &cfg), 0.0);
        assert_eq!(traffic_force(1, &preds, &prev, &cfg), 0.0);
    }

    #[test]
    fn predict_without_force_is_plain_kalman() {
        let kcfg = KalmanConfig::default();
        let gcfg = GbmConfig::default();
        let mut state = TrackState::new(1, (0.0, 0.0), (10.0, 6.0), &kcfg);
        state.theta = Vector4::new(0.0, 0.0, 5.0, 0.0);
        let out = predict(&state, 0.0, &kcfg, &gcfg);
        assert_eq!(out.theta, Vector4::new(5.0, 0.0, 5.0, 0.0));
    }

    #[test]
    fn predict_damps_velocity_and_position_advance() {
        let kcfg = KalmanConfig::default();
        let gcfg = GbmConfig {
            kappa: 0.5,
            lambda_min: 0.1,
            ..GbmConfig::default()
        };
        let mut state = TrackState::new(1, (0.0, 0.0), (10.0, 6.0), &kcfg);
        state.theta = Vector4::new(0.0, 0.0, 4.0, 0.0);
        let out = predict(&state, 1.0, &kcfg, &gcfg);
        assert_relative_eq!(out.theta[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(out.theta[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn damping_clamps_on_pathological_force() {
        let gcfg = GbmConfig {
            kappa: 0.5,
            lambda_min: 0.1,
            ..GbmConfig::default()
        };
        // tf saturates at 1 inside the damping rule
        assert_relative_eq!(damping_factor(100.0, &gcfg), 0.5, epsilon = 1e-15);
        let tight = GbmConfig {
            kappa: 1.0,
            lambda_min: 0.1,
            ..GbmConfig::default()
        };
        assert_relative_eq!(damping_factor(100.0, &tight), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn damping_properties_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kcfg = KalmanConfig::default();
        for _ in 0..300 {
            let gcfg = GbmConfig {
                kappa: rng.gen_range(0.0..1.0),
                lambda_min: rng.gen_range(0.05..1.0),
                ..GbmConfig::default()
            };
            let tf = rng.gen_range(0.0..5.0);
            let lambda = damping_factor(tf, &gcfg);
            assert!(lambda >= gcfg.lambda_min - 1e-15 && lambda <= 1.0 + 1e-15);

            let mut state = TrackState::new(1, (0.0, 0.0), (8.0, 4.0), &kcfg);
            state.theta = Vector4::new(
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-6.0..6.0),
                rng.gen_range(-6.0..6.0),
            );
            let plain = predict(&state, 0.0, &kcfg, &gcfg);
            let damped = predict(&state, tf, &kcfg, &gcfg);
            // damped speed never exceeds undamped; direction unchanged
            assert!(damped.speed() <= plain.speed() + 1e-12);
            let cross = damped.theta[2] * plain.theta[3] - damped.theta[3] * plain.theta[2];
            assert!(cross.abs() < 1e-9);
            assert!(damped.theta[2] * plain.theta[2] >= -1e-12);
            assert!(damped.theta[3] * plain.theta[3] >= -1e-12);
        }
    }

    #[test]
    fn update_limits() {
        let gcfg = GbmConfig::default();
        let _ = gcfg;
        let mut kcfg = KalmanConfig::default();
        let mut state = TrackState::new(1, (0.0, 0.0), (8.0, 4.0), &kcfg);
        state.theta = Vector4::new(10.0, 10.0, 1.0, 0.0);

        // uninformative measurement: posterior ~ prior
        kcfg.observation_noise = Matrix2::identity() * 1e12;
        let out = update(&state, (50.0, 50.0), &kcfg).unwrap();
        assert_relative_eq!(out.theta[0], 10.0, epsilon = 1e-6);

        // exact measurement: posterior position ~ measurement
        kcfg.observation_noise = Matrix2::identity() * 1e-12;
        let out = update(&state, (50.0, 50.0), &kcfg).unwrap();
        assert_relative_eq!(out.theta[0], 50.0, epsilon = 1e-6);
        assert_relative_eq!(out.theta[1], 50.0, epsilon = 1e-6);
    }

    #[test]
    fn update_unit_covariance_halves_innovation() {
        let mut kcfg = KalmanConfig::default();
        kcfg.observation_noise = Matrix2::identity();
        let mut state = TrackState::new(1, (0.0, 0.0), (8.0, 4.0), &kcfg);
        state.theta = Vector4::new(2.0, 4.0, 0.0, 0.0);
        state.covariance = Matrix4::identity();
        let out = update(&state, (6.0, 8.0), &kcfg).unwrap();
        assert_relative_eq!(out.theta[0], 4.0, epsilon = 1e-12);
        assert_relative_eq!(out.theta[1], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn update_rejects_non_finite_and_never_grows_trace() {
        let kcfg = KalmanConfig::default();
        let state = TrackState::new(1, (0.0, 0.0), (8.0, 4.0), &kcfg);
        assert!(update(&state, (f64::NAN, 0.0), &kcfg).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let mut s = state.clone();
            let a = Matrix4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            s.covariance = a * a.transpose() + Matrix4::identity() * 0.01;
            let m = (rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
            let out = update(&s, m, &kcfg).unwrap();
            assert!(out.covariance.trace() <= s.covariance.trace() + 1e-9);
            // posterior stays symmetric PSD
            let eig = out.covariance.symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e > -1e-9));
        }
    }

    #[test]
    fn closing_gap_under_gbm_is_at_least_plain_kalman_gap() {
        let kcfg = KalmanConfig::default();
        let gcfg = GbmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            // trailing vehicle 0 catches up on vehicle 1 along +x
            let gap0 = rng.gen_range(2.0..30.0);
            let v_trail = rng.gen_range(1.0..6.0);
            let v_lead = rng.gen_range(0.5..v_trail);
            let mut trail = TrackState::new(1, (0.0, 0.0), (8.0, 4.0), &kcfg);
            trail.theta = Vector4::new(0.0, 0.0, v_trail, 0.0);
            let mut lead = TrackState::new(2, (gap0, 0.0), (8.0, 4.0), &kcfg);
            lead.theta = Vector4::new(gap0, 0.0, v_lead, 0.0);

            let preds = vec![
                agent((v_trail, 0.0), (v_trail, 0.0)),
                agent((gap0 + v_lead, 0.0), (v_lead, 0.0)),
            ];
            let prev = vec![(0.0, 0.0), (gap0, 0.0)];
            let tf_trail = traffic_force(0, &preds, &prev, &gcfg);
            let tf_lead = traffic_force(1, &preds, &prev, &gcfg);

            let plain_gap = {
                let a = predict(&trail, 0.0, &kcfg, &gcfg);
                let b = predict(&lead, 0.0, &kcfg, &gcfg);
                b.theta[0] - a.theta[0]
            };
            let gbm_gap = {
                let a = predict(&trail, tf_trail, &kcfg, &gcfg);
                let b = predict(&lead, tf_lead, &kcfg, &gcfg);
                b.theta[0] - a.theta[0]
            };
            assert!(
                gbm_gap >= plain_gap - 1e-12,
                "gap {gbm_gap} under damping must not shrink below {plain_gap}"
            );
        }
    }
}
