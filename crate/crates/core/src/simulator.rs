//! Deterministic road-junction scenario generator.
//!
//! Produces ground-truth trajectories (straight lane traversal with a
//! signalized junction and car-following), rendered top-down grayscale
//! frames, and detection streams corrupted by misses, jitter and false
//! positives. Identical `(config, seed)` always yields identical output:
//! all randomness flows from explicitly seeded ChaCha8 generators and every
//! accumulation order is fixed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::grid::ImageGrid;
use crate::types::{iou, round_half_up, BoundingBox, Detection, GroundTruthObject};
use crate::{Error, Result};

/// Detector corruption parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorNoise {
    /// Base probability of dropping a truth box.
    pub miss_rate: f64,
    /// Expected false positives per frame (Poisson).
    pub fp_rate: f64,
    /// Gaussian sigma on box centers, pixels.
    pub center_jitter_sigma: f64,
    /// Gaussian sigma on box width/height, pixels.
    pub size_jitter_sigma: f64,
    /// Extra miss probability when another, camera-nearer truth box
    /// overlaps this one with IoU > 0.3.
    pub occlusion_miss_boost: f64,
}

impl Default for DetectorNoise {
    fn default() -> Self {
        DetectorNoise {
            miss_rate: 0.1,
            fp_rate: 0.5,
            center_jitter_sigma: 1.0,
            size_jitter_sigma: 0.5,
            occlusion_miss_boost: 0.3,
        }
    }
}

/// Side of the image a lane enters from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntrySide {
    N,
    S,
    E,
    W,
}

impl EntrySide {
    /// Travel direction in radians (x right, y down).
    fn default_direction(self) -> f64 {
        match self {
            EntrySide::N => std::f64::consts::FRAC_PI_2, // downward
            EntrySide::S => -std::f64::consts::FRAC_PI_2,
            EntrySide::W => 0.0,
            EntrySide::E => std::f64::consts::PI,
        }
    }

    fn is_vertical(self) -> bool {
        matches!(self, EntrySide::N | EntrySide::S)
    }
}

/// One straight lane through the junction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaneConfig {
    pub entry_side: EntrySide,
    /// Perpendicular offset of the lane centerline from the road axis,
    /// pixels (sign follows the x/y axis).
    pub lane_offset: f64,
    /// Travel direction, radians; defaults to the entry side's axis.
    #[serde(default)]
    pub direction: Option<f64>,
}

/// Fixed-cycle traffic light, one phase offset per road axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LightCycle {
    pub green: u64,
    pub red: u64,
    pub phase_ns: u64,
    pub phase_ew: u64,
}

impl Default for LightCycle {
    fn default() -> Self {
        LightCycle {
            green: 80,
            red: 80,
            phase_ns: 0,
            phase_ew: 80,
        }
    }
}

impl LightCycle {
    fn is_green(&self, frame: u64, vertical_axis: bool) -> bool {
        let cycle = self.green + self.red;
        if cycle == 0 {
            return true;
        }
        let phase = if vertical_axis { self.phase_ns } else { self.phase_ew };
        (frame + phase) % cycle < self.green
    }
}

/// Full scenario description; every field has a sensible default so partial
/// JSON configs stay short.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub frames: u64,
    pub width: usize,
    pub height: usize,
    pub lanes: Vec<LaneConfig>,
    /// Bernoulli spawn probability per lane per frame.
    pub spawn_rate: f64,
    /// `(min, max)` vehicle cruise speed, pixels/frame.
    pub speed_range: (f64, f64),
    /// `(length along travel, width across travel)`, pixels.
    pub vehicle_size: (f64, f64),
    /// Uniform +- jitter applied to both vehicle dimensions at spawn.
    pub vehicle_size_jitter: f64,
    pub light_cycle: LightCycle,
    /// Minimum bumper-to-bumper gap, pixels.
    pub min_headway: f64,
    /// Extra bumper gap per unit speed (constant time-headway policy),
    /// frames; the desired gap is `min_headway + headway_time * speed`.
    pub headway_time: f64,
    /// Stop-line distance from the junction center, pixels.
    pub stop_line: f64,
    /// Maximum acceleration, pixels/frame^2.
    pub accel: f64,
    /// Maximum comfortable braking, pixels/frame^2 (hard position clamps
    /// still guarantee the headway and stop-line invariants).
    pub brake: f64,
    pub detector_noise: DetectorNoise,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            frames: 200,
            width: 320,
            height: 240,
            lanes: vec![
                LaneConfig {
                    entry_side: EntrySide::N,
                    lane_offset: -10.0,
                    direction: None,
                },
                LaneConfig {
                    entry_side: EntrySide::S,
                    lane_offset: 10.0,
                    direction: None,
                },
                LaneConfig {
                    entry_side: EntrySide::W,
                    lane_offset: -10.0,
                    direction: None,
                },
                LaneConfig {
                    entry_side: EntrySide::E,
                    lane_offset: 10.0,
                    direction: None,
                },
            ],
            spawn_rate: 0.04,
            speed_range: (2.0, 4.0),
            vehicle_size: (12.0, 7.0),
            vehicle_size_jitter: 1.0,
            light_cycle: LightCycle::default(),
            min_headway: 4.0,
            headway_time: 2.5,
            stop_line: 24.0,
            accel: 0.3,
            brake: 0.6,
            detector_noise: DetectorNoise::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("frame dimensions must be positive".into()));
        }
        if self.speed_range.0 > self.speed_range.1 || self.speed_range.0 <= 0.0 {
            return Err(Error::Config(format!(
                "speed_range must satisfy 0 < min <= max, got {:?}",
                self.speed_range
            )));
        }
        if !(0.0..=1.0).contains(&self.spawn_rate) {
            return Err(Error::Config("spawn_rate must be in [0, 1]".into()));
        }
        if self.min_headway <= 0.0 {
            return Err(Error::Config("min_headway must be positive".into()));
        }
        if self.accel <= 0.0 || self.brake <= 0.0 {
            return Err(Error::Config("accel and brake must be positive".into()));
        }
        if self.headway_time < 0.0 {
            return Err(Error::Config("headway_time must be nonnegative".into()));
        }
        let n = &self.detector_noise;
        if !(0.0..=1.0).contains(&n.miss_rate)
            || !(0.0..=1.0).contains(&n.occlusion_miss_boost)
            || n.fp_rate < 0.0
            || n.center_jitter_sigma < 0.0
            || n.size_jitter_sigma < 0.0
        {
            return Err(Error::Config("detector_noise values out of range".into()));
        }
        if self.vehicle_size.0 <= 0.0 || self.vehicle_size.1 <= 0.0 {
            return Err(Error::Config("vehicle_size must be positive".into()));
        }
        Ok(())
    }
}

/// Ground truth and corrupted detections for one frame.
#[derive(Debug, Clone)]
pub struct FrameRecord {
    pub frame: u64,
    pub truth: Vec<GroundTruthObject>,
    pub detections: Vec<Detection>,
}

// --- internal vehicle state --------------------------------------------------

#[derive(Debug, Clone)]
struct Vehicle {
    id: u64,
    lane: usize,
    /// Center distance travelled along the lane ray since the entry edge.
    progress: f64,
    /// Progress on the previous frame (for realized velocity).
    prev_progress: f64,
    /// Sampled free-flow target speed.
    cruise: f64,
    /// Current (realized) speed.
    speed: f64,
    length: f64,
    width: f64,
}

#[derive(Debug, Clone)]
struct LaneGeometry {
    /// Point where the lane centerline crosses the entry edge.
    origin: (f64, f64),
    dir: (f64, f64),
    heading: f64,
    /// Progress of the stop line (front bumper limit on red).
    stop_progress: f64,
    /// Progress past which a vehicle has fully traversed the image.
    exit_progress: f64,
}

fn lane_geometry(cfg: &ScenarioConfig, lane: &LaneConfig) -> LaneGeometry {
    let heading = lane
        .direction
        .unwrap_or_else(|| lane.entry_side.default_direction());
    let dir = (heading.cos(), heading.sin());
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let origin = match lane.entry_side {
        EntrySide::N => (w / 2.0 + lane.lane_offset, 0.0),
        EntrySide::S => (w / 2.0 + lane.lane_offset, h),
        EntrySide::W => (0.0, h / 2.0 + lane.lane_offset),
        EntrySide::E => (w, h / 2.0 + lane.lane_offset),
    };
    // distance from the entry edge to the junction center, along the ray
    let to_center = (w / 2.0 - origin.0) * dir.0 + (h / 2.0 - origin.1) * dir.1;
    LaneGeometry {
        origin,
        dir,
        heading,
        stop_progress: to_center - cfg.stop_line,
        exit_progress: 2.0 * to_center,
    }
}

fn vehicle_center(geom: &LaneGeometry, progress: f64) -> (f64, f64) {
    (
        geom.origin.0 + geom.dir.0 * progress,
        geom.origin.1 + geom.dir.1 * progress,
    )
}

fn vehicle_box(geom: &LaneGeometry, v: &Vehicle) -> BoundingBox {
    let (cx, cy) = vehicle_center(geom, v.progress);
    if geom.dir.0.abs() >= geom.dir.1.abs() {
        BoundingBox::centered(cx, cy, v.length, v.width)
    } else {
        BoundingBox::centered(cx, cy, v.width, v.length)
    }
}

fn box_intersects_image(b: &BoundingBox, width: usize, height: usize) -> bool {
    b.x < width as f64 && b.x + b.w > 0.0 && b.y < height as f64 && b.y + b.h > 0.0
}

/// Advances the whole scenario and returns one record per frame.
///
/// Per frame, vehicles move front-to-back within each lane so the headway
/// clamp always sees the leader's settled position; vehicles stop behind the
/// stop line on red unless they have already crossed it; spawns are skipped
/// while the entry area is blocked.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Vec<FrameRecord>> {
    cfg.validate()?;
    let geoms: Vec<LaneGeometry> = cfg.lanes.iter().map(|l| lane_geometry(cfg, l)).collect();
    let mut dynamics_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);

    let mut vehicles: Vec<Vehicle> = Vec::new();
    let mut next_id: u64 = 1;
    let mut records = Vec::with_capacity(cfg.frames as usize);

    for frame in 0..cfg.frames {
        // move vehicles lane by lane, front to back
        for (li, geom) in geoms.iter().enumerate() {
            let green = cfg
                .light_cycle
                .is_green(frame, cfg.lanes[li].entry_side.is_vertical());
            let mut order: Vec<usize> = (0..vehicles.len())
                .filter(|&i| vehicles[i].lane == li)
                .collect();
            order.sort_by(|&a, &b| {
                vehicles[b]
                    .progress
                    .partial_cmp(&vehicles[a].progress)
                    .unwrap()
            });
            let mut leader: Option<usize> = None;
            for &vi in &order {
                let (speed, cruise, length, front) = {
                    let v = &vehicles[vi];
                    (v.speed, v.cruise, v.length, v.progress + v.length / 2.0)
                };
                // comfortable target (speed shaping, speed-dependent gap)
                // and hard wall (the min-headway/stop-line invariant)
                let mut brake_wall = f64::INFINITY;
                let mut hard_wall = f64::INFINITY;
                if !green && front <= geom.stop_progress {
                    brake_wall = geom.stop_progress;
                    hard_wall = geom.stop_progress;
                }
                if let Some(lead) = leader {
                    let lead_rear = vehicles[lead].progress - vehicles[lead].length / 2.0;
                    let desired_gap = cfg.min_headway + cfg.headway_time * speed;
                    brake_wall = brake_wall.min(lead_rear - desired_gap);
                    hard_wall = hard_wall.min(lead_rear - cfg.min_headway);
                }
                // finite acceleration toward cruise, braking curve toward
                // the comfort wall (v^2 <= 2 b d), hard clamp as backstop
                let mut v_next = (speed + cfg.accel).min(cruise);
                if brake_wall.is_finite() {
                    let dist = (brake_wall - front).max(0.0);
                    v_next = v_next.min((2.0 * cfg.brake * dist).sqrt());
                }
                let mut target = vehicles[vi].progress + v_next;
                if hard_wall.is_finite() {
                    target = target.min(hard_wall - length / 2.0);
                }
                let v = &mut vehicles[vi];
                v.prev_progress = v.progress;
                v.progress = target.max(v.progress); // never reverse
                v.speed = v.progress - v.prev_progress;
                leader = Some(vi);
            }
        }

        // despawn vehicles that have fully traversed the image
        for vi in (0..vehicles.len()).rev() {
            let geom = &geoms[vehicles[vi].lane];
            let rear = vehicles[vi].progress - vehicles[vi].length / 2.0;
            if rear > geom.exit_progress {
                vehicles.remove(vi);
            }
        }

        // spawns (config lane order, one Bernoulli draw per lane per frame);
        // new vehicles appear with the front bumper on the entry edge
        for li in 0..geoms.len() {
            if !dynamics_rng.gen_bool(cfg.spawn_rate) {
                continue;
            }
            // block the spawn while the entry area is occupied
            let blocked = vehicles
                .iter()
                .any(|v| v.lane == li && v.progress - v.length / 2.0 < cfg.min_headway);
            if blocked {
                continue;
            }
            let cruise = dynamics_rng.gen_range(cfg.speed_range.0..=cfg.speed_range.1);
            let j = cfg.vehicle_size_jitter;
            let length = (cfg.vehicle_size.0 + dynamics_rng.gen_range(-j..=j)).max(2.0);
            let width = (cfg.vehicle_size.1 + dynamics_rng.gen_range(-j..=j)).max(2.0);
            let progress = -length / 2.0;
            vehicles.push(Vehicle {
                id: next_id,
                lane: li,
                progress,
                prev_progress: progress,
                cruise,
                speed: cruise,
                length,
                width,
            });
            next_id += 1;
        }

        // record truth for vehicles visible in the image
        let mut truth = Vec::new();
        for v in &vehicles {
            let geom = &geoms[v.lane];
            let b = vehicle_box(geom, v);
            if box_intersects_image(&b, cfg.width, cfg.height) {
                let step = v.progress - v.prev_progress;
                truth.push(GroundTruthObject {
                    frame,
                    id: v.id,
                    box_: b,
                    velocity: (step * geom.dir.0, step * geom.dir.1),
                    heading: geom.heading,
                });
            }
        }

        let detections = corrupt_detections(
            &truth,
            &cfg.detector_noise,
            cfg.width,
            cfg.height,
            &mut noise_rng,
        );
        records.push(FrameRecord {
            frame,
            truth,
            detections,
        });
    }
    Ok(records)
}

/// Applies detector noise to one frame of ground truth: dropout (boosted
/// under occlusion by a camera-nearer overlapping box), center and size
/// jitter on survivors, then Poisson false positives with uniform random
/// boxes. True-detection scores are drawn from `U(1, 3)` and false-positive
/// scores from `U(0, 1.5)`, so true detections stochastically dominate.
pub fn corrupt_detections(
    truth: &[GroundTruthObject],
    noise: &DetectorNoise,
    width: usize,
    height: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Detection> {
    let center_jitter = Normal::new(0.0, noise.center_jitter_sigma.max(1e-12)).unwrap();
    let size_jitter = Normal::new(0.0, noise.size_jitter_sigma.max(1e-12)).unwrap();
    let mut out = Vec::new();
    for g in truth {
        let occluded = truth.iter().any(|other| {
            other.id != g.id
                && iou(&other.box_, &g.box_) > 0.3
                && other.box_.center().1 > g.box_.center().1
        });
        let p_miss = (noise.miss_rate
            + if occluded { noise.occlusion_miss_boost } else { 0.0 })
        .min(1.0);
        if rng.gen_bool(p_miss) {
            continue;
        }
        let (cx, cy) = g.box_.center();
        let cx = cx + center_jitter.sample(rng);
        let cy = cy + center_jitter.sample(rng);
        let w = (g.box_.w + size_jitter.sample(rng)).max(2.0);
        let h = (g.box_.h + size_jitter.sample(rng)).max(2.0);
        let score = rng.gen_range(1.0..3.0);
        out.push(Detection {
            frame: g.frame,
            box_: BoundingBox::centered(cx, cy, w, h),
            score,
        });
    }
    if noise.fp_rate > 0.0 {
        let frame = truth.first().map_or(0, |g| g.frame);
        let count = Poisson::new(noise.fp_rate).unwrap().sample(rng) as u64;
        for _ in 0..count {
            let w = rng.gen_range(6.0..24.0);
            let h = rng.gen_range(4.0..16.0);
            let cx = rng.gen_range(0.0..width as f64);
            let cy = rng.gen_range(0.0..height as f64);
            let score = rng.gen_range(0.0..1.5);
            out.push(Detection {
                frame,
                box_: BoundingBox::centered(cx, cy, w, h),
                score,
            });
        }
    }
    out
}

// --- rendering ---------------------------------------------------------------

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn unit_hash(x: u64) -> f64 {
    (splitmix64(x) >> 11) as f64 / (1u64 << 53) as f64
}

/// Per-vehicle paint intensity in `[140, 230]`, stable over the vehicle's
/// lifetime.
pub fn vehicle_intensity(id: u64) -> f64 {
    140.0 + (unit_hash(id.wrapping_mul(0x517C_C1B7_2722_0A95)) * 90.0).floor()
}

/// Paints a top-down frame: textured road background around intensity 90,
/// dashed lane markings at 200, and each vehicle as its rounded-rectangle
/// silhouette at an id-seeded intensity in `[140, 230]`.
pub fn render_frame(truth: &[GroundTruthObject], cfg: &ScenarioConfig) -> ImageGrid {
    let mut img = ImageGrid::new(cfg.width, cfg.height);
    for y in 0..cfg.height {
        for x in 0..cfg.width {
            let n = unit_hash(
                cfg.seed ^ (x as u64).wrapping_mul(0x9E37_79B9) ^ (y as u64) << 24,
            );
            img.set(x, y, 90.0 + (n * 16.0 - 8.0).round());
        }
    }
    // dashed centerline per lane along its dominant axis
    for lane in &cfg.lanes {
        let geom = lane_geometry(cfg, lane);
        if geom.dir.1.abs() > geom.dir.0.abs() {
            let x = round_half_up(geom.origin.0) as i64;
            if x >= 0 && (x as usize) < cfg.width {
                for y in 0..cfg.height {
                    if y % 12 < 6 {
                        img.set(x as usize, y, 200.0);
                    }
                }
            }
        } else {
            let y = round_half_up(geom.origin.1) as i64;
            if y >= 0 && (y as usize) < cfg.height {
                for x in 0..cfg.width {
                    if x % 12 < 6 {
                        img.set(x, y as usize, 200.0);
                    }
                }
            }
        }
    }
    // vehicles, lowest id first
    let mut order: Vec<&GroundTruthObject> = truth.iter().collect();
    order.sort_by_key(|g| g.id);
    for g in order {
        paint_rounded_rect(&mut img, &g.box_, vehicle_intensity(g.id));
    }
    img
}

fn paint_rounded_rect(img: &mut ImageGrid, b: &BoundingBox, value: f64) {
    let x0 = round_half_up(b.x) as i64;
    let y0 = round_half_up(b.y) as i64;
    let x1 = round_half_up(b.x + b.w) as i64;
    let y1 = round_half_up(b.y + b.h) as i64;
    for y in y0..y1 {
        for x in x0..x1 {
            if !img.in_bounds(x, y) {
                continue;
            }
            // cut the four corner pixels
            let corner = (x == x0 || x == x1 - 1) && (y == y0 || y == y1 - 1);
            if corner {
                continue;
            }
            img.set(x as usize, y as usize, value);
        }
    }
}

/// Synthetic detector-response grid for threshold-sweep experiments.
///
/// Each truth object contributes a peaked cone at its center whose height is
/// id-seeded across `[-0.95, -0.23]`; clutter cones with heights in
/// `[-1.05, -0.45]` are scattered over a `-1.2` floor. Cones compose by
/// `max`, so each frame's grid is independent of the detection threshold
/// applied later.
pub fn synthetic_response_grid(
    truth: &[GroundTruthObject],
    width: usize,
    height: usize,
    seed: u64,
    frame: u64,
) -> ImageGrid {
    let mut grid = ImageGrid::filled(width, height, -1.2);
    let stamp = |grid: &mut ImageGrid, cx: f64, cy: f64, peak: f64| {
        let r = 4i64;
        let x0 = round_half_up(cx) as i64;
        let y0 = round_half_up(cy) as i64;
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (x0 + dx, y0 + dy);
                if !grid.in_bounds(x, y) {
                    continue;
                }
                let v = peak - 0.12 * (dx * dx + dy * dy) as f64;
                let cur = grid.get(x as usize, y as usize);
                if v > cur {
                    grid.set(x as usize, y as usize, v);
                }
            }
        }
    };
    for g in truth {
        let peak = -0.95 + 0.72 * unit_hash(g.id.wrapping_mul(0xA24B_1DE5_8967_3C11));
        let (cx, cy) = g.box_.center();
        stamp(&mut grid, cx, cy, peak);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ splitmix64(frame));
    for _ in 0..6 {
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        let peak = rng.gen_range(-1.05..-0.45);
        stamp(&mut grid, cx, cy, peak);
    }
    grid
}
