//! Parameter-sweep and end-to-end experiment drivers shared by the CLI
//! subcommands and the acceptance suite.

use jtrack_core::grid::ImageGrid;
use jtrack_core::metrics::{evaluate_mot, precision_recall, EvalConfig, MotResult, PrecisionRecall};
use jtrack_core::part_scorer::{detect_frame, DetectorConfig, PartModel};
use jtrack_core::pipeline::{TrackerSettings, TrackingPipeline};
use jtrack_core::simulator::{synthetic_response_grid, FrameRecord};
use jtrack_core::types::{Detection, GroundTruthObject, TrackRecord};
use jtrack_core::Result;

/// One row of a detection-threshold sweep.
#[derive(Debug, Clone)]
pub struct EtaSweepRow {
    pub eta: f64,
    pub pr: PrecisionRecall,
}

/// One row of a tracking-parameter sweep.
#[derive(Debug, Clone)]
pub struct MotSweepRow {
    pub value: f64,
    pub result: MotResult,
}

/// Flattens simulator output into a single ground-truth stream.
pub fn collect_truth(records: &[FrameRecord]) -> Vec<GroundTruthObject> {
    records.iter().flat_map(|r| r.truth.iter().cloned()).collect()
}

/// Flattens simulator output into per-frame detection buckets.
pub fn collect_detections(records: &[FrameRecord]) -> Vec<(u64, Vec<Detection>)> {
    records
        .iter()
        .map(|r| (r.frame, r.detections.clone()))
        .collect()
}

/// Runs the tracker over per-frame detections.
pub fn run_tracker(
    frames: &[(u64, Vec<Detection>)],
    settings: &TrackerSettings,
    use_gbm: bool,
) -> Result<Vec<TrackRecord>> {
    let mut pipe = TrackingPipeline::from_settings(settings, use_gbm)?;
    let mut out = Vec::new();
    for (frame, dets) in frames {
        out.extend(pipe.step(*frame, dets)?);
    }
    Ok(out)
}

/// Sweeps the detection threshold over a fixed synthetic response fixture.
///
/// Response grids are synthesized once per frame from the ground truth (the
/// scenario seed keys the clutter), then every threshold is applied to the
/// same grids, so detection sets are nested across rows.
pub fn eta_sweep(
    records: &[FrameRecord],
    width: usize,
    height: usize,
    seed: u64,
    etas: &[f64],
    detector: &DetectorConfig,
    eval: &EvalConfig,
) -> Result<Vec<EtaSweepRow>> {
    let truth = collect_truth(records);
    let models: Vec<(u64, PartModel)> = records
        .iter()
        .map(|r| {
            let grid = synthetic_response_grid(&r.truth, width, height, seed, r.frame);
            (
                r.frame,
                PartModel {
                    root_response: grid,
                    parts: vec![],
                    search_radius: 0,
                    bias: 0.0,
                },
            )
        })
        .collect();

    let mut rows = Vec::with_capacity(etas.len());
    for &eta in etas {
        let cfg = DetectorConfig {
            eta,
            ..detector.clone()
        };
        let mut detections = Vec::new();
        for (frame, model) in &models {
            detections.extend(detect_frame(model, &cfg, *frame)?);
        }
        let pr = precision_recall(&truth, &detections, eval)?;
        rows.push(EtaSweepRow { eta, pr });
    }
    Ok(rows)
}

/// Sweeps the influence radius: each value runs the full tracker on the same
/// detection stream and evaluates CLEAR MOT against the ground truth.
pub fn sigma_w_sweep(
    records: &[FrameRecord],
    base: &TrackerSettings,
    values: &[f64],
    eval: &EvalConfig,
) -> Result<Vec<MotSweepRow>> {
    let truth = collect_truth(records);
    let frames = collect_detections(records);
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let settings = TrackerSettings {
            sigma_w: value,
            ..base.clone()
        };
        let tracks = run_tracker(&frames, &settings, true)?;
        let result = evaluate_mot(&truth, &tracks, eval)?;
        rows.push(MotSweepRow { value, result });
    }
    Ok(rows)
}

/// Trackers compared on one scenario: GBM on vs off.
pub fn gbm_versus_baseline(
    records: &[FrameRecord],
    settings: &TrackerSettings,
    eval: &EvalConfig,
) -> Result<(MotResult, MotResult)> {
    let truth = collect_truth(records);
    let frames = collect_detections(records);
    let gbm_tracks = run_tracker(&frames, settings, true)?;
    let base_tracks = run_tracker(&frames, settings, false)?;
    Ok((
        evaluate_mot(&truth, &gbm_tracks, eval)?,
        evaluate_mot(&truth, &base_tracks, eval)?,
    ))
}

/// Renders the per-frame images a segmentation stage needs, keyed by frame.
pub fn render_frames(
    records: &[FrameRecord],
    cfg: &jtrack_core::simulator::ScenarioConfig,
) -> Vec<(u64, ImageGrid)> {
    records
        .iter()
        .map(|r| (r.frame, jtrack_core::simulator::render_frame(&r.truth, cfg)))
        .collect()
}
