//! Command implementations behind the `jtrack` binary. Each `cmd_*` function
//! returns the text that should go to stdout; the binary maps error variants
//! to exit codes (2 for usage/config problems, 3 for malformed data).

pub mod experiments;
pub mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use jtrack_core::io::{
    detections_from_csv, detections_to_csv, ground_truth_from_csv, ground_truth_to_csv, read_pgm,
    tracks_from_csv, tracks_to_csv, write_pgm,
};
use jtrack_core::metrics::{evaluate_mot, EvalConfig, MotResult, MotpMode};
use jtrack_core::part_scorer::{detect_frame, load_part_model, DetectorConfig};
use jtrack_core::pipeline::TrackerSettings;
use jtrack_core::segmenter::{refine_detections, SegmentationConfig, TemplateStore};
use jtrack_core::simulator::{render_frame, simulate, ScenarioConfig};
use jtrack_core::types::{Detection, GroundTruthObject, TrackRecord};
use jtrack_core::{Error, Result};

use experiments::{collect_detections, collect_truth, eta_sweep, run_tracker, sigma_w_sweep};

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_json_or_default<T: serde::de::DeserializeOwned + Default>(
    path: Option<&Path>,
) -> Result<T> {
    match path {
        Some(p) => load_json(p),
        None => Ok(T::default()),
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn frame_image_path(dir: &Path, frame: u64) -> PathBuf {
    dir.join(format!("{frame:06}.pgm"))
}

// --- simulate ----------------------------------------------------------------

pub struct SimulateOpts {
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub frames: Option<u64>,
    pub render: bool,
}

/// Generates a scenario and writes `gt.csv`, `det.csv`, `scenario.json` and
/// (optionally) `frames/%06d.pgm` into the output directory.
pub fn cmd_simulate(opts: &SimulateOpts) -> Result<String> {
    let mut cfg: ScenarioConfig = load_json_or_default(opts.config.as_deref())?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(frames) = opts.frames {
        cfg.frames = frames;
    }
    let records = simulate(&cfg)?;
    ensure_dir(&opts.out_dir)?;

    let truth = collect_truth(&records);
    let detections: Vec<Detection> = records
        .iter()
        .flat_map(|r| r.detections.iter().cloned())
        .collect();
    fs::write(opts.out_dir.join("gt.csv"), ground_truth_to_csv(&truth))?;
    fs::write(opts.out_dir.join("det.csv"), detections_to_csv(&detections))?;
    let echo = serde_json::to_string_pretty(&cfg)
        .map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))?;
    fs::write(opts.out_dir.join("scenario.json"), echo + "\n")?;

    if opts.render {
        let frames_dir = opts.out_dir.join("frames");
        ensure_dir(&frames_dir)?;
        for r in &records {
            let img = render_frame(&r.truth, &cfg);
            write_pgm(&frame_image_path(&frames_dir, r.frame), &img)?;
        }
    }
    Ok(format!(
        "simulated {} frames, {} truth rows, {} detections\n",
        cfg.frames,
        truth.len(),
        detections.len()
    ))
}

// --- detect ------------------------------------------------------------------

pub struct DetectOpts {
    pub model: PathBuf,
    pub out: PathBuf,
    pub eta: f64,
    pub nms_iou: f64,
    pub box_size: (f64, f64),
    pub frame: u64,
}

/// Scores one frame's response grids and writes the surviving detections.
pub fn cmd_detect(opts: &DetectOpts) -> Result<String> {
    let model = load_part_model(&opts.model)?;
    let cfg = DetectorConfig {
        eta: opts.eta,
        nms_iou: opts.nms_iou,
        box_size: opts.box_size,
    };
    cfg.validate()?;
    let dets = detect_frame(&model, &cfg, opts.frame)?;
    fs::write(&opts.out, detections_to_csv(&dets))?;
    Ok(format!("{} detections above eta {}\n", dets.len(), opts.eta))
}

// --- refine ------------------------------------------------------------------

pub struct RefineOpts {
    pub detections: PathBuf,
    pub frames_dir: PathBuf,
    pub templates: PathBuf,
    pub out: PathBuf,
    pub masks_dir: Option<PathBuf>,
    pub seg_config: Option<PathBuf>,
}

/// Runs shape-prior refinement over a detections CSV plus frame PGMs.
pub fn cmd_refine(opts: &RefineOpts) -> Result<String> {
    let detections = detections_from_csv(
        &read_text(&opts.detections)?,
        &opts.detections.display().to_string(),
    )?;
    let store = TemplateStore::load(&opts.templates)?;
    let seg_cfg: SegmentationConfig = load_json_or_default(opts.seg_config.as_deref())?;
    seg_cfg.validate()?;
    if let Some(dir) = &opts.masks_dir {
        ensure_dir(dir)?;
    }

    let mut frames: Vec<u64> = detections.iter().map(|d| d.frame).collect();
    frames.sort_unstable();
    frames.dedup();

    let mut kept = Vec::new();
    for frame in frames {
        let img = read_pgm(&frame_image_path(&opts.frames_dir, frame))?;
        let frame_dets: Vec<Detection> = detections
            .iter()
            .filter(|d| d.frame == frame)
            .cloned()
            .collect();
        if let Some(dir) = &opts.masks_dir {
            for (i, det) in frame_dets.iter().enumerate() {
                let template = store.select(None, det.box_.w / det.box_.h)?;
                if let Some(outcome) =
                    jtrack_core::segmenter::refine_one(&img, det, template, &seg_cfg)?
                {
                    let path = dir.join(format!("{frame:06}_{i:03}.pgm"));
                    write_pgm(&path, &outcome.labeling.to_grid())?;
                }
            }
        }
        let part_ids = vec![None; frame_dets.len()];
        kept.extend(refine_detections(&img, &frame_dets, &part_ids, &store, &seg_cfg)?);
    }
    fs::write(&opts.out, detections_to_csv(&kept))?;
    Ok(format!(
        "kept {} of {} detections\n",
        kept.len(),
        detections.len()
    ))
}

// --- track -------------------------------------------------------------------

pub struct TrackOpts {
    pub detections: PathBuf,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub no_gbm: bool,
}

/// Tracks a detections CSV and writes the confirmed track records.
pub fn cmd_track(opts: &TrackOpts) -> Result<String> {
    let detections = detections_from_csv(
        &read_text(&opts.detections)?,
        &opts.detections.display().to_string(),
    )?;
    let settings: TrackerSettings = load_json_or_default(opts.config.as_deref())?;
    let max_frame = detections.iter().map(|d| d.frame).max().unwrap_or(0);
    let frames = jtrack_core::pipeline::group_detections_by_frame(&detections, max_frame);
    let tracks = run_tracker(&frames, &settings, !opts.no_gbm)?;
    fs::write(&opts.out, tracks_to_csv(&tracks))?;
    let ids: std::collections::HashSet<u64> = tracks.iter().map(|t| t.track_id).collect();
    Ok(format!(
        "{} track records over {} identities\n",
        tracks.len(),
        ids.len()
    ))
}

// --- evaluate ----------------------------------------------------------------

pub struct EvaluateOpts {
    pub gt: PathBuf,
    pub tracks: PathBuf,
    pub iou: f64,
    pub motp_mode: MotpMode,
    pub json: bool,
}

fn format_score(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.6}")
    }
}

/// Renders the fixed-order evaluation report.
pub fn render_report(r: &MotResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "MOTA: {}", format_score(r.mota));
    let _ = writeln!(out, "MOTP: {}", format_score(r.motp));
    let _ = writeln!(out, "misses: {}", r.tallies.misses);
    let _ = writeln!(out, "fps: {}", r.tallies.false_positives);
    let _ = writeln!(out, "mismatches: {}", r.tallies.mismatches);
    let _ = writeln!(out, "matches: {}", r.tallies.matches);
    let _ = writeln!(out, "gt_total: {}", r.tallies.gt_total);
    out
}

fn report_json(r: &MotResult) -> String {
    format!(
        "{{\"mota\":{},\"motp\":{},\"misses\":{},\"fps\":{},\"mismatches\":{},\"matches\":{},\"gt_total\":{}}}\n",
        if r.mota.is_nan() { "null".into() } else { format!("{:.6}", r.mota) },
        if r.motp.is_nan() { "null".into() } else { format!("{:.6}", r.motp) },
        r.tallies.misses,
        r.tallies.false_positives,
        r.tallies.mismatches,
        r.tallies.matches,
        r.tallies.gt_total
    )
}

/// Evaluates a tracks CSV against ground truth with CLEAR MOT.
pub fn cmd_evaluate(opts: &EvaluateOpts) -> Result<String> {
    let truth = ground_truth_from_csv(&read_text(&opts.gt)?, &opts.gt.display().to_string())?;
    let tracks = tracks_from_csv(
        &read_text(&opts.tracks)?,
        &opts.tracks.display().to_string(),
    )?;
    let cfg = EvalConfig {
        match_threshold_iou: opts.iou,
        motp_mode: opts.motp_mode,
    };
    let result = evaluate_mot(&truth, &tracks, &cfg)?;
    let mut out = render_report(&result);
    if opts.json {
        out.push_str(&report_json(&result));
    }
    Ok(out)
}

// --- pipeline ----------------------------------------------------------------

pub struct PipelineOpts {
    pub scenario: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub frames_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub tracker_config: Option<PathBuf>,
    pub seg_config: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub no_gbm: bool,
    pub no_segmenter: bool,
}

/// Runs the end-to-end loop: ingest (or simulate) detections, refine them if
/// a segmentation stage is enabled, track, write `tracks.csv`, and report
/// CLEAR MOT scores when ground truth is available.
pub fn cmd_pipeline(opts: &PipelineOpts) -> Result<String> {
    ensure_dir(&opts.out_dir)?;

    // resolve inputs
    let mut truth: Vec<GroundTruthObject> = Vec::new();
    let mut have_truth = false;
    let mut frames: Vec<(u64, Vec<Detection>)>;
    let mut frame_images: Vec<(u64, jtrack_core::ImageGrid)> = Vec::new();

    if let Some(scenario_path) = &opts.scenario {
        let mut cfg: ScenarioConfig = load_json(scenario_path)?;
        if let Some(seed) = opts.seed {
            cfg.seed = seed;
        }
        let records = simulate(&cfg)?;
        truth = collect_truth(&records);
        have_truth = true;
        frames = collect_detections(&records);
        fs::write(opts.out_dir.join("gt.csv"), ground_truth_to_csv(&truth))?;
        let all: Vec<Detection> = frames.iter().flat_map(|(_, d)| d.clone()).collect();
        fs::write(opts.out_dir.join("det.csv"), detections_to_csv(&all))?;
        if !opts.no_segmenter {
            frame_images = experiments::render_frames(&records, &cfg);
        }
    } else {
        let det_path = opts.detections.as_ref().ok_or_else(|| {
            Error::Config("pipeline needs --scenario or --detections".into())
        })?;
        let detections =
            detections_from_csv(&read_text(det_path)?, &det_path.display().to_string())?;
        if let Some(gt_path) = &opts.gt {
            truth = ground_truth_from_csv(&read_text(gt_path)?, &gt_path.display().to_string())?;
            have_truth = true;
        }
        let max_frame = detections
            .iter()
            .map(|d| d.frame)
            .chain(truth.iter().map(|g| g.frame))
            .max()
            .unwrap_or(0);
        frames = jtrack_core::pipeline::group_detections_by_frame(&detections, max_frame);
        if !opts.no_segmenter {
            let dir = opts.frames_dir.as_ref().ok_or_else(|| {
                Error::Config(
                    "segmentation enabled but no --frames-dir given (or pass --no-segmenter)"
                        .into(),
                )
            })?;
            for (frame, dets) in &frames {
                if !dets.is_empty() {
                    frame_images.push((*frame, read_pgm(&frame_image_path(dir, *frame))?));
                }
            }
        }
    }

    // refinement stage
    if !opts.no_segmenter {
        let templates_dir = opts.templates.as_ref().ok_or_else(|| {
            Error::Config("segmentation enabled but no --templates directory given".into())
        })?;
        let store = TemplateStore::load(templates_dir)?;
        if store.is_empty() {
            return Err(Error::Config("template store is empty".into()));
        }
        let seg_cfg: SegmentationConfig = load_json_or_default(opts.seg_config.as_deref())?;
        seg_cfg.validate()?;
        for (frame, dets) in frames.iter_mut() {
            if dets.is_empty() {
                continue;
            }
            let Some((_, img)) = frame_images.iter().find(|(f, _)| f == frame) else {
                continue;
            };
            let part_ids = vec![None; dets.len()];
            *dets = refine_detections(img, dets, &part_ids, &store, &seg_cfg)?;
        }
    }

    // tracking stage
    let settings: TrackerSettings = load_json_or_default(opts.tracker_config.as_deref())?;
    let tracks = run_tracker(&frames, &settings, !opts.no_gbm)?;
    fs::write(opts.out_dir.join("tracks.csv"), tracks_to_csv(&tracks))?;

    if have_truth {
        let result = evaluate_mot(&truth, &tracks, &EvalConfig::default())?;
        Ok(render_report(&result))
    } else {
        Ok(format!("{} track records written\n", tracks.len()))
    }
}

// --- sweep -------------------------------------------------------------------

pub struct SweepOpts {
    pub param: String,
    pub values: Vec<f64>,
    pub scenario: Option<PathBuf>,
    pub tracker_config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

/// Expands `--from/--to/--step` into an inclusive value list.
pub fn expand_range(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if step == 0.0 || !step.is_finite() {
        return Err(Error::Config("sweep step must be nonzero".into()));
    }
    let dir = (to - from).signum();
    let step = step.abs() * if dir < 0.0 { -1.0 } else { 1.0 };
    let mut values = Vec::new();
    let mut v = from;
    let eps = step.abs() * 1e-9;
    while (step > 0.0 && v <= to + eps) || (step < 0.0 && v >= to - eps) {
        values.push(v);
        v += step;
    }
    if values.is_empty() {
        return Err(Error::Config("sweep range is empty".into()));
    }
    Ok(values)
}

/// Runs an `eta` or `sigma_w` sweep over a simulated scenario and writes one
/// CSV row per value.
pub fn cmd_sweep(opts: &SweepOpts) -> Result<String> {
    if opts.values.is_empty() {
        return Err(Error::Config("sweep range is empty".into()));
    }
    let mut cfg: ScenarioConfig = load_json_or_default(opts.scenario.as_deref())?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let records = simulate(&cfg)?;
    let settings: TrackerSettings = load_json_or_default(opts.tracker_config.as_deref())?;

    let mut out = String::new();
    match opts.param.as_str() {
        "eta" => {
            // square hypothesis window with the vehicle's mean extent, so
            // one window size matches both travel orientations
            let side = (cfg.vehicle_size.0 * cfg.vehicle_size.1).sqrt();
            let rows = eta_sweep(
                &records,
                cfg.width,
                cfg.height,
                cfg.seed,
                &opts.values,
                &DetectorConfig {
                    box_size: (side, side),
                    ..DetectorConfig::default()
                },
                &EvalConfig::default(),
            )?;
            out.push_str("eta,precision,recall,tp,fp,fn\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{:.6},{:.6},{:.6},{},{},{}",
                    r.eta, r.pr.precision, r.pr.recall, r.pr.tp, r.pr.fp, r.pr.fn_
                );
            }
        }
        "sigma_w" => {
            let rows = sigma_w_sweep(&records, &settings, &opts.values, &EvalConfig::default())?;
            out.push_str(
                "sigma_w,mota,motp,misses,false_positives,mismatches,matches,gt_total\n",
            );
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{:.6},{},{},{},{},{},{},{}",
                    r.value,
                    format_score(r.result.mota),
                    format_score(r.result.motp),
                    r.result.tallies.misses,
                    r.result.tallies.false_positives,
                    r.result.tallies.mismatches,
                    r.result.tallies.matches,
                    r.result.tallies.gt_total
                );
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown sweep parameter {other:?} (expected \"eta\" or \"sigma_w\")"
            )));
        }
    }
    fs::write(&opts.out, &out)?;
    Ok(format!("{} sweep rows written\n", opts.values.len()))
}

// --- plot --------------------------------------------------------------------

pub struct PlotOpts {
    pub tracks: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub sweep: Option<PathBuf>,
    pub x_column: Option<String>,
    pub y_column: Option<String>,
    pub from_frame: Option<u64>,
    pub to_frame: Option<u64>,
    pub out: PathBuf,
}

/// Emits a trajectory overlay SVG or a sweep curve SVG.
pub fn cmd_plot(opts: &PlotOpts) -> Result<String> {
    let content = if let Some(sweep_path) = &opts.sweep {
        sweep_curve_svg(sweep_path, opts.x_column.as_deref(), opts.y_column.as_deref())?
    } else if let Some(tracks_path) = &opts.tracks {
        let tracks =
            tracks_from_csv(&read_text(tracks_path)?, &tracks_path.display().to_string())?;
        let truth = match &opts.gt {
            Some(p) => ground_truth_from_csv(&read_text(p)?, &p.display().to_string())?,
            None => Vec::new(),
        };
        trajectory_svg(&tracks, &truth, opts.from_frame, opts.to_frame)
    } else {
        return Err(Error::Config("plot needs --tracks or --sweep".into()));
    };
    fs::write(&opts.out, &content)?;
    Ok(format!("wrote {}\n", opts.out.display()))
}

/// One polyline through box centers per track id; truth drawn dashed.
pub fn trajectory_svg(
    tracks: &[TrackRecord],
    truth: &[GroundTruthObject],
    from_frame: Option<u64>,
    to_frame: Option<u64>,
) -> String {
    let in_range = |f: u64| from_frame.map_or(true, |a| f >= a) && to_frame.map_or(true, |b| f <= b);
    let tracks: Vec<&TrackRecord> = tracks.iter().filter(|t| in_range(t.frame)).collect();
    let truth: Vec<&GroundTruthObject> = truth.iter().filter(|g| in_range(g.frame)).collect();

    // canvas bounds from the data, with a margin
    let mut max_x: f64 = 64.0;
    let mut max_y: f64 = 64.0;
    for b in tracks
        .iter()
        .map(|t| &t.box_)
        .chain(truth.iter().map(|g| &g.box_))
    {
        max_x = max_x.max(b.x + b.w);
        max_y = max_y.max(b.y + b.h);
    }
    let mut doc = svg::SvgDoc::new(max_x + 8.0, max_y + 8.0);
    doc.filled_rect(0.0, 0.0, max_x + 8.0, max_y + 8.0, "#f8f8f8");

    let mut truth_ids: Vec<u64> = truth.iter().map(|g| g.id).collect();
    truth_ids.sort_unstable();
    truth_ids.dedup();
    for id in truth_ids {
        let mut rows: Vec<&&GroundTruthObject> =
            truth.iter().filter(|g| g.id == id).collect();
        rows.sort_by_key(|g| g.frame);
        let pts: Vec<(f64, f64)> = rows.iter().map(|g| g.box_.center()).collect();
        doc.polyline(&pts, "#999999", true, "truth");
    }

    let mut ids: Vec<u64> = tracks.iter().map(|t| t.track_id).collect();
    ids.sort_unstable();
    ids.dedup();
    for id in ids {
        let mut rows: Vec<&&TrackRecord> =
            tracks.iter().filter(|t| t.track_id == id).collect();
        rows.sort_by_key(|t| t.frame);
        let pts: Vec<(f64, f64)> = rows.iter().map(|t| t.box_.center()).collect();
        let color = svg::track_color(id);
        doc.polyline(&pts, color, false, "track");
        if let Some(last) = rows.last() {
            doc.rect(
                last.box_.x,
                last.box_.y,
                last.box_.w,
                last.box_.h,
                color,
                "track-box",
            );
        }
    }
    doc.render()
}

fn sweep_curve_svg(path: &Path, x_col: Option<&str>, y_col: Option<&str>) -> Result<String> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty sweep file", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    let col_index = |name: Option<&str>, default: usize| -> Result<usize> {
        match name {
            None => Ok(default),
            Some(n) => columns
                .iter()
                .position(|c| *c == n)
                .ok_or_else(|| Error::Config(format!("no column {n:?} in {header:?}"))),
        }
    };
    let xi = col_index(x_col, 0)?;
    let yi = col_index(y_col, 1)?;

    let mut points: Vec<(f64, f64)> = Vec::new();
    for (ln, row) in lines.enumerate() {
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::Data(format!(
                "{}:{}: expected {} fields",
                path.display(),
                ln + 2,
                columns.len()
            )));
        }
        let parse = |i: usize| -> Result<f64> {
            fields[i].trim().parse().map_err(|_| {
                Error::Data(format!(
                    "{}:{}: bad number {:?}",
                    path.display(),
                    ln + 2,
                    fields[i]
                ))
            })
        };
        points.push((parse(xi)?, parse(yi)?));
    }

    // fixed 480x320 canvas with a 48 px margin
    let (w, h, m) = (480.0, 320.0, 48.0);
    let mut doc = svg::SvgDoc::new(w, h);
    doc.filled_rect(0.0, 0.0, w, h, "#ffffff");
    doc.line(m, h - m, w - m, h - m, "#333333");
    doc.line(m, m, m, h - m, "#333333");
    doc.text(w / 2.0 - 20.0, h - 12.0, 12.0, columns.get(xi).unwrap_or(&"x"));
    doc.text(8.0, m - 12.0, 12.0, columns.get(yi).unwrap_or(&"y"));

    if !points.is_empty() {
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x1 - x0 < 1e-12 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-12 {
            y1 = y0 + 1.0;
        }
        let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
        let scaled: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (sx(x), sy(y))).collect();
        doc.polyline(&scaled, "#1f77b4", false, "curve");
        for &(x, y) in &scaled {
            doc.circle(x, y, 3.0, "#1f77b4", "marker");
        }
        doc.text(m, h - m + 16.0, 10.0, &format!("{x0:.3}"));
        doc.text(w - m - 24.0, h - m + 16.0, 10.0, &format!("{x1:.3}"));
    }
    Ok(doc.render())
}
