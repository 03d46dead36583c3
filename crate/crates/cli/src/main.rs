use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use jtrack_cli::*;
use jtrack_core::metrics::MotpMode;
use jtrack_core::Error;

/// Vehicle tracking toolkit for road-junction scenes: simulation, detection
/// scoring, shape-prior refinement, group-behavior tracking, evaluation and
/// plotting.
#[derive(Parser)]
#[command(name = "jtrack", version, about)]
struct Cli {
    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Configuration file for the subcommand (scenario or tracker JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for multi-file results.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn parse_box_size(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: f64 = w.parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: f64 = h.parse().map_err(|_| format!("bad height {h:?}"))?;
    Ok((w, h))
}

#[derive(Subcommand)]
enum Command {
    /// Generate a junction scenario: ground truth, noisy detections and
    /// optional rendered frames.
    Simulate {
        /// Override the configured frame count.
        #[arg(long)]
        frames: Option<u64>,
        /// Also write frames/%06d.pgm.
        #[arg(long)]
        render: bool,
    },
    /// Score one frame's part-model response grids into detections.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true, default_value_t = -0.78)]
        eta: f64,
        #[arg(long, default_value_t = 0.5)]
        nms_iou: f64,
        /// Emitted window size, WxH pixels.
        #[arg(long, value_parser = parse_box_size, default_value = "32x32")]
        box_size: (f64, f64),
        /// Frame index stamped on the output rows.
        #[arg(long, default_value_t = 0)]
        frame: u64,
    },
    /// Filter a detections CSV by shape-prior segmentation.
    Refine {
        #[arg(long)]
        detections: PathBuf,
        /// Directory of %06d.pgm frame images.
        #[arg(long)]
        frames_dir: PathBuf,
        /// Directory with templates.json and mask PGMs.
        #[arg(long)]
        templates: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dump per-window segmentation masks here.
        #[arg(long)]
        masks_dir: Option<PathBuf>,
        /// Segmentation config JSON.
        #[arg(long)]
        seg_config: Option<PathBuf>,
    },
    /// Track a detections CSV into identity-consistent trajectories.
    Track {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Disable the traffic-force constraint (plain Kalman baseline).
        #[arg(long)]
        no_gbm: bool,
    },
    /// Score tracks against ground truth with CLEAR MOT.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, value_enum, default_value = "iou")]
        motp_mode: MotpModeArg,
        /// Also print the report as one JSON object.
        #[arg(long)]
        json: bool,
    },
    /// Run the whole loop: simulate or ingest, refine, track, evaluate.
    Pipeline {
        /// Scenario JSON to simulate (alternative to --detections).
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Existing detections CSV to ingest.
        #[arg(long)]
        detections: Option<PathBuf>,
        /// Ground-truth CSV for the final report.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Frame PGM directory (required for segmentation on ingested CSVs).
        #[arg(long)]
        frames_dir: Option<PathBuf>,
        /// Template directory for the segmentation stage.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Segmentation config JSON.
        #[arg(long)]
        seg_config: Option<PathBuf>,
        /// Disable the traffic-force constraint.
        #[arg(long)]
        no_gbm: bool,
        /// Skip shape-prior refinement.
        #[arg(long)]
        no_segmenter: bool,
    },
    /// Sweep a parameter (eta or sigma_w) over a simulated scenario.
    Sweep {
        /// Parameter to sweep: "eta" or "sigma_w".
        #[arg(long)]
        param: String,
        /// Explicit comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        step: Option<f64>,
        /// Scenario JSON (defaults to the built-in scenario).
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Tracker settings JSON used for sigma_w sweeps.
        #[arg(long)]
        tracker_config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit trajectory overlay or sweep curve SVGs.
    Plot {
        #[arg(long)]
        tracks: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        sweep: Option<PathBuf>,
        /// Sweep x column name (default: first column).
        #[arg(long)]
        x: Option<String>,
        /// Sweep y column name (default: second column).
        #[arg(long)]
        y: Option<String>,
        #[arg(long)]
        from_frame: Option<u64>,
        #[arg(long)]
        to_frame: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum MotpModeArg {
    Iou,
    CenterDistance,
}

impl From<MotpModeArg> for MotpMode {
    fn from(v: MotpModeArg) -> Self {
        match v {
            MotpModeArg::Iou => MotpMode::Iou,
            MotpModeArg::CenterDistance => MotpMode::CenterDistance,
        }
    }
}

/// Whether a command's stdout is a report (printed even under --quiet) or
/// an informational summary (suppressed by --quiet).
enum Output {
    Report(String),
    Info(String),
}

fn run(cli: Cli) -> jtrack_core::Result<Output> {
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    Ok(match cli.command {
        Command::Simulate { frames, render } => Output::Info(cmd_simulate(&SimulateOpts {
            config: cli.config,
            out_dir,
            seed: cli.seed,
            frames,
            render,
        })?),
        Command::Detect {
            model,
            out,
            eta,
            nms_iou,
            box_size,
            frame,
        } => Output::Info(cmd_detect(&DetectOpts {
            model,
            out,
            eta,
            nms_iou,
            box_size,
            frame,
        })?),
        Command::Refine {
            detections,
            frames_dir,
            templates,
            out,
            masks_dir,
            seg_config,
        } => Output::Info(cmd_refine(&RefineOpts {
            detections,
            frames_dir,
            templates,
            out,
            masks_dir,
            seg_config,
        })?),
        Command::Track {
            detections,
            out,
            no_gbm,
        } => Output::Info(cmd_track(&TrackOpts {
            detections,
            out,
            config: cli.config,
            no_gbm,
        })?),
        Command::Evaluate {
            gt,
            tracks,
            iou,
            motp_mode,
            json,
        } => Output::Report(cmd_evaluate(&EvaluateOpts {
            gt,
            tracks,
            iou,
            motp_mode: motp_mode.into(),
            json,
        })?),
        Command::Pipeline {
            scenario,
            detections,
            gt,
            frames_dir,
            templates,
            seg_config,
            no_gbm,
            no_segmenter,
        } => Output::Report(cmd_pipeline(&PipelineOpts {
            scenario,
            detections,
            gt,
            frames_dir,
            out_dir,
            seed: cli.seed,
            tracker_config: cli.config,
            seg_config,
            templates,
            no_gbm,
            no_segmenter,
        })?),
        Command::Sweep {
            param,
            values,
            from,
            to,
            step,
            scenario,
            tracker_config,
            out,
        } => {
            let values = match (values, from, to, step) {
                (Some(v), _, _, _) => v,
                (None, Some(a), Some(b), Some(s)) => expand_range(a, b, s)?,
                _ => {
                    return Err(Error::Config(
                        "sweep needs --values or --from/--to/--step".into(),
                    ))
                }
            };
            Output::Info(cmd_sweep(&SweepOpts {
                param,
                values,
                scenario: scenario.or(cli.config),
                tracker_config,
                out,
                seed: cli.seed,
            })?)
        }
        Command::Plot {
            tracks,
            gt,
            sweep,
            x,
            y,
            from_frame,
            to_frame,
            out,
        } => Output::Info(cmd_plot(&PlotOpts {
            tracks,
            gt,
            sweep,
            x_column: x,
            y_column: y,
            from_frame,
            to_frame,
            out,
        })?),
    })
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Io(_) | Error::MissingTemplate(_) => 2,
        Error::Data(_) | Error::InvalidInput(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    match run(cli) {
        Ok(Output::Report(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Ok(Output::Info(text)) => {
            if !quiet && !text.is_empty() {
                print!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
