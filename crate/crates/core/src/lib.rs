//! Multi-vehicle tracking toolkit for road-junction surveillance scenes.
//!
//! The crate covers the full tracking-by-detection loop at desk scale:
//!
//! - [`part_scorer`] scores part-based detection hypotheses over
//!   caller-supplied filter-response grids and emits thresholded,
//!   NMS-filtered detections.
//! - [`segmenter`] refines each detection window with a graph-cut
//!   segmentation carrying a level-set shape prior, rejecting windows whose
//!   segmented mask does not resemble a vehicle template.
//! - [`tracker`] predicts per-vehicle Kalman states under a traffic-force
//!   constraint so that vehicles closing in on same-direction neighbours are
//!   damped instead of extrapolated blindly.
//! - [`association`] gates and greedily assigns detections to tracks and
//!   manages track birth, confirmation and death.
//! - [`simulator`] generates deterministic junction scenarios (ground truth,
//!   rendered frames, corrupted detections) for end-to-end experiments.
//! - [`metrics`] implements detection precision/recall and the CLEAR MOT
//!   tracking scores (MOTP / MOTA).

pub mod assignment;
pub mod association;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod part_scorer;
pub mod pipeline;
pub mod segmenter;
pub mod simulator;
pub mod tracker;
pub mod types;

pub use grid::ImageGrid;
pub use types::{BoundingBox, Detection, GroundTruthObject, TrackRecord};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or unusable input files.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed data in a CSV, PGM or JSON payload.
    #[error("data format error: {0}")]
    Data(String),
    /// An operation was called outside its contract.
    #[error("{0}")]
    InvalidInput(String),
    /// No shape template registered for the requested part.
    #[error("missing template for part {0}")]
    MissingTemplate(u32),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
