//! Shared geometric and pipeline record types.
//!
//! Coordinate convention: origin at the top-left corner, x grows rightward,
//! y grows downward. Boxes are half-open `[x, x+w) × [y, y+h)` with
//! real-valued (sub-pixel) coordinates; integer pixel grids are obtained by
//! rounding half-up at rasterization time only.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rounds half-up (ties toward +infinity), the crate-wide rasterization rule.
pub fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    /// Left edge.
    pub x: f64,
    /// Top edge.
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    /// Validating constructor: width and height must be positive and all
    /// coordinates finite.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = BoundingBox { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite())
        {
            return Err(Error::InvalidInput("box coordinates must be finite".into()));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "box must have positive extent, got w={} h={}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Box of size `(w, h)` centered at `(cx, cy)`.
    pub fn centered(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BoundingBox {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }
}

/// Intersection-over-union of two boxes, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a.area() + b.area() - inter)
}

/// Euclidean distance between box centers.
pub fn center_distance(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// One detector output: a scored window on a given frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// 0-based frame index.
    pub frame: u64,
    pub box_: BoundingBox,
    pub score: f64,
}

impl Detection {
    pub fn new(frame: u64, box_: BoundingBox, score: f64) -> Result<Self> {
        box_.validate()?;
        if !score.is_finite() {
            return Err(Error::InvalidInput("detection score must be finite".into()));
        }
        Ok(Detection { frame, box_, score })
    }
}

/// Simulator ground truth for one object on one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthObject {
    pub frame: u64,
    pub id: u64,
    pub box_: BoundingBox,
    /// Actual displacement over the last frame, pixels/frame.
    pub velocity: (f64, f64),
    /// Travel direction, radians (atan2 convention, y down).
    pub heading: f64,
}

/// Tracker output: one confirmed track position on one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub frame: u64,
    pub track_id: u64,
    pub box_: BoundingBox,
}
