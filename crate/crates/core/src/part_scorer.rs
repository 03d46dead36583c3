//! Part-based detection scoring over caller-supplied filter-response grids.
//!
//! A hypothesis anchored at a root location scores the root response plus,
//! for each part, the best response within a bounded search window around the
//! part's anchor minus a quadratic deformation cost, plus a bias. Candidates
//! above the acceptance threshold survive greedy non-maximum suppression.
//!
//! Feature extraction and filter training are out of scope: response grids
//! arrive precomputed, referenced from a JSON descriptor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::ImageGrid;
use crate::io::read_pgm;
use crate::types::{iou, BoundingBox, Detection};
use crate::{Error, Result};

/// One displaced part: response grid, anchor offset from the root location
/// and quadratic deformation weights `(a1, a2, a3, a4)` applied as
/// `a1*dx^2 + a2*dx + a3*dy^2 + a4*dy`.
#[derive(Debug, Clone)]
pub struct Part {
    pub response: ImageGrid,
    pub anchor: (i64, i64),
    pub coeffs: [f64; 4],
}

/// A root filter response plus `n` displaced parts sharing one coordinate
/// frame.
#[derive(Debug, Clone)]
pub struct PartModel {
    pub root_response: ImageGrid,
    pub parts: Vec<Part>,
    /// Chebyshev radius of the part placement search window, pixels.
    pub search_radius: i64,
    pub bias: f64,
}

impl PartModel {
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.parts.iter().enumerate() {
            if p.response.width != self.root_response.width
                || p.response.height != self.root_response.height
            {
                return Err(Error::InvalidInput(format!(
                    "part {i} response grid {}x{} does not match root {}x{}",
                    p.response.width,
                    p.response.height,
                    self.root_response.width,
                    self.root_response.height
                )));
            }
            // quadratic terms must be nonnegative so the cost is bounded below
            if p.coeffs[0] < 0.0 || p.coeffs[2] < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "part {i} quadratic deformation weights must be nonnegative"
                )));
            }
        }
        if self.search_radius < 0 {
            return Err(Error::InvalidInput("search_radius must be >= 0".into()));
        }
        Ok(())
    }
}

/// Detector acceptance threshold and suppression parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Score acceptance threshold.
    pub eta: f64,
    /// Greedy NMS overlap threshold in `[0, 1]`.
    pub nms_iou: f64,
    /// Size of the emitted hypothesis window, pixels.
    pub box_size: (f64, f64),
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            eta: -0.78,
            nms_iou: 0.5,
            box_size: (32.0, 32.0),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(Error::Config(format!(
                "nms_iou must be in [0, 1], got {}",
                self.nms_iou
            )));
        }
        if self.box_size.0 <= 0.0 || self.box_size.1 <= 0.0 {
            return Err(Error::Config("box_size must be positive".into()));
        }
        Ok(())
    }
}

/// Quadratic deformation cost of placing a part `displacement` pixels away
/// from its anchor, clamped below at zero.
pub fn deformation_cost(coeffs: &[f64; 4], displacement: (f64, f64)) -> f64 {
    let (dx, dy) = displacement;
    (coeffs[0] * dx * dx + coeffs[1] * dx + coeffs[2] * dy * dy + coeffs[3] * dy).max(0.0)
}

/// Best placement contribution of one part for a root at `root_loc`:
/// max over the search window of response minus deformation cost. Placements
/// outside the grid are skipped; `None` when no placement is valid.
fn best_part_placement(part: &Part, radius: i64, root_loc: (i64, i64)) -> Option<f64> {
    let cx = root_loc.0 + part.anchor.0;
    let cy = root_loc.1 + part.anchor.1;
    let mut best: Option<f64> = None;
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let px = cx + dx;
            let py = cy + dy;
            if !part.response.in_bounds(px, py) {
                continue;
            }
            let v = part.response.get(px as usize, py as usize)
                - deformation_cost(&part.coeffs, (dx as f64, dy as f64));
            best = Some(match best {
                Some(b) if b >= v => b,
                _ => v,
            });
        }
    }
    best
}

/// Scores the hypothesis anchored at `root_loc`: root response plus each
/// part's best placement plus the bias. Parts with no valid placement
/// contribute zero.
pub fn score_hypothesis(model: &PartModel, root_loc: (i64, i64)) -> Result<f64> {
    if !model.root_response.in_bounds(root_loc.0, root_loc.1) {
        return Err(Error::InvalidInput(
            "location outside response grid".into(),
        ));
    }
    let mut score = model
        .root_response
        .get(root_loc.0 as usize, root_loc.1 as usize);
    for part in &model.parts {
        score += best_part_placement(part, model.search_radius, root_loc).unwrap_or(0.0);
    }
    Ok(score + model.bias)
}

/// Index of the part with the highest placed contribution for a hypothesis
/// at `root_loc`, or `None` for a root-only model. Used downstream to pick a
/// shape template per detection.
pub fn argmax_part(model: &PartModel, root_loc: (i64, i64)) -> Option<u32> {
    let mut best: Option<(u32, f64)> = None;
    for (i, part) in model.parts.iter().enumerate() {
        if let Some(v) = best_part_placement(part, model.search_radius, root_loc) {
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((i as u32, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Scores every root location, keeps hypotheses above `eta`, applies greedy
/// NMS (highest score first) and emits detections with windows of
/// `cfg.box_size` centered at the surviving locations, sorted by descending
/// score.
pub fn detect_frame(model: &PartModel, cfg: &DetectorConfig, frame: u64) -> Result<Vec<Detection>> {
    model.validate()?;
    cfg.validate()?;
    let mut candidates: Vec<(f64, i64, i64)> = Vec::new();
    for y in 0..model.root_response.height as i64 {
        for x in 0..model.root_response.width as i64 {
            let s = score_hypothesis(model, (x, y))?;
            if s > cfg.eta {
                candidates.push((s, x, y));
            }
        }
    }
    // total order: score descending, then scan order, so ties are stable
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.2.cmp(&b.2))
            .then(a.1.cmp(&b.1))
    });

    let (bw, bh) = cfg.box_size;
    let mut kept: Vec<Detection> = Vec::new();
    'cand: for (score, x, y) in candidates {
        let box_ = BoundingBox::centered(x as f64, y as f64, bw, bh);
        for k in &kept {
            if iou(&k.box_, &box_) > cfg.nms_iou {
                continue 'cand;
            }
        }
        kept.push(Detection { frame, box_, score });
    }
    Ok(kept)
}

// --- JSON descriptor ---------------------------------------------------------

#[derive(Deserialize)]
struct PartDescriptor {
    anchor: (i64, i64),
    coeffs: [f64; 4],
    response: String,
}

#[derive(Deserialize)]
struct ModelDescriptor {
    bias: f64,
    search_radius: i64,
    root_response: String,
    #[serde(default)]
    parts: Vec<PartDescriptor>,
    /// Optional linear remap of PGM levels: 0 -> lo, 255 -> hi.
    #[serde(default)]
    response_range: Option<(f64, f64)>,
}

fn remap(grid: &mut ImageGrid, range: Option<(f64, f64)>) {
    if let Some((lo, hi)) = range {
        for v in grid.values_mut() {
            *v = lo + (*v / 255.0) * (hi - lo);
        }
    }
}

/// Loads a part model from a JSON descriptor; response grid paths are
/// resolved relative to the descriptor's directory.
pub fn load_part_model(path: &Path) -> Result<PartModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let desc: ModelDescriptor = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));

    let mut root_response = read_pgm(&dir.join(&desc.root_response))?;
    remap(&mut root_response, desc.response_range);
    let mut parts = Vec::with_capacity(desc.parts.len());
    for p in desc.parts {
        let mut response = read_pgm(&dir.join(&p.response))?;
        remap(&mut response, desc.response_range);
        parts.push(Part {
            response,
            anchor: p.anchor,
            coeffs: p.coeffs,
        });
    }
    let model = PartModel {
        root_response,
        parts,
        search_radius: desc.search_radius,
        bias: desc.bias,
    };
    model.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize, vals: &[f64]) -> ImageGrid {
        ImageGrid::from_values(w, h, vals.to_vec()).unwrap()
    }

    fn root_only(response: ImageGrid, bias: f64) -> PartModel {
        PartModel {
            root_response: response,
            parts: vec![],
            search_radius: 0,
            bias,
        }
    }

    /// Joint brute force over every combination of part placements; the
    /// production path maximizes per part independently, so the two must
    /// agree on models where parts are independent given the root.
    fn brute_force_score(model: &PartModel, root: (i64, i64)) -> f64 {
        let r = model.search_radius;
        // placement options per part: (value) or absent when none valid
        let mut options: Vec<Vec<f64>> = Vec::new();
        for part in &model.parts {
            let mut opts = Vec::new();
            for dy in -r..=r {
                for dx in -r..=r {
                    let px = root.0 + part.anchor.0 + dx;
                    let py = root.1 + part.anchor.1 + dy;
                    if part.response.in_bounds(px, py) {
                        opts.push(
                            part.response.get(px as usize, py as usize)
                                - deformation_cost(&part.coeffs, (dx as f64, dy as f64)),
                        );
                    }
                }
            }
            if opts.is_empty() {
                opts.push(0.0);
            }
            options.push(opts);
        }
        let base = model.root_response.get(root.0 as usize, root.1 as usize) + model.bias;
        let mut best = f64::NEG_INFINITY;
        let mut combo = vec![0usize; options.len()];
        loop {
            let total: f64 = base
                + combo
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| options[i][c])
                    .sum::<f64>();
            if total > best {
                best = total;
            }
            // next combination
            let mut i = 0;
            loop {
                if i == combo.len() {
                    return best;
                }
                combo[i] += 1;
                if combo[i] < options[i].len() {
                    break;
                }
                combo[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn deformation_cost_examples() {
        assert_eq!(deformation_cost(&[1.0, 0.0, 1.0, 0.0], (0.0, 0.0)), 0.0);
        assert_eq!(deformation_cost(&[1.0, 0.0, 1.0, 0.0], (2.0, 1.0)), 5.0);
        let v = deformation_cost(&[0.1, 0.0, 0.1, 0.0], (3.0, 4.0));
        assert!((v - 2.5).abs() < 1e-12);
        // linear terms can go negative; the clamp holds the cost at zero
        assert_eq!(deformation_cost(&[0.0, 1.0, 0.0, 0.0], (-3.0, 0.0)), 0.0);
    }

    #[test]
    fn score_root_only_model() {
        let model = root_only(grid(3, 3, &[0.0, 0.0, 0.0, 0.0, 1.4, 0.0, 0.0, 0.0, 0.0]), -0.5);
        let s = score_hypothesis(&model, (1, 1)).unwrap();
        assert!((s - 0.9).abs() < 1e-12);
        assert!(score_hypothesis(&model, (3, 1)).is_err());
        assert!(score_hypothesis(&model, (-1, 0)).is_err());
    }

    #[test]
    fn score_forced_placement() {
        // one part, radius 0, anchor (1, 0): placement forced onto the anchor
        let mut part_resp = ImageGrid::new(3, 1);
        part_resp.set(2, 0, 0.5);
        let model = PartModel {
            root_response: grid(3, 1, &[0.0, 1.0, 0.0]),
            parts: vec![Part {
                response: part_resp,
                anchor: (1, 0),
                coeffs: [1.0, 0.0, 1.0, 0.0],
            }],
            search_radius: 0,
            bias: 0.0,
        };
        let s = score_hypothesis(&model, (1, 0)).unwrap();
        assert!((s - 1.5).abs() < 1e-12);
    }

    #[test]
    fn score_matches_brute_force_on_fixture() {
        // radius-1 fixture: exhaustive search over the <= 9 placements
        let part_resp = grid(
            4,
            4,
            &[
                0.1, 0.9, -0.2, 0.3, //
                0.4, 0.2, 0.8, -0.1, //
                -0.5, 0.6, 0.05, 0.7, //
                0.2, -0.3, 0.4, 0.1,
            ],
        );
        let model = PartModel {
            root_response: grid(4, 4, &[0.0; 16]),
            parts: vec![Part {
                response: part_resp,
                anchor: (1, 1),
                coeffs: [0.25, 0.0, 0.25, 0.125],
            }],
            search_radius: 1,
            bias: 0.25,
        };
        for y in 0..4 {
            for x in 0..4 {
                let got = score_hypothesis(&model, (x, y)).unwrap();
                let want = brute_force_score(&model, (x, y));
                assert_eq!(got, want, "mismatch at ({x},{y})");
            }
        }
    }

    #[test]
    fn part_with_no_valid_placement_contributes_zero() {
        let model = PartModel {
            root_response: grid(2, 1, &[1.0, 1.0]),
            parts: vec![Part {
                response: grid(2, 1, &[5.0, 5.0]),
                anchor: (10, 10), // far outside for every root
                coeffs: [0.0, 0.0, 0.0, 0.0],
            }],
            search_radius: 1,
            bias: 0.5,
        };
        assert_eq!(score_hypothesis(&model, (0, 0)).unwrap(), 1.5);
    }

    #[test]
    fn detect_empty_when_below_threshold() {
        let model = root_only(grid(4, 4, &[-2.0; 16]), 0.0);
        let cfg = DetectorConfig {
            eta: -1.0,
            nms_iou: 0.5,
            box_size: (2.0, 2.0),
        };
        assert!(detect_frame(&model, &cfg, 0).unwrap().is_empty());
    }

    #[test]
    fn detect_single_peak() {
        let mut resp = ImageGrid::filled(8, 8, -2.0);
        resp.set(4, 3, 1.0);
        let model = root_only(resp, 0.0);
        let cfg = DetectorConfig {
            eta: 0.0,
            nms_iou: 0.5,
            box_size: (4.0, 4.0),
        };
        let dets = detect_frame(&model, &cfg, 7).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].frame, 7);
        assert_eq!(dets[0].box_.center(), (4.0, 3.0));
    }

    #[test]
    fn nms_suppresses_overlapping_lower_peak() {
        // two peaks 1 px apart: 10x10 boxes overlap with IoU 9/11 > 0.5
        let mut resp = ImageGrid::filled(12, 12, -2.0);
        resp.set(5, 5, 2.0);
        resp.set(6, 5, 1.5);
        resp.set(1, 1, 1.0); // far peak survives
        let model = root_only(resp, 0.0);
        let cfg = DetectorConfig {
            eta: 0.0,
            nms_iou: 0.5,
            box_size: (10.0, 10.0),
        };
        let dets = detect_frame(&model, &cfg, 0).unwrap();
        assert_eq!(dets.len(), 2);
        assert_eq!(dets[0].box_.center(), (5.0, 5.0));
        assert_eq!(dets[1].box_.center(), (1.0, 1.0));
        // descending score order
        assert!(dets[0].score > dets[1].score);
    }

    #[test]
    fn threshold_monotonicity() {
        let mut resp = ImageGrid::filled(16, 16, -3.0);
        for &(x, y, v) in &[
            (2, 2, 0.5),
            (9, 2, 0.1),
            (2, 9, -0.4),
            (9, 9, -0.9),
            (13, 13, -1.4),
        ] {
            resp.set(x, y, v);
        }
        let model = root_only(resp, 0.0);
        let mut last = usize::MAX;
        let mut last_raw: Option<Vec<Detection>> = None;
        for eta in [-2.0, -1.0, -0.5, 0.0, 0.4] {
            let cfg = DetectorConfig {
                eta,
                nms_iou: 0.5,
                box_size: (4.0, 4.0),
            };
            let n = detect_frame(&model, &cfg, 0).unwrap().len();
            assert!(n <= last, "post-NMS count must not grow as eta rises");
            last = n;

            // nms_iou = 1 disables suppression, exposing the raw threshold
            // set: raising eta must only shrink it
            let raw = detect_frame(
                &model,
                &DetectorConfig {
                    eta,
                    nms_iou: 1.0,
                    box_size: (4.0, 4.0),
                },
                0,
            )
            .unwrap();
            if let Some(prev) = &last_raw {
                for d in &raw {
                    assert!(
                        prev.iter().any(|p| p.box_ == d.box_),
                        "raw detection set must be nested under a lower eta"
                    );
                }
            }
            last_raw = Some(raw);
        }
    }

    #[test]
    fn bias_shift_moves_scores_uniformly() {
        let resp = grid(3, 3, &[0.3, -0.7, 0.1, 0.9, -0.2, 0.4, 0.0, 0.6, -0.5]);
        let base = root_only(resp.clone(), 0.0);
        let shifted = root_only(resp, 0.75);
        let cfg = DetectorConfig {
            eta: -10.0,
            nms_iou: 0.5,
            box_size: (1.0, 1.0),
        };
        let a = detect_frame(&base, &cfg, 0).unwrap();
        let b = detect_frame(&shifted, &cfg, 0).unwrap();
        assert_eq!(a.len(), b.len());
        for (d0, d1) in a.iter().zip(&b) {
            assert_eq!(d0.box_, d1.box_, "ranking must be unchanged");
            assert!((d1.score - d0.score - 0.75).abs() < 1e-12);
        }
    }
}
