//! Detection-window refinement by graph-cut segmentation with a level-set
//! shape prior.
//!
//! Each detection window is processed independently: an intensity model is
//! learned from the window itself (template interior seeds the object
//! distribution, the window border ring seeds the background), a binary
//! labeling is found as the exact minimum of a submodular energy via s-t min
//! cut, and the detection survives only if the segmented mask resembles the
//! vehicle template.
//!
//! The energy over a labeling `L` is
//!
//! ```text
//! E(L) = lr * sum_p D_p(l_p)
//!      + lb * sum_{(i,j) in N, l_i != l_j} V_ij
//!      + ls * sum_{(i,j) in N, l_i != l_j} phi((pos_i + pos_j) / 2)
//! ```
//!
//! with `D_p(1) = -log P(I_p | obj)`, `D_p(0) = -log P(I_p | back)`,
//! `V_ij = exp(-(I_i - I_j)^2 / (2 a^2)) / dis(i, j)`, and `phi` the unsigned
//! distance field of the template (zero on the template silhouette). All
//! pairwise costs are nonnegative and charged only across label
//! discontinuities, so the min cut is the exact global minimizer.

mod maxflow;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::ImageGrid;
use crate::io::read_pgm;
use crate::types::{round_half_up, Detection};
use crate::{Error, Result};

use maxflow::FlowGraph;

/// Binary vehicle mask plus its unsigned Euclidean distance field.
#[derive(Debug, Clone)]
pub struct ShapeTemplate {
    /// 0/1 grid, 1 = vehicle foreground.
    pub mask: ImageGrid,
    /// Distance to the nearest foreground pixel; zero on the silhouette.
    pub phi: ImageGrid,
    /// Part this silhouette belongs to.
    pub part_id: u32,
}

impl ShapeTemplate {
    /// Builds a template from a binary mask (any nonzero value is
    /// foreground), computing the distance field.
    pub fn from_mask(mask: ImageGrid, part_id: u32) -> Result<Self> {
        let mask = binarize(&mask);
        let phi = distance_field(&mask)?;
        Ok(ShapeTemplate { mask, phi, part_id })
    }

    /// Resamples the mask to `w x h` (nearest neighbor) and recomputes the
    /// distance field. The field is never resampled directly: that would
    /// break the zero-level-set semantics.
    pub fn scale_to(&self, w: usize, h: usize) -> Result<ShapeTemplate> {
        if w == 0 || h == 0 {
            return Err(Error::InvalidInput("cannot scale template to zero size".into()));
        }
        let mut mask = ImageGrid::new(w, h);
        for y in 0..h {
            let sy = y * self.mask.height / h;
            for x in 0..w {
                let sx = x * self.mask.width / w;
                mask.set(x, y, self.mask.get(sx, sy));
            }
        }
        ShapeTemplate::from_mask(mask, self.part_id)
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.values().iter().filter(|&&v| v != 0.0).count()
    }

    fn aspect_ratio(&self) -> f64 {
        self.mask.width as f64 / self.mask.height as f64
    }
}

fn binarize(mask: &ImageGrid) -> ImageGrid {
    let values = mask
        .values()
        .iter()
        .map(|&v| if v != 0.0 { 1.0 } else { 0.0 })
        .collect();
    ImageGrid::from_values(mask.width, mask.height, values).expect("same dims")
}

/// Exact Euclidean distance transform: distance from every pixel to the
/// nearest foreground pixel (zero on the foreground itself).
pub fn distance_field(mask: &ImageGrid) -> Result<ImageGrid> {
    if !mask.values().iter().any(|&v| v != 0.0) {
        return Err(Error::InvalidInput("empty template".into()));
    }
    const FAR: f64 = 1e20;
    let (w, h) = (mask.width, mask.height);

    // two separable passes over squared distances
    let mut colpass = vec![0.0f64; w * h];
    let mut buf = Vec::with_capacity(h.max(w));
    for x in 0..w {
        buf.clear();
        buf.extend((0..h).map(|y| if mask.get(x, y) != 0.0 { 0.0 } else { FAR }));
        let d = squared_dt_1d(&buf);
        for y in 0..h {
            colpass[y * w + x] = d[y];
        }
    }
    let mut out = ImageGrid::new(w, h);
    for y in 0..h {
        buf.clear();
        buf.extend((0..w).map(|x| colpass[y * w + x]));
        let d = squared_dt_1d(&buf);
        for x in 0..w {
            out.set(x, y, d[x].sqrt());
        }
    }
    Ok(out)
}

/// 1-D squared-distance transform by lower envelope of parabolas.
fn squared_dt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    if n == 1 {
        return vec![f[0]];
    }
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = intersect(f, q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(f, q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        d[q] = dq * dq + f[v[k]];
    }
    d
}

#[inline]
fn intersect(f: &[f64], q: usize, p: usize) -> f64 {
    let (qf, pf) = (q as f64, p as f64);
    ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
}

/// Smoothed per-intensity likelihoods for object and background.
#[derive(Debug, Clone)]
pub struct IntensityModel {
    pub obj_hist: Vec<f64>,
    pub back_hist: Vec<f64>,
}

#[inline]
pub fn intensity_bin(v: f64) -> usize {
    round_half_up(v).clamp(0.0, 255.0) as usize
}

impl IntensityModel {
    #[inline]
    pub fn log_obj(&self, intensity: f64) -> f64 {
        self.obj_hist[intensity_bin(intensity)].ln()
    }

    #[inline]
    pub fn log_back(&self, intensity: f64) -> f64 {
        self.back_hist[intensity_bin(intensity)].ln()
    }
}

fn smoothed_hist(counts: &[u64; 256]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let denom = (total + 256) as f64;
    counts.iter().map(|&c| (c + 1) as f64 / denom).collect()
}

/// Learns the intensity model for one window: object pixels are those under
/// the template mask, background pixels come from the 2-pixel border ring.
/// Both histograms are add-one smoothed and normalized.
pub fn learn_intensity_model(window: &ImageGrid, template: &ShapeTemplate) -> IntensityModel {
    assert_eq!(
        (window.width, window.height),
        (template.mask.width, template.mask.height),
        "window and template dimensions must match"
    );
    let mut obj = [0u64; 256];
    let mut back = [0u64; 256];
    let (w, h) = (window.width, window.height);
    for y in 0..h {
        for x in 0..w {
            let bin = intensity_bin(window.get(x, y));
            if template.mask.get(x, y) != 0.0 {
                obj[bin] += 1;
            }
            let ring = x < 2 || y < 2 || x + 2 >= w || y + 2 >= h;
            if ring {
                back[bin] += 1;
            }
        }
    }
    IntensityModel {
        obj_hist: smoothed_hist(&obj),
        back_hist: smoothed_hist(&back),
    }
}

/// Pixel neighborhood system for pairwise terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Neighborhood {
    #[default]
    Four,
    Eight,
}

/// Segmentation term weights and acceptance thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    /// Camera-noise scale in the boundary term.
    pub alpha: f64,
    pub lambda_region: f64,
    pub lambda_boundary: f64,
    pub lambda_shape: f64,
    /// Minimum mask/template overlap for a detection to survive.
    pub accept_overlap: f64,
    /// Accepted range of window foreground fraction, rejecting degenerate
    /// all-foreground / all-background cuts.
    pub fg_fraction_bounds: (f64, f64),
    /// Background context added around a detection box when cropping its
    /// window, as a fraction of the box extent per side. Tight boxes need
    /// the margin so the border ring actually samples background.
    pub context_margin: f64,
    pub neighborhood: Neighborhood,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            alpha: 10.0,
            lambda_region: 1.0,
            lambda_boundary: 1.0,
            lambda_shape: 1.0,
            accept_overlap: 0.5,
            fg_fraction_bounds: (0.2, 0.9),
            context_margin: 0.3,
            neighborhood: Neighborhood::Four,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha <= 0.0 {
            return Err(Error::Config("alpha must be positive".into()));
        }
        if self.lambda_region < 0.0 || self.lambda_boundary < 0.0 || self.lambda_shape < 0.0 {
            return Err(Error::Config("term weights must be nonnegative".into()));
        }
        let (lo, hi) = self.fg_fraction_bounds;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Config(format!(
                "fg_fraction_bounds must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"
            )));
        }
        if self.context_margin < 0.0 {
            return Err(Error::Config("context_margin must be nonnegative".into()));
        }
        if !(0.0 < self.accept_overlap && self.accept_overlap < 1.0) {
            return Err(Error::Config("accept_overlap must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Binary pixel labeling over a detection window (true = object).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    pub width: usize,
    pub height: usize,
    fg: Vec<bool>,
}

impl Labeling {
    pub fn new(width: usize, height: usize) -> Self {
        Labeling {
            width,
            height,
            fg: vec![false; width * height],
        }
    }

    pub fn from_fg(width: usize, height: usize, fg: Vec<bool>) -> Self {
        assert_eq!(fg.len(), width * height);
        Labeling { width, height, fg }
    }

    #[inline]
    pub fn is_fg(&self, x: usize, y: usize) -> bool {
        self.fg[y * self.width + x]
    }

    #[inline]
    pub fn set_fg(&mut self, x: usize, y: usize, v: bool) {
        self.fg[y * self.width + x] = v;
    }

    pub fn fg_fraction(&self) -> f64 {
        if self.fg.is_empty() {
            return 0.0;
        }
        self.fg.iter().filter(|&&b| b).count() as f64 / self.fg.len() as f64
    }

    /// Pixelwise IoU between this labeling and a 0/1 mask grid.
    pub fn mask_overlap(&self, mask: &ImageGrid) -> f64 {
        assert_eq!((self.width, self.height), (mask.width, mask.height));
        let mut inter = 0usize;
        let mut union = 0usize;
        for y in 0..self.height {
            for x in 0..self.width {
                let a = self.is_fg(x, y);
                let b = mask.get(x, y) != 0.0;
                if a && b {
                    inter += 1;
                }
                if a || b {
                    union += 1;
                }
            }
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// 0/255 grid for PGM inspection dumps.
    pub fn to_grid(&self) -> ImageGrid {
        let values = self.fg.iter().map(|&b| if b { 255.0 } else { 0.0 }).collect();
        ImageGrid::from_values(self.width, self.height, values).expect("same dims")
    }
}

fn neighbor_offsets(n: Neighborhood) -> &'static [(i64, i64)] {
    match n {
        // right and down cover each unordered 4-neighbor pair once
        Neighborhood::Four => &[(1, 0), (0, 1)],
        Neighborhood::Eight => &[(1, 0), (0, 1), (1, 1), (1, -1)],
    }
}

#[inline]
fn boundary_term(ii: f64, ij: f64, alpha: f64, dis: f64) -> f64 {
    let d = ii - ij;
    (-(d * d) / (2.0 * alpha * alpha)).exp() / dis
}

/// Pairwise edge weight across a label discontinuity between pixels `i`
/// and `j`: weighted boundary term plus weighted shape term at the midpoint.
fn pairwise_cost(
    window: &ImageGrid,
    template: &ShapeTemplate,
    cfg: &SegmentationConfig,
    (xi, yi): (usize, usize),
    (xj, yj): (usize, usize),
) -> f64 {
    let dis = (((xi as f64 - xj as f64).powi(2)) + ((yi as f64 - yj as f64).powi(2))).sqrt();
    let v = boundary_term(window.get(xi, yi), window.get(xj, yj), cfg.alpha, dis);
    let mid_x = (xi as f64 + xj as f64) / 2.0;
    let mid_y = (yi as f64 + yj as f64) / 2.0;
    let phi_mid = template.phi.sample_bilinear(mid_x, mid_y);
    cfg.lambda_boundary * v + cfg.lambda_shape * phi_mid
}

/// Total energy of a labeling. Region costs apply per pixel; boundary and
/// shape costs apply only across label discontinuities.
pub fn energy(
    labeling: &Labeling,
    window: &ImageGrid,
    model: &IntensityModel,
    template: &ShapeTemplate,
    cfg: &SegmentationConfig,
) -> f64 {
    assert_eq!((labeling.width, labeling.height), (window.width, window.height));
    assert_eq!((window.width, window.height), (template.mask.width, template.mask.height));
    let (w, h) = (window.width, window.height);

    let mut region = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = window.get(x, y);
            region += if labeling.is_fg(x, y) {
                -model.log_obj(i)
            } else {
                -model.log_back(i)
            };
        }
    }

    let mut pairwise = 0.0;
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            for &(dx, dy) in neighbor_offsets(cfg.neighborhood) {
                let (nx, ny) = (x + dx, y + dy);
                if !window.in_bounds(nx, ny) {
                    continue;
                }
                let li = labeling.is_fg(x as usize, y as usize);
                let lj = labeling.is_fg(nx as usize, ny as usize);
                if li != lj {
                    pairwise += pairwise_cost(
                        window,
                        template,
                        cfg,
                        (x as usize, y as usize),
                        (nx as usize, ny as usize),
                    );
                }
            }
        }
    }

    cfg.lambda_region * region + pairwise
}

/// Globally minimizes the segmentation energy by s-t min cut.
///
/// Terminal edges carry the region costs, neighbor edges the pairwise
/// costs; because pairwise costs are nonnegative and charged only across
/// disagreeing labels, the cut value equals the energy and the minimum cut
/// is the exact minimizer.
pub fn segment(
    window: &ImageGrid,
    model: &IntensityModel,
    template: &ShapeTemplate,
    cfg: &SegmentationConfig,
) -> Labeling {
    assert_eq!((window.width, window.height), (template.mask.width, template.mask.height));
    let (w, h) = (window.width, window.height);
    let n = w * h;
    let (source, sink) = (n, n + 1);
    let mut graph = FlowGraph::new(n + 2);

    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let i = window.get(x, y);
            // cut s->p when p is labeled background, p->t when foreground
            graph.add_edge(source, p, cfg.lambda_region * -model.log_back(i), 0.0);
            graph.add_edge(p, sink, cfg.lambda_region * -model.log_obj(i), 0.0);
        }
    }
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            for &(dx, dy) in neighbor_offsets(cfg.neighborhood) {
                let (nx, ny) = (x + dx, y + dy);
                if !window.in_bounds(nx, ny) {
                    continue;
                }
                let cost = pairwise_cost(
                    window,
                    template,
                    cfg,
                    (x as usize, y as usize),
                    (nx as usize, ny as usize),
                );
                let i = (y as usize) * w + x as usize;
                let j = (ny as usize) * w + nx as usize;
                graph.add_edge(i, j, cost, cost);
            }
        }
    }

    graph.max_flow(source, sink);
    let side = graph.source_side(source);
    let mut labeling = Labeling::new(w, h);
    for p in 0..n {
        if side[p] {
            labeling.fg[p] = true;
        }
    }
    labeling
}

/// Outcome of refining a single detection window.
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub kept: bool,
    /// Mask/template overlap.
    pub rho: f64,
    pub fg_fraction: f64,
    pub labeling: Labeling,
    /// Window rectangle in frame pixels: (x0, y0, w, h).
    pub window: (usize, usize, usize, usize),
}

/// Rasterizes a real-valued rectangle to an integer window clipped to the
/// frame.
fn raster_window(
    frame: &ImageGrid,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
) -> Option<(usize, usize, usize, usize)> {
    let x0 = round_half_up(x).max(0.0) as usize;
    let y0 = round_half_up(y).max(0.0) as usize;
    let x1 = (round_half_up(x + w).max(0.0) as usize).min(frame.width);
    let y1 = (round_half_up(y + h).max(0.0) as usize).min(frame.height);
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    Some((x0, y0, x1 - x0, y1 - y0))
}

/// Segments one detection window and applies the acceptance rule.
///
/// The window is the detection box grown by the configured context margin;
/// the template mask is scaled to the detection box itself and padded with
/// background out to the window, so the border ring samples actual
/// background even for tight boxes.
pub fn refine_one(
    frame: &ImageGrid,
    det: &Detection,
    template: &ShapeTemplate,
    cfg: &SegmentationConfig,
) -> Result<Option<RefineOutcome>> {
    let b = &det.box_;
    let mx = b.w * cfg.context_margin;
    let my = b.h * cfg.context_margin;
    let Some((wx0, wy0, ww, wh)) =
        raster_window(frame, b.x - mx, b.y - my, b.w + 2.0 * mx, b.h + 2.0 * my)
    else {
        return Ok(None);
    };
    let Some((bx0, by0, bw, bh)) = raster_window(frame, b.x, b.y, b.w, b.h) else {
        return Ok(None);
    };

    let window = frame.crop(wx0, wy0, ww, wh)?;
    let scaled = match template.scale_to(bw, bh) {
        Ok(t) => t,
        // silhouette vanished at this scale: nothing to match against
        Err(_) => return Ok(None),
    };
    // pad the tight mask into the context window and rebuild the field
    let mut padded = ImageGrid::new(ww, wh);
    for y in 0..bh {
        for x in 0..bw {
            if scaled.mask.get(x, y) != 0.0 {
                padded.set(x + (bx0 - wx0), y + (by0 - wy0), 1.0);
            }
        }
    }
    let placed = match ShapeTemplate::from_mask(padded, template.part_id) {
        Ok(t) => t,
        Err(_) => return Ok(None),
    };

    let model = learn_intensity_model(&window, &placed);
    let labeling = segment(&window, &model, &placed, cfg);
    let rho = labeling.mask_overlap(&placed.mask);
    let fg_fraction = labeling.fg_fraction();
    let (lo, hi) = cfg.fg_fraction_bounds;
    let kept = rho >= cfg.accept_overlap && fg_fraction >= lo && fg_fraction <= hi;
    Ok(Some(RefineOutcome {
        kept,
        rho,
        fg_fraction,
        labeling,
        window: (wx0, wy0, ww, wh),
    }))
}

/// Shape templates keyed by part id.
#[derive(Debug, Default)]
pub struct TemplateStore {
    templates: BTreeMap<u32, ShapeTemplate>,
}

impl TemplateStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, template: ShapeTemplate) {
        self.templates.insert(template.part_id, template);
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn get(&self, part_id: u32) -> Result<&ShapeTemplate> {
        self.templates
            .get(&part_id)
            .ok_or(Error::MissingTemplate(part_id))
    }

    /// Template for a detection: the part's own template when the part id is
    /// known, otherwise the template whose aspect ratio is closest to the
    /// detection box.
    pub fn select(&self, part_id: Option<u32>, box_aspect: f64) -> Result<&ShapeTemplate> {
        if let Some(id) = part_id {
            return self.get(id);
        }
        self.templates
            .values()
            .min_by(|a, b| {
                let da = (a.aspect_ratio().ln() - box_aspect.ln()).abs();
                let db = (b.aspect_ratio().ln() - box_aspect.ln()).abs();
                da.partial_cmp(&db)
                    .unwrap()
                    .then(a.part_id.cmp(&b.part_id))
            })
            .ok_or_else(|| Error::Config("template store is empty".into()))
    }

    /// Loads `templates.json` (a map of part id to PGM path) from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = dir.join("templates.json");
        let text = std::fs::read_to_string(&manifest)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", manifest.display())))?;
        let entries: BTreeMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", manifest.display())))?;
        let mut store = TemplateStore::new();
        for (key, rel) in entries {
            let part_id: u32 = key
                .parse()
                .map_err(|_| Error::Config(format!("bad part id {key:?} in templates.json")))?;
            let mask = read_pgm(&dir.join(&rel))?;
            let template = ShapeTemplate::from_mask(binarize_pgm(&mask), part_id)?;
            store.insert(template);
        }
        Ok(store)
    }
}

/// PGM masks store foreground as bright pixels.
fn binarize_pgm(grid: &ImageGrid) -> ImageGrid {
    let values = grid
        .values()
        .iter()
        .map(|&v| if v > 127.0 { 1.0 } else { 0.0 })
        .collect();
    ImageGrid::from_values(grid.width, grid.height, values).expect("same dims")
}

/// Refines a batch of detections against `store`, keeping survivor order.
/// `part_ids` aligns with `detections`; `None` falls back to aspect-ratio
/// template selection.
pub fn refine_detections(
    frame: &ImageGrid,
    detections: &[Detection],
    part_ids: &[Option<u32>],
    store: &TemplateStore,
    cfg: &SegmentationConfig,
) -> Result<Vec<Detection>> {
    assert_eq!(detections.len(), part_ids.len());
    cfg.validate()?;
    let mut kept = Vec::new();
    for (det, &pid) in detections.iter().zip(part_ids) {
        let template = store.select(pid, det.box_.w / det.box_.h)?;
        if let Some(outcome) = refine_one(frame, det, template, cfg)? {
            if outcome.kept {
                kept.push(*det);
            }
        }
    }
    Ok(kept)
}
