//! Multi-frame pixel super-resolution: build the sparse Gaussian
//! weighting matrix relating the high-sampling-rate image to the stack of
//! shifted low-sampling-rate frames, and solve the resulting linear
//! system.
//!
//! Every low-res sample is placed at its continuous position on the
//! high-res grid; nearby integer grid points receive weights that fall off
//! as a Gaussian of the Euclidean pixel distance. Rows are normalized to
//! unit sum after the Gaussian evaluation so the intensity scale of the
//! solve does not depend on the kernel width or the local sample
//! geometry; the raw (pre-normalization) weights stay available for
//! inspection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::optics::{LowResStack, ShiftVector};

/// Low-res dimensions and the integer magnification factors of the
/// high-res grid: HR is (l1*n1) x (l2*n2) (x-first).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    /// Low-res width (pixels).
    pub n1: usize,
    /// Low-res height (pixels).
    pub n2: usize,
    /// Horizontal magnification factor.
    pub l1: usize,
    /// Vertical magnification factor.
    pub l2: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.l1 == 0 || self.l2 == 0 {
            return Err(Error::InvalidArgument("grid dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn hr_width(&self) -> usize {
        self.n1 * self.l1
    }

    pub fn hr_height(&self) -> usize {
        self.n2 * self.l2
    }

    pub fn lr_pixels(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn hr_pixels(&self) -> usize {
        self.hr_width() * self.hr_height()
    }

    /// Count the distinct shift phases available per axis and warn when a
    /// magnification factor exceeds them (the system is then badly
    /// underdetermined and leans on the regularizer). Returns
    /// (distinct x phases, distinct y phases).
    pub fn phase_support(&self, shifts: &[ShiftVector], tol: f64) -> (usize, usize) {
        let mut xs: Vec<f64> = shifts.iter().map(|s| s.dx.rem_euclid(1.0)).collect();
        let mut ys: Vec<f64> = shifts.iter().map(|s| s.dy.rem_euclid(1.0)).collect();
        let count_distinct = |v: &mut Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut n = 0;
            let mut last = f64::NEG_INFINITY;
            for &x in v.iter() {
                if x - last > tol {
                    n += 1;
                    last = x;
                }
            }
            n
        };
        (count_distinct(&mut xs), count_distinct(&mut ys))
    }
}

/// Solver and weighting parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    /// Gaussian standard deviation parameter, in (0, 1]. The effective
    /// kernel variance on the high-res grid is l1*l2*sigma^2.
    pub sigma: f64,
    /// Neighborhood cutoff in high-res pixels; weights beyond it are
    /// dropped. `None` selects 3 * sigma * sqrt(l1*l2).
    pub truncation_radius: Option<f64>,
    /// Tikhonov coefficient; `None` selects 1e-3 times the mean row sum
    /// of P^T P.
    pub lambda_reg: Option<f64>,
    /// Relative residual at which conjugate gradients stops.
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            truncation_radius: None,
            lambda_reg: None,
            cg_tolerance: 1e-8,
            cg_max_iterations: 2000,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::InvalidArgument("sigma must lie in (0, 1]".into()));
        }
        if let Some(r) = self.truncation_radius {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument("truncation radius must be positive".into()));
            }
        }
        if let Some(l) = self.lambda_reg {
            if l < 0.0 {
                return Err(Error::InvalidArgument("lambda must be >= 0".into()));
            }
        }
        if !(self.cg_tolerance > 0.0) || self.cg_max_iterations == 0 {
            return Err(Error::InvalidArgument("invalid CG settings".into()));
        }
        Ok(())
    }

    pub fn effective_radius(&self, grid: &GridSpec) -> f64 {
        self.truncation_radius
            .unwrap_or_else(|| 3.0 * self.sigma * ((grid.l1 * grid.l2) as f64).sqrt())
    }
}

/// The weighting matrix in compressed sparse row form. Stored weights are
/// the raw Gaussian values; row sums are kept separately and applied on
/// the fly, so the matrix acts as its row-normalized version.
#[derive(Debug, Clone)]
pub struct SparseWeightMatrix {
    grid: GridSpec,
    frames: usize,
    sigma: f64,
    truncation_radius: f64,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    raw_weights: Vec<f64>,
    row_sums: Vec<f64>,
}

impl SparseWeightMatrix {
    pub fn rows(&self) -> usize {
        self.frames * self.grid.lr_pixels()
    }

    pub fn cols(&self) -> usize {
        self.grid.hr_pixels()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn grid(&self) -> &GridSpec {
        self.grid_ref()
    }

    fn grid_ref(&self) -> &GridSpec {
        &self.grid
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    pub fn entry_count(&self) -> usize {
        self.raw_weights.len()
    }

    /// Raw (pre-normalization) entries of one row as (column, weight).
    pub fn row_entries(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.raw_weights[span])
            .map(|(&c, &w)| (c as usize, w))
    }

    pub fn row_sum(&self, row: usize) -> f64 {
        self.row_sums[row]
    }

    /// y = P_normalized * x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols());
        debug_assert_eq!(y.len(), self.rows());
        for row in 0..self.rows() {
            let mut acc = 0.0;
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.raw_weights[idx] * x[self.cols[idx] as usize];
            }
            y[row] = acc / self.row_sums[row];
        }
    }

    /// x = P_normalized^T * y.
    pub fn apply_transpose(&self, y: &[f64], x: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows());
        debug_assert_eq!(x.len(), self.cols());
        x.fill(0.0);
        for row in 0..self.rows() {
            let scaled = y[row] / self.row_sums[row];
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                x[self.cols[idx] as usize] += self.raw_weights[idx] * scaled;
            }
        }
    }
}

/// Continuous high-res coordinates of every low-res pixel of every frame.
///
/// LR pixel (u, v) of the frame with shift (dx, dy) lands at
/// ((u + dx) * l1 + (l1-1)/2, (v + dy) * l2 + (l2-1)/2): the center-of-bin
/// convention that aligns each LR sample with the centroid of its l1 x l2
/// block. The shifts are the displacement that carries frame coordinates
/// onto the reference grid (the negative of the registration estimate).
pub fn map_lr_to_grid(shifts: &[ShiftVector], grid: &GridSpec) -> Vec<Vec<(f64, f64)>> {
    let l1 = grid.l1 as f64;
    let l2 = grid.l2 as f64;
    shifts
        .iter()
        .map(|s| {
            let mut coords = Vec::with_capacity(grid.lr_pixels());
            for v in 0..grid.n2 {
                for u in 0..grid.n1 {
                    coords.push((
                        (u as f64 + s.dx) * l1 + (l1 - 1.0) / 2.0,
                        (v as f64 + s.dy) * l2 + (l2 - 1.0) / 2.0,
                    ));
                }
            }
            coords
        })
        .collect()
}

/// Evaluate the Gaussian weight for a squared distance on the high-res
/// grid: exp(-d^2 / (2 * l1 * l2 * sigma^2)).
#[inline]
fn gaussian_weight(d2: f64, grid: &GridSpec, sigma: f64) -> f64 {
    (-d2 / (2.0 * (grid.l1 * grid.l2) as f64 * sigma * sigma)).exp()
}

/// Build the sparse weighting matrix for the given per-frame shifts.
pub fn build_weight_matrix(
    shifts: &[ShiftVector],
    grid: &GridSpec,
    opts: &SolveOptions,
) -> Result<SparseWeightMatrix> {
    grid.validate()?;
    opts.validate()?;
    if shifts.is_empty() {
        return Err(Error::InvalidArgument("at least one frame is required".into()));
    }
    if let Some(bad) = shifts.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite shift {bad:?}")));
    }

    let radius = opts.effective_radius(grid);
    let r2 = radius * radius;
    let hr_w = grid.hr_width();
    let hr_h = grid.hr_height();
    let rows = shifts.len() * grid.lr_pixels();

    let mut row_ptr = Vec::with_capacity(rows + 1);
    row_ptr.push(0usize);
    let per_row_estimate = (std::f64::consts::PI * (radius + 1.0) * (radius + 1.0)).ceil() as usize;
    let mut cols: Vec<u32> = Vec::with_capacity(rows * per_row_estimate.min(512));
    let mut weights: Vec<f64> = Vec::with_capacity(cols.capacity());
    let mut row_sums = Vec::with_capacity(rows);

    let coords = map_lr_to_grid(shifts, grid);
    for frame_coords in &coords {
        for &(cx, cy) in frame_coords {
            let y_lo = (cy - radius).ceil().max(0.0) as usize;
            let y_hi = (cy + radius).floor().min((hr_h - 1) as f64) as usize;
            let x_lo = (cx - radius).ceil().max(0.0) as usize;
            let x_hi = (cx + radius).floor().min((hr_w - 1) as f64) as usize;
            let mut sum = 0.0;
            let start = cols.len();
            let mut y = y_lo;
            while y <= y_hi && y_hi < hr_h {
                let dy = y as f64 - cy;
                let dy2 = dy * dy;
                for x in x_lo..=x_hi {
                    let dx = x as f64 - cx;
                    let d2 = dx * dx + dy2;
                    if d2 <= r2 {
                        let w = gaussian_weight(d2, grid, opts.sigma);
                        cols.push((y * hr_w + x) as u32);
                        weights.push(w);
                        sum += w;
                    }
                }
                y += 1;
            }
            if cols.len() == start {
                return Err(Error::Internal(format!(
                    "sample at ({cx:.3}, {cy:.3}) has no grid point within radius {radius:.3}"
                )));
            }
            row_ptr.push(cols.len());
            row_sums.push(sum);
        }
    }

    Ok(SparseWeightMatrix {
        grid: *grid,
        frames: shifts.len(),
        sigma: opts.sigma,
        truncation_radius: radius,
        row_ptr,
        cols,
        raw_weights: weights,
        row_sums,
    })
}

/// Concatenate the stack into the observation vector L (frame-major, then
/// row-major within each frame) and build the matching weighting matrix.
pub fn assemble_system(
    stack: &LowResStack,
    shifts: &[ShiftVector],
    grid: &GridSpec,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SparseWeightMatrix)> {
    stack.validate()?;
    grid.validate()?;
    if stack.frames.len() != shifts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} frames but {} shifts",
            stack.frames.len(),
            shifts.len()
        )));
    }
    let (w, h) = (stack.frames[0].width(), stack.frames[0].height());
    if w != grid.n1 || h != grid.n2 {
        return Err(Error::DimensionMismatch(format!(
            "frames are {w}x{h} but the grid expects {}x{}",
            grid.n1, grid.n2
        )));
    }
    let mut l = Vec::with_capacity(stack.frames.len() * grid.lr_pixels());
    for frame in &stack.frames {
        l.extend_from_slice(frame.pixels());
    }
    let p = build_weight_matrix(shifts, grid, opts)?;
    Ok((l, p))
}

/// High-res solution plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct HighResImage {
    pub image: Image,
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub converged: bool,
    /// The Tikhonov coefficient actually used (resolved from the default
    /// rule when not set explicitly).
    pub lambda: f64,
}

/// Solve argmin_H ||P H - L||^2 + lambda ||H||^2 by conjugate gradients on
/// the regularized normal equations (P^T P + lambda I) H = P^T L.
///
/// Non-convergence within the iteration budget is reported in the
/// diagnostics, not as an error. All reductions run in a fixed order, so
/// the result is reproducible bit for bit.
pub fn solve_high_res(
    l: &[f64],
    p: &SparseWeightMatrix,
    opts: &SolveOptions,
) -> Result<HighResImage> {
    opts.validate()?;
    if l.len() != p.rows() {
        return Err(Error::DimensionMismatch(format!(
            "observation vector has {} entries, matrix has {} rows",
            l.len(),
            p.rows()
        )));
    }
    let n = p.cols();

    let lambda = match opts.lambda_reg {
        Some(l) => l,
        None => {
            // mean row sum of P^T P equals ||P * 1||^2 / cols
            let ones = vec![1.0; n];
            let mut p1 = vec![0.0; p.rows()];
            p.apply(&ones, &mut p1);
            1e-3 * p1.iter().map(|v| v * v).sum::<f64>() / n as f64
        }
    };

    // b = P^T L
    let mut b = vec![0.0; n];
    p.apply_transpose(l, &mut b);
    let b_norm = norm(&b);

    let mut x = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = true;
    let mut rel_residual = 0.0;

    if b_norm > 0.0 {
        let mut r = b.clone();
        let mut dir = r.clone();
        let mut tmp_rows = vec![0.0; p.rows()];
        let mut a_dir = vec![0.0; n];
        let mut rs_old = dot(&r, &r);
        converged = false;

        while iterations < opts.cg_max_iterations {
            iterations += 1;
            // a_dir = (P^T P + lambda I) dir
            p.apply(&dir, &mut tmp_rows);
            p.apply_transpose(&tmp_rows, &mut a_dir);
            for i in 0..n {
                a_dir[i] += lambda * dir[i];
            }
            let denom = dot(&dir, &a_dir);
            if denom <= 0.0 {
                break; // numerically exhausted search direction
            }
            let alpha = rs_old / denom;
            for i in 0..n {
                x[i] += alpha * dir[i];
                r[i] -= alpha * a_dir[i];
            }
            let rs_new = dot(&r, &r);
            rel_residual = rs_new.sqrt() / b_norm;
            if rel_residual <= opts.cg_tolerance {
                converged = true;
                break;
            }
            let beta = rs_new / rs_old;
            for i in 0..n {
                dir[i] = r[i] + beta * dir[i];
            }
            rs_old = rs_new;
        }
    }

    let image = Image::from_vec(p.grid_ref().hr_width(), p.grid_ref().hr_height(), 0.0, x)?;
    Ok(HighResImage { image, iterations, final_relative_residual: rel_residual, converged, lambda })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Residual ||P H - L|| of a candidate high-res image; used by tests and
/// diagnostics.
pub fn system_residual(l: &[f64], p: &SparseWeightMatrix, h: &Image) -> Result<f64> {
    if h.pixels().len() != p.cols() || l.len() != p.rows() {
        return Err(Error::DimensionMismatch("residual operands do not match the system".into()));
    }
    let mut ph = vec![0.0; p.rows()];
    p.apply(h.pixels(), &mut ph);
    Ok(ph.iter().zip(l).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, l: usize) -> GridSpec {
        GridSpec { n1: n, n2: n, l1: l, l2: l }
    }

    #[test]
    fn mapping_identity_at_unit_factor() {
        let coords = map_lr_to_grid(&[ShiftVector::ZERO], &grid(3, 1));
        assert_eq!(coords[0][0], (0.0, 0.0));
        assert_eq!(coords[0][4], (1.0, 1.0));
        assert_eq!(coords[0][8], (2.0, 2.0));
    }

    #[test]
    fn mapping_centers_bins_at_factor_two() {
        let coords = map_lr_to_grid(&[ShiftVector::ZERO], &grid(2, 2));
        assert_eq!(coords[0][0], (0.5, 0.5));
        assert_eq!(coords[0][3], (2.5, 2.5));
    }

    #[test]
    fn sixth_pixel_shift_is_one_hr_pixel_at_factor_six() {
        let zero = map_lr_to_grid(&[ShiftVector::ZERO], &grid(4, 6));
        let shifted = map_lr_to_grid(&[ShiftVector { dx: 1.0 / 6.0, dy: 0.0 }], &grid(4, 6));
        for (a, b) in zero[0].iter().zip(&shifted[0]) {
            assert!((b.0 - a.0 - 1.0).abs() < 1e-12);
            assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn raw_weights_match_direct_evaluation() {
        // 4x4 LR, 4 frames, factors 2x2: compare every stored entry with a
        // direct triple-loop evaluation of the Gaussian.
        let g = grid(4, 2);
        let shifts = [
            ShiftVector::ZERO,
            ShiftVector { dx: 0.5, dy: 0.0 },
            ShiftVector { dx: 0.0, dy: 0.5 },
            ShiftVector { dx: 0.5, dy: 0.5 },
        ];
        let opts = SolveOptions::default();
        let p = build_weight_matrix(&shifts, &g, &opts).unwrap();
        let radius = opts.effective_radius(&g);
        let coords = map_lr_to_grid(&shifts, &g);

        let mut checked = 0usize;
        for k in 0..shifts.len() {
            for i in 0..g.lr_pixels() {
                let row = k * g.lr_pixels() + i;
                let (cx, cy) = coords[k][i];
                let mut expected = Vec::new();
                for yy in 0..g.hr_height() {
                    for xx in 0..g.hr_width() {
                        let d2 = (xx as f64 - cx).powi(2) + (yy as f64 - cy).powi(2);
                        if d2 <= radius * radius {
                            let w = (-d2 / (2.0 * 4.0 * 0.25)).exp();
                            expected.push((yy * g.hr_width() + xx, w));
                        }
                    }
                }
                let got: Vec<(usize, f64)> = p.row_entries(row).collect();
                assert_eq!(got.len(), expected.len(), "row {row} entry count");
                for ((gc, gw), (ec, ew)) in got.iter().zip(&expected) {
                    assert_eq!(gc, ec);
                    assert!((gw - ew).abs() <= 1e-12, "row {row}: {gw} vs {ew}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn weight_is_one_at_zero_distance_and_decays() {
        let g = grid(4, 1);
        let opts = SolveOptions::default();
        let p = build_weight_matrix(&[ShiftVector::ZERO], &g, &opts).unwrap();
        // row for LR pixel (1,1): center coincides with grid point (1,1)
        let row = 5;
        let entries: Vec<(usize, f64)> = p.row_entries(row).collect();
        let center = entries.iter().find(|(c, _)| *c == 5).unwrap();
        assert_eq!(center.1, 1.0);
        // d=1 neighbours carry exp(-1/(2*0.25)) = exp(-2)
        let right = entries.iter().find(|(c, _)| *c == 6).unwrap();
        assert!((right.1 - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn raw_weights_decrease_with_distance() {
        let g = grid(6, 3);
        let p = build_weight_matrix(
            &[ShiftVector { dx: 0.21, dy: -0.13 }],
            &g,
            &SolveOptions::default(),
        )
        .unwrap();
        let coords = map_lr_to_grid(&[ShiftVector { dx: 0.21, dy: -0.13 }], &g);
        for row in 0..p.rows() {
            let (cx, cy) = coords[0][row];
            let mut by_d: Vec<(f64, f64)> = p
                .row_entries(row)
                .map(|(c, w)| {
                    let x = (c % g.hr_width()) as f64;
                    let y = (c / g.hr_width()) as f64;
                    (((x - cx).powi(2) + (y - cy).powi(2)).sqrt(), w)
                })
                .collect();
            by_d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for pair in by_d.windows(2) {
                if pair[1].0 > pair[0].0 + 1e-12 {
                    assert!(pair[1].1 < pair[0].1, "weights must strictly decrease with d");
                }
            }
        }
    }

    #[test]
    fn coincident_samples_have_identical_rows() {
        // frame 0 pixel (2,1) at shift (0.5, 0) and frame 1 pixel (3,1) at
        // shift (-0.5, 0) land on the same continuous coordinate
        let g = grid(6, 2);
        let shifts = [ShiftVector { dx: 0.5, dy: 0.0 }, ShiftVector { dx: -0.5, dy: 0.0 }];
        let p = build_weight_matrix(&shifts, &g, &SolveOptions::default()).unwrap();
        let row_a = 6 + 2; // frame 0, v=1, u=2
        let row_b = g.lr_pixels() + 6 + 3; // frame 1, v=1, u=3
        let a: Vec<(usize, f64)> = p.row_entries(row_a).collect();
        let b: Vec<(usize, f64)> = p.row_entries(row_b).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn sparsity_stays_within_the_area_bound() {
        let g = grid(8, 3);
        let opts = SolveOptions::default();
        let p = build_weight_matrix(&[ShiftVector { dx: 0.3, dy: 0.7 }], &g, &opts).unwrap();
        let r = p.truncation_radius();
        let bound = (std::f64::consts::PI * (r + 1.0) * (r + 1.0)) as usize;
        for row in 0..p.rows() {
            let count = p.row_entries(row).count();
            assert!(count >= 1 && count <= bound, "row {row}: {count} entries");
        }
    }

    #[test]
    fn empty_support_is_an_internal_error() {
        let g = grid(4, 1);
        let opts = SolveOptions {
            truncation_radius: Some(0.8),
            ..SolveOptions::default()
        };
        // shift pushes the first column's samples 3 px off-grid
        let err = build_weight_matrix(&[ShiftVector { dx: -3.0, dy: 0.0 }], &g, &opts);
        assert!(matches!(err, Err(Error::Internal(_))));
    }

    fn constant_stack(n: usize, frames: usize, value: f64) -> LowResStack {
        let img = Image::from_fn(n, n, 1.0, |_, _| value).unwrap();
        LowResStack {
            frames: vec![img; frames],
            true_shifts: None,
            template_index: 0,
        }
    }

    #[test]
    fn observation_vector_order_and_repetition() {
        let g = grid(2, 1);
        let img = Image::from_vec(2, 2, 1.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let stack = LowResStack {
            frames: vec![img.clone(), img],
            true_shifts: None,
            template_index: 0,
        };
        let shifts = [ShiftVector::ZERO, ShiftVector::ZERO];
        let (l, p) = assemble_system(&stack, &shifts, &g, &SolveOptions::default()).unwrap();
        assert_eq!(l, vec![1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.rows(), 8);
        assert_eq!(p.cols(), 4);
    }

    #[test]
    fn assemble_rejects_mismatches() {
        let g = grid(2, 1);
        let stack = constant_stack(2, 2, 1.0);
        assert!(assemble_system(&stack, &[ShiftVector::ZERO], &g, &SolveOptions::default()).is_err());
        let g_bad = grid(3, 1);
        let shifts = [ShiftVector::ZERO, ShiftVector::ZERO];
        assert!(assemble_system(&stack, &shifts, &g_bad, &SolveOptions::default()).is_err());
    }

    #[test]
    fn unit_factor_solve_with_tight_kernel_is_identity() {
        // radius < 1 keeps only the d=0 entry: P is exactly the identity
        let g = grid(8, 1);
        let img = Image::from_fn(8, 8, 1.0, |x, y| ((x * 13 + y * 7) % 11) as f64).unwrap();
        let stack = LowResStack { frames: vec![img.clone()], true_shifts: None, template_index: 0 };
        let opts = SolveOptions {
            truncation_radius: Some(0.9),
            lambda_reg: Some(0.0),
            ..SolveOptions::default()
        };
        let (l, p) = assemble_system(&stack, &[ShiftVector::ZERO], &g, &opts).unwrap();
        let hr = solve_high_res(&l, &p, &opts).unwrap();
        assert!(hr.converged);
        for (a, b) in hr.image.pixels().iter().zip(img.pixels()) {
            assert!((a - b).abs() <= 1e-10 * img.max_value().max(1.0));
        }
    }

    #[test]
    fn unit_factor_solve_preserves_uniform_frames() {
        // with the default kernel, row normalization makes a uniform frame
        // an exact solution
        let g = grid(6, 1);
        let stack = constant_stack(6, 1, 2.5);
        let opts = SolveOptions { lambda_reg: Some(0.0), ..SolveOptions::default() };
        let (l, p) = assemble_system(&stack, &[ShiftVector::ZERO], &g, &opts).unwrap();
        let hr = solve_high_res(&l, &p, &opts).unwrap();
        assert!(hr.converged);
        for v in hr.image.pixels() {
            assert!((v - 2.5).abs() <= 1e-8 * 2.5);
        }
    }

    /// Dense Gaussian-elimination solve with partial pivoting; the
    /// independent oracle for the CG path.
    pub(crate) fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
                .unwrap();
            a.swap(col, pivot);
            b.swap(col, pivot);
            let diag = a[col][col];
            assert!(diag.abs() > 1e-300, "singular dense system");
            for row in col + 1..n {
                let f = a[row][col] / diag;
                if f == 0.0 {
                    continue;
                }
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut acc = b[row];
            for k in row + 1..n {
                acc -= a[row][k] * x[k];
            }
            x[row] = acc / a[row][row];
        }
        x
    }

    /// Dense (P^T P + lambda I) built from the sparse matrix.
    pub(crate) fn dense_normal_matrix(p: &SparseWeightMatrix, lambda: f64) -> Vec<Vec<f64>> {
        let n = p.cols();
        let mut a = vec![vec![0.0; n]; n];
        for row in 0..p.rows() {
            let s = p.row_sum(row);
            let entries: Vec<(usize, f64)> = p.row_entries(row).collect();
            for &(ci, wi) in &entries {
                for &(cj, wj) in &entries {
                    a[ci][cj] += wi * wj / (s * s);
                }
            }
        }
        for i in 0..n {
            a[i][i] += lambda;
        }
        a
    }

    #[test]
    fn cg_matches_dense_solve_on_small_instance() {
        let g = grid(4, 2);
        let shifts = [
            ShiftVector::ZERO,
            ShiftVector { dx: 0.5, dy: 0.0 },
            ShiftVector { dx: 0.0, dy: 0.5 },
            ShiftVector { dx: 0.5, dy: 0.5 },
        ];
        let frames: Vec<Image> = (0..4)
            .map(|k| Image::from_fn(4, 4, 1.0, |x, y| ((x + 2 * y + k) % 5) as f64 + 0.5).unwrap())
            .collect();
        let stack = LowResStack { frames, true_shifts: None, template_index: 0 };
        let opts = SolveOptions {
            cg_tolerance: 1e-13,
            cg_max_iterations: 500,
            ..SolveOptions::default()
        };
        let (l, p) = assemble_system(&stack, &shifts, &g, &opts).unwrap();
        let hr = solve_high_res(&l, &p, &opts).unwrap();
        assert!(hr.converged);

        let a = dense_normal_matrix(&p, hr.lambda);
        let mut rhs = vec![0.0; p.cols()];
        p.apply_transpose(&l, &mut rhs);
        let dense = dense_solve(a, rhs);

        let scale = dense.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (cg, dn) in hr.image.pixels().iter().zip(&dense) {
            assert!((cg - dn).abs() <= 1e-8 * scale, "cg {cg} vs dense {dn}");
        }
    }

    #[test]
    fn solve_beats_the_nearest_neighbor_initialization() {
        let g = grid(8, 2);
        let base = Image::from_fn(16, 16, 1.0, |x, y| {
            0.5 + 0.4 * ((x as f64) * 0.5).sin() * ((y as f64) * 0.4).cos()
        })
        .unwrap();
        let shifts = [
            ShiftVector::ZERO,
            ShiftVector { dx: 0.5, dy: 0.0 },
            ShiftVector { dx: 0.0, dy: 0.5 },
            ShiftVector { dx: 0.5, dy: 0.5 },
        ];
        let frames: Vec<Image> = shifts
            .iter()
            .map(|s| {
                base.warp_subpixel(ShiftVector { dx: -s.dx * 2.0, dy: -s.dy * 2.0 })
                    .downsample_box(2)
                    .unwrap()
            })
            .collect();
        let template_nn = frames[0].upsample_nearest(2).unwrap();
        let stack = LowResStack { frames, true_shifts: None, template_index: 0 };
        let opts = SolveOptions::default();
        let (l, p) = assemble_system(&stack, &shifts, &g, &opts).unwrap();
        let hr = solve_high_res(&l, &p, &opts).unwrap();
        let r_solved = system_residual(&l, &p, &hr.image).unwrap();
        let r_baseline = system_residual(&l, &p, &template_nn).unwrap();
        assert!(
            r_solved <= r_baseline,
            "solve residual {r_solved} exceeds baseline {r_baseline}"
        );
    }

    #[test]
    fn phase_support_counts_distinct_shifts() {
        let g = grid(4, 6);
        let shifts: Vec<ShiftVector> = (0..6)
            .map(|i| ShiftVector { dx: i as f64 / 6.0, dy: 0.0 })
            .collect();
        let (px, py) = g.phase_support(&shifts, 1e-9);
        assert_eq!(px, 6);
        assert_eq!(py, 1);
    }
}
