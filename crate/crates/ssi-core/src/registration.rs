//! Sub-pixel translation estimation between each low-sampling-rate frame
//! and the template frame.
//!
//! The warp is pure translation W(x; p) = x + p. The estimator minimizes
//! the sum of squared intensity differences by Gauss-Newton steps: the
//! steepest-descent images are the warped-image gradients resampled at
//! W(x; p) (the warp Jacobian is the identity for translation), the 2x2
//! normal matrix is inverted in closed form, and iteration stops once the
//! update norm falls below a user threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::optics::LowResStack;

/// Estimated translation parameters p = (p1, p2), in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpParams {
    /// Horizontal translation (x).
    pub p1: f64,
    /// Vertical translation (y).
    pub p2: f64,
}

impl WarpParams {
    pub const ZERO: WarpParams = WarpParams { p1: 0.0, p2: 0.0 };

    pub fn norm(&self) -> f64 {
        self.p1.hypot(self.p2)
    }
}

/// Controls for the iterative estimator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegistrationOptions {
    /// Convergence threshold on the update norm, pixels.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Shift both images to zero mean and unit RMS over the summation
    /// region before differencing; makes the estimate robust to
    /// brightness and contrast differences between frames.
    pub normalize: bool,
    /// Pixels excluded from the sums along every edge, to keep boundary
    /// interpolation out of the statistics.
    pub border_margin: usize,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        Self { epsilon: 1e-4, max_iterations: 100, normalize: true, border_margin: 2 }
    }
}

impl RegistrationOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of one frame's shift estimation.
#[derive(Debug, Clone, Copy)]
pub struct ShiftEstimate {
    pub p: WarpParams,
    pub iterations: usize,
    pub final_update_norm: f64,
    pub converged: bool,
    /// Final value of the sum-of-squared-differences objective.
    pub final_objective: f64,
}

/// Per-pixel image derivatives.
#[derive(Debug, Clone)]
pub struct GradientField {
    width: usize,
    height: usize,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn gx(&self, x: usize, y: usize) -> f64 {
        self.gx[y * self.width + x]
    }

    #[inline]
    pub fn gy(&self, x: usize, y: usize) -> f64 {
        self.gy[y * self.width + x]
    }

    #[inline]
    fn sample(&self, data: &[f64], x: f64, y: f64) -> f64 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor() as usize;
        let y0 = yc.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let ax = xc - x0 as f64;
        let ay = yc - y0 as f64;
        let top = (1.0 - ax) * data[y0 * self.width + x0] + ax * data[y0 * self.width + x1];
        let bot = (1.0 - ax) * data[y1 * self.width + x0] + ax * data[y1 * self.width + x1];
        (1.0 - ay) * top + ay * bot
    }

    pub fn sample_gx(&self, x: f64, y: f64) -> f64 {
        self.sample(&self.gx, x, y)
    }

    pub fn sample_gy(&self, x: f64, y: f64) -> f64 {
        self.sample(&self.gy, x, y)
    }
}

/// Central differences in the interior, one-sided on the borders.
pub fn image_gradient(img: &Image) -> Result<GradientField> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::InvalidArgument(format!(
            "image must be at least 3x3 for gradients, got {w}x{h}"
        )));
    }
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            gx[y * w + x] = match x {
                0 => img.get(1, y) - img.get(0, y),
                x if x == w - 1 => img.get(w - 1, y) - img.get(w - 2, y),
                _ => 0.5 * (img.get(x + 1, y) - img.get(x - 1, y)),
            };
            gy[y * w + x] = match y {
                0 => img.get(x, 1) - img.get(x, 0),
                y if y == h - 1 => img.get(x, h - 1) - img.get(x, h - 2),
                _ => 0.5 * (img.get(x, y + 1) - img.get(x, y - 1)),
            };
        }
    }
    Ok(GradientField { width: w, height: h, gx, gy })
}

/// Summation region: pixels at least `border_margin` away from every edge.
fn region(img: &Image, margin: usize) -> Result<(usize, usize, usize, usize)> {
    let (w, h) = (img.width(), img.height());
    if w <= 2 * margin || h <= 2 * margin {
        return Err(Error::InvalidArgument(format!(
            "border margin {margin} leaves no pixels in a {w}x{h} image"
        )));
    }
    Ok((margin, margin, w - margin, h - margin))
}

/// Zero-mean, unit-RMS statistics of a sample buffer.
fn normalization(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let rms = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    (mean, if rms > 0.0 { rms } else { 1.0 })
}

fn check_same_dims(warped: &Image, template: &Image) -> Result<()> {
    if !warped.same_dims(template) {
        return Err(Error::DimensionMismatch(format!(
            "warped is {}x{}, template is {}x{}",
            warped.width(),
            warped.height(),
            template.width(),
            template.height()
        )));
    }
    Ok(())
}

/// Sum of squared differences between the warped image sampled at
/// W(x; p) = x + p and the template, over the margin-inset region.
pub fn objective(
    warped: &Image,
    template: &Image,
    p: &WarpParams,
    opts: &RegistrationOptions,
) -> Result<f64> {
    check_same_dims(warped, template)?;
    let (x0, y0, x1, y1) = region(template, opts.border_margin)?;

    let mut warped_vals = Vec::with_capacity((x1 - x0) * (y1 - y0));
    let mut template_vals = Vec::with_capacity(warped_vals.capacity());
    for y in y0..y1 {
        for x in x0..x1 {
            warped_vals.push(warped.sample_bilinear(x as f64 + p.p1, y as f64 + p.p2));
            template_vals.push(template.get(x, y));
        }
    }

    let (im, is, tm, ts) = if opts.normalize {
        let (im, is) = normalization(&warped_vals);
        let (tm, ts) = normalization(&template_vals);
        (im, is, tm, ts)
    } else {
        (0.0, 1.0, 0.0, 1.0)
    };

    Ok(warped_vals
        .iter()
        .zip(&template_vals)
        .map(|(&iv, &tv)| {
            let d = (iv - im) / is - (tv - tm) / ts;
            d * d
        })
        .sum())
}

/// One Gauss-Newton update for the current estimate.
///
/// Returns the parameter increment and the 2x2 normal matrix
/// H = sum of grad^T grad (the warp Jacobian is the identity for pure
/// translation, so the steepest-descent images are just the resampled
/// gradients of the warped image).
pub fn sd_update(
    warped: &Image,
    template: &Image,
    p: &WarpParams,
    opts: &RegistrationOptions,
) -> Result<(WarpParams, [[f64; 2]; 2])> {
    let grad = image_gradient(warped)?;
    sd_update_with_gradient(warped, &grad, template, p, opts)
}

/// As [`sd_update`] with a precomputed gradient field of `warped`; the
/// field itself is fixed, only its sampling points move per iteration.
pub fn sd_update_with_gradient(
    warped: &Image,
    grad: &GradientField,
    template: &Image,
    p: &WarpParams,
    opts: &RegistrationOptions,
) -> Result<(WarpParams, [[f64; 2]; 2])> {
    check_same_dims(warped, template)?;
    let (x0, y0, x1, y1) = region(template, opts.border_margin)?;

    let count = (x1 - x0) * (y1 - y0);
    let mut iv = Vec::with_capacity(count);
    let mut tv = Vec::with_capacity(count);
    let mut gx = Vec::with_capacity(count);
    let mut gy = Vec::with_capacity(count);
    for y in y0..y1 {
        for x in x0..x1 {
            let sx = x as f64 + p.p1;
            let sy = y as f64 + p.p2;
            iv.push(warped.sample_bilinear(sx, sy));
            gx.push(grad.sample_gx(sx, sy));
            gy.push(grad.sample_gy(sx, sy));
            tv.push(template.get(x, y));
        }
    }

    let (im, is, tm, ts) = if opts.normalize {
        let (im, is) = normalization(&iv);
        let (tm, ts) = normalization(&tv);
        (im, is, tm, ts)
    } else {
        (0.0, 1.0, 0.0, 1.0)
    };

    let mut h11 = 0.0;
    let mut h12 = 0.0;
    let mut h22 = 0.0;
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for i in 0..count {
        let gxn = gx[i] / is;
        let gyn = gy[i] / is;
        let residual = (tv[i] - tm) / ts - (iv[i] - im) / is;
        h11 += gxn * gxn;
        h12 += gxn * gyn;
        h22 += gyn * gyn;
        b1 += gxn * residual;
        b2 += gyn * residual;
    }

    let det = h11 * h22 - h12 * h12;
    let half_trace = 0.5 * (h11 + h22);
    if det.abs() < 1e-12 * half_trace * half_trace || half_trace == 0.0 {
        return Err(Error::SingularHessian);
    }
    let dp = WarpParams {
        p1: (h22 * b1 - h12 * b2) / det,
        p2: (h11 * b2 - h12 * b1) / det,
    };
    Ok((dp, [[h11, h12], [h12, h22]]))
}

/// Iterate Gauss-Newton updates from p = (0,0) until the update norm
/// drops below `epsilon` or the iteration budget runs out.
///
/// Non-convergence is reported through the `converged` flag, not as an
/// error. An iteration that increases the objective beyond floating-point
/// slack also clears the flag.
pub fn estimate_shift(
    warped: &Image,
    template: &Image,
    opts: &RegistrationOptions,
) -> Result<ShiftEstimate> {
    opts.validate()?;
    check_same_dims(warped, template)?;
    let grad = image_gradient(warped)?;

    let mut p = WarpParams::ZERO;
    let initial_objective = objective(warped, template, &p, opts)?;
    let mut prev_objective = initial_objective;
    let mut converged = false;
    let mut monotone = true;
    let mut iterations = 0;
    let mut final_update_norm = 0.0;

    for iter in 1..=opts.max_iterations {
        let (dp, _) = sd_update_with_gradient(warped, &grad, template, &p, opts)?;
        p.p1 += dp.p1;
        p.p2 += dp.p2;
        iterations = iter;
        final_update_norm = dp.norm();

        let obj = objective(warped, template, &p, opts)?;
        let slack = 1e-9 * prev_objective.max(initial_objective);
        if obj > prev_objective + slack {
            monotone = false;
        }
        prev_objective = obj;

        if final_update_norm < opts.epsilon {
            converged = true;
            break;
        }
    }

    Ok(ShiftEstimate {
        p,
        iterations,
        final_update_norm,
        converged: converged && monotone,
        final_objective: prev_objective,
    })
}

/// Shift of every frame relative to the stack's template frame.
///
/// The template's own entry is exactly zero with zero iterations. A frame
/// whose estimation fails (featureless content) is reported with
/// `converged = false` rather than aborting the batch.
pub fn estimate_stack_shifts(
    stack: &LowResStack,
    opts: &RegistrationOptions,
) -> Result<Vec<ShiftEstimate>> {
    stack.validate()?;
    opts.validate()?;
    let template = stack.template();
    let mut estimates = Vec::with_capacity(stack.frames.len());
    for (k, frame) in stack.frames.iter().enumerate() {
        if k == stack.template_index {
            estimates.push(ShiftEstimate {
                p: WarpParams::ZERO,
                iterations: 0,
                final_update_norm: 0.0,
                converged: true,
                final_objective: 0.0,
            });
            continue;
        }
        match estimate_shift(frame, template, opts) {
            Ok(est) => estimates.push(est),
            Err(Error::SingularHessian) => estimates.push(ShiftEstimate {
                p: WarpParams::ZERO,
                iterations: 0,
                final_update_norm: f64::NAN,
                converged: false,
                final_objective: f64::NAN,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(estimates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::ShiftVector;

    fn opts() -> RegistrationOptions {
        RegistrationOptions::default()
    }

    /// Smooth band-limited test image: a seeded mix of low-frequency
    /// plane waves, strictly positive.
    fn bandlimited(side: usize, seed: u64) -> Image {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let waves: Vec<(f64, f64, f64, f64)> = (0..8)
            .map(|_| {
                let fx = rng.random_range(-0.12..0.12);
                let fy = rng.random_range(-0.12..0.12);
                let amp = rng.random_range(0.05..0.2);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                (fx, fy, amp, phase)
            })
            .collect();
        Image::from_fn(side, side, 1.0, |x, y| {
            let mut v = 2.0;
            for &(fx, fy, amp, phase) in &waves {
                v += amp * (std::f64::consts::TAU * (fx * x as f64 + fy * y as f64) + phase).sin();
            }
            v
        })
        .unwrap()
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let img = Image::from_fn(6, 6, 1.0, |_, _| 3.2).unwrap();
        let g = image_gradient(&img).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                assert_eq!(g.gx(x, y), 0.0);
                assert_eq!(g.gy(x, y), 0.0);
            }
        }
    }

    #[test]
    fn gradient_of_ramp_is_unit() {
        let img = Image::from_fn(8, 8, 1.0, |x, _| x as f64).unwrap();
        let g = image_gradient(&img).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert!((g.gx(x, y) - 1.0).abs() < 1e-12);
                assert_eq!(g.gy(x, y), 0.0);
            }
        }
    }

    #[test]
    fn gradient_matches_difference_oracle() {
        let img = Image::from_fn(8, 8, 1.0, |x, y| ((x * 37 + y * 61) % 23) as f64).unwrap();
        let g = image_gradient(&img).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let ex = if x == 0 {
                    img.get(1, y) - img.get(0, y)
                } else if x == 7 {
                    img.get(7, y) - img.get(6, y)
                } else {
                    (img.get(x + 1, y) - img.get(x - 1, y)) / 2.0
                };
                let ey = if y == 0 {
                    img.get(x, 1) - img.get(x, 0)
                } else if y == 7 {
                    img.get(x, 7) - img.get(x, 6)
                } else {
                    (img.get(x, y + 1) - img.get(x, y - 1)) / 2.0
                };
                assert_eq!(g.gx(x, y), ex);
                assert_eq!(g.gy(x, y), ey);
            }
        }
    }

    #[test]
    fn gradient_rejects_tiny_images() {
        let img = Image::zeros(2, 5, 1.0).unwrap();
        assert!(image_gradient(&img).is_err());
    }

    #[test]
    fn objective_zero_for_identical_images() {
        let img = bandlimited(16, 3);
        let o = objective(&img, &img, &WarpParams::ZERO, &opts()).unwrap();
        assert_eq!(o, 0.0);
    }

    #[test]
    fn objective_zero_on_aligned_integer_shift() {
        let template = bandlimited(24, 5);
        let warped = template.warp_subpixel(ShiftVector { dx: 1.0, dy: 0.0 });
        let o = objective(
            &warped,
            &template,
            &WarpParams { p1: 1.0, p2: 0.0 },
            &RegistrationOptions { normalize: false, border_margin: 2, ..opts() },
        )
        .unwrap();
        assert!(o < 1e-18, "objective = {o}");
    }

    #[test]
    fn objective_matches_brute_force_oracle() {
        let a = bandlimited(12, 7);
        let b = bandlimited(12, 8);
        let p = WarpParams { p1: 0.3, p2: -0.2 };
        let o = objective(
            &a,
            &b,
            &p,
            &RegistrationOptions { normalize: false, ..opts() },
        )
        .unwrap();
        let mut expect = 0.0;
        for y in 2..10 {
            for x in 2..10 {
                let d = a.sample_bilinear(x as f64 + 0.3, y as f64 - 0.2) - b.get(x, y);
                expect += d * d;
            }
        }
        assert!((o - expect).abs() < 1e-12 * expect.max(1.0));
    }

    #[test]
    fn update_is_zero_at_perfect_alignment() {
        let img = bandlimited(16, 9);
        let (dp, h) = sd_update(&img, &img, &WarpParams::ZERO, &opts()).unwrap();
        assert!(dp.norm() < 1e-12);
        // normal matrix is symmetric positive semidefinite
        assert!(h[0][0] >= 0.0 && h[1][1] >= 0.0);
        assert!(h[0][0] * h[1][1] - h[0][1] * h[1][0] >= 0.0);
        assert_eq!(h[0][1], h[1][0]);
    }

    #[test]
    fn constant_images_have_singular_hessian() {
        let img = Image::from_fn(10, 10, 1.0, |_, _| 1.0).unwrap();
        match sd_update(&img, &img, &WarpParams::ZERO, &opts()) {
            Err(Error::SingularHessian) => {}
            other => panic!("expected singular Hessian, got {other:?}"),
        }
    }

    /// Brute-force grid search over p at `step` resolution; the
    /// independent oracle for the gradient-based estimates.
    fn grid_search(warped: &Image, template: &Image, o: &RegistrationOptions, lim: f64, step: f64) -> WarpParams {
        let mut best = (f64::INFINITY, WarpParams::ZERO);
        let n = (lim / step).round() as i64;
        for iy in -n..=n {
            for ix in -n..=n {
                let p = WarpParams { p1: ix as f64 * step, p2: iy as f64 * step };
                let obj = objective(warped, template, &p, o).unwrap();
                if obj < best.0 {
                    best = (obj, p);
                }
            }
        }
        best.1
    }

    fn gaussian_blob(side: usize) -> Image {
        let c = side as f64 / 2.0;
        Image::from_fn(side, side, 1.0, |x, y| {
            let dx = x as f64 - c;
            let dy = y as f64 - c;
            (-(dx * dx + dy * dy) / 18.0).exp()
        })
        .unwrap()
    }

    #[test]
    fn single_step_recovers_most_of_a_small_shift() {
        let template = gaussian_blob(24);
        let truth = ShiftVector { dx: 0.3, dy: -0.2 };
        let warped = template.warp_subpixel(truth);
        let o = RegistrationOptions { normalize: false, ..opts() };
        let (dp, _) = sd_update(&warped, &template, &WarpParams::ZERO, &o).unwrap();
        let oracle = grid_search(&warped, &template, &o, 0.6, 0.01);
        assert!((oracle.p1 - truth.dx).abs() <= 0.02 && (oracle.p2 - truth.dy).abs() <= 0.02);
        assert!(
            (dp.p1 - oracle.p1).abs() <= 0.15 && (dp.p2 - oracle.p2).abs() <= 0.15,
            "one-step update {dp:?} too far from grid-search optimum {oracle:?}"
        );
    }

    #[test]
    fn identical_images_converge_immediately() {
        let img = bandlimited(20, 13);
        let est = estimate_shift(&img, &img, &opts()).unwrap();
        assert!(est.converged);
        assert!(est.iterations <= 2);
        assert!(est.p.norm() < 1e-9);
    }

    #[test]
    fn subpixel_shift_recovered_and_cross_checked() {
        let template = bandlimited(48, 21);
        let truth = ShiftVector { dx: 0.25, dy: -0.4 };
        let warped = template.warp_subpixel(truth);
        let est = estimate_shift(&warped, &template, &opts()).unwrap();
        assert!(est.converged);
        assert!(
            (est.p.p1 - truth.dx).abs() <= 0.05 && (est.p.p2 - truth.dy).abs() <= 0.05,
            "estimate {:?} vs truth {truth:?}",
            est.p
        );
        let oracle = grid_search(&warped, &template, &opts(), 0.6, 0.01);
        assert!((est.p.p1 - oracle.p1).abs() <= 0.02 && (est.p.p2 - oracle.p2).abs() <= 0.02);
    }

    #[test]
    fn normalization_absorbs_brightness_and_contrast() {
        let template = bandlimited(48, 33);
        let truth = ShiftVector { dx: 0.2, dy: 0.1 };
        let shifted = template.warp_subpixel(truth);
        let warped =
            Image::from_fn(48, 48, 1.0, |x, y| 1.3 * shifted.get(x, y) + 10.0).unwrap();
        let est = estimate_shift(&warped, &template, &opts()).unwrap();
        assert!(est.converged);
        assert!(
            (est.p.p1 - truth.dx).abs() <= 0.05 && (est.p.p2 - truth.dy).abs() <= 0.05,
            "estimate {:?}",
            est.p
        );
    }

    #[test]
    fn affine_intensity_changes_move_estimate_little() {
        let template = bandlimited(48, 40);
        let truth = ShiftVector { dx: 0.35, dy: -0.15 };
        let shifted = template.warp_subpixel(truth);
        let base = estimate_shift(&shifted, &template, &opts()).unwrap();
        let peak = template.max_value();
        for (a, b) in [(0.5, -0.2 * peak), (2.0, 0.2 * peak), (1.25, 0.05 * peak)] {
            let scaled = Image::from_fn(48, 48, 1.0, |x, y| a * shifted.get(x, y) + b).unwrap();
            let est = estimate_shift(&scaled, &template, &opts()).unwrap();
            assert!(est.converged);
            assert!(
                (est.p.p1 - base.p.p1).abs() <= 0.02 && (est.p.p2 - base.p.p2).abs() <= 0.02,
                "a={a} b={b}: {:?} vs {:?}",
                est.p,
                base.p
            );
        }
    }

    #[test]
    fn estimates_are_antisymmetric() {
        let a = bandlimited(48, 55);
        let b = a.warp_subpixel(ShiftVector { dx: 0.4, dy: 0.3 });
        let ab = estimate_shift(&a, &b, &opts()).unwrap();
        let ba = estimate_shift(&b, &a, &opts()).unwrap();
        assert!(ab.converged && ba.converged);
        assert!((ab.p.p1 + ba.p.p1).abs() <= 0.05);
        assert!((ab.p.p2 + ba.p.p2).abs() <= 0.05);
    }

    #[test]
    fn stack_estimation_handles_template_and_failures() {
        let img = bandlimited(24, 60);
        let stack = LowResStack {
            frames: vec![img.clone(), img.clone(), img.clone()],
            true_shifts: None,
            template_index: 1,
        };
        let ests = estimate_stack_shifts(&stack, &opts()).unwrap();
        assert_eq!(ests.len(), 3);
        assert_eq!(ests[1].iterations, 0);
        assert!(ests[1].converged);
        for e in &ests {
            assert!(e.p.norm() < 1e-9);
        }

        // a featureless frame must not abort the batch
        let flat = Image::from_fn(24, 24, 1.0, |_, _| 1.0).unwrap();
        let stack = LowResStack {
            frames: vec![img.clone(), flat],
            true_shifts: None,
            template_index: 0,
        };
        let ests = estimate_stack_shifts(&stack, &opts()).unwrap();
        assert!(ests[0].converged);
        assert!(!ests[1].converged);
    }

    #[test]
    fn single_frame_stack_is_trivially_zero() {
        let stack = LowResStack {
            frames: vec![bandlimited(16, 70)],
            true_shifts: None,
            template_index: 0,
        };
        let ests = estimate_stack_shifts(&stack, &opts()).unwrap();
        assert_eq!(ests.len(), 1);
        assert_eq!(ests[0].p, WarpParams::ZERO);
        assert!(ests[0].converged);
    }
}
