//! Image quality metrics and the log-magnitude Fourier spectrum export.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::Image;

/// Peak signal-to-noise ratio in dB: 10*log10(peak^2 / MSE).
/// Identical images return +infinity.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if !(peak > 0.0) {
        return Err(Error::InvalidArgument("peak must be positive".into()));
    }
    let mse = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.pixels().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Centered log-magnitude spectrum: ln(1 + |F|), normalized to [0, 1].
/// The DC bin lands at (width/2, height/2).
pub fn log_spectrum(img: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);

    let mut data: Vec<Complex<f64>> =
        img.pixels().iter().map(|&v| Complex::new(v, 0.0)).collect();
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    // columns via transpose, FFT, transpose back
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }

    let mut out = Image::zeros(w, h, img.pixel_pitch_um()).expect("non-empty");
    let mut max = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            // fftshift: move DC to the center
            let sx = (x + w / 2) % w;
            let sy = (y + h / 2) % h;
            let v = (1.0 + data[y * w + x].norm()).ln();
            out.set(sx, sy, v);
            max = max.max(v);
        }
    }
    if max > 0.0 {
        for v in out.pixels_mut() {
            *v /= max;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_of_identical_images_is_infinite() {
        let a = Image::from_fn(8, 8, 1.0, |x, y| (x + y) as f64).unwrap();
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_of_constant_offset() {
        let a = Image::from_fn(16, 16, 1.0, |_, _| 0.5).unwrap();
        let b = Image::from_fn(16, 16, 1.0, |_, _| 0.6).unwrap();
        let v = psnr(&a, &b, 1.0).unwrap();
        assert!((v - 20.0).abs() < 1e-9, "psnr = {v}");
    }

    #[test]
    fn psnr_matches_double_loop_oracle() {
        let a = Image::from_fn(9, 7, 1.0, |x, y| ((x * 31 + y * 17) % 13) as f64 / 13.0).unwrap();
        let b = Image::from_fn(9, 7, 1.0, |x, y| ((x * 7 + y * 29) % 11) as f64 / 11.0).unwrap();
        let mut mse = 0.0;
        for y in 0..7 {
            for x in 0..9 {
                let d = a.get(x, y) - b.get(x, y);
                mse += d * d;
            }
        }
        mse /= 63.0;
        let expect = 10.0 * (1.0 / mse).log10();
        assert!((psnr(&a, &b, 1.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn psnr_rejects_mismatched_dims() {
        let a = Image::zeros(4, 4, 1.0).unwrap();
        let b = Image::zeros(4, 5, 1.0).unwrap();
        assert!(psnr(&a, &b, 1.0).is_err());
    }

    #[test]
    fn constant_image_spectrum_is_a_single_dc_peak() {
        let img = Image::from_fn(8, 8, 1.0, |_, _| 0.7).unwrap();
        let spec = log_spectrum(&img);
        for y in 0..8 {
            for x in 0..8 {
                if (x, y) == (4, 4) {
                    assert_eq!(spec.get(x, y), 1.0);
                } else {
                    assert!(spec.get(x, y).abs() < 1e-12, "({x},{y}) = {}", spec.get(x, y));
                }
            }
        }
    }

    #[test]
    fn horizontal_sinusoid_shows_two_symmetric_peaks() {
        let img = Image::from_fn(32, 32, 1.0, |x, _| {
            (std::f64::consts::TAU * 4.0 * x as f64 / 32.0).cos()
        })
        .unwrap();
        let spec = log_spectrum(&img);
        // peaks at +-4 cycles from the center, on the DC row
        let p1 = spec.get(16 + 4, 16);
        let p2 = spec.get(16 - 4, 16);
        assert!((p1 - 1.0).abs() < 1e-9 && (p2 - 1.0).abs() < 1e-9);
        let rest_max = (0..32)
            .flat_map(|y| (0..32).map(move |x| (x, y)))
            .filter(|&(x, y)| !(y == 16 && (x == 12 || x == 20)))
            .map(|(x, y)| spec.get(x, y))
            .fold(0.0f64, f64::max);
        assert!(rest_max < 0.1, "leakage {rest_max}");
    }

    #[test]
    fn spectrum_magnitude_matches_direct_dft_oracle() {
        let img = Image::from_fn(8, 8, 1.0, |x, y| ((x * 5 + y * 3) % 7) as f64).unwrap();
        let spec_fft = {
            // undo the normalization to compare raw magnitudes
            let (w, h) = (8usize, 8usize);
            let mut mags = vec![0.0; w * h];
            let tau = std::f64::consts::TAU;
            for v in 0..h {
                for u in 0..w {
                    let mut re = 0.0;
                    let mut im = 0.0;
                    for y in 0..h {
                        for x in 0..w {
                            let ph = -tau * (u as f64 * x as f64 / w as f64 + v as f64 * y as f64 / h as f64);
                            re += img.get(x, y) * ph.cos();
                            im += img.get(x, y) * ph.sin();
                        }
                    }
                    let sx = (u + w / 2) % w;
                    let sy = (v + h / 2) % h;
                    mags[sy * w + sx] = (1.0 + re.hypot(im)).ln();
                }
            }
            let max = mags.iter().cloned().fold(0.0f64, f64::max);
            mags.iter().map(|m| m / max).collect::<Vec<_>>()
        };
        let spec = log_spectrum(&img);
        for (a, b) in spec.pixels().iter().zip(&spec_fft) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
