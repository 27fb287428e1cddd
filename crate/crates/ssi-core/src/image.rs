//! 2D real-valued raster with pixel-pitch metadata.
//!
//! Pixel (x, y) covers the scene cell [x, x+1) x [y, y+1); continuous
//! sampling treats integer coordinates as pixel values and interpolates
//! bilinearly in between, clamping to the border (replicate).

use crate::error::{Error, Result};
use crate::optics::ShiftVector;

/// Row-major grid of f64 samples. Scenes are nonnegative; reconstructions
/// and spectra may carry any real value.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    /// Physical pitch of one pixel in micrometers. Metadata only.
    pixel_pitch_um: f64,
    data: Vec<f64>,
}

impl Image {
    /// All-zero image.
    pub fn zeros(width: usize, height: usize, pixel_pitch_um: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height, pixel_pitch_um, data: vec![0.0; width * height] })
    }

    /// Wrap an existing row-major buffer.
    pub fn from_vec(width: usize, height: usize, pixel_pitch_um: f64, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "buffer of {} samples does not form a {}x{} image",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, pixel_pitch_um, data })
    }

    /// Build from a closure of (x, y).
    pub fn from_fn(width: usize, height: usize, pixel_pitch_um: f64, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut img = Self::zeros(width, height, pixel_pitch_um)?;
        for y in 0..height {
            for x in 0..width {
                img.data[y * width + x] = f(x, y);
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_pitch_um(&self) -> f64 {
        self.pixel_pitch_um
    }

    pub fn set_pixel_pitch_um(&mut self, pitch: f64) {
        self.pixel_pitch_um = pitch;
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Bilinear sample at a continuous pixel-index coordinate, replicating
    /// the border for out-of-range positions.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor() as usize;
        let y0 = yc.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let ax = xc - x0 as f64;
        let ay = yc - y0 as f64;
        let top = (1.0 - ax) * self.get(x0, y0) + ax * self.get(x1, y0);
        let bottom = (1.0 - ax) * self.get(x0, y1) + ax * self.get(x1, y1);
        (1.0 - ay) * top + ay * bottom
    }

    /// Translate the image content by `(s.dx, s.dy)` pixels:
    /// `out(x, y) = in(x - dx, y - dy)`, bilinear, replicate boundary.
    pub fn warp_subpixel(&self, s: ShiftVector) -> Image {
        let mut out = Image::zeros(self.width, self.height, self.pixel_pitch_um).expect("non-empty");
        for y in 0..self.height {
            for x in 0..self.width {
                out.data[y * self.width + x] =
                    self.sample_bilinear(x as f64 - s.dx, y as f64 - s.dy);
            }
        }
        out
    }

    /// Bin `factor x factor` blocks to their arithmetic mean. The pixel
    /// pitch scales by `factor`.
    pub fn downsample_box(&self, factor: usize) -> Result<Image> {
        if factor == 0 {
            return Err(Error::InvalidArgument("downsample factor must be >= 1".into()));
        }
        if self.width % factor != 0 || self.height % factor != 0 {
            return Err(Error::InvalidArgument(format!(
                "image {}x{} is not divisible by binning factor {}",
                self.width, self.height, factor
            )));
        }
        let w = self.width / factor;
        let h = self.height / factor;
        let inv = 1.0 / (factor * factor) as f64;
        let mut out = Image::zeros(w, h, self.pixel_pitch_um * factor as f64)?;
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for by in 0..factor {
                    for bx in 0..factor {
                        acc += self.get(x * factor + bx, y * factor + by);
                    }
                }
                out.set(x, y, acc * inv);
            }
        }
        Ok(out)
    }

    /// Nearest-neighbor upsample by an integer factor (each pixel becomes a
    /// `factor x factor` block). Used as the trivial super-resolution
    /// baseline.
    pub fn upsample_nearest(&self, factor: usize) -> Result<Image> {
        if factor == 0 {
            return Err(Error::InvalidArgument("upsample factor must be >= 1".into()));
        }
        let mut out = Image::zeros(
            self.width * factor,
            self.height * factor,
            self.pixel_pitch_um / factor as f64,
        )?;
        for y in 0..out.height {
            for x in 0..out.width {
                out.data[y * out.width + x] = self.get(x / factor, y / factor);
            }
        }
        Ok(out)
    }
}
