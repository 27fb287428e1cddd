//! Synthetic test scenes: resolution bar targets with known geometry, a
//! band-limited textured scene, and the contrast readout that decides
//! whether a bar group counts as resolved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarOrientation {
    /// Bars vary along x (vertical stripes).
    Vertical,
    /// Bars vary along y (horizontal stripes).
    Horizontal,
}

/// One group of equally spaced bars inside a placement rectangle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarGroup {
    /// Full bright+dark period in pixels (>= 2 at the generation scale).
    pub period_px: f64,
    pub orientation: BarOrientation,
    /// Number of bright bars.
    pub count: usize,
    /// Placement rectangle, in pixels; bars start at its leading edge.
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BarGroup {
    fn rect_contains(&self, sx: f64, sy: f64) -> bool {
        sx >= self.x && sx < self.x + self.width && sy >= self.y && sy < self.y + self.height
    }

    fn span(&self) -> f64 {
        self.count as f64 * self.period_px
    }
}

/// A full bar-target description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarTargetSpec {
    /// Square image side length in pixels.
    pub side: usize,
    /// Background level in [0, 1].
    #[serde(default)]
    pub background: f64,
    /// Foreground (bar) level in [0, 1].
    #[serde(default = "default_foreground")]
    pub foreground: f64,
    #[serde(default)]
    pub groups: Vec<BarGroup>,
}

fn default_foreground() -> f64 {
    1.0
}

impl BarTargetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.side == 0 {
            return Err(Error::InvalidArgument("target side must be positive".into()));
        }
        for level in [self.background, self.foreground] {
            if !(0.0..=1.0).contains(&level) {
                return Err(Error::InvalidArgument("levels must lie in [0, 1]".into()));
            }
        }
        let side = self.side as f64;
        for (i, g) in self.groups.iter().enumerate() {
            if g.period_px < 2.0 {
                return Err(Error::InvalidArgument(format!(
                    "group {i}: period {} px is below the 2 px minimum",
                    g.period_px
                )));
            }
            if g.count == 0 {
                return Err(Error::InvalidArgument(format!("group {i}: zero bars")));
            }
            if g.x < 0.0 || g.y < 0.0 || g.x + g.width > side || g.y + g.height > side {
                return Err(Error::InvalidArgument(format!(
                    "group {i}: rectangle leaves the {side}x{side} image"
                )));
            }
            let along = match g.orientation {
                BarOrientation::Vertical => g.width,
                BarOrientation::Horizontal => g.height,
            };
            if g.span() > along + 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "group {i}: {} bars of period {} overflow the rectangle",
                    g.count, g.period_px
                )));
            }
        }
        for i in 0..self.groups.len() {
            for j in i + 1..self.groups.len() {
                let (a, b) = (&self.groups[i], &self.groups[j]);
                let x_overlap = a.x < b.x + b.width && b.x < a.x + a.width;
                let y_overlap = a.y < b.y + b.height && b.y < a.y + a.height;
                if x_overlap && y_overlap {
                    return Err(Error::InvalidArgument(format!(
                        "groups {i} and {j} overlap"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Uniformly rescale the target geometry; used to read a target
    /// designed on the high-res grid off a binned low-res frame. The
    /// scaled side must land on an integer.
    pub fn scaled(&self, factor: f64) -> Result<BarTargetSpec> {
        let side = self.side as f64 * factor;
        if (side - side.round()).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "scaled side {side} is not an integer"
            )));
        }
        Ok(BarTargetSpec {
            side: side.round() as usize,
            background: self.background,
            foreground: self.foreground,
            groups: self
                .groups
                .iter()
                .map(|g| BarGroup {
                    period_px: g.period_px * factor,
                    orientation: g.orientation,
                    count: g.count,
                    x: g.x * factor,
                    y: g.y * factor,
                    width: g.width * factor,
                    height: g.height * factor,
                })
                .collect(),
        })
    }
}

/// Render the bar target, anti-aliased by 4x supersampled box averaging.
pub fn generate_bar_target(spec: &BarTargetSpec) -> Result<Image> {
    spec.validate()?;
    const SS: usize = 4;
    let inv = 1.0 / (SS * SS) as f64;
    Image::from_fn(spec.side, spec.side, 1.0, |x, y| {
        let mut acc = 0.0;
        for sy in 0..SS {
            for sx in 0..SS {
                let px = x as f64 + (sx as f64 + 0.5) / SS as f64;
                let py = y as f64 + (sy as f64 + 0.5) / SS as f64;
                acc += sample_level(spec, px, py);
            }
        }
        acc * inv
    })
}

fn sample_level(spec: &BarTargetSpec, sx: f64, sy: f64) -> f64 {
    for g in &spec.groups {
        if !g.rect_contains(sx, sy) {
            continue;
        }
        let t = match g.orientation {
            BarOrientation::Vertical => sx - g.x,
            BarOrientation::Horizontal => sy - g.y,
        };
        if t < g.span() && t.rem_euclid(g.period_px) < g.period_px / 2.0 {
            return spec.foreground;
        }
        return spec.background;
    }
    spec.background
}

/// Michelson-style contrast of one bar group, sampled at the group's
/// known geometry: the mean along bright-bar centerlines minus the mean
/// along dark-gap centerlines, over their sum. Contrast inversion (bright
/// reading darker than dark) clamps to zero: the feature is not resolved.
pub fn resolved_contrast(img: &Image, spec: &BarTargetSpec, group_index: usize) -> Result<f64> {
    spec.validate()?;
    let g = spec
        .groups
        .get(group_index)
        .ok_or_else(|| Error::InvalidArgument(format!("no group {group_index}")))?;
    if img.width() != spec.side || img.height() != spec.side {
        return Err(Error::DimensionMismatch(format!(
            "image is {}x{} but the target spec is {}x{}",
            img.width(),
            img.height(),
            spec.side,
            spec.side
        )));
    }

    // pixel centers sampled along each centerline, inset one pixel from
    // the rectangle so edge anti-aliasing stays out of the means
    let inset = 1.0;
    let (lane_lo, lane_hi) = match g.orientation {
        BarOrientation::Vertical => (g.y + inset, g.y + g.height - inset),
        BarOrientation::Horizontal => (g.x + inset, g.x + g.width - inset),
    };
    let lane_first = (lane_lo - 0.5).ceil() as isize;
    let lane_last = (lane_hi - 0.5).floor() as isize;
    if lane_last < lane_first {
        return Err(Error::InvalidArgument("group rectangle too thin to sample".into()));
    }

    let mut bright = 0.0;
    let mut dark = 0.0;
    let mut samples = 0usize;
    for bar in 0..g.count {
        let along = bar as f64 * g.period_px;
        let (bright_c, dark_c) = (along + g.period_px / 4.0, along + 3.0 * g.period_px / 4.0);
        for lane in lane_first..=lane_last {
            let lane_coord = lane as f64;
            match g.orientation {
                BarOrientation::Vertical => {
                    bright += img.sample_bilinear(g.x + bright_c - 0.5, lane_coord);
                    dark += img.sample_bilinear(g.x + dark_c - 0.5, lane_coord);
                }
                BarOrientation::Horizontal => {
                    bright += img.sample_bilinear(lane_coord, g.y + bright_c - 0.5);
                    dark += img.sample_bilinear(lane_coord, g.y + dark_c - 0.5);
                }
            }
            samples += 1;
        }
    }
    let mb = bright / samples as f64;
    let md = dark / samples as f64;
    let denom = mb + md;
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok(((mb - md) / denom).clamp(0.0, 1.0))
}

/// Smooth strictly positive test scene: a seeded mixture of low-frequency
/// plane waves (no energy above ~0.12 cycles/pixel). Registration is
/// exact on such content up to interpolation error.
pub fn bandlimited_scene(side: usize, seed: u64) -> Result<Image> {
    use rand::{Rng, SeedableRng};
    if side == 0 {
        return Err(Error::InvalidArgument("scene side must be positive".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..10)
        .map(|_| {
            (
                rng.random_range(-0.12..0.12),
                rng.random_range(-0.12..0.12),
                rng.random_range(0.04..0.16),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    Image::from_fn(side, side, 1.0, |x, y| {
        let mut v = 0.5;
        for &(fx, fy, amp, phase) in &waves {
            v += amp * (std::f64::consts::TAU * (fx * x as f64 + fy * y as f64) + phase).sin();
        }
        v.max(0.0)
    })
}
