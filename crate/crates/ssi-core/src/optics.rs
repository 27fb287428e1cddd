//! Geometry of the synthetic sampling system: detector positions and
//! defocus map to per-frame image shifts, and the forward simulator
//! produces the stack of shifted low-sampling-rate frames a detector
//! array would retrieve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::spi::{
    generate_patterns, reconstruct_image, simulate_measurements_offset, MeasurementScheme,
    NoiseModel,
};

/// Axial and lateral geometry of the imaging system.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalGeometry {
    /// Axial distance between the (virtual) source plane and the focal
    /// plane of the objective, in millimeters.
    pub z1_mm: f64,
    /// Signed defocus distance of the specimen from the focal plane, in
    /// millimeters. Zero means in focus: no shift for any detector.
    pub z2_mm: f64,
    /// Lateral magnification of the microscope.
    pub magnification: f64,
    /// Numerical aperture of the objective.
    pub na: f64,
    /// Illumination wavelength in micrometers.
    pub wavelength_um: f64,
    /// Illumination-pattern pixel size at the modulator plane, micrometers.
    pub encoding_pixel_um: f64,
    /// Effective pitch of one low-sampling-rate pixel at the image plane,
    /// micrometers. Converts physical shifts to pixel units.
    pub lr_pixel_pitch_um: f64,
}

impl OpticalGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.z1_mm <= 0.0 {
            return Err(Error::InvalidArgument("z1 must be positive".into()));
        }
        if self.magnification <= 0.0 {
            return Err(Error::InvalidArgument("magnification must be positive".into()));
        }
        if !(self.na > 0.0 && self.na < 1.5) {
            return Err(Error::InvalidArgument("numerical aperture must be in (0, 1.5)".into()));
        }
        if self.wavelength_um <= 0.0 {
            return Err(Error::InvalidArgument("wavelength must be positive".into()));
        }
        if self.encoding_pixel_um <= 0.0 {
            return Err(Error::InvalidArgument("encoding pixel size must be positive".into()));
        }
        if self.lr_pixel_pitch_um <= 0.0 {
            return Err(Error::InvalidArgument("low-res pixel pitch must be positive".into()));
        }
        Ok(())
    }

    /// Demagnification ratio z2/z1 between the image shift (divided by M)
    /// and the lateral source offset.
    pub fn shift_ratio(&self) -> f64 {
        self.z2_mm / self.z1_mm
    }
}

/// Regular grid of single-pixel detectors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorArray {
    pub rows: usize,
    pub cols: usize,
    /// Lateral distance between adjacent detector centers, millimeters.
    pub pitch_mm: f64,
    /// Camera pixels binned per detector side; metadata for reports.
    #[serde(default = "default_binning")]
    pub binning: usize,
}

fn default_binning() -> usize {
    1
}

impl DetectorArray {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidArgument("detector array must be at least 1x1".into()));
        }
        if self.pitch_mm <= 0.0 {
            return Err(Error::InvalidArgument("detector pitch must be positive".into()));
        }
        if self.binning == 0 {
            return Err(Error::InvalidArgument("binning must be >= 1".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// 2D translation in low-sampling-rate pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftVector {
    pub dx: f64,
    pub dy: f64,
}

impl ShiftVector {
    pub const ZERO: ShiftVector = ShiftVector { dx: 0.0, dy: 0.0 };

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite()
    }
}

/// One shift component in both physical and pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageShift {
    /// Lateral image displacement in micrometers.
    pub um: f64,
    /// The same displacement in low-sampling-rate pixel units.
    pub lr_px: f64,
}

/// Lateral image shift induced by a source (or, by reciprocity, detector)
/// offset under defocus: S_image = M * offset * (z2 / z1). The sign
/// follows z2.
pub fn shift_from_geometry(geom: &OpticalGeometry, lateral_offset_mm: f64) -> Result<ImageShift> {
    geom.validate()?;
    let um = geom.magnification * lateral_offset_mm * 1000.0 * geom.shift_ratio();
    Ok(ImageShift { um, lr_px: um / geom.lr_pixel_pitch_um })
}

/// Per-detector image shifts, row-major over the array grid. Offsets are
/// measured from the array center so the mean shift is zero; each axis is
/// scaled independently.
pub fn array_shifts(geom: &OpticalGeometry, array: &DetectorArray) -> Result<Vec<ShiftVector>> {
    array.validate()?;
    let mut shifts = Vec::with_capacity(array.len());
    let cx = (array.cols as f64 - 1.0) / 2.0;
    let cy = (array.rows as f64 - 1.0) / 2.0;
    for r in 0..array.rows {
        for c in 0..array.cols {
            let off_x = (c as f64 - cx) * array.pitch_mm;
            let off_y = (r as f64 - cy) * array.pitch_mm;
            let sx = shift_from_geometry(geom, off_x)?;
            let sy = shift_from_geometry(geom, off_y)?;
            shifts.push(ShiftVector { dx: sx.lr_px, dy: sy.lr_px });
        }
    }
    Ok(shifts)
}

/// Depth of field of the objective: lambda/NA^2 + e/(M*NA), micrometers.
/// Within this range defocus shifts the image without losing resolution.
pub fn depth_of_field(geom: &OpticalGeometry) -> Result<f64> {
    geom.validate()?;
    Ok(geom.wavelength_um / (geom.na * geom.na)
        + geom.encoding_pixel_um / (geom.magnification * geom.na))
}

/// Options for the single-pixel-imaging leg of the forward simulation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiOptions {
    /// Side length N of the low-sampling-rate frames (power of two).
    pub basis_side: usize,
    #[serde(default = "default_scheme")]
    pub scheme: MeasurementScheme,
    /// When set, each frame is run through measurement simulation and
    /// reconstruction instead of being taken directly from the binned
    /// scene; noise applies only on this path.
    #[serde(default)]
    pub through_spi: bool,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
}

fn default_scheme() -> MeasurementScheme {
    MeasurementScheme::DifferentialPairs
}

fn default_noise() -> NoiseModel {
    NoiseModel::None
}

/// Shifted low-sampling-rate frames retrieved by a detector array.
#[derive(Debug, Clone)]
pub struct LowResStack {
    pub frames: Vec<Image>,
    /// Ground-truth shifts in low-res pixel units; available in simulation
    /// only.
    pub true_shifts: Option<Vec<ShiftVector>>,
    /// Index of the reference frame for registration.
    pub template_index: usize,
}

impl LowResStack {
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::InvalidArgument("stack has no frames".into()));
        }
        let (w, h) = (self.frames[0].width(), self.frames[0].height());
        if !self.frames.iter().all(|f| f.width() == w && f.height() == h) {
            return Err(Error::DimensionMismatch("stack frames differ in size".into()));
        }
        if let Some(ts) = &self.true_shifts {
            if ts.len() != self.frames.len() {
                return Err(Error::DimensionMismatch(
                    "true_shifts length differs from frame count".into(),
                ));
            }
        }
        if self.template_index >= self.frames.len() {
            return Err(Error::InvalidArgument("template index out of range".into()));
        }
        Ok(())
    }

    pub fn template(&self) -> &Image {
        &self.frames[self.template_index]
    }
}

/// Simulate the stack of low-sampling-rate frames the detector array
/// retrieves from a high-resolution scene.
///
/// Each detector sees the scene translated by its geometric shift; the
/// translation is applied on the high-resolution grid (so sub-pixel
/// displacements at the low-res grid are represented exactly), then the
/// frame is binned down to `basis_side`. With `through_spi` the binned
/// frame additionally goes through Hadamard measurement and
/// reconstruction, with `noise` applied per measurement.
pub fn simulate_lowres_stack(
    scene_hr: &Image,
    geom: &OpticalGeometry,
    array: &DetectorArray,
    spi: &SpiOptions,
    seed: u64,
) -> Result<LowResStack> {
    geom.validate()?;
    array.validate()?;
    let n = spi.basis_side;
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "basis side must be a power of two, got {n}"
        )));
    }
    if scene_hr.width() != scene_hr.height() {
        return Err(Error::DimensionMismatch(format!(
            "scene must be square, got {}x{}",
            scene_hr.width(),
            scene_hr.height()
        )));
    }
    if scene_hr.width() % n != 0 {
        return Err(Error::DimensionMismatch(format!(
            "scene side {} is not divisible by basis side {n}",
            scene_hr.width()
        )));
    }
    let factor = scene_hr.width() / n;
    let shifts = array_shifts(geom, array)?;

    let patterns = if spi.through_spi {
        Some(generate_patterns(n, spi.scheme)?)
    } else {
        None
    };

    let mut frames = Vec::with_capacity(shifts.len());
    for (k, s) in shifts.iter().enumerate() {
        let hr_shift = ShiftVector { dx: s.dx * factor as f64, dy: s.dy * factor as f64 };
        let mut frame = scene_hr.warp_subpixel(hr_shift).downsample_box(factor)?;
        frame.set_pixel_pitch_um(geom.lr_pixel_pitch_um);
        if let Some(patterns) = &patterns {
            let offset = (k * patterns.len()) as u64;
            let m = simulate_measurements_offset(&frame, patterns, &spi.noise, seed, offset)?;
            let mut rec = reconstruct_image(&m)?;
            rec.set_pixel_pitch_um(geom.lr_pixel_pitch_um);
            frame = rec;
        }
        frames.push(frame);
    }

    Ok(LowResStack { frames, true_shifts: Some(shifts), template_index: 0 })
}
