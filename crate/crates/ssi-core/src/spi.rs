//! Hadamard-basis single-pixel imaging: pattern generation, detector
//! measurement simulation and the exact inverse reconstruction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard::{fwht, hadamard_matrix};
use crate::image::Image;

/// How illumination patterns encode the bipolar Hadamard rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementScheme {
    /// Complementary {0,1} pattern pairs; the pair difference realizes one
    /// bipolar inner product. This is what a physical light modulator can
    /// display.
    DifferentialPairs,
    /// Raw {+1,-1} patterns, usable only in noiseless simulation.
    RawBipolar,
}

/// Per-measurement noise applied to the simulated detector readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    /// Additive zero-mean Gaussian read noise with the given standard
    /// deviation, in the same linear intensity units as the measurements.
    AdditiveGaussian { sigma: f64 },
    /// Shot noise: the reading m becomes Poisson(max(m,0) * scale) / scale,
    /// so larger `scale` means more collected photons and less noise.
    Poisson { scale: f64 },
}

impl NoiseModel {
    pub fn is_none(&self) -> bool {
        matches!(self, NoiseModel::None)
    }

    /// Apply the model to one reading. Each measurement index draws from
    /// its own counter-based substream of `seed`, so results do not depend
    /// on evaluation order.
    pub fn apply(&self, clean: f64, seed: u64, measurement_index: u64) -> f64 {
        match *self {
            NoiseModel::None => clean,
            NoiseModel::AdditiveGaussian { sigma } => {
                if sigma == 0.0 {
                    return clean;
                }
                let mut rng = substream(seed, measurement_index);
                let normal = Normal::new(0.0, sigma).expect("sigma must be finite and >= 0");
                clean + normal.sample(&mut rng)
            }
            NoiseModel::Poisson { scale } => {
                let lambda = (clean * scale).max(0.0);
                if lambda == 0.0 {
                    return 0.0;
                }
                let mut rng = substream(seed, measurement_index);
                let poisson = Poisson::new(lambda).expect("lambda is positive and finite");
                poisson.sample(&mut rng) / scale
            }
        }
    }
}

/// Independent RNG substream for one measurement index.
fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Ordered illumination patterns for an N x N basis.
#[derive(Debug, Clone)]
pub struct PatternSet {
    basis_side: usize,
    scheme: MeasurementScheme,
    /// Each pattern is a row-major N*N array; entries are {0,1} for the
    /// differential scheme and {-1,+1} for the raw scheme.
    patterns: Vec<Vec<i8>>,
}

impl PatternSet {
    pub fn basis_side(&self) -> usize {
        self.basis_side
    }

    pub fn scheme(&self) -> MeasurementScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Row-major N*N entries of pattern `k`.
    pub fn pattern(&self, k: usize) -> &[i8] {
        &self.patterns[k]
    }
}

/// Detector readings in pattern order.
#[derive(Debug, Clone)]
pub struct MeasurementVector {
    pub basis_side: usize,
    pub scheme: MeasurementScheme,
    pub values: Vec<f64>,
}

/// Reshape the rows of the order-N^2 Sylvester Hadamard matrix into N x N
/// illumination patterns. The differential scheme emits, per row h, the
/// complementary pair (1+h)/2 and (1-h)/2.
pub fn generate_patterns(basis_side: usize, scheme: MeasurementScheme) -> Result<PatternSet> {
    if basis_side == 0 || !basis_side.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "basis side must be a power of two, got {basis_side}"
        )));
    }
    let order = basis_side * basis_side;
    let h = hadamard_matrix(order)?;
    let mut patterns = Vec::with_capacity(match scheme {
        MeasurementScheme::DifferentialPairs => 2 * order,
        MeasurementScheme::RawBipolar => order,
    });
    for row in 0..order {
        match scheme {
            MeasurementScheme::RawBipolar => {
                patterns.push(h.row(row).to_vec());
            }
            MeasurementScheme::DifferentialPairs => {
                let pos: Vec<i8> = h.row(row).iter().map(|&e| (1 + e) / 2).collect();
                let neg: Vec<i8> = h.row(row).iter().map(|&e| (1 - e) / 2).collect();
                patterns.push(pos);
                patterns.push(neg);
            }
        }
    }
    Ok(PatternSet { basis_side, scheme, patterns })
}

/// Simulate the 1D intensity signal a single-pixel detector records while
/// the patterns play: one inner product of pattern and scene per reading,
/// plus noise. Pattern order is preserved.
pub fn simulate_measurements(
    scene: &Image,
    patterns: &PatternSet,
    noise: &NoiseModel,
    seed: u64,
) -> Result<MeasurementVector> {
    simulate_measurements_offset(scene, patterns, noise, seed, 0)
}

/// As [`simulate_measurements`], with the noise substream counter starting
/// at `index_offset`. Multi-frame simulations give every frame a disjoint
/// substream range so that results are reproducible regardless of the
/// order or parallelism frames are evaluated with.
pub fn simulate_measurements_offset(
    scene: &Image,
    patterns: &PatternSet,
    noise: &NoiseModel,
    seed: u64,
    index_offset: u64,
) -> Result<MeasurementVector> {
    let n = patterns.basis_side();
    if scene.width() != n || scene.height() != n {
        return Err(Error::DimensionMismatch(format!(
            "scene is {}x{} but the pattern basis is {n}x{n}",
            scene.width(),
            scene.height()
        )));
    }
    let pixels = scene.pixels();
    let mut values = Vec::with_capacity(patterns.len());
    for (k, pattern) in patterns.patterns.iter().enumerate() {
        let clean: f64 = pattern
            .iter()
            .zip(pixels.iter())
            .map(|(&p, &s)| p as f64 * s)
            .sum();
        values.push(noise.apply(clean, seed, index_offset + k as u64));
    }
    Ok(MeasurementVector { basis_side: n, scheme: patterns.scheme(), values })
}

/// Invert a measurement vector back to an N x N image.
///
/// The differential scheme first collapses pattern pairs to their bipolar
/// coefficients d_k = m_{2k} - m_{2k+1}; the image is then
/// (1/N^2) * H^T * d, computed with the fast transform (Sylvester H is
/// symmetric). A noiseless round trip is exact.
pub fn reconstruct_image(m: &MeasurementVector) -> Result<Image> {
    let n = m.basis_side;
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "basis side must be a power of two, got {n}"
        )));
    }
    let order = n * n;
    let mut coeffs: Vec<f64> = match m.scheme {
        MeasurementScheme::RawBipolar => {
            if m.values.len() != order {
                return Err(Error::InvalidArgument(format!(
                    "raw measurement vector has {} values, expected {order}",
                    m.values.len()
                )));
            }
            m.values.clone()
        }
        MeasurementScheme::DifferentialPairs => {
            if m.values.len() != 2 * order {
                return Err(Error::InvalidArgument(format!(
                    "differential measurement vector has {} values, expected {}",
                    m.values.len(),
                    2 * order
                )));
            }
            m.values.chunks_exact(2).map(|pair| pair[0] - pair[1]).collect()
        }
    };
    fwht(&mut coeffs);
    let inv = 1.0 / order as f64;
    for v in coeffs.iter_mut() {
        *v *= inv;
    }
    Image::from_vec(n, n, 0.0, coeffs)
}
