//! Synthetic sampling imaging on synthetic scenes.
//!
//! A detector array behind a Hadamard single-pixel microscope retrieves
//! many low-sampling-rate images at once; a small defocus turns the
//! detector offsets into sub-pixel image shifts. This crate simulates
//! that forward system, estimates the shifts by gradient descent, and
//! fuses the stack into one high-sampling-rate image through a sparse
//! Gaussian-weighted least-squares solve.
//!
//! Pipeline stages map onto modules:
//!
//! - [`spi`]: Hadamard patterns, measurement simulation, exact inverse.
//! - [`optics`]: shift geometry, depth of field, the low-res stack simulator.
//! - [`registration`]: sub-pixel translation estimation against a template.
//! - [`superres`]: weighting-matrix assembly and the conjugate-gradient solve.
//! - [`target`], [`metrics`]: synthetic bar targets and quality readouts.
//! - [`pipeline`], [`config`], [`io`]: batch orchestration and file formats.

pub mod config;
pub mod error;
pub mod hadamard;
pub mod image;
pub mod io;
pub mod metrics;
pub mod optics;
pub mod pipeline;
pub mod registration;
pub mod spi;
pub mod superres;
pub mod target;

pub use error::{Error, Result};
pub use image::Image;
pub use optics::{DetectorArray, LowResStack, OpticalGeometry, ShiftVector};
pub use registration::{RegistrationOptions, ShiftEstimate};
pub use spi::{MeasurementScheme, NoiseModel};
pub use superres::{GridSpec, SolveOptions};
pub use target::BarTargetSpec;
