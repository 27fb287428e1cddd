//! Pipeline configuration: one TOML schema shared by every subcommand.
//! Unknown keys are an error.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{DetectorArray, OpticalGeometry, SpiOptions};
use crate::registration::RegistrationOptions;
use crate::superres::SolveOptions;
use crate::target::BarTargetSpec;

/// `[registration]` section: estimator options plus the template choice.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegistrationConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub normalize: bool,
    pub border_margin: usize,
    /// Which frame acts as the reference; the paper convention is the
    /// first detector.
    pub template_index: usize,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        let o = RegistrationOptions::default();
        Self {
            epsilon: o.epsilon,
            max_iterations: o.max_iterations,
            normalize: o.normalize,
            border_margin: o.border_margin,
            template_index: 0,
        }
    }
}

impl RegistrationConfig {
    pub fn options(&self) -> RegistrationOptions {
        RegistrationOptions {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            normalize: self.normalize,
            border_margin: self.border_margin,
        }
    }
}

/// `[superres]` section: solver options plus grid-factor overrides.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuperresConfig {
    /// Horizontal magnification factor; defaults to the array column count.
    pub l1: Option<usize>,
    /// Vertical magnification factor; defaults to the array row count.
    pub l2: Option<usize>,
    pub sigma: f64,
    pub truncation_radius: Option<f64>,
    pub lambda_reg: Option<f64>,
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
    /// Also export the weighting matrix as CSV triplets (large!).
    pub export_weights: bool,
}

impl Default for SuperresConfig {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            l1: None,
            l2: None,
            sigma: o.sigma,
            truncation_radius: o.truncation_radius,
            lambda_reg: o.lambda_reg,
            cg_tolerance: o.cg_tolerance,
            cg_max_iterations: o.cg_max_iterations,
            export_weights: false,
        }
    }
}

impl SuperresConfig {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            sigma: self.sigma,
            truncation_radius: self.truncation_radius,
            lambda_reg: self.lambda_reg,
            cg_tolerance: self.cg_tolerance,
            cg_max_iterations: self.cg_max_iterations,
        }
    }
}

/// `[paths]` section: optional external inputs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Scene image to ingest instead of generating the bar target
    /// (`.pgm` or `.ssif`).
    pub scene: Option<PathBuf>,
}

/// Complete description of one pipeline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// RNG seed; required whenever the noise model is not `none`.
    pub seed: Option<u64>,
    pub geometry: OpticalGeometry,
    pub array: DetectorArray,
    pub spi: SpiOptions,
    #[serde(default)]
    pub registration: RegistrationConfig,
    #[serde(default)]
    pub superres: SuperresConfig,
    /// Synthetic scene description; may be omitted when `paths.scene`
    /// provides the input.
    #[serde(default)]
    pub target: Option<BarTargetSpec>,
    #[serde(default)]
    pub paths: PathsConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.array.validate()?;
        if !self.spi.noise.is_none() && self.seed.is_none() {
            return Err(Error::Config(
                "a seed is required whenever the noise model is not `none`".into(),
            ));
        }
        if let Some(t) = &self.target {
            t.validate()?;
        }
        if self.target.is_none() && self.paths.scene.is_none() {
            return Err(Error::Config(
                "either [target] or paths.scene must provide a scene".into(),
            ));
        }
        self.superres.solve_options().validate()?;
        self.registration.options().validate()?;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Grid magnification factors, defaulting to the array dimensions.
    pub fn grid_factors(&self) -> (usize, usize) {
        (
            self.superres.l1.unwrap_or(self.array.cols),
            self.superres.l2.unwrap_or(self.array.rows),
        )
    }
}

/// Parse a TOML string into a validated configuration.
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let config: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Load a configuration file, applying `key.path=value` overrides before
/// deserialization.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    if overrides.is_empty() {
        return parse_config(&text);
    }
    let mut value: toml::Value =
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    for spec in overrides {
        apply_override(&mut value, spec)?;
    }
    let config: PipelineConfig =
        value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Set one dotted-path key in a TOML value tree, e.g.
/// `geometry.z2_mm=0.02` or `spi.noise.kind="additive_gaussian"`.
pub fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let parsed: toml::Value = toml::from_str(&format!("v = {raw}"))
        .map(|t: toml::Value| t.get("v").cloned().unwrap())
        .or_else(|_| toml::from_str(&format!("v = {raw:?}")).map(|t: toml::Value| t.get("v").cloned().unwrap()))
        .map_err(|e| Error::Config(format!("cannot parse override value {raw:?}: {e}")))?;

    let keys: Vec<&str> = path.split('.').collect();
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        node = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key} is not a table")))?
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    node.as_table_mut()
        .ok_or_else(|| Error::Config("override path ends inside a non-table".into()))?
        .insert(keys[keys.len() - 1].to_string(), parsed);
    Ok(())
}
