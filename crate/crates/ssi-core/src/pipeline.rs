//! End-to-end batch run: scene -> simulated stack -> shift estimation ->
//! super-resolution solve -> metrics, with every intermediate artifact
//! written to the output directory and a machine-readable report tying
//! them together.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io;
use crate::metrics::{log_spectrum, psnr};
use crate::optics::{simulate_lowres_stack, ShiftVector};
use crate::registration::estimate_stack_shifts;
use crate::superres::{assemble_system, solve_high_res, GridSpec};
use crate::target::{generate_bar_target, resolved_contrast};

/// Guard that owns the output directory for the duration of a run.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir)?;
        let path = out_dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::OutputLocked(out_dir.to_path_buf()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// One row of the shift table in the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftRow {
    pub frame: usize,
    pub dx: f64,
    pub dy: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Contrast of one bar group measured on the low-res template and on the
/// synthesized high-res image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupContrast {
    pub group: usize,
    pub period_lr_px: f64,
    pub lr_template: f64,
    pub high_res: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport {
    pub lambda: f64,
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub converged: bool,
    /// Distinct sub-pixel phases available per axis; fewer phases than
    /// the magnification factor means the solve leans on the regularizer.
    pub distinct_phases_x: usize,
    pub distinct_phases_y: usize,
    pub phase_support_warning: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    /// PSNR of the synthesized image against the ground-truth scene, dB.
    pub psnr_high_res_db: Option<f64>,
    /// PSNR of the nearest-neighbor upsampled template, dB.
    pub psnr_baseline_db: Option<f64>,
    pub contrasts: Vec<GroupContrast>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub name: String,
    pub sha256: String,
}

/// Everything a run produced, mirrored into `report.toml`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub shifts: Vec<ShiftRow>,
    pub solver: SolverReport,
    pub metrics: MetricsReport,
    pub artifacts: Vec<ArtifactRef>,
    /// Echo of the configuration the run used.
    pub config: PipelineConfig,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Internal(format!("[{name}] {e}")))
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Load or synthesize the scene for a run.
pub fn load_scene(config: &PipelineConfig, config_dir: &Path) -> Result<Image> {
    if let Some(scene_path) = &config.paths.scene {
        let path = if scene_path.is_absolute() {
            scene_path.clone()
        } else {
            config_dir.join(scene_path)
        };
        return io::read_image(&path);
    }
    let target = config
        .target
        .as_ref()
        .ok_or_else(|| Error::Config("no [target] and no paths.scene".into()))?;
    generate_bar_target(target)
}

/// Turn per-frame registration estimates into the mapping shifts the
/// weighting matrix expects: negated (the matrix wants the displacement
/// that carries frame samples onto the reference grid) and re-centered to
/// zero mean, so the synthesized grid coincides with the stack's mean
/// sampling grid rather than the arbitrary template. The overall
/// translation of the scene is unobservable either way.
pub fn mapping_shifts_from_estimates(estimates: &[crate::registration::ShiftEstimate]) -> Vec<ShiftVector> {
    let n = estimates.len() as f64;
    let mean_x = estimates.iter().map(|e| e.p.p1).sum::<f64>() / n;
    let mean_y = estimates.iter().map(|e| e.p.p2).sum::<f64>() / n;
    estimates
        .iter()
        .map(|e| ShiftVector { dx: -(e.p.p1 - mean_x), dy: -(e.p.p2 - mean_y) })
        .collect()
}

/// Execute the full pipeline into `out_dir`. Any stage error aborts the
/// run with a stage-tagged diagnostic; artifacts written before the
/// failure stay on disk.
pub fn run_pipeline(config: &PipelineConfig, out_dir: &Path) -> Result<RunReport> {
    config.validate()?;
    let _lock = DirLock::acquire(out_dir)?;
    let seed = config.seed();
    let mut artifacts: Vec<(String, PathBuf)> = Vec::new();

    let write_img = |name: &str, img: &Image, artifacts: &mut Vec<(String, PathBuf)>| -> Result<()> {
        let path = out_dir.join(name);
        io::write_image(&path, img)?;
        artifacts.push((name.to_string(), path.clone()));
        if name.ends_with(".pgm") {
            let meta = format!("{name}.meta");
            artifacts.push((meta.clone(), out_dir.join(meta)));
        }
        Ok(())
    };

    // scene
    let scene = stage("scene", load_scene(config, Path::new(".")))?;
    write_img("scene.pgm", &scene, &mut artifacts)?;
    write_img("scene.ssif", &scene, &mut artifacts)?;

    // forward simulation
    let mut stack = stage(
        "simulate",
        simulate_lowres_stack(&scene, &config.geometry, &config.array, &config.spi, seed),
    )?;
    stack.template_index = config.registration.template_index;
    stage("simulate", stack.validate())?;
    fs::create_dir_all(out_dir.join("frames"))?;
    for (k, frame) in stack.frames.iter().enumerate() {
        let name = format!("frames/frame_{k:03}.ssif");
        let path = out_dir.join(&name);
        io::write_ssif(&path, frame)?;
        artifacts.push((name, path));
    }
    if let Some(true_shifts) = &stack.true_shifts {
        let path = out_dir.join("true_shifts.csv");
        io::write_true_shift_csv(&path, true_shifts)?;
        artifacts.push(("true_shifts.csv".into(), path));
    }

    // registration
    let estimates = stage("register", estimate_stack_shifts(&stack, &config.registration.options()))?;
    let shifts_path = out_dir.join("shifts.csv");
    io::write_shift_csv(&shifts_path, &estimates)?;
    artifacts.push(("shifts.csv".into(), shifts_path));

    // super-resolution
    let (l1, l2) = config.grid_factors();
    let grid = GridSpec { n1: config.spi.basis_side, n2: config.spi.basis_side, l1, l2 };
    let mapping = mapping_shifts_from_estimates(&estimates);
    let opts = config.superres.solve_options();
    let (observations, weights) = stage("superres", assemble_system(&stack, &mapping, &grid, &opts))?;
    let (phases_x, phases_y) = grid.phase_support(&mapping, 1e-3);
    let phase_support_warning = if phases_x < l1 || phases_y < l2 {
        Some(format!(
            "only {phases_x} x-phases and {phases_y} y-phases support factors {l1}x{l2}; \
             the solve is underdetermined and leans on the regularizer"
        ))
    } else {
        None
    };
    if config.superres.export_weights {
        let path = out_dir.join("weights.csv");
        io::write_weight_csv(&path, &weights)?;
        artifacts.push(("weights.csv".into(), path));
    }
    let solved = stage("superres", solve_high_res(&observations, &weights, &opts))?;
    let mut high_res = solved.image.clone();
    high_res.set_pixel_pitch_um(config.geometry.lr_pixel_pitch_um / l1 as f64);
    write_img("high_res.pgm", &high_res, &mut artifacts)?;
    write_img("high_res.ssif", &high_res, &mut artifacts)?;

    // baseline and metrics
    let baseline = stage("metrics", stack.template().upsample_nearest(l1))?;
    write_img("baseline_nn.ssif", &baseline, &mut artifacts)?;
    let spectrum = log_spectrum(&high_res);
    write_img("high_res_spectrum.pgm", &spectrum, &mut artifacts)?;

    let mut metrics = MetricsReport {
        psnr_high_res_db: None,
        psnr_baseline_db: None,
        contrasts: Vec::new(),
    };
    if scene.same_dims(&high_res) {
        let peak = scene.max_value();
        metrics.psnr_high_res_db = Some(stage("metrics", psnr(&high_res, &scene, peak))?);
        metrics.psnr_baseline_db = Some(stage("metrics", psnr(&baseline, &scene, peak))?);
    }
    if let Some(target) = &config.target {
        let lr_scale = config.spi.basis_side as f64 / target.side as f64;
        let hr_scale = high_res.width() as f64 / target.side as f64;
        let lr_spec = target.scaled(lr_scale);
        let hr_spec = target.scaled(hr_scale);
        if let (Ok(lr_spec), Ok(hr_spec)) = (lr_spec, hr_spec) {
            for g in 0..target.groups.len() {
                let lr = resolved_contrast(stack.template(), &lr_spec, g);
                let hr = resolved_contrast(&high_res, &hr_spec, g);
                if let (Ok(lr), Ok(hr)) = (lr, hr) {
                    metrics.contrasts.push(GroupContrast {
                        group: g,
                        period_lr_px: lr_spec.groups[g].period_px,
                        lr_template: lr,
                        high_res: hr,
                    });
                }
            }
        }
    }

    let report = RunReport {
        seed,
        shifts: estimates
            .iter()
            .enumerate()
            .map(|(frame, e)| ShiftRow {
                frame,
                dx: e.p.p1,
                dy: e.p.p2,
                iterations: e.iterations,
                converged: e.converged,
            })
            .collect(),
        solver: SolverReport {
            lambda: solved.lambda,
            iterations: solved.iterations,
            final_relative_residual: solved.final_relative_residual,
            converged: solved.converged,
            distinct_phases_x: phases_x,
            distinct_phases_y: phases_y,
            phase_support_warning,
        },
        metrics,
        artifacts: artifacts
            .iter()
            .map(|(name, path)| {
                Ok(ArtifactRef { name: name.clone(), sha256: sha256_hex(path)? })
            })
            .collect::<Result<Vec<_>>>()?,
        config: config.clone(),
    };

    let text = toml::to_string(&report).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(out_dir.join("report.toml"), text)?;
    Ok(report)
}

/// Outcome of a pipeline run, reloaded from disk.
pub fn read_report(out_dir: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(out_dir.join("report.toml"))?;
    toml::from_str(&text).map_err(|e| Error::Format(e.to_string()))
}
