//! Run configuration read from a small TOML document.
//!
//! ```toml
//! seed = 7
//!
//! [grid]
//! nx = 16            # ny defaults to nx; ny = 1 selects a 1-D grid
//! lx = 6.283185307179586
//!
//! [time]
//! final_time = 1.0
//! steps = 100
//!
//! [potential]
//! variant = "logarithmic"       # regular | logarithmic | double-obstacle
//! c1 = 2.0
//! eps = 1e-4
//! regularization = "piecewise-log"   # exact | yosida | piecewise-log
//!
//! [initial]
//! kind = "smooth-range"         # constant | band-limited | smooth-range | snapshot
//! lo = -0.6
//! hi = 0.6
//!
//! [control]
//! m = 0.2
//! mprime = 10.0
//! kind = "random-smooth"        # constant | random-smooth
//! amplitude = 0.2
//! ```
//!
//! Sections `[cost]`, `[optimizer]`, `[verify]` and `[oracle]` are optional.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::control::{CostSpec, OptimizerConfig};
use crate::error::{Error, Result};
use crate::potentials::{PotentialSpec, Regularization, Variant};
use crate::rng::{random_band_limited, random_smooth_in_range, random_smooth_series, seeded};
use crate::spectral::{Field, Grid};
use crate::state::{simulate_series, validate_compatibility, ControlFunction, TimeGrid, DEFAULT_DELTA_MARGIN};

use super::io::read_snapshots;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub override_compatibility: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub potential: PotentialConfig,
    pub initial: InitialConfig,
    pub control: ControlConfig,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub oracle: OracleSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: Option<usize>,
    #[serde(default = "two_pi")]
    pub lx: f64,
    pub ly: Option<f64>,
}

fn two_pi() -> f64 {
    2.0 * PI
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub final_time: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    Regular,
    Logarithmic,
    DoubleObstacle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizationName {
    Exact,
    Yosida,
    PiecewiseLog,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub variant: VariantName,
    #[serde(default = "default_c")]
    pub c1: f64,
    #[serde(default = "default_c")]
    pub c2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub regularization: Option<RegularizationName>,
    pub stabilization: Option<f64>,
}

fn default_c() -> f64 {
    2.0
}

fn default_eps() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Constant,
    BandLimited,
    SmoothRange,
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKind,
    #[serde(default)]
    pub value: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub frame: usize,
}

fn default_modes() -> usize {
    8
}

fn default_amplitude() -> f64 {
    0.1
}

fn default_lo() -> f64 {
    -0.5
}

fn default_hi() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    Constant,
    RandomSmooth,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub m: f64,
    #[serde(default = "infinity")]
    pub mprime: f64,
    #[serde(default = "constant_kind")]
    pub kind: ControlKind,
    #[serde(default)]
    pub value: f64,
    #[serde(default = "default_control_modes")]
    pub modes: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn infinity() -> f64 {
    f64::INFINITY
}

fn constant_kind() -> ControlKind {
    ControlKind::Constant
}

fn default_control_modes() -> usize {
    6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// Constant targets `target_value`.
    Constant,
    /// Targets produced by a forward run with the `[cost.generator]` control.
    ForwardRun,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    #[serde(default = "default_alpha")]
    pub alpha: [f64; 4],
    #[serde(default = "constant_targets")]
    pub targets: TargetKind,
    #[serde(default)]
    pub target_value: f64,
    pub generator: Option<GeneratorConfig>,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            targets: TargetKind::Constant,
            target_value: 0.0,
            generator: None,
        }
    }
}

fn default_alpha() -> [f64; 4] {
    [1.0, 1.0, 0.0, 1e-3]
}

fn constant_targets() -> TargetKind {
    TargetKind::Constant
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "default_control_modes")]
    pub modes: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub initial_step: f64,
    pub stationarity_tol: f64,
    pub dykstra_iters: usize,
    pub probes: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            max_iters: d.max_iters,
            armijo_c: d.armijo_c,
            backtrack: d.backtrack,
            max_backtracks: d.max_backtracks,
            initial_step: d.initial_step,
            stationarity_tol: d.stationarity_tol,
            dykstra_iters: d.dykstra_iters,
            probes: 100,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Names of registry checks to run; empty runs all of them.
    pub checks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub modes: usize,
    pub substeps: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { modes: 8, substeps: 10 }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn key_at(text: &str, offset: usize) -> String {
    let start = text[..offset.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next().unwrap_or("");
    match line.split_once('=') {
        Some((k, _)) => k.trim().to_string(),
        None => line.trim().trim_matches(['[', ']']).to_string(),
    }
}

impl RunConfig {
    /// Parses without semantic validation.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start);
            let missing = e
                .message()
                .strip_prefix("missing field `")
                .and_then(|rest| rest.split('`').next())
                .map(str::to_string);
            Error::Parse {
                line: line_of(text, offset),
                key: missing.unwrap_or_else(|| key_at(text, offset)),
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<Grid> {
        let ny = self.grid.ny.unwrap_or(self.grid.nx);
        let ly = self.grid.ly.unwrap_or(self.grid.lx);
        Grid::new(self.grid.nx, ny, self.grid.lx, ly).map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.time.final_time, self.time.steps)
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        let p = &self.potential;
        if !(p.eps > 0.0 && p.eps < 1.0) {
            return Err(Error::Validation(format!("eps ∈ (0,1) required, got eps = {}", p.eps)));
        }
        let variant = match p.variant {
            VariantName::Regular => Variant::Regular,
            VariantName::Logarithmic => Variant::Logarithmic { c1: p.c1 },
            VariantName::DoubleObstacle => Variant::DoubleObstacle { c2: p.c2 },
        };
        let regularization = match (p.regularization, p.variant) {
            (Some(RegularizationName::Exact), _) => Regularization::Exact,
            (Some(RegularizationName::Yosida), _) => Regularization::Yosida,
            (Some(RegularizationName::PiecewiseLog), _) => Regularization::PiecewiseLog,
            (None, VariantName::DoubleObstacle) => Regularization::Yosida,
            (None, _) => Regularization::Exact,
        };
        PotentialSpec::new(variant, p.eps, regularization, p.stabilization).map_err(|e| Error::Validation(e.to_string()))
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn initial_state(&self) -> Result<Field> {
        let grid = self.grid()?;
        let init = &self.initial;
        let mut rng = seeded(self.seed);
        Ok(match init.kind {
            InitialKind::Constant => Field::constant(grid, init.value),
            InitialKind::BandLimited => {
                let f = random_band_limited(&mut rng, grid, init.modes);
                f.scale(init.amplitude / f.max_abs().max(1e-300))
            }
            InitialKind::SmoothRange => {
                if !(init.lo < init.hi) {
                    return Err(Error::Validation(format!("initial range requires lo < hi, got [{}, {}]", init.lo, init.hi)));
                }
                random_smooth_in_range(&mut rng, grid, init.modes, init.lo, init.hi)
            }
            InitialKind::Snapshot => {
                let path = init
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Validation("initial.kind = \"snapshot\" requires initial.path".into()))?;
                let path = self.resolve(path);
                if !path.exists() {
                    return Err(Error::Validation(format!("snapshot file {} does not exist", path.display())));
                }
                let (g, frames) = read_snapshots(&path)?;
                if (g.nx(), g.ny()) != (grid.nx(), grid.ny()) {
                    return Err(Error::Validation(format!(
                        "snapshot grid {}x{} differs from configured {}x{}",
                        g.nx(),
                        g.ny(),
                        grid.nx(),
                        grid.ny()
                    )));
                }
                let frame = frames
                    .into_iter()
                    .nth(init.frame)
                    .ok_or_else(|| Error::Validation(format!("snapshot has no frame {}", init.frame)))?;
                Field::from_values(grid, frame)?
            }
        })
    }

    /// Raw control series; not yet checked against M and M′.
    fn control_series(&self, grid: Grid, time: &TimeGrid, kind: ControlKind, value: f64, modes: usize, amplitude: f64, stream: u64) -> Vec<Field> {
        match kind {
            ControlKind::Constant => vec![Field::constant(grid, value); time.steps() + 1],
            ControlKind::RandomSmooth => {
                let mut rng = seeded(self.seed.wrapping_add(stream));
                random_smooth_series(&mut rng, grid, time.steps() + 1, modes, amplitude)
            }
        }
    }

    pub fn control(&self) -> Result<ControlFunction> {
        let grid = self.grid()?;
        let time = self.time_grid()?;
        let c = &self.control;
        let u = self.control_series(grid, &time, c.kind, c.value, c.modes, c.amplitude, 1);
        ControlFunction::new(time, u, c.m, c.mprime)
    }

    pub fn cost(&self, potential: &PotentialSpec, phi0: &Field) -> Result<CostSpec> {
        let grid = self.grid()?;
        let time = self.time_grid()?;
        let c = &self.cost;
        match c.targets {
            TargetKind::Constant => {
                let t = Field::constant(grid, c.target_value);
                CostSpec::new(c.alpha, vec![t.clone(); time.steps() + 1], t.clone(), vec![t; time.steps() + 1])
            }
            TargetKind::ForwardRun => {
                let u = self.generator_control()?.ok_or_else(|| {
                    Error::Validation("cost.targets = \"forward-run\" requires [cost.generator]".into())
                })?;
                let traj = simulate_series(phi0, &time, &u, potential)?;
                CostSpec::from_trajectory(c.alpha, &traj)
            }
        }
    }

    /// Control that generated the targets, projected onto the admissible set.
    pub fn generator_control(&self) -> Result<Option<Vec<Field>>> {
        let Some(g) = &self.cost.generator else {
            return Ok(None);
        };
        let grid = self.grid()?;
        let time = self.time_grid()?;
        let raw = self.control_series(grid, &time, ControlKind::RandomSmooth, 0.0, g.modes, g.amplitude, 2);
        let projected = crate::control::project_uad(&raw, &time, self.control.m, self.control.mprime, self.optimizer.dykstra_iters)?;
        Ok(Some(projected.into_slices()))
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            max_iters: o.max_iters,
            armijo_c: o.armijo_c,
            backtrack: o.backtrack,
            max_backtracks: o.max_backtracks,
            initial_step: o.initial_step,
            stationarity_tol: o.stationarity_tol,
            dykstra_iters: o.dykstra_iters,
            seed: self.seed,
            override_compatibility: self.override_compatibility,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Checks every constraint of the constituent types and, unless
    /// overridden, the compatibility of φ₀ and M with D(β).
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.time_grid().map_err(|e| Error::Validation(e.to_string()))?;
        let potential = self.potential()?;
        let phi0 = self.initial_state()?;
        let control = self.control().map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("control: {m}")),
            other => other,
        })?;
        if self.cost.alpha.iter().any(|a| !(*a >= 0.0)) || self.cost.alpha.iter().all(|a| *a == 0.0) {
            return Err(Error::Validation(format!(
                "cost.alpha must be nonnegative and not all zero, got {:?}",
                self.cost.alpha
            )));
        }
        self.optimizer_config().validate()?;
        if self.oracle.substeps == 0 {
            return Err(Error::Validation("oracle.substeps must be positive".into()));
        }
        for name in &self.verify.checks {
            if super::verify::find(name).is_none() {
                return Err(Error::Validation(format!("unknown verification check `{name}`")));
            }
        }
        if !self.override_compatibility {
            let report = validate_compatibility(&phi0, &control, &potential, DEFAULT_DELTA_MARGIN);
            if !report.pass {
                return Err(Error::Validation(format!("compatibility: {}", report.details)));
            }
        }
        Ok(())
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let cfg = RunConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}
