//! Run configuration: one TOML file with named blocks.
//!
//! ```toml
//! [grid]
//! dim = 3
//! n_per_axis = 32
//! box_half_length = 8.0
//!
//! [noise]
//! modes = 16
//! family = { kind = "bumps" }
//! decay = { kind = "geometric", rho = 0.5 }
//!
//! [params]
//! lambda = 0.5
//! nu = 0.0
//!
//! [time]
//! dt = "auto"
//! t_final = 1.0
//!
//! [datum]
//! profile = "constant"
//! value = 1.0
//!
//! [ensemble]
//! n_paths = 100
//! seed = 20240601
//!
//! [diagnostics]
//!
//! [output]
//! dir = "runs/base"
//! ```
//!
//! Every block must be present; keys inside a block fall back to defaults.
//! Loading validates every precondition of the run, and
//! [`RunConfig::to_toml`] writes the normalized form with all defaults spelled
//! out, so load, dump and load again is a fixed point.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsSpec;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::noise::{DecayLaw, ModeFamily, NoiseModel, NoiseSpec};
use crate::solver::{
    stability_bound, DatumSpec, RegularizationParams, Schedules, SimConfig, StepMode, DEFAULT_C_STAB,
    DEFAULT_SOLVER_MAX_ITER, DEFAULT_SOLVER_TOL,
};
use crate::monotone::{DEFAULT_MAX_ITER, DEFAULT_NEWTON_TOL};

/// Environment variable overriding `[output] dir`.
pub const ENV_OUT_DIR: &str = "LOGDIFF_OUT_DIR";
/// Environment variable overriding `[ensemble] workers`.
pub const ENV_WORKERS: &str = "LOGDIFF_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dim: usize,
    pub n_per_axis: usize,
    pub box_half_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "default_family")]
    pub family: ModeFamily,
    #[serde(default = "default_decay")]
    pub decay: DecayLaw,
}

fn default_modes() -> usize {
    NoiseSpec::default().modes
}
fn default_family() -> ModeFamily {
    NoiseSpec::default().family
}
fn default_decay() -> DecayLaw {
    NoiseSpec::default().decay
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleBlock {
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub nu: Vec<f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
    /// Shift of the `H⁻¹_ν` norm in which cascade distances are measured.
    #[serde(default = "one")]
    pub distance_nu: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub lambda: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_mode")]
    pub mode: StepMode,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_solver_max_iter")]
    pub solver_max_iter: usize,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedules: Option<ScheduleBlock>,
}

fn default_mode() -> StepMode {
    StepMode::Direct
}
fn default_solver_tol() -> f64 {
    DEFAULT_SOLVER_TOL
}
fn default_solver_max_iter() -> usize {
    DEFAULT_SOLVER_MAX_ITER
}
fn default_newton_tol() -> f64 {
    DEFAULT_NEWTON_TOL
}
fn default_newton_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

/// `dt = "auto"` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

impl Serialize for TimeStep {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TimeStep::Auto => s.serialize_str("auto"),
            TimeStep::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for TimeStep {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Word(String),
            Value(f64),
            Int(i64),
        }
        match Repr::deserialize(d)? {
            Repr::Word(w) if w == "auto" => Ok(TimeStep::Auto),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "dt must be \"auto\" or a number, got \"{w}\""
            ))),
            Repr::Value(v) => Ok(TimeStep::Fixed(v)),
            Repr::Int(v) => Ok(TimeStep::Fixed(v as f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    #[serde(default = "auto")]
    pub dt: TimeStep,
    pub t_final: f64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default = "default_c_stab")]
    pub c_stab: f64,
    #[serde(default = "one_u64")]
    pub substeps: u64,
}

fn auto() -> TimeStep {
    TimeStep::Auto
}
fn default_stride() -> usize {
    50
}
fn default_c_stab() -> f64 {
    DEFAULT_C_STAB
}
fn one_u64() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "one_usize")]
    pub workers: usize,
}

fn one_usize() -> usize {
    1
}

/// Pass/fail thresholds used by the run ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Largest accepted `max C / min C` across moment cells.
    #[serde(default = "two")]
    pub moment_factor: f64,
    /// Smallest accepted fitted `ν`-rate exponent.
    #[serde(default = "default_alpha_min")]
    pub nu_rate_alpha_min: f64,
    /// Largest accepted relative residual of a full-drift solve.
    #[serde(default = "default_solver_tol")]
    pub resolvent_residual_max: f64,
}

fn two() -> f64 {
    2.0
}
fn default_alpha_min() -> f64 {
    0.8
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            moment_factor: 2.0,
            nu_rate_alpha_min: default_alpha_min(),
            resolvent_residual_max: DEFAULT_SOLVER_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsBlock {
    #[serde(default = "default_nu_grid")]
    pub nu_grid: Vec<f64>,
    #[serde(default = "default_weak_modes")]
    pub weak_modes: usize,
    #[serde(default = "yes")]
    pub energy: bool,
    #[serde(default = "default_shell")]
    pub leakage_shell: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn default_nu_grid() -> Vec<f64> {
    DiagnosticsSpec::default().nu_grid
}
fn default_weak_modes() -> usize {
    DiagnosticsSpec::default().weak_modes
}
fn yes() -> bool {
    true
}
fn default_shell() -> f64 {
    DiagnosticsSpec::default().leakage_shell
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write the final field of every path as a binary snapshot.
    #[serde(default)]
    pub snapshots: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("runs/out")
}

/// File form: every block optional so a missing one can be named.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: Option<GridBlock>,
    noise: Option<NoiseBlock>,
    params: Option<ParamsBlock>,
    time: Option<TimeBlock>,
    datum: Option<DatumSpec>,
    ensemble: Option<EnsembleBlock>,
    diagnostics: Option<DiagnosticsBlock>,
    output: Option<OutputBlock>,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridBlock,
    pub noise: NoiseBlock,
    pub params: ParamsBlock,
    pub time: TimeBlock,
    pub datum: DatumSpec,
    pub ensemble: EnsembleBlock,
    pub diagnostics: DiagnosticsBlock,
    pub output: OutputBlock,
}

fn block<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing [{name}] block")))
}

impl RunConfig {
    /// Parses and validates a configuration.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = RunConfig {
            grid: block(raw.grid, "grid")?,
            noise: block(raw.noise, "noise")?,
            params: block(raw.params, "params")?,
            time: block(raw.time, "time")?,
            datum: block(raw.datum, "datum")?,
            ensemble: block(raw.ensemble, "ensemble")?,
            diagnostics: block(raw.diagnostics, "diagnostics")?,
            output: block(raw.output, "output")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_toml(&text)
    }

    /// Normalized text with every default written out.
    pub fn to_toml(&self) -> String {
        let raw = RawConfig {
            grid: Some(self.grid.clone()),
            noise: Some(self.noise.clone()),
            params: Some(self.params.clone()),
            time: Some(self.time.clone()),
            datum: Some(self.datum.clone()),
            ensemble: Some(self.ensemble.clone()),
            diagnostics: Some(self.diagnostics.clone()),
            output: Some(self.output.clone()),
        };
        toml::to_string(&raw).expect("configuration blocks serialize")
    }

    /// Applies `LOGDIFF_OUT_DIR` and `LOGDIFF_WORKERS`; nothing else is read from the environment.
    pub fn apply_env_overrides(&mut self) -> Result<()> {
        if let Ok(dir) = std::env::var(ENV_OUT_DIR) {
            if !dir.is_empty() {
                self.output.dir = PathBuf::from(dir);
            }
        }
        if let Ok(w) = std::env::var(ENV_WORKERS) {
            self.ensemble.workers = w
                .parse()
                .ok()
                .filter(|&n: &usize| n > 0)
                .ok_or_else(|| Error::Config(format!("{ENV_WORKERS} must be a positive integer, got \"{w}\"")))?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.n_per_axis, self.grid.box_half_length)
            .map_err(|e| Error::Config(format!("[grid]: {e}")))
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            family: self.noise.family.clone(),
            decay: self.noise.decay.clone(),
            modes: self.noise.modes,
        }
    }

    pub fn regularization(&self) -> RegularizationParams {
        let p = &self.params;
        RegularizationParams {
            lambda: p.lambda,
            nu: p.nu,
            epsilon: p.epsilon,
            solver_tol: p.solver_tol,
            solver_max_iter: p.solver_max_iter,
            newton_tol: p.newton_tol,
            newton_max_iter: p.newton_max_iter,
        }
    }

    pub fn schedules(&self) -> Option<Schedules> {
        self.params.schedules.as_ref().map(|s| Schedules {
            epsilon: s.epsilon.clone(),
            nu: s.nu.clone(),
            lambda: s.lambda.clone(),
        })
    }

    pub fn diagnostics_spec(&self) -> DiagnosticsSpec {
        DiagnosticsSpec {
            nu_grid: self.diagnostics.nu_grid.clone(),
            weak_modes: self.diagnostics.weak_modes,
            energy: self.diagnostics.energy,
            leakage_shell: self.diagnostics.leakage_shell,
        }
    }

    /// Direct-mode members a cascade over this configuration would run.
    fn cascade_members(&self) -> Vec<RegularizationParams> {
        let base = RegularizationParams {
            epsilon: 0.0,
            ..self.regularization()
        };
        let mut out = vec![base];
        if let Some(s) = &self.params.schedules {
            out.extend(s.nu.iter().map(|&nu| RegularizationParams { nu, ..base }));
            let nu_min = s.nu.iter().copied().fold(base.nu, f64::min);
            out.extend(s.lambda.iter().map(|&lambda| RegularizationParams { lambda, nu: nu_min, ..base }));
        }
        out
    }

    fn resolve(&self, for_cascade: bool) -> Result<(SimConfig, NoiseModel)> {
        let grid = self.grid()?;
        let noise = NoiseModel::build(&self.noise_spec(), grid).map_err(|e| match e {
            Error::Param(m) => Error::Config(format!("[noise]: {m}")),
            other => other,
        })?;
        let mut sim = SimConfig {
            grid,
            noise: self.noise_spec(),
            params: self.regularization(),
            mode: self.params.mode,
            dt: 0.0,
            t_final: self.time.t_final,
            output_stride: self.time.output_stride,
            substeps: self.time.substeps,
            c_stab: self.time.c_stab,
            datum: self.datum.clone(),
            n_paths: self.ensemble.n_paths,
            seed: self.ensemble.seed,
            diagnostics: self.diagnostics_spec(),
            keep_final_state: self.output.snapshots,
        };
        if !(self.time.c_stab > 0.0 && self.time.c_stab <= 1.0) {
            return Err(Error::Config(format!("[time] c_stab must lie in (0, 1], got {}", self.time.c_stab)));
        }
        let members = if for_cascade { self.cascade_members() } else { Vec::new() };
        let bound = members
            .iter()
            .map(|p| stability_bound(&grid, p, &noise, StepMode::Direct, sim.c_stab))
            .fold(stability_bound(&grid, &sim.params, &noise, sim.mode, sim.c_stab), f64::min);
        sim.dt = match self.time.dt {
            TimeStep::Fixed(dt) => {
                if dt > bound * (1.0 + 1e-12) {
                    return Err(Error::Config(format!(
                        "[time] dt = {dt:e} exceeds the stability bound {bound:e}"
                    )));
                }
                dt
            }
            TimeStep::Auto => {
                let t = if sim.t_final > 0.0 { sim.t_final } else { 1.0 };
                t / (t / bound).ceil().max(1.0)
            }
        };
        sim.validate(&noise, false).map_err(|e| match e {
            Error::Param(m) => Error::Config(m),
            other => other,
        })?;
        Ok((sim, noise))
    }

    /// The simulation this configuration describes, with `dt = "auto"` resolved.
    pub fn sim_config(&self) -> Result<SimConfig> {
        Ok(self.resolve(false)?.0)
    }

    /// As [`RunConfig::sim_config`], with `dt` also admissible for every cascade member.
    pub fn cascade_config(&self) -> Result<SimConfig> {
        Ok(self.resolve(true)?.0)
    }

    /// Checks every precondition of the run described by the file.
    pub fn validate(&self) -> Result<()> {
        self.regularization()
            .validate()
            .map_err(|e| Error::Config(format!("[params]: {e}")))?;
        if self.params.mode == StepMode::Yosida && !(self.params.epsilon > 0.0) {
            return Err(Error::Config("[params] mode = \"yosida\" needs epsilon > 0".into()));
        }
        if self.params.mode == StepMode::Direct && self.params.epsilon != 0.0 {
            return Err(Error::Config("[params] epsilon > 0 needs mode = \"yosida\"".into()));
        }
        if self.diagnostics.energy && self.params.lambda > 0.5 {
            return Err(Error::Config(format!(
                "[diagnostics] energy diagnostics need lambda <= 1/2, got {}",
                self.params.lambda
            )));
        }
        if self.ensemble.workers == 0 {
            return Err(Error::Config("[ensemble] workers must be >= 1".into()));
        }
        if let Some(s) = &self.params.schedules {
            self.schedules().expect("schedules present").validate()?;
            if !(s.distance_nu > 0.0) {
                return Err(Error::Config("[params.schedules] distance_nu must be positive".into()));
            }
            for &l in &s.lambda {
                if !(l > 0.0 && l <= 1.0) {
                    return Err(Error::Config(format!("[params.schedules] lambda entries must lie in (0, 1], got {l}")));
                }
            }
            for &n in &s.nu {
                if !(0.0..=1.0).contains(&n) {
                    return Err(Error::Config(format!("[params.schedules] nu entries must lie in [0, 1], got {n}")));
                }
            }
        }
        self.resolve(self.params.schedules.is_some()).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[grid]
dim = 2
n_per_axis = 16
box_half_length = 4.0
[noise]
modes = 4
decay = { kind = "explicit", weights = [0.2, 0.1, 0.05, 0.025] }
[params]
lambda = 0.5
[time]
t_final = 0.1
[datum]
profile = "constant"
value = 1.0
[ensemble]
n_paths = 2
seed = 7
[diagnostics]
weak_modes = 2
[output]
"#;

    #[test]
    fn round_trip_is_a_fixed_point() {
        let a = RunConfig::from_toml(SMALL).unwrap();
        let text = a.to_toml();
        let b = RunConfig::from_toml(&text).unwrap();
        assert_eq!(a, b);
        assert_eq!(text, b.to_toml());
    }

    #[test]
    fn missing_block_is_named() {
        let text = SMALL.replace("[grid]\ndim = 2\nn_per_axis = 16\nbox_half_length = 4.0\n", "");
        let e = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(e.contains("[grid]"), "{e}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = SMALL.replace("lambda = 0.5", "lambda = 0.5\nlamda = 0.1");
        let e = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(e.contains("lamda"), "{e}");
    }

    #[test]
    fn energy_requires_small_lambda() {
        let text = SMALL.replace("lambda = 0.5", "lambda = 0.75");
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config(_))));
        let text = text.replace("[diagnostics]\n", "[diagnostics]\nenergy = false\n");
        RunConfig::from_toml(&text).unwrap();
    }

    #[test]
    fn dt_above_bound_is_rejected() {
        let text = SMALL.replace("t_final = 0.1", "t_final = 0.1\ndt = 0.05");
        let e = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(e.contains("stability bound"), "{e}");
    }

    #[test]
    fn auto_dt_divides_the_horizon() {
        let sim = RunConfig::from_toml(SMALL).unwrap().sim_config().unwrap();
        let n = sim.t_final / sim.dt;
        assert!((n - n.round()).abs() < 1e-9);
    }
}
