//! JSON run configuration and the constraint data it resolves to.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use entropyeq_core::characterization::{Sign, VerifyOptions, SPECTRAL_CUTOFF};
use entropyeq_core::dual::{DualPotentials, Init, LineSearch, SolveOptions};
use entropyeq_core::gauge::{apply_gauge, phase, Direction};
use entropyeq_core::grid::Grid;
use entropyeq_core::operator::{DensityMatrix, EntropyKind};
use entropyeq_core::presets;

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Verify,
    EtaStudy,
    RefineStudy,
    GaugeDemo,
    VolterraSelftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::EtaStudy => "eta-study",
            Command::RefineStudy => "refine-study",
            Command::GaugeDemo => "gauge-demo",
            Command::VolterraSelftest => "volterra-selftest",
        }
    }

    /// Constraints used when the config names none.
    fn default_preset(self) -> Preset {
        match self {
            Command::EtaStudy => Preset::Thermal,
            Command::GaugeDemo => Preset::RoundtripCurrent,
            _ => Preset::Roundtrip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Moments of the Gibbs state with `lambda_n = 1 + x^2`, `lambda_k = 1 + cos(pi x)/2`.
    Roundtrip,
    /// Same with `lambda_k` scaled by 1/20.
    Thermal,
    /// `n = 1 + cos(pi x)/2` with the kinetic density of `|sqrt n><sqrt n|`.
    PureState,
    /// Round-trip moments boosted by `u0 = 1 + sin(pi x)/2`.
    RoundtripCurrent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Constraints {
    Preset(Preset),
    Inline {
        n0: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u0: Option<Vec<f64>>,
        k0: Vec<f64>,
    },
    /// CSV with columns `x, n0, k0` and optionally `u0`.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EntropySpec {
    #[default]
    Boltzmann,
    Regularized {
        eta: f64,
    },
    FermiDirac,
}

impl EntropySpec {
    /// `eta = 0` means the plain Boltzmann entropy.
    pub fn from_eta(eta: f64) -> Self {
        if eta == 0.0 {
            EntropySpec::Boltzmann
        } else {
            EntropySpec::Regularized { eta }
        }
    }

    pub fn kind(self) -> EntropyKind {
        match self {
            EntropySpec::Boltzmann => EntropyKind::Boltzmann,
            EntropySpec::Regularized { eta } => EntropyKind::Regularized { eta },
            EntropySpec::FermiDirac => EntropyKind::FermiDirac,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub tol_residual: f64,
    pub max_iter: usize,
    pub shrink: f64,
    pub sufficient_increase: f64,
    pub max_step: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let o = SolveOptions::default();
        SolverSpec {
            tol_residual: o.tol_residual,
            max_iter: o.max_iter,
            shrink: o.line_search.shrink,
            sufficient_increase: o.line_search.sufficient_increase,
            max_step: o.line_search.max_step,
        }
    }
}

impl SolverSpec {
    pub fn options(&self, entropy: EntropyKind) -> SolveOptions {
        SolveOptions {
            tol_residual: self.tol_residual,
            max_iter: self.max_iter,
            entropy,
            init: Init::Auto,
            line_search: LineSearch {
                shrink: self.shrink,
                sufficient_increase: self.sufficient_increase,
                max_step: self.max_step,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignSpec {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub sign: SignSpec,
    /// Floor on `k - |grad sqrt n|^2`. The gap of a discrete Gibbs state is
    /// `O(h^2)` at the end nodes, so the library default of `1e-8` rejects
    /// fine meshes.
    pub a_floor: f64,
    pub probes: usize,
    pub spectral_cutoff: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec { sign: SignSpec::Minus, a_floor: 1e-14, probes: 100, spectral_cutoff: SPECTRAL_CUTOFF }
    }
}

impl VerifySpec {
    pub fn options(&self, seed: u64) -> VerifyOptions {
        let sign = match self.sign {
            SignSpec::Minus => Sign::Minus,
            SignSpec::Plus => Sign::Plus,
        };
        VerifyOptions { sign, a_floor: self.a_floor, probes: self.probes, seed, ..VerifyOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Constraints>,
    #[serde(default)]
    pub entropy: EntropySpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Regularization parameters of `eta-study`; 0 stands for the Boltzmann entropy.
    #[serde(default = "default_etas")]
    pub etas: Vec<f64>,
    /// Meshes of `refine-study`.
    #[serde(default = "default_refine")]
    pub refine_grid_points: Vec<usize>,
    /// Directory that relative constraint files are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_grid_points() -> usize {
    65
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    7
}

fn default_etas() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 0.0]
}

fn default_refine() -> Vec<usize> {
    vec![33, 65, 129, 257]
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn command(&self) -> Result<Command, RunError> {
        self.command.ok_or_else(|| RunError::Config("no command given".into()))
    }

    pub fn constraints(&self) -> Result<Constraints, RunError> {
        Ok(self.constraints.clone().unwrap_or(Constraints::Preset(self.command()?.default_preset())))
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.grid_points < 3 {
            return bad(format!("grid_points must be at least 3, got {}", self.grid_points));
        }
        if let Err(e) = self.entropy.kind().validate() {
            return bad(e.to_string());
        }
        if let Some(e) = self.etas.iter().find(|e| !(**e >= 0.0 && **e <= 1.0)) {
            return bad(format!("etas must lie in [0, 1], got {e}"));
        }
        if let Some(n) = self.refine_grid_points.iter().find(|n| **n < 3) {
            return bad(format!("refine_grid_points must be at least 3, got {n}"));
        }
        if self.solver.tol_residual.is_nan() || self.solver.tol_residual <= 0.0 || self.solver.max_iter == 0 {
            return bad("solver tolerance and iteration cap must be positive".into());
        }
        if let Some(Constraints::Inline { n0, u0, k0 }) = &self.constraints {
            let u_len = u0.as_ref().map_or(self.grid_points, Vec::len);
            for (name, len) in [("n0", n0.len()), ("u0", u_len), ("k0", k0.len())] {
                if len != self.grid_points {
                    return bad(format!("{name} has {len} entries, grid_points is {}", self.grid_points));
                }
            }
        }
        Ok(())
    }
}

/// Constraint data on one grid, plus what is known about the exact answer.
#[derive(Debug, Clone)]
pub struct Problem {
    pub n0: Vec<f64>,
    pub u0: Vec<f64>,
    pub k0: Vec<f64>,
    /// Multipliers of the exact minimizer of the current-free problem.
    pub potentials: Option<DualPotentials>,
    /// Exact minimizer of the original problem, gauge included.
    pub reference: Option<DensityMatrix>,
}

impl Problem {
    pub fn has_current(&self) -> bool {
        self.u0.iter().any(|u| *u != 0.0)
    }
}

pub fn demo_velocity(grid: &Grid) -> Vec<f64> {
    grid.sample(|x| 1.0 + 0.5 * (PI * x).sin())
}

pub fn preset_problem(preset: Preset, grid: &Grid) -> Result<Problem, RunError> {
    let inst = match preset {
        Preset::Roundtrip | Preset::RoundtripCurrent => presets::roundtrip(grid)?,
        Preset::Thermal => presets::thermal(grid)?,
        Preset::PureState => presets::pure_state(grid)?,
    };
    let mut p = Problem { n0: inst.n, u0: inst.u0, k0: inst.k, potentials: inst.potentials, reference: inst.reference };
    if preset == Preset::RoundtripCurrent {
        let u0 = demo_velocity(grid);
        p.k0 = p.k0.iter().zip(&p.n0).zip(&u0).map(|((k, n), u)| k + n * u * u).collect();
        let ph = phase(grid, &u0)?;
        p.reference = p.reference.map(|r| apply_gauge(&r, &ph, Direction::Forward));
        p.u0 = u0;
    }
    Ok(p)
}

#[derive(Debug, Deserialize)]
struct ConstraintRow {
    x: f64,
    n0: f64,
    #[serde(default)]
    u0: Option<f64>,
    k0: f64,
}

fn read_constraint_file(path: &Path, grid: &Grid) -> Result<Problem, RunError> {
    let config_err = |m: String| RunError::Config(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| config_err(e.to_string()))?;
    let mut rows = Vec::new();
    for row in reader.deserialize::<ConstraintRow>() {
        rows.push(row.map_err(|e| config_err(e.to_string()))?);
    }
    if rows.len() != grid.n_points() {
        return Err(config_err(format!("{} rows, grid_points is {}", rows.len(), grid.n_points())));
    }
    if let Some((r, x)) = rows.iter().zip(grid.nodes()).find(|(r, x)| (r.x - **x).abs() > 1e-9) {
        return Err(config_err(format!("x = {} does not match the grid node {x}", r.x)));
    }
    Ok(Problem {
        n0: rows.iter().map(|r| r.n0).collect(),
        u0: rows.iter().map(|r| r.u0.unwrap_or(0.0)).collect(),
        k0: rows.iter().map(|r| r.k0).collect(),
        potentials: None,
        reference: None,
    })
}

pub fn resolve(constraints: &Constraints, base_dir: &Path, grid: &Grid) -> Result<Problem, RunError> {
    match constraints {
        Constraints::Preset(p) => preset_problem(*p, grid),
        Constraints::Inline { n0, u0, k0 } => {
            let len = grid.n_points();
            let u0 = u0.clone().unwrap_or_else(|| vec![0.0; len]);
            for (name, l) in [("n0", n0.len()), ("u0", u0.len()), ("k0", k0.len())] {
                if l != len {
                    return Err(RunError::Config(format!("{name} has {l} entries, grid_points is {len}")));
                }
            }
            Ok(Problem { n0: n0.clone(), u0, k0: k0.clone(), potentials: None, reference: None })
        }
        Constraints::File(p) => read_constraint_file(&base_dir.join(p), grid),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use entropyeq_core::grid::make_grid;

    #[test]
    fn empty_config_uses_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c.grid_points, 65);
        assert_eq!(c.seed, 7);
        assert_eq!(c.etas, vec![1e-2, 1e-3, 1e-4, 0.0]);
        assert_eq!(c.entropy, EntropySpec::Boltzmann);
    }

    #[test]
    fn parses_every_constraint_form() {
        let c = RunConfig::from_json(r#"{"command":"solve","constraints":{"preset":"pure-state"},"entropy":{"kind":"regularized","eta":1e-6}}"#).unwrap();
        assert_eq!(c.constraints, Some(Constraints::Preset(Preset::PureState)));
        assert_eq!(c.entropy.kind(), EntropyKind::Regularized { eta: 1e-6 });
        let c = RunConfig::from_json(r#"{"grid_points":3,"constraints":{"inline":{"n0":[1,1,1],"k0":[1,1,1]}}}"#).unwrap();
        c.validate().unwrap();
        let c = RunConfig::from_json(r#"{"constraints":{"file":"c.csv"}}"#).unwrap();
        assert_eq!(c.constraints, Some(Constraints::File("c.csv".into())));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_json(r#"{"grid_pts":5}"#).is_err());
        assert!(RunConfig::from_json(r#"{"grid_points":2}"#).unwrap().validate().is_err());
        let c = RunConfig::from_json(r#"{"grid_points":4,"constraints":{"inline":{"n0":[1,1,1],"k0":[1,1,1]}}}"#).unwrap();
        assert!(c.validate().is_err());
        assert!(RunConfig::from_json(r#"{"entropy":{"kind":"regularized","eta":2}}"#).unwrap().validate().is_err());
    }

    #[test]
    fn default_preset_follows_command() {
        let mut c = RunConfig { command: Some(Command::EtaStudy), ..RunConfig::default() };
        assert_eq!(c.constraints().unwrap(), Constraints::Preset(Preset::Thermal));
        c.command = Some(Command::GaugeDemo);
        assert_eq!(c.constraints().unwrap(), Constraints::Preset(Preset::RoundtripCurrent));
    }

    #[test]
    fn current_preset_boosts_kinetic_density() {
        let g = make_grid(17).unwrap();
        let base = preset_problem(Preset::Roundtrip, &g).unwrap();
        let p = preset_problem(Preset::RoundtripCurrent, &g).unwrap();
        assert!(p.has_current() && !base.has_current());
        for i in 0..17 {
            let expect = base.k0[i] + base.n0[i] * p.u0[i] * p.u0[i];
            assert!((p.k0[i] - expect).abs() < 1e-14);
        }
    }
}
