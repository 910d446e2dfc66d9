//! Serializable run reports. Everything except `timings` is a deterministic
//! function of the config.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::{Command, RunConfig};

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub command: Command,
    pub config: RunConfig,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_study: Option<EtaStudy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_study: Option<RefineStudy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauge_demo: Option<GaugeDemo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volterra_selftest: Option<VolterraSelftest>,
    /// Table name to file name inside the output directory.
    pub files: BTreeMap<String, String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(command: Command, config: RunConfig) -> Self {
        RunReport {
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            status: Status { converged: true, verified: None, exit_code: crate::EXIT_OK },
            solve: None,
            verify: None,
            eta_study: None,
            refine_study: None,
            gauge_demo: None,
            volterra_selftest: None,
            files: BTreeMap::new(),
            timings: BTreeMap::new(),
        }
    }

    /// Recomputes the exit code from the flags.
    pub fn settle(&mut self) {
        let ok = self.status.converged && self.status.verified.unwrap_or(true);
        self.status.exit_code = if ok { crate::EXIT_OK } else { crate::EXIT_FLAGGED };
    }

    /// The report with timings cleared, for determinism comparisons.
    pub fn without_timings(&self) -> Self {
        RunReport { timings: BTreeMap::new(), ..self.clone() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Status {
    /// Every solve in the run met its residual tolerance.
    pub converged: bool,
    /// Outcome of the built-in checks of `verify`, `eta-study`, `gauge-demo`
    /// and `volterra-selftest`; `refine-study` only reports.
    pub verified: Option<bool>,
    pub exit_code: i32,
}

/// Sup-norm errors of the restored moments against the input `(n0, n0 u0, k0)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RestoreErrors {
    pub n: f64,
    pub j: f64,
    pub k: f64,
    /// Same over the nodes in `[1/8, 7/8]`.
    pub n_interior: f64,
    pub j_interior: f64,
    pub k_interior: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub grid_points: usize,
    pub entropy: String,
    pub converged: bool,
    pub iterations: usize,
    pub residual_n: f64,
    pub residual_k: f64,
    pub dual_value: f64,
    pub primal_entropy: f64,
    /// `-<lambda_n, n> - <lambda_k, k> - Tr rho`; equals `primal_entropy` for
    /// the Boltzmann entropy at the optimum.
    pub dual_identity_defect: Option<f64>,
    pub min_gap: f64,
    pub near_pure: bool,
    pub gradient_fallbacks: usize,
    pub stagnant_steps: usize,
    pub trace: f64,
    pub integral_n0: f64,
    pub top_eigenvalue: f64,
    pub min_eigenvalue: f64,
    /// Eigenvalues above `1e-300`.
    pub positive_eigenvalues: usize,
    /// `sup |u[rho]|` of the current-free minimizer.
    pub current_sup: f64,
    pub trace_distance_to_reference: Option<f64>,
    /// `sup |lambda - lambda_exact|` when the generating multipliers are known.
    pub potentials_error: Option<f64>,
    pub restored: Option<RestoreErrors>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RouteSummary {
    pub route: &'static str,
    pub max_scaled_residual: f64,
    pub max_scaled_gap: f64,
    pub g_vs_q_margin: f64,
    pub hermitian_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub sign: String,
    pub better_sign: String,
    pub populated_modes: usize,
    pub multiplier_mismatch: f64,
    pub multiplier_mismatch_interior: f64,
    pub multiplier_mismatch_other_sign: f64,
    pub multiplier_mismatch_printed_kernel: f64,
    pub min_m_star: f64,
    pub current_sup: f64,
    pub kernel_bound_margin: f64,
    pub gradient_bound_margin: f64,
    pub routes: Vec<RouteSummary>,
    /// Corrected dual route within `1e-6` scaled, `G <= Q + 1e-8`, `min m* >= -1e-6`.
    pub verified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EtaRow {
    pub eta: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Trace-norm distance to the `eta = 0` minimizer.
    pub trace_distance: f64,
    /// `sup |n[rho log(rho + eta)]|`.
    pub sup_n_rho_log_rho: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EtaStudy {
    pub grid_points: usize,
    pub rows: Vec<EtaRow>,
    /// Distances of the positive `eta` rows strictly decrease in config order.
    pub distances_decreasing: bool,
    /// `max / min` of `sup_n_rho_log_rho` over all rows.
    pub sup_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineRow {
    pub grid_points: usize,
    pub converged: bool,
    pub iterations: usize,
    pub max_residual: f64,
    pub trace_distance_to_reference: Option<f64>,
    pub eig_residual_literal: f64,
    pub eig_residual_corrected: f64,
    pub volterra_eig_residual_literal: f64,
    pub volterra_eig_residual_corrected: f64,
    pub multiplier_mismatch: f64,
    pub multiplier_mismatch_interior: f64,
    pub gauge_current_interior: f64,
    pub gauge_kinetic_interior: f64,
    pub volterra_benchmark: f64,
}

/// `previous / current` for each column, one entry per doubling.
#[derive(Debug, Clone, Serialize)]
pub struct RefineRatios {
    pub from: usize,
    pub to: usize,
    pub volterra_benchmark: f64,
    pub multiplier_mismatch: f64,
    pub multiplier_mismatch_interior: f64,
    pub volterra_eig_residual_literal: f64,
    pub gauge_current_interior: f64,
    pub gauge_kinetic_interior: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineStudy {
    pub rows: Vec<RefineRow>,
    pub ratios: Vec<RefineRatios>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GaugeRow {
    pub grid_points: usize,
    pub converged: bool,
    pub restored: RestoreErrors,
    pub trace_distance_to_reference: Option<f64>,
    /// Shift-identity defects on a seeded random state.
    pub relation_current: f64,
    pub relation_kinetic: f64,
    pub relation_current_interior: f64,
    pub relation_kinetic_interior: f64,
    /// Largest eigenvalue change after gauging and re-diagonalizing.
    pub spectrum_defect: f64,
    /// Largest entropy change over the three entropy kinds.
    pub entropy_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GaugeDemo {
    pub rows: Vec<GaugeRow>,
    /// Coarse over fine, interior defects: current, kinetic, restored j, restored k.
    pub ratios: Vec<[f64; 4]>,
    pub invariance_ok: bool,
    /// Every interior ratio lies in `[8/3, 8]` or both errors are below `1e-10`.
    pub second_order: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VolterraBenchmark {
    pub grid_points: usize,
    pub forward_error: f64,
    pub adjoint_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VolterraSelftest {
    pub benchmarks: Vec<VolterraBenchmark>,
    /// Coarse over fine errors, forward and adjoint.
    pub ratios: Vec<[f64; 2]>,
    pub random_instances: usize,
    /// Smallest `bound * ||psi|| - ||phi||` relative to the bound.
    pub bound_slack: f64,
    pub max_picard_difference: f64,
    /// `max |<L phi, psi>_w - <phi, L* psi>_w|`.
    pub max_duality_raw: f64,
    /// Same after subtracting the closed-form corner term.
    pub max_duality_corrected: f64,
    pub benchmark_ok: bool,
    pub ratio_ok: bool,
    pub bound_ok: bool,
    pub picard_ok: bool,
    pub duality_raw_ok: bool,
    pub duality_corrected_ok: bool,
}
