//! Reduce the current, solve, verify, restore the current, write files.

use std::fs;
use std::time::Instant;

use entropyeq_core::characterization::{verify, CharacterizationInputs, CharacterizationReport, Route};
use entropyeq_core::dual::{solve, SolveResult};
use entropyeq_core::gauge::{apply_gauge, phase, reduce_constraints, Direction};
use entropyeq_core::grid::{make_grid, Grid};
use entropyeq_core::num::sup_norm;
use entropyeq_core::operator::{entropy, moments, trace_distance, DensityMatrix, EntropyKind};

use crate::config::{resolve, Command, Problem, RunConfig};
use crate::output::{write_json, Table};
use crate::report::{RestoreErrors, RouteSummary, RunReport, SolveSummary, VerifySummary};
use crate::{studies, RunError};

/// Eigen-residual tolerance of the corrected dual route, relative to `1 + |log rho_p|`.
pub const EIG_TOL: f64 = 1e-6;
/// Allowed excess of `G(phi)` over `Q(phi, phi)`.
pub const FORM_TOL: f64 = 1e-8;
/// Allowed negative part of `m*`.
pub const M_STAR_TOL: f64 = 1e-6;

/// Runs `config` and writes `report.json` plus the tables it references into
/// `config.output`. Non-convergence is reported through the status, not as an
/// error.
pub fn run(config: &RunConfig) -> Result<RunReport, RunError> {
    config.validate()?;
    let command = config.command()?;
    let out = &config.output;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut report = RunReport::new(command, config.clone());
    match command {
        Command::Solve | Command::Verify => solve_and_verify(config, command == Command::Verify, &mut report)?,
        Command::EtaStudy => studies::eta_study(config, &mut report)?,
        Command::RefineStudy => studies::refine_study(config, &mut report)?,
        Command::GaugeDemo => studies::gauge_demo(config, &mut report)?,
        Command::VolterraSelftest => studies::volterra_selftest(config, &mut report)?,
    }
    report.timings.insert("total".into(), start.elapsed().as_secs_f64());
    report.settle();
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// A solved problem with its current restored.
#[derive(Debug, Clone)]
pub struct Solved {
    pub problem: Problem,
    /// Current-free constraints handed to the solver.
    pub n: Vec<f64>,
    pub k: Vec<f64>,
    pub result: SolveResult,
    /// `e^{i Phi} rho e^{-i Phi}`, the minimizer of the original problem.
    pub restored: DensityMatrix,
    pub summary: SolveSummary,
}

fn sup_diff(a: &[f64], b: &[f64], grid: &Grid, interior: bool) -> f64 {
    let x = grid.nodes();
    (0..a.len())
        .filter(|i| !interior || (x[*i] >= 0.125 - 1e-12 && x[*i] <= 0.875 + 1e-12))
        .fold(0.0, |m, i| m.max((a[i] - b[i]).abs()))
}

pub fn restore_errors(restored: &DensityMatrix, p: &Problem, grid: &Grid) -> RestoreErrors {
    let m = moments(restored, grid);
    let j0: Vec<f64> = p.n0.iter().zip(&p.u0).map(|(n, u)| n * u).collect();
    RestoreErrors {
        n: sup_diff(&m.n, &p.n0, grid, false),
        j: sup_diff(&m.j, &j0, grid, false),
        k: sup_diff(&m.k, &p.k0, grid, false),
        n_interior: sup_diff(&m.n, &p.n0, grid, true),
        j_interior: sup_diff(&m.j, &j0, grid, true),
        k_interior: sup_diff(&m.k, &p.k0, grid, true),
    }
}

/// Reduce, solve and restore one problem.
pub fn solve_problem(config: &RunConfig, kind: EntropyKind, problem: Problem, grid: &Grid) -> Result<Solved, RunError> {
    let (n, k) = reduce_constraints(&problem.n0, &problem.u0, &problem.k0)?;
    let result = solve(&n, &k, &config.solver.options(kind), grid)?;
    let rho = &result.rho;
    let restored = if problem.has_current() {
        apply_gauge(rho, &phase(grid, &problem.u0)?, Direction::Forward)
    } else {
        rho.clone()
    };
    let values = rho.values();
    let lambda = &result.potentials;
    let identity = -grid.inner(&lambda.lambda_n, &n) - grid.inner(&lambda.lambda_k, &k) - rho.trace();
    let summary = SolveSummary {
        grid_points: grid.n_points(),
        entropy: format!("{kind:?}"),
        converged: result.converged,
        iterations: result.iterations,
        residual_n: sup_norm(&result.residual_n),
        residual_k: sup_norm(&result.residual_k),
        dual_value: result.dual_value,
        primal_entropy: result.primal_entropy,
        dual_identity_defect: if kind == EntropyKind::Boltzmann { Some(entropy(rho, kind)? - identity) } else { None },
        min_gap: result.min_gap,
        near_pure: result.near_pure,
        gradient_fallbacks: result.gradient_fallbacks,
        stagnant_steps: result.stagnant_steps,
        trace: rho.trace(),
        integral_n0: grid.integrate(&problem.n0)?,
        top_eigenvalue: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        min_eigenvalue: values.iter().cloned().fold(f64::INFINITY, f64::min),
        positive_eigenvalues: values.iter().filter(|v| **v > 1e-300).count(),
        current_sup: sup_norm(&moments(rho, grid).u),
        trace_distance_to_reference: problem.reference.as_ref().map(|r| trace_distance(&restored, r)),
        potentials_error: problem
            .potentials
            .as_ref()
            .map(|p| sup_norm(&p.lambda_n.iter().zip(&lambda.lambda_n).map(|(a, b)| a - b).collect::<Vec<_>>()).max(
                sup_norm(&p.lambda_k.iter().zip(&lambda.lambda_k).map(|(a, b)| a - b).collect::<Vec<_>>()),
            )),
        restored: problem.has_current().then(|| restore_errors(&restored, &problem, grid)),
    };
    Ok(Solved { problem, n, k, result, restored, summary })
}

pub fn verify_solved(config: &RunConfig, kind: EntropyKind, s: &Solved, grid: &Grid) -> Result<CharacterizationReport, RunError> {
    let inputs = CharacterizationInputs {
        rho: &s.result.rho,
        n: &s.n,
        k: &s.k,
        eta: kind.eta(),
        spectral_cutoff: config.verify.spectral_cutoff,
    };
    Ok(verify(&inputs, &s.result.potentials, &config.verify.options(config.seed), grid)?)
}

pub fn verify_summary(rep: &CharacterizationReport) -> VerifySummary {
    let corrected = rep.check(Route::DualCorrected);
    VerifySummary {
        sign: format!("{:?}", rep.options.sign).to_lowercase(),
        better_sign: format!("{:?}", rep.better_sign).to_lowercase(),
        populated_modes: rep.log_rho.len(),
        multiplier_mismatch: rep.multiplier_mismatch,
        multiplier_mismatch_interior: rep.multiplier_mismatch_interior,
        multiplier_mismatch_other_sign: rep.multiplier_mismatch_other_sign,
        multiplier_mismatch_printed_kernel: rep.multiplier_mismatch_printed_kernel,
        min_m_star: rep.min_m_star,
        current_sup: rep.current_sup,
        kernel_bound_margin: rep.kernel_bound_margin,
        gradient_bound_margin: rep.gradient_bound_margin,
        routes: rep
            .checks
            .iter()
            .map(|c| RouteSummary {
                route: c.route.name(),
                max_scaled_residual: c.max_scaled_residual,
                max_scaled_gap: c.max_scaled_gap,
                g_vs_q_margin: c.g_vs_q_margin,
                hermitian_defect: c.hermitian_defect,
            })
            .collect(),
        verified: corrected.max_scaled_residual <= EIG_TOL
            && corrected.g_vs_q_margin >= -FORM_TOL
            && rep.min_m_star >= -M_STAR_TOL,
    }
}

fn solve_and_verify(config: &RunConfig, with_verify: bool, report: &mut RunReport) -> Result<(), RunError> {
    let grid = make_grid(config.grid_points)?;
    let kind = config.entropy.kind();
    let problem = resolve(&config.constraints()?, &config.base_dir, &grid)?;
    let t = Instant::now();
    let s = solve_problem(config, kind, problem, &grid)?;
    report.timings.insert("solve".into(), t.elapsed().as_secs_f64());
    report.status.converged = s.result.converged;

    let out = &config.output;
    let rm = moments(&s.restored, &grid);
    let lambda = &s.result.potentials;
    let mut fields = Table::new()
        .real("x", grid.nodes())
        .real("n0", &s.problem.n0)
        .real("u0", &s.problem.u0)
        .real("k0", &s.problem.k0)
        .real("n", &rm.n)
        .real("u", &rm.u)
        .real("k", &rm.k)
        .real("lambda_n", &lambda.lambda_n)
        .real("lambda_k", &lambda.lambda_k)
        .real("residual_n", &s.result.residual_n)
        .real("residual_k", &s.result.residual_k);

    let values = s.result.rho.values();
    let spectrum = Table::new().int("p", 0..values.len()).real("rho_p", values);
    spectrum.write(&out.join("spectrum.csv"))?;
    let hist = &s.result.dual_history;
    Table::new().int("iteration", 0..hist.len()).real("dual_value", hist).write(&out.join("history.csv"))?;
    report.files.insert("spectrum".into(), "spectrum.csv".into());
    report.files.insert("history".into(), "history.csv".into());

    if with_verify {
        let t = Instant::now();
        let rep = verify_solved(config, kind, &s, &grid)?;
        report.timings.insert("verify".into(), t.elapsed().as_secs_f64());
        fields = fields
            .real("m_star", &rep.m_star)
            .real("A_star", &rep.a_star)
            .real("A_star_corrected", &rep.check(Route::DualCorrected).a_star)
            .real("gamma_star", &rep.gamma_star);
        let mut routes = Vec::new();
        let mut modes = Vec::new();
        let mut rho_p = Vec::new();
        let mut residuals = Vec::new();
        let mut gaps = Vec::new();
        for c in &rep.checks {
            for (p, (r, g)) in c.eig_residuals.iter().zip(&c.minmax_gaps).enumerate() {
                routes.push(c.route.name().to_string());
                modes.push(p);
                rho_p.push(values[p]);
                residuals.push(*r);
                gaps.push(*g);
            }
        }
        Table::new()
            .text("route", routes)
            .int("p", modes)
            .real("rho_p", &rho_p)
            .real("eig_residual", &residuals)
            .real("minmax_gap", &gaps)
            .write(&out.join("q_check.csv"))?;
        report.files.insert("q_check".into(), "q_check.csv".into());
        let v = verify_summary(&rep);
        report.status.verified = Some(v.verified);
        report.verify = Some(v);
    }
    fields.write(&out.join("fields.csv"))?;
    report.files.insert("fields".into(), "fields.csv".into());
    report.solve = Some(s.summary);
    Ok(())
}
