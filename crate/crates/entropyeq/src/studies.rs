//! Multi-solve studies. Independent solves fan out over a rayon pool; rows are
//! collected in input order so reports do not depend on scheduling.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use entropyeq_core::characterization::Route;
use entropyeq_core::gauge::{apply_gauge, phase, relation_defect, Direction};
use entropyeq_core::grid::{make_grid, Grid};
use entropyeq_core::num::sup_norm;
use entropyeq_core::operator::{entropy, n_rho_log_rho, trace_distance, DensityMatrix, EntropyKind};
use entropyeq_core::sampling::{random_psd, Roughness};
use entropyeq_core::volterra::{
    apply_adjoint, apply_forward, duality_defect, picard_adjoint, picard_forward, solve_adjoint, solve_forward,
    volterra_bound, Kernel,
};
use entropyeq_core::C64;

use crate::config::{demo_velocity, resolve, Constraints, EntropySpec, RunConfig};
use crate::output::Table;
use crate::pipeline::{restore_errors, solve_problem, verify_solved, Solved};
use crate::report::{
    EtaRow, EtaStudy, GaugeDemo, GaugeRow, RefineRatios, RefineRow, RefineStudy, RunReport, VolterraBenchmark,
    VolterraSelftest,
};
use crate::RunError;

/// Window for the `O(h^2)` ratio of the Volterra benchmarks per doubling.
pub const RATIO_WINDOW: (f64, f64) = (2.5, 6.0);
/// Fine error within `(1/4)(1 +/- 1/2)` of the coarse one.
pub const GAUGE_RATIO_WINDOW: (f64, f64) = (8.0 / 3.0, 8.0);
/// Sup error of the `e^x` benchmarks at 1001 nodes.
pub const BENCHMARK_TOL: f64 = 5e-6;
/// Largest `max / min` of `sup |n[rho log(rho + eta)]|` across an eta sweep.
pub const ETA_SUP_RATIO: f64 = 10.0;
pub const INVARIANCE_TOL: f64 = 1e-10;
pub const DUALITY_TOL: f64 = 1e-10;
pub const PICARD_TOL: f64 = 1e-8;
/// Errors below this are roundoff and exempt from ratio checks.
const NOISE_FLOOR: f64 = 1e-10;

/// Pool sized by `ENTROPYEQ_THREADS`, else by the number of logical processors.
pub fn thread_pool() -> Result<rayon::ThreadPool, RunError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("ENTROPYEQ_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => b = b.num_threads(n),
            _ => return Err(RunError::Config(format!("ENTROPYEQ_THREADS must be a positive integer, got {v:?}"))),
        }
    }
    b.build().map_err(|e| RunError::Config(e.to_string()))
}

fn ratio(coarse: f64, fine: f64) -> f64 {
    coarse / fine
}

fn second_order(coarse: f64, fine: f64) -> bool {
    let r = ratio(coarse, fine);
    (coarse < NOISE_FLOOR && fine < NOISE_FLOOR) || (r >= GAUGE_RATIO_WINDOW.0 && r <= GAUGE_RATIO_WINDOW.1)
}

pub fn eta_study(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let grid = make_grid(config.grid_points)?;
    let problem = resolve(&config.constraints()?, &config.base_dir, &grid)?;
    let mut jobs = config.etas.clone();
    if !jobs.contains(&0.0) {
        jobs.push(0.0);
    }
    let t = Instant::now();
    let solved: Vec<Result<Solved, RunError>> = thread_pool()?.install(|| {
        jobs.par_iter()
            .map(|eta| solve_problem(config, EntropySpec::from_eta(*eta).kind(), problem.clone(), &grid))
            .collect()
    });
    let solved = solved.into_iter().collect::<Result<Vec<_>, _>>()?;
    report.timings.insert("solves".into(), t.elapsed().as_secs_f64());
    let base = &solved[jobs.iter().position(|e| *e == 0.0).expect("eta = 0 is always solved")];

    let rows: Vec<EtaRow> = config
        .etas
        .iter()
        .zip(&solved)
        .map(|(eta, s)| EtaRow {
            eta: *eta,
            converged: s.result.converged,
            iterations: s.result.iterations,
            trace_distance: trace_distance(&s.restored, &base.restored),
            sup_n_rho_log_rho: sup_norm(&n_rho_log_rho(&s.result.rho, *eta, &grid)),
        })
        .collect();
    let positive: Vec<f64> = rows.iter().filter(|r| r.eta > 0.0).map(|r| r.trace_distance).collect();
    let distances_decreasing = positive.windows(2).all(|w| w[1] < w[0]);
    let sups: Vec<f64> = rows.iter().map(|r| r.sup_n_rho_log_rho).collect();
    let max = sups.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = sups.iter().cloned().fold(f64::INFINITY, f64::min);
    let sup_ratio = max / min;

    Table::new()
        .real("eta", &rows.iter().map(|r| r.eta).collect::<Vec<_>>())
        .real("trace_distance", &rows.iter().map(|r| r.trace_distance).collect::<Vec<_>>())
        .real("sup_n_rho_log_rho", &sups)
        .int("iterations", rows.iter().map(|r| r.iterations))
        .int("converged", rows.iter().map(|r| r.converged as usize))
        .write(&config.output.join("eta_study.csv"))?;
    report.files.insert("eta_study".into(), "eta_study.csv".into());
    report.status.converged = solved.iter().all(|s| s.result.converged);
    report.status.verified = Some(distances_decreasing && sup_ratio <= ETA_SUP_RATIO);
    report.eta_study = Some(EtaStudy { grid_points: config.grid_points, rows, distances_decreasing, sup_ratio });
    Ok(())
}

/// Sup errors of `phi = L_1 phi + 1` against `e^x` and of the adjoint against `e^{1-x}`.
pub fn unit_benchmark(grid: &Grid) -> Result<(f64, f64, Vec<f64>, Vec<f64>), RunError> {
    let k = Kernel::from_fn(grid, |_, _| 1.0);
    let one = vec![1.0; grid.n_points()];
    let fwd = solve_forward(&k, &one, grid)?;
    let adj = solve_adjoint(&k, &one, grid)?;
    let x = grid.nodes();
    let ef = fwd.iter().zip(x).fold(0.0_f64, |m, (p, x)| m.max((p - x.exp()).abs()));
    let ea = adj.iter().zip(x).fold(0.0_f64, |m, (p, x)| m.max((p - (1.0 - x).exp()).abs()));
    Ok((ef, ea, fwd, adj))
}

fn require_preset(config: &RunConfig, command: &str) -> Result<Constraints, RunError> {
    match config.constraints()? {
        c @ Constraints::Preset(_) => Ok(c),
        _ => Err(RunError::Config(format!("{command} refines the mesh and needs preset constraints"))),
    }
}

pub fn refine_study(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let constraints = require_preset(config, "refine-study")?;
    let kind = config.entropy.kind();
    let t = Instant::now();
    let rows: Vec<Result<RefineRow, RunError>> = thread_pool()?.install(|| {
        config
            .refine_grid_points
            .par_iter()
            .map(|np| {
                let grid = make_grid(*np)?;
                let problem = resolve(&constraints, &config.base_dir, &grid)?;
                let s = solve_problem(config, kind, problem, &grid)?;
                let rep = verify_solved(config, kind, &s, &grid)?;
                let gauge = relation_defect(&s.result.rho, &demo_velocity(&grid), &grid)?;
                let (bench, _, _, _) = unit_benchmark(&grid)?;
                Ok(RefineRow {
                    grid_points: *np,
                    converged: s.result.converged,
                    iterations: s.result.iterations,
                    max_residual: s.result.max_residual(),
                    trace_distance_to_reference: s.summary.trace_distance_to_reference,
                    eig_residual_literal: rep.check(Route::DualLiteral).max_scaled_residual,
                    eig_residual_corrected: rep.check(Route::DualCorrected).max_scaled_residual,
                    volterra_eig_residual_literal: rep.check(Route::VolterraLiteral).max_scaled_residual,
                    volterra_eig_residual_corrected: rep.check(Route::VolterraCorrected).max_scaled_residual,
                    multiplier_mismatch: rep.multiplier_mismatch,
                    multiplier_mismatch_interior: rep.multiplier_mismatch_interior,
                    gauge_current_interior: gauge.current_interior,
                    gauge_kinetic_interior: gauge.kinetic_interior,
                    volterra_benchmark: bench,
                })
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    report.timings.insert("meshes".into(), t.elapsed().as_secs_f64());
    let ratios: Vec<RefineRatios> = rows
        .windows(2)
        .map(|w| RefineRatios {
            from: w[0].grid_points,
            to: w[1].grid_points,
            volterra_benchmark: ratio(w[0].volterra_benchmark, w[1].volterra_benchmark),
            multiplier_mismatch: ratio(w[0].multiplier_mismatch, w[1].multiplier_mismatch),
            multiplier_mismatch_interior: ratio(w[0].multiplier_mismatch_interior, w[1].multiplier_mismatch_interior),
            volterra_eig_residual_literal: ratio(w[0].volterra_eig_residual_literal, w[1].volterra_eig_residual_literal),
            gauge_current_interior: ratio(w[0].gauge_current_interior, w[1].gauge_current_interior),
            gauge_kinetic_interior: ratio(w[0].gauge_kinetic_interior, w[1].gauge_kinetic_interior),
        })
        .collect();

    let col = |f: fn(&RefineRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    Table::new()
        .int("grid_points", rows.iter().map(|r| r.grid_points))
        .int("iterations", rows.iter().map(|r| r.iterations))
        .real("max_residual", &col(|r| r.max_residual))
        .real("trace_distance", &col(|r| r.trace_distance_to_reference.unwrap_or(f64::NAN)))
        .real("eig_residual_literal", &col(|r| r.eig_residual_literal))
        .real("eig_residual_corrected", &col(|r| r.eig_residual_corrected))
        .real("volterra_eig_residual_literal", &col(|r| r.volterra_eig_residual_literal))
        .real("volterra_eig_residual_corrected", &col(|r| r.volterra_eig_residual_corrected))
        .real("multiplier_mismatch", &col(|r| r.multiplier_mismatch))
        .real("multiplier_mismatch_interior", &col(|r| r.multiplier_mismatch_interior))
        .real("gauge_current_interior", &col(|r| r.gauge_current_interior))
        .real("gauge_kinetic_interior", &col(|r| r.gauge_kinetic_interior))
        .real("volterra_benchmark", &col(|r| r.volterra_benchmark))
        .write(&config.output.join("refine_study.csv"))?;
    report.files.insert("refine_study".into(), "refine_study.csv".into());
    report.status.converged = rows.iter().all(|r| r.converged);
    report.refine_study = Some(RefineStudy { rows, ratios });
    Ok(())
}

/// Largest eigenvalue and entropy changes when `rho` is gauged and re-diagonalized.
pub fn gauge_invariance(rho: &DensityMatrix, u0: &[f64], grid: &Grid) -> Result<(f64, f64), RunError> {
    let gauged = apply_gauge(rho, &phase(grid, u0)?, Direction::Forward);
    let rebuilt = DensityMatrix::from_kernel(grid, &gauged.kernel(grid))?;
    let spectrum = rho.values().iter().zip(rebuilt.values()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let mut ent = 0.0_f64;
    for kind in [EntropyKind::Boltzmann, EntropyKind::Regularized { eta: 1e-3 }, EntropyKind::FermiDirac] {
        ent = ent.max((entropy(rho, kind)? - entropy(&rebuilt, kind)?).abs());
    }
    Ok((spectrum, ent))
}

/// Seeded smooth state with top eigenvalue `0.9`, inside every entropy's domain.
fn demo_state(grid: &Grid, seed: u64) -> Result<DensityMatrix, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = random_psd(grid, &mut rng, 3, Roughness::Smooth, true)?;
    let scale = 0.9 / r.values()[0];
    Ok(DensityMatrix::from_kernel(grid, &(r.kernel(grid) * C64::from(scale)))?)
}

pub fn gauge_demo(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    let constraints = config.constraints()?;
    let meshes = match constraints {
        Constraints::Preset(_) => vec![config.grid_points, 2 * config.grid_points - 1],
        _ => vec![config.grid_points],
    };
    let kind = config.entropy.kind();
    let t = Instant::now();
    let rows: Vec<Result<GaugeRow, RunError>> = thread_pool()?.install(|| {
        meshes
            .par_iter()
            .map(|np| {
                let grid = make_grid(*np)?;
                let problem = resolve(&constraints, &config.base_dir, &grid)?;
                let u0 = if problem.has_current() { problem.u0.clone() } else { demo_velocity(&grid) };
                let s = solve_problem(config, kind, problem, &grid)?;
                let state = demo_state(&grid, config.seed)?;
                let rel = relation_defect(&state, &u0, &grid)?;
                let (spectrum_defect, entropy_defect) = gauge_invariance(&state, &u0, &grid)?;
                Ok(GaugeRow {
                    grid_points: *np,
                    converged: s.result.converged,
                    restored: restore_errors(&s.restored, &s.problem, &grid),
                    trace_distance_to_reference: s.summary.trace_distance_to_reference,
                    relation_current: rel.current,
                    relation_kinetic: rel.kinetic,
                    relation_current_interior: rel.current_interior,
                    relation_kinetic_interior: rel.kinetic_interior,
                    spectrum_defect,
                    entropy_defect,
                })
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    report.timings.insert("meshes".into(), t.elapsed().as_secs_f64());
    let interior = |r: &GaugeRow| {
        [r.relation_current_interior, r.relation_kinetic_interior, r.restored.j_interior, r.restored.k_interior]
    };
    let pairs: Vec<([f64; 4], [f64; 4])> = rows.windows(2).map(|w| (interior(&w[0]), interior(&w[1]))).collect();
    let ratios: Vec<[f64; 4]> = pairs.iter().map(|(c, f)| core::array::from_fn(|i| ratio(c[i], f[i]))).collect();
    let second = pairs.iter().all(|(c, f)| (0..4).all(|i| second_order(c[i], f[i])));
    let invariance_ok = rows.iter().all(|r| r.spectrum_defect <= INVARIANCE_TOL && r.entropy_defect <= INVARIANCE_TOL);

    let col = |f: fn(&GaugeRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    Table::new()
        .int("grid_points", rows.iter().map(|r| r.grid_points))
        .real("restored_n", &col(|r| r.restored.n))
        .real("restored_j", &col(|r| r.restored.j))
        .real("restored_k", &col(|r| r.restored.k))
        .real("restored_j_interior", &col(|r| r.restored.j_interior))
        .real("restored_k_interior", &col(|r| r.restored.k_interior))
        .real("relation_current", &col(|r| r.relation_current))
        .real("relation_kinetic", &col(|r| r.relation_kinetic))
        .real("relation_current_interior", &col(|r| r.relation_current_interior))
        .real("relation_kinetic_interior", &col(|r| r.relation_kinetic_interior))
        .real("spectrum_defect", &col(|r| r.spectrum_defect))
        .real("entropy_defect", &col(|r| r.entropy_defect))
        .write(&config.output.join("gauge_demo.csv"))?;
    report.files.insert("gauge_demo".into(), "gauge_demo.csv".into());
    report.status.converged = rows.iter().all(|r| r.converged);
    report.status.verified = Some(invariance_ok && (second || rows.len() < 2));
    report.gauge_demo = Some(GaugeDemo { rows, ratios, invariance_ok, second_order: second });
    Ok(())
}

fn smooth_field(rng: &mut ChaCha8Rng, grid: &Grid, modes: usize) -> Vec<f64> {
    let c: Vec<f64> = (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect();
    grid.sample(|x| c.iter().enumerate().map(|(m, c)| c * (m as f64 * PI * x).cos()).sum())
}

/// Smooth kernel with `max |N| = kappa`.
fn smooth_kernel(rng: &mut ChaCha8Rng, grid: &Grid, kappa: f64) -> Result<Kernel, RunError> {
    let c: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
    let raw = Kernel::from_fn(grid, |x, y| {
        (0..9).map(|i| c[i] * ((i / 3) as f64 * PI * x).cos() * ((i % 3) as f64 * PI * y).cos()).sum()
    });
    let scale = kappa / raw.kappa();
    Ok(Kernel::new(raw.values() * scale)?)
}

/// Bound slack, Picard difference and both duality defects of one instance.
fn volterra_instance(k: &Kernel, phi: &[f64], psi: &[f64], grid: &Grid) -> Result<[f64; 4], RunError> {
    let bound = volterra_bound(k.kappa());
    let fwd = solve_forward(k, psi, grid)?;
    let adj = solve_adjoint(k, psi, grid)?;
    let np = grid.norm(psi);
    let slack = (1.0 - grid.norm(&fwd) / (bound * np)).min(1.0 - grid.norm(&adj) / (bound * np));
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let picard = diff(&picard_forward(k, psi, grid, 50)?, &fwd).max(diff(&picard_adjoint(k, psi, grid, 50)?, &adj));
    let raw = grid.inner(&apply_forward(k, phi, grid)?, psi) - grid.inner(phi, &apply_adjoint(k, psi, grid)?);
    Ok([slack, picard, raw.abs(), (raw - duality_defect(k, phi, psi, grid)).abs()])
}

pub fn volterra_selftest(config: &RunConfig, report: &mut RunReport) -> Result<(), RunError> {
    const MESHES: [usize; 3] = [251, 501, 1001];
    const INSTANCES: usize = 20;
    let t = Instant::now();
    let mut benchmarks = Vec::new();
    for np in MESHES {
        let grid = make_grid(np)?;
        let (forward_error, adjoint_error, fwd, adj) = unit_benchmark(&grid)?;
        if np == MESHES[2] {
            let x = grid.nodes();
            Table::new()
                .real("x", x)
                .real("phi_forward", &fwd)
                .real("exp_x", &x.iter().map(|x| x.exp()).collect::<Vec<_>>())
                .real("phi_adjoint", &adj)
                .real("exp_1_minus_x", &x.iter().map(|x| (1.0 - x).exp()).collect::<Vec<_>>())
                .write(&config.output.join("volterra_fields.csv"))?;
        }
        benchmarks.push(VolterraBenchmark { grid_points: np, forward_error, adjoint_error });
    }
    let ratios: Vec<[f64; 2]> = benchmarks
        .windows(2)
        .map(|w| [ratio(w[0].forward_error, w[1].forward_error), ratio(w[0].adjoint_error, w[1].adjoint_error)])
        .collect();
    let last = benchmarks.last().expect("three meshes");
    let benchmark_ok = last.forward_error <= BENCHMARK_TOL && last.adjoint_error <= BENCHMARK_TOL;
    let ratio_ok = ratios.iter().flatten().all(|r| *r >= RATIO_WINDOW.0 && *r <= RATIO_WINDOW.1);

    // The unit kernel at the finest mesh plus seeded smooth kernels with kappa in [0.5, 2].
    let mut results = Vec::new();
    let fine = make_grid(MESHES[2])?;
    let ones = vec![1.0; MESHES[2]];
    results.push(volterra_instance(&Kernel::from_fn(&fine, |_, _| 1.0), &ones, &ones, &fine)?);
    let grid = make_grid(101)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..INSTANCES {
        let kappa = rng.random_range(0.5..2.0);
        let k = smooth_kernel(&mut rng, &grid, kappa)?;
        let phi = smooth_field(&mut rng, &grid, 5);
        let psi = smooth_field(&mut rng, &grid, 5);
        results.push(volterra_instance(&k, &phi, &psi, &grid)?);
    }
    let bound_slack = results.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
    let max_of = |i: usize| results.iter().map(|r| r[i]).fold(0.0_f64, f64::max);
    let (max_picard_difference, max_duality_raw, max_duality_corrected) = (max_of(1), max_of(2), max_of(3));
    report.timings.insert("volterra".into(), t.elapsed().as_secs_f64());

    Table::new()
        .int("grid_points", benchmarks.iter().map(|b| b.grid_points))
        .real("forward_error", &benchmarks.iter().map(|b| b.forward_error).collect::<Vec<_>>())
        .real("adjoint_error", &benchmarks.iter().map(|b| b.adjoint_error).collect::<Vec<_>>())
        .write(&config.output.join("volterra_selftest.csv"))?;
    report.files.insert("volterra_selftest".into(), "volterra_selftest.csv".into());
    report.files.insert("volterra_fields".into(), "volterra_fields.csv".into());

    let st = VolterraSelftest {
        benchmarks,
        ratios,
        random_instances: INSTANCES,
        bound_slack,
        max_picard_difference,
        max_duality_raw,
        max_duality_corrected,
        benchmark_ok,
        ratio_ok,
        bound_ok: bound_slack >= 0.0,
        picard_ok: max_picard_difference <= PICARD_TOL,
        duality_raw_ok: max_duality_raw <= DUALITY_TOL,
        duality_corrected_ok: max_duality_corrected <= DUALITY_TOL,
    };
    // The raw identity misses the corner term of the trapezoid rule; it is
    // reported but does not fail the run.
    report.status.verified =
        Some(st.benchmark_ok && st.ratio_ok && st.bound_ok && st.picard_ok && st.duality_corrected_ok);
    report.volterra_selftest = Some(st);
    Ok(())
}
