//! Concave dual of the constrained entropy minimization and its Newton solver.
//!
//! For multipliers `lambda = (lambda_n, lambda_k)` the Hamiltonian is
//! `H(lambda) = diag(lambda_n) + W^{-1} G^T diag(h mu) G` with `mu` the edge
//! mean of `lambda_k`, so `<phi, H phi>_w = <lambda_n, |phi|^2>_w + <lambda_k, A|G phi|^2>_w`.
//! The dual is `g(lambda) = sum_p s*(E_p) - <lambda_n, n>_w - <lambda_k, k>_w`
//! where `E_p` are the eigenvalues of `H` and `s*` is
//! [`EntropyKind::conjugate`]. Its `<.,.>_w`-gradient is the residual field
//! `(n[rho] - n, k[rho] - k)` of the Gibbs state `rho = gibbs(H(lambda))`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::grid::{kinetic_op, Grid, OperatorMatrix, Symmetry};
use crate::num::{abs, ln, sqrt, sup_norm};
use crate::operator::{compatibility_gap, entropy, gibbs_from_spectrum, DensityMatrix, EntropyKind, Moments};
use crate::{Error, Result};

/// Gap threshold below which the data count as infeasible.
pub const INFEASIBLE_GAP: f64 = -1e-6;
/// Gap threshold below which the data are flagged as nearly pure.
pub const NEAR_PURE_GAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials {
    pub lambda_n: Vec<f64>,
    pub lambda_k: Vec<f64>,
}

impl DualPotentials {
    pub fn new(lambda_n: Vec<f64>, lambda_k: Vec<f64>) -> Result<Self> {
        if lambda_n.len() != lambda_k.len() {
            return Err(Error::Shape { expected: lambda_n.len(), found: lambda_k.len() });
        }
        if lambda_n.iter().chain(&lambda_k).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dual potentials"));
        }
        Ok(DualPotentials { lambda_n, lambda_k })
    }

    pub fn zeros(n: usize) -> Self {
        DualPotentials { lambda_n: vec![0.0; n], lambda_k: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.lambda_n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_n.is_empty()
    }

    /// `self + t d`.
    pub fn step(&self, t: f64, d: &DualPotentials) -> DualPotentials {
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + t * y).collect();
        DualPotentials { lambda_n: add(&self.lambda_n, &d.lambda_n), lambda_k: add(&self.lambda_k, &d.lambda_k) }
    }

    /// Largest entry in absolute value over both fields.
    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.lambda_n).max(sup_norm(&self.lambda_k))
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        grid.check_len(self.lambda_n.len())?;
        grid.check_len(self.lambda_k.len())?;
        if self.lambda_n.iter().chain(&self.lambda_k).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dual potentials"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Auto,
    Given(DualPotentials),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub shrink: f64,
    pub sufficient_increase: f64,
    /// Cap on `max |step|` per iteration.
    pub max_step: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch { shrink: 0.5, sufficient_increase: 1e-4, max_step: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tol_residual: f64,
    pub max_iter: usize,
    pub entropy: EntropyKind,
    pub init: Init,
    pub line_search: LineSearch,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_residual: 1e-9,
            max_iter: 500,
            entropy: EntropyKind::Boltzmann,
            init: Init::Auto,
            line_search: LineSearch::default(),
        }
    }
}

impl SolveOptions {
    pub fn with_entropy(entropy: EntropyKind) -> Self {
        SolveOptions { entropy, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::InvalidOption("tol_residual must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidOption("max_iter must be at least 1"));
        }
        let ls = &self.line_search;
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(Error::InvalidOption("line-search shrink must lie in (0, 1)"));
        }
        if !(ls.sufficient_increase > 0.0 && ls.sufficient_increase < 1.0) {
            return Err(Error::InvalidOption("sufficient-increase constant must lie in (0, 1)"));
        }
        if !(ls.max_step > 0.0) {
            return Err(Error::InvalidOption("max_step must be positive"));
        }
        self.entropy.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub rho: DensityMatrix,
    pub potentials: DualPotentials,
    pub residual_n: Vec<f64>,
    pub residual_k: Vec<f64>,
    pub dual_value: f64,
    pub primal_entropy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dual value after every accepted step, starting with the initial point.
    pub dual_history: Vec<f64>,
    /// [`DualState::value_noise`] of each `dual_history` entry. Accepted steps
    /// satisfy `history[i+1] >= history[i] - noise[i]`.
    pub dual_noise: Vec<f64>,
    /// Minimum of `k - |grad sqrt n|^2` over the input data.
    pub min_gap: f64,
    /// Set when `min_gap < NEAR_PURE_GAP`: the multipliers diverge in this
    /// regime and the regularized entropy is the better choice.
    pub near_pure: bool,
    /// Number of accepted steps that raised the dual by less than `1e-15`.
    pub stagnant_steps: usize,
    /// Number of iterations that used the gradient instead of the Newton step.
    pub gradient_fallbacks: usize,
}

impl SolveResult {
    pub fn max_residual(&self) -> f64 {
        sup_norm(&self.residual_n).max(sup_norm(&self.residual_k))
    }
}

/// `H(lambda)` as an operator on nodal fields.
pub fn hamiltonian(lambda: &DualPotentials, grid: &Grid) -> Result<OperatorMatrix> {
    lambda.check(grid)?;
    let mu = grid.edge_mean(&lambda.lambda_k);
    let mut m = kinetic_op(grid, &mu).into_entries();
    for (i, v) in lambda.lambda_n.iter().enumerate() {
        m[(i, i)] += v;
    }
    Ok(OperatorMatrix::new(m, Symmetry::WeightedHermitian))
}

/// Spectral data of `H(lambda)` with the moments of its Gibbs state and the
/// dual value, shared by value, gradient and Newton computations.
#[derive(Debug, Clone)]
pub struct DualState {
    potentials: DualPotentials,
    kind: EntropyKind,
    energies: Vec<f64>,
    fields: DMatrix<f64>,
    edge_fields: DMatrix<f64>,
    occupations: Vec<f64>,
    residual_n: Vec<f64>,
    residual_k: Vec<f64>,
    value: f64,
}

impl DualState {
    pub fn new(grid: &Grid, lambda: &DualPotentials, n: &[f64], k: &[f64], kind: EntropyKind) -> Result<Self> {
        kind.validate()?;
        grid.check_len(n.len())?;
        grid.check_len(k.len())?;
        let h_op = hamiltonian(lambda, grid)?;
        let (energies, fields) = h_op.eigen(grid)?;
        Ok(Self::from_spectrum(grid, lambda.clone(), energies, fields, n, k, kind))
    }

    fn from_spectrum(
        grid: &Grid,
        potentials: DualPotentials,
        energies: Vec<f64>,
        fields: DMatrix<f64>,
        n: &[f64],
        k: &[f64],
        kind: EntropyKind,
    ) -> Self {
        let np = grid.n_points();
        let h = grid.spacing();
        let edge_fields = DMatrix::from_fn(np - 1, np, |e, p| (fields[(e + 1, p)] - fields[(e, p)]) / h);
        let occupations: Vec<f64> = energies.iter().map(|e| kind.occupation(*e)).collect();
        let mut n_rho = vec![0.0; np];
        let mut kappa = vec![0.0; np - 1];
        for (p, &x) in occupations.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for i in 0..np {
                n_rho[i] += x * fields[(i, p)] * fields[(i, p)];
            }
            for e in 0..np - 1 {
                kappa[e] += x * edge_fields[(e, p)] * edge_fields[(e, p)];
            }
        }
        let k_rho = grid.edge_to_node(&kappa);
        let residual_n: Vec<f64> = n_rho.iter().zip(n).map(|(a, b)| a - b).collect();
        let residual_k: Vec<f64> = k_rho.iter().zip(k).map(|(a, b)| a - b).collect();
        let spectral: f64 = energies.iter().map(|e| kind.conjugate(*e)).sum();
        let mut value = spectral - grid.inner(&potentials.lambda_n, n) - grid.inner(&potentials.lambda_k, k);
        let finite = value.is_finite() && residual_n.iter().chain(&residual_k).all(|v| v.is_finite());
        if !finite {
            value = f64::NEG_INFINITY;
        }
        DualState { potentials, kind, energies, fields, edge_fields, occupations, residual_n, residual_k, value }
    }

    pub fn potentials(&self) -> &DualPotentials {
        &self.potentials
    }

    /// Eigenvalues of `H(lambda)`, ascending.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn occupations(&self) -> &[f64] {
        &self.occupations
    }

    /// `g(lambda)`; `-inf` when the Gibbs state overflowed.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Estimated absolute roundoff in [`DualState::value`].
    pub fn value_noise(&self) -> f64 {
        let hnorm = self.energies.iter().fold(0.0_f64, |m, e| m.max(abs(*e)));
        let mass: f64 = self.occupations.iter().sum();
        ROUNDOFF_SLACK * (1.0 + abs(self.value)) + EIGEN_NOISE_FACTOR * f64::EPSILON * hnorm * mass
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    pub fn residual_n(&self) -> &[f64] {
        &self.residual_n
    }

    pub fn residual_k(&self) -> &[f64] {
        &self.residual_k
    }

    pub fn max_residual(&self) -> f64 {
        sup_norm(&self.residual_n).max(sup_norm(&self.residual_k))
    }

    /// `<gradient, d>_w`.
    pub fn slope(&self, grid: &Grid, d: &DualPotentials) -> f64 {
        grid.inner(&self.residual_n, &d.lambda_n) + grid.inner(&self.residual_k, &d.lambda_k)
    }

    /// The Gibbs state `gibbs(H(lambda))`.
    pub fn rho(&self, grid: &Grid) -> DensityMatrix {
        gibbs_from_spectrum(grid, &self.energies, &self.fields, self.kind)
    }

    /// Divided differences `F_ab` of the occupation over the spectrum.
    fn divided_differences(&self) -> DMatrix<f64> {
        let e = &self.energies;
        let n = e.len();
        let mut f = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = self.kind.divided_difference(e[a], e[b]);
                f[(a, b)] = v;
                f[(b, a)] = v;
            }
        }
        f
    }
}

pub fn dual_value(lambda: &DualPotentials, n: &[f64], k: &[f64], kind: EntropyKind, grid: &Grid) -> Result<f64> {
    Ok(DualState::new(grid, lambda, n, k, kind)?.value)
}

/// `(n[rho(lambda)] - n, k[rho(lambda)] - k)`.
pub fn dual_gradient(
    lambda: &DualPotentials,
    n: &[f64],
    k: &[f64],
    kind: EntropyKind,
    grid: &Grid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = DualState::new(grid, lambda, n, k, kind)?;
    Ok((s.residual_n, s.residual_k))
}

/// Directional derivative of the residual fields along `d`, by the
/// Daleckii-Krein formula `d rho = sum_ab F_ab <phi_a, dH phi_b>_w |phi_a><phi_b|`.
/// This is `-M W d` in the notation of [`newton_matrix`].
pub fn hessian_action(state: &DualState, grid: &Grid, d: &DualPotentials) -> Result<(Vec<f64>, Vec<f64>)> {
    d.check(grid)?;
    let np = grid.n_points();
    let h = grid.spacing();
    let phi = &state.fields;
    let gphi = &state.edge_fields;
    let wd: Vec<f64> = grid.weights().iter().zip(&d.lambda_n).map(|(w, v)| w * v).collect();
    let mu: Vec<f64> = grid.edge_mean(&d.lambda_k).iter().map(|m| h * m).collect();
    let scaled_phi = DMatrix::from_fn(np, np, |i, p| wd[i] * phi[(i, p)]);
    let scaled_g = DMatrix::from_fn(np - 1, np, |e, p| mu[e] * gphi[(e, p)]);
    let dh = phi.transpose() * scaled_phi + gphi.transpose() * scaled_g;
    let f = state.divided_differences();
    let drho = dh.component_mul(&f);
    let t = phi * &drho;
    let dn: Vec<f64> = (0..np).map(|i| t.row(i).dot(&phi.row(i))).collect();
    let tg = gphi * &drho;
    let dkappa: Vec<f64> = (0..np - 1).map(|e| tg.row(e).dot(&gphi.row(e))).collect();
    Ok((dn, grid.edge_to_node(&dkappa)))
}

/// Pair weights below this fraction of the largest occupation are dropped
/// when assembling [`newton_matrix`].
const PAIR_CUTOFF: f64 = 1e-17;
const PAIR_CHUNK: usize = 2048;

/// `M = sum_{a,b} (-F_ab) Y_ab Y_ab^T` with `Y_ab = (phi_a phi_b, A(G phi_a G phi_b))`.
///
/// The Hessian of `g` in nodal coordinates is `-W M W` with `W` the
/// quadrature weights repeated for both fields, so the Newton step solves
/// `M z = r` and sets `d = W^{-1} z`.
pub fn newton_matrix(state: &DualState, grid: &Grid) -> DMatrix<f64> {
    let np = grid.n_points();
    let f = state.divided_differences();
    let xmax = state.occupations.iter().fold(0.0_f64, |m, v| m.max(*v));
    let cut = PAIR_CUTOFF * xmax;
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for a in 0..np {
        for b in a..np {
            let c = -f[(a, b)];
            if c > cut {
                pairs.push((a, b, sqrt(if a == b { c } else { 2.0 * c })));
            }
        }
    }
    let phi = &state.fields;
    let gphi = &state.edge_fields;
    let mut m = DMatrix::zeros(2 * np, 2 * np);
    let mut prod = vec![0.0; np - 1];
    for chunk in pairs.chunks(PAIR_CHUNK) {
        let mut z = DMatrix::zeros(2 * np, chunk.len());
        for (col, &(a, b, s)) in chunk.iter().enumerate() {
            for i in 0..np {
                z[(i, col)] = s * phi[(i, a)] * phi[(i, b)];
            }
            for (e, v) in prod.iter_mut().enumerate() {
                *v = s * gphi[(e, a)] * gphi[(e, b)];
            }
            for (i, v) in grid.edge_to_node(&prod).into_iter().enumerate() {
                z[(np + i, col)] = v;
            }
        }
        m += &z * z.transpose();
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub direction: DualPotentials,
    /// `<gradient, direction>_w`, positive for an ascent direction.
    pub slope: f64,
    /// True when the Hessian solve was rejected and the gradient was used.
    pub fallback: bool,
}

/// Relative residual above which the damped Newton solve is rejected.
const SOLVE_REJECT: f64 = 1e-2;

/// Damped Newton direction: solves `(M + damping max diag(M) I) z = r` by
/// Cholesky, LU as the fallback, and maps back with `W^{-1}`. Falls back to
/// the `<.,.>_w`-gradient when the solve fails or does not give ascent.
pub fn newton_direction(state: &DualState, grid: &Grid, damping: f64) -> NewtonStep {
    let np = grid.n_points();
    let w = grid.weights();
    let r = DVector::from_iterator(2 * np, state.residual_n.iter().chain(&state.residual_k).copied());
    let gradient = || {
        let d = DualPotentials { lambda_n: state.residual_n.clone(), lambda_k: state.residual_k.clone() };
        let slope = state.slope(grid, &d);
        NewtonStep { direction: d, slope, fallback: true }
    };
    let mut m = newton_matrix(state, grid);
    let dmax = (0..2 * np).fold(0.0_f64, |acc, i| acc.max(m[(i, i)]));
    if !(dmax > 0.0) || !dmax.is_finite() {
        return gradient();
    }
    let delta = damping * dmax;
    for i in 0..2 * np {
        m[(i, i)] += delta;
    }
    let z = match m.clone().cholesky() {
        Some(c) => Some(c.solve(&r)),
        None => m.clone().lu().solve(&r),
    };
    let Some(z) = z else { return gradient() };
    let rnorm = r.norm();
    let rel = if rnorm > 0.0 { (&m * &z - &r).norm() / rnorm } else { 0.0 };
    let slope = r.dot(&z);
    if !(rel <= SOLVE_REJECT) || !(slope > 0.0) || z.iter().any(|v| !v.is_finite()) {
        return gradient();
    }
    let direction = DualPotentials {
        lambda_n: (0..np).map(|i| z[i] / w[i]).collect(),
        lambda_k: (0..np).map(|i| z[np + i] / w[i]).collect(),
    };
    NewtonStep { direction, slope, fallback: false }
}

/// Starting point `lambda_k = 1`, `lambda_n = -log n + c` with the constant
/// chosen so that `Tr rho = integral of n`.
pub fn initial_potentials(grid: &Grid, n: &[f64], kind: EntropyKind) -> Result<DualPotentials> {
    let np = grid.n_points();
    let base = DualPotentials { lambda_n: n.iter().map(|v| -ln(*v)).collect(), lambda_k: vec![1.0; np] };
    let (energies, _) = hamiltonian(&base, grid)?.eigen(grid)?;
    let target = grid.integrate(n)?;
    let count = |c: f64| -> f64 { energies.iter().map(|e| kind.occupation(e + c)).sum() };
    let mut lo = -energies[0] - 50.0;
    let mut hi = -energies[0] + 50.0;
    for _ in 0..40 {
        if count(lo) >= target {
            break;
        }
        lo -= 50.0;
    }
    for _ in 0..40 {
        if count(hi) <= target {
            break;
        }
        hi += 50.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    Ok(DualPotentials { lambda_n: base.lambda_n.iter().map(|v| v + c).collect(), lambda_k: base.lambda_k })
}

/// Checks `n > 0`, `k >= 0` and the compatibility gap; returns the minimum gap.
pub fn feasibility_screen(grid: &Grid, n: &[f64], k: &[f64]) -> Result<f64> {
    grid.check_len(n.len())?;
    grid.check_len(k.len())?;
    if let Some((i, v)) = k.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < INFEASIBLE_GAP) {
        return Err(Error::Infeasible { node: i, gap: *v });
    }
    let m = Moments::from_nodes(n.to_vec(), vec![0.0; n.len()], k.to_vec());
    let (gap, min) = compatibility_gap(grid, &m)?;
    if min < INFEASIBLE_GAP {
        let node = gap.iter().position(|g| *g == min).unwrap_or(0);
        return Err(Error::Infeasible { node, gap: min });
    }
    Ok(min)
}

/// Accepted steps may lower the dual by its roundoff level when they strictly
/// reduce the residual; near the optimum the Armijo test is below roundoff.
/// The level is `ROUNDOFF_SLACK (1 + |g|)` plus the effect of eigenvalue
/// errors `eps ||H||` on `sum_p x_p`, which grows like `1/h^2`.
const ROUNDOFF_SLACK: f64 = 1e-13;
const EIGEN_NOISE_FACTOR: f64 = 8.0;
const MIN_STEP: f64 = 1e-12;

/// Maximizes the dual for the data `(n, k)`.
pub fn solve(n: &[f64], k: &[f64], opts: &SolveOptions, grid: &Grid) -> Result<SolveResult> {
    opts.validate()?;
    let min_gap = feasibility_screen(grid, n, k)?;
    let kind = opts.entropy;
    let ls = opts.line_search;
    let init = match &opts.init {
        Init::Auto => initial_potentials(grid, n, kind)?,
        Init::Given(l) => {
            l.check(grid)?;
            l.clone()
        }
    };
    let mut state = DualState::new(grid, &init, n, k, kind)?;
    if !state.is_finite() {
        return Err(Error::NonFinite("dual value at the initial point"));
    }
    let mut history = vec![state.value];
    let mut noise = vec![state.value_noise()];
    let mut damping = 1e-10_f64;
    let mut iterations = 0;
    let mut converged = false;
    let mut stagnant_steps = 0;
    let mut gradient_fallbacks = 0;
    while iterations < opts.max_iter {
        let res = state.max_residual();
        if res <= opts.tol_residual {
            converged = true;
            break;
        }
        iterations += 1;
        let step = newton_direction(&state, grid, damping);
        if step.fallback {
            gradient_fallbacks += 1;
        }
        let full = (ls.max_step / step.direction.sup_norm()).min(1.0);
        let mut t = full;
        let mut accepted = None;
        while t > MIN_STEP {
            let trial = DualState::new(grid, &state.potentials.step(t, &step.direction), n, k, kind)?;
            if !trial.is_finite() {
                t *= ls.shrink;
                continue;
            }
            let armijo = trial.value >= state.value + ls.sufficient_increase * t * step.slope;
            let roundoff = trial.value >= state.value - state.value_noise() && trial.max_residual() < res;
            if armijo || roundoff {
                accepted = Some(trial);
                break;
            }
            t *= ls.shrink;
        }
        match accepted {
            None => damping = (damping * 100.0).min(1.0),
            Some(trial) => {
                damping = if t == full { (damping / 10.0).max(1e-14) } else { (damping * 10.0).min(1.0) };
                if trial.value - state.value < 1e-15 {
                    stagnant_steps += 1;
                }
                history.push(trial.value);
                noise.push(trial.value_noise());
                state = trial;
            }
        }
    }
    if !converged && state.max_residual() <= opts.tol_residual {
        converged = true;
    }
    let rho = state.rho(grid);
    let primal_entropy = entropy(&rho, kind)?;
    Ok(SolveResult {
        rho,
        potentials: state.potentials.clone(),
        residual_n: state.residual_n.clone(),
        residual_k: state.residual_k.clone(),
        dual_value: state.value,
        primal_entropy,
        iterations,
        converged,
        dual_history: history,
        dual_noise: noise,
        min_gap,
        near_pure: min_gap < NEAR_PURE_GAP,
        stagnant_steps,
        gradient_fallbacks,
    })
}
