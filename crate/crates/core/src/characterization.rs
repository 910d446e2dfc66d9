//! The objects built on a computed minimizer: the weight `a`, the kernels
//! `K0` and `K`, the source `gamma`, the multiplier `m0` with `m* = a m0 / 2`,
//! the potential `A*` and the form `Q`, plus the eigenvalue checks tying
//! them back to the spectrum of the minimizer.
//!
//! Two routes are checked. The dual route takes `m* := lambda_k` from the
//! solver; the Volterra route solves the adjoint equation for `m0`.
//! On each route `A*` is evaluated by the literal formula
//! `-n[rho log rho]/n - m* k/n` and with the curvature term
//! `m* |grad sqrt n|^2 / n` added. The second version is the one for which
//! `Q = H(lambda)` holds exactly on the grid when `m* = lambda_k`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::DualPotentials;
use crate::grid::{gradient_op, Grid, OperatorMatrix, Symmetry};
use crate::num::{abs, cos, ln, sqrt, sup_norm};
use crate::operator::{moments, n_rho_log_rho, DensityMatrix};
use crate::volterra::{solve_adjoint, Kernel};
use crate::{Error, Result, C64};

/// Default lower bound on `k - |grad sqrt n|^2`.
pub const A_FLOOR: f64 = 1e-8;
/// Default smallest eigenvalue of the minimizer entering the checks.
pub const SPECTRAL_CUTOFF: f64 = 1e-10;

/// `a = 1 / (k - |grad sqrt n|^2)`.
pub fn a_field(n: &[f64], k: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    a_field_with_floor(n, k, A_FLOOR, grid)
}

pub fn a_field_with_floor(n: &[f64], k: &[f64], floor: f64, grid: &Grid) -> Result<Vec<f64>> {
    grid.check_len(n.len())?;
    grid.check_len(k.len())?;
    check_density(n)?;
    let g2 = grid.grad_sqrt_sq(n);
    let gap: Vec<f64> = k.iter().zip(&g2).map(|(k, g)| k - g).collect();
    let bad: Vec<usize> = gap.iter().enumerate().filter(|(_, v)| !(**v >= floor)).map(|(i, _)| i).collect();
    if !bad.is_empty() {
        return Err(Error::AssumptionViolated { nodes: bad });
    }
    Ok(gap.iter().map(|v| 1.0 / v).collect())
}

fn check_density(n: &[f64]) -> Result<()> {
    match n.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        Some((i, v)) => Err(Error::InvalidDensity { node: i, value: *v }),
        None => Ok(()),
    }
}

fn complex_gradient_op(grid: &Grid) -> DMatrix<C64> {
    gradient_op(grid).entries().map(|v| C64::new(v, 0.0))
}

/// `K0(x, y) = 2 Re sum_p rho_p conj(phi_p(x)) (D phi_p)(y)`.
pub fn kernel_k0(rho: &DensityMatrix, grid: &Grid) -> Result<Kernel> {
    grid.check_len(rho.dim())?;
    let f = rho.fields();
    let df = complex_gradient_op(grid) * f;
    let mut left = f.map(|z| z.conj());
    for (p, r) in rho.values().iter().enumerate() {
        left.column_mut(p).scale_mut(*r);
    }
    let k0 = (left * df.transpose()).map(|z| 2.0 * z.re);
    Kernel::new(k0)
}

/// `D` applied to the first argument of a kernel.
pub fn d_x(k: &Kernel, grid: &Grid) -> Result<Kernel> {
    Kernel::new(gradient_op(grid).entries() * k.values())
}

/// Kernel exactly as printed: `K = K0/(2n) + (a D n / (4n)) D_x K0`.
pub fn kernel_k(k0: &Kernel, n: &[f64], a: &[f64], grid: &Grid) -> Result<Kernel> {
    let c0: Vec<f64> = n.iter().map(|n| 1.0 / (2.0 * n)).collect();
    assemble_k(k0, n, a, &c0, grid)
}

/// Kernel with the first coefficient `a (k - 2 |grad sqrt n|^2) / (2n)`, the
/// one that comes out of differentiating the constraint `n = k - ...` along
/// the proof. It agrees with [`kernel_k`] whenever `grad n = 0`.
pub fn kernel_k_consistent(k0: &Kernel, n: &[f64], k: &[f64], a: &[f64], grid: &Grid) -> Result<Kernel> {
    let g2 = grid.grad_sqrt_sq(n);
    let c0: Vec<f64> = (0..n.len()).map(|i| a[i] * (k[i] - 2.0 * g2[i]) / (2.0 * n[i])).collect();
    assemble_k(k0, n, a, &c0, grid)
}

fn assemble_k(k0: &Kernel, n: &[f64], a: &[f64], c0: &[f64], grid: &Grid) -> Result<Kernel> {
    grid.check_len(n.len())?;
    grid.check_len(a.len())?;
    grid.check_len(k0.dim())?;
    check_density(n)?;
    let dn = grid.gradient(n);
    let dk0 = d_x(k0, grid)?;
    let v = k0.values();
    let dv = dk0.values();
    let np = n.len();
    let out = DMatrix::from_fn(np, np, |i, j| c0[i] * v[(i, j)] + a[i] * dn[i] / (4.0 * n[i]) * dv[(i, j)]);
    Kernel::new(out)
}

/// Modes entering the spectral sums: all populated modes for `eta > 0`,
/// modes above `cutoff` for `eta = 0`. Returns `(p, log(rho_p + eta))`.
fn populated(rho: &DensityMatrix, eta: f64, cutoff: f64) -> Vec<(usize, f64)> {
    rho.values()
        .iter()
        .enumerate()
        .filter(|(_, r)| if eta == 0.0 { **r > cutoff } else { **r > 0.0 })
        .map(|(p, r)| (p, if eta == 0.0 { rho.log_value(p) } else { ln(r + eta) }))
        .collect()
}

/// `gamma(x) = 2 Re sum_p rho_p (D phi_p)(x) int_x^1 conj(phi_p) (log rho_p - c)`
/// with `c = n[rho log(rho + eta)] / n`.
pub fn gamma_star(rho: &DensityMatrix, n: &[f64], eta: f64, cutoff: f64, grid: &Grid) -> Result<Vec<f64>> {
    grid.check_len(n.len())?;
    check_density(n)?;
    let c: Vec<f64> = n_rho_log_rho(rho, eta, grid).iter().zip(n).map(|(a, b)| a / b).collect();
    let np = n.len();
    let mut gamma = vec![0.0; np];
    for (p, l) in populated(rho, eta, cutoff) {
        let r = rho.values()[p];
        let phi = rho.field(p);
        let dphi = grid.gradient_c(&phi);
        let f: Vec<C64> = phi.iter().zip(&c).map(|(z, c)| z.conj() * (l - c)).collect();
        let tail = grid.tail_c(&f);
        for i in 0..np {
            gamma[i] += 2.0 * r * (dphi[i] * tail[i]).re;
        }
    }
    Ok(gamma)
}

/// Sign of the source in the adjoint equation `m0 = L*_K m0 -/+ gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }
}

/// Solves `m0 = L*_K m0 + sign gamma` and returns `(m0, a m0 / 2)`.
pub fn solve_multiplier(k: &Kernel, gamma: &[f64], a: &[f64], grid: &Grid, sign: Sign) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.check_len(a.len())?;
    let src: Vec<f64> = gamma.iter().map(|g| sign.factor() * g).collect();
    let m0 = solve_adjoint(k, &src, grid)?;
    let ms = m0.iter().zip(a).map(|(m, a)| 0.5 * a * m).collect();
    Ok((m0, ms))
}

/// Literal `A* = -n[rho log(rho + eta)]/n - (m* k)/n`.
///
/// The product `m* k` is the `m*`-weighted kinetic density of `rho`,
/// `A(mu kappa)` with `mu` the edge mean of `m*` and `kappa` the edge kinetic
/// density; for `m* = 1` it is `k[rho]`.
pub fn a_star_field(rho: &DensityMatrix, n: &[f64], m_star: &[f64], eta: f64, grid: &Grid) -> Result<Vec<f64>> {
    grid.check_len(n.len())?;
    grid.check_len(m_star.len())?;
    check_density(n)?;
    let nl = n_rho_log_rho(rho, eta, grid);
    let kappa = moments(rho, grid).edges.map(|e| e.kappa).unwrap_or_else(|| vec![0.0; grid.n_edges()]);
    let mu = grid.edge_mean(m_star);
    let mk: Vec<f64> = mu.iter().zip(&kappa).map(|(m, k)| m * k).collect();
    let mk = grid.edge_to_node(&mk);
    Ok((0..n.len()).map(|i| -nl[i] / n[i] - mk[i] / n[i]).collect())
}

/// Discrete `m* |grad sqrt n|^2 / n`:
/// `sum_{cells e at i} mu_e (1 - s_j/s_i)^2 / (2 w_i h)` with `s = sqrt n`
/// and `j` the other end of `e`.
pub fn curvature_correction(n: &[f64], m_star: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    grid.check_len(n.len())?;
    grid.check_len(m_star.len())?;
    check_density(n)?;
    let s: Vec<f64> = n.iter().map(|v| sqrt(*v)).collect();
    let mu = grid.edge_mean(m_star);
    let w = grid.weights();
    let h = grid.spacing();
    let mut out = vec![0.0; n.len()];
    for (e, m) in mu.iter().enumerate() {
        let t = 1.0 - s[e + 1] / s[e];
        let u = 1.0 - s[e] / s[e + 1];
        out[e] += m * t * t / (2.0 * w[e] * h);
        out[e + 1] += m * u * u / (2.0 * w[e + 1] * h);
    }
    Ok(out)
}

/// `A*` with [`curvature_correction`] added.
pub fn a_star_corrected(rho: &DensityMatrix, n: &[f64], m_star: &[f64], eta: f64, grid: &Grid) -> Result<Vec<f64>> {
    let a = a_star_field(rho, n, m_star, eta, grid)?;
    let c = curvature_correction(n, m_star, grid)?;
    Ok(a.iter().zip(&c).map(|(a, c)| a + c).collect())
}

/// `Q` with `<psi, Q phi>_w = sum_e h mu_e sqrt(n_e n_{e+1}) conj(G(psi/sqrt n))_e G(phi/sqrt n)_e
/// + <A* psi, phi>_w`, `mu` the edge mean of `m*`.
pub fn q_form(m_star: &[f64], a_star: &[f64], n: &[f64], grid: &Grid) -> Result<OperatorMatrix> {
    grid.check_len(n.len())?;
    grid.check_len(m_star.len())?;
    grid.check_len(a_star.len())?;
    check_density(n)?;
    let np = n.len();
    let s: Vec<f64> = n.iter().map(|v| sqrt(*v)).collect();
    let mu = grid.edge_mean(m_star);
    let w = grid.weights();
    let h = grid.spacing();
    let mut q = DMatrix::zeros(np, np);
    for (e, m) in mu.iter().enumerate() {
        let (a, b) = (e, e + 1);
        let c = m * s[a] * s[b] / h;
        q[(a, a)] += c / (s[a] * s[a]) / w[a];
        q[(b, b)] += c / (s[b] * s[b]) / w[b];
        q[(a, b)] -= c / (s[a] * s[b]) / w[a];
        q[(b, a)] -= c / (s[a] * s[b]) / w[b];
    }
    for (i, v) in a_star.iter().enumerate() {
        q[(i, i)] += v;
    }
    Ok(OperatorMatrix::new(q, Symmetry::WeightedHermitian))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// `m* = lambda_k`, literal `A*`.
    DualLiteral,
    /// `m* = lambda_k`, `A*` with the curvature term.
    DualCorrected,
    /// `m*` from the adjoint Volterra equation, literal `A*`.
    VolterraLiteral,
    /// `m*` from the adjoint Volterra equation, `A*` with the curvature term.
    VolterraCorrected,
}

impl Route {
    pub const ALL: [Route; 4] = [Route::DualLiteral, Route::DualCorrected, Route::VolterraLiteral, Route::VolterraCorrected];

    pub fn name(self) -> &'static str {
        match self {
            Route::DualLiteral => "dual-literal",
            Route::DualCorrected => "dual-corrected",
            Route::VolterraLiteral => "volterra-literal",
            Route::VolterraCorrected => "volterra-corrected",
        }
    }
}

/// Eigenvalue checks of one `Q`.
#[derive(Debug, Clone)]
pub struct QCheck {
    pub route: Route,
    pub m_star: Vec<f64>,
    pub a_star: Vec<f64>,
    pub q_matrix: OperatorMatrix,
    /// `||Q phi_p + log(rho_p) phi_p||_w` for the populated modes, in the order of `rho`.
    pub eig_residuals: Vec<f64>,
    /// `|mu_p + log rho_p|` with `mu_p` the ascending eigenvalues of `Q`.
    pub minmax_gaps: Vec<f64>,
    /// Largest `eig_residuals[p] / (1 + |log rho_p|)`.
    pub max_scaled_residual: f64,
    /// Largest `minmax_gaps[p] / (1 + |log rho_p|)`.
    pub max_scaled_gap: f64,
    /// Smallest `Q(phi, phi) - G(phi)` over the probe set.
    pub g_vs_q_margin: f64,
    pub hermitian_defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub sign: Sign,
    pub a_floor: f64,
    pub probes: usize,
    pub seed: u64,
    /// Sub-interval used for the interior multiplier mismatch.
    pub window: (f64, f64),
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { sign: Sign::Minus, a_floor: A_FLOOR, probes: 100, seed: 7, window: (0.125, 0.875) }
    }
}

#[derive(Debug, Clone)]
pub struct CharacterizationInputs<'a> {
    pub rho: &'a DensityMatrix,
    pub n: &'a [f64],
    pub k: &'a [f64],
    pub eta: f64,
    pub spectral_cutoff: f64,
}

impl<'a> CharacterizationInputs<'a> {
    pub fn new(rho: &'a DensityMatrix, n: &'a [f64], k: &'a [f64]) -> Self {
        CharacterizationInputs { rho, n, k, eta: 0.0, spectral_cutoff: SPECTRAL_CUTOFF }
    }
}

#[derive(Debug, Clone)]
pub struct CharacterizationReport {
    pub options: VerifyOptions,
    pub eta: f64,
    pub spectral_cutoff: f64,
    pub a: Vec<f64>,
    pub k0: Kernel,
    /// The kernel driving the Volterra route ([`kernel_k_consistent`]).
    pub kernel: Kernel,
    pub gamma_star: Vec<f64>,
    pub m0: Vec<f64>,
    /// Volterra-route multiplier for `options.sign`.
    pub m_star: Vec<f64>,
    /// Literal `A*` on the Volterra route.
    pub a_star: Vec<f64>,
    /// `log(rho_p + eta)` of the populated modes.
    pub log_rho: Vec<f64>,
    pub checks: Vec<QCheck>,
    pub min_m_star: f64,
    pub current_sup: f64,
    /// `||m* - lambda_k||_inf` for `options.sign`.
    pub multiplier_mismatch: f64,
    /// Same over the nodes inside `options.window`.
    pub multiplier_mismatch_interior: f64,
    /// Sup mismatch for the other sign.
    pub multiplier_mismatch_other_sign: f64,
    pub better_sign: Sign,
    /// Sup mismatch when the printed kernel [`kernel_k`] drives the equation.
    pub multiplier_mismatch_printed_kernel: f64,
    /// `min 2 sqrt(n(x) k(y)) - |K0(x, y)|`.
    pub kernel_bound_margin: f64,
    /// `min 2 sqrt(k(x) k(y)) - |D_x K0(x, y)|`.
    pub gradient_bound_margin: f64,
}

impl CharacterizationReport {
    pub fn check(&self, route: Route) -> &QCheck {
        self.checks.iter().find(|c| c.route == route).expect("every route is checked")
    }
}

/// Smooth random probes `sum_m c_m cos(m pi x) / (1 + m)` with complex
/// coefficients, normalized in `<.,.>_w`.
pub fn smooth_probes(grid: &Grid, count: usize, seed: u64) -> Vec<Vec<C64>> {
    const MODES: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c: Vec<C64> =
                (0..MODES).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let f: Vec<C64> = grid
                .nodes()
                .iter()
                .map(|x| {
                    c.iter()
                        .enumerate()
                        .map(|(m, c)| c * (cos(m as f64 * core::f64::consts::PI * x) / (1.0 + m as f64)))
                        .sum()
                })
                .collect();
            let norm = grid.norm_c(&f);
            f.iter().map(|z| z / norm).collect()
        })
        .collect()
}

/// `G(phi) = -sum_p log(rho_p) |<phi_p, phi>_w|^2` over the populated modes.
pub fn g_star(rho: &DensityMatrix, modes: &[(usize, f64)], phi: &[C64], grid: &Grid) -> f64 {
    modes.iter().map(|(p, l)| -l * grid.inner_c(&rho.field(*p), phi).norm_sqr()).sum()
}

#[allow(clippy::too_many_arguments)]
fn q_check(
    route: Route,
    rho: &DensityMatrix,
    modes: &[(usize, f64)],
    m_star: Vec<f64>,
    a_star: Vec<f64>,
    n: &[f64],
    probes: &[Vec<C64>],
    grid: &Grid,
) -> Result<QCheck> {
    let q = q_form(&m_star, &a_star, n, grid)?;
    let mut eig_residuals = Vec::with_capacity(modes.len());
    let mut max_scaled_residual = 0.0_f64;
    for (p, l) in modes {
        let phi = rho.field(*p);
        let r: Vec<C64> = q.apply_c(&phi).iter().zip(&phi).map(|(a, b)| a + b * *l).collect();
        let v = grid.norm_c(&r);
        max_scaled_residual = max_scaled_residual.max(v / (1.0 + abs(*l)));
        eig_residuals.push(v);
    }
    let (mu, _) = q.eigen(grid)?;
    let mut minmax_gaps = Vec::with_capacity(modes.len());
    let mut max_scaled_gap = 0.0_f64;
    for (i, (_, l)) in modes.iter().enumerate() {
        let g = abs(mu[i] + l);
        max_scaled_gap = max_scaled_gap.max(g / (1.0 + abs(*l)));
        minmax_gaps.push(g);
    }
    let mut g_vs_q_margin = f64::INFINITY;
    for phi in probes {
        let qv = grid.inner_c(phi, &q.apply_c(phi)).re;
        g_vs_q_margin = g_vs_q_margin.min(qv - g_star(rho, modes, phi, grid));
    }
    let hermitian_defect = q.hermitian_defect(grid);
    Ok(QCheck {
        route,
        m_star,
        a_star,
        q_matrix: q,
        eig_residuals,
        minmax_gaps,
        max_scaled_residual,
        max_scaled_gap,
        g_vs_q_margin,
        hermitian_defect,
    })
}

fn window_sup(f: &[f64], grid: &Grid, window: (f64, f64)) -> f64 {
    f.iter().zip(grid.nodes()).filter(|(_, x)| **x >= window.0 - 1e-12 && **x <= window.1 + 1e-12).fold(0.0, |m, (v, _)| m.max(abs(*v)))
}

/// Builds every characterization object for a minimizer and its multipliers.
pub fn verify(
    inputs: &CharacterizationInputs<'_>,
    lambda: &DualPotentials,
    opts: &VerifyOptions,
    grid: &Grid,
) -> Result<CharacterizationReport> {
    let CharacterizationInputs { rho, n, k, eta, spectral_cutoff } = *inputs;
    grid.check_len(rho.dim())?;
    grid.check_len(lambda.len())?;
    let a = a_field_with_floor(n, k, opts.a_floor, grid)?;
    let k0 = kernel_k0(rho, grid)?;
    let kernel = kernel_k_consistent(&k0, n, k, &a, grid)?;
    let printed = kernel_k(&k0, n, &a, grid)?;
    let gamma = gamma_star(rho, n, eta, spectral_cutoff, grid)?;

    let (m0, m_star) = solve_multiplier(&kernel, &gamma, &a, grid, opts.sign)?;
    let other = match opts.sign {
        Sign::Minus => Sign::Plus,
        Sign::Plus => Sign::Minus,
    };
    let (_, m_other) = solve_multiplier(&kernel, &gamma, &a, grid, other)?;
    let (_, m_printed) = solve_multiplier(&printed, &gamma, &a, grid, opts.sign)?;
    let diff = |m: &[f64]| -> Vec<f64> { m.iter().zip(&lambda.lambda_k).map(|(a, b)| a - b).collect() };
    let mismatch = sup_norm(&diff(&m_star));
    let mismatch_other = sup_norm(&diff(&m_other));
    let better_sign = if mismatch_other < mismatch { other } else { opts.sign };

    let modes: Vec<(usize, f64)> = populated(rho, eta, spectral_cutoff);
    let probes = smooth_probes(grid, opts.probes, opts.seed);
    let lk = lambda.lambda_k.clone();
    let a_star = a_star_field(rho, n, &m_star, eta, grid)?;
    let checks = vec![
        q_check(Route::DualLiteral, rho, &modes, lk.clone(), a_star_field(rho, n, &lk, eta, grid)?, n, &probes, grid)?,
        q_check(Route::DualCorrected, rho, &modes, lk.clone(), a_star_corrected(rho, n, &lk, eta, grid)?, n, &probes, grid)?,
        q_check(Route::VolterraLiteral, rho, &modes, m_star.clone(), a_star.clone(), n, &probes, grid)?,
        q_check(
            Route::VolterraCorrected,
            rho,
            &modes,
            m_star.clone(),
            a_star_corrected(rho, n, &m_star, eta, grid)?,
            n,
            &probes,
            grid,
        )?,
    ];

    let dk0 = d_x(&k0, grid)?;
    let np = n.len();
    let mut kernel_bound_margin = f64::INFINITY;
    let mut gradient_bound_margin = f64::INFINITY;
    for i in 0..np {
        for j in 0..np {
            kernel_bound_margin = kernel_bound_margin.min(2.0 * sqrt(n[i] * k[j]) - abs(k0.values()[(i, j)]));
            gradient_bound_margin = gradient_bound_margin.min(2.0 * sqrt(k[i] * k[j]) - abs(dk0.values()[(i, j)]));
        }
    }
    let current_sup = sup_norm(&moments(rho, grid).u);

    Ok(CharacterizationReport {
        options: *opts,
        eta,
        spectral_cutoff,
        min_m_star: crate::num::min(&m_star),
        multiplier_mismatch: mismatch,
        multiplier_mismatch_interior: window_sup(&diff(&m_star), grid, opts.window),
        multiplier_mismatch_other_sign: mismatch_other,
        better_sign,
        multiplier_mismatch_printed_kernel: sup_norm(&diff(&m_printed)),
        log_rho: modes.iter().map(|(_, l)| *l).collect(),
        a,
        k0,
        kernel,
        gamma_star: gamma,
        m0,
        m_star,
        a_star,
        checks,
        current_sup,
        kernel_bound_margin,
        gradient_bound_margin,
    })
}
