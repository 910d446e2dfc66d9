//! Density matrices, spectral calculus, entropies and moment maps.
//!
//! A density matrix is stored in symmetrized coordinates `S = W^{1/2} rho W^{-1/2}`
//! (hermitian in the plain Euclidean product) together with its spectrum in
//! descending order and the eigenfields `phi_p = W^{-1/2} v_p`, which are
//! orthonormal in `<.,.>_w`. The integral kernel is
//! `rho(x_i, x_j) = sum_p rho_p phi_p(x_i) conj(phi_p(x_j))`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::grid::{sym_eigen_ascending, symmetrize_in_place, Grid, OperatorMatrix};
use crate::num::{abs, cabs, cis, exp, expm1, ln, ln1p, sqrt};
use crate::{Error, Result, C64};

/// Densities below this are treated as vacuum when dividing by `n`.
pub const N_FLOOR: f64 = 1e-12;

/// Relative tolerance for negative eigenvalues accepted as roundoff.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyKind {
    /// `s(x) = x log x - x`.
    Boltzmann,
    /// `s(x) = (x+eta) log(x+eta) - x - eta log eta`, `eta` in `(0, 1]`.
    Regularized { eta: f64 },
    /// `s(x) = x log x + (1-x) log(1-x)` on `[0, 1]`.
    FermiDirac,
}

impl EntropyKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EntropyKind::Regularized { eta } if !(eta > 0.0 && eta <= 1.0) => Err(Error::InvalidEta(eta)),
            _ => Ok(()),
        }
    }

    /// The regularization parameter, 0 for the other kinds.
    pub fn eta(&self) -> f64 {
        match *self {
            EntropyKind::Regularized { eta } => eta,
            _ => 0.0,
        }
    }

    /// Entropy density `s(x)`, with `0 log 0 = 0`.
    pub fn density(&self, x: f64) -> f64 {
        match *self {
            EntropyKind::Boltzmann => xlogx(x) - x,
            EntropyKind::Regularized { eta } => (x + eta) * ln(x + eta) - x - eta * ln(eta),
            EntropyKind::FermiDirac => xlogx(x) + xlogx(1.0 - x),
        }
    }

    /// Gibbs map for one eigenvalue `e` of `H`: the minimizer of `s(x) + x e` over the domain.
    pub fn occupation(&self, e: f64) -> f64 {
        match *self {
            EntropyKind::Boltzmann => exp(-e),
            EntropyKind::Regularized { eta } => (exp(-e) - eta).max(0.0),
            EntropyKind::FermiDirac => logistic(-e),
        }
    }

    /// `min_x s(x) + x e`, the spectral function whose trace gives the dual.
    pub fn conjugate(&self, e: f64) -> f64 {
        match *self {
            EntropyKind::Boltzmann => -exp(-e),
            EntropyKind::Regularized { eta } => {
                let t = exp(-e);
                if t > eta {
                    -(t - eta) - eta * (e + ln(eta))
                } else {
                    0.0
                }
            }
            EntropyKind::FermiDirac => {
                if e > -30.0 {
                    -ln1p(exp(-e))
                } else {
                    e - ln1p(exp(e))
                }
            }
        }
    }

    /// Derivative of [`Self::occupation`].
    pub fn occupation_slope(&self, e: f64) -> f64 {
        match *self {
            EntropyKind::Boltzmann => -exp(-e),
            EntropyKind::Regularized { eta } => {
                let t = exp(-e);
                if t > eta {
                    -t
                } else {
                    0.0
                }
            }
            EntropyKind::FermiDirac => {
                let x = logistic(-e);
                -x * (1.0 - x)
            }
        }
    }

    /// Divided difference `(f(a) - f(b)) / (a - b)` of the occupation `f`,
    /// the Daleckii-Krein weight of the pair `(a, b)`.
    pub fn divided_difference(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let d = hi - lo;
        if d <= 1e-10 * (1.0 + abs(lo)) {
            return 0.5 * (self.occupation_slope(lo) + self.occupation_slope(hi));
        }
        match *self {
            EntropyKind::Boltzmann => exp(-lo) * expm1(-d) / d,
            EntropyKind::Regularized { eta } => {
                let cut = -ln(eta);
                if hi < cut {
                    exp(-lo) * expm1(-d) / d
                } else {
                    (self.occupation(hi) - self.occupation(lo)) / d
                }
            }
            EntropyKind::FermiDirac => (self.occupation(hi) - self.occupation(lo)) / d,
        }
    }
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * ln(x)
    }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + exp(-t))
    } else {
        let e = exp(t);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    sym: DMatrix<C64>,
    values: Vec<f64>,
    fields: DMatrix<C64>,
    log_values: Option<Vec<f64>>,
}

impl DensityMatrix {
    /// From symmetrized coordinates. Checks hermiticity and positivity;
    /// eigenvalues inside the roundoff band are clamped to zero.
    pub fn from_symmetrized(grid: &Grid, sym: DMatrix<C64>) -> Result<Self> {
        let n = grid.n_points();
        if sym.nrows() != n || sym.ncols() != n {
            return Err(Error::Shape { expected: n, found: sym.nrows() });
        }
        if sym.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("density matrix"));
        }
        let scale = sym.iter().fold(0.0_f64, |m, z| m.max(cabs(*z)));
        let mut defect = 0.0_f64;
        for i in 0..n {
            for j in 0..=i {
                defect = defect.max(cabs(sym[(i, j)] - sym[(j, i)].conj()));
            }
        }
        if defect > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidOperator(defect / scale));
        }
        let real = sym.iter().all(|z| abs(z.im) <= 1e-15 * scale);
        let (vals, vecs) = if real {
            let mut s = DMatrix::from_fn(n, n, |i, j| sym[(i, j)].re);
            symmetrize_in_place(&mut s);
            let (v, e) = sym_eigen_ascending(s);
            (v, e.map(|x| C64::new(x, 0.0)))
        } else {
            herm_eigen_ascending(sym.clone())
        };
        let top = vals.last().copied().unwrap_or(0.0);
        if vals[0] < -PSD_TOL * top.max(1.0) {
            return Err(Error::NotPsd(vals[0]));
        }
        let s = grid.sqrt_weights();
        let mut values = Vec::with_capacity(n);
        let mut fields = DMatrix::zeros(n, n);
        for (c, p) in (0..n).rev().enumerate() {
            values.push(vals[p].max(0.0));
            for i in 0..n {
                fields[(i, c)] = vecs[(i, p)] / s[i];
            }
        }
        Ok(DensityMatrix { sym, values, fields, log_values: None })
    }

    /// From the kernel values `K_ij = rho(x_i, x_j)`.
    pub fn from_kernel(grid: &Grid, kernel: &DMatrix<C64>) -> Result<Self> {
        let s = grid.sqrt_weights();
        let n = grid.n_points();
        if kernel.nrows() != n || kernel.ncols() != n {
            return Err(Error::Shape { expected: n, found: kernel.nrows() });
        }
        let sym = DMatrix::from_fn(n, n, |i, j| kernel[(i, j)] * (s[i] * s[j]));
        Self::from_symmetrized(grid, sym)
    }

    /// `|psi><psi|`, with eigenvalue `||psi||_w^2`.
    pub fn pure(grid: &Grid, psi: &[C64]) -> Result<Self> {
        grid.check_len(psi.len())?;
        let n = psi.len();
        let k = DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj());
        Self::from_kernel(grid, &k)
    }

    pub fn pure_real(grid: &Grid, psi: &[f64]) -> Result<Self> {
        let c: Vec<C64> = psi.iter().map(|v| C64::new(*v, 0.0)).collect();
        Self::pure(grid, &c)
    }

    /// Trusted spectral data: `values` descending, `fields` a full
    /// weighted-orthonormal set of real eigenfields in the same order.
    pub(crate) fn from_real_parts(
        grid: &Grid,
        values: Vec<f64>,
        fields: &DMatrix<f64>,
        log_values: Option<Vec<f64>>,
    ) -> Self {
        let n = grid.n_points();
        let s = grid.sqrt_weights();
        let v = DMatrix::from_fn(n, n, |i, p| fields[(i, p)] * s[i]);
        let mut vr = v.clone();
        for (p, r) in values.iter().enumerate() {
            vr.column_mut(p).scale_mut(*r);
        }
        let sym_r = &vr * v.transpose();
        DensityMatrix {
            sym: sym_r.map(|x| C64::new(x, 0.0)),
            values,
            fields: fields.map(|x| C64::new(x, 0.0)),
            log_values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Eigenvalues in descending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Eigenfields as columns, ordered like [`Self::values`].
    pub fn fields(&self) -> &DMatrix<C64> {
        &self.fields
    }

    pub fn field(&self, p: usize) -> Vec<C64> {
        self.fields.column(p).iter().copied().collect()
    }

    /// `log rho_p`, exact when the state came out of a Boltzmann Gibbs map.
    pub fn log_value(&self, p: usize) -> f64 {
        match &self.log_values {
            Some(l) => l[p],
            None => ln(self.values[p]),
        }
    }

    pub fn has_exact_logs(&self) -> bool {
        self.log_values.is_some()
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn symmetrized(&self) -> &DMatrix<C64> {
        &self.sym
    }

    /// Kernel values `rho(x_i, x_j)`.
    pub fn kernel(&self, grid: &Grid) -> DMatrix<C64> {
        let s = grid.sqrt_weights();
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.sym[(i, j)] / (s[i] * s[j]))
    }

    /// Largest imaginary part relative to the largest entry.
    pub fn imaginary_part(&self) -> f64 {
        let scale = self.sym.iter().fold(f64::MIN_POSITIVE, |m, z| m.max(cabs(*z)));
        self.sym.iter().fold(0.0_f64, |m, z| m.max(abs(z.im))) / scale
    }

    /// `max |R rho R - rho|` for the reflection `x -> 1 - x`.
    pub fn reflection_defect(&self) -> f64 {
        let n = self.dim();
        let mut d = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                d = d.max(cabs(self.sym[(n - 1 - i, n - 1 - j)] - self.sym[(i, j)]));
            }
        }
        d
    }

    /// Conjugation by the diagonal unitary `diag(e^{i theta})`; spectrum untouched.
    pub(crate) fn conjugate_diagonal(&self, theta: &[f64]) -> Self {
        let n = self.dim();
        let u: Vec<C64> = theta.iter().map(|t| cis(*t)).collect();
        let sym = DMatrix::from_fn(n, n, |i, j| u[i] * self.sym[(i, j)] * u[j].conj());
        let fields = DMatrix::from_fn(n, n, |i, p| u[i] * self.fields[(i, p)]);
        DensityMatrix { sym, values: self.values.clone(), fields, log_values: self.log_values.clone() }
    }
}

/// Hermitian eigendecomposition sorted ascending.
pub(crate) fn herm_eigen_ascending(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&p| eig.eigenvalues[p]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
    (vals, vecs)
}

/// Eigenvalues (descending) and eigenfields of a density matrix.
pub fn spectral(rho: &DensityMatrix) -> (&[f64], &DMatrix<C64>) {
    (rho.values(), rho.fields())
}

/// `Tr s(rho)` for the chosen entropy density.
pub fn entropy(rho: &DensityMatrix, kind: EntropyKind) -> Result<f64> {
    kind.validate()?;
    let mut total = 0.0;
    for (p, &x) in rho.values().iter().enumerate() {
        if x < 0.0 {
            return Err(Error::NotPsd(x));
        }
        total += match kind {
            EntropyKind::Boltzmann if x > 0.0 => x * rho.log_value(p) - x,
            EntropyKind::FermiDirac if x > 1.0 + PSD_TOL => return Err(Error::OutOfRange(x)),
            EntropyKind::FermiDirac => kind.density(x.min(1.0)),
            _ => kind.density(x),
        };
    }
    Ok(total)
}

/// Edge-resolved parts of the moments. `kappa_e = sum_p rho_p |(G phi_p)_e|^2`,
/// `current_e = Im sum_p rho_p conj(phi_p(x_e)) phi_p(x_{e+1}) / h`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMoments {
    pub kappa: Vec<f64>,
    pub current: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub n: Vec<f64>,
    pub j: Vec<f64>,
    pub k: Vec<f64>,
    pub u: Vec<f64>,
    /// Present when the moments were computed from an operator.
    pub edges: Option<EdgeMoments>,
}

impl Moments {
    /// Node data only; `u = j/n` above [`N_FLOOR`], else 0.
    pub fn from_nodes(n: Vec<f64>, j: Vec<f64>, k: Vec<f64>) -> Self {
        let u = velocity(&n, &j);
        Moments { n, j, k, u, edges: None }
    }
}

fn velocity(n: &[f64], j: &[f64]) -> Vec<f64> {
    n.iter().zip(j).map(|(n, j)| if *n > N_FLOOR { j / n } else { 0.0 }).collect()
}

/// Density, current, kinetic-energy density and velocity of `rho`.
///
/// `n_i = sum_p rho_p |phi_p(x_i)|^2`. The kinetic density is the node average
/// of `kappa`; the current is the node average of the edge current, which
/// equals `Im sum_p rho_p conj(phi_p) (D phi_p)` at every node.
pub fn moments(rho: &DensityMatrix, grid: &Grid) -> Moments {
    let n_pts = grid.n_points();
    let h = grid.spacing();
    let mut n = vec![0.0; n_pts];
    let mut kappa = vec![0.0; n_pts - 1];
    let mut current = vec![0.0; n_pts - 1];
    let f = rho.fields();
    for (p, &r) in rho.values().iter().enumerate() {
        if r <= 0.0 {
            continue;
        }
        for i in 0..n_pts {
            n[i] += r * f[(i, p)].norm_sqr();
        }
        for e in 0..n_pts - 1 {
            let a = f[(e, p)];
            let b = f[(e + 1, p)];
            kappa[e] += r * ((b - a) / h).norm_sqr();
            current[e] += r * (a.conj() * b).im / h;
        }
    }
    let k = grid.edge_to_node(&kappa);
    let j = grid.edge_to_node(&current);
    let u = velocity(&n, &j);
    Moments { n, j, k, u, edges: Some(EdgeMoments { kappa, current }) }
}

/// Energy density `w = (1/2)(k - (1/4) Laplacian n)` with `Laplacian = -2 H0`.
pub fn energy_w(grid: &Grid, m: &Moments) -> Vec<f64> {
    let ones = vec![1.0; grid.n_edges()];
    let minus_lap = grid.apply_kinetic(&ones, &m.n);
    m.k.iter().zip(&minus_lap).map(|(k, l)| 0.5 * (k + 0.25 * l)).collect()
}

/// `Tr rho + Tr(sqrt(H0) rho sqrt(H0)) = Tr rho + (1/2) integrate(k)` for PSD `rho`.
pub fn energy_norm(rho: &DensityMatrix, grid: &Grid) -> f64 {
    let m = moments(rho, grid);
    rho.trace() + 0.5 * grid.integrate(&m.k).unwrap_or(0.0)
}

/// Compatibility gap `k - n u^2 - |grad sqrt n|^2` and its minimum.
///
/// With edge data the three terms are assembled per cell,
/// `kappa_e - current_e^2 / sqrt(n_e n_{e+1}) - ((G sqrt n)_e)^2`, and averaged
/// to nodes; each cell term is non-negative for any PSD operator. Without edge
/// data the node formula is used.
pub fn compatibility_gap(grid: &Grid, m: &Moments) -> Result<(Vec<f64>, f64)> {
    grid.check_len(m.n.len())?;
    if let Some((i, v)) = m.n.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::InvalidDensity { node: i, value: *v });
    }
    let grad2 = grid.grad_sqrt_sq(&m.n);
    let gap: Vec<f64> = match &m.edges {
        Some(e) => {
            let s: Vec<f64> = m.n.iter().map(|v| sqrt(*v)).collect();
            let cell: Vec<f64> = (0..grid.n_edges())
                .map(|c| {
                    let g = (s[c + 1] - s[c]) / grid.spacing();
                    e.kappa[c] - e.current[c] * e.current[c] / (s[c] * s[c + 1]) - g * g
                })
                .collect();
            grid.edge_to_node(&cell)
        }
        None => (0..m.n.len()).map(|i| m.k[i] - m.n[i] * m.u[i] * m.u[i] - grad2[i]).collect(),
    };
    let min = crate::num::min(&gap);
    Ok((gap, min))
}

/// Gibbs map of a weighted-hermitian `H`: `e^{-H}`, `(e^{-H} - eta)_+` or
/// `(1 + e^{H})^{-1}` by spectral calculus.
pub fn gibbs(grid: &Grid, h: &OperatorMatrix, kind: EntropyKind) -> Result<DensityMatrix> {
    kind.validate()?;
    let (energies, fields) = h.eigen(grid)?;
    Ok(gibbs_from_spectrum(grid, &energies, &fields, kind))
}

/// Gibbs state from ascending energies and real eigenfields.
pub(crate) fn gibbs_from_spectrum(
    grid: &Grid,
    energies: &[f64],
    fields: &DMatrix<f64>,
    kind: EntropyKind,
) -> DensityMatrix {
    let values: Vec<f64> = energies.iter().map(|e| kind.occupation(*e)).collect();
    let logs = match kind {
        EntropyKind::Boltzmann => Some(energies.iter().map(|e| -e).collect()),
        _ => None,
    };
    // occupations decrease with energy, so ascending energies give descending values
    DensityMatrix::from_real_parts(grid, values, fields, logs)
}

/// `n[rho log(rho + eta)] = sum_p rho_p log(rho_p + eta) |phi_p|^2`; for `eta = 0`
/// empty modes contribute nothing.
pub fn n_rho_log_rho(rho: &DensityMatrix, eta: f64, grid: &Grid) -> Vec<f64> {
    let n_pts = grid.n_points();
    let mut out = vec![0.0; n_pts];
    let f = rho.fields();
    for (p, &r) in rho.values().iter().enumerate() {
        if r <= 0.0 {
            continue;
        }
        let l = if eta == 0.0 { rho.log_value(p) } else { ln(r + eta) };
        let c = r * l;
        if c == 0.0 {
            continue;
        }
        for i in 0..n_pts {
            out[i] += c * f[(i, p)].norm_sqr();
        }
    }
    out
}

/// Trace norm `||a - b||_1`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let d = a.symmetrized() - b.symmetrized();
    let n = d.nrows();
    let scale = d.iter().fold(0.0_f64, |m, z| m.max(cabs(*z)));
    if scale == 0.0 {
        return 0.0;
    }
    if d.iter().all(|z| abs(z.im) <= 1e-15 * scale) {
        let mut s = DMatrix::from_fn(n, n, |i, j| d[(i, j)].re);
        symmetrize_in_place(&mut s);
        SymmetricEigen::new(s).eigenvalues.iter().map(|v| abs(*v)).sum()
    } else {
        SymmetricEigen::new(d).eigenvalues.iter().map(|v| abs(*v)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{laplacian_h0, make_grid, OperatorMatrix, Symmetry};
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        make_grid(n).unwrap()
    }

    #[test]
    fn spectral_of_scaled_identity() {
        let g = grid(9);
        let sym = DMatrix::<C64>::identity(9, 9) * C64::new(1.0 / 9.0, 0.0);
        let r = DensityMatrix::from_symmetrized(&g, sym).unwrap();
        assert!(r.values().iter().all(|v| (v - 1.0 / 9.0).abs() < 1e-14));
    }

    #[test]
    fn projector_spectrum() {
        let g = grid(17);
        let v = g.sample(|x| 1.0 + x);
        let nv = g.norm(&v);
        let v: Vec<f64> = v.iter().map(|a| a / nv).collect();
        let r = DensityMatrix::pure_real(&g, &v).unwrap();
        assert_abs_diff_eq!(r.values()[0], 1.0, epsilon = 1e-13);
        assert!(r.values()[1..].iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn entropy_examples() {
        let g = grid(3);
        let e0 = DensityMatrix::pure_real(&g, &[1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(entropy(&e0, EntropyKind::Boltzmann).unwrap(), -1.0, epsilon = 1e-12);
        let z = DensityMatrix::pure_real(&g, &[0.0; 3]).unwrap();
        assert_eq!(entropy(&z, EntropyKind::Regularized { eta: 0.3 }).unwrap(), 0.0);
        let half: Vec<f64> = vec![sqrt(0.5); 3];
        let h = DensityMatrix::pure_real(&g, &half).unwrap();
        assert_abs_diff_eq!(entropy(&h, EntropyKind::FermiDirac).unwrap(), ln(0.5), epsilon = 1e-12);
        let big = DensityMatrix::pure_real(&g, &[2.0; 3]).unwrap();
        assert!(matches!(entropy(&big, EntropyKind::FermiDirac), Err(Error::OutOfRange(_))));
        assert!(matches!(
            entropy(&h, EntropyKind::Regularized { eta: 0.0 }),
            Err(Error::InvalidEta(_))
        ));
    }

    #[test]
    fn moments_of_constant_state() {
        let g = grid(33);
        let r = DensityMatrix::pure_real(&g, &vec![1.0; 33]).unwrap();
        let m = moments(&r, &g);
        assert!(m.n.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(m.j.iter().all(|v| v.abs() < 1e-14));
        assert!(m.k.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn moments_of_cosine_mode() {
        let g = grid(257);
        let phi = g.sample(|x| 2f64.sqrt() * (PI * x).cos());
        let r = DensityMatrix::pure_real(&g, &phi).unwrap();
        let m = moments(&r, &g);
        let h2 = g.spacing() * g.spacing();
        for (i, &x) in g.nodes().iter().enumerate() {
            assert!((m.n[i] - 2.0 * (PI * x).cos().powi(2)).abs() < 10.0 * h2);
            assert!((m.k[i] - 2.0 * PI * PI * (PI * x).sin().powi(2)).abs() < 100.0 * h2);
            assert!(m.j[i].abs() < 1e-14);
        }
    }

    #[test]
    fn energy_w_examples() {
        let g = grid(65);
        let m = Moments::from_nodes(vec![1.0; 65], vec![0.0; 65], vec![3.0; 65]);
        assert!(energy_w(&g, &m).iter().all(|w| (w - 1.5).abs() < 1e-12));
        let phi = g.sample(|x| 2f64.sqrt() * (PI * x).cos());
        let r = DensityMatrix::pure_real(&g, &phi).unwrap();
        let m = moments(&r, &g);
        let w = energy_w(&g, &m);
        assert_abs_diff_eq!(g.integrate(&w).unwrap(), 0.5 * g.integrate(&m.k).unwrap(), epsilon = 1e-11);
        // w = pi^2 sin^2 + (pi^2/2) cos(2 pi x) = pi^2/2 analytically
        let h = g.spacing();
        for (i, wi) in w.iter().enumerate().take(64).skip(1) {
            assert!((wi - PI * PI / 2.0).abs() < 200.0 * h * h, "{i} {wi}");
        }
    }

    #[test]
    fn energy_norm_examples() {
        let g = grid(129);
        let r = DensityMatrix::pure_real(&g, &vec![1.0; 129]).unwrap();
        assert_abs_diff_eq!(energy_norm(&r, &g), 1.0, epsilon = 1e-10);
        let phi = g.sample(|x| 2f64.sqrt() * (PI * x).cos());
        let r = DensityMatrix::pure_real(&g, &phi).unwrap();
        assert!((energy_norm(&r, &g) - (1.0 + PI * PI / 2.0)).abs() < 1e-3);
        let z = DensityMatrix::pure_real(&g, &vec![0.0; 129]).unwrap();
        assert_eq!(energy_norm(&z, &g), 0.0);
    }

    #[test]
    fn compatibility_examples() {
        let g = grid(65);
        let m = Moments::from_nodes(vec![1.0; 65], vec![0.0; 65], vec![1.0; 65]);
        let (gap, min) = compatibility_gap(&g, &m).unwrap();
        assert!(gap.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert_eq!(min, 1.0);
        let sq = g.sample(|x| sqrt(1.0 + 0.5 * (PI * x).cos()));
        let r = DensityMatrix::pure_real(&g, &sq).unwrap();
        let (gap, _) = compatibility_gap(&g, &moments(&r, &g)).unwrap();
        assert!(gap.iter().all(|v| v.abs() < 1e-10));
        let bad = Moments::from_nodes(vec![0.0; 65], vec![0.0; 65], vec![1.0; 65]);
        assert!(matches!(compatibility_gap(&g, &bad), Err(Error::InvalidDensity { .. })));
    }

    #[test]
    fn gibbs_examples() {
        let g = grid(3);
        let zero = OperatorMatrix::new(DMatrix::zeros(3, 3), Symmetry::WeightedHermitian);
        let r = gibbs(&g, &zero, EntropyKind::Boltzmann).unwrap();
        assert!(r.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
        let fd = gibbs(&g, &zero, EntropyKind::FermiDirac).unwrap();
        assert!(fd.values().iter().all(|v| (v - 0.5).abs() < 1e-15));
        let h = OperatorMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 2f64.ln(), 2f64.ln()])), Symmetry::WeightedHermitian);
        let r = gibbs(&g, &h, EntropyKind::Boltzmann).unwrap();
        assert_abs_diff_eq!(r.values()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.values()[2], 0.5, epsilon = 1e-15);
        let reg = gibbs(&g, &h, EntropyKind::Regularized { eta: 0.6 }).unwrap();
        assert_abs_diff_eq!(reg.values()[0], 0.4, epsilon = 1e-15);
        assert_eq!(reg.values()[2], 0.0);
    }

    #[test]
    fn n_rho_log_rho_examples() {
        let g = grid(9);
        let one = DensityMatrix::pure_real(&g, &[1.0; 9]).unwrap();
        assert!(n_rho_log_rho(&one, 0.0, &g).iter().all(|v| v.abs() < 1e-14));
        let c = (-0.5f64).exp();
        let r = DensityMatrix::pure_real(&g, &[c; 9]).unwrap();
        let f = n_rho_log_rho(&r, 0.0, &g);
        assert!(f.iter().all(|v| (v + (-1.0f64).exp()).abs() < 1e-14));
    }

    #[test]
    fn h0_form_matches_kinetic_density() {
        let g = grid(21);
        let h0 = laplacian_h0(&g);
        let phi = g.sample(|x| (3.0 * x).sin() + x * x);
        let r = DensityMatrix::pure_real(&g, &phi).unwrap();
        let k = moments(&r, &g).k;
        let lhs = g.inner(&phi, &h0.apply(&phi));
        assert_abs_diff_eq!(lhs, 0.5 * g.integrate(&k).unwrap(), epsilon = 1e-11);
    }

    #[test]
    fn divided_differences_are_consistent() {
        for kind in [EntropyKind::Boltzmann, EntropyKind::Regularized { eta: 0.01 }, EntropyKind::FermiDirac] {
            for &(a, b) in &[(0.1, 0.3), (2.0, 2.0 + 1e-12), (-1.0, 7.0), (3.0, 5.0)] {
                let dd = kind.divided_difference(a, b);
                let direct = if (a - b).abs() > 1e-8 {
                    (kind.occupation(a) - kind.occupation(b)) / (a - b)
                } else {
                    kind.occupation_slope(a)
                };
                assert!((dd - direct).abs() < 1e-9 * (1.0 + direct.abs()), "{kind:?} {a} {b}");
            }
        }
    }
}
