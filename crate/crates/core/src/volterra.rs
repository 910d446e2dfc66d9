//! Second-kind Volterra equations `phi = L_N phi + psi` and their adjoints,
//! discretized with the product trapezoid rule.
//!
//! `(L_N phi)(x) = int_0^x N(x,y) phi(y) dy` and
//! `(L*_N phi)(x) = int_x^1 N(y,x) phi(y) dy`. Both integrals use the
//! trapezoid rule on the nodes they cover, so the discrete systems are
//! triangular and solved by substitution.
//!
//! The two rules are adjoint in `<.,.>_w` except at the corners: the forward
//! rule gives the node `x = 0` no weight over `[0, 0]`, the adjoint rule gives
//! `x = 1` no weight over `[1, 1]`. [`duality_defect`] is the exact difference.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::grid::Grid;
use crate::num::{abs, exp, sqrt};
use crate::{Error, Result};

/// Smallest admissible `|1 - (h/2) N(x_i, x_i)|`.
pub const DIAGONAL_FLOOR: f64 = 1e-8;

/// Sampled kernel `values[(i, j)] = N(x_i, x_j)` and its bound `kappa = max |N|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    values: DMatrix<f64>,
    kappa: f64,
}

impl Kernel {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::Shape { expected: values.nrows(), found: values.ncols() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel"));
        }
        let kappa = values.iter().fold(0.0_f64, |m, v| m.max(abs(*v)));
        Ok(Kernel { values, kappa })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let x = grid.nodes();
        let n = x.len();
        let values = DMatrix::from_fn(n, n, |i, j| f(x[i], x[j]));
        Kernel::new(values).expect("kernel function produced a non-finite value")
    }

    pub fn zeros(n: usize) -> Self {
        Kernel { values: DMatrix::zeros(n, n), kappa: 0.0 }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    fn check(&self, grid: &Grid, len: usize) -> Result<()> {
        grid.check_len(self.dim())?;
        grid.check_len(len)
    }
}

/// Trapezoid weight of node `j` in a rule over the nodes `lo..=hi`.
#[inline]
fn trap(j: usize, lo: usize, hi: usize, h: f64) -> f64 {
    if lo == hi {
        0.0
    } else if j == lo || j == hi {
        0.5 * h
    } else {
        h
    }
}

/// `(L_N phi)(x_i)`, trapezoid over `[0, x_i]`.
pub fn apply_forward(k: &Kernel, phi: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    k.check(grid, phi.len())?;
    let h = grid.spacing();
    let n = phi.len();
    let v = &k.values;
    Ok((0..n).map(|i| (0..=i).map(|j| trap(j, 0, i, h) * v[(i, j)] * phi[j]).sum()).collect())
}

/// `(L*_N phi)(x_i)`, trapezoid over `[x_i, 1]` with transposed indexing.
pub fn apply_adjoint(k: &Kernel, phi: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    k.check(grid, phi.len())?;
    let h = grid.spacing();
    let n = phi.len();
    let v = &k.values;
    Ok((0..n).map(|i| (i..n).map(|j| trap(j, i, n - 1, h) * v[(j, i)] * phi[j]).sum()).collect())
}

fn diagonal_factor(k: &Kernel, i: usize, h: f64) -> Result<f64> {
    let f = 1.0 - 0.5 * h * k.values[(i, i)];
    if !(abs(f) >= DIAGONAL_FLOOR) {
        return Err(Error::DegenerateKernel { node: i, factor: f });
    }
    Ok(f)
}

/// Solves `phi = L_N phi + psi` by forward substitution.
pub fn solve_forward(k: &Kernel, psi: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    k.check(grid, psi.len())?;
    let h = grid.spacing();
    let n = psi.len();
    let v = &k.values;
    let mut phi = vec![0.0; n];
    phi[0] = psi[0];
    for i in 1..n {
        let mut acc = psi[i];
        for j in 0..i {
            acc += trap(j, 0, i, h) * v[(i, j)] * phi[j];
        }
        phi[i] = acc / diagonal_factor(k, i, h)?;
    }
    Ok(phi)
}

/// Solves `phi = L*_N phi + psi` by backward substitution.
pub fn solve_adjoint(k: &Kernel, psi: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    k.check(grid, psi.len())?;
    let h = grid.spacing();
    let n = psi.len();
    let v = &k.values;
    let mut phi = vec![0.0; n];
    phi[n - 1] = psi[n - 1];
    for i in (0..n - 1).rev() {
        let mut acc = psi[i];
        for j in i + 1..n {
            acc += trap(j, i, n - 1, h) * v[(j, i)] * phi[j];
        }
        phi[i] = acc / diagonal_factor(k, i, h)?;
    }
    Ok(phi)
}

/// `<L_N phi, psi>_w - <phi, L*_N psi>_w` in closed form:
/// `(h/2) (w_last N(1,1) phi(1) psi(1) - w_0 N(0,0) phi(0) psi(0))`.
pub fn duality_defect(k: &Kernel, phi: &[f64], psi: &[f64], grid: &Grid) -> f64 {
    let n = phi.len();
    let h = grid.spacing();
    let w = grid.weights();
    let v = &k.values;
    0.5 * h * (w[n - 1] * v[(n - 1, n - 1)] * phi[n - 1] * psi[n - 1] - w[0] * v[(0, 0)] * phi[0] * psi[0])
}

/// Norm bound `e^{(kappa+1)^2} (kappa+1)` relating solution and data in `L^2`.
pub fn volterra_bound(kappa: f64) -> f64 {
    let a = kappa + 1.0;
    exp(a * a) * a
}

/// Fixed-point iterates `phi <- L_N phi + psi` starting from `psi`.
pub fn picard_forward(k: &Kernel, psi: &[f64], grid: &Grid, iterations: usize) -> Result<Vec<f64>> {
    let mut phi = psi.to_vec();
    for _ in 0..iterations {
        let l = apply_forward(k, &phi, grid)?;
        phi = l.iter().zip(psi).map(|(a, b)| a + b).collect();
    }
    Ok(phi)
}

/// Fixed-point iterates `phi <- L*_N phi + psi` starting from `psi`.
pub fn picard_adjoint(k: &Kernel, psi: &[f64], grid: &Grid, iterations: usize) -> Result<Vec<f64>> {
    let mut phi = psi.to_vec();
    for _ in 0..iterations {
        let l = apply_adjoint(k, &phi, grid)?;
        phi = l.iter().zip(psi).map(|(a, b)| a + b).collect();
    }
    Ok(phi)
}

/// `||f e^{-alpha x}||_w`, the norm in which `L_N` contracts for `alpha = (kappa+1)^2`.
pub fn exp_weighted_norm(f: &[f64], alpha: f64, grid: &Grid) -> f64 {
    let g: Vec<f64> = f.iter().zip(grid.nodes()).map(|(v, x)| v * exp(-alpha * x)).collect();
    sqrt(grid.inner(&g, &g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::num::sup_norm;

    #[test]
    fn zero_kernel() {
        let g = make_grid(21).unwrap();
        let k = Kernel::zeros(21);
        let psi = g.sample(|x| x.sin());
        assert!(apply_forward(&k, &psi, &g).unwrap().iter().all(|v| *v == 0.0));
        assert!(apply_adjoint(&k, &psi, &g).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(solve_forward(&k, &psi, &g).unwrap(), psi);
        assert_eq!(solve_adjoint(&k, &psi, &g).unwrap(), psi);
    }

    #[test]
    fn unit_kernel_integrals() {
        let g = make_grid(51).unwrap();
        let k = Kernel::from_fn(&g, |_, _| 1.0);
        let one = vec![1.0; 51];
        let f = apply_forward(&k, &one, &g).unwrap();
        let a = apply_adjoint(&k, &one, &g).unwrap();
        for (i, x) in g.nodes().iter().enumerate() {
            assert!((f[i] - x).abs() < 1e-14);
            assert!((a[i] - (1.0 - x)).abs() < 1e-14);
        }
        let q = apply_forward(&k, g.nodes(), &g).unwrap();
        let h = g.spacing();
        for (i, x) in g.nodes().iter().enumerate() {
            assert!((q[i] - x * x / 2.0).abs() <= h * h);
        }
    }

    #[test]
    fn exponential_benchmarks() {
        let g = make_grid(1001).unwrap();
        let k = Kernel::from_fn(&g, |_, _| 1.0);
        let one = vec![1.0; 1001];
        let f = solve_forward(&k, &one, &g).unwrap();
        let b = solve_adjoint(&k, &one, &g).unwrap();
        let ef: Vec<f64> = g.nodes().iter().zip(&f).map(|(x, v)| v - x.exp()).collect();
        let eb: Vec<f64> = g.nodes().iter().zip(&b).map(|(x, v)| v - (1.0 - x).exp()).collect();
        assert!(sup_norm(&ef) <= 5e-6);
        assert!(sup_norm(&eb) <= 5e-6);
    }

    #[test]
    fn degenerate_diagonal_is_reported() {
        let g = make_grid(3).unwrap();
        // 1 - (h/2) * 4 = 0 at h = 0.5
        let k = Kernel::from_fn(&g, |_, _| 4.0);
        assert!(matches!(solve_forward(&k, &[1.0; 3], &g), Err(Error::DegenerateKernel { node: 1, .. })));
    }

    #[test]
    fn shape_mismatch() {
        let g = make_grid(5).unwrap();
        let k = Kernel::zeros(4);
        assert!(matches!(apply_forward(&k, &[0.0; 4], &g), Err(Error::Shape { .. })));
    }
}
