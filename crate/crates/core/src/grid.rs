//! Uniform node-centred mesh on `[0,1]` with trapezoid weights.
//!
//! Two difference operators live here. The edge difference `G` maps node
//! values to the `n_points - 1` cell midpoints, `(Gf)_e = (f_{e+1} - f_e)/h`.
//! The node gradient `D` is the edge-to-node average of `G`: central
//! differences inside, one-sided first differences at the two endpoints.
//!
//! Kinetic quantities are built on edges and averaged to nodes with the same
//! weights as `D`, so the free Hamiltonian `H0 = (1/2) W^{-1} G^T h G` is the
//! classical Neumann three-point operator and satisfies
//! `<phi, H0 phi>_w = (1/2) integrate(kinetic density of phi)` exactly.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::num::{abs, sqrt};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    sqrt_weights: Vec<f64>,
    h: f64,
}

/// Builds the uniform mesh with `n_points` nodes including both endpoints.
pub fn make_grid(n_points: usize) -> Result<Grid> {
    Grid::new(n_points)
}

/// Trapezoid quadrature `sum_i w_i f_i`.
pub fn integrate(grid: &Grid, f: &[f64]) -> Result<f64> {
    grid.integrate(f)
}

impl Grid {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::InvalidGrid(n_points));
        }
        let h = 1.0 / (n_points - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_points).map(|i| i as f64 * h).collect();
        nodes[n_points - 1] = 1.0;
        let mut weights = vec![h; n_points];
        weights[0] = 0.5 * h;
        weights[n_points - 1] = 0.5 * h;
        let sqrt_weights = weights.iter().map(|w| sqrt(*w)).collect();
        Ok(Grid { nodes, weights, sqrt_weights, h })
    }

    pub fn n_points(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sqrt_weights(&self) -> &[f64] {
        &self.sqrt_weights
    }

    /// Midpoints of the cells, where edge quantities live.
    pub fn edge_midpoints(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_points() {
            return Err(Error::Shape { expected: self.n_points(), found: len });
        }
        Ok(())
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        Ok(self.weights.iter().zip(f).map(|(w, v)| w * v).sum())
    }

    pub fn integrate_c(&self, f: &[C64]) -> Result<C64> {
        self.check_len(f.len())?;
        Ok(self.weights.iter().zip(f).map(|(w, v)| v * *w).sum())
    }

    /// Weighted inner product of real fields. Panics on length mismatch.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        assert_eq!(f.len(), self.n_points());
        assert_eq!(g.len(), self.n_points());
        self.weights.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| w * a * b).sum()
    }

    /// `<f, g>_w = sum_i w_i conj(f_i) g_i`. Panics on length mismatch.
    pub fn inner_c(&self, f: &[C64], g: &[C64]) -> C64 {
        assert_eq!(f.len(), self.n_points());
        assert_eq!(g.len(), self.n_points());
        self.weights.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| a.conj() * b * *w).sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        sqrt(self.inner(f, f))
    }

    pub fn norm_c(&self, f: &[C64]) -> f64 {
        sqrt(self.inner_c(f, f).re.max(0.0))
    }

    /// `(Gf)_e = (f_{e+1} - f_e)/h`, one value per cell.
    pub fn edge_diff(&self, f: &[f64]) -> Vec<f64> {
        debug_assert_eq!(f.len(), self.n_points());
        f.windows(2).map(|p| (p[1] - p[0]) / self.h).collect()
    }

    pub fn edge_diff_c(&self, f: &[C64]) -> Vec<C64> {
        debug_assert_eq!(f.len(), self.n_points());
        f.windows(2).map(|p| (p[1] - p[0]) / self.h).collect()
    }

    /// Average of node values onto cells.
    pub fn edge_mean(&self, f: &[f64]) -> Vec<f64> {
        f.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    }

    /// Edge-to-node averaging `A`: `(Ae)_i = sum_{e touching i} (h/2) e_e / w_i`.
    /// Interior nodes get the mean of their two cells, endpoints their single cell.
    pub fn edge_to_node(&self, e: &[f64]) -> Vec<f64> {
        let n = self.n_points();
        debug_assert_eq!(e.len(), n - 1);
        let mut out = vec![0.0; n];
        out[0] = e[0];
        out[n - 1] = e[n - 2];
        for i in 1..n - 1 {
            out[i] = 0.5 * (e[i - 1] + e[i]);
        }
        out
    }

    pub fn edge_to_node_c(&self, e: &[C64]) -> Vec<C64> {
        let n = self.n_points();
        debug_assert_eq!(e.len(), n - 1);
        let mut out = vec![C64::new(0.0, 0.0); n];
        out[0] = e[0];
        out[n - 1] = e[n - 2];
        for i in 1..n - 1 {
            out[i] = (e[i - 1] + e[i]) * 0.5;
        }
        out
    }

    /// Node gradient `D = A G`.
    pub fn gradient(&self, f: &[f64]) -> Vec<f64> {
        self.edge_to_node(&self.edge_diff(f))
    }

    pub fn gradient_c(&self, f: &[C64]) -> Vec<C64> {
        self.edge_to_node_c(&self.edge_diff_c(f))
    }

    /// Discrete `|grad sqrt n|^2`: node average of the squared edge differences
    /// of `sqrt n`. It is the kinetic density of the rank-one state `|sqrt n><sqrt n|`.
    pub fn grad_sqrt_sq(&self, n: &[f64]) -> Vec<f64> {
        let s: Vec<f64> = n.iter().map(|v| sqrt(v.max(0.0))).collect();
        let e: Vec<f64> = self.edge_diff(&s).iter().map(|g| g * g).collect();
        self.edge_to_node(&e)
    }

    /// `Phi_i = int_0^{x_i} f` by the trapezoid rule.
    pub fn cumulative(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for i in 1..f.len() {
            out[i] = out[i - 1] + 0.5 * self.h * (f[i - 1] + f[i]);
        }
        out
    }

    /// `int_{x_i}^1 f` by the trapezoid rule.
    pub fn tail(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let mut out = vec![0.0; n];
        for i in (0..n.saturating_sub(1)).rev() {
            out[i] = out[i + 1] + 0.5 * self.h * (f[i] + f[i + 1]);
        }
        out
    }

    pub fn tail_c(&self, f: &[C64]) -> Vec<C64> {
        let n = f.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for i in (0..n.saturating_sub(1)).rev() {
            out[i] = out[i + 1] + (f[i] + f[i + 1]) * (0.5 * self.h);
        }
        out
    }

    /// Applies `W^{-1} G^T diag(h mu) G`, the operator of the form
    /// `sum_e h mu_e |(Gf)_e|^2`.
    pub fn apply_kinetic(&self, mu_edge: &[f64], f: &[f64]) -> Vec<f64> {
        let n = self.n_points();
        let flux: Vec<f64> =
            self.edge_diff(f).iter().zip(mu_edge).map(|(g, m)| self.h * m * g).collect();
        let mut out = vec![0.0; n];
        for e in 0..n - 1 {
            out[e] -= flux[e] / self.h;
            out[e + 1] += flux[e] / self.h;
        }
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o /= w;
        }
        out
    }
}

/// Whether an operator is self-adjoint in `<.,.>_w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    WeightedHermitian,
    General,
}

/// Dense real operator acting on node fields. All operators in this crate are
/// real; complex density matrices live in [`crate::operator::DensityMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<f64>,
    symmetry: Symmetry,
}

impl OperatorMatrix {
    pub fn new(entries: DMatrix<f64>, symmetry: Symmetry) -> Self {
        OperatorMatrix { entries, symmetry }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.entries.nrows();
        let mut out = vec![0.0; n];
        for (j, &fj) in f.iter().enumerate().take(self.entries.ncols()) {
            if fj == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.entries[(i, j)] * fj;
            }
        }
        out
    }

    pub fn apply_c(&self, f: &[C64]) -> Vec<C64> {
        let n = self.entries.nrows();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (j, &fj) in f.iter().enumerate().take(self.entries.ncols()) {
            for (i, o) in out.iter_mut().enumerate() {
                *o += fj * self.entries[(i, j)];
            }
        }
        out
    }

    /// `W^{1/2} M W^{-1/2}`; symmetric when `M` is weighted-hermitian.
    pub fn symmetrized(&self, grid: &Grid) -> DMatrix<f64> {
        let s = grid.sqrt_weights();
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| s[i] * self.entries[(i, j)] / s[j])
    }

    pub fn from_symmetrized(grid: &Grid, sym: &DMatrix<f64>, symmetry: Symmetry) -> Self {
        let s = grid.sqrt_weights();
        let n = sym.nrows();
        let entries = DMatrix::from_fn(n, n, |i, j| sym[(i, j)] * s[j] / s[i]);
        OperatorMatrix { entries, symmetry }
    }

    /// `max |S - S^T| / max(1, max |S|)` in symmetrized coordinates.
    pub fn hermitian_defect(&self, grid: &Grid) -> f64 {
        let s = self.symmetrized(grid);
        let scale = s.iter().fold(1.0_f64, |m, v| m.max(abs(*v)));
        let mut d = 0.0_f64;
        for i in 0..s.nrows() {
            for j in 0..i {
                d = d.max(abs(s[(i, j)] - s[(j, i)]));
            }
        }
        d / scale
    }

    /// Ascending eigenvalues and weighted-orthonormal eigenfields (columns).
    pub fn eigen(&self, grid: &Grid) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let defect = self.hermitian_defect(grid);
        if defect > 1e-12 {
            return Err(Error::InvalidOperator(defect));
        }
        let mut s = self.symmetrized(grid);
        symmetrize_in_place(&mut s);
        let (vals, vecs) = sym_eigen_ascending(s);
        Ok((vals, unweight_columns(grid, vecs)))
    }
}

pub(crate) fn symmetrize_in_place(s: &mut DMatrix<f64>) {
    let n = s.nrows();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = m;
            s[(j, i)] = m;
        }
    }
}

/// Real symmetric eigendecomposition sorted ascending.
pub(crate) fn sym_eigen_ascending(s: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = s.nrows();
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&p| eig.eigenvalues[p]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
    (vals, vecs)
}

/// Maps orthonormal columns `v` of a symmetrized matrix to fields `W^{-1/2} v`.
pub(crate) fn unweight_columns(grid: &Grid, mut v: DMatrix<f64>) -> DMatrix<f64> {
    let s = grid.sqrt_weights();
    for j in 0..v.ncols() {
        for i in 0..v.nrows() {
            v[(i, j)] /= s[i];
        }
    }
    v
}

/// Dense node gradient `D = A G` (tag general).
pub fn gradient_op(grid: &Grid) -> OperatorMatrix {
    let n = grid.n_points();
    let h = grid.spacing();
    let mut d = DMatrix::zeros(n, n);
    d[(0, 0)] = -1.0 / h;
    d[(0, 1)] = 1.0 / h;
    d[(n - 1, n - 2)] = -1.0 / h;
    d[(n - 1, n - 1)] = 1.0 / h;
    for i in 1..n - 1 {
        d[(i, i - 1)] = -0.5 / h;
        d[(i, i + 1)] = 0.5 / h;
    }
    OperatorMatrix::new(d, Symmetry::General)
}

/// Dense edge difference `G`, shape `(n_points - 1) x n_points`.
pub fn edge_gradient_op(grid: &Grid) -> DMatrix<f64> {
    let n = grid.n_points();
    let h = grid.spacing();
    let mut g = DMatrix::zeros(n - 1, n);
    for e in 0..n - 1 {
        g[(e, e)] = -1.0 / h;
        g[(e, e + 1)] = 1.0 / h;
    }
    g
}

/// `W^{-1} G^T diag(h mu) G` as a dense weighted-hermitian operator.
pub fn kinetic_op(grid: &Grid, mu_edge: &[f64]) -> OperatorMatrix {
    let n = grid.n_points();
    let h = grid.spacing();
    let w = grid.weights();
    let mut m = DMatrix::zeros(n, n);
    for (e, mu) in mu_edge.iter().enumerate() {
        let c = mu / h;
        m[(e, e)] += c / w[e];
        m[(e, e + 1)] -= c / w[e];
        m[(e + 1, e + 1)] += c / w[e + 1];
        m[(e + 1, e)] -= c / w[e + 1];
    }
    OperatorMatrix::new(m, Symmetry::WeightedHermitian)
}

/// Free Hamiltonian `-(1/2) Laplacian` with Neumann ends, defined by the form
/// `<phi, H0 phi>_w = (1/2) sum_e h |(G phi)_e|^2`.
pub fn laplacian_h0(grid: &Grid) -> OperatorMatrix {
    let half = vec![0.5; grid.n_edges()];
    kinetic_op(grid, &half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_point_grid() {
        let g = make_grid(3).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0]);
        assert_eq!(g.weights(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn five_points_normalized() {
        let g = make_grid(5).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn too_small_grid_rejected() {
        assert_eq!(make_grid(2), Err(Error::InvalidGrid(2)));
    }

    #[test]
    fn integrate_examples() {
        let g = make_grid(101).unwrap();
        assert_abs_diff_eq!(integrate(&g, &g.sample(|_| 1.0)).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(integrate(&g, &g.sample(|x| x)).unwrap(), 0.5, epsilon = 1e-14);
        // trapezoid error for x^2 is h^2/6
        let v = integrate(&g, &g.sample(|x| x * x)).unwrap();
        assert!((v - 1.0 / 3.0).abs() <= 1e-4);
        assert_abs_diff_eq!(v - 1.0 / 3.0, 1e-4 / 6.0, epsilon = 1e-12);
        assert!(matches!(integrate(&g, &[1.0; 7]), Err(Error::Shape { .. })));
    }

    #[test]
    fn gradient_examples() {
        let g = make_grid(11).unwrap();
        let d = gradient_op(&g);
        let c = d.apply(&g.sample(|_| 3.0));
        assert!(c.iter().all(|v| v.abs() < 1e-12));
        let one = d.apply(&g.sample(|x| x));
        assert!(one.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let sq = d.apply(&g.sample(|x| x * x));
        assert_abs_diff_eq!(sq[5], 1.0, epsilon = 1e-13);
        let direct = g.gradient(&g.sample(|x| x * x));
        assert!(direct.iter().zip(&sq).all(|(a, b)| (a - b).abs() < 1e-13));
    }

    #[test]
    fn h0_kernel_and_form() {
        let g = make_grid(17).unwrap();
        let h0 = laplacian_h0(&g);
        let z = h0.apply(&g.sample(|_| 1.0));
        assert!(z.iter().all(|v| v.abs() < 1e-10));
        let (vals, vecs) = h0.eigen(&g).unwrap();
        assert!(vals[0].abs() < 1e-10);
        let c0 = vecs[(0, 0)];
        assert!((0..17).all(|i| (vecs[(i, 0)] - c0).abs() < 1e-10));
    }
}
