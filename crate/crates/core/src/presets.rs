//! Named problem instances shared by tests, studies and the command line.

use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;

use crate::dual::{hamiltonian, DualPotentials};
use crate::grid::Grid;
use crate::num::{cos, sqrt};
use crate::operator::{gibbs, moments, DensityMatrix, EntropyKind};
use crate::Result;

/// Moment data `(n, j = n u0, k)` plus, when known, the state that produced them.
#[derive(Debug, Clone)]
pub struct Instance {
    pub n: Vec<f64>,
    pub u0: Vec<f64>,
    pub k: Vec<f64>,
    /// Multipliers of the exact minimizer, for instances built from a Gibbs state.
    pub potentials: Option<DualPotentials>,
    /// The exact minimizer when it is known in closed form.
    pub reference: Option<DensityMatrix>,
}

/// Moments of `gibbs(H(lambda))`; that state is the minimizer for its own moments.
pub fn gibbs_instance(grid: &Grid, lambda: DualPotentials) -> Result<Instance> {
    let rho = gibbs(grid, &hamiltonian(&lambda, grid)?, EntropyKind::Boltzmann)?;
    let m = moments(&rho, grid);
    Ok(Instance { n: m.n, u0: vec![0.0; grid.n_points()], k: m.k, potentials: Some(lambda), reference: Some(rho) })
}

/// `lambda_n = 1 + x^2`, `lambda_k = 1 + cos(pi x)/2`.
pub fn roundtrip_potentials(grid: &Grid) -> DualPotentials {
    DualPotentials { lambda_n: grid.sample(|x| 1.0 + x * x), lambda_k: grid.sample(|x| 1.0 + 0.5 * cos(PI * x)) }
}

pub fn roundtrip(grid: &Grid) -> Result<Instance> {
    gibbs_instance(grid, roundtrip_potentials(grid))
}

/// Same density multiplier with a kinetic multiplier twenty times smaller:
/// a warmer state with many occupied modes.
pub fn thermal_potentials(grid: &Grid) -> DualPotentials {
    DualPotentials { lambda_n: grid.sample(|x| 1.0 + x * x), lambda_k: grid.sample(|x| 0.05 * (1.0 + 0.5 * cos(PI * x))) }
}

pub fn thermal(grid: &Grid) -> Result<Instance> {
    gibbs_instance(grid, thermal_potentials(grid))
}

/// `n = 1 + cos(pi x)/2` with `k` the kinetic density of `|sqrt n><sqrt n|`.
/// The compatibility gap vanishes, so that rank-one state is the only feasible one.
pub fn pure_state(grid: &Grid) -> Result<Instance> {
    let n = grid.sample(|x| 1.0 + 0.5 * cos(PI * x));
    let psi: Vec<f64> = n.iter().map(|v| sqrt(*v)).collect();
    let k = grid.grad_sqrt_sq(&n);
    let reference = DensityMatrix::pure_real(grid, &psi)?;
    Ok(Instance { u0: vec![0.0; n.len()], n, k, potentials: None, reference: Some(reference) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::operator::compatibility_gap;
    use crate::operator::Moments;

    #[test]
    fn pure_state_has_zero_gap() {
        let g = make_grid(33).unwrap();
        let p = pure_state(&g).unwrap();
        let (_, min) = compatibility_gap(&g, &Moments::from_nodes(p.n.clone(), vec![0.0; 33], p.k.clone())).unwrap();
        assert!(min.abs() < 1e-12);
        let m = moments(p.reference.as_ref().unwrap(), &g);
        for i in 0..33 {
            assert!((m.n[i] - p.n[i]).abs() < 1e-12);
            assert!((m.k[i] - p.k[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn roundtrip_moments_are_symmetric_free() {
        let g = make_grid(17).unwrap();
        let r = roundtrip(&g).unwrap();
        assert!(r.n.iter().all(|v| *v > 0.0));
        assert!(r.k.iter().all(|v| *v > 0.0));
    }
}
