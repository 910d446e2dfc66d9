//! Removal of a prescribed current by the gauge change `rho -> e^{i Phi} rho e^{-i Phi}`
//! with `Phi' = u0`.

use alloc::vec::Vec;

use crate::grid::Grid;
use crate::num::abs;
use crate::operator::{moments, DensityMatrix, Moments};
use crate::{Error, Result};

/// `Phi(x_i) = int_0^{x_i} u0`, cumulative trapezoid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugePhase {
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

pub fn phase(grid: &Grid, u0: &[f64]) -> Result<GaugePhase> {
    grid.check_len(u0.len())?;
    Ok(GaugePhase { phi: grid.cumulative(u0) })
}

/// Conjugation by `e^{+i Phi}` (forward) or `e^{-i Phi}` (inverse).
pub fn apply_gauge(rho: &DensityMatrix, phase: &GaugePhase, direction: Direction) -> DensityMatrix {
    let theta: Vec<f64> = match direction {
        Direction::Forward => phase.phi.clone(),
        Direction::Inverse => phase.phi.iter().map(|t| -t).collect(),
    };
    rho.conjugate_diagonal(&theta)
}

/// Current-free constraints `(n0, k0 - n0 u0^2)`.
pub fn reduce_constraints(n0: &[f64], u0: &[f64], k0: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = n0.len();
    for l in [u0.len(), k0.len()] {
        if l != len {
            return Err(Error::Shape { expected: len, found: l });
        }
    }
    if let Some((i, v)) = n0.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::InvalidDensity { node: i, value: *v });
    }
    let k: Vec<f64> = (0..len).map(|i| k0[i] - n0[i] * u0[i] * u0[i]).collect();
    if let Some((i, v)) = k.iter().enumerate().find(|(_, v)| **v < -1e-10) {
        return Err(Error::Infeasible { node: i, gap: *v });
    }
    Ok((n0.to_vec(), k))
}

/// Moments of `e^{i Phi} rho e^{-i Phi}` with `Phi' = u0`.
pub fn gauge_moment_shift(rho: &DensityMatrix, u0: &[f64], grid: &Grid) -> Result<Moments> {
    let ph = phase(grid, u0)?;
    Ok(moments(&apply_gauge(rho, &ph, Direction::Forward), grid))
}

/// Right-hand sides of the shift identities: `j + n u0` and `k + n u0^2 + 2 j u0`.
pub fn predicted_shift(m: &Moments, u0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let j = (0..m.n.len()).map(|i| m.j[i] + m.n[i] * u0[i]).collect();
    let k = (0..m.n.len()).map(|i| m.k[i] + m.n[i] * u0[i] * u0[i] + 2.0 * m.j[i] * u0[i]).collect();
    (j, k)
}

/// Defects of the shift identities for one state and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationDefect {
    /// `sup |j' - j - n u0|`.
    pub current: f64,
    /// `sup |k' - k - n u0^2 - 2 j u0|`.
    pub kinetic: f64,
    /// Same sups over the nodes in `[1/8, 7/8]`.
    pub current_interior: f64,
    pub kinetic_interior: f64,
}

/// Shift-identity defects. Interior values are `O(h^2)` for smooth data; the
/// end nodes carry an `O(h)` term from the one-sided edge average.
pub fn relation_defect(rho: &DensityMatrix, u0: &[f64], grid: &Grid) -> Result<RelationDefect> {
    let shifted = gauge_moment_shift(rho, u0, grid)?;
    let (j, k) = predicted_shift(&moments(rho, grid), u0);
    let x = grid.nodes();
    let sup = |a: &[f64], b: &[f64], interior: bool| {
        (0..a.len())
            .filter(|i| !interior || (x[*i] >= 0.125 - 1e-12 && x[*i] <= 0.875 + 1e-12))
            .fold(0.0_f64, |m, i| m.max(abs(a[i] - b[i])))
    };
    Ok(RelationDefect {
        current: sup(&shifted.j, &j, false),
        kinetic: sup(&shifted.k, &k, false),
        current_interior: sup(&shifted.j, &j, true),
        kinetic_interior: sup(&shifted.k, &k, true),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::num::sqrt;
    use crate::operator::trace_distance;

    #[test]
    fn phase_examples() {
        let g = make_grid(41).unwrap();
        assert!(phase(&g, &[0.0; 41]).unwrap().phi.iter().all(|v| *v == 0.0));
        let c = phase(&g, &[2.5; 41]).unwrap();
        for (p, x) in c.phi.iter().zip(g.nodes()) {
            assert!((p - 2.5 * x).abs() < 1e-14);
        }
        let q = phase(&g, g.nodes()).unwrap();
        let h = g.spacing();
        for (p, x) in q.phi.iter().zip(g.nodes()) {
            assert!((p - x * x / 2.0).abs() <= h * h);
        }
    }

    #[test]
    fn gauge_round_trip() {
        let g = make_grid(17).unwrap();
        let psi = g.sample(|x| 1.0 + x * x);
        let r = DensityMatrix::pure_real(&g, &psi).unwrap();
        let ph = phase(&g, &g.sample(|x| 3.0 * x)).unwrap();
        let same = apply_gauge(&r, &GaugePhase { phi: alloc::vec![0.0; 17] }, Direction::Forward);
        assert!(trace_distance(&r, &same) < 1e-14);
        let back = apply_gauge(&apply_gauge(&r, &ph, Direction::Forward), &ph, Direction::Inverse);
        assert!(trace_distance(&r, &back) < 1e-12);
    }

    #[test]
    fn reduce_examples() {
        let (n, k) = reduce_constraints(&[1.0; 4], &[0.0; 4], &[3.0; 4]).unwrap();
        assert_eq!((n, k), (alloc::vec![1.0; 4], alloc::vec![3.0; 4]));
        let (_, k) = reduce_constraints(&[1.0; 4], &[2.0; 4], &[5.0; 4]).unwrap();
        assert_eq!(k, alloc::vec![1.0; 4]);
        let (_, k) = reduce_constraints(&[2.0; 4], &[3.0; 4], &[18.0; 4]).unwrap();
        assert_eq!(k, alloc::vec![0.0; 4]);
        assert!(matches!(reduce_constraints(&[1.0; 4], &[2.0; 4], &[3.0; 4]), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn zero_velocity_leaves_moments() {
        let g = make_grid(33).unwrap();
        let r = DensityMatrix::pure_real(&g, &g.sample(|x| sqrt(1.0 + x))).unwrap();
        let m = moments(&r, &g);
        let s = gauge_moment_shift(&r, &[0.0; 33], &g).unwrap();
        assert_eq!(m.n, s.n);
        assert_eq!(m.k, s.k);
    }
}
