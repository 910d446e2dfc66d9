//! Seeded random density matrices for property checks.

use alloc::vec::Vec;

use core::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;

use crate::grid::Grid;
use crate::num::cos;
use crate::operator::DensityMatrix;
use crate::{Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Roughness {
    /// Independent values at every node.
    Rough,
    /// Combinations of the first few cosine modes.
    Smooth,
}

/// `sum_{r < rank} |psi_r><psi_r|` with random `psi_r`; real or complex entries.
pub fn random_psd<R: Rng>(grid: &Grid, rng: &mut R, rank: usize, roughness: Roughness, complex: bool) -> Result<DensityMatrix> {
    const MODES: usize = 6;
    let np = grid.n_points();
    let x = grid.nodes();
    let draw = |rng: &mut R| {
        let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
        C64::new(rng.random_range(-1.0..1.0), im)
    };
    let cols: Vec<Vec<C64>> = (0..rank)
        .map(|_| match roughness {
            Roughness::Rough => (0..np).map(|_| draw(rng)).collect(),
            Roughness::Smooth => {
                let c: Vec<C64> = (0..MODES).map(|_| draw(rng)).collect();
                x.iter().map(|x| c.iter().enumerate().map(|(m, c)| c * cos(m as f64 * PI * x)).sum()).collect()
            }
        })
        .collect();
    let k = DMatrix::from_fn(np, np, |i, j| cols.iter().map(|c| c[i] * c[j].conj()).sum::<C64>());
    DensityMatrix::from_kernel(grid, &k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_and_reality() {
        let g = make_grid(17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_psd(&g, &mut rng, 3, Roughness::Rough, false).unwrap();
        assert_eq!(r.imaginary_part(), 0.0);
        let top = r.values()[0];
        assert!(r.values()[3..].iter().all(|v| *v < 1e-12 * top));
        let c = random_psd(&g, &mut rng, 2, Roughness::Smooth, true).unwrap();
        assert!(c.imaginary_part() > 0.0);
    }
}
