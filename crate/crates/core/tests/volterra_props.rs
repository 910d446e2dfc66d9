use std::f64::consts::PI;

use entropyeq_core::grid::{make_grid, Grid};
use entropyeq_core::volterra::{
    apply_adjoint, apply_forward, duality_defect, exp_weighted_norm, picard_adjoint, picard_forward, solve_adjoint,
    solve_forward, volterra_bound, Kernel,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth kernel with sup norm `kappa`.
fn kernel(grid: &Grid, rng: &mut impl Rng, kappa: f64) -> Kernel {
    let c: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
    let raw = Kernel::from_fn(grid, |x, y| {
        (0..9).map(|m| c[m] * ((m / 3) as f64 * PI * x).cos() * ((m % 3) as f64 * PI * y).cos()).sum()
    });
    let s = kappa / raw.kappa().max(1e-12);
    Kernel::new(raw.values() * s).unwrap()
}

fn field(grid: &Grid, rng: &mut impl Rng) -> Vec<f64> {
    let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    grid.sample(|x| (0..5).map(|m| c[m] * (m as f64 * PI * x).cos()).sum())
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

fn unit_errors(np: usize) -> (f64, f64) {
    // phi = L phi + 1 with N = 1 gives e^x forward and e^{1-x} adjoint.
    let g = make_grid(np).unwrap();
    let k = Kernel::from_fn(&g, |_, _| 1.0);
    let ones = vec![1.0; np];
    let fwd = solve_forward(&k, &ones, &g).unwrap();
    let adj = solve_adjoint(&k, &ones, &g).unwrap();
    (sup_diff(&fwd, &g.sample(f64::exp)), sup_diff(&adj, &g.sample(|x| (1.0 - x).exp())))
}

#[test]
fn unit_benchmark_is_second_order() {
    let e: Vec<(f64, f64)> = [251, 501, 1001].iter().map(|np| unit_errors(*np)).collect();
    assert!(e[2].0 <= 5e-6 && e[2].1 <= 5e-6);
    for w in e.windows(2) {
        for r in [w[0].0 / w[1].0, w[0].1 / w[1].1] {
            assert!((2.5..=6.0).contains(&r), "ratio {r}");
        }
    }
}

#[test]
fn raw_duality_misses_only_the_corner_term() {
    let g = make_grid(101).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = kernel(&g, &mut rng, 1.5);
    let (phi, psi) = (field(&g, &mut rng), field(&g, &mut rng));
    let raw = g.inner(&apply_forward(&k, &phi, &g).unwrap(), &psi) - g.inner(&phi, &apply_adjoint(&k, &psi, &g).unwrap());
    let corner = duality_defect(&k, &phi, &psi, &g);
    assert!(corner.abs() > 1e-6);
    assert!((raw - corner).abs() < 1e-12);
}

#[test]
fn degenerate_diagonal_is_rejected() {
    let g = make_grid(3).unwrap();
    // 1 - (h/2) N(x, x) = 0 with h = 1/2.
    let k = Kernel::from_fn(&g, |_, _| 4.0);
    assert!(solve_forward(&k, &[1.0; 3], &g).is_err());
    assert!(solve_adjoint(&k, &[1.0; 3], &g).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solve_then_apply_reproduces_data(seed in any::<u64>(), kappa in 0.5..2.0f64, np in 11usize..80) {
        let g = make_grid(np).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = kernel(&g, &mut rng, kappa);
        let psi = field(&g, &mut rng);
        let tol = 1e-12 * (1.0 + g.norm(&psi));
        let fwd = solve_forward(&k, &psi, &g).unwrap();
        let back: Vec<f64> = fwd.iter().zip(apply_forward(&k, &fwd, &g).unwrap()).map(|(f, l)| f - l).collect();
        prop_assert!(sup_diff(&back, &psi) <= tol);
        let adj = solve_adjoint(&k, &psi, &g).unwrap();
        let back: Vec<f64> = adj.iter().zip(apply_adjoint(&k, &adj, &g).unwrap()).map(|(f, l)| f - l).collect();
        prop_assert!(sup_diff(&back, &psi) <= tol);
    }

    #[test]
    fn norm_bound_holds(seed in any::<u64>(), kappa in 0.5..2.0f64) {
        let g = make_grid(101).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = kernel(&g, &mut rng, kappa);
        let psi = field(&g, &mut rng);
        let bound = volterra_bound(k.kappa()) * g.norm(&psi);
        prop_assert!(g.norm(&solve_forward(&k, &psi, &g).unwrap()) <= bound);
        prop_assert!(g.norm(&solve_adjoint(&k, &psi, &g).unwrap()) <= bound);
    }

    #[test]
    fn picard_contracts_in_weighted_norm(seed in any::<u64>(), kappa in 0.5..2.0f64) {
        let g = make_grid(101).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = kernel(&g, &mut rng, kappa);
        let psi = field(&g, &mut rng);
        let alpha = (k.kappa() + 1.0).powi(2);
        let exact = solve_forward(&k, &psi, &g).unwrap();
        let err = |it| {
            let p = picard_forward(&k, &psi, &g, it).unwrap();
            let d: Vec<f64> = p.iter().zip(&exact).map(|(a, b)| a - b).collect();
            exp_weighted_norm(&d, alpha, &g)
        };
        let e: Vec<f64> = [2, 5, 10, 50].iter().map(|it| err(*it)).collect();
        prop_assert!(e[1] < e[0] && e[2] < e[1]);
        prop_assert!(e[3] <= 1e-8 * (1.0 + g.norm(&psi)));
        let adj = solve_adjoint(&k, &psi, &g).unwrap();
        prop_assert!(sup_diff(&picard_adjoint(&k, &psi, &g, 50).unwrap(), &adj) <= 1e-8 * (1.0 + g.norm(&psi)));
    }

    #[test]
    fn duality_holds_up_to_corner_term(seed in any::<u64>(), kappa in 0.5..2.0f64, np in 5usize..120) {
        let g = make_grid(np).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = kernel(&g, &mut rng, kappa);
        let (phi, psi) = (field(&g, &mut rng), field(&g, &mut rng));
        let raw = g.inner(&apply_forward(&k, &phi, &g).unwrap(), &psi) - g.inner(&phi, &apply_adjoint(&k, &psi, &g).unwrap());
        prop_assert!((raw - duality_defect(&k, &phi, &psi, &g)).abs() <= 1e-10);
    }
}
