use entropyeq_core::characterization::{
    d_x, gamma_star, kernel_k0, q_form, verify, CharacterizationInputs, CharacterizationReport, Route, VerifyOptions,
    SPECTRAL_CUTOFF,
};
use entropyeq_core::dual::{solve, SolveOptions};
use entropyeq_core::grid::make_grid;
use entropyeq_core::operator::{moments, EntropyKind};
use entropyeq_core::presets::roundtrip;
use entropyeq_core::sampling::{random_psd, Roughness};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn roundtrip_report(np: usize) -> CharacterizationReport {
    let g = make_grid(np).unwrap();
    let inst = roundtrip(&g).unwrap();
    let r = solve(&inst.n, &inst.k, &SolveOptions::default(), &g).unwrap();
    assert!(r.converged);
    let opts = VerifyOptions { a_floor: 1e-14, ..VerifyOptions::default() };
    verify(&CharacterizationInputs::new(&r.rho, &inst.n, &inst.k), &r.potentials, &opts, &g).unwrap()
}

#[test]
fn dual_route_satisfies_the_characterization() {
    let rep = roundtrip_report(65);
    let c = rep.check(Route::DualCorrected);
    assert!(c.max_scaled_residual <= 1e-6, "{}", c.max_scaled_residual);
    assert!(c.max_scaled_gap <= 1e-6);
    assert!(c.hermitian_defect <= 1e-12);
    for c in &rep.checks {
        assert!(c.g_vs_q_margin >= -1e-8, "{}: {}", c.route.name(), c.g_vs_q_margin);
    }
    assert!(rep.min_m_star >= -1e-6);
    assert!(rep.current_sup <= 1e-12);
    assert!(rep.kernel_bound_margin >= -1e-8 && rep.gradient_bound_margin >= -1e-8);
}

#[test]
fn volterra_route_improves_under_refinement() {
    let e: Vec<f64> =
        [33, 65, 129].iter().map(|np| roundtrip_report(*np).check(Route::VolterraCorrected).max_scaled_gap).collect();
    assert!(e[1] < e[0] && e[2] < e[1], "{e:?}");
}

#[test]
fn gamma_is_continuous_in_eta() {
    let g = make_grid(65).unwrap();
    let inst = roundtrip(&g).unwrap();
    let rho = inst.reference.unwrap();
    let plain = gamma_star(&rho, &inst.n, 0.0, SPECTRAL_CUTOFF, &g).unwrap();
    let reg = gamma_star(&rho, &inst.n, 1e-6, SPECTRAL_CUTOFF, &g).unwrap();
    let d = plain.iter().zip(&reg).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(d <= 1e-4, "{d}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn q_is_hermitian(seed in any::<u64>()) {
        let g = make_grid(25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut field = |lo: f64, hi: f64| -> Vec<f64> { (0..25).map(|_| rng.random_range(lo..hi)).collect() };
        let (m, a, n) = (field(0.1, 2.0), field(-1.0, 1.0), field(0.2, 2.0));
        prop_assert!(q_form(&m, &a, &n, &g).unwrap().hermitian_defect(&g) <= 1e-12);
    }

    #[test]
    fn kernel_bounds_hold(seed in any::<u64>(), rank in 1usize..6, rough: bool) {
        let g = make_grid(25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let roughness = if rough { Roughness::Rough } else { Roughness::Smooth };
        let rho = random_psd(&g, &mut rng, rank, roughness, false).unwrap();
        let m = moments(&rho, &g);
        let k0 = kernel_k0(&rho, &g).unwrap();
        let dk0 = d_x(&k0, &g).unwrap();
        for i in 0..25 {
            for j in 0..25 {
                prop_assert!(k0.values()[(i, j)].abs() <= 2.0 * (m.n[i] * m.k[j]).sqrt() + 1e-8);
                prop_assert!(dk0.values()[(i, j)].abs() <= 2.0 * (m.k[i] * m.k[j]).sqrt() + 1e-8);
            }
        }
    }
}

#[test]
fn regularized_verification_runs() {
    let g = make_grid(33).unwrap();
    let inst = roundtrip(&g).unwrap();
    let kind = EntropyKind::Regularized { eta: 1e-6 };
    let r = solve(&inst.n, &inst.k, &SolveOptions::with_entropy(kind), &g).unwrap();
    assert!(r.converged);
    let inputs = CharacterizationInputs { eta: 1e-6, ..CharacterizationInputs::new(&r.rho, &inst.n, &inst.k) };
    let opts = VerifyOptions { a_floor: 1e-14, ..VerifyOptions::default() };
    let rep = verify(&inputs, &r.potentials, &opts, &g).unwrap();
    assert!(rep.check(Route::DualCorrected).max_scaled_residual <= 1e-4);
}
