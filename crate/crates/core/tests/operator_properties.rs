use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use psi_hilfer::grid::{FractionalOrder, GradedMesh, Grid, GridFunction};
use psi_hilfer::operators::{psi_rl_integral, rl_integral_profile, verify_inversion, HilferOptions};
use psi_hilfer::psi::PsiFunction;

fn grid(n: usize, psi: PsiFunction) -> Arc<Grid> {
    Grid::new(GradedMesh::new(1.0, n, 2.0).unwrap(), psi).unwrap()
}

fn psi_strategy() -> impl Strategy<Value = PsiFunction> {
    prop_oneof![
        Just(PsiFunction::identity()),
        (0.5f64..3.0).prop_map(|rho| PsiFunction::power(rho).unwrap()),
        Just(PsiFunction::shifted_log()),
    ]
}

fn samples(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integral_is_linear(
        psi in psi_strategy(),
        mu in 0.05f64..1.5,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        h1 in samples(33),
        h2 in samples(33),
    ) {
        let g = grid(32, psi);
        let order = FractionalOrder::new(0.5, 1.0).unwrap();
        let f1 = GridFunction::from_weighted(g.clone(), order, h1).unwrap();
        let f2 = GridFunction::from_weighted(g.clone(), order, h2).unwrap();
        let mix = f1.lincomb(a, &f2, b).unwrap();
        let i1 = rl_integral_profile(&f1, mu).unwrap();
        let i2 = rl_integral_profile(&f2, mu).unwrap();
        let im = rl_integral_profile(&mix, mu).unwrap();
        for n in 0..g.len() {
            let expected = a * i1.value(&g, n) + b * i2.value(&g, n);
            let scale = 1.0 + expected.abs() + a.abs() * i1.value(&g, n).abs() + b.abs() * i2.value(&g, n).abs();
            prop_assert!((im.value(&g, n) - expected).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn integral_preserves_sign(psi in psi_strategy(), mu in 0.05f64..1.5, h in samples(33)) {
        let g = grid(32, psi);
        let order = FractionalOrder::new(0.5, 1.0).unwrap();
        let positive: Vec<f64> = h.iter().map(|v| v.abs()).collect();
        let f = GridFunction::from_weighted(g.clone(), order, positive).unwrap();
        let out = rl_integral_profile(&f, mu).unwrap();
        for n in 0..g.len() {
            prop_assert!(out.value(&g, n) >= 0.0);
        }
    }

    #[test]
    fn weighted_kernel_integral_is_exact(psi in psi_strategy(), mu in 0.1f64..0.9, nu in 0.0f64..=1.0, node in 1usize..32) {
        // I^mu of (Delta Psi)^(xi-1) is Gamma(xi)/Gamma(xi+mu) (Delta Psi)^(xi+mu-1)
        let g = grid(32, psi);
        let order = FractionalOrder::new(mu, nu).unwrap();
        let kernel = GridFunction::from_weighted(g.clone(), order, vec![1.0; g.len()]).unwrap();
        let xi = order.xi();
        let exact = psi_hilfer::special::gamma_fn(xi).unwrap() / psi_hilfer::special::gamma_fn(xi + mu).unwrap()
            * g.u(node).powf(xi + mu - 1.0);
        let got = psi_rl_integral(&kernel, mu, node).unwrap();
        prop_assert!((got - exact).abs() <= 1e-11 * exact.abs().max(1.0));
    }
}

#[test]
fn inversion_examples() {
    let g = grid(1024, PsiFunction::identity());
    let nearest = |t: f64| (0..g.len()).min_by(|&a, &b| (g.t(a) - t).abs().total_cmp(&(g.t(b) - t).abs())).unwrap();
    let node = nearest(0.5);
    let order = FractionalOrder::new(0.5, 0.0).unwrap();
    let one = GridFunction::from_continuous(g.clone(), order, |_| 1.0).unwrap();
    let check = verify_inversion(&one, order, node, HilferOptions::default()).unwrap();
    assert_relative_eq!(check.recovered, 1.0, epsilon = 1e-6);

    let order = FractionalOrder::new(0.7, 0.3).unwrap();
    let node = nearest(0.8);
    let sine = GridFunction::from_continuous(g.clone(), order, f64::sin).unwrap();
    let check = verify_inversion(&sine, order, node, HilferOptions::default()).unwrap();
    assert_relative_eq!(check.recovered, g.t(node).sin(), epsilon = 1e-4);
}

#[test]
fn zero_integrates_to_zero() {
    let g = grid(16, PsiFunction::shifted_log());
    let order = FractionalOrder::new(0.3, 0.2).unwrap();
    let zero = GridFunction::from_weighted(g.clone(), order, vec![0.0; g.len()]).unwrap();
    for n in 0..g.len() {
        assert_eq!(psi_rl_integral(&zero, 0.3, n).unwrap(), 0.0);
    }
}
