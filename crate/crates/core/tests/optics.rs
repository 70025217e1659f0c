use proptest::prelude::*;
use qwfc_core::grid::{GridGeometry, C64};
use qwfc_core::optics::{
    anchor_spectrum, coherent_efficiency, coherent_efficiency_with, hg_mode_field, mode_order, CoherenceMode,
    HgBasisSpec, ModeSpectrum, SampledBasis,
};

fn basis(n: usize) -> (HgBasisSpec, SampledBasis) {
    let spec = HgBasisSpec::new(0.15, 0.0, 1.55e-6, n).unwrap();
    let geo = GridGeometry::spanning(128, 1.2).unwrap();
    let sampled = SampledBasis::new(&spec, geo, 0.0).unwrap();
    (spec, sampled)
}

#[test]
fn mode_order_lists_lowest_orders_first() {
    let m = mode_order(10);
    assert_eq!(m.len(), 10);
    assert_eq!(m[0], (0, 0));
    assert!(m.windows(2).all(|w| w[0].0 + w[0].1 <= w[1].0 + w[1].1));
    assert_eq!(m.iter().filter(|(a, b)| a + b == 3).count(), 4);
}

#[test]
fn far_field_mode_keeps_unit_power() {
    let spec = HgBasisSpec::new(0.15, 0.0, 1.55e-6, 6).unwrap();
    let z = 2.0 * spec.rayleigh_range();
    let w = spec.beam_radius(z);
    let geo = GridGeometry::spanning(128, 5.0 * w).unwrap();
    let f = hg_mode_field(&spec, 2, 1, geo, z).unwrap();
    assert!((f.power() - 1.0).abs() < 1e-6);
}

fn spectrum_strategy(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decompose_inverts_reconstruct(c in spectrum_strategy(10)) {
        let (spec, b) = basis(10);
        prop_assume!(c.iter().any(|(x, y)| x.abs() + y.abs() > 1e-3));
        let coeffs: Vec<C64> = c.iter().map(|(x, y)| C64::new(*x, *y)).collect();
        let s = ModeSpectrum::new(spec, coeffs.clone()).unwrap();
        let back = b.decompose(&b.reconstruct(&s).unwrap()).unwrap();
        for (a, e) in back.coeffs.iter().zip(&coeffs) {
            prop_assert!((a - e).norm() < 1e-9);
        }
    }

    #[test]
    fn efficiency_is_symmetric_bounded_and_scale_invariant(
        c1 in spectrum_strategy(6), c2 in spectrum_strategy(6), k in 0.1..10.0f64,
    ) {
        let (spec, b) = basis(6);
        prop_assume!(c1.iter().any(|(x, y)| x.abs() + y.abs() > 1e-3));
        prop_assume!(c2.iter().any(|(x, y)| x.abs() + y.abs() > 1e-3));
        let f = |c: &[(f64, f64)]| {
            let s = ModeSpectrum::new(spec.clone(), c.iter().map(|(x, y)| C64::new(*x, *y)).collect()).unwrap();
            b.reconstruct(&s).unwrap()
        };
        let (e1, e2) = (f(&c1), f(&c2));
        let d = 2.0;
        for mode in [CoherenceMode::RealPart, CoherenceMode::Modulus] {
            let g12 = coherent_efficiency_with(&e1, &e2, d, mode).unwrap();
            let g21 = coherent_efficiency_with(&e2, &e1, d, mode).unwrap();
            prop_assert!((0.0..=1.0).contains(&g12));
            prop_assert!((g12 - g21).abs() < 1e-12);
            let mut scaled = e2.clone();
            scaled.scale(C64::new(k, 0.0));
            let gs = coherent_efficiency_with(&e1, &scaled, d, mode).unwrap();
            prop_assert!((gs - g12).abs() < 1e-12);
        }
        let self_g = coherent_efficiency(&e1, &e1, d).unwrap();
        prop_assert!((self_g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn anchoring_is_a_global_rotation(c in spectrum_strategy(6)) {
        let (spec, _) = basis(6);
        prop_assume!(c[0].0.abs() + c[0].1.abs() > 1e-3);
        let coeffs: Vec<C64> = c.iter().map(|(x, y)| C64::new(*x, *y)).collect();
        let mut s = ModeSpectrum::new(spec, coeffs.clone()).unwrap();
        let rot = anchor_spectrum(&mut s);
        prop_assert!(s.coeffs[0].im.abs() < 1e-12 && s.coeffs[0].re > 0.0);
        for (a, e) in s.coeffs.iter().zip(&coeffs) {
            prop_assert!((a - e * C64::from_polar(1.0, rot)).norm() < 1e-12);
        }
    }
}
