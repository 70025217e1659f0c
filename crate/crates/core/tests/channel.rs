use std::f64::consts::PI;

use proptest::prelude::*;
use qwfc_core::channel::{
    fried_parameter, partition_slabs, propagate, rytov_variance, AtmosphereProfile, ChannelRealization, GridPlan,
    ScreenParams, ScreenSynth,
};
use qwfc_core::optics::{hg_mode_field, HgBasisSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mean structure function along x at `lag` pixels over `count` screens.
fn ensemble_structure(params: &ScreenParams, n: usize, pitch: f64, lag: usize, count: usize) -> f64 {
    let synth = ScreenSynth::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut sum, mut k) = (0.0, 0usize);
    for _ in 0..count {
        let s = synth.generate(params, pitch, &mut rng).unwrap();
        for iy in 0..n {
            for ix in 0..n - lag {
                sum += (s.phase[iy * n + ix + lag] - s.phase[iy * n + ix]).powi(2);
                k += 1;
            }
        }
    }
    sum / k as f64
}

/// E[D(r)] of the sampled FFT lattice alone, subharmonics left out; valid
/// when L0 is well below the screen size.
fn lattice_structure(p: &ScreenParams, n: usize, pitch: f64, r: f64) -> f64 {
    let df = 1.0 / (n as f64 * pitch);
    let freq = |i: usize| if i < n / 2 { i as f64 * df } else { (i as f64 - n as f64) * df };
    let mut d = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            if ix != 0 || iy != 0 {
                let (fx, fy) = (freq(ix), freq(iy));
                d += p.psd(fx.hypot(fy)) * df * df * 2.0 * (1.0 - (2.0 * PI * fx * r).cos());
            }
        }
    }
    d
}

#[test]
fn screens_follow_their_sampled_spectrum() {
    // L0 much smaller than the screen: subharmonics carry almost no power
    let params = ScreenParams { r0: 0.05, outer_scale: 0.5, inner_scale: 0.01 };
    let (n, pitch) = (64, 0.02);
    for lag in [2, 4, 8] {
        let sim = ensemble_structure(&params, n, pitch, lag, 300);
        let th = lattice_structure(&params, n, pitch, lag as f64 * pitch);
        assert!((sim / th - 1.0).abs() < 0.08, "lag {lag}: {sim} vs {th}");
    }
}

#[test]
fn fried_parameter_matches_rytov_scaling() {
    let p = AtmosphereProfile::downlink(5e-15);
    let (lo, hi) = (p.receiver_altitude, p.satellite_altitude);
    let r0 = fried_parameter(&p, lo, hi).unwrap();
    // r0 ∝ (C²_n)^{-3/5}; σ²_R ∝ C²_n
    let p2 = AtmosphereProfile { cn2_ground: 1e-14, ..p.clone() };
    let r0_2 = fried_parameter(&p2, lo, hi).unwrap();
    assert!(r0_2 < r0);
    assert!(rytov_variance(&p2, lo, hi).unwrap() > rytov_variance(&p, lo, hi).unwrap());
}

#[test]
fn propagation_conserves_power_through_turbulence() {
    let profile = AtmosphereProfile::downlink(1e-14);
    let plan = GridPlan::for_beam(64, 0.15, profile.wavelength, profile.path_length());
    let real = ChannelRealization::generate(&profile, &plan, 40, 3).unwrap();
    assert!(real.screen_count() > 0);
    let spec = HgBasisSpec::new(0.15, 0.0, profile.wavelength, 1).unwrap();
    let input = hg_mode_field(&spec, 0, 0, real.geometry.source_geometry(), 0.0).unwrap();
    let out = propagate(&input, &real).unwrap();
    let kept = out.field.power() / input.power();
    assert!((kept + out.lost_fraction - 1.0).abs() < 1e-6, "kept {kept}, lost {}", out.lost_fraction);
    let again = ChannelRealization::generate(&profile, &plan, 40, 3).unwrap();
    assert_eq!(again, real);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partitions_always_satisfy_the_slab_limits(cn2 in 1.0e-15..2.0e-14f64, zenith in 0.0..0.8f64) {
        let p = AtmosphereProfile { zenith_angle: zenith, ..AtmosphereProfile::downlink(cn2) };
        let part = partition_slabs(&p, 200).unwrap();
        prop_assert!(part.satisfies_constraints());
        prop_assert!(part.slabs.iter().all(|s| s.sigma2_i < 0.1));
        let b = part.boundaries();
        prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
        prop_assert!((b[0] - p.receiver_altitude).abs() < 1e-9);
    }

    #[test]
    fn cn2_profile_is_non_negative_and_grows_with_the_ground_value(cn2 in 1.0e-15..1.0e-13f64, h in 2.0e3..4.0e5f64) {
        let p = AtmosphereProfile::downlink(cn2);
        let q = AtmosphereProfile::downlink(2.0 * cn2);
        prop_assert!(p.cn2_at(h) >= 0.0);
        prop_assert!(q.cn2_at(h) >= p.cn2_at(h));
    }
}
