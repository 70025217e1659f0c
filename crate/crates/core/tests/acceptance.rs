//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any hard criterion fails. Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 1 5 8`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix2, Matrix4};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use qwfc_core::channel::{
    partition_slabs, propagate_vacuum, AtmosphereProfile, ChannelGeometry, ScreenParams, ScreenSynth,
};
use qwfc_core::experiment::{
    cmd_evaluate, cmd_report, cmd_simulate, cmd_skr, cmd_train, coherent_efficiencies, skr_table, ExperimentConfig,
    GammaRow, GammaStats, GammaTable, OutputPaths, Preset, Variant,
};
use qwfc_core::grid::GridGeometry;
use qwfc_core::optics::{
    calibrate_zernike_rms, hg_mode_field, zernike_phase, zernike_value, HgBasisSpec, ModeSpectrum, SampledBasis,
    ZernikeKind,
};
use qwfc_core::skr::{
    covariance_matrix, g, secure_key_rate, symplectic_eigenvalues, ChannelMoments, Covariance,
    NoiseParams, SkrParams,
};
use qwfc_core::tnn::{evaluate_variances, gradients_check, train_with, PhaseSet, TnnHyperparams, TnnModel};
use qwfc_core::wfe::{generate_dataset, CrossLeakageConfig, Dataset, Simulator, TransmitterConfig};

type C64 = num_complex::Complex64;

/// Seed of every desk-scale Monte-Carlo run below.
const SEED: u64 = 2024;
/// Mean-coherent-efficiency table at N = 10, 30, 50: (E_S, E_R, Ẽ_S).
const REFERENCE_GAMMA: [(usize, [f64; 3]); 3] =
    [(10, [0.329, 0.229, 0.313]), (30, [0.507, 0.321, 0.484]), (50, [0.553, 0.349, 0.523])];
const REFERENCE_MEAN_T: f64 = 0.652;

struct Outcome {
    pass: bool,
    /// Soft criteria report but never fail the run.
    soft: bool,
    detail: String,
}

fn hard(pass: bool, detail: String) -> Outcome {
    Outcome { pass, soft: false, detail }
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

// ---------------------------------------------------------------- 1

fn optics() -> Outcome {
    let t0 = Instant::now();
    let w0 = 0.15;
    let spec = HgBasisSpec::new(w0, 0.0, 1.55e-6, 50).unwrap();
    let geo = GridGeometry::spanning(512, 8.0 * w0).unwrap();
    let fields: Vec<_> = spec.modes.iter().map(|&(m, n)| hg_mode_field(&spec, m, n, geo, 0.0).unwrap()).collect();
    let mut gram_err = 0.0f64;
    for (i, a) in fields.iter().enumerate() {
        for (j, b) in fields.iter().enumerate().skip(i) {
            let v = a.inner(b).unwrap();
            let target = if i == j { 1.0 } else { 0.0 };
            gram_err = gram_err.max((v - target).norm());
        }
    }
    drop(fields);

    let basis = SampledBasis::new(&spec, geo, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let coeffs: Vec<C64> = (0..50).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let s = ModeSpectrum::new(spec.clone(), coeffs.clone()).unwrap();
    let back = basis.decompose(&basis.reconstruct(&s).unwrap()).unwrap();
    let num: f64 = back.coeffs.iter().zip(&coeffs).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let round_trip = (num / den).sqrt();
    let secs = elapsed(t0);
    hard(
        gram_err < 1e-3 && round_trip < 1e-6 && secs < 60.0,
        format!("Gram max-abs deviation {gram_err:.2e}, round trip {round_trip:.2e}, {secs:.1} s"),
    )
}

// ---------------------------------------------------------------- 2

/// Mean of Z² over the unit disk by Simpson in ρ and the rectangle rule in β.
fn disk_mean_square(p: i32, q: i32) -> f64 {
    let (nr, nb) = (2000, 256);
    let h = 1.0 / nr as f64;
    let mut total = 0.0;
    for i in 0..=nr {
        let rho = i as f64 * h;
        let w = if i == 0 || i == nr { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let ring: f64 =
            (0..nb).map(|k| zernike_value(p, q, rho, 2.0 * PI * k as f64 / nb as f64).unwrap().powi(2)).sum::<f64>()
                * (2.0 * PI / nb as f64);
        total += w * ring * rho;
    }
    total * h / 3.0 / PI
}

fn zernike() -> Outcome {
    let cfg = TransmitterConfig::default();
    let geo = GridGeometry::spanning(256, 1.0).unwrap();
    let mut worst_map = 0.0f64;
    let mut worst_coef = 0.0f64;
    for e in cfg.signal_wfes.iter().chain(&cfg.reference_wfes) {
        let spec = calibrate_zernike_rms(e.kind, e.rms_waves, 1.0).unwrap();
        let map = zernike_phase(&spec, geo).unwrap();
        let mask = geo.disk_mask(1.0);
        let inside: Vec<f64> = map.iter().zip(&mask).filter(|(_, m)| **m).map(|(v, _)| *v).collect();
        let rms = (inside.iter().map(|v| v * v).sum::<f64>() / inside.len() as f64).sqrt();
        let target = 2.0 * PI * e.rms_waves;
        worst_map = worst_map.max((rms / target - 1.0).abs());
        let (p, q) = e.kind.indices();
        let oracle = target / disk_mean_square(p, q).sqrt();
        worst_coef = worst_coef.max((spec.coefficient / oracle - 1.0).abs());
    }
    let rms = 0.078;
    let defocus = calibrate_zernike_rms(ZernikeKind::Defocus, rms, 1.0).unwrap().coefficient;
    let sqrt3 = (defocus - 3f64.sqrt() * 2.0 * PI * rms).abs();
    hard(
        worst_map < 0.01 && worst_coef < 1e-6 && sqrt3 < 1e-6,
        format!(
            "map RMS worst rel err {worst_map:.2e}, coefficient vs quadrature {worst_coef:.2e}, defocus vs √3·RMS {sqrt3:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 3

/// E[D(r)] along x for the discrete spectrum the generator samples: the FFT
/// lattice without DC plus three 3×3 subharmonic rings.
fn expected_structure(p: &ScreenParams, n: usize, pitch: f64, r: f64) -> f64 {
    let df = 1.0 / (n as f64 * pitch);
    let freq = |i: usize| if i < n / 2 { i as f64 * df } else { (i as f64 - n as f64) * df };
    let term = |fx: f64, fy: f64, w: f64| p.psd(fx.hypot(fy)) * w * w * 2.0 * (1.0 - (2.0 * PI * fx * r).cos());
    let mut d = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            if ix != 0 || iy != 0 {
                d += term(freq(ix), freq(iy), df);
            }
        }
    }
    for level in 1..=3 {
        let w = df / 3f64.powi(level);
        for jy in -1i32..=1 {
            for jx in -1i32..=1 {
                if jx != 0 || jy != 0 {
                    d += term(f64::from(jx) * w, f64::from(jy) * w, w);
                }
            }
        }
    }
    d
}

fn channel_statistics() -> Outcome {
    let t0 = Instant::now();
    let ch = ExperimentConfig::preset(Preset::Desk, 0, 10, SEED).unwrap().channel;
    let profile = &ch.profile;
    let plan = ch.grid_plan();
    let length = profile.path_length();
    let geo = ChannelGeometry::new(&plan, profile.wavelength, length, &[]).unwrap();
    let spec = HgBasisSpec::new(ch.beam_waist, 0.0, profile.wavelength, 1).unwrap();
    let input = hg_mode_field(&spec, 0, 0, geo.source_geometry(), 0.0).unwrap();
    let out = propagate_vacuum(&input, &geo).unwrap().field;
    let c = out.geometry.coords();
    let n = out.geometry.n;
    let (mut m2, mut p) = (0.0, 0.0);
    for (iy, y) in c.iter().enumerate() {
        for (ix, x) in c.iter().enumerate() {
            let i = out.data[iy * n + ix].norm_sqr();
            m2 += (x * x + y * y) * i;
            p += i;
        }
    }
    let w_sim = (2.0 * m2 / p).sqrt();
    let w_th = spec.beam_radius(length);
    let beam_err = (w_sim / w_th - 1.0).abs();

    // Kolmogorov: D(r) = 6.88 (r/r0)^{5/3}; huge L0, no inner scale.
    let r0 = 0.1;
    let pitch = r0 / 8.0;
    let params = ScreenParams { r0, outer_scale: 1e6, inner_scale: 0.0 };
    let synth = ScreenSynth::new(256);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let lags = [2usize, 4, 8, 16, 32, 64];
    let mut d = vec![0.0; lags.len()];
    let mut counts = vec![0usize; lags.len()];
    for _ in 0..200 {
        let s = synth.generate(&params, pitch, &mut rng).unwrap();
        for (k, &lag) in lags.iter().enumerate() {
            for iy in 0..256 - lag {
                for ix in 0..256 - lag {
                    let v = s.phase[iy * 256 + ix];
                    d[k] += (s.phase[iy * 256 + ix + lag] - v).powi(2) + (s.phase[(iy + lag) * 256 + ix] - v).powi(2);
                    counts[k] += 2;
                }
            }
        }
    }
    let mut sf_err = 0.0f64;
    let mut construction_err = 0.0f64;
    let mut sf_detail = Vec::new();
    for (k, &lag) in lags.iter().enumerate() {
        let sim = d[k] / counts[k] as f64;
        let r = lag as f64 * pitch;
        let th = 6.88 * (r / r0).powf(5.0 / 3.0);
        sf_err = sf_err.max((sim / th - 1.0).abs());
        construction_err = construction_err.max((sim / expected_structure(&params, 256, pitch, r) - 1.0).abs());
        sf_detail.push(format!("{lag}px {:+.1}%", 100.0 * (sim / th - 1.0)));
    }

    let (lo, hi) = (ch.cn2_range[0], ch.cn2_range[1]);
    let mut partitions_ok = true;
    let mut worst_slab = 0.0f64;
    for i in 0..=40 {
        let cn2 = lo + (hi - lo) * i as f64 / 40.0;
        let prof = AtmosphereProfile { cn2_ground: cn2, ..profile.clone() };
        let part = partition_slabs(&prof, ch.screen_budget).unwrap();
        partitions_ok &= part.satisfies_constraints() && part.slabs.iter().all(|s| s.sigma2_i < 0.1);
        worst_slab = part.slabs.iter().map(|s| s.sigma2_i).fold(worst_slab, f64::max);
    }
    let secs = elapsed(t0);
    hard(
        beam_err < 0.005 && sf_err < 0.15 && partitions_ok && secs < 300.0,
        format!(
            "beam radius err {:.4}%, structure function vs Kolmogorov [{}], vs the generator's own spectral sum \
             max {:.1}%, partitions ok {partitions_ok} (max slab σ²_I {worst_slab:.3}), {secs:.0} s",
            100.0 * beam_err,
            sf_detail.join(", "),
            100.0 * construction_err
        ),
    )
}

// ---------------------------------------------------------------- shared desk runs

struct DeskRun {
    cfg: ExperimentConfig,
    sim: Simulator,
    leakage: CrossLeakageConfig,
    data: Dataset,
    secs: f64,
}

fn desk_run(case_id: u8, n: usize) -> DeskRun {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::preset(Preset::Desk, case_id, n, SEED).unwrap();
    let sim = Simulator::new(&cfg.channel, &cfg.transmitter, n).unwrap();
    let leakage = CrossLeakageConfig::synthesize(n, &cfg.leakage).unwrap();
    let data = generate_dataset(&sim, case_id, cfg.run.instances, cfg.run.split, cfg.run.base_seed, &leakage).unwrap();
    eprintln!("  desk dataset case {case_id}, N = {n}: {} records in {:.0} s", data.records.len(), elapsed(t0));
    DeskRun { cfg, sim, leakage, data, secs: elapsed(t0) }
}

fn case0() -> &'static DeskRun {
    static RUN: OnceLock<DeskRun> = OnceLock::new();
    RUN.get_or_init(|| desk_run(0, 10))
}

fn train_desk(run: &DeskRun) -> (TnnModel, f64) {
    let t0 = Instant::now();
    let mut model = TnnModel::new(run.cfg.tnn.clone()).unwrap();
    let tr = PhaseSet::from_records(run.data.train()).unwrap();
    let te = PhaseSet::from_records(run.data.test()).unwrap();
    train_with(&mut model, &tr, Some(&te), |e, a, b| {
        if (e + 1) % 50 == 0 {
            eprintln!("  epoch {:>4}: train {a:.5}, test {:.5}", e + 1, b.unwrap_or(f64::NAN));
        }
    })
    .unwrap();
    (model, elapsed(t0))
}

fn moments(data: &Dataset) -> ChannelMoments {
    let ts: Vec<f64> = data.records.iter().map(|r| r.t).collect();
    ChannelMoments::from_samples(&ts).unwrap()
}

// ---------------------------------------------------------------- 4

fn mean_transmissivity() -> Outcome {
    let m = moments(&case0().data);
    let n = case0().data.records.len();
    let pass = (m.mean_t - REFERENCE_MEAN_T).abs() <= 0.05;
    let note = if pass { "" } else { "; outside tolerance: grid-resolution sensitivity, rerun with the 512² grid" };
    Outcome { pass, soft: true, detail: format!("⟨T⟩ = {:.4} over {n} instances (target 0.652 ± 0.05){note}", m.mean_t) }
}

// ---------------------------------------------------------------- 5

fn gradient_check() -> Outcome {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let h = TnnHyperparams { seed, ..TnnHyperparams::tiny(6) };
        let model = TnnModel::new(h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = Array2::from_shape_fn((5, 6), |_| rng.gen_range(-PI..PI));
        let y = Array2::from_shape_fn((5, 6), |_| rng.gen_range(-PI..PI));
        worst = worst.max(gradients_check(&model, x.view(), y.view()).unwrap());
    }
    let secs = elapsed(t0);
    hard(worst < 1e-4 && secs < 30.0, format!("max relative error {worst:.2e} over 10 seeds, {secs:.1} s"))
}

// ---------------------------------------------------------------- 6

fn case0_harmless() -> Outcome {
    let run = case0();
    let (model, secs) = train_desk(run);
    let v = evaluate_variances(run.data.test(), &model).unwrap();
    let worst = v.correction_var.iter().cloned().fold(0.0, f64::max);
    hard(worst <= 5e-3, format!("max per-mode correction variance {worst:.2e} rad² (N = 10), training {secs:.0} s"))
}

// ---------------------------------------------------------------- 7

fn case2_benefit() -> Outcome {
    let t0 = Instant::now();
    let run = desk_run(2, 30);
    let (model, train_secs) = train_desk(&run);
    let test = run.data.test();
    let v = evaluate_variances(test, &model).unwrap();
    let frac = v.improved_fraction();
    let set = PhaseSet::from_records(test).unwrap();
    let pred = model.predict(set.inputs.view()).unwrap();
    let predicted: Vec<Vec<f64>> = pred.rows().into_iter().map(|r| r.to_vec()).collect();
    let skr = &run.cfg.skr;
    let gammas =
        coherent_efficiencies(&run.sim, test, &predicted, &run.leakage, skr.coherence, skr.anchor_global_phase).unwrap();
    let mean = |k: usize| gammas.iter().map(|g| g[k]).sum::<f64>() / gammas.len() as f64;
    let (gs, gr, gc) = (mean(0), mean(1), mean(2));
    let secs = elapsed(t0);
    hard(
        frac >= 0.8 && gs >= gc && gc >= gr && secs <= 7200.0,
        format!(
            "correction < default in {:.0}% of modes; γ(E_S) = {gs:.3}, γ(Ẽ_S) = {gc:.3}, γ(E_R) = {gr:.3}; \
             dataset {:.0} s, training {train_secs:.0} s, total {secs:.0} s",
            100.0 * frac,
            run.secs
        ),
    )
}

// ---------------------------------------------------------------- 8

fn g_oracle(x: f64) -> f64 {
    if x <= 1.0 {
        return 0.0;
    }
    ((x + 1.0) / 2.0) * ((x + 1.0) / 2.0).log2() - ((x - 1.0) / 2.0) * ((x - 1.0) / 2.0).log2()
}

/// Symplectic eigenvalues of the two-mode matrix from the symmetric form
/// M^½·Ω·M·Ωᵀ·M^½ (eigenvalues ν², each twice), and the homodyne-conditioned
/// eigenvalue through a pseudo-inverse.
fn numeric_spectrum(cov: &Covariance) -> [f64; 3] {
    let Covariance { a, b, c } = *cov;
    let m = Matrix4::new(a, 0.0, c, 0.0, 0.0, a, 0.0, -c, c, 0.0, b, 0.0, 0.0, -c, 0.0, b);
    let om = Matrix4::new(0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0);
    let e = m.symmetric_eigen();
    let root = e.eigenvectors * Matrix4::from_diagonal(&e.eigenvalues.map(|v| v.max(0.0).sqrt())) * e.eigenvectors.transpose();
    let k = root * om * m * om.transpose() * root;
    let k = 0.5 * (k + k.transpose());
    let mut nus: Vec<f64> = k.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    nus.sort_by(|x, y| y.total_cmp(x));
    // conditional matrix M_A − C (Π M_B Π)^+ Cᵀ with Π = diag(1, 0)
    let ma = Matrix2::new(a, 0.0, 0.0, a);
    let cm = Matrix2::new(c, 0.0, 0.0, -c);
    let pmp = DMatrix::from_row_slice(2, 2, &[b, 0.0, 0.0, 0.0]);
    let pinv = pmp.pseudo_inverse(1e-12).unwrap();
    let pinv = Matrix2::new(pinv[(0, 0)], pinv[(0, 1)], pinv[(1, 0)], pinv[(1, 1)]);
    let cond = ma - cm * pinv * cm.transpose();
    [nus[0], nus[2], cond.determinant().sqrt()]
}

/// The whole rate chain written out independently of the library.
fn rate_oracle(v: f64, gamma: f64, n: &NoiseParams, mt: f64, mst: f64) -> f64 {
    let xi_det = ((1.0 - gamma) + n.xi_el) * n.eta_det / gamma;
    let tf = mst * mst;
    let prod = n.xi_ch * mt + xi_det + (mt - tf) * v;
    let i_ab = 0.5 * (1.0 + tf * v / (1.0 + prod)).log2();
    let a = v + 1.0;
    let b = tf * v + 1.0 + n.xi_ch;
    let c2 = tf * (v * v + 2.0 * v);
    let z = ((a + b).powi(2) - 4.0 * c2).sqrt();
    let nu1 = 0.5 * (z + (b - a));
    let nu2 = 0.5 * (z - (b - a));
    let nu3 = (a * (a - c2 / b)).sqrt();
    n.beta_r * i_ab - (g_oracle(nu1) + g_oracle(nu2) - g_oracle(nu3))
}

fn key_rate_math() -> Outcome {
    let g_ok = g(1.0).abs() <= 1e-12 && (g(3.0) - 2.0).abs() <= 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut eig_err = 0.0f64;
    for _ in 0..1000 {
        let v = rng.gen_range(0.01..20.0);
        let t = rng.gen_range(0.0..=1.0);
        let xi = rng.gen_range(0.0..0.2);
        let cov = covariance_matrix(v, t, xi).unwrap();
        let closed = symplectic_eigenvalues(&cov).unwrap();
        let numeric = numeric_spectrum(&cov);
        let mut sorted12 = [closed[0], closed[1]];
        sorted12.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in [sorted12[0], sorted12[1], closed[2]].iter().zip(&numeric) {
            eig_err = eig_err.max((x - y).abs());
        }
    }
    let noise = NoiseParams::default();
    let mut chain_err = 0.0f64;
    for _ in 0..1000 {
        let v = rng.gen_range(0.5..10.0);
        let gamma = rng.gen_range(0.2..1.0);
        let mt: f64 = rng.gen_range(0.3..1.0);
        let mst = mt.sqrt() * rng.gen_range(0.97..1.0);
        let p = SkrParams { v_mod: v, noise, gamma, moments: ChannelMoments { mean_t: mt, mean_sqrt_t: mst } };
        let r = secure_key_rate(&p).unwrap();
        chain_err = chain_err.max((r.r_sec_raw - rate_oracle(v, gamma, &noise, mt, mst)).abs());
    }
    hard(
        g_ok && eig_err < 1e-9 && chain_err < 1e-12,
        format!("g(1), g(3) exact {g_ok}; eigenvalue max err {eig_err:.1e}; rate chain max err {chain_err:.1e}"),
    )
}

// ---------------------------------------------------------------- 9

fn table(n: usize, case_id: u8, gammas: &[(Variant, f64)], m: ChannelMoments) -> GammaTable {
    GammaTable {
        n_modes: n,
        case_id,
        rows: gammas
            .iter()
            .map(|(v, g)| GammaRow { variant: *v, stats: GammaStats { mean: *g, std: 0.0, count: 1 } })
            .collect(),
        moments: m,
    }
}

/// R_sec per variant across the sweep.
fn curves(cfg: &ExperimentConfig, t: &GammaTable) -> BTreeMap<&'static str, Vec<(f64, f64)>> {
    let (lines, _) = skr_table(cfg, t).unwrap();
    let mut out: BTreeMap<&'static str, Vec<(f64, f64)>> = BTreeMap::new();
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        let v = Variant::from_label(f[1]).unwrap().label();
        out.entry(v).or_default().push((f[3].parse().unwrap(), f[7].parse().unwrap()));
    }
    out
}

fn key_rate_shape() -> Outcome {
    // ⟨T⟩ from the table; the fading ratio ⟨√T⟩²/⟨T⟩ from the desk ensemble
    let mc = moments(&case0().data);
    let ratio = mc.effective_transmissivity() / mc.mean_t;
    let m = ChannelMoments { mean_t: REFERENCE_MEAN_T, mean_sqrt_t: (REFERENCE_MEAN_T * ratio).sqrt() };
    let cfg = ExperimentConfig::preset(Preset::Desk, 2, 30, SEED).unwrap();
    let g_of = |n: usize| REFERENCE_GAMMA.iter().find(|(k, _)| *k == n).unwrap().1;

    // (a) Case 0: no hardware errors, so every reconstruction scores like E_S
    let mut a_err = 0.0f64;
    for n in [10, 30, 50] {
        let gs = g_of(n)[0];
        let c = curves(&cfg, &table(n, 0, &[(Variant::Reference, gs), (Variant::Corrected, gs)], m));
        for (x, y) in c["E_R"].iter().zip(&c["E_tilde"]) {
            a_err = a_err.max((x.1 - y.1).abs());
        }
    }
    let all = |n: usize| {
        let [s, r, c] = g_of(n);
        curves(&cfg, &table(n, 2, &[(Variant::Signal, s), (Variant::Reference, r), (Variant::Corrected, c)], m))
    };
    let (c10, c30, c50) = (all(10), all(30), all(50));
    // (b)
    let b = [&c10, &c30, &c50].iter().all(|c| c["E_R"].iter().all(|p| p.1 == 0.0));
    // (c)
    let pos30 = c30["E_tilde"].iter().filter(|p| p.1 > 0.0).count();
    let pos50 = c50["E_tilde"].iter().filter(|p| p.1 > 0.0).count();
    let above = c50["E_tilde"].iter().zip(&c30["E_tilde"]).all(|(x, y)| x.1 >= y.1)
        && c50["E_tilde"].iter().zip(&c30["E_tilde"]).any(|(x, y)| x.1 > y.1);
    let c = pos30 > 0 && pos50 > 0 && above;
    // (d)
    let d = ["E_S", "E_R", "E_tilde"].iter().all(|k| c10[k].iter().all(|p| p.1 == 0.0));
    let peak = |c: &BTreeMap<&str, Vec<(f64, f64)>>| c["E_tilde"].iter().map(|p| p.1).fold(0.0, f64::max);
    hard(
        a_err <= 1e-12 && b && c && d,
        format!(
            "(a) max |ΔR| {a_err:.1e}; (b) reference null {b}; (c) corrected positive at {pos30}/{pos50} V_mod points \
             for N=30/50, peaks {:.4}/{:.4}, N=50 above {above}; (d) N=10 null {d}; T_f/⟨T⟩ = {ratio:.4}",
            peak(&c30),
            peak(&c50)
        ),
    )
}

// ---------------------------------------------------------------- 10

fn hash_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        if name == "config.json" {
            continue;
        }
        out.insert(name, hex::encode(Sha256::digest(std::fs::read(&p).unwrap())));
    }
    out
}

fn reproducibility() -> Outcome {
    let run = |dir: &Path| {
        let mut cfg = ExperimentConfig::preset(Preset::Desk, 2, 10, SEED).unwrap();
        cfg.run.instances = 20;
        cfg.tnn.epochs = 3;
        cfg.run.output_dir = dir.to_path_buf();
        let out = OutputPaths::new(dir);
        cmd_simulate(&cfg, &out).unwrap();
        cmd_train(&cfg, &out, |_, _, _| {}).unwrap();
        cmd_evaluate(&cfg, &out).unwrap();
        cmd_skr(&cfg, &out).unwrap();
        cmd_report(&cfg, &out).unwrap();
        hash_dir(dir)
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ha, hb) = (run(a.path()), run(b.path()));
    let same = ha == hb && ha.len() == 7;
    hard(same, format!("{} artifacts, hashes identical across reruns: {same}", ha.len()))
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 10] = [
        (1, "optics correctness", optics),
        (2, "Zernike calibration", zernike),
        (3, "channel statistics", channel_statistics),
        (4, "mean transmissivity (soft)", mean_transmissivity),
        (5, "TNN gradient check", gradient_check),
        (6, "case 0 harmlessness", case0_harmless),
        (7, "case 2 benefit", case2_benefit),
        (8, "key-rate math", key_rate_math),
        (9, "key-rate curve shape", key_rate_shape),
        (10, "reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (k, name, f) in criteria {
        if !args.is_empty() && !args.contains(&k) {
            continue;
        }
        let t0 = Instant::now();
        let o = f();
        let verdict = match (o.pass, o.soft) {
            (true, _) => "PASS",
            (false, true) => "FAIL (soft, flagged)",
            (false, false) => "FAIL",
        };
        if !o.pass && !o.soft {
            failed += 1;
        }
        println!("[{k:>2}] {name}: {verdict} - {} ({:.0} s)", o.detail, elapsed(t0));
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
