use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::evaluate::{coherent_efficiencies, GammaRow, GammaStats, GammaTable, Variant};
use super::{Checkpoint, DatasetContainer, ExperimentConfig, ExperimentError};
use crate::grid::wrap_phase;
use crate::skr::{linspace, sweep, ChannelMoments, SkrParams, SWEEP_CSV_HEADER};
use crate::tnn::{evaluate_variances, train_with, wrapped_variances, PhaseSet, TnnModel, VarianceReport};
use crate::wfe::{generate_dataset, CrossLeakageConfig, Simulator};

const HASH_PREFIX: &str = "# config_sha256: ";

/// File names inside an output directory.
#[derive(Clone, Debug)]
pub struct OutputPaths {
    pub dir: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.dir.join("config.json")
    }
    pub fn dataset(&self) -> PathBuf {
        self.dir.join("dataset.qwfc")
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join("model.qwfm")
    }
    pub fn train_loss(&self) -> PathBuf {
        self.dir.join("train_loss.csv")
    }
    pub fn variances(&self) -> PathBuf {
        self.dir.join("variances.csv")
    }
    pub fn coherence(&self) -> PathBuf {
        self.dir.join("coherence.csv")
    }
    pub fn skr(&self) -> PathBuf {
        self.dir.join("skr_sweep.csv")
    }
    pub fn report(&self) -> PathBuf {
        self.dir.join("report.md")
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ExperimentError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| ExperimentError::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>, ExperimentError> {
    fs::read(path).map_err(|e| ExperimentError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))
}

fn csv(hash: &str, header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = format!("{HASH_PREFIX}{hash}\n{header}\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

/// The hash line written at the top of every CSV output.
pub fn read_csv_hash(text: &str) -> Option<&str> {
    text.lines().next()?.strip_prefix(HASH_PREFIX).map(str::trim)
}

pub fn load_dataset(path: &Path) -> Result<DatasetContainer, ExperimentError> {
    DatasetContainer::decode(&read(path)?).map_err(|e| ExperimentError::format(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ExperimentError> {
    Checkpoint::decode(&read(path)?).map_err(|e| ExperimentError::format(path, e))
}

fn check_modes(cfg: &ExperimentConfig, data: &DatasetContainer) -> Result<(), ExperimentError> {
    let d = &data.dataset;
    if d.n_modes != cfg.run.n_modes || d.case_id != cfg.run.case_id {
        return Err(ExperimentError::Validation(format!(
            "dataset has N = {}, case {}; config asks for N = {}, case {}",
            d.n_modes, d.case_id, cfg.run.n_modes, cfg.run.case_id
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SimulateSummary {
    pub records: usize,
    pub n_train: usize,
    pub mean_t: f64,
    /// Var(wrap(Δφ_R − Δφ_S)) per mode over all records.
    pub default_var: Vec<f64>,
    pub config_hash: String,
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: &OutputPaths) -> Result<SimulateSummary, ExperimentError> {
    cfg.validate()?;
    let r = &cfg.run;
    let sim = Simulator::new(&cfg.channel, &cfg.transmitter, r.n_modes)?;
    let leakage = CrossLeakageConfig::synthesize(r.n_modes, &cfg.leakage)?;
    let dataset = generate_dataset(&sim, r.case_id, r.instances, r.split, r.base_seed, &leakage)?;
    let recs = &dataset.records;
    let mean_t = recs.iter().map(|x| x.t).sum::<f64>() / recs.len() as f64;
    let phases_r: Vec<Vec<f64>> = recs.iter().map(|x| x.phases_r.clone()).collect();
    let phases_s: Vec<Vec<f64>> = recs.iter().map(|x| x.phases_s.clone()).collect();
    let default_var = wrapped_variances(&phases_r, &phases_s)?;
    let summary = SimulateSummary {
        records: recs.len(),
        n_train: dataset.n_train,
        mean_t,
        default_var,
        config_hash: cfg.hash_hex(),
    };
    write(&out.dataset(), &DatasetContainer::new(cfg, dataset).encode())?;
    write(&out.config(), cfg.to_json().as_bytes())?;
    Ok(summary)
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub epochs: usize,
    pub final_train_loss: Option<f64>,
    pub final_test_loss: Option<f64>,
    pub param_count: usize,
}

/// Trains on the dataset's training split; `on_epoch` sees
/// `(epoch, train_loss, test_loss)`.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    out: &OutputPaths,
    on_epoch: impl FnMut(usize, f64, Option<f64>),
) -> Result<TrainSummary, ExperimentError> {
    cfg.validate()?;
    let data = load_dataset(&out.dataset())?;
    check_modes(cfg, &data)?;
    let train_set = PhaseSet::from_records(data.dataset.train())?;
    let test_set = PhaseSet::from_records(data.dataset.test())?;
    let mut model = TnnModel::new(cfg.tnn.clone())?;
    let history = train_with(&mut model, &train_set, Some(&test_set), on_epoch)?;

    let hash = cfg.hash_hex();
    let rows = history.train_loss.iter().enumerate().map(|(i, l)| {
        let t = history.test_loss.get(i).map(|v| format!("{v:.17e}")).unwrap_or_default();
        format!("{i},{l:.17e},{t}")
    });
    write(&out.train_loss(), csv(&hash, "epoch,train_loss,test_loss", rows).as_bytes())?;
    let summary = TrainSummary {
        epochs: history.train_loss.len(),
        final_train_loss: history.train_loss.last().copied(),
        final_test_loss: history.test_loss.last().copied(),
        param_count: model.param_count(),
    };
    let ckpt = Checkpoint { config_hash: cfg.hash(), model, history };
    write(&out.checkpoint(), &ckpt.encode())?;
    Ok(summary)
}

#[derive(Clone, Debug)]
pub struct EvaluateSummary {
    pub variances: VarianceReport,
    pub gamma: GammaTable,
}

pub fn cmd_evaluate(cfg: &ExperimentConfig, out: &OutputPaths) -> Result<EvaluateSummary, ExperimentError> {
    cfg.validate()?;
    let data = load_dataset(&out.dataset())?;
    check_modes(cfg, &data)?;
    let ckpt = load_checkpoint(&out.checkpoint())?;
    let model = ckpt.model;
    if model.n_modes() != data.dataset.n_modes {
        return Err(ExperimentError::Validation(format!(
            "checkpoint N = {} but dataset N = {}",
            model.n_modes(),
            data.dataset.n_modes
        )));
    }
    let test = data.dataset.test();
    let variances = evaluate_variances(test, &model)?;

    // regenerate fields with the physics that produced the dataset
    let physics = data.config().map_err(|e| ExperimentError::format(&out.dataset(), e))?;
    let n = data.dataset.n_modes;
    let sim = Simulator::new(&physics.channel, &physics.transmitter, n)?;
    let leakage = CrossLeakageConfig::synthesize(n, &physics.leakage)?;
    let set = PhaseSet::from_records(test)?;
    let pred = model.predict(set.inputs.view())?;
    let predicted: Vec<Vec<f64>> = pred.rows().into_iter().map(|r| r.iter().map(|p| wrap_phase(*p)).collect()).collect();
    let gammas = coherent_efficiencies(&sim, test, &predicted, &leakage, cfg.skr.coherence, cfg.skr.anchor_global_phase)?;
    let ts: Vec<f64> = data.dataset.records.iter().map(|r| r.t).collect();
    let moments = ChannelMoments::from_samples(&ts)?;
    let rows = Variant::ALL
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let xs: Vec<f64> = gammas.iter().map(|g| g[k]).collect();
            GammaRow { variant: *v, stats: GammaStats::from_samples(&xs) }
        })
        .collect();
    let gamma = GammaTable { n_modes: n, case_id: data.dataset.case_id, rows, moments };

    let hash = cfg.hash_hex();
    let modes = sim.basis().spec().modes.clone();
    let var_rows = (0..n).map(|k| {
        let (m, nn) = modes[k];
        format!("{k},{m},{nn},{:.17e},{:.17e}", variances.default_var[k], variances.correction_var[k])
    });
    write(&out.variances(), csv(&hash, "mode,m,n,default_var,correction_var", var_rows).as_bytes())?;
    write(&out.coherence(), csv(&hash, GammaTable::CSV_HEADER, gamma.csv_rows()).as_bytes())?;
    Ok(EvaluateSummary { variances, gamma })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariantRate {
    pub variant: Variant,
    pub gamma: f64,
    pub max_rate: f64,
    /// First and last V_mod with R_sec > 0.
    pub positive_span: Option<(f64, f64)>,
}

impl VariantRate {
    fn new(variant: Variant, gamma: f64) -> Self {
        Self { variant, gamma, max_rate: 0.0, positive_span: None }
    }

    fn add(&mut self, v_mod: f64, r_sec: f64) {
        self.max_rate = self.max_rate.max(r_sec);
        if r_sec > 0.0 {
            self.positive_span = Some(self.positive_span.map_or((v_mod, v_mod), |(lo, _)| (lo, v_mod)));
        }
    }
}

#[derive(Clone, Debug)]
pub struct SkrSummary {
    pub variants: Vec<VariantRate>,
}

pub const SKR_CSV_HEADER_PREFIX: &str = "N,variant,gamma";

/// Key-rate sweep for every variant of a coherence table.
pub fn skr_table(
    cfg: &ExperimentConfig,
    table: &GammaTable,
) -> Result<(Vec<String>, SkrSummary), ExperimentError> {
    if table.rows.is_empty() {
        return Err(ExperimentError::Validation("coherence table is empty".into()));
    }
    let v_mods = linspace(cfg.skr.v_mod_range[0], cfg.skr.v_mod_range[1], cfg.skr.v_mod_points);
    let mut lines = Vec::new();
    let mut variants = Vec::new();
    for row in &table.rows {
        let base = SkrParams { v_mod: v_mods[0], noise: cfg.skr.noise, gamma: row.stats.mean, moments: table.moments };
        let results = sweep(&base, &v_mods)?;
        let mut rate = VariantRate::new(row.variant, row.stats.mean);
        for r in &results {
            lines.push(format!(
                "{},{},{:.17e},{}",
                table.n_modes,
                row.variant.label(),
                row.stats.mean,
                crate::skr::sweep_csv_row(r)
            ));
            rate.add(r.v_mod, r.r_sec);
        }
        variants.push(rate);
    }
    Ok((lines, SkrSummary { variants }))
}

pub fn cmd_skr(cfg: &ExperimentConfig, out: &OutputPaths) -> Result<SkrSummary, ExperimentError> {
    cfg.validate()?;
    let table = GammaTable::parse_csv(&read_text(&out.coherence())?)?;
    let (lines, summary) = skr_table(cfg, &table)?;
    let header = format!("{SKR_CSV_HEADER_PREFIX},{SWEEP_CSV_HEADER}");
    write(&out.skr(), csv(&cfg.hash_hex(), &header, lines).as_bytes())?;
    Ok(summary)
}

/// Concatenates whatever CSV outputs exist into one markdown summary.
pub fn cmd_report(cfg: &ExperimentConfig, out: &OutputPaths) -> Result<PathBuf, ExperimentError> {
    let mut md = String::new();
    let hash = cfg.hash_hex();
    let _ = writeln!(md, "# Run report\n\nconfig_sha256: `{hash}`\n");
    let r = &cfg.run;
    let _ = writeln!(
        md,
        "preset {:?}, case {}, N = {}, {} instances, seed {}\n",
        r.preset, r.case_id, r.n_modes, r.instances, r.base_seed
    );

    if let Ok(text) = read_text(&out.coherence()) {
        let t = GammaTable::parse_csv(&text)?;
        let _ = writeln!(md, "## Mean coherent efficiency\n\n| variant | mean | std | count |\n|---|---|---|---|");
        for row in &t.rows {
            let s = row.stats;
            let _ = writeln!(md, "| {} | {:.4} | {:.4} | {} |", row.variant.label(), s.mean, s.std, s.count);
        }
        let m = t.moments;
        let _ = writeln!(md, "\n⟨T⟩ = {:.4}, ⟨√T⟩² = {:.4}\n", m.mean_t, m.mean_sqrt_t * m.mean_sqrt_t);
        if (m.mean_t - 0.652).abs() > 0.05 {
            let _ = writeln!(
                md,
                "⟨T⟩ is more than 0.05 from 0.652: the transmissivity is sensitive to grid resolution and \
                 the screen partition; a finer grid (`--preset paper`) may help.\n"
            );
        }
    }
    if let Ok(text) = read_text(&out.variances()) {
        let _ = writeln!(md, "## Per-mode phase-error variance (rad²)\n\n| mode | m | n | default | correction |");
        let _ = writeln!(md, "|---|---|---|---|---|");
        let mut better = 0;
        let mut total = 0;
        for line in text.lines().skip(2) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                continue;
            }
            let (d, c) = (f[3].parse::<f64>().unwrap_or(f64::NAN), f[4].parse::<f64>().unwrap_or(f64::NAN));
            total += 1;
            if c < d {
                better += 1;
            }
            let _ = writeln!(md, "| {} | {} | {} | {d:.3e} | {c:.3e} |", f[0], f[1], f[2]);
        }
        let _ = writeln!(md, "\ncorrection below default in {better} of {total} modes\n");
    }
    if let Ok(text) = read_text(&out.skr()) {
        let _ = writeln!(md, "## Secure key rate\n\n| variant | γ̄ | max R_sec | V_mod with R_sec > 0 |\n|---|---|---|---|");
        let mut seen: Vec<VariantRate> = Vec::new();
        for line in text.lines().skip(2) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() < 8 {
                continue;
            }
            let (g, v, rs) = (
                f[2].parse::<f64>().unwrap_or(f64::NAN),
                f[3].parse::<f64>().unwrap_or(f64::NAN),
                f[7].parse::<f64>().unwrap_or(f64::NAN),
            );
            let Some(variant) = Variant::from_label(f[1]) else { continue };
            match seen.iter_mut().find(|e| e.variant == variant) {
                Some(e) => e.add(v, rs),
                None => {
                    let mut e = VariantRate::new(variant, g);
                    e.add(v, rs);
                    seen.push(e);
                }
            }
        }
        for e in seen {
            let span = e.positive_span.map_or("none".to_string(), |(lo, hi)| format!("[{lo:.3}, {hi:.3}]"));
            let _ = writeln!(md, "| {} | {:.4} | {:.4e} | {span} |", e.variant.label(), e.gamma, e.max_rate);
        }
        md.push('\n');
    }
    if let Ok(text) = read_text(&out.train_loss()) {
        let last = text.lines().rev().find(|l| !l.starts_with('#')).unwrap_or("");
        let _ = writeln!(md, "## Training\n\nlast epoch: `{last}`\n");
    }
    for (name, path) in [
        ("train_loss.csv", out.train_loss()),
        ("variances.csv", out.variances()),
        ("coherence.csv", out.coherence()),
        ("skr_sweep.csv", out.skr()),
    ] {
        if let Ok(text) = read_text(&path) {
            let _ = writeln!(md, "## {name}\n\n```csv\n{}```\n", text);
        }
    }
    let path = out.report();
    write(&path, md.as_bytes())?;
    Ok(path)
}
