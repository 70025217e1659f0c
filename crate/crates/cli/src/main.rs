use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qwfc_core::experiment::{
    cmd_evaluate, cmd_report, cmd_simulate, cmd_skr, cmd_train, ExperimentConfig, ExperimentError, OutputPaths,
    Preset,
};

#[derive(Parser)]
#[command(name = "qwfc", version, about = "Wavefront-correction experiments for satellite CV-QKD downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Opts {
    /// JSON experiment config; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scale preset used when no config file is given.
    #[arg(long, global = true, default_value = "desk")]
    preset: Preset,
    #[arg(long = "case", global = true, value_parser = clap::value_parser!(u8).range(0..=3))]
    case_id: Option<u8>,
    /// Number of HG modes (10, 30 or 50).
    #[arg(long, global = true)]
    modes: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the instance count.
    #[arg(long, global = true)]
    instances: Option<usize>,
    /// Override the training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Print training progress every this many epochs (0 = silent).
    #[arg(long, global = true, default_value_t = 10)]
    log_every: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the Monte-Carlo dataset.
    Simulate,
    /// Train the transformer on the dataset's training split.
    Train,
    /// Per-mode variances and coherent efficiencies on the test split.
    Evaluate,
    /// Key-rate sweep over V_mod from the coherence table.
    Skr,
    /// Collect every output into report.md.
    Report,
    /// Print the resolved configuration as JSON.
    Config,
}

fn resolve(o: &Opts) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &o.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::preset(o.preset, o.case_id.unwrap_or(0), o.modes.unwrap_or(10), o.seed.unwrap_or(0))?,
    };
    if let Some(c) = o.case_id {
        cfg.run.case_id = c;
    }
    if let Some(n) = o.modes {
        cfg = cfg.with_modes(n)?;
    }
    if let Some(s) = o.seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(dir) = &o.out {
        cfg.run.output_dir = dir.clone();
    }
    if let Some(n) = o.instances {
        cfg.run.instances = n;
    }
    if let Some(e) = o.epochs {
        cfg.tnn.epochs = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), ExperimentError> {
    let cfg = resolve(&cli.opts)?;
    let out = OutputPaths::new(&cfg.run.output_dir);
    match cli.command {
        Command::Config => println!("{}", cfg.to_json()),
        Command::Simulate => {
            let s = cmd_simulate(&cfg, &out)?;
            println!("wrote {} ({} records, {} train)", out.dataset().display(), s.records, s.n_train);
            println!("config_sha256 {}", s.config_hash);
            println!("mean T {:.4}", s.mean_t);
            let preview: Vec<String> = s.default_var.iter().take(8).map(|v| format!("{v:.3e}")).collect();
            println!("default variance, first modes (rad²): {}", preview.join(" "));
        }
        Command::Train => {
            let every = cli.opts.log_every;
            let s = cmd_train(&cfg, &out, |epoch, train, test| {
                if every > 0 && (epoch + 1) % every == 0 {
                    let test = test.map_or(String::new(), |t| format!(" test {t:.5}"));
                    eprintln!("epoch {:>5} train {train:.5}{test}", epoch + 1);
                }
            })?;
            println!("wrote {} ({} parameters, {} epochs)", out.checkpoint().display(), s.param_count, s.epochs);
            if let (Some(a), Some(b)) = (s.final_train_loss, s.final_test_loss) {
                println!("final loss train {a:.5} test {b:.5}");
            }
        }
        Command::Evaluate => {
            let s = cmd_evaluate(&cfg, &out)?;
            let v = &s.variances;
            println!("correction below default in {:.0}% of modes", 100.0 * v.improved_fraction());
            for row in &s.gamma.rows {
                println!("gamma {:<8} {:.4} ± {:.4}", row.variant.label(), row.stats.mean, row.stats.std);
            }
            println!("wrote {} and {}", out.variances().display(), out.coherence().display());
        }
        Command::Skr => {
            let s = cmd_skr(&cfg, &out)?;
            for e in &s.variants {
                let span = e
                    .positive_span
                    .map_or("null".to_string(), |(lo, hi)| format!("positive on V_mod [{lo:.3}, {hi:.3}]"));
                println!("{:<8} gamma {:.4} max R_sec {:.4e} {span}", e.variant.label(), e.gamma, e.max_rate);
            }
            println!("wrote {}", out.skr().display());
        }
        Command::Report => println!("wrote {}", cmd_report(&cfg, &out)?.display()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
