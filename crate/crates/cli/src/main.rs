use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use elimfdr::harness::{
    run_experiment, sweep, to_csv, Algorithm, CoverageConfig, ExperimentConfig, Generator, SweepConfig, SweepRow,
    TrialRecord,
};
use elimfdr::instance::NoiseMode;
use elimfdr::metrics::complexity_predictors;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "elimfdr",
    version,
    about = "Adaptive classification and FDR control over set families"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Action elimination for classification; writes per-trial JSONL traces.
    Classify(Common),
    /// Active FDR control; writes per-trial JSONL traces.
    Fdr(Common),
    /// Sample-complexity sweep over n and algorithms; writes CSV.
    Sweep(Common),
    /// Monte Carlo coverage of the confidence radii; writes JSONL.
    Coverage(Common),
    /// Ground-truth complexity predictors; writes JSON.
    Predict(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trials (replications for `coverage`).
    #[arg(long)]
    trials: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<NoiseMode>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Hard cap on draws in stochastic runs.
    #[arg(long)]
    cap: Option<u64>,
    /// Exit nonzero if a success-rate, dominance or coverage check fails.
    #[arg(long)]
    check: bool,
}

impl Common {
    fn read_config(&self) -> Result<Option<String>> {
        self.config
            .as_ref()
            .map(|p| fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
            .transpose()
    }

    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = Some(v);
        }
        if let Some(v) = self.cap {
            cfg.cap = v;
        }
    }

    fn experiment(&self, default: impl FnOnce() -> ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = match self.read_config()? {
            Some(text) => ExperimentConfig::from_json(&text)?,
            None => default(),
        };
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    fn write(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => write_file(path, text),
            None => {
                std::io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn default_classify() -> ExperimentConfig {
    let generator = Generator::TsybakovThreshold {
        n: 256,
        h: 0.5,
        noise_exponent: 0.0,
        z: 0.5,
    };
    ExperimentConfig::new(generator, Algorithm::Classify, NoiseMode::Stochastic)
}

fn default_fdr() -> ExperimentConfig {
    let generator = Generator::BetaBand {
        n: 512,
        beta: 0.8,
        band_end: 20,
    };
    let mut cfg = ExperimentConfig::new(generator, Algorithm::FdrControl, NoiseMode::Persistent);
    cfg.alpha = Some(0.7);
    cfg
}

/// Epoch records tagged with the trial index, then one summary line.
fn trials_jsonl(records: &[TrialRecord]) -> Result<String> {
    let mut out = String::new();
    for rec in records {
        for epoch in &rec.result.trace {
            let mut v = serde_json::to_value(epoch)?;
            v["trial"] = json!(rec.trial);
            out.push_str(&v.to_string());
            out.push('\n');
        }
        let r = &rec.result;
        let summary = json!({
            "final": true,
            "trial": rec.trial,
            "seed": rec.seed,
            "algorithm": rec.algorithm,
            "outcome": r.outcome,
            "labels": r.labels_used,
            "t": r.draws,
            "epochs": r.epochs,
            "cap_hit": r.cap_hit,
            "tp_hat": r.final_tp_hat,
            "fdr_hat": r.final_fdr_hat,
            "optimum": rec.optimum,
            "correct": rec.correct,
        });
        out.push_str(&summary.to_string());
        out.push('\n');
    }
    Ok(out)
}

fn run_engine(args: &Common, fdr: bool) -> Result<bool> {
    let cfg = args.experiment(if fdr { default_fdr } else { default_classify })?;
    if cfg.algorithm.is_fdr() != fdr {
        bail!(
            "config algorithm `{}` does not belong to this subcommand",
            cfg.algorithm
        );
    }
    let records = run_experiment(&cfg)?;
    args.write(&trials_jsonl(&records)?)?;
    let row = SweepRow::summarize(&cfg, &records);
    eprintln!(
        "{} n={} trials={} mean_labels={} median_labels={} success_rate={} cap_hits={}",
        cfg.algorithm,
        row.n,
        row.trials,
        row.mean_labels,
        row.median_labels,
        row.success_rate.map_or("n/a".into(), |s| s.to_string()),
        row.cap_hits
    );
    Ok(row.success_rate.is_none_or(|s| s >= 1.0 - cfg.delta))
}

fn run_sweep(args: &Common) -> Result<bool> {
    let text = args.read_config()?.context("sweep needs --config")?;
    let mut cfg = SweepConfig::from_json(&text)?;
    args.apply(&mut cfg.base);
    let rows = sweep(&cfg)?;
    args.write(&to_csv(&rows))?;
    let mut ok = true;
    for row in &rows {
        if row.success_rate.is_some_and(|s| s < 1.0 - cfg.base.delta) {
            eprintln!(
                "check failed: {} n={} success rate {:?}",
                row.algorithm, row.n, row.success_rate
            );
            ok = false;
        }
        if !row.algorithm.is_passive() {
            let passive = rows
                .iter()
                .find(|p| p.n == row.n && p.algorithm == row.algorithm.counterpart());
            if let Some(p) = passive.filter(|p| p.mean_labels < row.mean_labels) {
                eprintln!(
                    "check failed: n={} adaptive mean {} exceeds passive mean {}",
                    row.n, row.mean_labels, p.mean_labels
                );
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn run_coverage(args: &Common) -> Result<bool> {
    let text = args.read_config()?.context("coverage needs --config")?;
    let mut cfg = CoverageConfig::from_json(&text)?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.trials {
        cfg.replications = v;
    }
    if let Some(v) = args.mode {
        cfg.mode = v;
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    let reports = cfg.run()?;
    let mut out = String::new();
    for r in &reports {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
        eprintln!(
            "{} {} t={} violations={}/{} frequency={} worst_ratio={}",
            r.kind.name(),
            r.mode,
            r.t,
            r.violations,
            r.replications,
            r.frequency,
            r.worst_ratio
        );
    }
    args.write(&out)?;
    Ok(reports.iter().all(|r| r.covers()))
}

fn run_predict(args: &Common) -> Result<bool> {
    let cfg = args.experiment(default_fdr)?;
    let family = cfg.build_family()?;
    let instance = cfg.generator.instance(cfg.mode, cfg.seed)?;
    let alpha = cfg.alpha.unwrap_or(0.5);
    let predictors = complexity_predictors(&family, &instance.truth(), alpha, cfg.delta)?;
    let mut v: Value = serde_json::to_value(&predictors)?;
    v["alpha"] = json!(alpha);
    v["delta"] = json!(cfg.delta);
    v["n"] = json!(family.n());
    args.write(&format!("{}\n", serde_json::to_string_pretty(&v)?))?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, result) = match &cli.command {
        Command::Classify(a) => (a, run_engine(a, false)),
        Command::Fdr(a) => (a, run_engine(a, true)),
        Command::Sweep(a) => (a, run_sweep(a)),
        Command::Coverage(a) => (a, run_coverage(a)),
        Command::Predict(a) => (a, run_predict(a)),
    };
    match result {
        Ok(passed) if passed || !args.check => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
