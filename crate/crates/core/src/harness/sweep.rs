//! Sample-complexity sweeps over `n` and algorithms, written as CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::harness::generators::Generator;
use crate::harness::runner::{run_experiment, Algorithm, ExperimentConfig, TrialRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Template experiment; its generator's `n` and its algorithm are
    /// replaced by each grid point.
    pub base: ExperimentConfig,
    pub ns: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if cfg.ns.is_empty() || cfg.algorithms.is_empty() {
            return Err(invalid("a sweep needs at least one n and one algorithm"));
        }
        Ok(cfg)
    }

    /// Grid points in row order: `n` outer, algorithm inner.
    pub fn points(&self) -> Result<Vec<ExperimentConfig>> {
        let mut out = Vec::with_capacity(self.ns.len() * self.algorithms.len());
        for &n in &self.ns {
            let generator = self.base.generator.with_n(n)?;
            for &algorithm in &self.algorithms {
                let cfg = ExperimentConfig {
                    generator: generator.clone(),
                    algorithm,
                    ..self.base.clone()
                };
                cfg.validate()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub generator: Generator,
    pub n: usize,
    pub algorithm: Algorithm,
    pub mean_labels: f64,
    pub median_labels: f64,
    /// Fraction of trials with a unique optimum that returned it; `None`
    /// when no trial had a unique optimum.
    pub success_rate: Option<f64>,
    pub cap_hits: usize,
    pub trials: usize,
    pub seed: u64,
}

impl SweepRow {
    pub fn summarize(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Self {
        let mut labels: Vec<u64> = records.iter().map(|r| r.result.labels_used).collect();
        labels.sort_unstable();
        let count = labels.len();
        let mean_labels = if count == 0 {
            0.0
        } else {
            labels.iter().map(|&l| l as f64).sum::<f64>() / count as f64
        };
        let median_labels = match count {
            0 => 0.0,
            c if c % 2 == 1 => labels[c / 2] as f64,
            c => (labels[c / 2 - 1] as f64 + labels[c / 2] as f64) / 2.0,
        };
        let judged: Vec<bool> = records.iter().filter_map(|r| r.correct).collect();
        let success_rate =
            (!judged.is_empty()).then(|| judged.iter().filter(|&&c| c).count() as f64 / judged.len() as f64);
        Self {
            generator: cfg.generator.clone(),
            n: cfg.generator.n(),
            algorithm: cfg.algorithm,
            mean_labels,
            median_labels,
            success_rate,
            cap_hits: records.iter().filter(|r| r.result.cap_hit).count(),
            trials: records.len(),
            seed: cfg.seed,
        }
    }
}

pub const CSV_HEADER: &str =
    "generator,h,noise_exponent,z,beta,band_end,n,algorithm,mean_labels,median_labels,success_rate,cap_hits,trials,seed";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Fixed column order; floats in shortest round-trip decimal form.
pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let (h, a, z, beta, band_end) = match row.generator {
            Generator::TsybakovThreshold {
                h, noise_exponent, z, ..
            } => (Some(h), Some(noise_exponent), Some(z), None, None),
            Generator::BetaBand { beta, band_end, .. } => (None, None, None, Some(beta), Some(band_end)),
            Generator::ExplicitEta { .. } => (None, None, None, None, None),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.generator.name(),
            opt(h),
            opt(a),
            opt(z),
            opt(beta),
            opt(band_end),
            row.n,
            row.algorithm,
            row.mean_labels,
            row.median_labels,
            opt(row.success_rate),
            row.cap_hits,
            row.trials,
            row.seed
        );
    }
    out
}

/// Runs every grid point; rows come back in grid order.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.points()?
        .iter()
        .map(|point| Ok(SweepRow::summarize(point, &run_experiment(point)?)))
        .collect()
}
