//! Experiment configs and the seeded multi-trial runner.

use serde::{Deserialize, Serialize};

use crate::confidence::{BoundConfig, BoundKind};
use crate::elim::run_classify;
use crate::error::{invalid, Result};
use crate::family::{FamilyKind, FamilySpec, PolicyFamily, PolicyId, WeightMode};
use crate::fdrctl::run_fdr;
use crate::harness::generators::Generator;
use crate::instance::{Instance, NoiseMode};
use crate::metrics::{family_sums, fdr, tp};
use crate::trace::{EngineOptions, Outcome, TrialResult, DEFAULT_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Classify,
    FdrControl,
    PassiveClassify,
    PassiveFdr,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Classify => "classify",
            Algorithm::FdrControl => "fdr_control",
            Algorithm::PassiveClassify => "passive_classify",
            Algorithm::PassiveFdr => "passive_fdr",
        }
    }

    pub fn is_fdr(self) -> bool {
        matches!(self, Algorithm::FdrControl | Algorithm::PassiveFdr)
    }

    pub fn is_passive(self) -> bool {
        matches!(self, Algorithm::PassiveClassify | Algorithm::PassiveFdr)
    }

    /// The passive comparator of an adaptive algorithm and vice versa.
    pub fn counterpart(self) -> Self {
        match self {
            Algorithm::Classify => Algorithm::PassiveClassify,
            Algorithm::PassiveClassify => Algorithm::Classify,
            Algorithm::FdrControl => Algorithm::PassiveFdr,
            Algorithm::PassiveFdr => Algorithm::FdrControl,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_delta() -> f64 {
    0.1
}

fn default_trials() -> usize {
    20
}

fn default_cap() -> u64 {
    DEFAULT_CAP
}

fn default_family() -> FamilyKind {
    FamilyKind::Thresholds
}

fn default_bound() -> BoundKind {
    BoundKind::GeneralVc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: Generator,
    #[serde(default = "default_family")]
    pub family: FamilyKind,
    /// 1-based item lists for an explicit family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_mode: Option<WeightMode>,
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub mode: NoiseMode,
    #[serde(default = "default_bound")]
    pub bound: BoundKind,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub cap: u64,
    #[serde(default)]
    pub binomial_batch: bool,
}

impl ExperimentConfig {
    pub fn new(generator: Generator, algorithm: Algorithm, mode: NoiseMode) -> Self {
        Self {
            generator,
            family: default_family(),
            policies: None,
            weight_mode: None,
            algorithm,
            alpha: None,
            delta: default_delta(),
            mode,
            bound: default_bound(),
            trials: default_trials(),
            seed: 0,
            cap: DEFAULT_CAP,
            binomial_batch: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.generator, Generator::BetaBand { .. }) && self.mode != NoiseMode::Persistent {
            return Err(invalid("the β-band model needs persistent noise"));
        }
        if self.algorithm.is_fdr() {
            match self.alpha {
                Some(a) if a > 0.0 && a < 1.0 => {}
                Some(a) => return Err(invalid(format!("FDR level must lie in (0, 1), got {a}"))),
                None => return Err(invalid("FDR runs need `alpha`")),
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!(
                "confidence level must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.cap == 0 {
            return Err(invalid("cap must be positive"));
        }
        self.build_family()?;
        Ok(())
    }

    pub fn build_family(&self) -> Result<PolicyFamily> {
        let spec = FamilySpec {
            kind: self.family,
            n: self.generator.n(),
            policies: self.policies.clone(),
            weight_mode: self.weight_mode,
        };
        PolicyFamily::from_spec(&spec)
    }

    pub fn bound_config(&self) -> BoundConfig {
        BoundConfig::new(self.mode, self.bound, self.generator.n())
    }

    pub fn engine_options(&self) -> EngineOptions {
        EngineOptions {
            cap: self.cap,
            binomial_batch: self.binomial_batch,
            ..EngineOptions::default()
        }
    }
}

/// Seed of trial `index` under base seed `base` (SplitMix64 finalizer).
pub fn trial_seed(base: u64, index: usize) -> u64 {
    let mut z = base.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `π*` when the maximum of `μ_π` is attained by exactly one policy.
pub fn unique_best_policy(family: &PolicyFamily, truth: &[f64]) -> Option<PolicyId> {
    let means: Vec<f64> = truth.iter().map(|e| 2.0 * e - 1.0).collect();
    unique_argmax(&family_sums(family, &means))
}

/// `Some(π*_α)` when the TP maximum over `Π_α` is unique, `Some(None)` when
/// `Π_α` is empty, `None` on ties.
pub fn unique_best_fdr_policy(family: &PolicyFamily, truth: &[f64], alpha: f64) -> Option<Option<PolicyId>> {
    let tps: Vec<f64> = family
        .ids()
        .map(|id| {
            let items = family.items(id);
            let feasible = fdr(&items, truth).map(|f| f <= alpha).unwrap_or(false);
            if feasible {
                tp(&items, truth)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    if tps.iter().all(|&v| v == f64::NEG_INFINITY) {
        return Some(None);
    }
    unique_argmax(&tps).map(Some)
}

fn unique_argmax(values: &[f64]) -> Option<PolicyId> {
    let best = (0..values.len()).max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))?;
    let ties = values.iter().filter(|&&v| v == values[best]).count();
    (ties == 1).then_some(best)
}

/// The engines with every draw observed: regions still drive elimination
/// and termination, but rejection is disabled, so the label count is the
/// number of draws (twice that for FDR control).
#[allow(clippy::too_many_arguments)]
pub fn run_passive(
    instance: &Instance,
    family: &PolicyFamily,
    algorithm: Algorithm,
    alpha: Option<f64>,
    delta: f64,
    bound: &BoundConfig,
    opts: &EngineOptions,
    seed: u64,
) -> Result<TrialResult> {
    let opts = EngineOptions {
        observe_all: true,
        ..opts.clone()
    };
    match algorithm {
        Algorithm::Classify | Algorithm::PassiveClassify => run_classify(instance, family, delta, bound, &opts, seed),
        Algorithm::FdrControl | Algorithm::PassiveFdr => {
            let alpha = alpha.ok_or_else(|| invalid("FDR runs need `alpha`"))?;
            run_fdr(instance, family, alpha, delta, bound, &opts, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub algorithm: Algorithm,
    /// Ground-truth answer; absent when the optimum is not unique.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum: Option<Option<PolicyId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    pub result: TrialResult,
}

/// One trial: instance from the generator, engine run, oracle comparison.
pub fn run_trial(cfg: &ExperimentConfig, family: &PolicyFamily, trial: usize) -> Result<TrialRecord> {
    let seed = trial_seed(cfg.seed, trial);
    let instance = cfg.generator.instance(cfg.mode, seed)?;
    let truth = instance.truth();
    let bound = cfg.bound_config();
    let mut opts = cfg.engine_options();
    let optimum = if cfg.algorithm.is_fdr() {
        let alpha = cfg.alpha.ok_or_else(|| invalid("FDR runs need `alpha`"))?;
        let opt = unique_best_fdr_policy(family, &truth, alpha);
        opts.known_feasible = matches!(opt, Some(Some(_)));
        opt
    } else {
        unique_best_policy(family, &truth).map(Some)
    };
    let result = match cfg.algorithm {
        Algorithm::Classify => run_classify(&instance, family, cfg.delta, &bound, &opts, seed)?,
        Algorithm::FdrControl => run_fdr(
            &instance,
            family,
            cfg.alpha.unwrap_or_default(),
            cfg.delta,
            &bound,
            &opts,
            seed,
        )?,
        passive => run_passive(&instance, family, passive, cfg.alpha, cfg.delta, &bound, &opts, seed)?,
    };
    let correct = optimum.map(|opt| match opt {
        Some(id) => result.winner() == Some(id),
        None => result.outcome == Outcome::Infeasible,
    });
    Ok(TrialRecord {
        trial,
        seed,
        n: family.n(),
        algorithm: cfg.algorithm,
        optimum,
        correct,
        result,
    })
}

/// All trials of a config, ordered by trial index whatever the scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let family = cfg.build_family()?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| run_trial(cfg, &family, i))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.trials).map(|i| run_trial(cfg, &family, i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tsybakov(n: usize) -> Generator {
        Generator::TsybakovThreshold {
            n,
            h: 0.8,
            noise_exponent: 0.0,
            z: 0.5,
        }
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let cfg = ExperimentConfig::from_json(
            r#"{"generator": {"kind": "tsybakov_threshold", "n": 32, "h": 0.5, "noise_exponent": 0, "z": 0.5},
                "algorithm": "classify", "mode": "stochastic"}"#,
        )
        .unwrap();
        assert_eq!(cfg.family, FamilyKind::Thresholds);
        assert_eq!(cfg.delta, 0.1);
        assert_eq!(cfg.cap, DEFAULT_CAP);
        let mut bad = cfg.clone();
        bad.algorithm = Algorithm::FdrControl;
        assert!(bad.validate().is_err());
        let band = ExperimentConfig::new(
            Generator::BetaBand {
                n: 64,
                beta: 0.8,
                band_end: 8,
            },
            Algorithm::Classify,
            NoiseMode::Stochastic,
        );
        assert!(band.validate().is_err());
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| trial_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn experiment_is_reproducible() {
        let mut cfg = ExperimentConfig::new(tsybakov(64), Algorithm::Classify, NoiseMode::Stochastic);
        cfg.trials = 6;
        cfg.seed = 42;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, r)| r.trial == i));
    }

    #[test]
    fn passive_never_uses_fewer_labels() {
        for mode in [NoiseMode::Stochastic, NoiseMode::Persistent] {
            let mut cfg = ExperimentConfig::new(tsybakov(128), Algorithm::Classify, mode);
            cfg.trials = 5;
            let adaptive = run_experiment(&cfg).unwrap();
            cfg.algorithm = Algorithm::PassiveClassify;
            let passive = run_experiment(&cfg).unwrap();
            for (a, p) in adaptive.iter().zip(&passive) {
                assert!(p.result.labels_used >= a.result.labels_used);
                if mode == NoiseMode::Persistent {
                    assert_eq!(p.result.labels_used, p.result.draws.min(128));
                }
            }
        }
    }

    #[test]
    fn passive_single_policy_stops_immediately() {
        let inst = Instance::stochastic(vec![0.2, 0.9]).unwrap();
        let fam = PolicyFamily::explicit(2, vec![vec![1]]).unwrap();
        let bound = BoundConfig::general(NoiseMode::Stochastic, 2);
        let r = run_passive(
            &inst,
            &fam,
            Algorithm::PassiveClassify,
            None,
            0.1,
            &bound,
            &EngineOptions::default(),
            0,
        )
        .unwrap();
        assert_eq!(r.winner(), Some(0));
        assert_eq!(r.epochs, 0);
    }

    #[test]
    fn unique_optimum_detection() {
        let fam = PolicyFamily::thresholds(4).unwrap();
        assert_eq!(unique_best_policy(&fam, &[0.9, 0.8, 0.1, 0.1]), Some(1));
        assert_eq!(unique_best_policy(&fam, &[0.9, 0.5, 0.1, 0.1]), None);
        assert_eq!(unique_best_fdr_policy(&fam, &[1.0, 1.0, 0.5, 0.0], 0.25), Some(Some(2)));
        assert_eq!(unique_best_fdr_policy(&fam, &[0.0; 4], 0.5), Some(None));
        assert_eq!(unique_best_fdr_policy(&fam, &[1.0, 1.0, 1.0, 0.0], 0.3), None);
    }
}
