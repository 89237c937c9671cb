//! Monte Carlo coverage of the confidence radii.
//!
//! Each replication draws `t` indices (with or without replacement per the
//! instance's noise mode), observes every draw, and checks whether any
//! policy's estimate misses its true value by more than its radius.

use serde::{Deserialize, Serialize};

use crate::confidence::{conf_threshold_pair, BoundConfig, BoundKind};
use crate::error::{invalid, Result};
use crate::family::{FamilyKind, FamilySpec, PolicyFamily, PolicyId, WeightMode};
use crate::harness::generators::Generator;
use crate::harness::runner::{trial_seed, unique_best_policy};
use crate::instance::{Instance, NoiseMode};
use crate::metrics::family_sums;
use crate::sampling::{stream_rng, IndexStream, LabelOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageKind {
    /// `|μ̂_π - μ_π| ≤ C₁` for every policy.
    Single,
    /// Differences against a fixed anchor, `≤ C₂`.
    Pair,
    /// Threshold differences against a fixed anchor on the averaged scale.
    ThresholdPair,
}

impl CoverageKind {
    pub fn name(self) -> &'static str {
        match self {
            CoverageKind::Single => "single",
            CoverageKind::Pair => "pair",
            CoverageKind::ThresholdPair => "threshold_pair",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub kind: CoverageKind,
    pub mode: NoiseMode,
    pub n: usize,
    pub policies: usize,
    pub t: u64,
    pub delta: f64,
    pub replications: usize,
    pub violations: usize,
    pub frequency: f64,
    /// Largest observed deviation-to-radius ratio over all replications.
    pub worst_ratio: f64,
}

impl CoverageReport {
    pub fn covers(&self) -> bool {
        self.frequency <= self.delta
    }
}

/// Per-item sums of `2Y - 1` over `t` draws, every draw observed.
fn signed_item_sums(instance: &Instance, t: u64, seed: u64) -> Result<Vec<f64>> {
    let n = instance.n();
    let mut stream = IndexStream::new(instance.mode().into(), n, stream_rng(seed, 0));
    let mut oracle = LabelOracle::new(instance, stream_rng(seed, 1));
    let mut sums = vec![0.0; n];
    for _ in 0..t {
        let i = stream.next_index()?;
        sums[i] += 2.0 * f64::from(oracle.observe(i)?) - 1.0;
    }
    Ok(sums)
}

/// Runs `replications` independent replications of one coverage check.
/// `anchor` defaults to `π*` (lowest id on ties) for the pairwise kinds.
#[allow(clippy::too_many_arguments)]
pub fn coverage(
    kind: CoverageKind,
    instance: &Instance,
    family: &PolicyFamily,
    t: u64,
    delta: f64,
    replications: usize,
    seed: u64,
    anchor: Option<PolicyId>,
) -> Result<CoverageReport> {
    let n = family.n();
    if instance.n() != n {
        return Err(invalid("instance and family disagree on n"));
    }
    if t == 0 {
        return Err(invalid("coverage needs t ≥ 1"));
    }
    if instance.mode() == NoiseMode::Persistent && t > n as u64 {
        return Err(invalid(format!("persistent draws are limited to t ≤ n = {n}")));
    }
    if kind == CoverageKind::ThresholdPair && family.kind() != FamilyKind::Thresholds {
        return Err(invalid("threshold coverage needs a thresholds family"));
    }
    let bound = BoundConfig::new(instance.mode(), BoundKind::GeneralVc, n);
    let truth: Vec<f64> = instance.truth().iter().map(|e| 2.0 * e - 1.0).collect();
    let mu = family_sums(family, &truth);
    let ids: Vec<PolicyId> = family.ids().collect();
    let anchor = match anchor {
        Some(a) => {
            family.check_id(a)?;
            a
        }
        None => unique_best_policy(family, &instance.truth())
            .unwrap_or_else(|| crate::metrics::best_policy(family, &instance.truth())),
    };
    let radii: Vec<f64> = ids
        .iter()
        .map(|&id| match kind {
            CoverageKind::Single => bound.single_radius(family, id, t, delta),
            CoverageKind::Pair => bound.pair_radius(family, anchor, id, t, delta),
            CoverageKind::ThresholdPair => conf_threshold_pair(family.size(anchor), family.size(id), n, t, delta),
        })
        .collect::<Result<_>>()?;

    let scale = n as f64 / t as f64;
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for rep in 0..replications {
        let sums = signed_item_sums(instance, t, trial_seed(seed, rep))?;
        let est: Vec<f64> = family.policy_sums(&sums, &ids).into_iter().map(|s| scale * s).collect();
        let mut violated = false;
        for &id in &ids {
            let dev = match kind {
                CoverageKind::Single => (est[id] - mu[id]).abs(),
                CoverageKind::Pair if id == anchor => continue,
                CoverageKind::Pair => ((est[anchor] - est[id]) - (mu[anchor] - mu[id])).abs(),
                CoverageKind::ThresholdPair if id == anchor => continue,
                CoverageKind::ThresholdPair => ((est[anchor] - est[id]) - (mu[anchor] - mu[id])).abs() / n as f64,
            };
            if radii[id] > 0.0 {
                worst_ratio = worst_ratio.max(dev / radii[id]);
            }
            if dev > radii[id] {
                violated = true;
            }
        }
        violations += usize::from(violated);
    }
    Ok(CoverageReport {
        kind,
        mode: instance.mode(),
        n,
        policies: family.len(),
        t,
        delta,
        replications,
        violations,
        frequency: if replications == 0 {
            0.0
        } else {
            violations as f64 / replications as f64
        },
        worst_ratio,
    })
}

fn default_replications() -> usize {
    1000
}

/// A batch of coverage checks over kinds and draw counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub generator: Generator,
    pub family: FamilyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_mode: Option<WeightMode>,
    pub mode: NoiseMode,
    pub kinds: Vec<CoverageKind>,
    pub ts: Vec<u64>,
    pub delta: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<PolicyId>,
}

impl CoverageConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn run(&self) -> Result<Vec<CoverageReport>> {
        let family = PolicyFamily::from_spec(&FamilySpec {
            kind: self.family,
            n: self.generator.n(),
            policies: self.policies.clone(),
            weight_mode: self.weight_mode,
        })?;
        let instance = self.generator.instance(self.mode, self.seed)?;
        let mut out = Vec::new();
        for &kind in &self.kinds {
            for &t in &self.ts {
                out.push(coverage(
                    kind,
                    &instance,
                    &family,
                    t,
                    self.delta,
                    self.replications,
                    self.seed,
                    self.anchor,
                )?);
            }
        }
        Ok(out)
    }
}
