//! Engine options and the per-trial record both engines return.

use serde::{Deserialize, Serialize};

use crate::family::PolicyId;

/// Default hard cap on draws for stochastic runs.
pub const DEFAULT_CAP: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    /// Hard cap on `t` in stochastic mode.
    pub cap: u64,
    /// Observe every draw regardless of the sampling regions (passive baseline).
    pub observe_all: bool,
    /// In persistent mode, once every item has been drawn the estimators are
    /// exact; apply one last update with zero radii before returning.
    pub exact_on_exhaustion: bool,
    /// Stochastic classification only: replace per-draw rejection by one
    /// binomial hit count per epoch.
    pub binomial_batch: bool,
    /// Caller knows the feasible set is nonempty (FDR engine): a lone
    /// uncertified survivor is returned instead of an infeasible marker.
    pub known_feasible: bool,
    pub record_events: bool,
    pub record_regions: bool,
    pub record_estimates: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            observe_all: false,
            exact_on_exhaustion: true,
            binomial_batch: false,
            known_feasible: false,
            record_events: false,
            record_regions: false,
            record_estimates: false,
        }
    }
}

impl EngineOptions {
    pub fn passive() -> Self {
        Self {
            observe_all: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Policy {
        id: PolicyId,
    },
    /// The FDR engine stopped with one active policy it never certified.
    UncertifiedSurvivor {
        id: PolicyId,
    },
    Infeasible,
}

impl Outcome {
    pub fn policy(&self) -> Option<PolicyId> {
        match *self {
            Outcome::Policy { id } | Outcome::UncertifiedSurvivor { id } => Some(id),
            Outcome::Infeasible => None,
        }
    }
}

/// One epoch boundary. FDR-only fields are absent for classification runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub k: u32,
    pub t: u64,
    pub active: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controlled: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superset_record: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_region: Option<usize>,
    pub t_region: usize,
    pub labels: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RemovalReason {
    /// Classification: another active policy's estimate beat this one by more
    /// than the pairwise radius.
    Dominated { by: PolicyId },
    /// Estimated FDR exceeds the level by more than the radius.
    FdrExceeded,
    /// A controlled policy has significantly larger true positives.
    TpDominated { by: PolicyId },
    /// Strict subset of a controlled or recorded policy.
    Subset { of: PolicyId },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub k: u32,
    pub t: u64,
    pub id: PolicyId,
    #[serde(flatten)]
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub k: u32,
    pub t: u64,
    pub id: PolicyId,
    pub fdr_hat: f64,
    pub radius: f64,
}

/// A single draw. `stream` is 0 for the I-stream, 1 for the J-stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawEvent {
    pub t: u64,
    pub stream: u8,
    pub item: usize,
    pub in_region: bool,
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSnapshot {
    pub k: u32,
    pub t: u64,
    pub active: Vec<PolicyId>,
    pub controlled: Vec<PolicyId>,
    pub s_items: Vec<usize>,
    pub t_items: Vec<usize>,
}

/// Estimates at one epoch, before that epoch's removals: sum-scale `μ̂_π`
/// for classification, `FDR̂(π)` of uncertified policies for FDR control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochEstimates {
    pub k: u32,
    pub t: u64,
    pub values: Vec<(PolicyId, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub outcome: Outcome,
    pub labels_used: u64,
    pub epochs: u32,
    pub draws: u64,
    pub cap_hit: bool,
    pub exhausted: bool,
    pub seed: u64,
    pub trace: Vec<EpochRecord>,
    pub removals: Vec<Removal>,
    pub certifications: Vec<Certification>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_tp_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_fdr_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<DrawEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<RegionSnapshot>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimates: Vec<EpochEstimates>,
}

impl TrialResult {
    pub fn winner(&self) -> Option<PolicyId> {
        self.outcome.policy()
    }

    pub fn was_removed(&self, id: PolicyId) -> bool {
        self.removals.iter().any(|r| r.id == id)
    }

    /// Epoch trace as JSON lines, followed by a summary line.
    pub fn trace_jsonl(&self) -> serde_json::Result<String> {
        let mut out = String::new();
        for rec in &self.trace {
            out.push_str(&serde_json::to_string(rec)?);
            out.push('\n');
        }
        let summary = serde_json::json!({
            "final": true,
            "outcome": self.outcome,
            "labels": self.labels_used,
            "t": self.draws,
            "epochs": self.epochs,
            "cap_hit": self.cap_hit,
            "tp_hat": self.final_tp_hat,
            "fdr_hat": self.final_fdr_hat,
            "seed": self.seed,
        });
        out.push_str(&serde_json::to_string(&summary)?);
        out.push('\n');
        Ok(out)
    }
}
