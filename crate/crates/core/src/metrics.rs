//! Ground-truth functionals, brute-force optima, and the sample-complexity
//! predictors used as diagnostics.
//!
//! Policies passed as item slices are 0-based.

use serde::{Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::family::{PolicyFamily, PolicyId};

/// Expected fraction of misclassified items when `π` is labelled positive.
pub fn risk(pi: &[usize], eta: &[f64]) -> f64 {
    let n = eta.len() as f64;
    let mut inside = vec![false; eta.len()];
    for &i in pi {
        inside[i] = true;
    }
    let wrong: f64 = eta
        .iter()
        .zip(&inside)
        .map(|(&e, &isin)| if isin { 1.0 - e } else { e })
        .sum();
    wrong / n
}

pub fn tp(pi: &[usize], eta: &[f64]) -> f64 {
    pi.iter().map(|&i| eta[i]).sum()
}

pub fn fdr(pi: &[usize], eta: &[f64]) -> Result<f64> {
    if pi.is_empty() {
        return Err(invalid("false discovery rate of the empty set is undefined"));
    }
    Ok(1.0 - tp(pi, eta) / pi.len() as f64)
}

pub fn tpr(pi: &[usize], eta: &[f64]) -> Result<f64> {
    let total: f64 = eta.iter().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedTpr);
    }
    Ok(tp(pi, eta) / total)
}

/// `μ_π = Σ_{i∈π} (2η_i - 1)`.
pub fn mu(pi: &[usize], eta: &[f64]) -> f64 {
    pi.iter().map(|&i| 2.0 * eta[i] - 1.0).sum()
}

/// Per-policy values of `Σ_{i∈π} means[i]` for the whole family.
pub fn family_sums(family: &PolicyFamily, means: &[f64]) -> Vec<f64> {
    let ids: Vec<PolicyId> = family.ids().collect();
    family.policy_sums(means, &ids)
}

fn argmax_lowest(values: impl Iterator<Item = (PolicyId, f64)>) -> Option<PolicyId> {
    let mut best: Option<(PolicyId, f64)> = None;
    for (id, v) in values {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((id, v));
        }
    }
    best.map(|(id, _)| id)
}

/// Risk minimizer, found as the argmax of `μ_π`; ties go to the lowest id.
pub fn best_policy(family: &PolicyFamily, eta: &[f64]) -> PolicyId {
    let mu_i: Vec<f64> = eta.iter().map(|&e| 2.0 * e - 1.0).collect();
    best_by_means(family, &mu_i)
}

/// Argmax of `Σ_{i∈π} means[i]` for arbitrary arm means; ties go to the lowest id.
pub fn best_by_means(family: &PolicyFamily, means: &[f64]) -> PolicyId {
    argmax_lowest(family_sums(family, means).into_iter().enumerate()).expect("families are nonempty")
}

/// Max-TP policy among those with `FDR ≤ α`, or `None` when no policy
/// qualifies.
pub fn best_fdr_policy(family: &PolicyFamily, eta: &[f64], alpha: f64) -> Result<Option<PolicyId>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("FDR level must lie in (0, 1), got {alpha}")));
    }
    let tps = family_sums(family, eta);
    Ok(argmax_lowest(
        tps.into_iter()
            .enumerate()
            .filter(|&(id, tp)| 1.0 - tp / family.size(id) as f64 <= alpha),
    ))
}

/// Per-policy gaps against the classification optimum and, when an FDR
/// level is given, against the FDR-constrained optimum.
#[derive(Debug, Clone, Serialize)]
pub struct GapProfile {
    pub mu_pi: Vec<f64>,
    pub tp_pi: Vec<f64>,
    pub best: PolicyId,
    /// `|μ_π - μ_{π*}| / |π Δ π*|`; zero at `π*`.
    pub delta_tilde: Vec<f64>,
    pub fdr_best: Option<PolicyId>,
    /// `|FDR(π) - α|`.
    pub delta_alpha: Vec<f64>,
    /// `|TP(π*_α) - TP(π)| / |π Δ π*_α|`; zero at `π*_α`, empty when infeasible.
    pub delta_tilde_fdr: Vec<f64>,
}

pub fn gap_profile(family: &PolicyFamily, eta: &[f64], alpha: f64) -> Result<GapProfile> {
    let mu_i: Vec<f64> = eta.iter().map(|&e| 2.0 * e - 1.0).collect();
    let mu_pi = family_sums(family, &mu_i);
    let tp_pi = family_sums(family, eta);
    let best = best_policy(family, eta);
    let delta_tilde = family
        .ids()
        .map(|id| normalized_gap(family, id, best, mu_pi[id], mu_pi[best]))
        .collect();
    let fdr_best = best_fdr_policy(family, eta, alpha)?;
    let delta_alpha = family
        .ids()
        .map(|id| (1.0 - tp_pi[id] / family.size(id) as f64 - alpha).abs())
        .collect();
    let delta_tilde_fdr = match fdr_best {
        Some(star) => family
            .ids()
            .map(|id| normalized_gap(family, id, star, tp_pi[id], tp_pi[star]))
            .collect(),
        None => Vec::new(),
    };
    Ok(GapProfile {
        mu_pi,
        tp_pi,
        best,
        delta_tilde,
        fdr_best,
        delta_alpha,
        delta_tilde_fdr,
    })
}

fn normalized_gap(family: &PolicyFamily, id: PolicyId, star: PolicyId, value: f64, star_value: f64) -> f64 {
    if id == star {
        return 0.0;
    }
    (value - star_value).abs() / family.symdiff_len(id, star) as f64
}

fn serialize_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

/// Complexity predictors for one policy. Zero-gap quantities are infinite.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyPredictor {
    pub id: PolicyId,
    #[serde(serialize_with = "serialize_extended")]
    pub tau: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub s_fdr: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub s_tp: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub t_fdr: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub t_tp: f64,
}

/// Predicted label totals (up to the unspecified leading constant).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PredictedTotals {
    #[serde(serialize_with = "serialize_extended")]
    pub classify_stochastic: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub classify_persistent: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub fdr_stochastic: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub fdr_persistent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Predictors {
    pub policies: Vec<PolicyPredictor>,
    pub totals: PredictedTotals,
}

/// `(V / m) Δ⁻² log(n · max(log Δ⁻², e) / δ)`, infinite at zero gap.
fn gap_complexity(weight: f64, m: usize, gap: f64, n: usize, delta: f64) -> f64 {
    if gap <= 0.0 {
        return f64::INFINITY;
    }
    let inv_sq = gap.powi(-2);
    let inner = inv_sq.ln().max(std::f64::consts::E);
    weight / m as f64 * inv_sq * (n as f64 * inner / delta).ln()
}

pub fn complexity_predictors(family: &PolicyFamily, eta: &[f64], alpha: f64, delta: f64) -> Result<Predictors> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("confidence level must lie in (0, 1), got {delta}")));
    }
    let n = family.n();
    let gaps = gap_profile(family, eta, alpha)?;
    let best = gaps.best;

    let tau: Vec<f64> = family
        .ids()
        .map(|id| {
            if id == best {
                return f64::INFINITY;
            }
            gap_complexity(
                family.pair_weight(id, best),
                family.symdiff_len(id, best),
                gaps.delta_tilde[id],
                n,
                delta,
            )
        })
        .collect();

    let feasible: Vec<bool> = family
        .ids()
        .map(|id| 1.0 - gaps.tp_pi[id] / family.size(id) as f64 <= alpha)
        .collect();

    let mut s_fdr = Vec::with_capacity(family.len());
    for id in family.ids() {
        s_fdr.push(gap_complexity(
            family.complexity_single(id)?,
            family.size(id),
            gaps.delta_alpha[id],
            n,
            delta,
        ));
    }
    let s_tp: Vec<f64> = family
        .ids()
        .map(|id| match gaps.fdr_best {
            Some(star) if star != id => gap_complexity(
                family.pair_weight(id, star),
                family.symdiff_len(id, star),
                gaps.delta_tilde_fdr[id],
                n,
                delta,
            ),
            _ => f64::INFINITY,
        })
        .collect();
    let s_fdr_star = gaps.fdr_best.map_or(f64::INFINITY, |star| s_fdr[star]);

    // min over feasible strict supersets; the empty minimum is +inf
    let superset_min: Vec<f64> = family
        .ids()
        .map(|id| {
            family
                .ids()
                .filter(|&sup| feasible[sup] && family.is_strict_subset(id, sup))
                .map(|sup| s_fdr[sup])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let policies: Vec<PolicyPredictor> = family
        .ids()
        .map(|id| {
            let via_tp = s_tp[id].max(s_fdr_star);
            PolicyPredictor {
                id,
                tau: tau[id],
                s_fdr: s_fdr[id],
                s_tp: s_tp[id],
                t_fdr: s_fdr[id].min(via_tp).min(superset_min[id]),
                t_tp: via_tp.min(superset_min[id]),
            }
        })
        .collect();

    let mut classify_max = vec![0.0f64; n];
    let mut fdr_max = vec![0.0f64; n];
    let mut tp_max = vec![0.0f64; n];
    for p in &policies {
        let id = p.id;
        if id != best {
            for i in symdiff_items(family, id, best) {
                classify_max[i] = classify_max[i].max(p.tau);
            }
        }
        for i in family.policy(id).ones() {
            fdr_max[i] = fdr_max[i].max(p.t_fdr);
        }
        if let Some(star) = gaps.fdr_best {
            if feasible[id] && id != star {
                for i in symdiff_items(family, id, star) {
                    tp_max[i] = tp_max[i].max(p.t_tp);
                }
            }
        }
    }
    let totals = PredictedTotals {
        classify_stochastic: classify_max.iter().sum(),
        classify_persistent: classify_max.iter().map(|&v| v.min(1.0)).sum(),
        fdr_stochastic: fdr_max.iter().sum::<f64>() + tp_max.iter().sum::<f64>(),
        fdr_persistent: fdr_max.iter().zip(&tp_max).map(|(&a, &b)| (a + b).min(1.0)).sum(),
    };
    Ok(Predictors { policies, totals })
}

fn symdiff_items(family: &PolicyFamily, a: PolicyId, b: PolicyId) -> Vec<usize> {
    family.policy(a).symmetric_difference(family.policy(b)).collect()
}
