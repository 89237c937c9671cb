//! Active FDR control: find the max-true-positive policy among those whose
//! false discovery rate is at most `α`.
//!
//! Two index streams run side by side. The I-stream is observed inside
//! `S_k`, the union of active policies not yet certified, and feeds the FDR
//! estimates. The J-stream is observed inside `T_k`, the disagreement region
//! of all active policies, and feeds the pairwise true-positive estimates.
//! At each `t = 2^k` policies are certified, then pruned by three rules:
//!
//! 1. estimated FDR above `α` by more than the radius;
//! 2. significantly fewer true positives than a certified policy (the victim
//!    is also remembered in the record `R`);
//! 3. strict subset of a certified or recorded policy.
//!
//! A policy's FDR estimate and radius are frozen when it is certified: from
//! then on its items may leave `S_k`, and further I-stream sums would no
//! longer be unbiased for it.

use crate::confidence::BoundConfig;
use crate::error::{invalid, Result};
use crate::family::{ItemSet, PolicyFamily, PolicyId};
use crate::instance::{Instance, NoiseMode};
use crate::sampling::{stream_rng, IndexStream, LabelOracle};
use crate::trace::{
    Certification, DrawEvent, EngineOptions, EpochEstimates, EpochRecord, Outcome, RegionSnapshot, Removal,
    RemovalReason, TrialResult,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenFdr {
    pub fdr_hat: f64,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct FdrState {
    pub active: Vec<PolicyId>,
    pub controlled: Vec<PolicyId>,
    pub superset_record: Vec<PolicyId>,
    pub s_region: ItemSet,
    pub t_region: ItemSet,
    /// Index of the next epoch boundary, `t = 2^epoch`.
    pub epoch: u32,
    pub t: u64,
    pub i_stream_sums: Vec<f64>,
    pub j_stream_sums: Vec<f64>,
    pub frozen: Vec<Option<FrozenFdr>>,
}

/// What one certify-and-prune pass changed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochChanges {
    pub certified: Vec<Certification>,
    pub removed: Vec<Removal>,
    /// Live FDR estimates of the uncertified policies before the pass.
    pub uncertified_fdr: Vec<(PolicyId, f64)>,
}

impl FdrState {
    pub fn new(family: &PolicyFamily) -> Result<Self> {
        let active: Vec<PolicyId> = family.ids().collect();
        Ok(Self {
            s_region: family.uncontrolled_union(&active, &[])?,
            t_region: family.symdiff_region(&active)?,
            active,
            controlled: Vec::new(),
            superset_record: Vec::new(),
            epoch: 1,
            t: 0,
            i_stream_sums: vec![0.0; family.n()],
            j_stream_sums: vec![0.0; family.n()],
            frozen: vec![None; family.len()],
        })
    }

    /// `δ_k = δ / (4k²)`.
    pub fn delta_k(&self, delta: f64) -> f64 {
        0.25 * delta / f64::from(self.epoch).powi(2)
    }

    pub fn is_controlled(&self, id: PolicyId) -> bool {
        self.controlled.binary_search(&id).is_ok()
    }

    /// `FDR̂(π) = 1 - (n / (|π| t)) Σ_{i∈π} I-stream sums`.
    pub fn fdr_hat(&self, family: &PolicyFamily, ids: &[PolicyId]) -> Vec<f64> {
        let scale = family.n() as f64 / self.t.max(1) as f64;
        family
            .policy_sums(&self.i_stream_sums, ids)
            .into_iter()
            .zip(ids)
            .map(|(s, &id)| 1.0 - scale * s / family.size(id) as f64)
            .collect()
    }

    /// Sum-scale `TP̂` scores; only their differences are estimates.
    pub fn tp_scores(&self, family: &PolicyFamily, ids: &[PolicyId]) -> Vec<f64> {
        let scale = family.n() as f64 / self.t.max(1) as f64;
        family
            .policy_sums(&self.j_stream_sums, ids)
            .into_iter()
            .map(|s| scale * s)
            .collect()
    }

    fn refresh_regions(&mut self, family: &PolicyFamily) -> Result<()> {
        self.s_region = family.uncontrolled_union(&self.active, &self.controlled)?;
        self.t_region = if self.active.is_empty() {
            ItemSet::with_capacity(family.n())
        } else {
            family.symdiff_region(&self.active)?
        };
        Ok(())
    }
}

/// Certification followed by the three removal rules, in that order.
///
/// With `exact` the radii are zero; that is only valid once the estimators
/// are exact (persistent noise, every item drawn by both streams).
pub fn certify_and_prune(
    state: &mut FdrState,
    family: &PolicyFamily,
    alpha: f64,
    delta: f64,
    bound: &BoundConfig,
    exact: bool,
) -> Result<EpochChanges> {
    let (k, t) = (state.epoch, state.t);
    if t == 0 {
        return Err(invalid("certification needs at least one draw"));
    }
    if !exact && t != 1u64 << k {
        return Err(invalid(format!("epoch {k} boundary is t = {}, got t = {t}", 1u64 << k)));
    }
    let delta_k = state.delta_k(delta);
    let mut changes = EpochChanges::default();

    // (a) certification of uncertified active policies
    let uncertified: Vec<PolicyId> = state
        .active
        .iter()
        .copied()
        .filter(|&id| !state.is_controlled(id))
        .collect();
    let live = state.fdr_hat(family, &uncertified);
    for (&id, &fdr_hat) in uncertified.iter().zip(&live) {
        changes.uncertified_fdr.push((id, fdr_hat));
        let radius = if exact {
            0.0
        } else {
            bound.single_radius(family, id, t, delta_k)? / family.size(id) as f64
        };
        if fdr_hat + radius <= alpha {
            state.frozen[id] = Some(FrozenFdr { fdr_hat, radius });
            changes.certified.push(Certification {
                k,
                t,
                id,
                fdr_hat,
                radius,
            });
        }
    }
    let mut controlled = state.controlled.clone();
    controlled.extend(changes.certified.iter().map(|c| c.id));
    controlled.sort_unstable();

    // (b) conditions 1 and 2 against the post-certification snapshot
    let fdr_of = |id: PolicyId| -> Result<(f64, f64)> {
        if let Some(f) = state.frozen[id] {
            return Ok((f.fdr_hat, f.radius));
        }
        let pos = uncertified.binary_search(&id).expect("uncertified policy");
        let radius = if exact {
            0.0
        } else {
            bound.single_radius(family, id, t, delta_k)? / family.size(id) as f64
        };
        Ok((live[pos], radius))
    };

    let tp_active = state.tp_scores(family, &state.active);
    let tp_of: std::collections::HashMap<PolicyId, f64> =
        state.active.iter().copied().zip(tp_active.iter().copied()).collect();
    let mut champions: Vec<PolicyId> = controlled.clone();
    champions.sort_by(|a, b| tp_of[b].total_cmp(&tp_of[a]).then(a.cmp(b)));
    let floor = if exact { 0.0 } else { bound.min_pair_radius(t, delta_k)? };

    let mut removed_b: Vec<(PolicyId, RemovalReason)> = Vec::new();
    for &id in &state.active {
        let (fdr_hat, radius) = fdr_of(id)?;
        let cond1 = fdr_hat - radius > alpha;
        let mut cond2 = None;
        for &champ in &champions {
            let gap = tp_of[&champ] - tp_of[&id];
            if gap <= floor {
                break;
            }
            if champ == id {
                continue;
            }
            let r = if exact {
                0.0
            } else {
                bound.pair_radius(family, id, champ, t, delta_k)?
            };
            if gap > r {
                cond2 = Some(champ);
                break;
            }
        }
        if cond2.is_some() {
            state.superset_record.push(id);
        }
        if cond1 {
            removed_b.push((id, RemovalReason::FdrExceeded));
        } else if let Some(by) = cond2 {
            removed_b.push((id, RemovalReason::TpDominated { by }));
        }
    }
    let gone = |list: &[(PolicyId, RemovalReason)], id: PolicyId| list.iter().any(|&(r, _)| r == id);
    state.active.retain(|&id| !gone(&removed_b, id));
    controlled.retain(|&id| !gone(&removed_b, id));

    // (c) condition 3 against controlled ∪ R
    let mut dominators: Vec<PolicyId> = controlled.iter().chain(&state.superset_record).copied().collect();
    dominators.sort_unstable_by(|&a, &b| family.size(b).cmp(&family.size(a)).then(a.cmp(&b)));
    dominators.dedup();
    let mut removed_c: Vec<(PolicyId, RemovalReason)> = Vec::new();
    for &id in &state.active {
        let size = family.size(id);
        if let Some(&of) = dominators
            .iter()
            .take_while(|&&d| family.size(d) > size)
            .find(|&&d| family.is_strict_subset(id, d))
        {
            removed_c.push((id, RemovalReason::Subset { of }));
        }
    }
    state.active.retain(|&id| !gone(&removed_c, id));
    controlled.retain(|&id| !gone(&removed_c, id));

    for (id, reason) in removed_b.into_iter().chain(removed_c) {
        changes.removed.push(Removal { k, t, id, reason });
    }
    state.controlled = controlled;
    state.superset_record.sort_unstable();
    state.superset_record.dedup();

    // (d) regions
    state.refresh_regions(family)?;
    Ok(changes)
}

pub fn run_fdr(
    instance: &Instance,
    family: &PolicyFamily,
    alpha: f64,
    delta: f64,
    bound: &BoundConfig,
    opts: &EngineOptions,
    seed: u64,
) -> Result<TrialResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("FDR level must lie in (0, 1), got {alpha}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("confidence level must lie in (0, 1), got {delta}")));
    }
    if instance.n() != family.n() {
        return Err(invalid("instance and family disagree on n"));
    }
    bound.validate(family)?;
    let n = family.n();
    let mode = instance.mode();
    let mut i_stream = IndexStream::new(mode.into(), n, stream_rng(seed, 0));
    let mut j_stream = IndexStream::new(mode.into(), n, stream_rng(seed, 2));
    let mut oracle = LabelOracle::new(instance, stream_rng(seed, 1));
    let mut state = FdrState::new(family)?;

    let mut result = TrialResult {
        outcome: Outcome::Infeasible,
        labels_used: 0,
        epochs: 0,
        draws: 0,
        cap_hit: false,
        exhausted: false,
        seed,
        trace: Vec::new(),
        removals: Vec::new(),
        certifications: Vec::new(),
        final_tp_hat: None,
        final_fdr_hat: None,
        events: Vec::new(),
        regions: Vec::new(),
        estimates: Vec::new(),
    };
    if opts.record_regions {
        result.regions.push(snapshot(&state));
    }

    loop {
        if state.active.len() <= 1 {
            break;
        }
        match mode {
            NoiseMode::Persistent if state.t >= n as u64 => {
                result.exhausted = true;
                break;
            }
            NoiseMode::Stochastic if state.t >= opts.cap => {
                result.cap_hit = true;
                break;
            }
            _ => {}
        }
        state.t += 1;
        for (stream_id, stream) in [(0u8, &mut i_stream), (1u8, &mut j_stream)] {
            let item = stream.next_index()?;
            let region = if stream_id == 0 {
                &state.s_region
            } else {
                &state.t_region
            };
            let in_region = region.contains(item);
            let observed = in_region || opts.observe_all;
            if observed {
                let y = f64::from(oracle.observe(item)?);
                if stream_id == 0 {
                    state.i_stream_sums[item] += y;
                } else {
                    state.j_stream_sums[item] += y;
                }
            }
            if opts.record_events {
                result.events.push(DrawEvent {
                    t: state.t,
                    stream: stream_id,
                    item,
                    in_region,
                    observed,
                });
            }
        }

        if state.t == 1u64 << state.epoch {
            epoch(
                &mut state,
                family,
                alpha,
                delta,
                bound,
                opts,
                &mut result,
                oracle.query_count(),
                false,
            )?;
        }
    }

    if result.exhausted && opts.exact_on_exhaustion && !state.active.is_empty() {
        epoch(
            &mut state,
            family,
            alpha,
            delta,
            bound,
            opts,
            &mut result,
            oracle.query_count(),
            true,
        )?;
    }

    let winner = if state.controlled.is_empty() {
        None
    } else {
        let scores = state.tp_scores(family, &state.controlled);
        let mut best = 0;
        for j in 1..scores.len() {
            if scores[j] > scores[best] {
                best = j;
            }
        }
        Some((state.controlled[best], scores[best]))
    };
    result.outcome = match winner {
        Some((id, tp)) => {
            result.final_tp_hat = Some(tp);
            result.final_fdr_hat = state.frozen[id].map(|f| f.fdr_hat);
            Outcome::Policy { id }
        }
        None if state.active.len() == 1 && opts.known_feasible => {
            let id = state.active[0];
            result.final_tp_hat = state.tp_scores(family, &[id]).first().copied();
            result.final_fdr_hat = state.fdr_hat(family, &[id]).first().copied();
            Outcome::UncertifiedSurvivor { id }
        }
        None => Outcome::Infeasible,
    };
    result.labels_used = oracle.query_count();
    result.epochs = state.epoch - 1;
    result.draws = state.t;
    Ok(result)
}

#[allow(clippy::too_many_arguments)]
fn epoch(
    state: &mut FdrState,
    family: &PolicyFamily,
    alpha: f64,
    delta: f64,
    bound: &BoundConfig,
    opts: &EngineOptions,
    result: &mut TrialResult,
    labels: u64,
    exact: bool,
) -> Result<()> {
    let k = state.epoch;
    let changes = certify_and_prune(state, family, alpha, delta, bound, exact)?;
    if opts.record_estimates {
        result.estimates.push(EpochEstimates {
            k,
            t: state.t,
            values: changes.uncertified_fdr.clone(),
        });
    }
    result.certifications.extend(changes.certified);
    result.removals.extend(changes.removed);
    result.trace.push(EpochRecord {
        k,
        t: state.t,
        active: state.active.len(),
        controlled: Some(state.controlled.len()),
        superset_record: Some(state.superset_record.len()),
        s_region: Some(state.s_region.count_ones(..)),
        t_region: state.t_region.count_ones(..),
        labels,
    });
    if opts.record_regions {
        result.regions.push(snapshot(state));
    }
    if !exact {
        state.epoch += 1;
    }
    Ok(())
}

fn snapshot(state: &FdrState) -> RegionSnapshot {
    RegionSnapshot {
        k: state.epoch - 1,
        t: state.t,
        active: state.active.clone(),
        controlled: state.controlled.clone(),
        s_items: state.s_region.ones().collect(),
        t_items: state.t_region.ones().collect(),
    }
}
