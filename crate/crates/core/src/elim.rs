//! Doubling-epoch action elimination with rejection sampling.
//!
//! Draws are uniform over the pool; a reward is observed only when the drawn
//! item lies in the current disagreement region `T_k` of the active
//! policies. At each `t = 2^k` every active pair is compared through
//! `μ̂_{π'} - μ̂_π = (n/t) (Σ_{π'} G_i - Σ_π G_i)` and dominated policies are
//! dropped in one batch. Items common to both policies cancel in the
//! difference, which is why never observing them is harmless.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::confidence::BoundConfig;
use crate::error::{invalid, Result};
use crate::family::{ItemSet, PolicyFamily, PolicyId};
use crate::instance::{Instance, NoiseMode};
use crate::sampling::{stream_rng, IndexStream, LabelOracle, RewardOracle, SignedLabels};
use crate::trace::{
    DrawEvent, EngineOptions, EpochEstimates, EpochRecord, Outcome, RegionSnapshot, Removal, RemovalReason, TrialResult,
};

#[derive(Debug, Clone)]
pub struct ElimState {
    pub active: Vec<PolicyId>,
    pub region: ItemSet,
    /// Index of the next epoch boundary, `t = 2^epoch`.
    pub epoch: u32,
    pub t: u64,
    /// Accumulated observed reward per item.
    pub item_sums: Vec<f64>,
}

impl ElimState {
    pub fn new(family: &PolicyFamily) -> Result<Self> {
        let active: Vec<PolicyId> = family.ids().collect();
        let region = family.symdiff_region(&active)?;
        Ok(Self {
            active,
            region,
            epoch: 1,
            t: 0,
            item_sums: vec![0.0; family.n()],
        })
    }

    /// `δ_k = δ / (2k²)`.
    pub fn delta_k(&self, delta: f64) -> f64 {
        0.5 * delta / f64::from(self.epoch).powi(2)
    }

    /// Sum-scale estimates `(n/t) Σ_{i∈π} G_i` for the active policies, in
    /// `active` order. Only differences between them are meaningful.
    pub fn estimates(&self, family: &PolicyFamily) -> Vec<f64> {
        let scale = if self.t == 0 {
            0.0
        } else {
            family.n() as f64 / self.t as f64
        };
        family
            .policy_sums(&self.item_sums, &self.active)
            .into_iter()
            .map(|s| s * scale)
            .collect()
    }

    /// Output rule: an active policy whose estimate is at least every other's,
    /// lowest id first.
    pub fn leader(&self, family: &PolicyFamily) -> PolicyId {
        let est = self.estimates(family);
        let mut best = 0;
        for j in 1..est.len() {
            if est[j] > est[best] {
                best = j;
            }
        }
        self.active[best]
    }
}

/// One epoch boundary: drop every policy some active policy beats by more
/// than the pairwise radius, all against the same snapshot of the active set,
/// then refresh the region. Returns the removals as `(removed, by)`.
pub fn epoch_update(
    state: &mut ElimState,
    family: &PolicyFamily,
    delta: f64,
    bound: &BoundConfig,
) -> Result<Vec<(PolicyId, PolicyId)>> {
    if state.t != 1u64 << state.epoch {
        return Err(invalid(format!(
            "epoch update at t = {} but the boundary is at 2^{}",
            state.t, state.epoch
        )));
    }
    let removed = dominated_pairs(state, family, state.delta_k(delta), bound)?;
    if !removed.is_empty() {
        state.active.retain(|id| !removed.iter().any(|&(r, _)| r == *id));
        state.region = family.symdiff_region(&state.active)?;
    }
    state.epoch += 1;
    Ok(removed)
}

fn dominated_pairs(
    state: &ElimState,
    family: &PolicyFamily,
    delta_k: f64,
    bound: &BoundConfig,
) -> Result<Vec<(PolicyId, PolicyId)>> {
    let est = state.estimates(family);
    let floor = bound.min_pair_radius(state.t, delta_k)?;
    let mut order: Vec<usize> = (0..est.len()).collect();
    order.sort_by(|&a, &b| est[b].total_cmp(&est[a]).then(a.cmp(&b)));

    let mut removed = Vec::new();
    for (pos, &j) in order.iter().enumerate() {
        // challengers sorted by decreasing estimate; stop once no radius can be beaten
        for &c in &order[..pos] {
            let gap = est[c] - est[j];
            if gap <= floor {
                break;
            }
            let (pi, challenger) = (state.active[j], state.active[c]);
            if gap > bound.pair_radius(family, challenger, pi, state.t, delta_k)? {
                removed.push((pi, challenger));
                break;
            }
        }
    }
    removed.sort_unstable();
    Ok(removed)
}

/// Active classification on a labelled instance: rewards are `2Y - 1`.
pub fn run_classify(
    instance: &Instance,
    family: &PolicyFamily,
    delta: f64,
    bound: &BoundConfig,
    opts: &EngineOptions,
    seed: u64,
) -> Result<TrialResult> {
    let mut oracle = SignedLabels(LabelOracle::new(instance, stream_rng(seed, 1)));
    run_elimination(&mut oracle, family, delta, bound, opts, seed)
}

/// The elimination engine over any reward oracle with rewards in `[-1, 1]`.
pub fn run_elimination<O: RewardOracle>(
    oracle: &mut O,
    family: &PolicyFamily,
    delta: f64,
    bound: &BoundConfig,
    opts: &EngineOptions,
    seed: u64,
) -> Result<TrialResult> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("confidence level must lie in (0, 1), got {delta}")));
    }
    if oracle.n() != family.n() {
        return Err(invalid("oracle and family disagree on n"));
    }
    bound.validate(family)?;
    let n = family.n();
    let mode = oracle.mode();
    let mut stream = IndexStream::new(mode.into(), n, stream_rng(seed, 0));
    let mut state = ElimState::new(family)?;

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
    let batch = opts.binomial_batch && mode == NoiseMode::Stochastic && !opts.observe_all;
    let mut settled = state.region.is_clear();

    loop {
        if settled {
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

        if batch {
            batch_to_boundary(&mut state, &mut stream, oracle, opts.cap)?;
        } else {
            state.t += 1;
            let i = stream.next_index()?;
            let in_region = state.region.contains(i);
            let observed = in_region || opts.observe_all;
            if observed {
                state.item_sums[i] += oracle.pull(i)?;
            }
            if opts.record_events {
                result.events.push(DrawEvent {
                    t: state.t,
                    stream: 0,
                    item: i,
                    in_region,
                    observed,
                });
            }
        }

        if state.t == 1u64 << state.epoch {
            let k = state.epoch;
            if opts.record_estimates {
                let est = state.estimates(family);
                result.estimates.push(EpochEstimates {
                    k,
                    t: state.t,
                    values: state.active.iter().copied().zip(est).collect(),
                });
            }
            for (id, by) in epoch_update(&mut state, family, delta, bound)? {
                result.removals.push(Removal {
                    k,
                    t: state.t,
                    id,
                    reason: RemovalReason::Dominated { by },
                });
            }
            result.trace.push(EpochRecord {
                k,
                t: state.t,
                active: state.active.len(),
                controlled: None,
                superset_record: None,
                s_region: None,
                t_region: state.region.count_ones(..),
                labels: oracle.query_count(),
            });
            if opts.record_regions {
                result.regions.push(snapshot(&state));
            }
            settled = state.region.is_clear();
        }
    }

    result.outcome = Outcome::Policy {
        id: state.leader(family),
    };
    result.labels_used = oracle.query_count();
    result.epochs = state.epoch - 1;
    result.draws = state.t;
    Ok(result)
}

/// Advances `t` to the next epoch boundary (or the cap) in one step: the
/// number of draws landing in the region is binomial, and each hit is a
/// uniform item of the region.
fn batch_to_boundary<O: RewardOracle>(
    state: &mut ElimState,
    stream: &mut IndexStream,
    oracle: &mut O,
    cap: u64,
) -> Result<()> {
    let target = (1u64 << state.epoch).min(cap);
    let draws = target - state.t;
    let region: Vec<usize> = state.region.ones().collect();
    let p = region.len() as f64 / state.item_sums.len() as f64;
    let rng = stream.rng_mut();
    let hits = Binomial::new(draws, p)
        .map_err(|e| invalid(format!("binomial batch: {e}")))?
        .sample(rng);
    for _ in 0..hits {
        let i = region[rng.random_range(0..region.len())];
        state.item_sums[i] += oracle.pull(i)?;
    }
    state.t = target;
    Ok(())
}

fn snapshot(state: &ElimState) -> RegionSnapshot {
    RegionSnapshot {
        k: state.epoch - 1,
        t: state.t,
        active: state.active.clone(),
        controlled: Vec::new(),
        s_items: Vec::new(),
        t_items: state.region.ones().collect(),
    }
}
