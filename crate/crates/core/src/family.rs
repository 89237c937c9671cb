//! Enumerable policy families over `[n]`, set algebra over active
//! collections, and the local complexity weights that scale the
//! confidence radii.
//!
//! Items are 0-based internally. The JSON description and anything meant
//! for people use 1-based item indices.

use std::collections::HashSet;
use std::sync::OnceLock;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Index into a family's canonical enumeration.
pub type PolicyId = usize;

/// A subset of the item pool, one bit per item.
pub type ItemSet = FixedBitSet;

/// Largest family the engines are expected to materialize.
pub const MAX_POLICIES: usize = 100_000;

/// Work budget (subset checks times family size) for brute-force VC
/// dimension before falling back to the log-count surrogate.
const VC_SEARCH_BUDGET: u64 = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Thresholds,
    Intervals,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Known VC dimensions for structured families; exact brute force for
    /// small explicit ones.
    AnalyticVc,
    /// `ceil(log2 |B|)` from sub-family counts.
    SauerCount,
}

/// Serializable description of a family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub n: usize,
    /// Sorted 1-based item indices, one array per policy (explicit only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_mode: Option<WeightMode>,
}

#[derive(Debug, Clone)]
pub struct PolicyFamily {
    kind: FamilyKind,
    n: usize,
    weight_mode: WeightMode,
    sets: Vec<ItemSet>,
    /// Half-open item range per policy for thresholds and intervals.
    spans: Vec<(usize, usize)>,
    sizes: Vec<usize>,
    size_counts: Vec<usize>,
    /// Per anchor: number of policies at each symmetric-difference distance.
    anchor_counts: Vec<OnceLock<Vec<u32>>>,
    /// Per anchor: VC dimension of each distance shell (explicit, analytic mode).
    anchor_vc: Vec<OnceLock<Vec<u32>>>,
    /// Per size: VC dimension of the equal-size sub-family (explicit, analytic mode).
    size_vc: Vec<OnceLock<u32>>,
}

impl PolicyFamily {
    /// `{[k] : 1 <= k <= n}` in increasing `k`.
    pub fn thresholds(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("family needs n >= 1"));
        }
        check_count(n)?;
        let spans = (1..=n).map(|k| (0, k)).collect();
        Ok(Self::from_spans(FamilyKind::Thresholds, n, spans))
    }

    /// All contiguous ranges, ordered by length then start.
    pub fn intervals(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("family needs n >= 1"));
        }
        check_count(n * (n + 1) / 2)?;
        let spans = (1..=n)
            .flat_map(|len| (0..=n - len).map(move |start| (start, start + len)))
            .collect();
        Ok(Self::from_spans(FamilyKind::Intervals, n, spans))
    }

    /// Explicit list of 0-based item sets. Duplicates and empty sets are rejected.
    pub fn explicit(n: usize, policies: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("family needs n >= 1"));
        }
        if policies.is_empty() {
            return Err(invalid("explicit family needs at least one policy"));
        }
        check_count(policies.len())?;
        let mut seen = HashSet::new();
        let mut sets = Vec::with_capacity(policies.len());
        for (id, items) in policies.iter().enumerate() {
            if items.is_empty() {
                return Err(invalid(format!("policy {id} is empty")));
            }
            let mut set = ItemSet::with_capacity(n);
            for &i in items {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i + 1, n });
                }
                set.insert(i);
            }
            if !seen.insert(set.clone()) {
                return Err(invalid(format!("policy {id} duplicates an earlier policy")));
            }
            sets.push(set);
        }
        Ok(Self::from_sets(FamilyKind::Explicit, n, sets, Vec::new()))
    }

    pub fn with_weight_mode(mut self, mode: WeightMode) -> Self {
        self.weight_mode = mode;
        self
    }

    fn from_spans(kind: FamilyKind, n: usize, spans: Vec<(usize, usize)>) -> Self {
        let sets = spans
            .iter()
            .map(|&(a, b)| {
                let mut s = ItemSet::with_capacity(n);
                s.insert_range(a..b);
                s
            })
            .collect();
        Self::from_sets(kind, n, sets, spans)
    }

    fn from_sets(kind: FamilyKind, n: usize, sets: Vec<ItemSet>, spans: Vec<(usize, usize)>) -> Self {
        let sizes: Vec<usize> = sets.iter().map(|s| s.count_ones(..)).collect();
        let mut size_counts = vec![0; n + 1];
        for &k in &sizes {
            size_counts[k] += 1;
        }
        let len = sets.len();
        let weight_mode = match kind {
            FamilyKind::Explicit => WeightMode::SauerCount,
            _ => WeightMode::AnalyticVc,
        };
        Self {
            kind,
            n,
            weight_mode,
            sets,
            spans,
            sizes,
            size_counts,
            anchor_counts: (0..len).map(|_| OnceLock::new()).collect(),
            anchor_vc: (0..len).map(|_| OnceLock::new()).collect(),
            size_vc: (0..=n).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn from_spec(spec: &FamilySpec) -> Result<Self> {
        let family = match spec.kind {
            FamilyKind::Thresholds => Self::thresholds(spec.n)?,
            FamilyKind::Intervals => Self::intervals(spec.n)?,
            FamilyKind::Explicit => {
                let policies = spec
                    .policies
                    .as_ref()
                    .ok_or_else(|| invalid("explicit family needs `policies`"))?;
                let zero_based = policies
                    .iter()
                    .map(|p| {
                        p.iter()
                            .map(|&i| {
                                if i == 0 {
                                    Err(invalid("policy items are 1-based"))
                                } else {
                                    Ok(i - 1)
                                }
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::explicit(spec.n, zero_based)?
            }
        };
        Ok(match spec.weight_mode {
            Some(mode) => family.with_weight_mode(mode),
            None => family,
        })
    }

    pub fn to_spec(&self) -> FamilySpec {
        FamilySpec {
            kind: self.kind,
            n: self.n,
            policies: (self.kind == FamilyKind::Explicit).then(|| {
                (0..self.len())
                    .map(|id| self.items(id).into_iter().map(|i| i + 1).collect())
                    .collect()
            }),
            weight_mode: Some(self.weight_mode),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(&serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_spec())?)
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn weight_mode(&self) -> WeightMode {
        self.weight_mode
    }

    pub fn ids(&self) -> std::ops::Range<PolicyId> {
        0..self.sets.len()
    }

    pub fn policy(&self, id: PolicyId) -> &ItemSet {
        &self.sets[id]
    }

    pub fn size(&self, id: PolicyId) -> usize {
        self.sizes[id]
    }

    pub fn contains_item(&self, id: PolicyId, item: usize) -> bool {
        match self.spans.get(id) {
            Some(&(a, b)) => (a..b).contains(&item),
            None => self.sets[id].contains(item),
        }
    }

    /// Sorted 0-based items of a policy.
    pub fn items(&self, id: PolicyId) -> Vec<usize> {
        self.sets[id].ones().collect()
    }

    /// Canonical enumeration as sorted 0-based item lists.
    pub fn enumerate(&self) -> Vec<Vec<usize>> {
        self.ids().map(|id| self.items(id)).collect()
    }

    pub fn check_id(&self, id: PolicyId) -> Result<()> {
        if id < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownPolicy(id))
        }
    }

    /// `|a Δ b|`.
    pub fn symdiff_len(&self, a: PolicyId, b: PolicyId) -> usize {
        if self.kind != FamilyKind::Explicit {
            let (sa, ea) = self.spans[a];
            let (sb, eb) = self.spans[b];
            let overlap = ea.min(eb).saturating_sub(sa.max(sb));
            return (ea - sa) + (eb - sb) - 2 * overlap;
        }
        self.sets[a].symmetric_difference_count(&self.sets[b])
    }

    /// `a ⊂ b` strictly.
    pub fn is_strict_subset(&self, a: PolicyId, b: PolicyId) -> bool {
        if self.sizes[a] >= self.sizes[b] {
            return false;
        }
        if self.kind != FamilyKind::Explicit {
            let (sa, ea) = self.spans[a];
            let (sb, eb) = self.spans[b];
            return sb <= sa && ea <= eb;
        }
        self.sets[a].is_subset(&self.sets[b])
    }

    /// `Σ_{i∈π} values[i]` for each requested policy.
    pub fn policy_sums(&self, values: &[f64], ids: &[PolicyId]) -> Vec<f64> {
        if self.kind != FamilyKind::Explicit {
            let mut prefix = Vec::with_capacity(values.len() + 1);
            prefix.push(0.0);
            let mut acc = 0.0;
            for v in values {
                acc += v;
                prefix.push(acc);
            }
            return ids
                .iter()
                .map(|&id| {
                    let (a, b) = self.spans[id];
                    prefix[b] - prefix[a]
                })
                .collect();
        }
        ids.iter()
            .map(|&id| self.sets[id].ones().map(|i| values[i]).sum())
            .collect()
    }

    /// Items on which the active policies disagree: their union minus their
    /// intersection.
    pub fn symdiff_region(&self, active: &[PolicyId]) -> Result<ItemSet> {
        let (&first, rest) = active.split_first().ok_or(Error::EmptyActive)?;
        self.check_id(first)?;
        let mut union = self.sets[first].clone();
        let mut inter = self.sets[first].clone();
        for &id in rest {
            self.check_id(id)?;
            union.union_with(&self.sets[id]);
            inter.intersect_with(&self.sets[id]);
        }
        union.difference_with(&inter);
        Ok(union)
    }

    /// Union of the policies that are active but not yet controlled.
    pub fn uncontrolled_union(&self, active: &[PolicyId], controlled: &[PolicyId]) -> Result<ItemSet> {
        let mut in_active = FixedBitSet::with_capacity(self.len());
        for &id in active {
            self.check_id(id)?;
            in_active.insert(id);
        }
        let mut in_controlled = FixedBitSet::with_capacity(self.len());
        for &id in controlled {
            if id >= self.len() || !in_active.contains(id) {
                return Err(Error::ControlledNotActive(id));
            }
            in_controlled.insert(id);
        }
        let mut out = ItemSet::with_capacity(self.n);
        for id in in_active.difference(&in_controlled) {
            out.union_with(&self.sets[id]);
        }
        Ok(out)
    }

    /// Number of policies in the family with exactly `k` items.
    pub fn size_count(&self, k: usize) -> usize {
        self.size_counts.get(k).copied().unwrap_or(0)
    }

    /// `|{π' ∈ Π : |π' Δ anchor| = k}|`.
    pub fn shell_count(&self, anchor: PolicyId, k: usize) -> usize {
        if self.kind == FamilyKind::Thresholds {
            let j = self.sizes[anchor];
            if k == 0 {
                return 1;
            }
            return usize::from(j > k) + usize::from(j + k <= self.n);
        }
        self.anchor_counts[anchor]
            .get_or_init(|| {
                let mut hist = vec![0u32; self.n + 1];
                for other in self.ids() {
                    hist[self.symdiff_len(anchor, other)] += 1;
                }
                hist
            })
            .get(k)
            .map_or(0, |&c| c as usize)
    }

    /// Local complexity weight `V_π` of a single policy, capped at `|π|` and
    /// floored at 1.
    pub fn complexity_single(&self, id: PolicyId) -> Result<f64> {
        self.check_id(id)?;
        let k = self.sizes[id];
        let count = self.size_count(k);
        let raw = match self.weight_mode {
            WeightMode::SauerCount => log2_count_ceil(count),
            WeightMode::AnalyticVc => match self.kind {
                FamilyKind::Explicit => *self.size_vc[k].get_or_init(|| {
                    let members: Vec<&ItemSet> = self
                        .ids()
                        .filter(|&p| self.sizes[p] == k)
                        .map(|p| &self.sets[p])
                        .collect();
                    vc_dimension(&members, self.n)
                }),
                kind => structured_vc(kind, count),
            },
        };
        Ok(f64::from(raw.min(k as u32).max(1)))
    }

    /// Pairwise complexity weight `V_{π,π'}`: the larger of the two anchored
    /// shell complexities, capped at `|π Δ π'|` and floored at 1.
    pub fn complexity_pair(&self, a: PolicyId, b: PolicyId) -> Result<f64> {
        self.check_id(a)?;
        self.check_id(b)?;
        if a == b {
            return Err(Error::SamePolicy(a));
        }
        Ok(self.pair_weight(a, b))
    }

    /// `complexity_pair` without validation, for the engines' inner loops.
    pub(crate) fn pair_weight(&self, a: PolicyId, b: PolicyId) -> f64 {
        let k = self.symdiff_len(a, b);
        let raw = self.shell_complexity(a, k).max(self.shell_complexity(b, k));
        f64::from(raw.min(k as u32).max(1))
    }

    fn shell_complexity(&self, anchor: PolicyId, k: usize) -> u32 {
        match (self.weight_mode, self.kind) {
            (WeightMode::SauerCount, _) => log2_count_ceil(self.shell_count(anchor, k)),
            (WeightMode::AnalyticVc, FamilyKind::Explicit) => {
                let shells = self.anchor_vc[anchor].get_or_init(|| {
                    let mut groups: Vec<Vec<&ItemSet>> = vec![Vec::new(); self.n + 1];
                    for other in self.ids() {
                        groups[self.symdiff_len(anchor, other)].push(&self.sets[other]);
                    }
                    groups.iter().map(|g| vc_dimension(g, self.n)).collect()
                });
                shells.get(k).copied().unwrap_or(0)
            }
            (WeightMode::AnalyticVc, kind) => structured_vc(kind, self.shell_count(anchor, k)),
        }
    }
}

fn check_count(count: usize) -> Result<()> {
    if count > MAX_POLICIES {
        return Err(invalid(format!(
            "family would hold {count} policies, above the limit of {MAX_POLICIES}"
        )));
    }
    Ok(())
}

/// `ceil(log2 max(count, 2))`.
fn log2_count_ceil(count: usize) -> u32 {
    let c = count.max(2);
    usize::BITS - (c - 1).leading_zeros()
}

fn log2_count_floor(count: usize) -> u32 {
    if count <= 1 {
        0
    } else {
        usize::BITS - 1 - count.leading_zeros()
    }
}

/// VC dimension of a sub-family of a structured class: the class dimension
/// (1 for thresholds, 2 for intervals), never above `floor(log2 |B|)`.
fn structured_vc(kind: FamilyKind, count: usize) -> u32 {
    let class = match kind {
        FamilyKind::Thresholds => 1,
        FamilyKind::Intervals => 2,
        FamilyKind::Explicit => unreachable!("explicit families have no class constant"),
    };
    log2_count_floor(count).min(class)
}

/// Brute-force VC dimension of a small collection of sets. Falls back to
/// `ceil(log2 |B|)`, an upper bound, when the search exceeds the budget.
pub fn vc_dimension(sets: &[&ItemSet], n: usize) -> u32 {
    if sets.len() <= 1 {
        return 0;
    }
    let mut union = ItemSet::with_capacity(n);
    let mut inter = sets[0].clone();
    for s in sets {
        union.union_with(s);
        inter.intersect_with(s);
    }
    union.difference_with(&inter);
    let candidates: Vec<usize> = union.ones().collect();
    let m = candidates.len();
    let d_max = (log2_count_floor(sets.len()) as usize).min(m);

    let mut vc = 0;
    for d in 1..=d_max {
        if binomial(m, d).saturating_mul(sets.len() as u64) > VC_SEARCH_BUDGET {
            return log2_count_ceil(sets.len());
        }
        if !any_shattered(sets, &candidates, d) {
            break;
        }
        vc = d as u32;
    }
    vc
}

fn any_shattered(sets: &[&ItemSet], candidates: &[usize], d: usize) -> bool {
    let mut idx: Vec<usize> = (0..d).collect();
    let mut seen = vec![false; 1 << d];
    loop {
        seen.iter_mut().for_each(|s| *s = false);
        let mut distinct = 0;
        for s in sets {
            let trace = idx.iter().enumerate().fold(0usize, |acc, (bit, &c)| {
                acc | (usize::from(s.contains(candidates[c])) << bit)
            });
            if !seen[trace] {
                seen[trace] = true;
                distinct += 1;
            }
        }
        if distinct == 1 << d {
            return true;
        }
        // next combination in lexicographic order
        let m = candidates.len();
        let mut pos = d;
        while pos > 0 && idx[pos - 1] == m - d + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return false;
        }
        idx[pos - 1] += 1;
        for j in pos..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn binomial(m: usize, d: usize) -> u64 {
    let d = d.min(m - d);
    let mut acc: u64 = 1;
    for j in 0..d {
        acc = acc.saturating_mul((m - j) as u64) / (j as u64 + 1);
    }
    acc
}
