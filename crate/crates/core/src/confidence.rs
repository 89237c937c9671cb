//! Deviation bounds for the set-sum estimators.
//!
//! The estimators live on the sum scale: `μ̂_π = (n/t) Σ_s y_s 1{I_s ∈ π}`.
//! [`conf_single`] and [`conf_pair`] are Bernstein radii with a union bound
//! weighted by local complexity; in persistent mode the without-replacement
//! factors `ρ_t`, `κ_t` tighten them. [`conf_threshold_pair`] is the
//! log-log radius for nested thresholds, stated on the averaged scale.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::family::{FamilyKind, PolicyFamily, PolicyId};
use crate::instance::NoiseMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    GeneralVc,
    ThresholdSpecial,
}

/// Which radius the engines use.
///
/// `mode` selects the correction factors and is independent of the
/// instance's noise: a persistent run with `mode = Stochastic` uses the
/// uncorrected radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub mode: NoiseMode,
    pub kind: BoundKind,
    pub n: usize,
}

impl BoundConfig {
    pub fn new(mode: NoiseMode, kind: BoundKind, n: usize) -> Self {
        Self { mode, kind, n }
    }

    pub fn general(mode: NoiseMode, n: usize) -> Self {
        Self::new(mode, BoundKind::GeneralVc, n)
    }

    pub fn validate(&self, family: &PolicyFamily) -> Result<()> {
        if self.n != family.n() {
            return Err(invalid(format!(
                "bound configured for n = {} but family has n = {}",
                self.n,
                family.n()
            )));
        }
        if self.kind == BoundKind::ThresholdSpecial && family.kind() != FamilyKind::Thresholds {
            return Err(invalid("the threshold bound needs a thresholds family"));
        }
        Ok(())
    }

    /// `C₁` for a family member.
    pub fn single_radius(&self, family: &PolicyFamily, id: PolicyId, t: u64, delta: f64) -> Result<f64> {
        let v = family.complexity_single(id)?;
        conf_single(family.size(id), v, t, delta, self)
    }

    /// Pairwise radius on the sum scale.
    pub fn pair_radius(&self, family: &PolicyFamily, a: PolicyId, b: PolicyId, t: u64, delta: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        match self.kind {
            BoundKind::GeneralVc => conf_pair(family.symdiff_len(a, b), family.pair_weight(a, b), t, delta, self),
            BoundKind::ThresholdSpecial => {
                let r = conf_threshold_pair(family.size(a), family.size(b), self.n, t, delta)?;
                Ok(self.n as f64 * r)
            }
        }
    }

    /// Smallest pairwise radius any two distinct policies can have at `(t, δ)`.
    pub fn min_pair_radius(&self, t: u64, delta: f64) -> Result<f64> {
        match self.kind {
            BoundKind::GeneralVc => conf_pair(1, 1.0, t, delta, self),
            BoundKind::ThresholdSpecial => Ok(self.n as f64 * conf_threshold_pair(1, 2, self.n.max(2), t, delta)?),
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("confidence level must lie in (0, 1), got {delta}")))
    }
}

/// Without-replacement correction factors `(ρ_t, κ_t)`; `(1, 1)` in
/// stochastic mode. At `t = n/2` both branches are evaluated and the larger
/// value of each is kept.
pub fn rho_kappa(t: u64, n: usize, mode: NoiseMode) -> Result<(f64, f64)> {
    if t == 0 {
        return Err(invalid("draw count must be at least 1"));
    }
    if mode == NoiseMode::Stochastic {
        return Ok((1.0, 1.0));
    }
    if t > n as u64 {
        return Err(invalid(format!("persistent draw count {t} exceeds n = {n}")));
    }
    let (tf, nf) = (t as f64, n as f64);
    let low = || {
        let rho = 1.0 - (tf - 1.0) / nf;
        let kappa = 4.0 / 3.0 + (tf * (tf - 1.0) / (nf * (nf - tf + 1.0))).sqrt();
        (rho, kappa)
    };
    let high = || {
        let rho = 1.0 - tf / nf;
        let kappa = 4.0 / 3.0 + ((nf - tf - 1.0) * (nf - tf) / ((tf + 1.0) * nf)).max(0.0).sqrt();
        (rho, kappa)
    };
    let twice = 2 * t;
    Ok(match twice.cmp(&(n as u64)) {
        std::cmp::Ordering::Less => low(),
        std::cmp::Ordering::Greater => high(),
        std::cmp::Ordering::Equal => {
            let (r1, k1) = low();
            let (r2, k2) = high();
            (r1.max(r2), k1.max(k2))
        }
    })
}

/// `C₁(π, t, δ) = sqrt(4 ρ_t |π| n V_π log(n/δ) / t) + 4 n κ_t V_π log(n/δ) / (3t)`.
///
/// Divide by `|π|` to get the radius on the FDR scale.
pub fn conf_single(size: usize, v: f64, t: u64, delta: f64, cfg: &BoundConfig) -> Result<f64> {
    check_delta(delta)?;
    let (rho, kappa) = rho_kappa(t, cfg.n, cfg.mode)?;
    let n = cfg.n as f64;
    let (tf, log_term) = (t as f64, (n / delta).ln());
    Ok((4.0 * rho * size as f64 * n * v * log_term / tf).sqrt() + 4.0 * n * kappa * v * log_term / (3.0 * tf))
}

/// `C₂(π, π', t, δ) = sqrt(8 ρ_t |πΔπ'| n V log(n/δ) / t) + 4 κ_t n V log(n/δ) / (3t)`,
/// zero for an empty symmetric difference.
pub fn conf_pair(symdiff: usize, v: f64, t: u64, delta: f64, cfg: &BoundConfig) -> Result<f64> {
    check_delta(delta)?;
    let (rho, kappa) = rho_kappa(t, cfg.n, cfg.mode)?;
    if symdiff == 0 {
        return Ok(0.0);
    }
    let n = cfg.n as f64;
    let (tf, log_term) = (t as f64, (n / delta).ln());
    Ok((8.0 * rho * symdiff as f64 * n * v * log_term / tf).sqrt() + 4.0 * kappa * n * v * log_term / (3.0 * tf))
}

/// Log-log radius for the difference of two threshold means on the
/// averaged scale `(1/T) Σ y 1{I ≤ s}`:
///
/// `sqrt((2d/(nT)) (43 + 2√2 L)) + (12 + L)/(3T)` with `d = |s - t'|` and
/// `L = log(2 log₂²(4d) / (3δ))`.
pub fn conf_threshold_pair(s: usize, t_prime: usize, n: usize, big_t: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if big_t == 0 {
        return Err(invalid("draw count must be at least 1"));
    }
    if s == 0 || t_prime == 0 || s > n || t_prime > n {
        return Err(invalid(format!("threshold indices {s}, {t_prime} outside 1..={n}")));
    }
    let d = s.abs_diff(t_prime);
    if d == 0 {
        return Ok(0.0);
    }
    let df = d as f64;
    let peel = (4.0 * df).log2().powi(2);
    let log_term = (2.0 * peel / (3.0 * delta)).ln();
    let tf = big_t as f64;
    let first = (2.0 * df / (n as f64 * tf) * (43.0 + 2.0 * std::f64::consts::SQRT_2 * log_term)).sqrt();
    Ok(first + (12.0 + log_term) / (3.0 * tf))
}
