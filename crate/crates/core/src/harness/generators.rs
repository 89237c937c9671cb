//! Synthetic instances from two noise models: Tsybakov threshold noise and
//! the sparse β-band.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::family::PolicyFamily;
use crate::instance::{Instance, NoiseMode};
use crate::sampling::stream_rng;

/// Instance generator as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    TsybakovThreshold {
        n: usize,
        h: f64,
        noise_exponent: f64,
        z: f64,
    },
    BetaBand {
        n: usize,
        beta: f64,
        band_end: usize,
    },
    ExplicitEta {
        eta: Vec<f64>,
    },
}

impl Generator {
    pub fn n(&self) -> usize {
        match self {
            Generator::TsybakovThreshold { n, .. } | Generator::BetaBand { n, .. } => *n,
            Generator::ExplicitEta { eta } => eta.len(),
        }
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Ok(match self.clone() {
            Generator::TsybakovThreshold {
                h, noise_exponent, z, ..
            } => Generator::TsybakovThreshold {
                n,
                h,
                noise_exponent,
                z,
            },
            Generator::BetaBand { beta, band_end, .. } => Generator::BetaBand { n, beta, band_end },
            Generator::ExplicitEta { .. } => return Err(invalid("an explicit η vector has a fixed n")),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Generator::TsybakovThreshold { .. } => "tsybakov",
            Generator::BetaBand { .. } => "beta_band",
            Generator::ExplicitEta { .. } => "explicit",
        }
    }

    /// Builds the instance for one trial. Persistent runs of non-0/1 means
    /// realize their labels once from `seed`; the β-band always does.
    pub fn instance(&self, mode: NoiseMode, seed: u64) -> Result<Instance> {
        let eta = match self {
            Generator::TsybakovThreshold {
                n,
                h,
                noise_exponent,
                z,
            } => gen_tsybakov(*n, *h, *noise_exponent, *z)?.eta().to_vec(),
            Generator::BetaBand { n, beta, band_end } => {
                if mode != NoiseMode::Persistent {
                    return Err(invalid("the β-band model needs persistent noise"));
                }
                return gen_beta_band(*n, *beta, *band_end, seed);
            }
            Generator::ExplicitEta { eta } => eta.clone(),
        };
        match mode {
            NoiseMode::Stochastic => Instance::stochastic(eta),
            NoiseMode::Persistent => Instance::realize_persistent(eta, &mut stream_rng(seed, 7)),
        }
    }
}

/// `η_i = 1/2 + sign(z - i/n) h |z - i/n|^a / 2` for `i = 1..n`, with
/// `sign(0) = +1`.
pub fn gen_tsybakov(n: usize, h: f64, noise_exponent: f64, z: f64) -> Result<Instance> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if !(h > 0.0 && h <= 1.0) {
        return Err(invalid(format!("h must lie in (0, 1], got {h}")));
    }
    if !(noise_exponent >= 0.0 && noise_exponent.is_finite()) {
        return Err(invalid(format!(
            "noise exponent must be nonnegative, got {noise_exponent}"
        )));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(invalid(format!("boundary must lie in [0, 1], got {z}")));
    }
    let eta = (1..=n)
        .map(|i| {
            let d = z - i as f64 / n as f64;
            let sign = if d >= 0.0 { 1.0 } else { -1.0 };
            0.5 + sign / 2.0 * h * d.abs().powf(noise_exponent)
        })
        .collect();
    Instance::stochastic(eta)
}

/// Persistent labels `Y_i ~ Ber(β)` for `i ≤ z` and `0` beyond, drawn once.
pub fn gen_beta_band(n: usize, beta: f64, band_end: usize, seed: u64) -> Result<Instance> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("β must lie in (0, 1), got {beta}")));
    }
    if band_end == 0 || band_end > n {
        return Err(invalid(format!("band end must lie in [1, {n}], got {band_end}")));
    }
    let mut rng = stream_rng(seed, 7);
    let eta = (0..n)
        .map(|i| {
            if i < band_end && rng.random_bool(beta) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Instance::persistent(eta)
}

/// `m` distinct nonempty random subsets of `[n]`, each item included with
/// probability 1/2.
pub fn random_explicit_family<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<PolicyFamily> {
    if n == 0 || m == 0 {
        return Err(invalid("a random family needs n ≥ 1 and at least one policy"));
    }
    if n < usize::BITS as usize && m as u128 >= 1u128 << n {
        return Err(invalid(format!(
            "only {} nonempty subsets of {n} items",
            (1u128 << n) - 1
        )));
    }
    let mut seen = std::collections::HashSet::new();
    let mut policies = Vec::with_capacity(m);
    while policies.len() < m {
        let set: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if !set.is_empty() && seen.insert(set.clone()) {
            policies.push(set);
        }
    }
    PolicyFamily::explicit(n, policies)
}
