//! Index streams and label oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::instance::{Instance, NoiseMode};

/// Independent, reproducible generator for one logical stream of a trial.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DrawMode {
    WithReplacement,
    WithoutReplacement,
}

impl From<NoiseMode> for DrawMode {
    fn from(mode: NoiseMode) -> Self {
        match mode {
            NoiseMode::Stochastic => DrawMode::WithReplacement,
            NoiseMode::Persistent => DrawMode::WithoutReplacement,
        }
    }
}

/// Uniform item indices, with or without replacement.
///
/// Without replacement is a lazy Fisher-Yates shuffle: the first `draws`
/// entries of `perm` are the indices handed out so far.
#[derive(Debug, Clone)]
pub struct IndexStream {
    mode: DrawMode,
    n: usize,
    perm: Vec<u32>,
    draws: usize,
    rng: ChaCha8Rng,
}

impl IndexStream {
    pub fn new(mode: DrawMode, n: usize, rng: ChaCha8Rng) -> Self {
        let perm = match mode {
            DrawMode::WithoutReplacement => (0..n as u32).collect(),
            DrawMode::WithReplacement => Vec::new(),
        };
        Self {
            mode,
            n,
            perm,
            draws: 0,
            rng,
        }
    }

    pub fn next_index(&mut self) -> Result<usize> {
        let idx = match self.mode {
            DrawMode::WithReplacement => self.rng.random_range(0..self.n),
            DrawMode::WithoutReplacement => {
                if self.draws >= self.n {
                    return Err(Error::StreamExhausted { n: self.n });
                }
                let j = self.rng.random_range(self.draws..self.n);
                self.perm.swap(self.draws, j);
                self.perm[self.draws] as usize
            }
        };
        self.draws += 1;
        Ok(idx)
    }

    pub fn mode(&self) -> DrawMode {
        self.mode
    }

    pub fn draws(&self) -> usize {
        self.draws
    }

    /// Indices already handed out (without-replacement streams only).
    pub fn drawn(&self) -> &[u32] {
        match self.mode {
            DrawMode::WithoutReplacement => &self.perm[..self.draws],
            DrawMode::WithReplacement => &[],
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.mode == DrawMode::WithoutReplacement && self.draws >= self.n
    }

    pub(crate) fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Something the engines can pull rewards from. `query_count` counts
/// observations only.
pub trait RewardOracle {
    fn n(&self) -> usize;
    fn mode(&self) -> NoiseMode;
    fn pull(&mut self, i: usize) -> Result<f64>;
    fn query_count(&self) -> u64;
}

/// Bernoulli labels of an [`Instance`].
#[derive(Debug, Clone)]
pub struct LabelOracle<'a> {
    instance: &'a Instance,
    rng: ChaCha8Rng,
    query_count: u64,
}

impl<'a> LabelOracle<'a> {
    pub fn new(instance: &'a Instance, rng: ChaCha8Rng) -> Self {
        Self {
            instance,
            rng,
            query_count: 0,
        }
    }

    pub fn observe(&mut self, i: usize) -> Result<u8> {
        let n = self.instance.n();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i + 1, n });
        }
        self.query_count += 1;
        Ok(match self.instance.realized_labels() {
            Some(labels) => labels[i],
            None => u8::from(self.rng.random::<f64>() < self.instance.eta()[i]),
        })
    }

    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }
}

/// Labels recentred to rewards `2Y - 1` with mean `2η - 1`.
#[derive(Debug, Clone)]
pub struct SignedLabels<'a>(pub LabelOracle<'a>);

impl RewardOracle for SignedLabels<'_> {
    fn n(&self) -> usize {
        self.0.instance.n()
    }

    fn mode(&self) -> NoiseMode {
        self.0.instance.mode()
    }

    fn pull(&mut self, i: usize) -> Result<f64> {
        Ok(2.0 * f64::from(self.0.observe(i)?) - 1.0)
    }

    fn query_count(&self) -> u64 {
        self.0.query_count
    }
}

/// Arms with arbitrary finite reward distributions supported on `[-1, 1]`.
/// In persistent mode every pull returns the arm's mean.
#[derive(Debug, Clone)]
pub struct DiscreteRewardOracle {
    arms: Vec<Vec<(f64, f64)>>,
    mode: NoiseMode,
    rng: ChaCha8Rng,
    query_count: u64,
}

impl DiscreteRewardOracle {
    /// `arms[i]` lists `(value, probability)` pairs.
    pub fn new(arms: Vec<Vec<(f64, f64)>>, mode: NoiseMode, rng: ChaCha8Rng) -> Result<Self> {
        if arms.is_empty() {
            return Err(invalid("need at least one arm"));
        }
        for (i, arm) in arms.iter().enumerate() {
            let total: f64 = arm.iter().map(|&(_, p)| p).sum();
            if arm.is_empty()
                || (total - 1.0).abs() > 1e-9
                || arm
                    .iter()
                    .any(|&(v, p)| !(-1.0..=1.0).contains(&v) || !(0.0..=1.0).contains(&p))
            {
                return Err(invalid(format!("arm {} is not a distribution on [-1, 1]", i + 1)));
            }
        }
        Ok(Self {
            arms,
            mode,
            rng,
            query_count: 0,
        })
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.arms[i].iter().map(|&(v, p)| v * p).sum()
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.arms.len()).map(|i| self.mean(i)).collect()
    }
}

impl RewardOracle for DiscreteRewardOracle {
    fn n(&self) -> usize {
        self.arms.len()
    }

    fn mode(&self) -> NoiseMode {
        self.mode
    }

    fn pull(&mut self, i: usize) -> Result<f64> {
        let n = self.arms.len();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i + 1, n });
        }
        self.query_count += 1;
        if self.mode == NoiseMode::Persistent {
            return Ok(self.mean(i));
        }
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for &(v, p) in &self.arms[i] {
            acc += p;
            if u < acc {
                return Ok(v);
            }
        }
        Ok(self.arms[i].last().map_or(0.0, |&(v, _)| v))
    }

    fn query_count(&self) -> u64 {
        self.query_count
    }
}
