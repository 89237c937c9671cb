//! Problem instances: a pool of `n` items, each with a Bernoulli label mean.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// How repeated queries of the same item behave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Every query is a fresh Bernoulli draw.
    Stochastic,
    /// Each item has one fixed label; querying it again reveals nothing new.
    Persistent,
}

impl std::fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseMode::Stochastic => f.write_str("stochastic"),
            NoiseMode::Persistent => f.write_str("persistent"),
        }
    }
}

impl std::str::FromStr for NoiseMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stochastic" => Ok(NoiseMode::Stochastic),
            "persistent" => Ok(NoiseMode::Persistent),
            other => Err(invalid(format!("unknown noise mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    eta: Vec<f64>,
    mode: NoiseMode,
    realized: Option<Vec<u8>>,
}

impl Instance {
    pub fn stochastic(eta: Vec<f64>) -> Result<Self> {
        check_eta(&eta)?;
        Ok(Self {
            eta,
            mode: NoiseMode::Stochastic,
            realized: None,
        })
    }

    /// Persistent instance whose means are already 0/1; the labels equal the means.
    pub fn persistent(eta: Vec<f64>) -> Result<Self> {
        check_eta(&eta)?;
        let labels = eta
            .iter()
            .map(|&e| match e {
                0.0 => Ok(0),
                1.0 => Ok(1),
                e => Err(invalid(format!(
                    "persistent instance needs 0/1 means or explicit labels, got {e}"
                ))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self {
            eta,
            mode: NoiseMode::Persistent,
            realized: Some(labels),
        })
    }

    pub fn persistent_with_labels(eta: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        check_eta(&eta)?;
        if labels.len() != eta.len() {
            return Err(invalid("label vector length differs from n"));
        }
        for (i, (&e, &y)) in eta.iter().zip(&labels).enumerate() {
            if y > 1 {
                return Err(invalid(format!("label {y} at item {} is not 0/1", i + 1)));
            }
            if (e == 0.0 && y != 0) || (e == 1.0 && y != 1) {
                return Err(invalid(format!(
                    "label at item {} contradicts degenerate mean {e}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            eta,
            mode: NoiseMode::Persistent,
            realized: Some(labels),
        })
    }

    /// Realizes every label once from its Bernoulli mean.
    pub fn realize_persistent<R: Rng + ?Sized>(eta: Vec<f64>, rng: &mut R) -> Result<Self> {
        check_eta(&eta)?;
        let labels = eta.iter().map(|&e| u8::from(rng.random::<f64>() < e)).collect();
        Self::persistent_with_labels(eta, labels)
    }

    pub fn n(&self) -> usize {
        self.eta.len()
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn realized_labels(&self) -> Option<&[u8]> {
        self.realized.as_deref()
    }

    /// Means the learner is actually measured against: the realized labels in
    /// persistent mode, `eta` otherwise.
    pub fn truth(&self) -> Vec<f64> {
        match &self.realized {
            Some(labels) => labels.iter().map(|&y| f64::from(y)).collect(),
            None => self.eta.clone(),
        }
    }
}

fn check_eta(eta: &[f64]) -> Result<()> {
    if eta.is_empty() {
        return Err(invalid("instance needs at least one item"));
    }
    if let Some((i, e)) = eta.iter().enumerate().find(|(_, e)| !(0.0..=1.0).contains(*e)) {
        return Err(invalid(format!("eta[{}] = {e} outside [0, 1]", i + 1)));
    }
    Ok(())
}
