//! Readout confusion matrices with and without measurement twirling.

use aces_core::channels::{damping_measurement_model, ConfusionMatrix};
use aces_core::models::READOUT_FLIP;
use aces_core::seed::task_rng;
use aces_core::simulator::{estimate_confusion, NoiseModel};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ReadoutSource};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub qubit: usize,
    pub planted: ConfusionMatrix,
    pub planted_symmetrized: ConfusionMatrix,
    pub raw: ConfusionMatrix,
    pub twirled: ConfusionMatrix,
    /// `|C₀₁ − C₁₀|` of the estimates.
    pub raw_asymmetry: f64,
    pub twirled_asymmetry: f64,
    /// Binomial standard error of the twirled asymmetry.
    pub twirled_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub shots: u64,
    pub entries: Vec<ConfusionEntry>,
}

fn asymmetry_sigma(c: &ConfusionMatrix, shots: u64) -> f64 {
    let n = shots as f64;
    let (a, b) = (c.get(0, 1), c.get(1, 0));
    (a * (1.0 - a) / n + b * (1.0 - b) / n).sqrt()
}

pub fn run_confusion_demo(cfg: &ExperimentConfig) -> Result<ConfusionReport> {
    let planted: Vec<ConfusionMatrix> = match &cfg.confusion.readout {
        ReadoutSource::Damping { gamma, beta } => vec![damping_measurement_model(*gamma, *beta)?.1],
        ReadoutSource::AppendixBitFlip => READOUT_FLIP
            .iter()
            .map(|&p| ConfusionMatrix::bit_flip(p))
            .collect::<aces_core::Result<_>>()?,
    };
    let mut nm = NoiseModel::noiseless(planted.len())?;
    for (q, c) in planted.iter().enumerate() {
        nm.set_readout(q, c.clone())?;
    }
    let mut entries = Vec::new();
    for (q, c) in planted.iter().enumerate() {
        let mut rng = task_rng(cfg.seed, &[q as u64, 0]);
        let raw = estimate_confusion(&nm, &[q], cfg.shots, &mut rng, false)?;
        let mut rng = task_rng(cfg.seed, &[q as u64, 1]);
        let twirled = estimate_confusion(&nm, &[q], cfg.shots, &mut rng, true)?;
        entries.push(ConfusionEntry {
            qubit: q,
            planted: c.clone(),
            planted_symmetrized: c.symmetrized(),
            raw_asymmetry: raw.asymmetry(),
            twirled_asymmetry: twirled.asymmetry(),
            twirled_sigma: asymmetry_sigma(&twirled, cfg.shots),
            raw,
            twirled,
        });
    }
    Ok(ConfusionReport {
        shots: cfg.shots,
        entries,
    })
}
