//! Single- and two-qubit RB with the interleaved CZ variant.

use aces_core::channels::average_gate_fidelity;
use aces_core::rb::{fidelity_1q, fidelity_irb, fidelity_irb_err, run_rb_experiment, run_simultaneous_rb, RbConfig, RbResult};
use aces_core::seed::derive_seed;
use aces_core::simulator::GateKey;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbReport {
    pub seed: u64,
    pub shots: u64,
    /// One-qubit RB on each qubit alone.
    pub individual: Vec<RbResult>,
    pub simultaneous: Vec<RbResult>,
    pub reference: RbResult,
    pub interleaved: RbResult,
    pub fidelity_1q: Vec<f64>,
    pub fidelity_1q_simultaneous: Vec<f64>,
    pub cz_fidelity: f64,
    pub cz_fidelity_err: f64,
    /// Average fidelity of the planted CZ channel.
    pub cz_planted: Option<f64>,
}

pub fn run_rb(cfg: &ExperimentConfig) -> Result<RbReport> {
    let nm = cfg.noise.build()?;
    if nm.num_qubits() != 2 {
        return Err(CliError::Config("rb is defined for two qubits".into()));
    }
    let p = &cfg.rb;
    let one = |q: usize| RbConfig {
        qubits: vec![q],
        depths: p.depths_1q.clone(),
        circuits_per_depth: p.circuits_per_depth,
        shots: cfg.shots,
        interleave: false,
    };
    let individual = (0..2)
        .map(|q| run_rb_experiment(&nm, &one(q), derive_seed(cfg.seed, &[0, q as u64])))
        .collect::<aces_core::Result<Vec<_>>>()?;
    let simultaneous = run_simultaneous_rb(&nm, &one(0), derive_seed(cfg.seed, &[1]))?;
    let mut two = RbConfig {
        qubits: vec![0, 1],
        depths: p.depths_2q.clone(),
        circuits_per_depth: p.circuits_per_depth,
        shots: cfg.shots,
        interleave: false,
    };
    let reference = run_rb_experiment(&nm, &two, derive_seed(cfg.seed, &[2]))?;
    two.interleave = true;
    let interleaved = run_rb_experiment(&nm, &two, derive_seed(cfg.seed, &[3]))?;
    Ok(RbReport {
        seed: cfg.seed,
        shots: cfg.shots,
        fidelity_1q: individual.iter().map(|r| fidelity_1q(r.fit.alpha)).collect(),
        fidelity_1q_simultaneous: simultaneous.iter().map(|r| fidelity_1q(r.fit.alpha)).collect(),
        cz_fidelity: fidelity_irb(interleaved.fit.alpha, reference.fit.alpha)?,
        cz_fidelity_err: fidelity_irb_err(&interleaved.fit, &reference.fit),
        cz_planted: nm.gate(&GateKey::cz(0, 1)).map(average_gate_fidelity),
        individual,
        simultaneous,
        reference,
        interleaved,
    })
}
