//! Full ACES pipeline on a planted model: design pool, simulated data,
//! many fits, fidelity and residual statistics, injected-error sweep.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use aces_core::aces::{build_design_pool, DesignPolicy, select_complete_sets, Block, DesignPool, ParamLayout, SamplingConfig};
use aces_core::channels::average_gate_fidelity;
use aces_core::circuits::inject_coherent_error;
use aces_core::estimation::{abs_cdf, ErrorModelEstimate, OptimizerInfo};
use aces_core::pipeline::{
    fidelity_stats, fit_sets, param_stats, pooled_residuals, simulate_pool, BoxStats, PoolData,
};
use aces_core::seed::{derive_seed, task_rng};
use aces_core::simulator::NoiseModel;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub rows: usize,
    pub circuits: usize,
    pub rank: usize,
    pub sets: usize,
}

/// Parameters of one fit, without the rebuilt noise model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub set: Vec<usize>,
    pub params: Vec<f64>,
    pub fidelities: BTreeMap<String, f64>,
    pub info: OptimizerInfo,
}

impl FitRecord {
    fn new(set: &[usize], f: &ErrorModelEstimate) -> Self {
        FitRecord {
            set: set.to_vec(),
            params: f.params.clone(),
            fidelities: f.fidelities.clone(),
            info: f.info.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualCurve {
    pub shots: u64,
    pub mean: f64,
    pub std: f64,
    pub mean_abs: f64,
    pub median_abs: f64,
    pub log_std: f64,
    /// `(|residual|, cumulative probability)`.
    pub cdf: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedSweep {
    pub turns: f64,
    pub theta: f64,
    /// Distribution of every CZ Pauli rate across fits.
    pub cz_rates: BTreeMap<String, BoxStats>,
    pub cz_fidelity: BoxStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcesRunReport {
    pub seed: u64,
    pub shots: u64,
    pub pool: PoolSummary,
    pub columns: Vec<String>,
    pub planted_params: Vec<f64>,
    pub planted_fidelities: BTreeMap<String, f64>,
    pub fits: Vec<FitRecord>,
    pub fidelity_stats: BTreeMap<String, BoxStats>,
    pub cz_fidelity_histogram: Vec<HistogramBin>,
    pub residuals: Vec<ResidualCurve>,
    pub injected: Vec<InjectedSweep>,
}

pub const CZ_LABEL: &str = "cz[0,1]";

/// Design pool and `k` complete sets drawn from the run seed.
pub fn design(seed: u64, policy: &DesignPolicy, layout: &ParamLayout, k: usize) -> Result<(DesignPool, Vec<Vec<usize>>)> {
    let mut rng = task_rng(seed, &[0]);
    let pool = build_design_pool(layout, policy, &mut rng)?;
    let sets = select_complete_sets(&pool, k, &mut rng)?;
    if sets.len() < k {
        return Err(CliError::Numerical(aces_core::Error::InvalidParameter(format!(
            "only {} distinct complete sets available, {k} requested",
            sets.len()
        ))));
    }
    Ok((pool, sets))
}

pub fn planted_fidelities(nm: &NoiseModel) -> BTreeMap<String, f64> {
    let mut m: BTreeMap<String, f64> = nm
        .gates()
        .iter()
        .map(|(k, ch)| (k.to_string(), average_gate_fidelity(ch)))
        .collect();
    for (q, ch) in nm.spam().iter().enumerate() {
        m.insert(Block::Spam(q).label(), average_gate_fidelity(ch));
    }
    m
}

fn residual_curve(pool: &DesignPool, sets: &[Vec<usize>], fits: &[ErrorModelEstimate], data: &PoolData) -> ResidualCurve {
    let r = pooled_residuals(pool, sets, fits, data);
    let n = r.log_residuals.len() as f64;
    let lm = r.log_residuals.iter().sum::<f64>() / n;
    let log_std = (r.log_residuals.iter().map(|x| (x - lm).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    ResidualCurve {
        shots: data.shots.unwrap_or(0),
        mean: r.mean,
        std: r.std,
        mean_abs: r.mean_abs,
        median_abs: r.median_abs,
        log_std,
        cdf: abs_cdf(&r.residuals),
    }
}

pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: lo + i as f64 * width,
            hi: lo + (i + 1) as f64 * width,
            count,
        })
        .collect()
}

fn injected_pool(pool: &DesignPool, theta: f64) -> Result<DesignPool> {
    let circuits = pool
        .circuits
        .iter()
        .map(|c| inject_coherent_error(c, theta, 1))
        .collect::<aces_core::Result<_>>()?;
    Ok(DesignPool {
        layout: pool.layout.clone(),
        circuits,
        rows: pool.rows.clone(),
    })
}

fn cz_rate_stats(layout: &ParamLayout, fits: &[ErrorModelEstimate]) -> Result<BTreeMap<String, BoxStats>> {
    let (_, off, w) = layout
        .blocks()
        .find(|(b, _, _)| b.label() == CZ_LABEL)
        .ok_or_else(|| CliError::Config("layout has no CZ block".into()))?;
    (off..off + w)
        .map(|c| {
            let name = layout.column_name(c);
            let pauli = name.rsplit(':').next().unwrap_or(&name).to_string();
            Ok((pauli, param_stats(fits, c)?))
        })
        .collect()
}

pub fn run_aces(cfg: &ExperimentConfig) -> Result<AcesRunReport> {
    let nm = cfg.noise.build()?;
    if nm.num_qubits() != 2 {
        return Err(CliError::Config("the ACES run is defined for two qubits".into()));
    }
    let layout = ParamLayout::two_qubit();
    let (pool, sets) = design(cfg.seed, &cfg.aces.design, &layout, cfg.aces.sets)?;
    let method = cfg.aces.method;
    let opt = &cfg.aces.fit;
    let sample = |p: &DesignPool, shots: u64, path: &[u64]| {
        simulate_pool(
            p,
            &nm,
            &SamplingConfig {
                shots,
                mitigate: cfg.aces.mitigate,
            },
            derive_seed(cfg.seed, path),
        )
    };

    let main = sample(&pool, cfg.shots, &[1, cfg.shots])?;
    let fits = fit_sets(&pool, &sets, &main, method, opt)?;

    let mut residuals = Vec::new();
    for &s in &cfg.aces.residual_shots {
        let curve = if s == cfg.shots {
            residual_curve(&pool, &sets, &fits, &main)
        } else {
            let d = sample(&pool, s, &[1, s])?;
            residual_curve(&pool, &sets, &fit_sets(&pool, &sets, &d, method, opt)?, &d)
        };
        residuals.push(curve);
    }

    let mut injected = Vec::new();
    for (i, &turns) in cfg.aces.injected_turns.iter().enumerate() {
        let theta = turns * 2.0 * PI;
        let f = if turns == 0.0 {
            fits.clone()
        } else {
            let p = injected_pool(&pool, theta)?;
            let d = sample(&p, cfg.shots, &[2, i as u64])?;
            fit_sets(&p, &sets, &d, method, opt)?
        };
        let fids: Vec<f64> = f.iter().map(|e| e.fidelities[CZ_LABEL]).collect();
        injected.push(InjectedSweep {
            turns,
            theta,
            cz_rates: cz_rate_stats(&layout, &f)?,
            cz_fidelity: BoxStats::new(&fids)?,
        });
    }

    let cz: Vec<f64> = fits.iter().map(|f| f.fidelities[CZ_LABEL]).collect();
    Ok(AcesRunReport {
        seed: cfg.seed,
        shots: cfg.shots,
        pool: PoolSummary {
            rows: pool.rows.len(),
            circuits: pool.circuits.len(),
            rank: pool.rank(),
            sets: sets.len(),
        },
        columns: (0..layout.width()).map(|c| layout.column_name(c)).collect(),
        planted_params: layout.params_from_model(&nm)?,
        planted_fidelities: planted_fidelities(&nm),
        fidelity_stats: fidelity_stats(&fits)?,
        cz_fidelity_histogram: histogram(&cz, cfg.aces.histogram_bins),
        fits: sets.iter().zip(&fits).map(|(s, f)| FitRecord::new(s, f)).collect(),
        residuals,
        injected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.1, 0.5, 1.0, 1.0], 4);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 5);
        assert_eq!(h[3].count, 2);
        assert_eq!(h[0].lo, 0.0);
        assert_eq!(h[3].hi, 1.0);
    }
}
