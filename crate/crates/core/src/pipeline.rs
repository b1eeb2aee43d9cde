//! End-to-end ACES runs: simulate a design pool, fit many design sets and
//! summarize the fits.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aces::{exact_eigenvalues, DesignRow, simulate_eigenvalues, DesignPool, EigenvalueEstimate, SamplingConfig};
use crate::error::{Error, Result};
use crate::estimation::{fit, quantile, residual_report, ErrorModelEstimate, FitMethod, FitOptions, FitProblem, ResidualReport};
use crate::simulator::NoiseModel;

/// Eigenvalue data for a whole pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolData {
    /// `None` for infinite-shot data.
    pub shots: Option<u64>,
    pub estimates: Vec<EigenvalueEstimate>,
}

impl PoolData {
    pub fn values(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.value).collect()
    }

    pub fn clipped(&self) -> usize {
        self.estimates.iter().filter(|e| e.clipped).count()
    }
}

pub fn simulate_pool(pool: &DesignPool, nm: &NoiseModel, cfg: &SamplingConfig, seed: u64) -> Result<PoolData> {
    Ok(PoolData {
        shots: Some(cfg.shots),
        estimates: simulate_eigenvalues(pool, nm, cfg, seed)?,
    })
}

pub fn exact_pool(pool: &DesignPool, nm: &NoiseModel, mitigate: bool) -> Result<PoolData> {
    let estimates = exact_eigenvalues(pool, nm, mitigate)?
        .into_iter()
        .map(|raw| {
            let value = raw.clamp(crate::aces::EIGENVALUE_FLOOR, 1.0);
            EigenvalueEstimate {
                value,
                raw,
                stderr: 0.0,
                clipped: value != raw,
            }
        })
        .collect();
    Ok(PoolData {
        shots: None,
        estimates,
    })
}

/// One fit per design set, in set order.
pub fn fit_sets(
    pool: &DesignPool,
    sets: &[Vec<usize>],
    data: &PoolData,
    method: FitMethod,
    opt: &FitOptions,
) -> Result<Vec<ErrorModelEstimate>> {
    let values = data.values();
    sets.par_iter()
        .map(|set| fit(&FitProblem::from_pool(pool, set, &values)?, method, opt))
        .collect()
}

/// Residuals of each fit against the rows of its own design set,
/// concatenated in set order.
pub fn pooled_residuals(
    pool: &DesignPool,
    sets: &[Vec<usize>],
    fits: &[ErrorModelEstimate],
    data: &PoolData,
) -> ResidualReport {
    let values = data.values();
    let (mut res, mut log_res) = (Vec::new(), Vec::new());
    for (f, set) in fits.iter().zip(sets) {
        let rows: Vec<DesignRow> = set.iter().map(|&i| pool.rows[i].clone()).collect();
        let obs: Vec<f64> = set.iter().map(|&i| values[i]).collect();
        let r = residual_report(f, &pool.layout, &rows, &obs);
        res.extend(r.residuals);
        log_res.extend(r.log_residuals);
    }
    ResidualReport::new(res, log_res)
}

/// Five-number summary plus mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxStats {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("no values to summarize".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(BoxStats {
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

/// Per-channel fidelity statistics across fits.
pub fn fidelity_stats(fits: &[ErrorModelEstimate]) -> Result<BTreeMap<String, BoxStats>> {
    let mut by: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for f in fits {
        for (k, v) in &f.fidelities {
            by.entry(k.clone()).or_default().push(*v);
        }
    }
    by.into_iter().map(|(k, v)| Ok((k, BoxStats::new(&v)?))).collect()
}

/// Statistics of one parameter column across fits.
pub fn param_stats(fits: &[ErrorModelEstimate], col: usize) -> Result<BoxStats> {
    BoxStats::new(&fits.iter().map(|f| f.params[col]).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_stats() {
        let s = BoxStats::new(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max, s.mean), (1.0, 2.0, 3.0, 4.0, 5.0, 3.0));
        assert!(BoxStats::new(&[]).is_err());
    }
}
