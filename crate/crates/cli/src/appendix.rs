//! Residual-versus-shots study for the four benchmark models and the
//! comparison of the two fitting methods.

use aces_core::aces::{ParamLayout, SamplingConfig};
use aces_core::estimation::{fit, residual_report, FitMethod, FitProblem};
use aces_core::models::AppendixModel;
use aces_core::pipeline::{fit_sets, pooled_residuals, simulate_pool};
use aces_core::seed::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aces_run::design;
use crate::config::ExperimentConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotPoint {
    pub shots: u64,
    pub std: f64,
    pub mean: f64,
    pub median_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCurve {
    pub model: AppendixModel,
    pub points: Vec<ShotPoint>,
    /// Log-log slope of the residual std over all shot counts.
    pub slope: f64,
    /// Log-log slope between the last two shot counts.
    pub top_slope: f64,
}

impl ModelCurve {
    pub fn final_std(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonInstance {
    pub repetition: usize,
    pub set: usize,
    /// Whether the least-squares solution needed a simplex projection.
    pub projected: bool,
    pub ls_mean: f64,
    pub bc_mean: f64,
    pub ls_mean_abs: f64,
    pub bc_mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerComparison {
    pub model: AppendixModel,
    pub shots: u64,
    pub instances: Vec<ComparisonInstance>,
    pub projected: usize,
    /// Averages over the projected instances.
    pub ls_mean_signed: f64,
    pub bc_mean_signed: f64,
    pub ls_mean_abs: f64,
    pub bc_mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub seed: u64,
    pub curves: Vec<ModelCurve>,
    pub comparison: OptimizerComparison,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn run_appendix(cfg: &ExperimentConfig) -> Result<AppendixReport> {
    let p = &cfg.appendix;
    let layout = ParamLayout::two_qubit();
    let (pool, sets) = design(cfg.seed, &p.design, &layout, p.sets)?;

    let mut curves = Vec::new();
    for (mi, model) in AppendixModel::ALL.into_iter().enumerate() {
        let nm = model.noise_model();
        let mut points = Vec::new();
        for &shots in &p.shots {
            let sc = SamplingConfig { shots, mitigate: true };
            let data = simulate_pool(&pool, &nm, &sc, derive_seed(cfg.seed, &[3, mi as u64, shots]))?;
            let fits = fit_sets(&pool, &sets, &data, FitMethod::BoundConstrained, &p.fit)?;
            let r = pooled_residuals(&pool, &sets, &fits, &data);
            points.push(ShotPoint {
                shots,
                std: r.std,
                mean: r.mean,
                median_abs: r.median_abs,
            });
        }
        let x: Vec<f64> = points.iter().map(|q| q.shots as f64).collect();
        let y: Vec<f64> = points.iter().map(|q| q.std).collect();
        let k = x.len();
        curves.push(ModelCurve {
            model,
            slope: loglog_slope(&x, &y),
            top_slope: loglog_slope(&x[k - 2..], &y[k - 2..]),
            points,
        });
    }

    let model = AppendixModel::I;
    let nm = model.noise_model();
    let sc = SamplingConfig {
        shots: p.comparison_shots,
        mitigate: true,
    };
    let instances = (0..p.comparison_repetitions)
        .into_par_iter()
        .map(|rep| {
            let data = simulate_pool(&pool, &nm, &sc, derive_seed(cfg.seed, &[4, rep as u64]))?;
            let values = data.values();
            let si = rep % sets.len();
            let set = &sets[si];
            let fp = FitProblem::from_pool(&pool, set, &values)?;
            let rows: Vec<_> = set.iter().map(|&i| pool.rows[i].clone()).collect();
            let obs: Vec<f64> = set.iter().map(|&i| values[i]).collect();
            let ls = fit(&fp, FitMethod::LeastSquaresTvd, &p.fit)?;
            let bc = fit(&fp, FitMethod::BoundConstrained, &p.fit)?;
            let rl = residual_report(&ls, &layout, &rows, &obs);
            let rb = residual_report(&bc, &layout, &rows, &obs);
            Ok(ComparisonInstance {
                repetition: rep,
                set: si,
                projected: !ls.info.projected_channels.is_empty(),
                ls_mean: rl.mean,
                bc_mean: rb.mean,
                ls_mean_abs: rl.mean_abs,
                bc_mean_abs: rb.mean_abs,
            })
        })
        .collect::<aces_core::Result<Vec<_>>>()?;
    let proj: Vec<&ComparisonInstance> = instances.iter().filter(|i| i.projected).collect();
    let avg = |f: fn(&ComparisonInstance) -> f64| {
        if proj.is_empty() {
            f64::NAN
        } else {
            mean(&proj.iter().map(|i| f(i)).collect::<Vec<_>>())
        }
    };
    let comparison = OptimizerComparison {
        model,
        shots: p.comparison_shots,
        projected: proj.len(),
        ls_mean_signed: avg(|i| i.ls_mean),
        bc_mean_signed: avg(|i| i.bc_mean),
        ls_mean_abs: avg(|i| i.ls_mean_abs),
        bc_mean_abs: avg(|i| i.bc_mean_abs),
        instances,
    };
    Ok(AppendixReport {
        seed: cfg.seed,
        curves,
        comparison,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [100.0, 1e3, 1e4, 1e5];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y) + 0.5).abs() < 1e-12);
    }
}
