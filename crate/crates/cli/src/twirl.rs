//! Repeated-CZ probe of a coherent phase error, with and without twirling.

use aces_core::circuits::{inject_coherent_error, Circuit, GateOp};
use aces_core::seed::task_rng;
use aces_core::simulator::{run_exact, run_shots, Experiment, NoiseModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;

/// Qubit 0 in `|1⟩`, qubit 1 on the equator; `n_cz` CZs each followed by
/// `Rz(theta)` on qubit 1, then qubit 1 is rotated back and measured. For
/// odd `n_cz` the ideal outcome is 0.
pub fn probe_circuit(n_cz: usize, theta: f64) -> Result<Circuit> {
    let mut c = Circuit::new(2);
    c.push(GateOp::sqrt_x(0)).push(GateOp::sqrt_x(0)).push(GateOp::sqrt_x(1));
    for _ in 0..n_cz {
        c.push(GateOp::cz(0, 1));
    }
    let mut c = inject_coherent_error(&c, theta, 1)?;
    c.push(GateOp::sqrt_x(1));
    Ok(c.with_measurements(&[1]))
}

/// Survival of the probe with a fully coherent error, `½(1 + cos(NΔθ))`.
pub fn coherent_curve(n_cz: usize, theta: f64) -> f64 {
    0.5 * (1.0 + (n_cz as f64 * theta).cos())
}

/// Survival once twirling turns the error into dephasing, `½(1 + cosᴺΔθ)`.
pub fn twirled_curve(n_cz: usize, theta: f64) -> f64 {
    0.5 * (1.0 + theta.cos().powi(n_cz as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwirlPoint {
    pub n_cz: usize,
    pub theta: f64,
    pub twirled: f64,
    pub untwirled: f64,
    /// Infinite-shot values under the planted model.
    pub exact_twirled: f64,
    pub exact_untwirled: f64,
}

/// Least-squares fit of `½(1 + A f(Δθ))` to one curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub n_cz: usize,
    pub twirl: bool,
    /// Amplitude for the form expected in this mode.
    pub amplitude: f64,
    /// Integer `k` for which `cosᵏΔθ` fits best.
    pub best_power: usize,
    pub ssr_power: f64,
    pub ssr_multiple: f64,
    /// `"power"` when `cosᴺΔθ` fits better than `cos(NΔθ)`, else `"multiple"`.
    pub preferred: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwirlDemoReport {
    pub shots: u64,
    pub points: Vec<TwirlPoint>,
    pub fits: Vec<CurveFit>,
}

/// Returns `(A, ssr)` for `y ≈ ½(1 + A f)`.
fn fit_amplitude(y: &[f64], f: &[f64]) -> (f64, f64) {
    let num: f64 = y.iter().zip(f).map(|(y, f)| (2.0 * y - 1.0) * f).sum();
    let den: f64 = f.iter().map(|f| f * f).sum();
    let a = if den > 0.0 { num / den } else { 0.0 };
    let ssr = y.iter().zip(f).map(|(y, f)| (y - 0.5 * (1.0 + a * f)).powi(2)).sum();
    (a, ssr)
}

pub fn fit_curve(n_cz: usize, twirl: bool, thetas: &[f64], y: &[f64]) -> CurveFit {
    let power = |k: usize| -> Vec<f64> { thetas.iter().map(|t| t.cos().powi(k as i32)).collect() };
    let multiple: Vec<f64> = thetas.iter().map(|t| (n_cz as f64 * t).cos()).collect();
    let (a_pow, ssr_power) = fit_amplitude(y, &power(n_cz));
    let (a_mul, ssr_multiple) = fit_amplitude(y, &multiple);
    let best_power = (1..=4 * n_cz.max(1) + 4)
        .min_by(|&a, &b| fit_amplitude(y, &power(a)).1.total_cmp(&fit_amplitude(y, &power(b)).1))
        .unwrap_or(1);
    CurveFit {
        n_cz,
        twirl,
        amplitude: if twirl { a_pow } else { a_mul },
        best_power,
        ssr_power,
        ssr_multiple,
        preferred: if ssr_power < ssr_multiple { "power" } else { "multiple" }.into(),
    }
}

pub fn theta_grid(points: usize, max: f64) -> Vec<f64> {
    (0..points).map(|i| max * i as f64 / (points - 1) as f64).collect()
}

fn survival(nm: &NoiseModel, n_cz: usize, theta: f64, shots: u64, seed: u64, path: [u64; 3]) -> Result<(f64, f64, f64, f64)> {
    let exp = Experiment::from_circuit(&probe_circuit(n_cz, theta)?)?;
    let mut rng = task_rng(seed, &path);
    let tw = run_shots(&exp, nm, shots, &mut rng, true)?.probs[0];
    let raw = run_shots(&exp, nm, shots, &mut rng, false)?.probs[0];
    let ex_tw = run_exact(&exp, nm, true)?.probs[0];
    let ex_raw = run_exact(&exp, nm, false)?.probs[0];
    Ok((tw, raw, ex_tw, ex_raw))
}

pub fn run_twirl_demo(cfg: &ExperimentConfig) -> Result<TwirlDemoReport> {
    let nm = cfg.noise.build()?;
    let thetas = theta_grid(cfg.twirl.points, cfg.twirl.theta_max);
    let jobs: Vec<(usize, usize, usize)> = cfg
        .twirl
        .n_cz
        .iter()
        .enumerate()
        .flat_map(|(ni, &n)| (0..thetas.len()).map(move |ti| (ni, n, ti)))
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(ni, n, ti)| {
            let (tw, raw, ex_tw, ex_raw) = survival(&nm, n, thetas[ti], cfg.shots, cfg.seed, [0, ni as u64, ti as u64])?;
            Ok(TwirlPoint {
                n_cz: n,
                theta: thetas[ti],
                twirled: tw,
                untwirled: raw,
                exact_twirled: ex_tw,
                exact_untwirled: ex_raw,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut fits = Vec::new();
    for &n in &cfg.twirl.n_cz {
        let pts: Vec<&TwirlPoint> = points.iter().filter(|p| p.n_cz == n).collect();
        let th: Vec<f64> = pts.iter().map(|p| p.theta).collect();
        let tw: Vec<f64> = pts.iter().map(|p| p.twirled).collect();
        let raw: Vec<f64> = pts.iter().map(|p| p.untwirled).collect();
        fits.push(fit_curve(n, true, &th, &tw));
        fits.push(fit_curve(n, false, &th, &raw));
    }
    Ok(TwirlDemoReport {
        shots: cfg.shots,
        points,
        fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_is_ideal_without_error() {
        let nm = NoiseModel::noiseless(2).unwrap();
        for n in [1, 3, 11] {
            let exp = Experiment::from_circuit(&probe_circuit(n, 0.0).unwrap()).unwrap();
            assert!((run_exact(&exp, &nm, false).unwrap().probs[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_curves_follow_closed_forms() {
        let nm = NoiseModel::noiseless(2).unwrap();
        for n in [1, 11] {
            for &t in &[0.3, 1.1, std::f64::consts::PI] {
                let exp = Experiment::from_circuit(&probe_circuit(n, t).unwrap()).unwrap();
                let tw = run_exact(&exp, &nm, true).unwrap().probs[0];
                let raw = run_exact(&exp, &nm, false).unwrap().probs[0];
                assert!((tw - twirled_curve(n, t)).abs() < 1e-12);
                assert!((raw - coherent_curve(n, t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn curve_fit_selects_form_and_power() {
        let th = theta_grid(25, std::f64::consts::PI);
        let y: Vec<f64> = th.iter().map(|&t| 0.5 * (1.0 + 0.7 * t.cos().powi(5))).collect();
        let f = fit_curve(5, true, &th, &y);
        assert_eq!(f.best_power, 5);
        assert_eq!(f.preferred, "power");
        assert!((f.amplitude - 0.7).abs() < 1e-12);
        let y: Vec<f64> = th.iter().map(|&t| coherent_curve(5, t)).collect();
        assert_eq!(fit_curve(5, false, &th, &y).preferred, "multiple");
    }
}
