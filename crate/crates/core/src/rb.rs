//! Randomized benchmarking and interleaved RB.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{rb_sequence, Circuit, CliffordGroup};
use crate::error::{Error, Result};
use crate::seed::task_rng;
use crate::simulator::{sample_exact, Experiment, NoiseModel};

/// Fit of `B · α^N + asymptote`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub b: f64,
    pub alpha: f64,
    pub asymptote: f64,
    /// Covariance of `(B, α)`.
    pub covariance: [[f64; 2]; 2],
}

impl DecayFit {
    pub fn alpha_err(&self) -> f64 {
        self.covariance[1][1].max(0.0).sqrt()
    }

    pub fn b_err(&self) -> f64 {
        self.covariance[0][0].max(0.0).sqrt()
    }

    pub fn predict(&self, depth: f64) -> f64 {
        self.b * self.alpha.powf(depth) + self.asymptote
    }
}

/// Least-squares fit of survival probabilities to `B α^N + asymptote`.
///
/// Starts from `B` = first point minus the asymptote and `α` from a
/// log-linear regression, then refines with Levenberg–Marquardt keeping
/// `0 < α ≤ 1`.
pub fn fit_decay(depths: &[f64], survival: &[f64], asymptote: f64) -> Result<DecayFit> {
    if depths.len() != survival.len() {
        return Err(Error::DimensionMismatch {
            expected: depths.len(),
            found: survival.len(),
        });
    }
    let mut distinct = depths.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::FitDegenerate("need at least three distinct depths".into()));
    }
    if survival.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidParameter("survival probabilities must lie in [0, 1]".into()));
    }
    if survival.iter().all(|&s| s <= asymptote) {
        return Err(Error::FitDegenerate("survival never exceeds the asymptote".into()));
    }
    // ordered by depth for the initial guess
    let mut pts: Vec<(f64, f64)> = depths.iter().copied().zip(survival.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let above: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(_, y)| *y > asymptote)
        .map(|&(x, y)| (x, (y - asymptote).ln()))
        .collect();
    let mut alpha = if above.len() >= 2 {
        let n = above.len() as f64;
        let mx = above.iter().map(|p| p.0).sum::<f64>() / n;
        let my = above.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = above.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = above.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            (sxy / sxx).exp()
        } else {
            1.0
        }
    } else {
        0.5
    };
    alpha = alpha.clamp(1e-6, 1.0);
    let mut b = pts[0].1 - asymptote;
    if b <= 0.0 {
        b = above.iter().map(|p| p.1.exp()).fold(0.0, f64::max);
    }

    let resid = |b: f64, a: f64| -> f64 {
        depths
            .iter()
            .zip(survival)
            .map(|(&n, &y)| (b * a.powf(n) + asymptote - y).powi(2))
            .sum()
    };
    let jac = |b: f64, a: f64| -> (DMatrix<f64>, DVector<f64>) {
        let m = depths.len();
        let mut j = DMatrix::zeros(m, 2);
        let mut r = DVector::zeros(m);
        for (i, (&n, &y)) in depths.iter().zip(survival).enumerate() {
            let an = a.powf(n);
            j[(i, 0)] = an;
            j[(i, 1)] = if n == 0.0 { 0.0 } else { b * n * a.powf(n - 1.0) };
            r[i] = b * an + asymptote - y;
        }
        (j, r)
    };
    let mut cost = resid(b, alpha);
    let mut mu = 1e-3;
    for _ in 0..500 {
        let (j, r) = jac(b, alpha);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() < 1e-15 {
            break;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut h = jtj.clone();
            h[(0, 0)] *= 1.0 + mu;
            h[(1, 1)] *= 1.0 + mu;
            h[(0, 0)] += 1e-300;
            h[(1, 1)] += 1e-300;
            let Some(step) = h.lu().solve(&(-&g)) else {
                mu *= 10.0;
                continue;
            };
            let nb = b + step[0];
            let na = (alpha + step[1]).clamp(1e-12, 1.0);
            let nc = resid(nb, na);
            if nc < cost {
                let rel = (cost - nc) / cost.max(1e-300);
                b = nb;
                alpha = na;
                cost = nc;
                mu = (mu / 10.0).max(1e-12);
                accepted = true;
                if rel < 1e-15 {
                    mu = f64::NAN;
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted || mu.is_nan() {
            break;
        }
    }
    let (j, _) = jac(b, alpha);
    let m = depths.len();
    let dof = (m as f64 - 2.0).max(1.0);
    let s2 = cost / dof;
    let cov = (j.transpose() * &j)
        .try_inverse()
        .map(|c| c * s2)
        .unwrap_or_else(|| DMatrix::from_element(2, 2, f64::NAN));
    Ok(DecayFit {
        b,
        alpha,
        asymptote,
        covariance: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
    })
}

/// Average single-qubit Clifford fidelity `1 − (1 − α)/2`.
pub fn fidelity_1q(alpha: f64) -> f64 {
    1.0 - 0.5 * (1.0 - alpha)
}

/// Interleaved two-qubit gate fidelity `1 − ¾(1 − α_int/α_ref)`.
pub fn fidelity_irb(alpha_int: f64, alpha_ref: f64) -> Result<f64> {
    if alpha_ref == 0.0 {
        return Err(Error::InvalidParameter("reference decay is zero".into()));
    }
    if !(0.0 < alpha_int && alpha_int <= alpha_ref && alpha_ref <= 1.0) {
        log::warn!("IRB decays out of order: α_int={alpha_int}, α_ref={alpha_ref}");
    }
    Ok(1.0 - 0.75 * (1.0 - alpha_int / alpha_ref))
}

/// First-order uncertainty of [`fidelity_irb`] from the two fits.
pub fn fidelity_irb_err(int: &DecayFit, reference: &DecayFit) -> f64 {
    let r = int.alpha / reference.alpha;
    let rel = (int.alpha_err() / int.alpha).powi(2) + (reference.alpha_err() / reference.alpha).powi(2);
    0.75 * r * rel.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbConfig {
    /// One qubit, or two for two-qubit RB.
    pub qubits: Vec<usize>,
    pub depths: Vec<usize>,
    pub circuits_per_depth: usize,
    pub shots: u64,
    pub interleave: bool,
}

impl Default for RbConfig {
    fn default() -> Self {
        RbConfig {
            qubits: vec![0],
            depths: vec![1, 10, 25, 50, 100, 200, 400],
            circuits_per_depth: 20,
            shots: 256,
            interleave: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbResult {
    pub qubits: Vec<usize>,
    pub interleave: bool,
    pub depths: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fit: DecayFit,
    /// Mean native gate count per reference Clifford in the drawn sequences.
    pub gates_per_clifford: f64,
}

fn survival_all_zero(d: &crate::simulator::OutcomeDistribution) -> f64 {
    d.probs[0]
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

fn check_config(nm: &NoiseModel, cfg: &RbConfig) -> Result<()> {
    if cfg.depths.is_empty() || cfg.circuits_per_depth == 0 || cfg.shots == 0 {
        return Err(Error::InvalidParameter(
            "RB needs depths, circuits and shots".into(),
        ));
    }
    if cfg.qubits.iter().any(|&q| q >= nm.num_qubits()) {
        return Err(Error::InvalidParameter(format!(
            "RB qubits {:?} outside the register",
            cfg.qubits
        )));
    }
    Ok(())
}

/// Runs RB (or IRB with `cfg.interleave`) on `cfg.qubits` with twirled
/// readout, `cfg.shots` shots per random sequence.
pub fn run_rb_experiment(nm: &NoiseModel, cfg: &RbConfig, seed: u64) -> Result<RbResult> {
    check_config(nm, cfg)?;
    let n = nm.num_qubits();
    let k = cfg.qubits.len();
    let jobs: Vec<(usize, usize)> = (0..cfg.depths.len())
        .flat_map(|d| (0..cfg.circuits_per_depth).map(move |c| (d, c)))
        .collect();
    let results: Vec<(f64, usize, usize)> = jobs
        .par_iter()
        .map(|&(d, c)| {
            let mut rng = task_rng(seed, &[d as u64, c as u64]);
            let seq = rb_sequence(n, &cfg.qubits, cfg.depths[d], cfg.interleave, &mut rng)?;
            let circuit = seq.circuit.with_measurements(&cfg.qubits);
            let exp = Experiment::from_circuit(&circuit)?;
            let dist = sample_exact(&exp, nm, cfg.shots, &mut rng, true)?;
            Ok((survival_all_zero(&dist), seq.compiled_gates, seq.cliffords.len() + 1))
        })
        .collect::<Result<_>>()?;
    let mut mean = Vec::new();
    let mut std = Vec::new();
    for d in 0..cfg.depths.len() {
        let v: Vec<f64> = results[d * cfg.circuits_per_depth..(d + 1) * cfg.circuits_per_depth]
            .iter()
            .map(|r| r.0)
            .collect();
        let (m, s) = mean_std(&v);
        mean.push(m);
        std.push(s);
    }
    let gates: usize = results.iter().map(|r| r.1).sum();
    let cliffords: usize = results.iter().map(|r| r.2).sum();
    let depths_f: Vec<f64> = cfg.depths.iter().map(|&d| d as f64).collect();
    let fit = fit_decay(&depths_f, &mean, 1.0 / (1 << k) as f64)?;
    Ok(RbResult {
        qubits: cfg.qubits.clone(),
        interleave: cfg.interleave,
        depths: cfg.depths.clone(),
        mean,
        std,
        fit,
        gates_per_clifford: gates as f64 / cliffords as f64,
    })
}

/// Single-qubit RB on every qubit at once with independent sequences; the
/// survival of each qubit is read from its marginal.
pub fn run_simultaneous_rb(nm: &NoiseModel, cfg: &RbConfig, seed: u64) -> Result<Vec<RbResult>> {
    let n = nm.num_qubits();
    let all: Vec<usize> = (0..n).collect();
    check_config(nm, &RbConfig { qubits: all.clone(), ..cfg.clone() })?;
    let jobs: Vec<(usize, usize)> = (0..cfg.depths.len())
        .flat_map(|d| (0..cfg.circuits_per_depth).map(move |c| (d, c)))
        .collect();
    let results: Vec<(Vec<f64>, usize, usize)> = jobs
        .par_iter()
        .map(|&(d, c)| {
            let mut rng = task_rng(seed, &[d as u64, c as u64]);
            let mut circuit = Circuit::new(n);
            let mut gates = 0;
            let mut cliffords = 0;
            for q in 0..n {
                let seq = rb_sequence(n, &[q], cfg.depths[d], false, &mut rng)?;
                circuit.ops.extend(seq.circuit.ops);
                gates += seq.compiled_gates;
                cliffords += seq.cliffords.len() + 1;
            }
            let exp = Experiment::from_circuit(&circuit.with_measurements(&all))?;
            let dist = sample_exact(&exp, nm, cfg.shots, &mut rng, true)?;
            let surv = (0..n)
                .map(|q| {
                    let bit = 1 << (n - 1 - q);
                    dist.probs
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| j & bit == 0)
                        .map(|(_, p)| p)
                        .sum()
                })
                .collect();
            Ok((surv, gates, cliffords))
        })
        .collect::<Result<_>>()?;
    let depths_f: Vec<f64> = cfg.depths.iter().map(|&d| d as f64).collect();
    let gates: usize = results.iter().map(|r| r.1).sum();
    let cliffords: usize = results.iter().map(|r| r.2).sum();
    (0..n)
        .map(|q| {
            let mut mean = Vec::new();
            let mut std = Vec::new();
            for d in 0..cfg.depths.len() {
                let v: Vec<f64> = results[d * cfg.circuits_per_depth..(d + 1) * cfg.circuits_per_depth]
                    .iter()
                    .map(|r| r.0[q])
                    .collect();
                let (m, s) = mean_std(&v);
                mean.push(m);
                std.push(s);
            }
            let fit = fit_decay(&depths_f, &mean, 0.5)?;
            Ok(RbResult {
                qubits: vec![q],
                interleave: false,
                depths: cfg.depths.clone(),
                mean,
                std,
                fit,
                gates_per_clifford: gates as f64 / cliffords as f64,
            })
        })
        .collect()
}

/// `E_C[λ^{len(C)}]` over the Clifford group for a per-gate global
/// eigenvalue `lambda` shared by every native gate: the RB decay expected
/// when all gates carry the same depolarizing channel.
pub fn depolarizing_rb_alpha(n: usize, lambda_1q: f64, lambda_cz: f64) -> f64 {
    let g = CliffordGroup::get(n);
    (0..g.len())
        .map(|i| {
            g.word(i)
                .iter()
                .map(|op| if op.qubits.len() == 2 { lambda_cz } else { lambda_1q })
                .product::<f64>()
        })
        .sum::<f64>()
        / g.len() as f64
}
