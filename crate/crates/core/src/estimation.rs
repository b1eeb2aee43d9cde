//! Fitting Pauli error rates to estimated circuit eigenvalues.
//!
//! Parameters are the non-identity Pauli probabilities of every channel in a
//! [`ParamLayout`]; each channel's identity probability is one minus the
//! rest. The eigenvalue of column `a` is `λ_a = 1 − 2 Σ_b p_b` over the Paulis
//! `b` of the same channel that anticommute with `a`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::aces::{DesignPool, DesignRow, ParamLayout, EIGENVALUE_FLOOR};
use crate::channels::{average_gate_fidelity, inverse_hadamard};
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::simulator::NoiseModel;

/// Linear system `A · x = b` with `x = −log λ` and `b = −log Λ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub layout: ParamLayout,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Optional per-row weights (typically `1/σ²` of `log Λ̂`).
    pub weights: Option<DVector<f64>>,
}

impl FitProblem {
    pub fn new(layout: ParamLayout, a: DMatrix<f64>, lambda_hat: &[f64]) -> Result<Self> {
        if a.ncols() != layout.width() {
            return Err(Error::DimensionMismatch {
                expected: layout.width(),
                found: a.ncols(),
            });
        }
        if a.nrows() != lambda_hat.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: lambda_hat.len(),
            });
        }
        if let Some(bad) = lambda_hat.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::NonFinite(format!("circuit eigenvalue {bad} has no logarithm")));
        }
        let b = DVector::from_iterator(lambda_hat.len(), lambda_hat.iter().map(|l| -l.ln()));
        Ok(FitProblem {
            layout,
            a,
            b,
            weights: None,
        })
    }

    /// Problem over the pool rows `rows` with per-row estimates `lambda_hat`
    /// (indexed like `pool.rows`).
    pub fn from_pool(pool: &DesignPool, rows: &[usize], lambda_hat: &[f64]) -> Result<Self> {
        let sel: Vec<f64> = rows.iter().map(|&i| lambda_hat[i]).collect();
        FitProblem::new(pool.layout.clone(), pool.matrix(rows), &sel)
    }

    pub fn with_weights(mut self, w: Vec<f64>) -> Result<Self> {
        if w.len() != self.b.len() {
            return Err(Error::DimensionMismatch {
                expected: self.b.len(),
                found: w.len(),
            });
        }
        self.weights = Some(DVector::from_vec(w));
        Ok(self)
    }

    fn sqrt_w(&self) -> Option<DVector<f64>> {
        self.weights.as_ref().map(|w| w.map(f64::sqrt))
    }
}

/// Per-block anticommutation structure used by the eigenvalue map.
#[derive(Debug, Clone)]
struct EigenMap {
    /// For each column, the columns (same block) it anticommutes with.
    anti: Vec<Vec<usize>>,
}

impl EigenMap {
    fn new(layout: &ParamLayout) -> Self {
        let mut anti = vec![Vec::new(); layout.width()];
        for (b, off, w) in layout.blocks() {
            let k = b.qubits().len();
            for i in 0..w {
                let a = PauliString::from_index(k, i + 1);
                for j in 0..w {
                    let c = PauliString::from_index(k, j + 1);
                    if !a.commutes_with(&c) {
                        anti[off + i].push(off + j);
                    }
                }
            }
        }
        EigenMap { anti }
    }

    fn lambda(&self, p: &[f64]) -> Vec<f64> {
        self.anti
            .iter()
            .map(|js| 1.0 - 2.0 * js.iter().map(|&j| p[j]).sum::<f64>())
            .collect()
    }
}

/// Box bounds, starting point and stopping rule of the bound-constrained fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub lower: f64,
    pub upper: f64,
    pub init: f64,
    /// Converged when the projected gradient's max norm drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            lower: 0.0,
            upper: 0.2,
            init: 1e-4,
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    BoundConstrained,
    LeastSquaresTvd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerInfo {
    pub method: FitMethod,
    pub iterations: usize,
    pub converged: bool,
    /// `‖A log λ(p) − log Λ̂‖₂` at the solution.
    pub objective: f64,
    pub projected_gradient: f64,
    /// Channels whose least-squares probabilities had to be projected.
    pub projected_channels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModelEstimate {
    /// Non-identity probabilities in layout order.
    pub params: Vec<f64>,
    pub noise_model: NoiseModel,
    /// Average gate fidelity of each channel, by block label.
    pub fidelities: BTreeMap<String, f64>,
    pub info: OptimizerInfo,
}

impl ErrorModelEstimate {
    fn new(layout: &ParamLayout, params: Vec<f64>, info: OptimizerInfo) -> Result<Self> {
        let noise_model = layout.model_from_params(&params)?;
        let mut fidelities = BTreeMap::new();
        for (b, off, w) in layout.blocks() {
            let k = b.qubits().len();
            let ch = crate::channels::PauliChannel::from_error_rates(k, &params[off..off + w])?;
            fidelities.insert(b.label(), average_gate_fidelity(&ch));
        }
        Ok(ErrorModelEstimate {
            params,
            noise_model,
            fidelities,
            info,
        })
    }

    /// Per-column eigenvalues of the fitted model.
    pub fn eigenvalues(&self, layout: &ParamLayout) -> Vec<f64> {
        EigenMap::new(layout).lambda(&self.params)
    }

    pub fn fidelity(&self, label: &str) -> Option<f64> {
        self.fidelities.get(label).copied()
    }
}

/// Objective `½ Σ w_μ r_μ²` with `r = A log λ(p) + b`, or `None` where some
/// `λ ≤ 0`.
struct Objective<'a> {
    fp: &'a FitProblem,
    map: EigenMap,
    sw: Option<DVector<f64>>,
}

impl<'a> Objective<'a> {
    fn new(fp: &'a FitProblem) -> Self {
        Objective {
            fp,
            map: EigenMap::new(&fp.layout),
            sw: fp.sqrt_w(),
        }
    }

    fn residual(&self, p: &[f64]) -> Option<(DVector<f64>, Vec<f64>)> {
        let lam = self.map.lambda(p);
        if lam.iter().any(|&l| !(l > 0.0)) {
            return None;
        }
        let log = DVector::from_iterator(lam.len(), lam.iter().map(|l| l.ln()));
        let mut r = &self.fp.a * log + &self.fp.b;
        if let Some(sw) = &self.sw {
            r.component_mul_assign(sw);
        }
        Some((r, lam))
    }

    fn value(&self, p: &[f64]) -> f64 {
        self.residual(p)
            .map(|(r, _)| 0.5 * r.norm_squared())
            .unwrap_or(f64::INFINITY)
    }

    /// Jacobian of the (weighted) residual with respect to `p`.
    fn jacobian(&self, lam: &[f64]) -> DMatrix<f64> {
        let w = lam.len();
        // d log λ_ν / d p_k = −2 [ν anticommutes with k] / λ_ν
        let mut j = DMatrix::zeros(w, w);
        for (nu, ks) in self.map.anti.iter().enumerate() {
            for &k in ks {
                j[(nu, k)] = -2.0 / lam[nu];
            }
        }
        let mut r = &self.fp.a * j;
        if let Some(sw) = &self.sw {
            for (i, mut row) in r.row_iter_mut().enumerate() {
                row *= sw[i];
            }
        }
        r
    }

    fn gradient(&self, p: &[f64]) -> Option<DVector<f64>> {
        let (r, lam) = self.residual(p)?;
        Some(self.jacobian(&lam).transpose() * r)
    }
}

fn projected_gradient_norm(p: &[f64], g: &DVector<f64>, opt: &FitOptions) -> f64 {
    p.iter()
        .zip(g.iter())
        .map(|(&x, &gi)| (x - (x - gi).clamp(opt.lower, opt.upper)).abs())
        .fold(0.0, f64::max)
}

/// Bound-constrained fit of all probabilities to the box
/// `[opt.lower, opt.upper]`, minimizing `‖A log λ(p) − log Λ̂‖₂`.
///
/// Projected Levenberg–Marquardt: variables pinned at a bound with the
/// gradient pushing outward are held fixed, the rest take a damped
/// Gauss–Newton step, and a projected backtracking line search keeps every
/// eigenvalue positive.
fn polish_step(
    obj: &Objective,
    p: &[f64],
    free: &[usize],
    jtj: &DMatrix<f64>,
    g: &DVector<f64>,
    opt: &FitOptions,
) -> Option<(Vec<f64>, f64)> {
    let nf = free.len();
    let h = DMatrix::from_fn(nf, nf, |i, j| jtj[(free[i], free[j])]);
    let rhs = DVector::from_iterator(nf, free.iter().map(|&i| -g[i]));
    let step = h.cholesky()?.solve(&rhs);
    let mut q = p.to_vec();
    for (k, &i) in free.iter().enumerate() {
        q[i] = (p[i] + step[k]).clamp(opt.lower, opt.upper);
    }
    let (r, lam) = obj.residual(&q)?;
    let gq = obj.jacobian(&lam).transpose() * &r;
    let before = projected_gradient_norm(p, g, opt);
    (projected_gradient_norm(&q, &gq, opt) < 0.5 * before).then(|| (q, 0.5 * r.norm_squared()))
}

pub fn fit_bound_constrained(fp: &FitProblem, opt: &FitOptions) -> Result<ErrorModelEstimate> {
    let width = fp.layout.width();
    if !(opt.lower <= opt.init && opt.init <= opt.upper) {
        return Err(Error::InvalidParameter(format!(
            "initial value {} outside [{}, {}]",
            opt.init, opt.lower, opt.upper
        )));
    }
    let obj = Objective::new(fp);
    let mut p = vec![opt.init; width];
    let mut f = obj.value(&p);
    if !f.is_finite() {
        return Err(Error::NonFinite("objective at the initial point".into()));
    }
    let mut mu = 1e-6;
    let mut iterations = 0;
    let mut pg = f64::INFINITY;
    while iterations < opt.max_iter {
        let (r, lam) = obj.residual(&p).expect("current point is feasible");
        let jac = obj.jacobian(&lam);
        let g = jac.transpose() * &r;
        pg = projected_gradient_norm(&p, &g, opt);
        if pg < opt.tol {
            break;
        }
        iterations += 1;
        let free: Vec<usize> = (0..width)
            .filter(|&i| {
                let at_lo = p[i] <= opt.lower && g[i] > 0.0;
                let at_hi = p[i] >= opt.upper && g[i] < 0.0;
                !(at_lo || at_hi)
            })
            .collect();
        let jtj = jac.transpose() * &jac;
        let mut improved = false;
        for _ in 0..12 {
            let nf = free.len();
            let mut h = DMatrix::from_fn(nf, nf, |i, j| jtj[(free[i], free[j])]);
            let scale = (0..nf).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-300);
            for i in 0..nf {
                h[(i, i)] += mu * scale;
            }
            let rhs = DVector::from_iterator(nf, free.iter().map(|&i| -g[i]));
            let step = match h.cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => {
                    mu *= 10.0;
                    continue;
                }
            };
            let mut t = 1.0;
            while t > 1e-10 {
                let mut trial = p.clone();
                for (k, &i) in free.iter().enumerate() {
                    trial[i] = (p[i] + t * step[k]).clamp(opt.lower, opt.upper);
                }
                let ft = obj.value(&trial);
                let decrease: f64 = trial
                    .iter()
                    .zip(&p)
                    .zip(g.iter())
                    .map(|((a, b), gi)| gi * (a - b))
                    .sum();
                if ft.is_finite() && ft <= f + 1e-4 * decrease && ft < f {
                    p = trial;
                    f = ft;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if improved {
                mu = (mu / 3.0).max(1e-15);
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            // The objective no longer resolves the remaining decrease, so
            // polish with a plain Gauss-Newton step judged by stationarity.
            match polish_step(&obj, &p, &free, &jtj, &g, opt) {
                Some((q, fq)) => {
                    p = q;
                    f = fq;
                }
                None => break,
            }
        }
    }
    let (r, _) = obj.residual(&p).expect("feasible");
    let info = OptimizerInfo {
        method: FitMethod::BoundConstrained,
        iterations,
        converged: pg < opt.tol,
        objective: r.norm(),
        projected_gradient: pg,
        projected_channels: Vec::new(),
    };
    if !info.converged {
        log::debug!(
            "bound-constrained fit stopped after {iterations} iterations with projected gradient {pg:.3e}"
        );
    }
    ErrorModelEstimate::new(&fp.layout, p, info)
}

/// Euclidean projection onto the probability simplex.
///
/// For input that already sums to one this is also a minimizer of the total
/// variation distance: negative entries go to zero and positive ones are
/// lowered by a common amount, so the distance equals the negative mass.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Negative probabilities down to this size are rounding noise, not a
/// reason to project.
const NEGATIVE_TOL: f64 = 1e-12;

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Unconstrained least squares followed by a per-channel repair: each
/// channel's eigenvalues `e^{−x}` are mapped back to probabilities and, if any
/// come out negative, projected onto the simplex.
pub fn fit_least_squares_tvd(fp: &FitProblem) -> Result<ErrorModelEstimate> {
    let width = fp.layout.width();
    let (a, b) = match fp.sqrt_w() {
        Some(sw) => {
            let mut a = fp.a.clone();
            for (i, mut row) in a.row_iter_mut().enumerate() {
                row *= sw[i];
            }
            (a, fp.b.component_mul(&sw))
        }
        None => (fp.a.clone(), fp.b.clone()),
    };
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-10;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    if rank < width {
        return Err(Error::RankDeficient {
            rank,
            required: width,
        });
    }
    let x = svd
        .solve(&b, eps)
        .map_err(|e| Error::NonFinite(e.to_string()))?;
    let mut params = vec![0.0; width];
    let mut projected = Vec::new();
    for (blk, off, w) in fp.layout.blocks() {
        // Eigenvalues outside (0, 1] have no Pauli-channel preimage even
        // after projection in floating point, so bring them into range first.
        let mut out_of_range = false;
        let mut lam = vec![1.0];
        lam.extend((0..w).map(|i| {
            let l = (-x[off + i]).exp();
            out_of_range |= l > 1.0 + NEGATIVE_TOL || l < EIGENVALUE_FLOOR;
            l.clamp(EIGENVALUE_FLOOR, 1.0)
        }));
        let mut probs = inverse_hadamard(&lam)?;
        if out_of_range || probs.iter().any(|&p| p < -NEGATIVE_TOL) {
            probs = project_to_simplex(&probs);
            projected.push(blk.label());
        } else {
            probs.iter_mut().for_each(|p| *p = p.max(0.0));
        }
        params[off..off + w].copy_from_slice(&probs[1..]);
    }
    let obj = Objective::new(fp);
    let objective = obj
        .residual(&params)
        .map(|(r, _)| r.norm())
        .unwrap_or(f64::INFINITY);
    let info = OptimizerInfo {
        method: FitMethod::LeastSquaresTvd,
        iterations: 1,
        converged: true,
        objective,
        projected_gradient: f64::NAN,
        projected_channels: projected,
    };
    ErrorModelEstimate::new(&fp.layout, params, info)
}

pub fn fit(fp: &FitProblem, method: FitMethod, opt: &FitOptions) -> Result<ErrorModelEstimate> {
    match method {
        FitMethod::BoundConstrained => fit_bound_constrained(fp, opt),
        FitMethod::LeastSquaresTvd => fit_least_squares_tvd(fp),
    }
}

/// Analytic gradient of `½‖A log λ(p) − log Λ̂‖²` at `p`.
pub fn objective_gradient(fp: &FitProblem, p: &[f64]) -> Result<Vec<f64>> {
    Objective::new(fp)
        .gradient(p)
        .map(|g| g.iter().copied().collect())
        .ok_or_else(|| Error::NonFinite("objective outside the positive-eigenvalue region".into()))
}

pub fn objective_value(fp: &FitProblem, p: &[f64]) -> f64 {
    Objective::new(fp).value(p)
}

/// Largest gap between the analytic gradient and central differences with
/// the given step.
pub fn gradient_check(fp: &FitProblem, p: &[f64], step: f64) -> Result<f64> {
    let obj = Objective::new(fp);
    let g = obj
        .gradient(p)
        .ok_or_else(|| Error::NonFinite("gradient check point is infeasible".into()))?;
    let mut worst: f64 = 0.0;
    let mut q = p.to_vec();
    for i in 0..p.len() {
        q[i] = p[i] + step;
        let fp_ = obj.value(&q);
        q[i] = p[i] - step;
        let fm = obj.value(&q);
        q[i] = p[i];
        let fd = (fp_ - fm) / (2.0 * step);
        worst = worst.max((fd - g[i]).abs());
    }
    Ok(worst)
}

/// Model-versus-data residuals over a set of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `Λ_pred − Λ̂` per row.
    pub residuals: Vec<f64>,
    /// `log Λ_pred − log Λ̂` per row.
    pub log_residuals: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub mean_abs: f64,
    pub median_abs: f64,
}

impl ResidualReport {
    pub fn new(residuals: Vec<f64>, log_residuals: Vec<f64>) -> Self {
        let n = residuals.len().max(1) as f64;
        let mean = residuals.iter().sum::<f64>() / n;
        let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        let abs: Vec<f64> = sorted_abs(&residuals);
        let mean_abs = abs.iter().sum::<f64>() / n;
        ResidualReport {
            mean,
            std: var.sqrt(),
            mean_abs,
            median_abs: quantile(&abs, 0.5),
            residuals,
            log_residuals,
        }
    }

    /// Empirical CDF of `|residual|` as `(value, cumulative probability)`.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        abs_cdf(&self.residuals)
    }
}

fn sorted_abs(v: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = v.iter().map(|r| r.abs()).collect();
    a.sort_by(f64::total_cmp);
    a
}

/// Empirical CDF of `|v|`.
pub fn abs_cdf(v: &[f64]) -> Vec<(f64, f64)> {
    let a = sorted_abs(v);
    let n = a.len() as f64;
    a.iter()
        .enumerate()
        .map(|(i, &x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Residuals of the fitted model against `lambda_hat` on `rows`.
pub fn residual_report(est: &ErrorModelEstimate, layout: &ParamLayout, rows: &[DesignRow], lambda_hat: &[f64]) -> ResidualReport {
    let lam = est.eigenvalues(layout);
    let (res, log_res) = rows
        .iter()
        .zip(lambda_hat)
        .map(|(row, &obs)| {
            let pred = row.predicted_eigenvalue(&lam);
            (pred - obs, pred.ln() - obs.ln())
        })
        .unzip();
    ResidualReport::new(res, log_res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aces::{build_design_pool, exact_eigenvalues, select_complete_sets, DesignPolicy};
    use crate::models::device_table;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (DesignPool, Vec<usize>) {
        let l = ParamLayout::two_qubit();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pool = build_design_pool(&l, &DesignPolicy::default(), &mut rng).unwrap();
        let set = select_complete_sets(&pool, 1, &mut rng).unwrap().remove(0);
        (pool, set)
    }

    #[test]
    fn noiseless_data_gives_zero_rates() {
        let (pool, set) = setup(1);
        let lam = vec![1.0; pool.rows.len()];
        let fp = FitProblem::from_pool(&pool, &set, &lam).unwrap();
        let est = fit_bound_constrained(&fp, &FitOptions::default()).unwrap();
        assert!(est.params.iter().all(|&p| p < 1e-8), "{:?}", est.params);
        let ls = fit_least_squares_tvd(&fp).unwrap();
        assert!(ls.params.iter().all(|&p| p.abs() < 1e-12));
        assert!(ls.info.projected_channels.is_empty());
    }

    #[test]
    fn exact_table_data_is_recovered() {
        let (pool, set) = setup(2);
        let nm = device_table();
        let truth = pool.layout.params_from_model(&nm).unwrap();
        let lam = exact_eigenvalues(&pool, &nm, false).unwrap();
        let fp = FitProblem::from_pool(&pool, &set, &lam).unwrap();
        let est = fit_bound_constrained(&fp, &FitOptions::default()).unwrap();
        assert!(est.info.converged, "{:?}", est.info);
        for (a, b) in est.params.iter().zip(&truth) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        }
        assert_abs_diff_eq!(est.fidelity("cz[0,1]").unwrap(), 0.9792, epsilon = 1e-9);
        // consistent physical data needs no projection
        let ls = fit_least_squares_tvd(&fp).unwrap();
        assert!(ls.info.projected_channels.is_empty());
        for (a, b) in ls.params.iter().zip(&truth) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let rep = residual_report(&est, &pool.layout, &pool.rows, &lam);
        assert!(rep.residuals.iter().all(|r| r.abs() < 1e-8));
    }

    #[test]
    fn rank_deficient_problem_is_rejected() {
        let (pool, set) = setup(3);
        let lam = vec![0.9; pool.rows.len()];
        let fp = FitProblem::from_pool(&pool, &set[..32], &lam).unwrap();
        assert!(matches!(fit_least_squares_tvd(&fp), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (pool, set) = setup(4);
        let nm = device_table();
        let lam = exact_eigenvalues(&pool, &nm, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noisy: Vec<f64> = lam.iter().map(|l| l * (1.0 + 0.01 * rng.random::<f64>())).collect();
        let fp = FitProblem::from_pool(&pool, &set, &noisy).unwrap();
        let p = vec![1e-4; 33];
        assert!(gradient_check(&fp, &p, 1e-6).unwrap() < 1e-6);
        let e1 = gradient_check(&fp, &p, 1e-3).unwrap();
        let e2 = gradient_check(&fp, &p, 5e-4).unwrap();
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
    }

    /// Minimum TVD to a probability vector over a grid of spacing `h`.
    fn grid_min_tvd(target: &[f64], h: f64) -> f64 {
        let k = (1.0 / h).round() as usize;
        let mut best = f64::INFINITY;
        for i in 0..=k {
            for j in 0..=k - i {
                for l in 0..=k - i - j {
                    let q = [i as f64 * h, j as f64 * h, l as f64 * h, (k - i - j - l) as f64 * h];
                    best = best.min(total_variation(&q, target));
                }
            }
        }
        best
    }

    #[test]
    fn simplex_projection_minimizes_tvd() {
        let phat = [0.97, 0.04, -0.02, 0.01];
        let proj = project_to_simplex(&phat);
        assert_abs_diff_eq!(proj.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(proj[2], 0.0);
        let tvd = total_variation(&proj, &phat);
        let grid = grid_min_tvd(&phat, 1e-3);
        assert!(tvd <= grid + 1e-12, "{tvd} vs {grid}");
        assert_abs_diff_eq!(tvd, 0.02, epsilon = 1e-12);
    }

    #[test]
    fn projection_flags_unphysical_channel() {
        let (pool, set) = setup(5);
        let mut nm = device_table();
        nm.set_spam(0, crate::channels::PauliChannel::from_error_rates(1, &[0.0, 0.0, 0.0]).unwrap())
            .unwrap();
        let mut lam = exact_eigenvalues(&pool, &nm, false).unwrap();
        // push one eigenvalue above one so the implied rates go negative
        for (i, row) in pool.rows.iter().enumerate() {
            if row.coeffs[27] > 0 {
                lam[i] *= 1.02f64.powi(row.coeffs[27] as i32);
            }
        }
        let fp = FitProblem::from_pool(&pool, &set, &lam).unwrap();
        let ls = fit_least_squares_tvd(&fp).unwrap();
        assert_eq!(ls.info.projected_channels, vec!["spam[0]".to_string()]);
        let bc = fit_bound_constrained(&fp, &FitOptions::default()).unwrap();
        assert!(bc.params.iter().all(|&p| (0.0..=0.2).contains(&p)));
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
        let r = ResidualReport::new(vec![0.0; 4], vec![0.0; 4]);
        assert_eq!(r.std, 0.0);
        assert_eq!(r.cdf().last().unwrap().1, 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn simplex_projection_is_a_distribution(v in proptest::collection::vec(-0.5f64..1.5, 1..16)) {
            let p = project_to_simplex(&v);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }
    }
}
