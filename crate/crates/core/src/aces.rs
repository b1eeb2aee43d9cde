//! Design matrices for averaged circuit eigenvalue sampling.
//!
//! Each row pairs a Clifford circuit with an input Pauli. Pushing the input
//! through the circuit gives the Pauli seen by every gate; the row counts how
//! often each (gate, local Pauli) eigenvalue enters the circuit eigenvalue
//! `Λ = Π λ^coeff`. With all rows stacked, `A · (−log λ) = −log Λ`.

use std::collections::{BTreeSet, HashSet};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{ConfusionMatrix, PauliChannel};
use crate::circuits::{prep_and_basis_circuits, random_layered_circuit, Circuit, GateKind};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, Sign};
use crate::seed::task_rng;
use crate::simulator::{
    estimate_confusion, mitigation_matrix, run_exact, sample_exact, Experiment, GateKey, NoiseModel,
    OutcomeDistribution,
};

/// Lower clip applied to estimated circuit eigenvalues before taking logs.
pub const EIGENVALUE_FLOOR: f64 = 1e-6;

/// Owner of a block of model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    Gate(GateKey),
    Spam(usize),
}

impl Block {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Block::Gate(k) => k.qubits(),
            Block::Spam(q) => vec![*q],
        }
    }

    pub fn label(&self) -> String {
        match self {
            Block::Gate(k) => k.to_string(),
            Block::Spam(q) => format!("spam[{q}]"),
        }
    }
}

/// Column layout of the model: one block per gate and per SPAM qubit, each
/// holding its non-identity Paulis in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    n: usize,
    blocks: Vec<(Block, usize)>,
    width: usize,
}

impl ParamLayout {
    /// `√X_q` for all q, then `S_q`, then the CZ pairs, then SPAM.
    pub fn new(n: usize, cz_pairs: &[(usize, usize)]) -> Self {
        let mut blocks = Vec::new();
        let mut off = 0;
        let mut push = |b: Block, k: usize| {
            blocks.push((b, off));
            off += (1 << (2 * k)) - 1;
        };
        for q in 0..n {
            push(Block::Gate(GateKey::SqrtX(q)), 1);
        }
        for q in 0..n {
            push(Block::Gate(GateKey::S(q)), 1);
        }
        for &(a, b) in cz_pairs {
            push(Block::Gate(GateKey::cz(a, b)), 2);
        }
        for q in 0..n {
            push(Block::Spam(q), 1);
        }
        ParamLayout {
            n,
            blocks,
            width: off,
        }
    }

    /// The two-qubit device: 4·3 + 15 + 2·3 = 33 columns.
    pub fn two_qubit() -> Self {
        ParamLayout::new(2, &[(0, 1)])
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(block, first column, column count)`.
    pub fn blocks(&self) -> impl Iterator<Item = (Block, usize, usize)> + '_ {
        self.blocks
            .iter()
            .map(|&(b, off)| (b, off, (1 << (2 * b.qubits().len())) - 1))
    }

    pub fn offset(&self, block: &Block) -> Option<usize> {
        self.blocks.iter().find(|(b, _)| b == block).map(|&(_, o)| o)
    }

    /// Column of the non-identity local Pauli `local` in `block`.
    pub fn column(&self, block: &Block, local: &PauliString) -> Option<usize> {
        if local.is_identity() {
            return None;
        }
        self.offset(block).map(|o| o + local.index() - 1)
    }

    pub fn column_name(&self, col: usize) -> String {
        for (b, off, w) in self.blocks() {
            if (off..off + w).contains(&col) {
                let p = PauliString::from_index(b.qubits().len(), col - off + 1);
                return format!("{}:{p}", b.label());
            }
        }
        format!("column {col}")
    }

    /// The model's non-identity Pauli probabilities, column by column.
    pub fn params_from_model(&self, nm: &NoiseModel) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.width];
        for (b, off, w) in self.blocks() {
            let ch = self.channel(nm, &b)?;
            out[off..off + w].copy_from_slice(ch.error_rates());
        }
        Ok(out)
    }

    /// Pauli eigenvalue of every column under `nm`.
    pub fn eigenvalues_from_model(&self, nm: &NoiseModel) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.width];
        for (b, off, w) in self.blocks() {
            let lam = self.channel(nm, &b)?.eigenvalues();
            out[off..off + w].copy_from_slice(&lam[1..]);
        }
        Ok(out)
    }

    fn channel<'a>(&self, nm: &'a NoiseModel, b: &Block) -> Result<&'a PauliChannel> {
        match b {
            Block::Gate(k) => nm.gate(k).ok_or_else(|| Error::MissingChannel(k.to_string())),
            Block::Spam(q) => nm
                .spam()
                .get(*q)
                .ok_or_else(|| Error::MissingChannel(format!("spam[{q}]"))),
        }
    }

    /// Noise model with the given per-column probabilities (ideal readout).
    pub fn model_from_params(&self, params: &[f64]) -> Result<NoiseModel> {
        if params.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                found: params.len(),
            });
        }
        let mut nm = NoiseModel::new(self.n)?;
        for (b, off, w) in self.blocks() {
            let k = b.qubits().len();
            let ch = PauliChannel::from_error_rates(k, &params[off..off + w])?;
            match b {
                Block::Gate(g) => nm.set_gate(g, ch)?,
                Block::Spam(q) => nm.set_spam(q, ch)?,
            }
        }
        Ok(nm)
    }
}

/// One circuit eigenvalue: circuit, input and output Paulis and the
/// per-column exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DesignRow {
    pub circuit_id: usize,
    pub input: PauliString,
    pub output: PauliString,
    pub coeffs: Vec<u32>,
    /// Sign of `C P_in C†` relative to `P_out`.
    pub sign: Sign,
}

impl DesignRow {
    /// `Π λ_col^coeff` for per-column eigenvalues `lambda`.
    pub fn predicted_eigenvalue(&self, lambda: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(lambda)
            .filter(|(c, _)| **c > 0)
            .map(|(&c, l)| l.powi(c as i32))
            .product()
    }

    /// Nonzero exponents by column name.
    pub fn coeff_map(&self, layout: &ParamLayout) -> Vec<(String, u32)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(i, &c)| (layout.column_name(i), c))
            .collect()
    }
}

/// Design row of `(c, input)`.
///
/// Every gate with a channel contributes the trajectory Pauli right after it,
/// restricted to its support, unless that restriction is the identity. SPAM
/// contributes the output Pauli's non-identity component on each qubit.
/// Injected coherent errors are physical noise and do not enter the row.
pub fn compute_row(layout: &ParamLayout, c: &Circuit, circuit_id: usize, input: &PauliString) -> Result<DesignRow> {
    let n = layout.num_qubits();
    if c.n != n || input.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if c.n != n { c.n } else { input.num_qubits() },
        });
    }
    c.validate()?;
    let mut coeffs = vec![0u32; layout.width()];
    let mut cur = (*input, Sign::Plus);
    for op in &c.ops {
        if op.kind == GateKind::Measure {
            return Err(Error::InvalidCircuit("design circuits must not contain measurements".into()));
        }
        let (p, s) = op.tableau(n)?.conjugate(&cur.0)?;
        cur = (p, s * cur.1);
        if let Some(key) = GateKey::of(op) {
            let local = p.restrict(&key.qubits());
            if let Some(col) = layout.column(&Block::Gate(key), &local) {
                coeffs[col] += 1;
            } else if !local.is_identity() {
                return Err(Error::MissingChannel(key.to_string()));
            }
        }
    }
    for q in 0..n {
        let local = cur.0.restrict(&[q]);
        if let Some(col) = layout.column(&Block::Spam(q), &local) {
            coeffs[col] += 1;
        }
    }
    Ok(DesignRow {
        circuit_id,
        input: *input,
        output: cur.0,
        coeffs,
        sign: cur.1,
    })
}

const RANK_PRIME: u64 = (1 << 61) - 1;

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % RANK_PRIME as u128) as u64
}

fn powmod(mut a: u64, mut e: u64) -> u64 {
    let mut r = 1;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a);
        }
        a = mulmod(a, a);
        e >>= 1;
    }
    r
}

/// Incremental row echelon form modulo a large prime.
///
/// Rows independent modulo a prime are independent over the rationals, so a
/// full-rank result here certifies full rational rank.
#[derive(Debug, Clone, Default)]
pub struct RankTracker {
    width: usize,
    basis: Vec<(usize, Vec<u64>)>,
}

impl RankTracker {
    pub fn new(width: usize) -> Self {
        RankTracker {
            width,
            basis: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    fn reduce(&self, row: &[u32]) -> Vec<u64> {
        let mut v: Vec<u64> = row.iter().map(|&c| c as u64 % RANK_PRIME).collect();
        for (pivot, b) in &self.basis {
            let f = v[*pivot];
            if f != 0 {
                for (x, y) in v.iter_mut().zip(b) {
                    *x = (*x + RANK_PRIME - mulmod(f, *y)) % RANK_PRIME;
                }
            }
        }
        v
    }

    /// Whether adding `row` would raise the rank.
    pub fn increases(&self, row: &[u32]) -> bool {
        self.reduce(row).iter().any(|&x| x != 0)
    }

    /// Adds `row`; returns whether the rank increased.
    pub fn add(&mut self, row: &[u32]) -> bool {
        assert_eq!(row.len(), self.width, "row width");
        let mut v = self.reduce(row);
        let Some(pivot) = v.iter().position(|&x| x != 0) else {
            return false;
        };
        let inv = powmod(v[pivot], RANK_PRIME - 2);
        v.iter_mut().for_each(|x| *x = mulmod(*x, inv));
        for (_, b) in self.basis.iter_mut() {
            let f = b[pivot];
            if f != 0 {
                for (x, y) in b.iter_mut().zip(&v) {
                    *x = (*x + RANK_PRIME - mulmod(f, *y)) % RANK_PRIME;
                }
            }
        }
        self.basis.push((pivot, v));
        true
    }

    /// Unit directions not in the span of the rows added so far.
    pub fn missing_columns(&self) -> Vec<usize> {
        (0..self.width)
            .filter(|&i| {
                let mut e = vec![0u32; self.width];
                e[i] = 1;
                self.increases(&e)
            })
            .collect()
    }
}

/// Rank over the rationals by fraction-free elimination.
pub fn exact_rank(rows: &[Vec<u32>]) -> usize {
    let Some(width) = rows.first().map(|r| r.len()) else {
        return 0;
    };
    let mut m: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|r| r.iter().map(|&c| BigInt::from(c)).collect())
        .collect();
    let mut rank = 0;
    let mut prev = BigInt::from(1);
    for col in 0..width {
        let Some(piv) = (rank..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(rank, piv);
        for i in rank + 1..m.len() {
            for j in col + 1..width {
                let v = (&m[rank][col] * &m[i][j] - &m[i][col] * &m[rank][j]) / &prev;
                m[i][j] = v;
            }
            m[i][col] = BigInt::zero();
        }
        prev = m[rank][col].abs();
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

/// How the random circuit pool is grown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignPolicy {
    pub cz_min: usize,
    pub cz_max: usize,
    /// Number of distinct rows in the finished pool.
    pub target_rows: usize,
    /// Probability that a fill-phase row starts from a Z-type input.
    pub z_input_prob: f64,
    /// Random circuits tried before giving up.
    pub max_circuits: usize,
}

impl Default for DesignPolicy {
    fn default() -> Self {
        DesignPolicy {
            cz_min: 3,
            cz_max: 5,
            target_rows: 95,
            z_input_prob: 0.5,
            max_circuits: 20_000,
        }
    }
}

/// Random circuits and the rows derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPool {
    pub layout: ParamLayout,
    pub circuits: Vec<Circuit>,
    pub rows: Vec<DesignRow>,
}

impl DesignPool {
    pub fn from_rows(layout: ParamLayout, circuits: Vec<Circuit>, rows: Vec<DesignRow>) -> Self {
        DesignPool {
            layout,
            circuits,
            rows,
        }
    }

    pub fn rank(&self) -> usize {
        let mut t = RankTracker::new(self.layout.width());
        for r in &self.rows {
            t.add(&r.coeffs);
        }
        t.rank()
    }

    pub fn circuit(&self, row: &DesignRow) -> &Circuit {
        &self.circuits[row.circuit_id]
    }

    /// Design matrix of the selected rows.
    pub fn matrix(&self, rows: &[usize]) -> DMatrix<f64> {
        let w = self.layout.width();
        DMatrix::from_fn(rows.len(), w, |i, j| self.rows[rows[i]].coeffs[j] as f64)
    }
}

fn z_type_inputs(n: usize) -> Vec<PauliString> {
    PauliString::non_identity(n).filter(|p| p.is_z_type()).collect()
}

/// Grows a pool of random layered circuits until the rows reach full rank,
/// then keeps adding distinct rows up to the policy's target.
///
/// Inputs are tried Z-type first, since those need no preparation gates.
pub fn build_design_pool<R: Rng + ?Sized>(layout: &ParamLayout, policy: &DesignPolicy, rng: &mut R) -> Result<DesignPool> {
    let n = layout.num_qubits();
    let width = layout.width();
    if policy.cz_min > policy.cz_max {
        return Err(Error::InvalidParameter("cz_min exceeds cz_max".into()));
    }
    let z_inputs = z_type_inputs(n);
    let others: Vec<PauliString> = PauliString::non_identity(n).filter(|p| !p.is_z_type()).collect();
    let all: Vec<PauliString> = PauliString::non_identity(n).collect();
    let mut tracker = RankTracker::new(width);
    let mut circuits = Vec::new();
    let mut rows: Vec<DesignRow> = Vec::new();
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    let mut tried = 0;
    let new_circuit = |rng: &mut R, tried: &mut usize| {
        *tried += 1;
        let k = rng.random_range(policy.cz_min..=policy.cz_max);
        random_layered_circuit(n, k, rng)
    };

    while tracker.rank() < width {
        if tried >= policy.max_circuits {
            let missing = tracker
                .missing_columns()
                .into_iter()
                .map(|c| layout.column_name(c))
                .collect();
            return Err(Error::BudgetExceeded {
                achieved: tracker.rank(),
                required: width,
                missing,
            });
        }
        let c = new_circuit(rng, &mut tried);
        let mut rest = others.clone();
        rest.shuffle(rng);
        let mut used = false;
        for input in z_inputs.iter().chain(&rest) {
            let row = compute_row(layout, &c, circuits.len(), input)?;
            if !seen.contains(&row.coeffs) && tracker.increases(&row.coeffs) {
                tracker.add(&row.coeffs);
                seen.insert(row.coeffs.clone());
                rows.push(row);
                used = true;
                break;
            }
        }
        if used {
            circuits.push(c);
        }
    }

    while rows.len() < policy.target_rows {
        if tried >= policy.max_circuits {
            log::warn!(
                "design budget exhausted with {} of {} rows",
                rows.len(),
                policy.target_rows
            );
            break;
        }
        let c = new_circuit(rng, &mut tried);
        let input = if rng.random_bool(policy.z_input_prob) {
            *z_inputs.choose(rng).expect("n ≥ 1")
        } else {
            *all.choose(rng).expect("n ≥ 1")
        };
        let row = compute_row(layout, &c, circuits.len(), &input)?;
        if seen.insert(row.coeffs.clone()) {
            rows.push(row);
            circuits.push(c);
        }
    }
    Ok(DesignPool {
        layout: layout.clone(),
        circuits,
        rows,
    })
}

/// Up to `k` distinct full-rank row subsets of size `width`, each built by
/// greedily adding rows in a fresh random order.
pub fn select_complete_sets<R: Rng + ?Sized>(pool: &DesignPool, k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    let width = pool.layout.width();
    if k == 0 {
        return Ok(Vec::new());
    }
    if pool.rank() < width {
        return Err(Error::RankDeficient {
            rank: pool.rank(),
            required: width,
        });
    }
    let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut order: Vec<Vec<usize>> = Vec::new();
    let attempts = 50 * k + 100;
    let mut idx: Vec<usize> = (0..pool.rows.len()).collect();
    for _ in 0..attempts {
        if order.len() == k {
            break;
        }
        idx.shuffle(rng);
        let mut t = RankTracker::new(width);
        let mut chosen = Vec::with_capacity(width);
        for &i in &idx {
            if t.add(&pool.rows[i].coeffs) {
                chosen.push(i);
                if chosen.len() == width {
                    break;
                }
            }
        }
        chosen.sort_unstable();
        if found.insert(chosen.clone()) {
            order.push(chosen);
        }
    }
    if order.len() < k {
        log::warn!("found {} of {k} distinct full-rank design sets", order.len());
    }
    Ok(order)
}

/// Estimated circuit eigenvalue with its shot-noise standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueEstimate {
    /// Estimate after clipping into `[EIGENVALUE_FLOOR, 1]`.
    pub value: f64,
    /// Estimate before clipping.
    pub raw: f64,
    pub stderr: f64,
    pub clipped: bool,
}

/// `Λ̂ = s · ⟨P_out⟩` from the raw outcome distribution over all qubits.
///
/// `mitigation`, if given, is the `(Cᵀ)⁻¹` matrix applied to the observed
/// frequencies; the standard error propagates the multinomial covariance of
/// the counts through it. `s` folds in the conjugation sign and the prepared
/// eigenvalue of the input Pauli.
pub fn estimate_circuit_eigenvalue(
    row: &DesignRow,
    data: &OutcomeDistribution,
    mitigation: Option<&DMatrix<f64>>,
) -> Result<EigenvalueEstimate> {
    let n = row.output.num_qubits();
    if data.qubits != (0..n).collect::<Vec<_>>() {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue data must cover qubits 0..{n} in order, got {:?}",
            data.qubits
        )));
    }
    let prep_sign = prep_and_basis_circuits(&row.input, &row.output).prep_sign;
    let sign = (row.sign * prep_sign).to_f64();
    let mask = (0..n)
        .filter(|&q| row.output.get(q) != Pauli::I)
        .fold(0usize, |acc, q| acc | (1 << (n - 1 - q)));
    let dim = data.probs.len();
    let s: Vec<f64> = (0..dim)
        .map(|j| if (j & mask).count_ones() % 2 == 0 { sign } else { -sign })
        .collect();
    // v = Mᵀ s, so that Λ̂ = v · p̃
    let v: Vec<f64> = match mitigation {
        Some(m) => (0..dim).map(|j| (0..dim).map(|i| m[(i, j)] * s[i]).sum()).collect(),
        None => s,
    };
    let raw: f64 = v.iter().zip(&data.probs).map(|(a, b)| a * b).sum();
    if !raw.is_finite() {
        return Err(Error::NonFinite("circuit eigenvalue estimate".into()));
    }
    let stderr = match data.shots() {
        Some(shots) => {
            let m2: f64 = v.iter().zip(&data.probs).map(|(a, b)| a * a * b).sum();
            ((m2 - raw * raw).max(0.0) / shots as f64).sqrt()
        }
        None => 0.0,
    };
    let value = raw.clamp(EIGENVALUE_FLOOR, 1.0);
    Ok(EigenvalueEstimate {
        value,
        raw,
        stderr,
        clipped: value != raw,
    })
}

/// Infinite-shot circuit eigenvalue of `row` under `nm`, via the twirled
/// simulator (without readout mitigation).
pub fn exact_circuit_eigenvalue(pool: &DesignPool, row: &DesignRow, nm: &NoiseModel) -> Result<f64> {
    let (exp, _) = Experiment::pauli_measurement(pool.circuit(row), &row.input, &row.output)?;
    let d = run_exact(&exp, nm, true)?;
    Ok(estimate_circuit_eigenvalue(row, &d, None)?.raw)
}

/// Data-generation settings for one simulated ACES run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub shots: u64,
    /// Calibrate the readout and apply measurement-error mitigation.
    pub mitigate: bool,
}

/// Twirled readout confusion over all qubits in the infinite-shot limit.
pub fn exact_calibration(nm: &NoiseModel) -> Result<ConfusionMatrix> {
    let n = nm.num_qubits();
    let qubits: Vec<usize> = (0..n).collect();
    let dim = 1 << n;
    let mut m = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let d = run_exact(&Experiment::calibration(n, &qubits, j), nm, true)?;
        for (i, p) in d.probs.iter().enumerate() {
            m[(j, i)] = *p;
        }
    }
    ConfusionMatrix::new(m)
}

/// Eigenvalues of every pool row in the infinite-shot limit, mitigated with
/// the exact calibration when `mitigate` is set.
pub fn exact_eigenvalues(pool: &DesignPool, nm: &NoiseModel, mitigate: bool) -> Result<Vec<f64>> {
    let mit = if mitigate {
        Some(mitigation_matrix(&exact_calibration(nm)?)?)
    } else {
        None
    };
    pool.rows
        .par_iter()
        .map(|row| {
            let (exp, _) = Experiment::pauli_measurement(pool.circuit(row), &row.input, &row.output)?;
            let d = run_exact(&exp, nm, true)?;
            Ok(estimate_circuit_eigenvalue(row, &d, mit.as_ref())?.raw)
        })
        .collect()
}

/// Simulates every pool row at `cfg.shots` twirled shots and estimates its
/// eigenvalue. Readout is calibrated once per run with the same shot count.
pub fn simulate_eigenvalues(
    pool: &DesignPool,
    nm: &NoiseModel,
    cfg: &SamplingConfig,
    seed: u64,
) -> Result<Vec<EigenvalueEstimate>> {
    let n = nm.num_qubits();
    let mit = if cfg.mitigate {
        let qubits: Vec<usize> = (0..n).collect();
        let mut rng = task_rng(seed, &[0]);
        let conf = estimate_confusion(nm, &qubits, cfg.shots, &mut rng, true)?;
        Some(mitigation_matrix(&conf)?)
    } else {
        None
    };
    let out: Vec<EigenvalueEstimate> = pool
        .rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut rng = task_rng(seed, &[1, i as u64]);
            let (exp, _) = Experiment::pauli_measurement(pool.circuit(row), &row.input, &row.output)?;
            let d = sample_exact(&exp, nm, cfg.shots, &mut rng, true)?;
            estimate_circuit_eigenvalue(row, &d, mit.as_ref())
        })
        .collect::<Result<_>>()?;
    let clipped = out.iter().filter(|e| e.clipped).count();
    if clipped > 0 {
        log::debug!("{clipped} of {} eigenvalue estimates clipped", out.len());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::GateOp;
    use crate::models::device_table;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn fig3_circuit() -> Circuit {
        let mut c = Circuit::new(2);
        c.push_layer([GateOp::s(0), GateOp::s(1)]);
        c.push_layer([GateOp::cz(0, 1)]);
        c.push_layer([GateOp::sqrt_x(0), GateOp::sqrt_x(1)]);
        c.push_layer([GateOp::cz(0, 1)]);
        c.push_layer([GateOp::sqrt_x(0), GateOp::s(1)]);
        c.push_layer([GateOp::cz(0, 1)]);
        c.push_layer([GateOp::s(0), GateOp::s(1)]);
        c.push_layer([GateOp::cz(0, 1)]);
        c
    }

    fn map(row: &DesignRow, layout: &ParamLayout) -> Vec<(String, u32)> {
        row.coeff_map(layout)
    }

    #[test]
    fn layout_offsets() {
        let l = ParamLayout::two_qubit();
        assert_eq!(l.width(), 33);
        let offs: Vec<usize> = l.blocks().map(|(_, o, _)| o).collect();
        assert_eq!(offs, vec![0, 3, 6, 9, 12, 27, 30]);
        assert_eq!(l.column_name(12), "cz[0,1]:IX");
        assert_eq!(l.column_name(32), "spam[1]:Z");
    }

    #[test]
    fn fig3_row() {
        let l = ParamLayout::two_qubit();
        let row = compute_row(&l, &fig3_circuit(), 0, &p("IY")).unwrap();
        assert_eq!(row.output, p("YY"));
        let expected: Vec<(String, u32)> = [
            ("sqrt_x[0]:X", 1),
            ("sqrt_x[0]:Y", 1),
            ("sqrt_x[1]:X", 1),
            ("s[0]:X", 1),
            ("s[1]:X", 3),
            ("cz[0,1]:XY", 1),
            ("cz[0,1]:YY", 2),
            ("cz[0,1]:ZX", 1),
            ("spam[0]:Y", 1),
            ("spam[1]:Y", 1),
        ]
        .iter()
        .map(|(s, c)| (s.to_string(), *c))
        .collect();
        assert_eq!(map(&row, &l), expected);
    }

    #[test]
    fn simple_rows() {
        let l = ParamLayout::two_qubit();
        let id = Circuit::new(2);
        let row = compute_row(&l, &id, 0, &p("XZ")).unwrap();
        assert_eq!(map(&row, &l), vec![("spam[0]:X".into(), 1), ("spam[1]:Z".into(), 1)]);
        let cz = Circuit::from_ops(2, vec![GateOp::cz(0, 1)]).unwrap();
        let row = compute_row(&l, &cz, 0, &p("XI")).unwrap();
        assert_eq!(
            map(&row, &l),
            vec![("cz[0,1]:XZ".into(), 1), ("spam[0]:X".into(), 1), ("spam[1]:Z".into(), 1)]
        );
        let m = cz.clone().with_measurements(&[0]);
        assert!(compute_row(&l, &m, 0, &p("XI")).is_err());
    }

    #[test]
    fn exact_rank_agrees_with_tracker() {
        let rows = vec![vec![1, 2, 3], vec![2, 4, 6], vec![0, 1, 1], vec![1, 3, 4]];
        assert_eq!(exact_rank(&rows), 2);
        let mut t = RankTracker::new(3);
        for r in &rows {
            t.add(r);
        }
        assert_eq!(t.rank(), 2);
        assert_eq!(t.missing_columns().len(), 3);
        t.add(&[1, 0, 1]);
        assert_eq!(t.rank(), 2);
        t.add(&[0, 0, 1]);
        assert!(t.missing_columns().is_empty());
    }

    #[test]
    fn pool_reaches_full_rank() {
        let l = ParamLayout::two_qubit();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pool = build_design_pool(&l, &DesignPolicy::default(), &mut rng).unwrap();
        assert_eq!(pool.rows.len(), 95);
        let coeffs: Vec<Vec<u32>> = pool.rows.iter().map(|r| r.coeffs.clone()).collect();
        assert_eq!(exact_rank(&coeffs), 33);
        for row in &pool.rows {
            let c = pool.circuit(row);
            let k = c.cz_count();
            assert!((3..=5).contains(&k));
            let cz_sum: u32 = row.coeffs[12..27].iter().sum();
            assert!(cz_sum as usize <= k);
        }
    }

    #[test]
    fn zero_cz_policy_fails() {
        let l = ParamLayout::two_qubit();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let policy = DesignPolicy {
            cz_min: 0,
            cz_max: 0,
            max_circuits: 300,
            ..DesignPolicy::default()
        };
        match build_design_pool(&l, &policy, &mut rng) {
            Err(Error::BudgetExceeded { achieved, missing, .. }) => {
                assert!(achieved < 33);
                assert!(missing.iter().any(|m| m.starts_with("cz")));
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn complete_sets() {
        let l = ParamLayout::two_qubit();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pool = build_design_pool(&l, &DesignPolicy::default(), &mut rng).unwrap();
        assert!(select_complete_sets(&pool, 0, &mut rng).unwrap().is_empty());
        let sets = select_complete_sets(&pool, 250, &mut rng).unwrap();
        assert_eq!(sets.len(), 250);
        for s in sets.iter().take(10) {
            let coeffs: Vec<Vec<u32>> = s.iter().map(|&i| pool.rows[i].coeffs.clone()).collect();
            assert_eq!(exact_rank(&coeffs), 33);
        }
        // a pool that is exactly one basis has exactly one subset
        let first = &sets[0];
        let basis = DesignPool::from_rows(
            l.clone(),
            pool.circuits.clone(),
            first.iter().map(|&i| pool.rows[i].clone()).collect(),
        );
        assert_eq!(select_complete_sets(&basis, 5, &mut rng).unwrap().len(), 1);
    }

    #[test]
    fn product_identity_holds_in_simulation() {
        let l = ParamLayout::two_qubit();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pool = build_design_pool(&l, &DesignPolicy::default(), &mut rng).unwrap();
        let mut nm = device_table();
        nm.set_spam(0, PauliChannel::from_error_rates(1, &[0.01, 0.002, 0.003]).unwrap()).unwrap();
        let lam = l.eigenvalues_from_model(&nm).unwrap();
        let exact = exact_eigenvalues(&pool, &nm, false).unwrap();
        for (row, e) in pool.rows.iter().zip(&exact) {
            assert_abs_diff_eq!(e.ln(), row.predicted_eigenvalue(&lam).ln(), epsilon = 1e-10);
        }
    }

    #[test]
    fn depolarizing_cz_row() {
        let l = ParamLayout::two_qubit();
        let eps = 1e-3;
        let nm = NoiseModel::noiseless(2)
            .unwrap()
            .with_gate(GateKey::cz(0, 1), PauliChannel::depolarizing(2, eps).unwrap())
            .unwrap();
        let c = fig3_circuit();
        let row = compute_row(&l, &c, 0, &p("IY")).unwrap();
        let pool = DesignPool::from_rows(l, vec![c], vec![row.clone()]);
        let lam = exact_circuit_eigenvalue(&pool, &row, &nm).unwrap();
        assert_abs_diff_eq!(lam, (1.0 - 16.0 * eps).powi(4), epsilon = 1e-12);
    }

    #[test]
    fn noiseless_estimate_is_one() {
        let l = ParamLayout::two_qubit();
        let c = fig3_circuit();
        let row = compute_row(&l, &c, 0, &p("IY")).unwrap();
        let pool = DesignPool::from_rows(l, vec![c], vec![row.clone()]);
        let nm = NoiseModel::noiseless(2).unwrap();
        let e = simulate_eigenvalues(&pool, &nm, &SamplingConfig { shots: 1000, mitigate: true }, 3).unwrap();
        assert_abs_diff_eq!(e[0].value, 1.0, epsilon = 1e-12);
        assert_eq!(e[0].stderr, 0.0);
    }
}
