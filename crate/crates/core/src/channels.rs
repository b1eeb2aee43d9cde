//! Pauli channels, Pauli transfer matrices and readout confusion matrices.
//!
//! Vectors over Paulis follow the canonical order of [`PauliString::index`].
//! A state is represented by its Pauli coefficients `r_a = tr(P_a ρ)` (so the
//! identity component is always 1) and a map by `R_ab = tr(P_a E(P_b)) / 2^n`,
//! which sends coefficient vectors to coefficient vectors.

use std::collections::BTreeMap;

use log::debug;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};

/// Tolerance used when validating probability vectors.
pub const PROB_TOL: f64 = 1e-9;

fn qubits_for_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() || len.trailing_zeros() % 2 != 0 {
        return Err(Error::InvalidLength(len));
    }
    Ok(len.trailing_zeros() as usize / 2)
}

/// Applies the single-qubit Hadamard matrix along every qubit axis.
fn walsh_pauli(v: &mut [f64]) {
    let n = v.len().trailing_zeros() as usize / 2;
    for q in 0..n {
        let stride = 1usize << (2 * (n - 1 - q));
        let block = stride * 4;
        for start in (0..v.len()).step_by(block) {
            for off in 0..stride {
                let i = start + off;
                let (a, b, c, d) = (v[i], v[i + stride], v[i + 2 * stride], v[i + 3 * stride]);
                v[i] = a + b + c + d;
                v[i + stride] = a + b - c - d;
                v[i + 2 * stride] = a - b + c - d;
                v[i + 3 * stride] = a - b - c + d;
            }
        }
    }
}

/// Pauli error rates to Pauli eigenvalues: `λ_a = Σ_b (−1)^{⟨a,b⟩} p_b`.
pub fn hadamard_transform(p: &[f64]) -> Result<Vec<f64>> {
    qubits_for_len(p.len())?;
    let mut v = p.to_vec();
    walsh_pauli(&mut v);
    Ok(v)
}

/// Inverse of [`hadamard_transform`]; the transform squares to `4^n · I`.
pub fn inverse_hadamard(lambda: &[f64]) -> Result<Vec<f64>> {
    qubits_for_len(lambda.len())?;
    let mut v = lambda.to_vec();
    walsh_pauli(&mut v);
    let d = v.len() as f64;
    v.iter_mut().for_each(|x| *x /= d);
    Ok(v)
}

/// Stochastic Pauli channel `ρ ↦ Σ_a p_a P_a ρ P_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliChannel {
    n: usize,
    probs: Vec<f64>,
}

impl PauliChannel {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << (2 * n) {
            return Err(Error::DimensionMismatch {
                expected: 1 << (2 * n),
                found: probs.len(),
            });
        }
        if let Some((i, &v)) = probs
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < -PROB_TOL)
        {
            return Err(Error::InvalidChannel(format!(
                "p[{}] = {v}",
                PauliString::from_index(n, i)
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidChannel(format!("probabilities sum to {sum}")));
        }
        Ok(PauliChannel { n, probs })
    }

    pub fn identity(n: usize) -> Self {
        let mut probs = vec![0.0; 1 << (2 * n)];
        probs[0] = 1.0;
        PauliChannel { n, probs }
    }

    /// Uniform depolarizing noise: every non-identity Pauli with probability `eps`.
    pub fn depolarizing(n: usize, eps: f64) -> Result<Self> {
        let d = 1usize << (2 * n);
        let mut probs = vec![eps; d];
        probs[0] = 1.0 - eps * (d as f64 - 1.0);
        PauliChannel::new(n, probs)
    }

    /// Channel from its non-identity rates; `p_I = 1 − Σ rates`.
    pub fn from_error_rates(n: usize, rates: &[f64]) -> Result<Self> {
        let mut probs = Vec::with_capacity(rates.len() + 1);
        probs.push(1.0 - rates.iter().sum::<f64>());
        probs.extend_from_slice(rates);
        PauliChannel::new(n, probs)
    }

    /// Channel from a published table row whose entries need not sum to one.
    ///
    /// The identity probability is kept and the non-identity rates are scaled
    /// to absorb the rounding gap; a debug log reports the size of the gap.
    pub fn from_table_row(n: usize, p_identity: f64, rates: &[f64]) -> Result<Self> {
        let total: f64 = rates.iter().sum();
        let gap = p_identity + total - 1.0;
        let scale = if total > 0.0 { (1.0 - p_identity) / total } else { 1.0 };
        if gap.abs() > PROB_TOL {
            debug!(
                "table row sums to {:.6}; rescaling {} non-identity rates by {:.5}",
                1.0 + gap,
                rates.len(),
                scale
            );
        }
        let mut probs = vec![p_identity];
        probs.extend(rates.iter().map(|r| r * scale));
        PauliChannel::new(n, probs)
    }

    /// Channel with the given eigenvalues (`λ_I` must be 1).
    pub fn from_eigenvalues(n: usize, lambda: &[f64]) -> Result<Self> {
        if lambda.len() != 1 << (2 * n) {
            return Err(Error::DimensionMismatch {
                expected: 1 << (2 * n),
                found: lambda.len(),
            });
        }
        let probs = inverse_hadamard(lambda)?;
        PauliChannel::new(n, probs)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, p: &PauliString) -> f64 {
        self.probs[p.index()]
    }

    pub fn p_identity(&self) -> f64 {
        self.probs[0]
    }

    /// Non-identity rates in canonical order.
    pub fn error_rates(&self) -> &[f64] {
        &self.probs[1..]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hadamard_transform(&self.probs).expect("channel length is a power of 4")
    }

    /// Channel applying `self` then `other` (eigenvalues multiply).
    pub fn compose(&self, other: &PauliChannel) -> Result<PauliChannel> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let lam: Vec<f64> = self
            .eigenvalues()
            .iter()
            .zip(other.eigenvalues())
            .map(|(a, b)| a * b)
            .collect();
        let probs = inverse_hadamard(&lam)?
            .into_iter()
            .map(|v| if v < 0.0 && v > -PROB_TOL { 0.0 } else { v })
            .collect();
        PauliChannel::new(self.n, probs)
    }

    pub fn to_ptm(&self) -> Ptm {
        Ptm {
            n: self.n,
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.eigenvalues())),
        }
    }

    pub fn to_symbol_map(&self) -> BTreeMap<String, f64> {
        PauliString::all(self.n)
            .map(|p| (p.to_string(), self.prob(&p)))
            .collect()
    }

    pub fn from_symbol_map(map: &BTreeMap<String, f64>) -> Result<Self> {
        let n = map
            .keys()
            .next()
            .map(|k| k.len())
            .ok_or_else(|| Error::InvalidChannel("empty channel".into()))?;
        let mut probs = vec![0.0; 1 << (2 * n)];
        let mut explicit_identity = false;
        for (k, &v) in map {
            let p: PauliString = k.parse()?;
            if p.num_qubits() != n {
                return Err(Error::InvalidLabel(k.clone()));
            }
            explicit_identity |= p.is_identity();
            probs[p.index()] = v;
        }
        if !explicit_identity {
            probs[0] = 1.0 - probs[1..].iter().sum::<f64>();
        }
        PauliChannel::new(n, probs)
    }
}

impl Serialize for PauliChannel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_symbol_map().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PauliChannel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, f64>::deserialize(d)?;
        PauliChannel::from_symbol_map(&map).map_err(serde::de::Error::custom)
    }
}

/// Average gate fidelity `(d·p_I + 1)/(d + 1)` with `d = 2^n`.
pub fn average_gate_fidelity(ch: &PauliChannel) -> f64 {
    let d = (1usize << ch.num_qubits()) as f64;
    (d * ch.p_identity() + 1.0) / (d + 1.0)
}

/// Dense `2^n × 2^n` matrix of a Pauli string, qubit 0 as the leftmost factor.
pub fn pauli_matrix(p: &PauliString) -> DMatrix<Complex64> {
    let o = Complex64::new(1.0, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let mut m = DMatrix::from_element(1, 1, o);
    for q in 0..p.num_qubits() {
        let f = match p.get(q) {
            Pauli::I => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
            Pauli::X => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            Pauli::Y => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            Pauli::Z => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        };
        m = m.kronecker(&f);
    }
    m
}

/// Pauli transfer matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Ptm {
    n: usize,
    matrix: DMatrix<f64>,
}

impl Ptm {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidLength(matrix.nrows() * matrix.ncols()));
        }
        let n = qubits_for_len(matrix.nrows())?;
        Ok(Ptm { n, matrix })
    }

    pub fn identity(n: usize) -> Self {
        let d = 1 << (2 * n);
        Ptm {
            n,
            matrix: DMatrix::identity(d, d),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// PTM of `ρ ↦ Σ_j K_j ρ K_j†`.
    pub fn from_kraus(kraus: &[DMatrix<Complex64>]) -> Result<Self> {
        let dim = kraus
            .first()
            .map(|k| k.nrows())
            .ok_or_else(|| Error::InvalidParameter("no Kraus operators".into()))?;
        if !dim.is_power_of_two() || kraus.iter().any(|k| k.shape() != (dim, dim)) {
            return Err(Error::InvalidLength(dim));
        }
        let n = dim.trailing_zeros() as usize;
        let paulis: Vec<DMatrix<Complex64>> = PauliString::all(n).map(|p| pauli_matrix(&p)).collect();
        let len = paulis.len();
        let mut m = DMatrix::zeros(len, len);
        for (b, pb) in paulis.iter().enumerate() {
            let mut out = DMatrix::<Complex64>::zeros(dim, dim);
            for k in kraus {
                out += k * pb * k.adjoint();
            }
            for (a, pa) in paulis.iter().enumerate() {
                let t = (pa * &out).trace() / dim as f64;
                if t.im.abs() > 1e-9 {
                    return Err(Error::InvalidChannel(format!(
                        "PTM entry ({a},{b}) has imaginary part {}",
                        t.im
                    )));
                }
                m[(a, b)] = t.re;
            }
        }
        Ok(Ptm { n, matrix: m })
    }

    /// Map applying `self` then `next`.
    pub fn then(&self, next: &Ptm) -> Result<Ptm> {
        if self.n != next.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: next.n,
            });
        }
        Ok(Ptm {
            n: self.n,
            matrix: &next.matrix * &self.matrix,
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    /// Largest deviation of the first row from `(1, 0, …, 0)`.
    pub fn trace_preservation_error(&self) -> f64 {
        self.matrix
            .row(0)
            .iter()
            .enumerate()
            .map(|(j, &v)| (v - if j == 0 { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }
}

/// PTM of the unitary channel `ρ ↦ U ρ U†`.
pub fn ptm_of_unitary(u: &DMatrix<Complex64>) -> Result<Ptm> {
    if !u.is_square() {
        return Err(Error::InvalidLength(u.nrows() * u.ncols()));
    }
    let dev = (u * u.adjoint() - DMatrix::<Complex64>::identity(u.nrows(), u.nrows()))
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max);
    if dev > 1e-9 {
        return Err(Error::NonUnitary(dev));
    }
    Ptm::from_kraus(std::slice::from_ref(u))
}

/// Pauli twirl of a map: keeps the PTM diagonal and returns it as a channel.
pub fn twirl_ptm(r: &Ptm) -> Result<PauliChannel> {
    let tp = r.trace_preservation_error();
    if tp > PROB_TOL {
        return Err(Error::NotTracePreserving(tp));
    }
    let probs = inverse_hadamard(&r.diagonal())?;
    if let Some(v) = probs
        .iter()
        .find(|v| **v < -PROB_TOL || **v > 1.0 + PROB_TOL)
    {
        return Err(Error::InvalidChannel(format!(
            "twirled probability {v} outside [0, 1]"
        )));
    }
    let probs = probs.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    PauliChannel::new(r.num_qubits(), probs)
}

/// Readout confusion matrix, `C[(true, measured)] = p(measured | true)`.
///
/// Basis states are indexed with qubit 0 as the most significant bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfusionRepr", into = "ConfusionRepr")]
pub struct ConfusionMatrix {
    n: usize,
    matrix: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct ConfusionRepr {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<ConfusionRepr> for ConfusionMatrix {
    type Error = Error;
    fn try_from(r: ConfusionRepr) -> Result<Self> {
        let dim = r.rows.len();
        if r.rows.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidParameter("confusion matrix must be square".into()));
        }
        let flat: Vec<f64> = r.rows.into_iter().flatten().collect();
        ConfusionMatrix::new(DMatrix::from_row_slice(dim, dim, &flat))
    }
}

impl From<ConfusionMatrix> for ConfusionRepr {
    fn from(c: ConfusionMatrix) -> Self {
        ConfusionRepr {
            rows: c
                .matrix
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        }
    }
}

impl ConfusionMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        if !matrix.is_square() || !dim.is_power_of_two() {
            return Err(Error::InvalidLength(dim));
        }
        if matrix
            .iter()
            .any(|&v| !v.is_finite() || !(-PROB_TOL..=1.0 + PROB_TOL).contains(&v))
        {
            return Err(Error::InvalidParameter(
                "confusion entries must lie in [0, 1]".into(),
            ));
        }
        for (i, row) in matrix.row_iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidParameter(format!(
                    "confusion row {i} sums to {s}"
                )));
            }
        }
        Ok(ConfusionMatrix {
            n: dim.trailing_zeros() as usize,
            matrix,
        })
    }

    pub fn identity(n: usize) -> Self {
        ConfusionMatrix {
            n,
            matrix: DMatrix::identity(1 << n, 1 << n),
        }
    }

    /// Symmetric single-qubit readout bit flip with probability `p`.
    pub fn bit_flip(p: f64) -> Result<Self> {
        ConfusionMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0 - p, p, p, 1.0 - p]))
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, truth: usize, measured: usize) -> f64 {
        self.matrix[(truth, measured)]
    }

    /// Joint confusion of independent readouts, `self` on the leading qubits.
    pub fn kron(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            n: self.n + other.n,
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    pub fn tensor(parts: &[ConfusionMatrix]) -> ConfusionMatrix {
        parts
            .iter()
            .fold(ConfusionMatrix::identity(0), |acc, c| acc.kron(c))
    }

    /// Average over all classical relabelings `F_f C F_f`, which is what a
    /// random pre-measurement Pauli plus conditional bit flip produces.
    pub fn symmetrized(&self) -> ConfusionMatrix {
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for f in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    m[(i, j)] += self.matrix[(i ^ f, j ^ f)];
                }
            }
        }
        m /= dim as f64;
        ConfusionMatrix { n: self.n, matrix: m }
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose())
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Confusion matrix implied by a measurement-error map placed before an ideal
/// computational-basis measurement: `C_ji = tr(E_i · E(E_j))`.
pub fn confusion_from_ptm(ptm: &Ptm) -> Result<ConfusionMatrix> {
    let n = ptm.num_qubits();
    let dim = 1usize << n;
    let len = 1usize << (2 * n);
    let z_type: Vec<PauliString> = PauliString::all(n).filter(|p| p.is_z_type()).collect();
    let parity = |p: &PauliString, bits: usize| -> f64 {
        // bit for qubit q sits at position n-1-q
        let mut s = 0;
        for q in 0..n {
            if p.get(q) == Pauli::Z && (bits >> (n - 1 - q)) & 1 == 1 {
                s ^= 1;
            }
        }
        if s == 1 {
            -1.0
        } else {
            1.0
        }
    };
    let mut c = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut r = nalgebra::DVector::zeros(len);
        for p in &z_type {
            r[p.index()] = parity(p, j);
        }
        let out = ptm.matrix() * r;
        for i in 0..dim {
            c[(j, i)] = z_type.iter().map(|p| parity(p, i) * out[p.index()]).sum::<f64>() / dim as f64;
        }
    }
    ConfusionMatrix::new(c)
}

/// Generalized amplitude damping readout error and its confusion matrix.
///
/// `gamma` is the damping probability and `beta` the steady-state ground
/// population.
pub fn damping_measurement_model(gamma: f64, beta: f64) -> Result<(Ptm, ConfusionMatrix)> {
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "damping parameters must lie in [0, 1] (gamma={gamma}, beta={beta})"
        )));
    }
    let s = (1.0 - gamma).sqrt();
    #[rustfmt::skip]
    let ptm = DMatrix::from_row_slice(4, 4, &[
        1.0, 0.0, 0.0, 0.0,
        0.0, s, 0.0, 0.0,
        0.0, 0.0, s, 0.0,
        gamma * (2.0 * beta - 1.0), 0.0, 0.0, 1.0 - gamma,
    ]);
    #[rustfmt::skip]
    let conf = DMatrix::from_row_slice(2, 2, &[
        1.0 + gamma * (beta - 1.0), gamma * (1.0 - beta),
        gamma * beta, 1.0 - gamma * beta,
    ]);
    Ok((Ptm::new(ptm)?, ConfusionMatrix::new(conf)?))
}

/// Confusion matrix seen after measurement twirling of the readout map `ptm`.
pub fn symmetrize_confusion_via_twirl(ptm: &Ptm) -> Result<ConfusionMatrix> {
    let twirled = Ptm::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
        ptm.diagonal(),
    )))?;
    confusion_from_ptm(&twirled)
}
