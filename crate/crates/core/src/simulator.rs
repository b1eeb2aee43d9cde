//! Pauli-vector simulation of noisy circuits, shot sampling and readout
//! mitigation.
//!
//! A state is stored as its Pauli coefficient vector `r_a = tr(P_a ρ)`, so the
//! identity component is always 1. Gates act as signed permutations, Pauli
//! channels as diagonal scalings and the remaining (coherent) errors as dense
//! PTMs. Outcome bitstrings index the measured qubits with the first measured
//! qubit as the most significant bit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channels::{ptm_of_unitary, ConfusionMatrix, PauliChannel};
use crate::circuits::{prep_and_basis_circuits, rz_unitary, Circuit, GateKind, GateOp, TwirlInstance};
use crate::error::{Error, Result};
use crate::pauli::{CliffordTableau, Pauli, PauliString, Sign};

/// Largest register the dense simulator accepts.
pub const MAX_SIM_QUBITS: usize = 3;

/// Condition number above which a confusion matrix is not inverted.
pub const MAX_CONDITION: f64 = 1e6;

/// Gate whose error channel is part of a [`NoiseModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GateKey {
    SqrtX(usize),
    S(usize),
    /// Stored with the smaller qubit first; the channel acts on `(a, b)` in
    /// that order.
    Cz(usize, usize),
}

impl GateKey {
    pub fn cz(a: usize, b: usize) -> Self {
        GateKey::Cz(a.min(b), a.max(b))
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateKey::SqrtX(q) | GateKey::S(q) => vec![q],
            GateKey::Cz(a, b) => vec![a, b],
        }
    }

    pub fn of(op: &GateOp) -> Option<GateKey> {
        match op.kind {
            GateKind::SqrtX => Some(GateKey::SqrtX(op.qubits[0])),
            GateKind::S => Some(GateKey::S(op.qubits[0])),
            GateKind::Cz => Some(GateKey::cz(op.qubits[0], op.qubits[1])),
            GateKind::Rz { .. } | GateKind::Measure => None,
        }
    }
}

impl fmt::Display for GateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateKey::SqrtX(q) => write!(f, "sqrt_x[{q}]"),
            GateKey::S(q) => write!(f, "s[{q}]"),
            GateKey::Cz(a, b) => write!(f, "cz[{a},{b}]"),
        }
    }
}

impl FromStr for GateKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown gate key {s:?}"));
        let (name, rest) = s.split_once('[').ok_or_else(bad)?;
        let args = rest.strip_suffix(']').ok_or_else(bad)?;
        let qs: Vec<usize> = args
            .split(',')
            .map(|a| a.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (name, qs.as_slice()) {
            ("sqrt_x", [q]) => Ok(GateKey::SqrtX(*q)),
            ("s", [q]) => Ok(GateKey::S(*q)),
            ("cz", [a, b]) if a != b => Ok(GateKey::cz(*a, *b)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for GateKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GateKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-gate Pauli channels plus state-preparation and readout errors.
///
/// `spam` is the per-qubit Pauli channel applied after the circuit body and
/// before the measurement basis change. `readout` and `prep_flip` describe
/// classical readout confusion and an initial bit flip of `|0⟩`; neither is a
/// parameter of the fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseModelRepr", into = "NoiseModelRepr")]
pub struct NoiseModel {
    n: usize,
    gates: BTreeMap<GateKey, PauliChannel>,
    spam: Vec<PauliChannel>,
    readout: Vec<ConfusionMatrix>,
    prep_flip: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NoiseModelRepr {
    n: usize,
    gates: BTreeMap<GateKey, PauliChannel>,
    #[serde(default)]
    spam: Option<Vec<PauliChannel>>,
    #[serde(default)]
    readout: Option<Vec<ConfusionMatrix>>,
    #[serde(default)]
    prep_flip: Option<Vec<f64>>,
}

impl TryFrom<NoiseModelRepr> for NoiseModel {
    type Error = Error;

    fn try_from(r: NoiseModelRepr) -> Result<Self> {
        let mut nm = NoiseModel::new(r.n)?;
        for (k, ch) in r.gates {
            nm.set_gate(k, ch)?;
        }
        if let Some(spam) = r.spam {
            for (q, ch) in spam.into_iter().enumerate() {
                nm.set_spam(q, ch)?;
            }
        }
        if let Some(ro) = r.readout {
            for (q, c) in ro.into_iter().enumerate() {
                nm.set_readout(q, c)?;
            }
        }
        if let Some(pf) = r.prep_flip {
            for (q, p) in pf.into_iter().enumerate() {
                nm.set_prep_flip(q, p)?;
            }
        }
        Ok(nm)
    }
}

impl From<NoiseModel> for NoiseModelRepr {
    fn from(nm: NoiseModel) -> Self {
        NoiseModelRepr {
            n: nm.n,
            gates: nm.gates,
            spam: Some(nm.spam),
            readout: Some(nm.readout),
            prep_flip: Some(nm.prep_flip),
        }
    }
}

impl NoiseModel {
    /// Model with no gate channels yet and ideal SPAM.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_SIM_QUBITS {
            return Err(Error::InvalidParameter(format!(
                "simulator supports 1..={MAX_SIM_QUBITS} qubits, got {n}"
            )));
        }
        Ok(NoiseModel {
            n,
            gates: BTreeMap::new(),
            spam: vec![PauliChannel::identity(1); n],
            readout: vec![ConfusionMatrix::identity(1); n],
            prep_flip: vec![0.0; n],
        })
    }

    /// Ideal channels for `√X_q`, `S_q` on every qubit and CZ on every pair.
    pub fn noiseless(n: usize) -> Result<Self> {
        let mut nm = NoiseModel::new(n)?;
        for q in 0..n {
            nm.gates.insert(GateKey::SqrtX(q), PauliChannel::identity(1));
            nm.gates.insert(GateKey::S(q), PauliChannel::identity(1));
            for b in q + 1..n {
                nm.gates.insert(GateKey::Cz(q, b), PauliChannel::identity(2));
            }
        }
        Ok(nm)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn set_gate(&mut self, key: GateKey, ch: PauliChannel) -> Result<()> {
        let qs = key.qubits();
        if qs.iter().any(|&q| q >= self.n) {
            return Err(Error::InvalidParameter(format!(
                "{key} is outside a {}-qubit register",
                self.n
            )));
        }
        if ch.num_qubits() != qs.len() {
            return Err(Error::DimensionMismatch {
                expected: qs.len(),
                found: ch.num_qubits(),
            });
        }
        self.gates.insert(key, ch);
        Ok(())
    }

    pub fn with_gate(mut self, key: GateKey, ch: PauliChannel) -> Result<Self> {
        self.set_gate(key, ch)?;
        Ok(self)
    }

    pub fn set_spam(&mut self, q: usize, ch: PauliChannel) -> Result<()> {
        self.check_qubit(q)?;
        if ch.num_qubits() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: ch.num_qubits(),
            });
        }
        self.spam[q] = ch;
        Ok(())
    }

    pub fn set_readout(&mut self, q: usize, c: ConfusionMatrix) -> Result<()> {
        self.check_qubit(q)?;
        if c.num_qubits() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: c.num_qubits(),
            });
        }
        self.readout[q] = c;
        Ok(())
    }

    pub fn set_prep_flip(&mut self, q: usize, p: f64) -> Result<()> {
        self.check_qubit(q)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "prep flip probability {p} outside [0, 1]"
            )));
        }
        self.prep_flip[q] = p;
        Ok(())
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::InvalidParameter(format!(
                "qubit {q} outside a {}-qubit register",
                self.n
            )));
        }
        Ok(())
    }

    pub fn gates(&self) -> &BTreeMap<GateKey, PauliChannel> {
        &self.gates
    }

    pub fn gate(&self, key: &GateKey) -> Option<&PauliChannel> {
        self.gates.get(key)
    }

    pub fn spam(&self) -> &[PauliChannel] {
        &self.spam
    }

    pub fn readout(&self) -> &[ConfusionMatrix] {
        &self.readout
    }

    pub fn prep_flip(&self) -> &[f64] {
        &self.prep_flip
    }

    /// Channel for `op`; `None` for virtual `Rz` gates.
    pub fn channel_for(&self, op: &GateOp) -> Result<Option<&PauliChannel>> {
        match GateKey::of(op) {
            None => Ok(None),
            Some(k) => self
                .gates
                .get(&k)
                .map(Some)
                .ok_or_else(|| Error::MissingChannel(k.to_string())),
        }
    }

    /// Number of free Pauli-channel parameters (gates plus SPAM).
    pub fn parameter_count(&self) -> usize {
        self.gates
            .values()
            .map(|c| c.probs().len() - 1)
            .sum::<usize>()
            + 3 * self.n
    }

    /// True when readout and preparation are ideal.
    pub fn has_ideal_readout(&self) -> bool {
        self.prep_flip.iter().all(|&p| p == 0.0)
            && self.readout.iter().all(|c| *c == ConfusionMatrix::identity(1))
    }
}

/// Prep, noisy body and basis change for one measurement setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub n: usize,
    /// Noiseless gates applied to `|0…0⟩`.
    pub prep: Vec<GateOp>,
    /// Noisy gates (no measurements).
    pub body: Circuit,
    /// Whether the per-qubit SPAM channels act after the body.
    pub spam: bool,
    /// Noiseless gates applied after SPAM, before readout.
    pub basis_change: Vec<GateOp>,
    pub measured: Vec<usize>,
}

impl Experiment {
    /// Runs `c` from `|0…0⟩`, measuring its terminal measurements or, if it
    /// has none, every qubit.
    pub fn from_circuit(c: &Circuit) -> Result<Self> {
        c.validate()?;
        let mut measured = c.measured_qubits();
        if measured.is_empty() {
            measured = (0..c.n).collect();
        }
        let body = Circuit {
            n: c.n,
            ops: c.unitary_ops().cloned().collect(),
            layers: Vec::new(),
        };
        Ok(Experiment {
            n: c.n,
            prep: Vec::new(),
            body,
            spam: true,
            basis_change: Vec::new(),
            measured,
        })
    }

    /// Prepares an eigenstate of `input`, runs `body` and measures `output`
    /// on all qubits. Also returns the eigenvalue of the prepared state.
    pub fn pauli_measurement(
        body: &Circuit,
        input: &PauliString,
        output: &PauliString,
    ) -> Result<(Self, Sign)> {
        let pb = prep_and_basis_circuits(input, output);
        let mut exp = Experiment::from_circuit(body)?;
        exp.measured = (0..body.n).collect();
        exp.prep = pb.prep;
        exp.basis_change = pb.basis_change;
        Ok((exp, pb.prep_sign))
    }

    /// Prepares computational basis state `bits` over `measured` (first
    /// qubit most significant) and measures it with no gates in between.
    pub fn calibration(n: usize, measured: &[usize], bits: usize) -> Self {
        let m = measured.len();
        let prep = measured
            .iter()
            .enumerate()
            .filter(|(i, _)| (bits >> (m - 1 - i)) & 1 == 1)
            .flat_map(|(_, &q)| [GateOp::sqrt_x(q), GateOp::sqrt_x(q)])
            .collect();
        Experiment {
            n,
            prep,
            body: Circuit::new(n),
            spam: false,
            basis_change: Vec::new(),
            measured: measured.to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_SIM_QUBITS {
            return Err(Error::InvalidParameter(format!(
                "simulator supports 1..={MAX_SIM_QUBITS} qubits, got {}",
                self.n
            )));
        }
        if self.body.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: self.body.n,
            });
        }
        self.body.validate()?;
        if self.body.ops.iter().any(|o| o.kind == GateKind::Measure) {
            return Err(Error::InvalidCircuit("experiment body contains measurements".into()));
        }
        for op in self.prep.iter().chain(&self.basis_change) {
            op.validate(self.n)?;
        }
        if self.measured.is_empty() || self.measured.iter().any(|&q| q >= self.n) {
            return Err(Error::InvalidCircuit(format!(
                "bad measured qubit list {:?}",
                self.measured
            )));
        }
        Ok(())
    }
}

/// Probabilities over the measured qubits' bitstrings, optionally with the
/// shot counts they were estimated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub qubits: Vec<usize>,
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u64>>,
}

impl OutcomeDistribution {
    pub fn new(qubits: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << qubits.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << qubits.len(),
                found: probs.len(),
            });
        }
        Ok(OutcomeDistribution {
            qubits,
            probs,
            counts: None,
        })
    }

    pub fn from_counts(qubits: Vec<usize>, counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidParameter("no shots recorded".into()));
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let mut d = OutcomeDistribution::new(qubits, probs)?;
        d.counts = Some(counts);
        Ok(d)
    }

    pub fn shots(&self) -> Option<u64> {
        self.counts.as_ref().map(|c| c.iter().sum())
    }

    /// Multinomial sample of `shots` outcomes.
    pub fn sample<R: Rng + ?Sized>(&self, shots: u64, rng: &mut R) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidParameter("shot count must be positive".into()));
        }
        let mut counts = vec![0u64; self.probs.len()];
        let mut left = shots;
        let mut mass = 1.0;
        let last = self.probs.len() - 1;
        for (i, &p) in self.probs.iter().enumerate() {
            if left == 0 {
                break;
            }
            if i == last {
                counts[i] = left;
                break;
            }
            let q = (p.max(0.0) / mass).clamp(0.0, 1.0);
            let k = Binomial::new(left, q)
                .map_err(|e| Error::NonFinite(e.to_string()))?
                .sample(rng);
            counts[i] = k;
            left -= k;
            mass -= p.max(0.0);
        }
        OutcomeDistribution::from_counts(self.qubits.clone(), counts)
    }

    /// `⟨Z_S⟩` for the subset of measured positions in `mask` (bit `m-1-i`
    /// selects `qubits[i]`).
    pub fn parity_expectation(&self, mask: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(j, p)| if (j & mask).count_ones() % 2 == 0 { *p } else { -*p })
            .sum()
    }

    pub fn total_variation(&self, other: &OutcomeDistribution) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Observed distribution `p̃ = Cᵀ p` under independent per-qubit readout.
pub fn apply_confusion(dist: &OutcomeDistribution, confusion: &[ConfusionMatrix]) -> Result<OutcomeDistribution> {
    let joint = ConfusionMatrix::tensor(confusion);
    if joint.matrix().nrows() != dist.probs.len() {
        return Err(Error::DimensionMismatch {
            expected: dist.probs.len(),
            found: joint.matrix().nrows(),
        });
    }
    let p = joint.matrix().transpose() * DVector::from_column_slice(&dist.probs);
    OutcomeDistribution::new(dist.qubits.clone(), p.iter().copied().collect())
}

/// `(Cᵀ)⁻¹`, refusing ill-conditioned confusion matrices.
pub fn mitigation_matrix(confusion: &ConfusionMatrix) -> Result<DMatrix<f64>> {
    let ct = confusion.matrix().transpose();
    let sv = ct.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > MAX_CONDITION {
        return Err(Error::Conditioning(cond));
    }
    ct.try_inverse().ok_or(Error::Conditioning(f64::INFINITY))
}

/// Readout-mitigated distribution `(Cᵀ)⁻¹ p̃`.
///
/// Small negative entries are kept unless `clip` is set, in which case they
/// are zeroed and the rest renormalized.
pub fn mem_mitigate(dist: &OutcomeDistribution, confusion: &ConfusionMatrix, clip: bool) -> Result<OutcomeDistribution> {
    if confusion.matrix().nrows() != dist.probs.len() {
        return Err(Error::DimensionMismatch {
            expected: dist.probs.len(),
            found: confusion.matrix().nrows(),
        });
    }
    let m = mitigation_matrix(confusion)?;
    let mut p: Vec<f64> = (m * DVector::from_column_slice(&dist.probs)).iter().copied().collect();
    let neg = p.iter().filter(|&&v| v < 0.0).count();
    if neg > 0 {
        if clip {
            p.iter_mut().for_each(|v| *v = v.max(0.0));
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
        } else {
            log::debug!("mitigated distribution has {neg} negative entries");
        }
    }
    let mut out = OutcomeDistribution::new(dist.qubits.clone(), p)?;
    out.counts = dist.counts.clone();
    Ok(out)
}

/// Empirical confusion matrix over `qubits` from `shots` per prepared basis
/// state. Preparation flips and readout errors act; the SPAM channel does not.
pub fn estimate_confusion<R: Rng + ?Sized>(
    nm: &NoiseModel,
    qubits: &[usize],
    shots: u64,
    rng: &mut R,
    twirl_measurement: bool,
) -> Result<ConfusionMatrix> {
    let dim = 1usize << qubits.len();
    let mut m = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let exp = Experiment::calibration(nm.num_qubits(), qubits, j);
        let d = run_shots(&exp, nm, shots, rng, twirl_measurement)?;
        for (i, p) in d.probs.iter().enumerate() {
            m[(j, i)] = *p;
        }
    }
    ConfusionMatrix::new(m)
}

#[derive(Debug, Clone)]
enum Step {
    /// `r'[target[a]] = sign[a] · r[a]`.
    Perm { target: Vec<usize>, sign: Vec<f64> },
    Diag(Vec<f64>),
    Dense(DMatrix<f64>),
    /// Slot for the random Pauli frame before (`false`) or after (`true`) CZ number `k`.
    Frame { k: usize, after: bool },
}

/// Experiment compiled against a noise model.
#[derive(Debug, Clone)]
struct Program {
    n: usize,
    paulis: Vec<PauliString>,
    init: Vec<f64>,
    steps: Vec<Step>,
    cz_qubits: Vec<(usize, usize)>,
    measured: Vec<usize>,
    readout: Vec<ConfusionMatrix>,
}

fn signed_perm(paulis: &[PauliString], t: &CliffordTableau) -> Result<Step> {
    let mut target = vec![0; paulis.len()];
    let mut sign = vec![0.0; paulis.len()];
    for p in paulis {
        let (img, s) = t.conjugate(p)?;
        target[p.index()] = img.index();
        sign[p.index()] = s.to_f64();
    }
    Ok(Step::Perm { target, sign })
}

/// Full-register diagonal from local eigenvalues on `qubits`.
fn embed_diag(paulis: &[PauliString], qubits: &[usize], local: &[f64]) -> Vec<f64> {
    paulis.iter().map(|p| local[p.restrict(qubits).index()]).collect()
}

/// Full-register PTM from a local PTM on `qubits`.
fn embed_ptm(paulis: &[PauliString], qubits: &[usize], local: &DMatrix<f64>) -> DMatrix<f64> {
    let len = paulis.len();
    let mut m = DMatrix::zeros(len, len);
    let rest = |p: &PauliString| {
        let mut p = *p;
        for &q in qubits {
            p.set(q, Pauli::I);
        }
        p
    };
    for a in paulis {
        for b in paulis {
            if rest(a) == rest(b) {
                m[(a.index(), b.index())] = local[(a.restrict(qubits).index(), b.restrict(qubits).index())];
            }
        }
    }
    m
}

fn is_clifford_rz(angle: f64) -> bool {
    let q = angle / std::f64::consts::FRAC_PI_2;
    (q - q.round()).abs() < 1e-12
}

/// `mode`: `Exact` folds the twirl analytically, `Raw` leaves it out and
/// `Frames` leaves slots for per-shot frames.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Raw,
    Twirled,
    Frames,
}

fn compile(exp: &Experiment, nm: &NoiseModel, mode: Mode) -> Result<Program> {
    exp.validate()?;
    if nm.num_qubits() != exp.n {
        return Err(Error::DimensionMismatch {
            expected: exp.n,
            found: nm.num_qubits(),
        });
    }
    let n = exp.n;
    let paulis: Vec<PauliString> = PauliString::all(n).collect();
    let init = paulis
        .iter()
        .map(|p| {
            if p.is_z_type() {
                (0..n)
                    .filter(|&q| p.get(q) != Pauli::I)
                    .map(|q| 1.0 - 2.0 * nm.prep_flip()[q])
                    .product()
            } else {
                0.0
            }
        })
        .collect();
    let mut steps = Vec::new();
    let ideal = |op: &GateOp, steps: &mut Vec<Step>| -> Result<()> {
        match op.kind {
            GateKind::Rz { angle } if !is_clifford_rz(angle) => {
                let local = ptm_of_unitary(&op.local_unitary()?)?;
                steps.push(Step::Dense(embed_ptm(&paulis, &op.qubits, local.matrix())));
            }
            _ => steps.push(signed_perm(&paulis, &op.tableau(n)?)?),
        }
        Ok(())
    };
    for op in &exp.prep {
        ideal(op, &mut steps)?;
    }
    let mut cz_qubits = Vec::new();
    for op in &exp.body.ops {
        let is_cz = op.kind == GateKind::Cz;
        if is_cz && mode == Mode::Frames {
            steps.push(Step::Frame {
                k: cz_qubits.len(),
                after: false,
            });
        }
        ideal(op, &mut steps)?;
        if let Some(ch) = nm.channel_for(op)? {
            let key = GateKey::of(op).expect("channel implies key");
            let mut diag = embed_diag(&paulis, &key.qubits(), &ch.eigenvalues());
            if let Some(inj) = op.injected_rz {
                let local = ptm_of_unitary(&rz_unitary(inj.angle))?;
                if mode == Mode::Twirled {
                    let d = embed_diag(&paulis, &[inj.target], &local.diagonal());
                    diag.iter_mut().zip(d).for_each(|(a, b)| *a *= b);
                    steps.push(Step::Diag(diag));
                } else {
                    steps.push(Step::Diag(diag));
                    steps.push(Step::Dense(embed_ptm(&paulis, &[inj.target], local.matrix())));
                }
            } else {
                steps.push(Step::Diag(diag));
            }
        }
        if is_cz {
            if mode == Mode::Frames {
                steps.push(Step::Frame {
                    k: cz_qubits.len(),
                    after: true,
                });
            }
            cz_qubits.push((op.qubits[0], op.qubits[1]));
        }
    }
    if exp.spam {
        let mut diag = vec![1.0; paulis.len()];
        for (q, ch) in nm.spam().iter().enumerate() {
            let d = embed_diag(&paulis, &[q], &ch.eigenvalues());
            diag.iter_mut().zip(d).for_each(|(a, b)| *a *= b);
        }
        steps.push(Step::Diag(diag));
    }
    for op in &exp.basis_change {
        ideal(op, &mut steps)?;
    }
    let readout = exp
        .measured
        .iter()
        .map(|&q| {
            let c = &nm.readout()[q];
            if mode == Mode::Twirled {
                c.symmetrized()
            } else {
                c.clone()
            }
        })
        .collect();
    Ok(Program {
        n,
        paulis,
        init,
        steps,
        cz_qubits,
        measured: exp.measured.clone(),
        readout,
    })
}

fn frame_signs(paulis: &[PauliString], frame: &PauliString, out: &mut [f64]) {
    for (o, p) in out.iter_mut().zip(paulis) {
        *o = if frame.commutes_with(p) { 1.0 } else { -1.0 };
    }
}

impl Program {
    fn evolve(&self, twirl: Option<&TwirlInstance>) -> Vec<f64> {
        let mut r = self.init.clone();
        let mut buf = vec![0.0; r.len()];
        for step in &self.steps {
            match step {
                Step::Perm { target, sign } => {
                    for (a, &v) in r.iter().enumerate() {
                        buf[target[a]] = sign[a] * v;
                    }
                    std::mem::swap(&mut r, &mut buf);
                }
                Step::Diag(d) => r.iter_mut().zip(d).for_each(|(v, s)| *v *= s),
                Step::Dense(m) => {
                    let out = m * DVector::from_column_slice(&r);
                    r.copy_from_slice(out.as_slice());
                }
                Step::Frame { k, after } => {
                    if let Some(t) = twirl {
                        let (before, aft) = t.cz_paulis[*k];
                        let local = if *after { aft } else { before };
                        let (a, b) = self.cz_qubits[*k];
                        let frame = PauliString::embed(self.n, &[a, b], &local);
                        frame_signs(&self.paulis, &frame, &mut buf);
                        r.iter_mut().zip(&buf).for_each(|(v, s)| *v *= s);
                    }
                }
            }
        }
        r
    }

    /// Ideal computational-basis probabilities over the measured qubits.
    fn marginal(&self, r: &[f64]) -> Vec<f64> {
        let m = self.measured.len();
        let dim = 1usize << m;
        let mut probs = vec![0.0; dim];
        for mask in 0..dim {
            let mut z = PauliString::identity(self.n);
            for (i, &q) in self.measured.iter().enumerate() {
                if (mask >> (m - 1 - i)) & 1 == 1 {
                    z.set(q, Pauli::Z);
                }
            }
            let v = r[z.index()];
            for (j, p) in probs.iter_mut().enumerate() {
                if (j & mask).count_ones() % 2 == 0 {
                    *p += v;
                } else {
                    *p -= v;
                }
            }
        }
        probs.iter_mut().for_each(|p| *p /= dim as f64);
        probs
    }
}

/// Exact outcome distribution of `exp`.
///
/// With `twirl`, every CZ and measurement is averaged over its Pauli twirl:
/// CZ errors (including any injected `Rz`) become their Pauli-diagonal parts
/// and each readout confusion is replaced by its symmetrization.
pub fn run_exact(exp: &Experiment, nm: &NoiseModel, twirl: bool) -> Result<OutcomeDistribution> {
    let prog = compile(exp, nm, if twirl { Mode::Twirled } else { Mode::Raw })?;
    let r = prog.evolve(None);
    let ideal = OutcomeDistribution::new(prog.measured.clone(), prog.marginal(&r))?;
    apply_confusion(&ideal, &prog.readout)
}

/// Final Pauli vector of `exp` before readout (diagnostics and tests).
pub fn final_pauli_vector(exp: &Experiment, nm: &NoiseModel, twirl: bool) -> Result<Vec<f64>> {
    let prog = compile(exp, nm, if twirl { Mode::Twirled } else { Mode::Raw })?;
    Ok(prog.evolve(None))
}

/// Samples `shots` outcomes of the exact distribution.
///
/// Statistically identical to [`run_shots`] (a fresh twirl per shot followed
/// by one outcome draw is a draw from the twirl-averaged distribution) and
/// much cheaper, so the estimation pipelines use it.
pub fn sample_exact<R: Rng + ?Sized>(
    exp: &Experiment,
    nm: &NoiseModel,
    shots: u64,
    rng: &mut R,
    twirl: bool,
) -> Result<OutcomeDistribution> {
    run_exact(exp, nm, twirl)?.sample(shots, rng)
}

fn draw(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.max(0.0);
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Shot-by-shot simulation. With `twirl`, each shot draws a fresh
/// [`TwirlInstance`]: random Paulis around every CZ and before every
/// measurement, with the recorded bit flipped back for `X`/`Y`.
pub fn run_shots<R: Rng + ?Sized>(
    exp: &Experiment,
    nm: &NoiseModel,
    shots: u64,
    rng: &mut R,
    twirl: bool,
) -> Result<OutcomeDistribution> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shot count must be positive".into()));
    }
    if !twirl {
        return sample_exact(exp, nm, shots, rng, false);
    }
    let prog = compile(exp, nm, Mode::Frames)?;
    let m = prog.measured.len();
    let mut counts = vec![0u64; 1 << m];
    let meas_paulis: Vec<PauliString> = prog
        .measured
        .iter()
        .map(|&q| PauliString::single(prog.n, q, Pauli::X))
        .collect();
    let mut signs = vec![0.0; prog.paulis.len()];
    for _ in 0..shots {
        let t = TwirlInstance::sample(prog.cz_qubits.len(), m, rng);
        let mut r = prog.evolve(Some(&t));
        // pre-measurement Paulis; only their X part acts on Z-type components
        let mut frame = PauliString::identity(prog.n);
        for (i, &(p, _)) in t.measurement.iter().enumerate() {
            if p.flips_bit() {
                frame = frame.product(&meas_paulis[i]);
            }
        }
        frame_signs(&prog.paulis, &frame, &mut signs);
        r.iter_mut().zip(&signs).for_each(|(v, s)| *v *= s);
        let truth = draw(&prog.marginal(&r), rng.random::<f64>());
        let mut outcome = 0usize;
        for i in 0..m {
            let bit = (truth >> (m - 1 - i)) & 1;
            let c = &prog.readout[i];
            let read = if rng.random::<f64>() < c.get(bit, 1) { 1 } else { 0 };
            let flip = usize::from(t.measurement[i].1);
            outcome |= (read ^ flip) << (m - 1 - i);
        }
        counts[outcome] += 1;
    }
    OutcomeDistribution::from_counts(prog.measured.clone(), counts)
}
