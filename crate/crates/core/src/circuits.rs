//! Native gate-set circuits, per-shot twirls and benchmarking sequences.
//!
//! The native set is `{√X_q, S_q, Rz_q(φ), CZ, M_q}`. A CZ may carry an
//! injected coherent `Rz` error on one of its qubits, applied right after the
//! bare gate.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{CliffordTableau, Pauli, PauliString, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum GateKind {
    SqrtX,
    S,
    Rz { angle: f64 },
    Cz,
    Measure,
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::Cz => 2,
            _ => 1,
        }
    }
}

/// Coherent `Rz(angle)` on `target`, right after the bare CZ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectedRz {
    pub angle: f64,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    #[serde(flatten)]
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected_rz: Option<InjectedRz>,
}

impl GateOp {
    pub fn sqrt_x(q: usize) -> Self {
        GateOp {
            kind: GateKind::SqrtX,
            qubits: vec![q],
            injected_rz: None,
        }
    }

    pub fn s(q: usize) -> Self {
        GateOp {
            kind: GateKind::S,
            qubits: vec![q],
            injected_rz: None,
        }
    }

    pub fn rz(q: usize, angle: f64) -> Self {
        GateOp {
            kind: GateKind::Rz { angle },
            qubits: vec![q],
            injected_rz: None,
        }
    }

    pub fn cz(a: usize, b: usize) -> Self {
        GateOp {
            kind: GateKind::Cz,
            qubits: vec![a, b],
            injected_rz: None,
        }
    }

    pub fn measure(q: usize) -> Self {
        GateOp {
            kind: GateKind::Measure,
            qubits: vec![q],
            injected_rz: None,
        }
    }

    pub fn label(&self) -> String {
        let qs: Vec<String> = self.qubits.iter().map(|q| q.to_string()).collect();
        let name = match self.kind {
            GateKind::SqrtX => "sqrt_x".to_string(),
            GateKind::S => "s".to_string(),
            GateKind::Rz { angle } => format!("rz({angle})"),
            GateKind::Cz => "cz".to_string(),
            GateKind::Measure => "measure".to_string(),
        };
        format!("{name}[{}]", qs.join(","))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.qubits.len() != self.kind.arity() {
            return Err(Error::InvalidCircuit(format!(
                "{} acts on {} qubits",
                self.label(),
                self.qubits.len()
            )));
        }
        if let Some(&q) = self.qubits.iter().find(|&&q| q >= n) {
            return Err(Error::InvalidCircuit(format!(
                "{}: qubit {q} out of range for {n} qubits",
                self.label()
            )));
        }
        if self.kind == GateKind::Cz && self.qubits[0] == self.qubits[1] {
            return Err(Error::InvalidCircuit("CZ needs two distinct qubits".into()));
        }
        if let Some(inj) = &self.injected_rz {
            if self.kind != GateKind::Cz {
                return Err(Error::InvalidCircuit(format!(
                    "{}: injected Rz is only allowed on CZ",
                    self.label()
                )));
            }
            if !self.qubits.contains(&inj.target) {
                return Err(Error::InvalidCircuit(format!(
                    "injected Rz target {} is not in the CZ support",
                    inj.target
                )));
            }
        }
        Ok(())
    }

    /// Tableau of the ideal gate; `Rz` only for multiples of π/2.
    pub fn tableau(&self, n: usize) -> Result<CliffordTableau> {
        let q = self.qubits[0];
        match self.kind {
            GateKind::SqrtX => Ok(CliffordTableau::sqrt_x(n, q)),
            GateKind::S => Ok(CliffordTableau::s(n, q)),
            GateKind::Cz => Ok(CliffordTableau::cz(n, q, self.qubits[1])),
            GateKind::Rz { angle } => {
                let quarter = angle / FRAC_PI_2;
                if (quarter - quarter.round()).abs() > 1e-12 {
                    return Err(Error::UnsupportedGate(self.label()));
                }
                let k = (quarter.round() as i64).rem_euclid(4);
                let mut t = CliffordTableau::identity(n);
                for _ in 0..k {
                    t = t.then(&CliffordTableau::s(n, q))?;
                }
                Ok(t)
            }
            GateKind::Measure => Err(Error::UnsupportedGate(self.label())),
        }
    }

    /// Dense unitary of the ideal gate on its own support (2×2 or 4×4).
    pub fn local_unitary(&self) -> Result<DMatrix<Complex64>> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        Ok(match self.kind {
            GateKind::SqrtX => {
                DMatrix::from_row_slice(2, 2, &[c(0.5, 0.5), c(0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5)])
            }
            GateKind::S => DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)]),
            GateKind::Rz { angle } => rz_unitary(angle),
            GateKind::Cz => {
                let mut m = DMatrix::identity(4, 4);
                m[(3, 3)] = c(-1.0, 0.0);
                m
            }
            GateKind::Measure => return Err(Error::UnsupportedGate(self.label())),
        })
    }
}

pub fn rz_unitary(angle: f64) -> DMatrix<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::from_polar(1.0, -angle / 2.0),
            z,
            z,
            Complex64::from_polar(1.0, angle / 2.0),
        ],
    )
}

/// Ordered gate list on `n` qubits with optional layer boundaries.
///
/// `layers` holds the start index of every layer after the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n: usize,
    pub ops: Vec<GateOp>,
    #[serde(default)]
    pub layers: Vec<usize>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Circuit {
            n,
            ops: Vec::new(),
            layers: Vec::new(),
        }
    }

    pub fn from_ops(n: usize, ops: Vec<GateOp>) -> Result<Self> {
        let c = Circuit {
            n,
            ops,
            layers: Vec::new(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn push(&mut self, op: GateOp) -> &mut Self {
        self.ops.push(op);
        self
    }

    /// Appends `ops` as a new layer.
    pub fn push_layer(&mut self, ops: impl IntoIterator<Item = GateOp>) -> &mut Self {
        if !self.ops.is_empty() {
            self.layers.push(self.ops.len());
        }
        self.ops.extend(ops);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen_measure = false;
        for op in &self.ops {
            op.validate(self.n)?;
            if op.kind == GateKind::Measure {
                seen_measure = true;
            } else if seen_measure {
                return Err(Error::InvalidCircuit(
                    "measurements must be terminal".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn cz_count(&self) -> usize {
        self.ops.iter().filter(|o| o.kind == GateKind::Cz).count()
    }

    /// Qubits with a terminal `Measure`, in order of appearance.
    pub fn measured_qubits(&self) -> Vec<usize> {
        self.ops
            .iter()
            .filter(|o| o.kind == GateKind::Measure)
            .map(|o| o.qubits[0])
            .collect()
    }

    /// Gates without the terminal measurements.
    pub fn unitary_ops(&self) -> impl Iterator<Item = &GateOp> {
        self.ops.iter().filter(|o| o.kind != GateKind::Measure)
    }

    /// Tableaus of the ideal (non-measurement) gates, in order.
    pub fn tableaus(&self) -> Result<Vec<CliffordTableau>> {
        self.unitary_ops().map(|o| o.tableau(self.n)).collect()
    }

    pub fn with_measurements(mut self, qubits: &[usize]) -> Self {
        self.ops.extend(qubits.iter().map(|&q| GateOp::measure(q)));
        self
    }
}

/// Sets `injected_rz = Δθ` on every CZ, overwriting any earlier injection.
pub fn inject_coherent_error(c: &Circuit, angle: f64, target: usize) -> Result<Circuit> {
    let mut out = c.clone();
    for op in out.ops.iter_mut().filter(|o| o.kind == GateKind::Cz) {
        if !op.qubits.contains(&target) {
            return Err(Error::InvalidCircuit(format!(
                "target qubit {target} is not in the support of {}",
                op.label()
            )));
        }
        op.injected_rz = Some(InjectedRz { angle, target });
    }
    Ok(out)
}

/// One shot's random twirl of a circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwirlInstance {
    /// `(before, after)` two-qubit Paulis on each CZ's `(qubits[0], qubits[1])`.
    pub cz_paulis: Vec<(PauliString, PauliString)>,
    /// Pre-measurement Pauli and classical flip flag, one per measured qubit.
    pub measurement: Vec<(Pauli, bool)>,
}

impl TwirlInstance {
    pub fn is_empty(&self) -> bool {
        self.cz_paulis.is_empty() && self.measurement.is_empty()
    }

    /// Draws uniform Paulis for `cz_count` CZs and `measured` readouts.
    pub fn sample<R: Rng + ?Sized>(cz_count: usize, measured: usize, rng: &mut R) -> Self {
        let cz = cz_lookup();
        let cz_paulis = (0..cz_count)
            .map(|_| {
                let before = PauliString::from_index(2, rng.random_range(0..16));
                (before, cz[before.index()])
            })
            .collect();
        let measurement = (0..measured)
            .map(|_| {
                let p = Pauli::from_digit(rng.random_range(0..4));
                (p, p.flips_bit())
            })
            .collect();
        TwirlInstance {
            cz_paulis,
            measurement,
        }
    }
}

/// `CZ P CZ†` for all 16 two-qubit Paulis (signs are irrelevant for a frame).
pub fn cz_lookup() -> &'static [PauliString; 16] {
    static TABLE: OnceLock<[PauliString; 16]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let cz = CliffordTableau::cz(2, 0, 1);
        let mut t = [PauliString::identity(2); 16];
        for p in PauliString::all(2) {
            t[p.index()] = cz.conjugate(&p).expect("two-qubit Pauli").0;
        }
        t
    })
}

pub fn sample_twirl<R: Rng + ?Sized>(c: &Circuit, rng: &mut R) -> TwirlInstance {
    TwirlInstance::sample(c.cz_count(), c.measured_qubits().len(), rng)
}

/// Gates that prepare a product eigenstate of `input` from `|0…0⟩` and rotate
/// `output` onto the computational basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepBasis {
    pub prep: Vec<GateOp>,
    pub basis_change: Vec<GateOp>,
    /// Eigenvalue of `input` on the prepared state (`−` once per `Y` factor,
    /// since `√X|0⟩` is the −1 eigenstate of `Y`).
    pub prep_sign: Sign,
}

pub fn prep_and_basis_circuits(input: &PauliString, output: &PauliString) -> PrepBasis {
    let mut prep = Vec::new();
    let mut minus = false;
    for q in 0..input.num_qubits() {
        match input.get(q) {
            Pauli::I | Pauli::Z => {}
            // +Z → −Y → +X
            Pauli::X => prep.extend([GateOp::sqrt_x(q), GateOp::s(q)]),
            Pauli::Y => {
                prep.push(GateOp::sqrt_x(q));
                minus ^= true;
            }
        }
    }
    let mut basis_change = Vec::new();
    for q in 0..output.num_qubits() {
        match output.get(q) {
            Pauli::I | Pauli::Z => {}
            // X → Y → Z
            Pauli::X => basis_change.extend([GateOp::s(q), GateOp::sqrt_x(q)]),
            // Y → Z
            Pauli::Y => basis_change.push(GateOp::sqrt_x(q)),
        }
    }
    PrepBasis {
        prep,
        basis_change,
        prep_sign: Sign::from_minus(minus),
    }
}

/// Circuit with alternating single-qubit and CZ layers, as used for ACES:
/// each round is a layer of `{√X, S, I}` on every qubit followed by CZ(0,1).
pub fn random_layered_circuit<R: Rng + ?Sized>(n: usize, cz_count: usize, rng: &mut R) -> Circuit {
    let mut c = Circuit::new(n);
    for _ in 0..cz_count {
        let layer: Vec<GateOp> = (0..n)
            .filter_map(|q| match rng.random_range(0..3) {
                0 => Some(GateOp::s(q)),
                1 => Some(GateOp::sqrt_x(q)),
                _ => None,
            })
            .collect();
        c.push_layer(layer);
        c.push_layer([GateOp::cz(0, 1)]);
    }
    c
}

/// Key identifying a Clifford up to global phase.
type TableauKey = (Vec<(u32, u32, bool)>, Vec<(u32, u32, bool)>);

fn tableau_key(t: &CliffordTableau) -> TableauKey {
    let f = |(p, s): (PauliString, Sign)| (p.x_bits(), p.z_bits(), s.is_minus());
    let n = t.num_qubits();
    (
        (0..n).map(|q| f(t.x_image(q))).collect(),
        (0..n).map(|q| f(t.z_image(q))).collect(),
    )
}

/// The Clifford group on 1 or 2 qubits, each element with a shortest
/// compilation into `{√X, S, CZ}` found by breadth-first search.
#[derive(Debug)]
pub struct CliffordGroup {
    n: usize,
    elements: Vec<(CliffordTableau, Vec<GateOp>)>,
    index: HashMap<TableauKey, usize>,
}

impl CliffordGroup {
    fn generate(n: usize) -> Self {
        let mut gens: Vec<GateOp> = Vec::new();
        for q in 0..n {
            gens.push(GateOp::sqrt_x(q));
            gens.push(GateOp::s(q));
        }
        if n == 2 {
            gens.push(GateOp::cz(0, 1));
        }
        let gen_tabs: Vec<CliffordTableau> = gens.iter().map(|g| g.tableau(n).expect("Clifford")).collect();
        let id = CliffordTableau::identity(n);
        let mut elements = vec![(id.clone(), Vec::new())];
        let mut index = HashMap::new();
        index.insert(tableau_key(&id), 0);
        let mut head = 0;
        while head < elements.len() {
            let (tab, word) = elements[head].clone();
            head += 1;
            for (g, gt) in gens.iter().zip(&gen_tabs) {
                let next = tab.then(gt).expect("same size");
                let key = tableau_key(&next);
                if !index.contains_key(&key) {
                    index.insert(key, elements.len());
                    let mut w = word.clone();
                    w.push(g.clone());
                    elements.push((next, w));
                }
            }
        }
        CliffordGroup { n, elements, index }
    }

    /// Shared group table for `n ∈ {1, 2}` (24 and 11520 elements).
    pub fn get(n: usize) -> &'static CliffordGroup {
        static ONE: OnceLock<CliffordGroup> = OnceLock::new();
        static TWO: OnceLock<CliffordGroup> = OnceLock::new();
        match n {
            1 => ONE.get_or_init(|| CliffordGroup::generate(1)),
            2 => TWO.get_or_init(|| CliffordGroup::generate(2)),
            _ => panic!("Clifford tables exist for 1 and 2 qubits only"),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn tableau(&self, i: usize) -> &CliffordTableau {
        &self.elements[i].0
    }

    /// Compiled gates of element `i`, on local qubits `0..n`.
    pub fn word(&self, i: usize) -> &[GateOp] {
        &self.elements[i].1
    }

    pub fn find(&self, t: &CliffordTableau) -> Option<usize> {
        self.index.get(&tableau_key(t)).copied()
    }

    pub fn mean_word_len(&self) -> f64 {
        self.elements.iter().map(|(_, w)| w.len()).sum::<usize>() as f64 / self.len() as f64
    }
}

/// A random Clifford sequence terminated by its inverse.
#[derive(Debug, Clone)]
pub struct RbSequence {
    pub circuit: Circuit,
    /// Group indices of the drawn Cliffords (excluding the inverse).
    pub cliffords: Vec<usize>,
    pub inverse: usize,
    /// Native gates spent on the reference Cliffords, inverse included.
    pub compiled_gates: usize,
}

/// Draws `depth` uniform Cliffords on `qubits` (one or two qubits of an
/// `n`-qubit register), optionally interleaving a CZ after each, and appends
/// the inverse so the ideal sequence is the identity.
pub fn rb_sequence<R: Rng + ?Sized>(
    n: usize,
    qubits: &[usize],
    depth: usize,
    interleave: bool,
    rng: &mut R,
) -> Result<RbSequence> {
    if depth == 0 {
        return Err(Error::InvalidParameter("RB depth must be at least 1".into()));
    }
    let k = qubits.len();
    if !(k == 1 || k == 2) || qubits.iter().any(|&q| q >= n) {
        return Err(Error::InvalidParameter(format!(
            "RB acts on one or two qubits of the register, got {qubits:?}"
        )));
    }
    if interleave && k != 2 {
        return Err(Error::InvalidParameter(
            "interleaved RB needs two qubits".into(),
        ));
    }
    let group = CliffordGroup::get(k);
    let map = |op: &GateOp| GateOp {
        kind: op.kind,
        qubits: op.qubits.iter().map(|&l| qubits[l]).collect(),
        injected_rz: None,
    };
    let cz_local = GateOp::cz(0, 1);
    let cz_tab = if interleave {
        Some(cz_local.tableau(k)?)
    } else {
        None
    };
    let mut circuit = Circuit::new(n);
    let mut total = CliffordTableau::identity(k);
    let mut cliffords = Vec::with_capacity(depth);
    let mut compiled = 0;
    for _ in 0..depth {
        let i = rng.random_range(0..group.len());
        cliffords.push(i);
        circuit.push_layer(group.word(i).iter().map(map));
        compiled += group.word(i).len();
        total = total.then(group.tableau(i))?;
        if let Some(cz_tab) = &cz_tab {
            circuit.push_layer([map(&cz_local)]);
            total = total.then(cz_tab)?;
        }
    }
    let inv = group
        .find(&total.inverse())
        .expect("Clifford group is closed under inversion");
    circuit.push_layer(group.word(inv).iter().map(map));
    compiled += group.word(inv).len();
    Ok(RbSequence {
        circuit,
        cliffords,
        inverse: inv,
        compiled_gates: compiled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn gate_validation() {
        assert!(GateOp::cz(0, 0).validate(2).is_err());
        assert!(GateOp::sqrt_x(2).validate(2).is_err());
        let mut bad = GateOp::s(0);
        bad.injected_rz = Some(InjectedRz { angle: 0.1, target: 0 });
        assert!(bad.validate(2).is_err());
        let c = Circuit::from_ops(2, vec![GateOp::measure(0), GateOp::s(0)]);
        assert!(c.is_err());
    }

    #[test]
    fn empty_twirl() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = Circuit::from_ops(2, vec![GateOp::s(0)]).unwrap();
        assert!(sample_twirl(&c, &mut rng).is_empty());
    }

    #[test]
    fn cz_lookup_entries() {
        assert_eq!(cz_lookup()[p("XI").index()], p("XZ"));
        assert_eq!(cz_lookup()[p("ZZ").index()], p("ZZ"));
    }

    #[test]
    fn twirl_frequencies_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = Circuit::from_ops(2, vec![GateOp::cz(0, 1)]).unwrap().with_measurements(&[0, 1]);
        let n = 10_000;
        let mut counts = [0usize; 16];
        let mut mcounts = [0usize; 4];
        for _ in 0..n {
            let t = sample_twirl(&c, &mut rng);
            let (before, after) = t.cz_paulis[0];
            assert_eq!(after, cz_lookup()[before.index()]);
            counts[before.index()] += 1;
            let (m, flip) = t.measurement[0];
            assert_eq!(flip, m.flips_bit());
            mcounts[m.digit()] += 1;
        }
        let sigma = (n as f64 * (1.0 / 16.0) * (15.0 / 16.0)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 16.0).abs() < 5.0 * sigma, "{counts:?}");
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in mcounts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 5.0 * sigma);
        }
    }

    #[test]
    fn injection_overwrites() {
        let c = Circuit::from_ops(2, vec![GateOp::cz(0, 1), GateOp::s(0), GateOp::cz(0, 1)]).unwrap();
        let once = inject_coherent_error(&c, 0.3, 1).unwrap();
        let twice = inject_coherent_error(&once, 0.5, 1).unwrap();
        for op in twice.ops.iter().filter(|o| o.kind == GateKind::Cz) {
            assert_eq!(op.injected_rz, Some(InjectedRz { angle: 0.5, target: 1 }));
        }
        let three = Circuit::from_ops(3, vec![GateOp::cz(0, 1)]).unwrap();
        assert!(inject_coherent_error(&three, 0.1, 2).is_err());
    }

    #[test]
    fn prep_examples() {
        let pb = prep_and_basis_circuits(&p("ZZ"), &p("ZZ"));
        assert!(pb.prep.is_empty() && pb.basis_change.is_empty());
        let pb = prep_and_basis_circuits(&p("IY"), &p("YY"));
        assert_eq!(pb.prep, vec![GateOp::sqrt_x(1)]);
        assert_eq!(pb.prep_sign, Sign::Minus);
        assert_eq!(pb.basis_change, vec![GateOp::sqrt_x(0), GateOp::sqrt_x(1)]);
    }

    #[test]
    fn prep_states_are_eigenstates() {
        // |0…0⟩ is stabilized by +Z_q; push those generators through the prep.
        for input in PauliString::non_identity(2) {
            let pb = prep_and_basis_circuits(&input, &input);
            let ops: Vec<CliffordTableau> = pb.prep.iter().map(|o| o.tableau(2).unwrap()).collect();
            let mut g = CliffordTableau::identity(2);
            for t in &ops {
                g = g.then(t).unwrap();
            }
            // product of the stabilizers on input's support
            let mut acc = (PauliString::identity(2), Sign::Plus);
            for q in 0..2 {
                if input.get(q) != Pauli::I {
                    let (s, sg) = g.conjugate(&PauliString::single(2, q, Pauli::Z)).unwrap();
                    acc = (acc.0.product(&s), acc.1 * sg);
                }
            }
            assert_eq!(acc, (input, pb.prep_sign), "{input}");
            // basis change maps the output onto a Z string with + sign
            let mut b = CliffordTableau::identity(2);
            for o in &pb.basis_change {
                b = b.then(&o.tableau(2).unwrap()).unwrap();
            }
            let (z, s) = b.conjugate(&input).unwrap();
            assert!(z.is_z_type());
            assert_eq!(s, Sign::Plus);
            assert_eq!(z.support(), input.support());
        }
    }

    #[test]
    fn clifford_group_sizes() {
        assert_eq!(CliffordGroup::get(1).len(), 24);
        assert_eq!(CliffordGroup::get(2).len(), 11520);
    }

    #[test]
    fn rb_sequences_compose_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (qubits, interleave) in [(vec![0], false), (vec![1], false), (vec![0, 1], false), (vec![0, 1], true)] {
            for depth in [1, 2, 7] {
                let seq = rb_sequence(2, &qubits, depth, interleave, &mut rng).unwrap();
                let mut t = CliffordTableau::identity(2);
                for g in seq.circuit.tableaus().unwrap() {
                    t = t.then(&g).unwrap();
                }
                assert!(t.is_identity());
                let extra = seq.circuit.cz_count()
                    - seq.cliffords.iter().chain([&seq.inverse]).map(|&i| {
                        CliffordGroup::get(qubits.len()).word(i).iter().filter(|o| o.kind == GateKind::Cz).count()
                    }).sum::<usize>();
                assert_eq!(extra, if interleave { depth } else { 0 });
            }
        }
        assert!(rb_sequence(2, &[0], 0, false, &mut rng).is_err());
    }

    #[test]
    fn circuit_json() {
        let mut c = Circuit::new(2);
        c.push_layer([GateOp::s(0), GateOp::sqrt_x(1)]);
        c.push_layer([GateOp::cz(0, 1)]);
        let c = inject_coherent_error(&c, 0.25, 1).unwrap().with_measurements(&[1]);
        let s = serde_json::to_string(&c).unwrap();
        let back: Circuit = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(s.contains(r#""gate":"sqrt_x""#));
    }
}
