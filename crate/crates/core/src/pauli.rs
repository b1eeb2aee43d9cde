//! Phase-free Pauli strings and Clifford tableaus.
//!
//! A [`PauliString`] stores one X bit and one Z bit per qubit (`Y` sets both).
//! Strings are indexed in base 4 with digits `I=0, X=1, Y=2, Z=3` and qubit 0
//! as the most significant digit, so `"IY"` has index 2 and `"YY"` has index 10.
//! The same order is used for channel vectors, PTM rows and design-matrix
//! columns throughout the crate.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest register a tableau or string may describe.
pub const MAX_QUBITS: usize = 16;

/// Single-qubit Pauli symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn digit(self) -> usize {
        match self {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }

    pub fn from_digit(d: usize) -> Pauli {
        Pauli::ALL[d & 3]
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn symbol(self) -> char {
        ['I', 'X', 'Y', 'Z'][self.digit()]
    }

    /// True for `X` and `Y`, the Paulis that flip a computational-basis bit.
    pub fn flips_bit(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }
}

/// Overall ±1 sign picked up by a Pauli under Clifford conjugation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

impl Sign {
    pub fn is_minus(self) -> bool {
        self == Sign::Minus
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_minus(minus: bool) -> Sign {
        if minus {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        Sign::from_minus(self.is_minus() ^ rhs.is_minus())
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_minus() { "-" } else { "+" })
    }
}

/// n-qubit Pauli operator with the phase quotiented out.
///
/// Bit `q` of `x`/`z` belongs to qubit `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u32,
    z: u32,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits are supported");
        PauliString { n, x: 0, z: 0 }
    }

    pub fn from_bits(n: usize, x: u32, z: u32) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits are supported");
        let mask = Self::mask(n);
        PauliString {
            n,
            x: x & mask,
            z: z & mask,
        }
    }

    pub fn from_paulis(paulis: &[Pauli]) -> Self {
        let mut p = PauliString::identity(paulis.len());
        for (q, &s) in paulis.iter().enumerate() {
            p.set(q, s);
        }
        p
    }

    /// Pauli with canonical index `index` (see module docs).
    pub fn from_index(n: usize, index: usize) -> Self {
        debug_assert!(index < 1 << (2 * n));
        let mut p = PauliString::identity(n);
        for q in 0..n {
            let digit = (index >> (2 * (n - 1 - q))) & 3;
            p.set(q, Pauli::from_digit(digit));
        }
        p
    }

    /// Single non-identity factor `s` on qubit `q`.
    pub fn single(n: usize, q: usize, s: Pauli) -> Self {
        let mut p = PauliString::identity(n);
        p.set(q, s);
        p
    }

    fn mask(n: usize) -> u32 {
        if n >= 32 {
            u32::MAX
        } else {
            (1u32 << n) - 1
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_bits(&self) -> u32 {
        self.x
    }

    pub fn z_bits(&self) -> u32 {
        self.z
    }

    pub fn index(&self) -> usize {
        (0..self.n).fold(0, |acc, q| (acc << 2) | self.get(q).digit())
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits((self.x >> q) & 1 == 1, (self.z >> q) & 1 == 1)
    }

    pub fn set(&mut self, q: usize, s: Pauli) {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        let (xb, zb) = s.bits();
        self.x = (self.x & !(1 << q)) | ((xb as u32) << q);
        self.z = (self.z & !(1 << q)) | ((zb as u32) << q);
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    /// Bitmask of qubits where the string is not the identity.
    pub fn support(&self) -> u32 {
        self.x | self.z
    }

    /// True when every factor is `I` or `Z`.
    pub fn is_z_type(&self) -> bool {
        self.x == 0
    }

    pub fn y_count(&self) -> usize {
        (self.x & self.z).count_ones() as usize
    }

    /// Commutation bit: 0 when `self` and `other` commute, 1 otherwise.
    pub fn symplectic_product(&self, other: &PauliString) -> Result<u8> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(self.anticommutes_bit(other))
    }

    pub(crate) fn anticommutes_bit(&self, other: &PauliString) -> u8 {
        (((self.x & other.z) ^ (self.z & other.x)).count_ones() & 1) as u8
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        self.anticommutes_bit(other) == 0
    }

    /// Phase-free product.
    pub fn product(&self, other: &PauliString) -> PauliString {
        debug_assert_eq!(self.n, other.n);
        PauliString {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        }
    }

    /// Factors on `qubits`, in the order given, as a `qubits.len()`-qubit string.
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        let mut out = PauliString::identity(qubits.len());
        for (k, &q) in qubits.iter().enumerate() {
            out.set(k, self.get(q));
        }
        out
    }

    /// Places `local` on `qubits` of an otherwise-identity n-qubit string.
    pub fn embed(n: usize, qubits: &[usize], local: &PauliString) -> PauliString {
        debug_assert_eq!(qubits.len(), local.n);
        let mut out = PauliString::identity(n);
        for (k, &q) in qubits.iter().enumerate() {
            out.set(q, local.get(k));
        }
        out
    }

    /// All 4^n strings in canonical order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        (0..1usize << (2 * n)).map(move |i| PauliString::from_index(n, i))
    }

    /// The 4^n − 1 non-identity strings in canonical order.
    pub fn non_identity(n: usize) -> impl Iterator<Item = PauliString> {
        PauliString::all(n).skip(1)
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| self.index().cmp(&other.index()))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.get(q).symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let paulis = s
            .chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                _ => Err(Error::InvalidLabel(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        if paulis.is_empty() || paulis.len() > MAX_QUBITS {
            return Err(Error::InvalidLabel(s.to_string()));
        }
        Ok(PauliString::from_paulis(&paulis))
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `i^phase · X^x Z^z`, used internally to multiply images with exact phases.
#[derive(Debug, Clone, Copy)]
struct PhasedXz {
    x: u32,
    z: u32,
    phase: u32,
}

impl PhasedXz {
    fn from_signed(p: &PauliString, sign: Sign) -> Self {
        // Y = i·XZ, so the Hermitian string carries i^{#Y} in XZ form.
        PhasedXz {
            x: p.x,
            z: p.z,
            phase: (p.y_count() as u32 + if sign.is_minus() { 2 } else { 0 }) & 3,
        }
    }

    fn mul(self, rhs: PhasedXz) -> PhasedXz {
        // Z^z X^x = (-1)^{z·x} X^x Z^z
        let swap = (self.z & rhs.x).count_ones();
        PhasedXz {
            x: self.x ^ rhs.x,
            z: self.z ^ rhs.z,
            phase: (self.phase + rhs.phase + 2 * swap) & 3,
        }
    }

    fn into_signed(self, n: usize) -> (PauliString, Sign) {
        let p = PauliString { n, x: self.x, z: self.z };
        let rel = (self.phase + 4 - (p.y_count() as u32 & 3)) & 3;
        debug_assert!(rel % 2 == 0, "conjugation produced a non-Hermitian Pauli");
        (p, Sign::from_minus(rel == 2))
    }
}

/// Stabilizer tableau of an n-qubit Clifford `G`: the signed images
/// `G X_q G†` and `G Z_q G†` of every generator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CliffordTableau {
    n: usize,
    x_images: Vec<(PauliString, Sign)>,
    z_images: Vec<(PauliString, Sign)>,
}

impl CliffordTableau {
    pub fn identity(n: usize) -> Self {
        CliffordTableau {
            n,
            x_images: (0..n)
                .map(|q| (PauliString::single(n, q, Pauli::X), Sign::Plus))
                .collect(),
            z_images: (0..n)
                .map(|q| (PauliString::single(n, q, Pauli::Z), Sign::Plus))
                .collect(),
        }
    }

    /// Builds a tableau from generator images, checking the symplectic condition.
    pub fn from_images(
        x_images: Vec<(PauliString, Sign)>,
        z_images: Vec<(PauliString, Sign)>,
    ) -> Result<Self> {
        let n = x_images.len();
        if z_images.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: z_images.len(),
            });
        }
        for (p, _) in x_images.iter().chain(z_images.iter()) {
            if p.num_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.num_qubits(),
                });
            }
        }
        let t = CliffordTableau {
            n,
            x_images,
            z_images,
        };
        if !t.is_symplectic() {
            return Err(Error::InvalidParameter(
                "generator images violate the commutation relations".into(),
            ));
        }
        Ok(t)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_image(&self, q: usize) -> (PauliString, Sign) {
        self.x_images[q]
    }

    pub fn z_image(&self, q: usize) -> (PauliString, Sign) {
        self.z_images[q]
    }

    /// `√X` on qubit `q`: X ↦ X, Z ↦ −Y.
    pub fn sqrt_x(n: usize, q: usize) -> Self {
        let mut t = CliffordTableau::identity(n);
        t.z_images[q] = (PauliString::single(n, q, Pauli::Y), Sign::Minus);
        t
    }

    /// `S` on qubit `q`: X ↦ Y, Z ↦ Z.
    pub fn s(n: usize, q: usize) -> Self {
        let mut t = CliffordTableau::identity(n);
        t.x_images[q] = (PauliString::single(n, q, Pauli::Y), Sign::Plus);
        t
    }

    /// Controlled-Z between `a` and `b`: X_a ↦ X_a Z_b, X_b ↦ Z_a X_b.
    pub fn cz(n: usize, a: usize, b: usize) -> Self {
        assert_ne!(a, b, "CZ needs two distinct qubits");
        let mut t = CliffordTableau::identity(n);
        let mut xa = PauliString::single(n, a, Pauli::X);
        xa.set(b, Pauli::Z);
        let mut xb = PauliString::single(n, b, Pauli::X);
        xb.set(a, Pauli::Z);
        t.x_images[a] = (xa, Sign::Plus);
        t.x_images[b] = (xb, Sign::Plus);
        t
    }

    /// Conjugation by the Pauli `p` itself (a Pauli frame change).
    pub fn pauli(p: &PauliString) -> Self {
        let n = p.num_qubits();
        let mut t = CliffordTableau::identity(n);
        for q in 0..n {
            let xq = PauliString::single(n, q, Pauli::X);
            let zq = PauliString::single(n, q, Pauli::Z);
            t.x_images[q].1 = Sign::from_minus(!p.commutes_with(&xq));
            t.z_images[q].1 = Sign::from_minus(!p.commutes_with(&zq));
        }
        t
    }

    /// `G P G†` for the Hermitian Pauli `p`, with its sign.
    pub fn conjugate(&self, p: &PauliString) -> Result<(PauliString, Sign)> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        Ok(self.conjugate_signed(p, Sign::Plus))
    }

    fn conjugate_signed(&self, p: &PauliString, sign: Sign) -> (PauliString, Sign) {
        let mut acc = PhasedXz {
            x: 0,
            z: 0,
            phase: (p.y_count() as u32 + if sign.is_minus() { 2 } else { 0 }) & 3,
        };
        for q in 0..self.n {
            if (p.x >> q) & 1 == 1 {
                let (img, s) = &self.x_images[q];
                acc = acc.mul(PhasedXz::from_signed(img, *s));
            }
            if (p.z >> q) & 1 == 1 {
                let (img, s) = &self.z_images[q];
                acc = acc.mul(PhasedXz::from_signed(img, *s));
            }
        }
        acc.into_signed(self.n)
    }

    /// Tableau of "apply `self`, then `next`".
    pub fn then(&self, next: &CliffordTableau) -> Result<CliffordTableau> {
        if next.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: next.n,
            });
        }
        let map = |imgs: &[(PauliString, Sign)]| {
            imgs.iter()
                .map(|(p, s)| next.conjugate_signed(p, *s))
                .collect::<Vec<_>>()
        };
        Ok(CliffordTableau {
            n: self.n,
            x_images: map(&self.x_images),
            z_images: map(&self.z_images),
        })
    }

    /// Inverse tableau, found by scanning all 4^n Paulis for the preimages of
    /// the generators (desk-scale registers only).
    pub fn inverse(&self) -> CliffordTableau {
        let n = self.n;
        let mut x_images = vec![(PauliString::identity(n), Sign::Plus); n];
        let mut z_images = vec![(PauliString::identity(n), Sign::Plus); n];
        for p in PauliString::non_identity(n) {
            let (img, s) = self.conjugate_signed(&p, Sign::Plus);
            if img.weight() != 1 {
                continue;
            }
            let q = img.support().trailing_zeros() as usize;
            match img.get(q) {
                Pauli::X => x_images[q] = (p, s),
                Pauli::Z => z_images[q] = (p, s),
                _ => {}
            }
        }
        CliffordTableau {
            n,
            x_images,
            z_images,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == CliffordTableau::identity(self.n)
    }

    fn is_symplectic(&self) -> bool {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let (xi, _) = &self.x_images[i];
                let (zi, _) = &self.z_images[i];
                let (xj, _) = &self.x_images[j];
                let (zj, _) = &self.z_images[j];
                let xz = xi.anticommutes_bit(zj) == 1;
                if xz != (i == j) {
                    return false;
                }
                if xi.anticommutes_bit(xj) == 1 || zi.anticommutes_bit(zj) == 1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Pauli trajectory of `p` through `gates` applied in order.
///
/// Entry 0 is `(p, +)`; entry `k` is the conjugated Pauli after gate `k` with
/// the accumulated sign.
pub fn conjugate_through_circuit(
    gates: &[CliffordTableau],
    p: &PauliString,
) -> Result<Vec<(PauliString, Sign)>> {
    let mut traj = Vec::with_capacity(gates.len() + 1);
    traj.push((*p, Sign::Plus));
    let mut cur = (*p, Sign::Plus);
    for g in gates {
        let (q, s) = g.conjugate(&cur.0)?;
        cur = (q, s * cur.1);
        traj.push(cur);
    }
    Ok(traj)
}
