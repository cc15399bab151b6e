//! Generalized Pauli operators with exact phase tracking.
//!
//! An operator is stored as an X bit-vector, a Z bit-vector and a power of
//! `i`. The stored phase is relative to the *canonical Hermitian* form
//! `⊗_i (i^{x_i z_i} X^{x_i} Z^{z_i})`, so every phase-0 operator is
//! Hermitian, squares to the identity, and carries the familiar
//! `{I, X, Y, Z}` label. All bookkeeping is integer-exact; the dense matrix
//! form exists only as an oracle for tests and small-register simulation.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gf2::BitVector;

/// Generalized Pauli operator `i^phase · ⊗_i (i^{x_i z_i} X^{x_i} Z^{z_i})`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PauliOperator {
    x: BitVector,
    z: BitVector,
    phase: u8, // power of i, mod 4, relative to the Hermitian canonical form
}

/// Clifford gates used by the change-of-basis synthesis.
///
/// `Phase` is the S gate `diag(1, i)` (the paper-level "T" that acts as
/// `|b⟩ ↦ i^b |b⟩`), *not* the modern π/8 gate; exports spell it `S`/`SDG`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GateAction {
    H(usize),
    Phase(usize),
    PhaseDagger(usize),
    Cnot { control: usize, target: usize },
    X(usize),
}

impl GateAction {
    pub fn inverse(self) -> GateAction {
        match self {
            GateAction::Phase(q) => GateAction::PhaseDagger(q),
            GateAction::PhaseDagger(q) => GateAction::Phase(q),
            other => other,
        }
    }

    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            GateAction::H(q) | GateAction::Phase(q) | GateAction::PhaseDagger(q) | GateAction::X(q) => (q, None),
            GateAction::Cnot { control, target } => (control, Some(target)),
        }
    }

    pub fn validate(&self, qubits: usize) -> Result<()> {
        let check = |q: usize| {
            if q < qubits {
                Ok(())
            } else {
                Err(Error::QubitOutOfRange { index: q, qubits })
            }
        };
        match *self {
            GateAction::Cnot { control, target } => {
                if control == target {
                    return Err(Error::invalid("CNOT control and target must differ"));
                }
                check(control)?;
                check(target)
            }
            _ => check(self.qubits().0),
        }
    }
}

impl PauliOperator {
    pub fn new(x: BitVector, z: BitVector, phase: u8) -> Result<Self> {
        if x.len() != z.len() {
            return Err(Error::SizeMismatch { expected: x.len(), got: z.len() });
        }
        Ok(PauliOperator { x, z, phase: phase & 3 })
    }

    /// Canonical Hermitian operator (phase 0) with the given bit pattern.
    pub fn hermitian(x: BitVector, z: BitVector) -> Result<Self> {
        Self::new(x, z, 0)
    }

    pub fn identity(n: usize) -> Self {
        PauliOperator { x: BitVector::zeros(n), z: BitVector::zeros(n), phase: 0 }
    }

    pub fn qubits(&self) -> usize {
        self.x.len()
    }

    pub fn x_bits(&self) -> BitVector {
        self.x
    }

    pub fn z_bits(&self) -> BitVector {
        self.z
    }

    /// Power of `i` relative to the canonical Hermitian form.
    pub fn phase(&self) -> u8 {
        self.phase
    }

    /// Same bit pattern with the phase discarded.
    pub fn canonical(&self) -> PauliOperator {
        PauliOperator { x: self.x, z: self.z, phase: 0 }
    }

    pub fn is_identity(&self) -> bool {
        self.x.is_zero() && self.z.is_zero() && self.phase == 0
    }

    /// Number of non-identity tensor factors.
    pub fn weight(&self) -> u32 {
        (self.x.raw() | self.z.raw()).count_ones()
    }

    pub fn from_label(label: &str) -> Result<Self> {
        if label.is_empty() {
            return Err(Error::invalid("empty Pauli label"));
        }
        let n = label.chars().count();
        if n > 64 {
            return Err(Error::TooLarge(n));
        }
        let mut x = BitVector::zeros(n);
        let mut z = BitVector::zeros(n);
        for (i, c) in label.chars().enumerate() {
            match c {
                'I' => {}
                'X' => x.set(i, true),
                'Y' => {
                    x.set(i, true);
                    z.set(i, true);
                }
                'Z' => z.set(i, true),
                _ => return Err(Error::invalid(format!("bad Pauli label character '{c}'"))),
            }
        }
        Ok(PauliOperator { x, z, phase: 0 })
    }

    /// Label of the canonical (phase-stripped) part, qubit 1 leftmost.
    pub fn to_label(&self) -> String {
        (0..self.qubits())
            .map(|i| match (self.x.get(i), self.z.get(i)) {
                (false, false) => 'I',
                (true, false) => 'X',
                (true, true) => 'Y',
                (false, true) => 'Z',
            })
            .collect()
    }

    /// Phase in the "bare" convention `i^bare · X^x Z^z`.
    fn bare_phase(&self) -> u8 {
        (self.phase + ((self.x.raw() & self.z.raw()).count_ones() as u8)) & 3
    }

    fn from_bare(x: BitVector, z: BitVector, bare: u8) -> PauliOperator {
        let herm = (x.raw() & z.raw()).count_ones() as u8;
        PauliOperator { x, z, phase: bare.wrapping_sub(herm) & 3 }
    }

    /// Exact operator product, accumulating the power of `i`.
    pub fn multiply(&self, other: &PauliOperator) -> Result<PauliOperator> {
        if self.qubits() != other.qubits() {
            return Err(Error::SizeMismatch { expected: self.qubits(), got: other.qubits() });
        }
        // (i^a X^x1 Z^z1)(i^b X^x2 Z^z2) = i^{a+b} (-1)^{z1·x2} X^{x1^x2} Z^{z1^z2}
        let sign = 2 * (self.z.dot(&other.x) as u8);
        let bare = (self.bare_phase() + other.bare_phase() + sign) & 3;
        Ok(PauliOperator::from_bare(self.x.xor(&other.x), self.z.xor(&other.z), bare))
    }

    pub fn mul_i_power(&self, k: u8) -> PauliOperator {
        PauliOperator { x: self.x, z: self.z, phase: (self.phase + k) & 3 }
    }

    /// Symplectic inner product: 0 iff the operators commute.
    pub fn symplectic_product(&self, other: &PauliOperator) -> Result<u8> {
        if self.qubits() != other.qubits() {
            return Err(Error::SizeMismatch { expected: self.qubits(), got: other.qubits() });
        }
        Ok((self.x.dot(&other.z) ^ self.z.dot(&other.x)) as u8)
    }

    pub fn commutes_with(&self, other: &PauliOperator) -> Result<bool> {
        Ok(self.symplectic_product(other)? == 0)
    }

    /// Heisenberg conjugation `g† · self · g`, phase-exact.
    pub fn conjugate_by_gate(&self, gate: GateAction) -> Result<PauliOperator> {
        gate.validate(self.qubits())?;
        let n = self.qubits();
        // g†(i^bare X^x Z^z)g = i^bare ∏_q (g† X_q g)^{x_q} ∏_q (g† Z_q g)^{z_q}
        let mut acc = PauliOperator::identity(n);
        for q in 0..n {
            if self.x.get(q) {
                acc = acc.multiply(&image_of_x(gate, q, n))?;
            }
        }
        for q in 0..n {
            if self.z.get(q) {
                acc = acc.multiply(&image_of_z(gate, q, n))?;
            }
        }
        // acc = g† X^x Z^z g and self = i^bare X^x Z^z.
        Ok(acc.mul_i_power(self.bare_phase()))
    }

    /// Forward propagation `g · self · g†` (the stabilizer transform when the
    /// gate is appended to a circuit acting on the state).
    pub fn conjugate_forward(&self, gate: GateAction) -> Result<PauliOperator> {
        self.conjugate_by_gate(gate.inverse())
    }

    /// Dense `2^n x 2^n` matrix, exact up to floating-point representation.
    pub fn dense_matrix(&self) -> Result<Array2<Complex64>> {
        let n = self.qubits();
        if n > 10 {
            return Err(Error::TooLarge(n));
        }
        let mut out = Array2::from_elem((1, 1), i_power(self.phase));
        for q in 0..n {
            let factor = single_qubit_matrix(self.x.get(q), self.z.get(q));
            out = kron(&out, &factor);
        }
        Ok(out)
    }
}

impl std::fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let prefix = ["", "i", "-", "-i"][self.phase as usize];
        write!(f, "{}{}", prefix, self.to_label())
    }
}

fn i_power(k: u8) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn single_qubit_matrix(x: bool, z: bool) -> Array2<Complex64> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match (x, z) {
        (false, false) => ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
        (true, false) => ndarray::array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        (false, true) => ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
        (true, true) => ndarray::array![[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
    }
}

/// Kronecker product of two complex matrices.
pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Image of `g† X_q g` as an exact Pauli.
fn image_of_x(gate: GateAction, q: usize, n: usize) -> PauliOperator {
    let x_at = |i: usize| PauliOperator::hermitian(BitVector::unit(n, i), BitVector::zeros(n)).unwrap();
    let z_at = |i: usize| PauliOperator::hermitian(BitVector::zeros(n), BitVector::unit(n, i)).unwrap();
    let y_at = |i: usize| PauliOperator::hermitian(BitVector::unit(n, i), BitVector::unit(n, i)).unwrap();
    match gate {
        GateAction::H(g) if g == q => z_at(q),
        GateAction::Phase(g) if g == q => y_at(q).mul_i_power(2), // S† X S = -Y
        GateAction::PhaseDagger(g) if g == q => y_at(q),          // S X S† = Y
        GateAction::Cnot { control, target } if control == q => {
            x_at(control).multiply(&x_at(target)).unwrap()
        }
        _ => x_at(q),
    }
}

/// Image of `g† Z_q g` as an exact Pauli.
fn image_of_z(gate: GateAction, q: usize, n: usize) -> PauliOperator {
    let x_at = |i: usize| PauliOperator::hermitian(BitVector::unit(n, i), BitVector::zeros(n)).unwrap();
    let z_at = |i: usize| PauliOperator::hermitian(BitVector::zeros(n), BitVector::unit(n, i)).unwrap();
    match gate {
        GateAction::H(g) if g == q => x_at(q),
        GateAction::X(g) if g == q => z_at(q).mul_i_power(2), // X Z X = -Z
        GateAction::Cnot { control, target } if target == q => {
            z_at(control).multiply(&z_at(target)).unwrap()
        }
        _ => z_at(q),
    }
}
