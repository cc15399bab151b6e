//! The D+1 mutually unbiased bases as a state 2-design.
//!
//! Each non-computational basis is labeled by an n-bit vector `b` and
//! stabilized by the Abelian group generated by the canonical Paulis with
//! X part `1·M^j` and Z part `b·M̂^j`, where `M` is the companion matrix of
//! a primitive polynomial and `M̂` its transpose. Together with the
//! computational basis these D+1 bases partition the non-identity Paulis and
//! form an exact state 2-design.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::circuit;
use crate::error::{Error, Result};
use crate::gf2::{mat_vec, primitive_companion, validate_primitive, BitMatrix, BitVector};
use crate::pauli::PauliOperator;

/// One of the D+1 bases: the computational Z basis or the basis labeled `b`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum BasisId {
    ComputationalZ,
    MubB(BitVector),
}

impl BasisId {
    /// Serialized form: `"Z"` or the bitstring of `b`.
    pub fn label(&self) -> String {
        match self {
            BasisId::ComputationalZ => "Z".to_string(),
            BasisId::MubB(b) => b.to_string(),
        }
    }

    pub fn parse(s: &str, n: usize) -> Result<BasisId> {
        if s == "Z" {
            return Ok(BasisId::ComputationalZ);
        }
        let b = BitVector::parse(s)?;
        if b.len() != n {
            return Err(Error::SizeMismatch { expected: n, got: b.len() });
        }
        Ok(BasisId::MubB(b))
    }
}

impl std::fmt::Display for BasisId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// A basis together with its n canonical stabilizer generators.
#[derive(Clone, Debug)]
pub struct StabilizerBasis {
    pub id: BasisId,
    pub generators: Vec<PauliOperator>,
}

/// Index of one design state: basis J and state label k.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct StateIndex {
    pub basis: BasisId,
    pub k: BitVector,
}

/// Canonical generators of basis `j` for register size `n` using companion
/// matrix `m`. Generator `j` of `MubB(b)` has X part `1·M^j` and Z part
/// `b·M̂^j`; the computational basis gets single-qubit Z operators.
pub fn canonical_generators(j: &BasisId, n: usize, m: &BitMatrix) -> Result<Vec<PauliOperator>> {
    match j {
        BasisId::ComputationalZ => (0..n)
            .map(|q| PauliOperator::hermitian(BitVector::zeros(n), BitVector::unit(n, q)))
            .collect(),
        BasisId::MubB(b) => {
            if b.len() != n || m.size() != n {
                return Err(Error::SizeMismatch { expected: n, got: b.len().min(m.size()) });
            }
            let mt = m.transpose();
            let mut x = BitVector::unit(n, 0);
            let mut z = *b;
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                out.push(PauliOperator::hermitian(x, z)?);
                x = mat_vec(&x, m)?;
                z = mat_vec(&z, &mt)?;
            }
            Ok(out)
        }
    }
}

/// The full MUB construction for `n` qubits.
#[derive(Clone, Debug)]
pub struct MubDesign {
    n: usize,
    companion: BitMatrix,
}

impl MubDesign {
    /// Builds the design from the built-in primitive polynomial table; the
    /// companion matrix is re-validated on every construction.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("register must have at least one qubit"));
        }
        Ok(MubDesign { n, companion: primitive_companion(n)? })
    }

    /// Builds the design from a caller-supplied companion matrix.
    pub fn with_matrix(n: usize, companion: BitMatrix) -> Result<Self> {
        if companion.size() != n {
            return Err(Error::SizeMismatch { expected: n, got: companion.size() });
        }
        if !validate_primitive(&companion) {
            return Err(Error::invalid("companion matrix is not primitive"));
        }
        Ok(MubDesign { n, companion })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    /// Hilbert space dimension D = 2^n.
    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn companion(&self) -> &BitMatrix {
        &self.companion
    }

    /// All D+1 basis labels: the computational basis followed by the `b`
    /// vectors in increasing binary order.
    pub fn bases(&self) -> Vec<BasisId> {
        let mut out = Vec::with_capacity(self.dim() + 1);
        out.push(BasisId::ComputationalZ);
        for raw in 0..(1u64 << self.n) {
            out.push(BasisId::MubB(BitVector::from_raw(raw, self.n)));
        }
        out
    }

    pub fn basis(&self, j: &BasisId) -> Result<StabilizerBasis> {
        Ok(StabilizerBasis { id: *j, generators: self.canonical_generators(j)? })
    }

    pub fn canonical_generators(&self, j: &BasisId) -> Result<Vec<PauliOperator>> {
        canonical_generators(j, self.n, &self.companion)
    }

    /// Commutation vector of `e` with respect to basis `j`: bit `i` is the
    /// symplectic product of generator `i` with `e`.
    pub fn commutation_vector(&self, e: &PauliOperator, j: &BasisId) -> Result<BitVector> {
        if e.qubits() != self.n {
            return Err(Error::SizeMismatch { expected: self.n, got: e.qubits() });
        }
        let gens = self.canonical_generators(j)?;
        let mut v = BitVector::zeros(self.n);
        for (i, g) in gens.iter().enumerate() {
            v.set(i, g.symplectic_product(e)? == 1);
        }
        Ok(v)
    }

    /// Index of the design state that `e` maps the state `s` onto:
    /// same basis, `k' = k ⊕ commutation_vector(e, J)`.
    pub fn transition_target(&self, s: &StateIndex, e: &PauliOperator) -> Result<StateIndex> {
        let v = self.commutation_vector(e, &s.basis)?;
        Ok(StateIndex { basis: s.basis, k: s.k.xor(&v) })
    }

    /// Enumerates all D(D+1) design states.
    pub fn all_states(&self) -> Vec<StateIndex> {
        let mut out = Vec::with_capacity(self.dim() * (self.dim() + 1));
        for basis in self.bases() {
            for raw in 0..(1u64 << self.n) {
                out.push(StateIndex { basis, k: BitVector::from_raw(raw, self.n) });
            }
        }
        out
    }

    /// Dense state vector `|ψ_k^J⟩ := U_J† |k⟩`, where `U_J` is the
    /// synthesized change-of-basis circuit mapping basis-J states to
    /// computational states.
    pub fn state_vector(&self, s: &StateIndex) -> Result<Array1<Complex64>> {
        if self.n > 10 {
            return Err(Error::TooLarge(self.n));
        }
        if s.k.len() != self.n {
            return Err(Error::SizeMismatch { expected: self.n, got: s.k.len() });
        }
        let d = self.dim();
        let mut psi = Array1::zeros(d);
        psi[computational_index(&s.k)] = Complex64::new(1.0, 0.0);
        match s.basis {
            BasisId::ComputationalZ => Ok(psi),
            BasisId::MubB(b) => {
                let synth = circuit::synthesize_change_of_basis(&b, &self.companion)?;
                let inv = synth.circuit.inverse();
                inv.apply_to_statevector(&mut psi)?;
                Ok(psi)
            }
        }
    }

    /// Exact 2-design average `(1/|X|) Σ_ψ ⟨ψ|O₁|ψ⟩⟨ψ|O₂|ψ⟩` over all
    /// D(D+1) MUB states. Capped at n = 3 to keep enumeration cheap.
    pub fn exact_design_average(
        &self,
        o1: &Array2<Complex64>,
        o2: &Array2<Complex64>,
    ) -> Result<Complex64> {
        if self.n > 3 {
            return Err(Error::TooLarge(self.n));
        }
        let d = self.dim();
        if o1.dim() != (d, d) || o2.dim() != (d, d) {
            return Err(Error::SizeMismatch { expected: d, got: o1.dim().0 });
        }
        let states = self.all_states();
        let mut sum = Complex64::new(0.0, 0.0);
        for s in &states {
            let psi = self.state_vector(s)?;
            sum += expectation(o1, &psi) * expectation(o2, &psi);
        }
        Ok(sum / states.len() as f64)
    }
}

/// Computational basis index of bitstring `k` (qubit 1 is the most
/// significant bit, matching the tensor-product order of dense matrices).
pub fn computational_index(k: &BitVector) -> usize {
    let n = k.len();
    (0..n).fold(0usize, |acc, i| acc | ((k.get(i) as usize) << (n - 1 - i)))
}

/// Inverse of [`computational_index`].
pub fn bits_from_index(index: usize, n: usize) -> BitVector {
    let mut k = BitVector::zeros(n);
    for i in 0..n {
        k.set(i, (index >> (n - 1 - i)) & 1 == 1);
    }
    k
}

fn expectation(o: &Array2<Complex64>, psi: &Array1<Complex64>) -> Complex64 {
    let opsi = o.dot(psi);
    psi.iter().zip(opsi.iter()).map(|(a, b)| a.conj() * b).sum()
}
