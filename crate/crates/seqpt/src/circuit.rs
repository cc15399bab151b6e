//! Change-of-basis circuit synthesis and circuit utilities.
//!
//! The synthesis turns the canonical stabilizer generators of a MUB into
//! single-qubit Z operators using O(n²) gates from {H, S, S†, CNOT, X}: for
//! each generator, single-qubit rotations reduce every tensor factor to Z or
//! identity, then CNOTs collapse the remaining Z factors onto the active
//! qubit. The classical bookkeeping is pure stabilizer algebra; no dense
//! matrices are involved, so synthesis scales to tens of qubits.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVector};
use crate::mub::{canonical_generators, BasisId, MubDesign, StateIndex};
use crate::pauli::{GateAction, PauliOperator};

/// Ordered gate sequence over a fixed-size register. The first gate in the
/// list is applied first.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Circuit {
    qubit_count: usize,
    gates: Vec<GateAction>,
}

/// Output format for [`Circuit::export`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ExportFormat {
    Plain,
    QasmLike,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(ExportFormat::Plain),
            "qasm" | "qasm-like" => Ok(ExportFormat::QasmLike),
            other => Err(Error::invalid(format!("unknown circuit format '{other}'"))),
        }
    }
}

impl Circuit {
    pub fn new(qubit_count: usize) -> Self {
        Circuit { qubit_count, gates: Vec::new() }
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn gates(&self) -> &[GateAction] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: GateAction) -> Result<()> {
        gate.validate(self.qubit_count)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = GateAction>) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    /// Reversed gate order with every gate inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            qubit_count: self.qubit_count,
            gates: self.gates.iter().rev().map(|g| g.inverse()).collect(),
        }
    }

    /// Concatenation: `self` first, then `other`.
    pub fn then(&self, other: &Circuit) -> Result<Circuit> {
        if self.qubit_count != other.qubit_count {
            return Err(Error::SizeMismatch { expected: self.qubit_count, got: other.qubit_count });
        }
        let mut out = self.clone();
        out.gates.extend_from_slice(&other.gates);
        Ok(out)
    }

    /// Propagates a Pauli forward through the circuit: `U P U†`.
    pub fn propagate(&self, p: &PauliOperator) -> Result<PauliOperator> {
        let mut cur = *p;
        for g in &self.gates {
            cur = cur.conjugate_forward(*g)?;
        }
        Ok(cur)
    }

    /// Applies the circuit to a dense state vector in place.
    pub fn apply_to_statevector(&self, psi: &mut Array1<Complex64>) -> Result<()> {
        let n = self.qubit_count;
        if n > 12 {
            return Err(Error::TooLarge(n));
        }
        let d = 1usize << n;
        if psi.len() != d {
            return Err(Error::SizeMismatch { expected: d, got: psi.len() });
        }
        // Qubit q occupies bit (n - 1 - q) of the index.
        let bit = |q: usize| 1usize << (n - 1 - q);
        let inv_sqrt2 = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        for gate in &self.gates {
            match *gate {
                GateAction::H(q) => {
                    let b = bit(q);
                    for i in 0..d {
                        if i & b == 0 {
                            let (a0, a1) = (psi[i], psi[i | b]);
                            psi[i] = inv_sqrt2 * (a0 + a1);
                            psi[i | b] = inv_sqrt2 * (a0 - a1);
                        }
                    }
                }
                GateAction::Phase(q) => {
                    let b = bit(q);
                    for i in 0..d {
                        if i & b != 0 {
                            psi[i] *= Complex64::new(0.0, 1.0);
                        }
                    }
                }
                GateAction::PhaseDagger(q) => {
                    let b = bit(q);
                    for i in 0..d {
                        if i & b != 0 {
                            psi[i] *= Complex64::new(0.0, -1.0);
                        }
                    }
                }
                GateAction::X(q) => {
                    let b = bit(q);
                    for i in 0..d {
                        if i & b == 0 {
                            psi.swap(i, i | b);
                        }
                    }
                }
                GateAction::Cnot { control, target } => {
                    let (cb, tb) = (bit(control), bit(target));
                    for i in 0..d {
                        if i & cb != 0 && i & tb == 0 {
                            psi.swap(i, i | tb);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Dense unitary of the whole circuit (small registers only).
    pub fn unitary(&self) -> Result<Array2<Complex64>> {
        let n = self.qubit_count;
        if n > 10 {
            return Err(Error::TooLarge(n));
        }
        let d = 1usize << n;
        let mut u = Array2::zeros((d, d));
        for col in 0..d {
            let mut psi = Array1::zeros(d);
            psi[col] = Complex64::new(1.0, 0.0);
            self.apply_to_statevector(&mut psi)?;
            for row in 0..d {
                u[(row, col)] = psi[row];
            }
        }
        Ok(u)
    }

    /// Deterministic one-gate-per-line text. Qubit indices are 1-based; the
    /// paper-level phase gate is spelled `S`/`SDG`.
    pub fn export(&self, format: ExportFormat) -> String {
        let mut out = String::new();
        match format {
            ExportFormat::Plain => {
                out.push_str(&format!("qubits {}\n", self.qubit_count));
                for g in &self.gates {
                    let line = match *g {
                        GateAction::H(q) => format!("H {}", q + 1),
                        GateAction::Phase(q) => format!("S {}", q + 1),
                        GateAction::PhaseDagger(q) => format!("SDG {}", q + 1),
                        GateAction::X(q) => format!("X {}", q + 1),
                        GateAction::Cnot { control, target } => {
                            format!("CNOT {} {}", control + 1, target + 1)
                        }
                    };
                    out.push_str(&line);
                    out.push('\n');
                }
            }
            ExportFormat::QasmLike => {
                out.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
                out.push_str(&format!("qreg q[{}];\n", self.qubit_count));
                for g in &self.gates {
                    let line = match *g {
                        GateAction::H(q) => format!("h q[{q}];"),
                        GateAction::Phase(q) => format!("s q[{q}];"),
                        GateAction::PhaseDagger(q) => format!("sdg q[{q}];"),
                        GateAction::X(q) => format!("x q[{q}];"),
                        GateAction::Cnot { control, target } => format!("cx q[{control}],q[{target}];"),
                    };
                    out.push_str(&line);
                    out.push('\n');
                }
            }
        }
        out
    }

    /// Parses the plain export format back into a circuit.
    pub fn parse_plain(text: &str) -> Result<Circuit> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::invalid("missing circuit header"))?;
        let qubit_count: usize = header
            .strip_prefix("qubits ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::invalid(format!("bad circuit header '{header}'")))?;
        let mut circuit = Circuit::new(qubit_count);
        for line in lines {
            let mut parts = line.split_whitespace();
            let op = parts.next().unwrap_or_default();
            let mut q = || -> Result<usize> {
                let raw: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::invalid(format!("bad gate line '{line}'")))?;
                if raw == 0 {
                    return Err(Error::invalid("qubit indices are 1-based"));
                }
                Ok(raw - 1)
            };
            let gate = match op {
                "H" => GateAction::H(q()?),
                "S" => GateAction::Phase(q()?),
                "SDG" => GateAction::PhaseDagger(q()?),
                "X" => GateAction::X(q()?),
                "CNOT" => GateAction::Cnot { control: q()?, target: q()? },
                other => return Err(Error::invalid(format!("unknown gate '{other}'"))),
            };
            circuit.push(gate)?;
        }
        Ok(circuit)
    }
}

/// Result of the change-of-basis synthesis: the circuit `U` mapping basis-J
/// states onto computational states, plus the sign picked up by each
/// generator (`U G_j U† = (-1)^{s_j} Z_{j+1}`).
#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub circuit: Circuit,
    pub generator_signs: BitVector,
}

/// Synthesizes the circuit conjugating the canonical generators of
/// `MubB(b)` into single-qubit Z operators, order preserved.
///
/// Iteration `i` reduces generator `i`: single-qubit rotations on ascending
/// qubits (Y -> S† then H; X -> H; Z and identity untouched), then CNOTs with
/// control on every other qubit still carrying a Z and target on the active
/// qubit. Gate count is bounded by 4n²; classical cost is O(n³).
pub fn synthesize_change_of_basis(b: &BitVector, m: &BitMatrix) -> Result<SynthesisResult> {
    let n = b.len();
    if n == 0 {
        return Err(Error::invalid("basis vector must be non-empty"));
    }
    if m.size() != n {
        return Err(Error::SizeMismatch { expected: n, got: m.size() });
    }
    let mut working = canonical_generators(&BasisId::MubB(*b), n, m)?;
    let mut circuit = Circuit::new(n);

    for step in 0..n {
        let gen = working[step];
        let mut stage = Vec::new();
        for q in 0..n {
            match (gen.x_bits().get(q), gen.z_bits().get(q)) {
                (true, true) => {
                    stage.push(GateAction::PhaseDagger(q));
                    stage.push(GateAction::H(q));
                }
                (true, false) => stage.push(GateAction::H(q)),
                _ => {}
            }
        }
        apply_stage(&mut working, &stage, step)?;

        let rotated = working[step];
        if !rotated.x_bits().is_zero() {
            return Err(Error::Internal("rotation stage left an X component".into()));
        }
        if !rotated.z_bits().get(step) {
            return Err(Error::Internal(format!(
                "generator {step} lost its Z on the active qubit"
            )));
        }
        let cnots: Vec<GateAction> = (0..n)
            .filter(|&q| q != step && rotated.z_bits().get(q))
            .map(|q| GateAction::Cnot { control: q, target: step })
            .collect();
        apply_stage(&mut working, &cnots, step)?;

        circuit.extend(stage)?;
        circuit.extend(cnots)?;

        // Later generators must now act trivially on the finished qubit.
        for later in working.iter().skip(step + 1) {
            if later.x_bits().get(step) || later.z_bits().get(step) {
                return Err(Error::Internal(format!(
                    "generator order not conserved at step {step}"
                )));
            }
        }
    }

    let mut signs = BitVector::zeros(n);
    for (j, g) in working.iter().enumerate() {
        let is_z = g.x_bits().is_zero() && g.z_bits() == BitVector::unit(n, j);
        match (is_z, g.phase()) {
            (true, 0) => {}
            (true, 2) => signs.set(j, true),
            _ => return Err(Error::Internal(format!("generator {j} did not reduce to ±Z"))),
        }
    }
    if circuit.len() > 4 * n * n {
        return Err(Error::Internal(format!(
            "synthesized {} gates, above the 4n² bound",
            circuit.len()
        )));
    }
    Ok(SynthesisResult { circuit, generator_signs: signs })
}

fn apply_stage(working: &mut [PauliOperator], gates: &[GateAction], from: usize) -> Result<()> {
    for w in working.iter_mut().skip(from) {
        for g in gates {
            *w = w.conjugate_forward(*g)?;
        }
    }
    Ok(())
}

/// Change-of-basis circuit for `j` (empty for the computational basis).
pub fn change_of_basis_circuit(design: &MubDesign, j: &BasisId) -> Result<Circuit> {
    match j {
        BasisId::ComputationalZ => Ok(Circuit::new(design.qubits())),
        BasisId::MubB(b) => Ok(synthesize_change_of_basis(b, design.companion())?.circuit),
    }
}

/// Circuit preparing `state_vector(s)` from `|0...0⟩`: X gates writing `k`,
/// then the inverted change-of-basis circuit.
pub fn preparation_circuit(design: &MubDesign, s: &StateIndex) -> Result<Circuit> {
    let n = design.qubits();
    if s.k.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: s.k.len() });
    }
    let mut prep = Circuit::new(n);
    for q in 0..n {
        if s.k.get(q) {
            prep.push(GateAction::X(q))?;
        }
    }
    prep.then(&change_of_basis_circuit(design, &s.basis)?.inverse())
}

/// Measurement circuit for basis `j`: the change-of-basis circuit itself,
/// followed by a computational readout outside this function.
pub fn measurement_circuit(design: &MubDesign, j: &BasisId) -> Result<Circuit> {
    change_of_basis_circuit(design, j)
}
