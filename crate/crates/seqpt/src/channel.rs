//! Dense density-matrix channel simulator: the stand-in for the
//! experimental device.
//!
//! A channel is held in one of three representations (Pauli probabilities,
//! Kraus set, χ-matrix). The simulator runs the two experiment types — basis
//! transitions and the ancilla-assisted off-diagonal circuit — by computing
//! the exact outcome distribution for each shot and sampling from it. Pauli
//! channels additionally get a trajectory fast path that never touches dense
//! matrices, so transition scans work far beyond the dense size cap.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::ExperimentRecord;
use crate::gf2::BitVector;
use crate::mub::{bits_from_index, computational_index, BasisId, MubDesign, StateIndex};
use crate::pauli::PauliOperator;

const DENSE_QUBIT_CAP: usize = 10;
const CHI_QUBIT_CAP: usize = 3;

/// Ancilla measurement axis for the off-diagonal experiment.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Axis {
    X,
    Y,
}

/// One experimental event: the transition triple plus, for off-diagonal
/// runs, the ±1 ancilla readout.
#[derive(Clone, Debug)]
pub struct ShotOutcome {
    pub record: ExperimentRecord,
    pub ancilla: Option<i8>,
}

/// Internal channel representation.
#[derive(Clone, Debug)]
enum Repr {
    /// Canonical Pauli operators with probabilities summing to 1.
    PauliProbs(Vec<(PauliOperator, f64)>),
    /// Kraus matrices satisfying Σ A†A = I.
    Kraus(Vec<Array2<Complex64>>),
    /// χ-matrix in the canonical Pauli index order of [`pauli_by_index`].
    Chi(Array2<Complex64>),
}

/// A completely positive trace-preserving map on `n` qubits.
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    n: usize,
    repr: Repr,
}

/// Canonical index of a Pauli: `m = x_raw · D + z_raw`. The identity is 0.
pub fn pauli_index(p: &PauliOperator) -> usize {
    let d = 1usize << p.qubits();
    (p.x_bits().raw() as usize) * d + p.z_bits().raw() as usize
}

/// Inverse of [`pauli_index`].
pub fn pauli_by_index(m: usize, n: usize) -> Result<PauliOperator> {
    let d = 1usize << n;
    if m >= d * d {
        return Err(Error::invalid(format!("Pauli index {m} out of range for n={n}")));
    }
    PauliOperator::hermitian(
        BitVector::from_raw((m / d) as u64, n),
        BitVector::from_raw((m % d) as u64, n),
    )
}

impl QuantumChannel {
    /// Pauli channel from (operator, probability) pairs; operators must be
    /// canonical (phase 0) and distinct.
    pub fn pauli(n: usize, probs: &[(PauliOperator, f64)]) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("Pauli channel needs at least one term"));
        }
        let mut sum = 0.0;
        let mut seen = std::collections::HashSet::new();
        for (op, p) in probs {
            if op.qubits() != n {
                return Err(Error::SizeMismatch { expected: n, got: op.qubits() });
            }
            if op.phase() != 0 {
                return Err(Error::invalid(format!("non-canonical Pauli {op} in channel")));
            }
            if !seen.insert((op.x_bits().raw(), op.z_bits().raw())) {
                return Err(Error::invalid(format!("duplicate Pauli {op} in channel")));
            }
            if *p < 0.0 || !p.is_finite() {
                return Err(Error::invalid(format!("bad probability {p} for {op}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("Pauli probabilities sum to {sum}, not 1")));
        }
        Ok(QuantumChannel { n, repr: Repr::PauliProbs(probs.to_vec()) })
    }

    /// Kraus-form channel; checks Σ A†A = I within 1e-10.
    pub fn kraus(n: usize, matrices: Vec<Array2<Complex64>>) -> Result<Self> {
        if n > DENSE_QUBIT_CAP {
            return Err(Error::TooLarge(n));
        }
        if matrices.is_empty() {
            return Err(Error::invalid("Kraus channel needs at least one matrix"));
        }
        let d = 1usize << n;
        let mut acc: Array2<Complex64> = Array2::zeros((d, d));
        for a in &matrices {
            if a.dim() != (d, d) {
                return Err(Error::SizeMismatch { expected: d, got: a.dim().0 });
            }
            acc = acc + dagger(a).dot(a);
        }
        for i in 0..d {
            for j in 0..d {
                let expected = if i == j { 1.0 } else { 0.0 };
                if (acc[(i, j)] - expected).norm() > 1e-10 {
                    return Err(Error::invalid("Kraus set is not trace preserving"));
                }
            }
        }
        Ok(QuantumChannel { n, repr: Repr::Kraus(matrices) })
    }

    /// Unitary channel: a single Kraus operator.
    pub fn unitary(n: usize, u: Array2<Complex64>) -> Result<Self> {
        Self::kraus(n, vec![u])
    }

    /// χ-matrix channel; checks Hermiticity, positivity and unit trace.
    pub fn chi(n: usize, chi: Array2<Complex64>) -> Result<Self> {
        if n > CHI_QUBIT_CAP {
            return Err(Error::TooLarge(n));
        }
        let d2 = 1usize << (2 * n);
        if chi.dim() != (d2, d2) {
            return Err(Error::SizeMismatch { expected: d2, got: chi.dim().0 });
        }
        let mut trace = 0.0;
        for i in 0..d2 {
            trace += chi[(i, i)].re;
            for j in 0..d2 {
                if (chi[(i, j)] - chi[(j, i)].conj()).norm() > 1e-10 {
                    return Err(Error::invalid("χ-matrix is not Hermitian"));
                }
            }
        }
        if (trace - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("χ-matrix trace is {trace}, not 1")));
        }
        let min = hermitian_eigenvalues(&chi)?.into_iter().fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(Error::invalid(format!(
                "χ-matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(QuantumChannel { n, repr: Repr::Chi(chi) })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    /// Hilbert space dimension of the main register.
    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn is_pauli(&self) -> bool {
        matches!(self.repr, Repr::PauliProbs(_))
    }

    pub fn pauli_terms(&self) -> Option<&[(PauliOperator, f64)]> {
        match &self.repr {
            Repr::PauliProbs(terms) => Some(terms),
            _ => None,
        }
    }

    /// Ground-truth χ-matrix in the canonical Pauli index order.
    ///
    /// Kraus operators expand as `A_k = Σ_m a_{km} E_m` with
    /// `a_{km} = Tr(E_m† A_k)/D`, giving `χ_{mm'} = Σ_k a_{km}·conj(a_{km'})`.
    pub fn chi_matrix(&self) -> Result<Array2<Complex64>> {
        if self.n > CHI_QUBIT_CAP {
            return Err(Error::TooLarge(self.n));
        }
        let d = self.dim();
        let d2 = d * d;
        match &self.repr {
            Repr::Chi(chi) => Ok(chi.clone()),
            Repr::PauliProbs(terms) => {
                let mut chi = Array2::zeros((d2, d2));
                for (op, p) in terms {
                    let m = pauli_index(op);
                    chi[(m, m)] = Complex64::new(*p, 0.0);
                }
                Ok(chi)
            }
            Repr::Kraus(mats) => {
                let basis: Vec<Array2<Complex64>> = (0..d2)
                    .map(|m| pauli_by_index(m, self.n)?.dense_matrix())
                    .collect::<Result<_>>()?;
                let mut coeffs = Array2::<Complex64>::zeros((mats.len(), d2));
                for (k, a) in mats.iter().enumerate() {
                    for m in 0..d2 {
                        coeffs[(k, m)] = trace_of(&dagger(&basis[m]).dot(a)) / d as f64;
                    }
                }
                let mut chi = Array2::zeros((d2, d2));
                for m in 0..d2 {
                    for mp in 0..d2 {
                        let mut sum = Complex64::new(0.0, 0.0);
                        for k in 0..mats.len() {
                            sum += coeffs[(k, m)] * coeffs[(k, mp)].conj();
                        }
                        chi[(m, mp)] = sum;
                    }
                }
                Ok(chi)
            }
        }
    }

    /// Exact channel action on a density matrix.
    pub fn apply(&self, rho: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        let d = self.dim();
        if rho.dim() != (d, d) {
            return Err(Error::SizeMismatch { expected: d, got: rho.dim().0 });
        }
        match &self.repr {
            Repr::PauliProbs(terms) => {
                let mut out = Array2::zeros((d, d));
                for (op, p) in terms {
                    if *p == 0.0 {
                        continue;
                    }
                    let e = op.dense_matrix()?;
                    out = out + e.dot(rho).dot(&e).mapv(|c| c * *p);
                }
                Ok(out)
            }
            Repr::Kraus(mats) => {
                let mut out = Array2::zeros((d, d));
                for a in mats {
                    out = out + a.dot(rho).dot(&dagger(a));
                }
                Ok(out)
            }
            Repr::Chi(chi) => {
                let d2 = d * d;
                let basis: Vec<Array2<Complex64>> = (0..d2)
                    .map(|m| pauli_by_index(m, self.n)?.dense_matrix())
                    .collect::<Result<_>>()?;
                let mut out = Array2::zeros((d, d));
                for u in 0..d2 {
                    // G_u = Σ_v conj(χ_uv)·E_v, so the action is Σ_u E_u ρ G_u†.
                    let mut g: Array2<Complex64> = Array2::zeros((d, d));
                    let mut nonzero = false;
                    for v in 0..d2 {
                        let c = chi[(u, v)].conj();
                        if c.norm() > 0.0 {
                            nonzero = true;
                            g = g + basis[v].mapv(|e| e * c);
                        }
                    }
                    if nonzero {
                        out = out + basis[u].dot(rho).dot(&dagger(&g));
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Exact distribution of measured indices `k'` when `Π_{J,k}` is prepared,
/// the channel applied, and the register measured in basis `J`. Indexed by
/// the computational index of `k'`.
pub fn exact_transition_probs(
    design: &MubDesign,
    ch: &QuantumChannel,
    j: &BasisId,
    k: &BitVector,
) -> Result<Vec<f64>> {
    check_compat(design, ch)?;
    let d = design.dim();
    let psi = design.state_vector(&StateIndex { basis: *j, k: *k })?;
    let rho = ch.apply(&outer(&psi))?;
    let mut probs = Vec::with_capacity(d);
    for idx in 0..d {
        let phi = design.state_vector(&StateIndex { basis: *j, k: bits_from_index(idx, design.qubits()) })?;
        probs.push(expectation(&rho, &phi).max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::Internal(format!("transition probabilities sum to {total}")));
    }
    Ok(probs)
}

/// One shot of the diagonal/transition experiment: prepare `Π_{J,k}`, apply
/// the channel, measure in basis `J`, record `(J, k, k')`.
///
/// Pauli channels use the exact trajectory path (sample one Pauli error,
/// flip `k` by its commutation vector); everything else samples from the
/// dense outcome distribution.
pub fn run_transition_experiment(
    design: &MubDesign,
    ch: &QuantumChannel,
    s: &StateIndex,
    rng: &mut impl Rng,
) -> Result<ShotOutcome> {
    check_compat(design, ch)?;
    let k_out = if let Some(terms) = ch.pauli_terms() {
        let op = sample_categorical(terms.iter().map(|(op, p)| (op, *p)), rng)?;
        let v = design.commutation_vector(op, &s.basis)?;
        s.k.xor(&v)
    } else {
        let probs = exact_transition_probs(design, ch, &s.basis, &s.k)?;
        let idx = sample_categorical(probs.iter().copied().enumerate().map(|(i, p)| (i, p)), rng)?;
        bits_from_index(idx, design.qubits())
    };
    Ok(ShotOutcome {
        record: ExperimentRecord::new(s.basis, s.k, k_out)?,
        ancilla: None,
    })
}

/// Exact joint distribution of (ancilla ±1, measured `k'`) for the ancilla
/// circuit: H on the ancilla, `E_m†` controlled on |1⟩, `E_{m'}†`
/// anti-controlled on |0⟩, channel on the main register, then a joint
/// σ_axis ⊗ basis-J measurement. Returns `[(prob, ancilla, k'_index)]`.
fn exact_offdiag_joint(
    design: &MubDesign,
    ch: &QuantumChannel,
    s: &StateIndex,
    m: &PauliOperator,
    mp: &PauliOperator,
    axis: Axis,
) -> Result<Vec<(f64, i8, usize)>> {
    check_compat(design, ch)?;
    for op in [m, mp] {
        if op.qubits() != design.qubits() {
            return Err(Error::SizeMismatch { expected: design.qubits(), got: op.qubits() });
        }
    }
    let d = design.dim();
    let psi = design.state_vector(s)?;
    // E† for a canonical Pauli with stored phase φ is i^{-φ} times the
    // canonical matrix; use the dense form directly.
    let top = dagger(&mp.dense_matrix()?).dot(&psi); // |0⟩ branch
    let bot = dagger(&m.dense_matrix()?).dot(&psi); // |1⟩ branch
    let blocks = [
        ch.apply(&outer_lr(&top, &top))?,
        ch.apply(&outer_lr(&top, &bot))?,
        ch.apply(&outer_lr(&bot, &top))?,
        ch.apply(&outer_lr(&bot, &bot))?,
    ];
    // Ancilla projectors onto the ±1 eigenstates of σx or σy.
    let half = Complex64::new(0.5, 0.0);
    let i_half = Complex64::new(0.0, 0.5);
    let projectors: [[Complex64; 4]; 2] = match axis {
        Axis::X => [[half, half, half, half], [half, -half, -half, half]],
        Axis::Y => [[half, -i_half, i_half, half], [half, i_half, -i_half, half]],
    };
    let mut out = Vec::with_capacity(2 * d);
    for (sign, p) in [(1i8, projectors[0]), (-1i8, projectors[1])] {
        for idx in 0..d {
            let phi = design.state_vector(&StateIndex {
                basis: s.basis,
                k: bits_from_index(idx, design.qubits()),
            })?;
            // Tr[(P ⊗ Π)ρ] = Σ_{ab} P_{ba}·Tr[Π ρ_{ab}], blocks ordered
            // ρ_00 ρ_01 ρ_10 ρ_11; the factor 1/2 from the initial H is
            // folded in below.
            let mut val = Complex64::new(0.0, 0.0);
            for (coeff, block) in [(p[0], 0), (p[2], 1), (p[1], 2), (p[3], 3)] {
                val += coeff * expectation_c(&blocks[block], &phi);
            }
            out.push(((val.re / 2.0).max(0.0), sign, idx));
        }
    }
    let total: f64 = out.iter().map(|(p, _, _)| p).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Internal(format!("joint probabilities sum to {total}")));
    }
    Ok(out)
}

/// One shot of the off-diagonal experiment; see [`exact_offdiag_joint`] for
/// the circuit. Returns the ancilla ±1 and the main-register triple.
pub fn run_offdiag_experiment(
    design: &MubDesign,
    ch: &QuantumChannel,
    s: &StateIndex,
    m: &PauliOperator,
    mp: &PauliOperator,
    axis: Axis,
    rng: &mut impl Rng,
) -> Result<ShotOutcome> {
    let joint = exact_offdiag_joint(design, ch, s, m, mp, axis)?;
    let (sign, idx) = sample_categorical(joint.iter().map(|(p, a, i)| ((*a, *i), *p)), rng)?;
    Ok(ShotOutcome {
        record: ExperimentRecord::new(s.basis, s.k, bits_from_index(idx, design.qubits()))?,
        ancilla: Some(sign),
    })
}

/// Exact average over all D(D+1) design states of the survival fidelity
/// `Tr(E_m†·ℰ(Π)·E_m·Π)`; equals `(D·χ_mm + 1)/(D + 1)`.
pub fn exact_survival_fidelity(
    design: &MubDesign,
    ch: &QuantumChannel,
    m: &PauliOperator,
) -> Result<f64> {
    check_compat(design, ch)?;
    if design.qubits() > CHI_QUBIT_CAP {
        return Err(Error::TooLarge(design.qubits()));
    }
    let em = m.dense_matrix()?;
    let states = design.all_states();
    let mut sum = 0.0;
    for s in &states {
        let psi = design.state_vector(s)?;
        let rho = ch.apply(&outer(&psi))?;
        // ⟨ψ|E_m†·ℰ(Π)·E_m|ψ⟩
        let v = em.dot(&psi);
        sum += expectation_c(&rho, &v).re;
    }
    Ok(sum / states.len() as f64)
}

/// Exact design-state average of `E[ancilla · survival]` for the
/// off-diagonal circuit; equals `(D·Reχ_{mm'} + δ_{mm'})/(D+1)` on σx and
/// `D·Imχ_{mm'}/(D+1)` on σy.
pub fn exact_offdiag_expectation(
    design: &MubDesign,
    ch: &QuantumChannel,
    m: &PauliOperator,
    mp: &PauliOperator,
    axis: Axis,
) -> Result<f64> {
    if design.qubits() > CHI_QUBIT_CAP {
        return Err(Error::TooLarge(design.qubits()));
    }
    let states = design.all_states();
    let mut sum = 0.0;
    for s in &states {
        let k_idx = computational_index(&s.k);
        for (p, sign, idx) in exact_offdiag_joint(design, ch, s, m, mp, axis)? {
            if idx == k_idx {
                sum += f64::from(sign) * p;
            }
        }
    }
    Ok(sum / states.len() as f64)
}

/// Random CPTP channel with `kraus_count` Kraus operators, drawn by
/// orthonormalizing the columns of a complex Gaussian (kD × D) matrix.
pub fn random_kraus_channel(
    n: usize,
    kraus_count: usize,
    rng: &mut impl Rng,
) -> Result<QuantumChannel> {
    if n > DENSE_QUBIT_CAP {
        return Err(Error::TooLarge(n));
    }
    if kraus_count == 0 {
        return Err(Error::invalid("need at least one Kraus operator"));
    }
    let d = 1usize << n;
    let rows = kraus_count * d;
    // Gram-Schmidt on D Gaussian columns of length kD yields an isometry V;
    // slicing V into D×D blocks gives Kraus operators with Σ A†A = V†V = I.
    let mut cols: Vec<Array1<Complex64>> = Vec::with_capacity(d);
    for _ in 0..d {
        loop {
            let mut v: Array1<Complex64> = Array1::from_iter(
                (0..rows).map(|_| Complex64::new(gaussian(rng), gaussian(rng))),
            );
            for c in &cols {
                let proj: Complex64 = c.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                v = v - c.mapv(|x| x * proj);
            }
            let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                cols.push(v.mapv(|x| x / norm));
                break;
            }
        }
    }
    let mats = (0..kraus_count)
        .map(|k| {
            let mut a = Array2::zeros((d, d));
            for r in 0..d {
                for c in 0..d {
                    a[(r, c)] = cols[c][k * d + r];
                }
            }
            a
        })
        .collect();
    QuantumChannel::kraus(n, mats)
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller; avoids pulling in rand_distr for one distribution.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn check_compat(design: &MubDesign, ch: &QuantumChannel) -> Result<()> {
    if design.qubits() != ch.qubits() {
        return Err(Error::SizeMismatch { expected: design.qubits(), got: ch.qubits() });
    }
    Ok(())
}

fn sample_categorical<T>(
    items: impl Iterator<Item = (T, f64)>,
    rng: &mut impl Rng,
) -> Result<T> {
    let collected: Vec<(T, f64)> = items.collect();
    let total: f64 = collected.iter().map(|(_, p)| p).sum();
    if total <= 0.0 {
        return Err(Error::Internal("empty categorical distribution".into()));
    }
    let mut target = rng.gen_range(0.0..total);
    let mut last = None;
    for (item, p) in collected {
        if p <= 0.0 {
            continue;
        }
        if target < p {
            return Ok(item);
        }
        target -= p;
        last = Some(item);
    }
    last.ok_or_else(|| Error::Internal("empty categorical distribution".into()))
}

pub(crate) fn dagger(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|c| c.conj())
}

fn trace_of(a: &Array2<Complex64>) -> Complex64 {
    a.diag().sum()
}

fn outer(psi: &Array1<Complex64>) -> Array2<Complex64> {
    outer_lr(psi, psi)
}

/// |l⟩⟨r|
fn outer_lr(l: &Array1<Complex64>, r: &Array1<Complex64>) -> Array2<Complex64> {
    let d = l.len();
    let mut out = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = l[i] * r[j].conj();
        }
    }
    out
}

fn expectation(rho: &Array2<Complex64>, phi: &Array1<Complex64>) -> f64 {
    expectation_c(rho, phi).re
}

fn expectation_c(rho: &Array2<Complex64>, phi: &Array1<Complex64>) -> Complex64 {
    let rp = rho.dot(phi);
    phi.iter().zip(rp.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Eigenvalues of a Hermitian matrix by the cyclic complex Jacobi method.
/// Adequate for the D²×D² χ-matrices this crate validates (≤ 64×64).
pub(crate) fn hermitian_eigenvalues(a: &Array2<Complex64>) -> Result<Vec<f64>> {
    let n = a.dim().0;
    if a.dim().1 != n {
        return Err(Error::SizeMismatch { expected: n, got: a.dim().1 });
    }
    let mut w = a.clone();
    let scale: f64 = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += w[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() < 1e-13 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                let r = apq.norm();
                if r < 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let app = w[(p, p)].re;
                let aqq = w[(q, q)].re;
                let theta = 0.5 * (2.0 * r).atan2(aqq - app);
                let c = theta.cos();
                let s = phase * theta.sin();
                // Column update A ← A·J, then row update A ← J†·A.
                for i in 0..n {
                    let (aip, aiq) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = aip * c - aiq * s.conj();
                    w[(i, q)] = aip * s + aiq * c;
                }
                for i in 0..n {
                    let (api, aqi) = (w[(p, i)], w[(q, i)]);
                    w[(p, i)] = api * c - aqi * s;
                    w[(q, i)] = api * s.conj() + aqi * c;
                }
            }
        }
    }
    Ok((0..n).map(|i| w[(i, i)].re).collect())
}

// ---------------------------------------------------------------------------
// Channel specification files

/// JSON channel specification: `{"n": 2, "channel": {"type": "pauli", ...}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub n: usize,
    pub channel: ChannelBody,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ChannelBody {
    Pauli { probs: BTreeMap<String, f64> },
    Kraus { matrices: Vec<Vec<Vec<[f64; 2]>>> },
    Unitary { matrix: Vec<Vec<[f64; 2]>> },
}

impl ChannelSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ChannelSpec {
            field: "channel".into(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("channel spec serializes")
    }

    /// Builds and validates the channel.
    pub fn build(&self) -> Result<QuantumChannel> {
        let n = self.n;
        if n == 0 || n > 32 {
            return Err(Error::ChannelSpec {
                field: "n".into(),
                message: format!("register size {n} out of range 1..=32"),
            });
        }
        match &self.channel {
            ChannelBody::Pauli { probs } => {
                let mut terms = Vec::with_capacity(probs.len());
                for (label, p) in probs {
                    let op = PauliOperator::from_label(label).map_err(|e| Error::ChannelSpec {
                        field: format!("channel.probs.{label}"),
                        message: e.to_string(),
                    })?;
                    if op.qubits() != n {
                        return Err(Error::ChannelSpec {
                            field: format!("channel.probs.{label}"),
                            message: format!("label has {} qubits, spec says {n}", op.qubits()),
                        });
                    }
                    terms.push((op, *p));
                }
                QuantumChannel::pauli(n, &terms).map_err(|e| Error::ChannelSpec {
                    field: "channel.probs".into(),
                    message: e.to_string(),
                })
            }
            ChannelBody::Kraus { matrices } => {
                let mats = matrices
                    .iter()
                    .enumerate()
                    .map(|(i, m)| {
                        matrix_from_spec(m, n).map_err(|e| Error::ChannelSpec {
                            field: format!("channel.matrices[{i}]"),
                            message: e.to_string(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                QuantumChannel::kraus(n, mats).map_err(|e| Error::ChannelSpec {
                    field: "channel.matrices".into(),
                    message: e.to_string(),
                })
            }
            ChannelBody::Unitary { matrix } => {
                let u = matrix_from_spec(matrix, n).map_err(|e| Error::ChannelSpec {
                    field: "channel.matrix".into(),
                    message: e.to_string(),
                })?;
                QuantumChannel::unitary(n, u).map_err(|e| Error::ChannelSpec {
                    field: "channel.matrix".into(),
                    message: e.to_string(),
                })
            }
        }
    }
}

fn matrix_from_spec(rows: &[Vec<[f64; 2]>], n: usize) -> Result<Array2<Complex64>> {
    let d = 1usize
        .checked_shl(n as u32)
        .ok_or_else(|| Error::invalid("register too large"))?;
    if rows.len() != d {
        return Err(Error::SizeMismatch { expected: d, got: rows.len() });
    }
    let mut out = Array2::zeros((d, d));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(Error::SizeMismatch { expected: d, got: row.len() });
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            out[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn p(label: &str) -> PauliOperator {
        PauliOperator::from_label(label).unwrap()
    }

    fn identity_channel(n: usize) -> QuantumChannel {
        QuantumChannel::pauli(n, &[(PauliOperator::identity(n), 1.0)]).unwrap()
    }

    fn bit_flip(prob: f64) -> QuantumChannel {
        QuantumChannel::pauli(1, &[(p("I"), 1.0 - prob), (p("X"), prob)]).unwrap()
    }

    fn x_rotation(theta: f64) -> QuantumChannel {
        let c = Complex64::new(theta.cos(), 0.0);
        let s = Complex64::new(0.0, -theta.sin());
        QuantumChannel::unitary(1, ndarray::array![[c, s], [s, c]]).unwrap()
    }

    fn random_pauli_channel(n: usize, terms: usize, rng: &mut StdRng) -> QuantumChannel {
        use rand::Rng;
        loop {
            let mut seen = std::collections::HashSet::new();
            let mut weights: Vec<(PauliOperator, f64)> = Vec::new();
            while weights.len() < terms {
                let op = PauliOperator::hermitian(
                    BitVector::from_raw(rng.gen(), n),
                    BitVector::from_raw(rng.gen(), n),
                )
                .unwrap();
                if seen.insert((op.x_bits().raw(), op.z_bits().raw())) {
                    weights.push((op, rng.gen_range(0.01..1.0)));
                }
            }
            let total: f64 = weights.iter().map(|(_, w)| w).sum();
            for w in &mut weights {
                w.1 /= total;
            }
            if let Ok(ch) = QuantumChannel::pauli(n, &weights) {
                return ch;
            }
        }
    }

    #[test]
    fn pauli_index_round_trip() {
        for n in 1..=3usize {
            let d2 = 1usize << (2 * n);
            for m in 0..d2 {
                let op = pauli_by_index(m, n).unwrap();
                assert_eq!(pauli_index(&op), m);
            }
        }
        assert_eq!(pauli_index(&PauliOperator::identity(2)), 0);
        assert!(pauli_by_index(16, 1).is_err());
    }

    #[test]
    fn chi_of_identity_channel() {
        let chi = identity_channel(2).chi_matrix().unwrap();
        assert_abs_diff_eq!(chi[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert!(chi.iter().skip(1).all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn chi_of_pauli_channel_is_its_probabilities() {
        let ch = QuantumChannel::pauli(
            2,
            &[(p("II"), 0.85), (p("XI"), 0.10), (p("ZZ"), 0.05)],
        )
        .unwrap();
        let chi = ch.chi_matrix().unwrap();
        assert_abs_diff_eq!(chi[(pauli_index(&p("II")), pauli_index(&p("II")))].re, 0.85);
        assert_abs_diff_eq!(chi[(pauli_index(&p("XI")), pauli_index(&p("XI")))].re, 0.10);
        assert_abs_diff_eq!(chi[(pauli_index(&p("ZZ")), pauli_index(&p("ZZ")))].re, 0.05);
    }

    #[test]
    fn chi_of_x_rotation() {
        // U = exp(-iθX) = cosθ·I − i·sinθ·X
        let theta = std::f64::consts::FRAC_PI_4;
        let chi = x_rotation(theta).chi_matrix().unwrap();
        let (mi, mx) = (pauli_index(&p("I")), pauli_index(&p("X")));
        assert_abs_diff_eq!(chi[(mi, mi)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(chi[(mx, mx)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(chi[(mi, mx)].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(chi[(mi, mx)].im, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn chi_from_kraus_of_pauli_channel_is_diagonal() {
        let mut rng = StdRng::seed_from_u64(3);
        let ch = random_pauli_channel(2, 4, &mut rng);
        let direct = ch.chi_matrix().unwrap();
        let via_kraus = {
            let mats = ch
                .pauli_terms()
                .unwrap()
                .iter()
                .map(|(op, prob)| op.dense_matrix().unwrap().mapv(|c| c * prob.sqrt()))
                .collect();
            QuantumChannel::kraus(2, mats).unwrap().chi_matrix().unwrap()
        };
        for (a, b) in direct.iter().zip(via_kraus.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn apply_identity_and_bit_flip() {
        let rho = ndarray::array![
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]
        ];
        let out = identity_channel(1).apply(&rho).unwrap();
        assert!((out[(0, 0)].re - 1.0).abs() < 1e-12);
        let out = QuantumChannel::pauli(1, &[(p("X"), 1.0)]).unwrap().apply(&rho).unwrap();
        assert!((out[(1, 1)].re - 1.0).abs() < 1e-12);
        assert!(out[(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn representations_agree_on_random_states() {
        let mut rng = StdRng::seed_from_u64(5);
        for n in 1..=2usize {
            for _ in 0..5 {
                let kraus = random_kraus_channel(n, 3, &mut rng).unwrap();
                let chi_form = QuantumChannel::chi(n, kraus.chi_matrix().unwrap()).unwrap();
                let d = 1usize << n;
                // random density matrix via a random pure state ensemble
                let mut rho: Array2<Complex64> = Array2::zeros((d, d));
                for _ in 0..3 {
                    let v: Array1<Complex64> = Array1::from_iter(
                        (0..d).map(|_| Complex64::new(gaussian(&mut rng), gaussian(&mut rng))),
                    );
                    let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum();
                    rho = rho + outer(&v).mapv(|c| c / (3.0 * norm));
                }
                let a = kraus.apply(&rho).unwrap();
                let b = chi_form.apply(&rho).unwrap();
                for (x, y) in a.iter().zip(b.iter()) {
                    assert!((x - y).norm() < 1e-9, "Kraus vs χ disagree at n={n}");
                }
            }
        }
    }

    #[test]
    fn apply_preserves_trace_and_hermiticity() {
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..100 {
            use rand::Rng;
            let n = rng.gen_range(1..=3usize);
            let ch = random_kraus_channel(n, rng.gen_range(1..=4), &mut rng).unwrap();
            let d = 1usize << n;
            let v: Array1<Complex64> = Array1::from_iter(
                (0..d).map(|_| Complex64::new(gaussian(&mut rng), gaussian(&mut rng))),
            );
            let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            let rho = outer(&v).mapv(|c| c / norm);
            let out = ch.apply(&rho).unwrap();
            let tr: Complex64 = out.diag().sum();
            assert!((tr.re - 1.0).abs() < 1e-10 && tr.im.abs() < 1e-10);
            for i in 0..d {
                for j in 0..d {
                    assert!((out[(i, j)] - out[(j, i)].conj()).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn transition_probs_examples() {
        let design = MubDesign::new(1).unwrap();
        // identity channel: δ_{k',k}
        let probs = exact_transition_probs(
            &design,
            &identity_channel(1),
            &BasisId::ComputationalZ,
            &BitVector::parse("0").unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(probs[0], 1.0, epsilon = 1e-12);
        // bit flip p = 0.25 on |0⟩
        let probs = exact_transition_probs(
            &design,
            &bit_flip(0.25),
            &BasisId::ComputationalZ,
            &BitVector::parse("0").unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(probs[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(probs[1], 0.25, epsilon = 1e-12);
        // depolarize-to-uniform: Kraus {|i⟩⟨j|/√D} sends ρ → I/D
        let d = 2usize;
        let mut mats = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let mut a: Array2<Complex64> = Array2::zeros((d, d));
                a[(i, j)] = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
                mats.push(a);
            }
        }
        let uniform = QuantumChannel::kraus(1, mats).unwrap();
        for basis in design.bases() {
            let probs = exact_transition_probs(&design, &uniform, &basis, &BitVector::parse("1").unwrap()).unwrap();
            for q in probs {
                assert_abs_diff_eq!(q, 0.5, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn trajectory_and_dense_transition_distributions_match() {
        // For Pauli channels the trajectory path is exact: the dense
        // distribution must equal Σ_P p(P)·δ_{k', k⊕v_P(J)}.
        let mut rng = StdRng::seed_from_u64(11);
        for n in 1..=2usize {
            let design = MubDesign::new(n).unwrap();
            for _ in 0..3 {
                let ch = random_pauli_channel(n, 3, &mut rng);
                for basis in design.bases() {
                    let k = BitVector::zeros(n);
                    let dense = exact_transition_probs(&design, &ch, &basis, &k).unwrap();
                    let mut expected = vec![0.0; 1 << n];
                    for (op, prob) in ch.pauli_terms().unwrap() {
                        let v = design.commutation_vector(op, &basis).unwrap();
                        expected[computational_index(&k.xor(&v))] += prob;
                    }
                    for (a, b) in dense.iter().zip(expected.iter()) {
                        assert!((a - b).abs() < 1e-9, "n={n} {basis}");
                    }
                }
            }
        }
    }

    #[test]
    fn transition_experiment_deterministic_cases() {
        let design = MubDesign::new(3).unwrap();
        let mut rng = StdRng::seed_from_u64(0);
        let id = identity_channel(3);
        let flip = QuantumChannel::pauli(3, &[(p("XII"), 1.0)]).unwrap();
        for raw in 0..8u64 {
            let s = StateIndex { basis: BasisId::ComputationalZ, k: BitVector::from_raw(raw, 3) };
            let out = run_transition_experiment(&design, &id, &s, &mut rng).unwrap();
            assert_eq!(out.record.k_out, s.k);
            assert!(out.ancilla.is_none());
            let out = run_transition_experiment(&design, &flip, &s, &mut rng).unwrap();
            assert_eq!(out.record.k_out, s.k.xor(&BitVector::parse("100").unwrap()));
        }
    }

    #[test]
    fn sampled_transitions_match_exact_probs() {
        use rand::Rng;
        let mut seed_rng = StdRng::seed_from_u64(21);
        let shots = 20_000usize;
        for cfg in 0..6 {
            let n = 1 + cfg % 2;
            let design = MubDesign::new(n).unwrap();
            let ch = random_kraus_channel(n, 2, &mut seed_rng).unwrap();
            let basis = design.bases()[seed_rng.gen_range(0..design.dim() + 1)];
            let k = BitVector::from_raw(seed_rng.gen(), n);
            let exact = exact_transition_probs(&design, &ch, &basis, &k).unwrap();
            let mut counts = vec![0usize; 1 << n];
            let mut rng = StdRng::seed_from_u64(1000 + cfg as u64);
            let s = StateIndex { basis, k };
            for _ in 0..shots {
                let out = run_transition_experiment(&design, &ch, &s, &mut rng).unwrap();
                counts[computational_index(&out.record.k_out)] += 1;
            }
            // chi-square goodness of fit at the 0.001 level
            let mut stat = 0.0;
            let mut dof = 0usize;
            for (c, q) in counts.iter().zip(exact.iter()) {
                let e = q * shots as f64;
                if e > 1e-9 {
                    stat += (*c as f64 - e).powi(2) / e;
                    dof += 1;
                } else {
                    assert_eq!(*c, 0);
                }
            }
            if dof > 1 {
                use statrs::distribution::{ChiSquared, ContinuousCDF};
                let dist = ChiSquared::new((dof - 1) as f64).unwrap();
                let pval = 1.0 - dist.cdf(stat);
                assert!(pval > 0.001, "config {cfg}: chi2={stat:.2} dof={dof} p={pval:.5}");
            }
        }
    }

    #[test]
    fn fidelity_identity_keystone() {
        let mut rng = StdRng::seed_from_u64(31);
        for n in 1..=2usize {
            let design = MubDesign::new(n).unwrap();
            let d = design.dim() as f64;
            for _ in 0..3 {
                let ch = random_kraus_channel(n, 3, &mut rng).unwrap();
                let chi = ch.chi_matrix().unwrap();
                for m in 0..(1usize << (2 * n)) {
                    let op = pauli_by_index(m, n).unwrap();
                    let lhs = exact_survival_fidelity(&design, &ch, &op).unwrap();
                    let rhs = (d * chi[(m, m)].re + 1.0) / (d + 1.0);
                    assert!((lhs - rhs).abs() < 1e-9, "n={n} m={}", op.to_label());
                }
            }
        }
    }

    #[test]
    fn offdiag_identities_single_qubit_all_pairs() {
        let mut rng = StdRng::seed_from_u64(41);
        let design = MubDesign::new(1).unwrap();
        let d = 2.0f64;
        for _ in 0..3 {
            let ch = random_kraus_channel(1, 2, &mut rng).unwrap();
            let chi = ch.chi_matrix().unwrap();
            for m in 0..4usize {
                for mp in 0..4usize {
                    let om = pauli_by_index(m, 1).unwrap();
                    let omp = pauli_by_index(mp, 1).unwrap();
                    let ex = exact_offdiag_expectation(&design, &ch, &om, &omp, Axis::X).unwrap();
                    let ey = exact_offdiag_expectation(&design, &ch, &om, &omp, Axis::Y).unwrap();
                    let delta = if m == mp { 1.0 } else { 0.0 };
                    let want_x = (d * chi[(m, mp)].re + delta) / (d + 1.0);
                    let want_y = d * chi[(m, mp)].im / (d + 1.0);
                    assert!((ex - want_x).abs() < 1e-9, "σx m={m} mp={mp}");
                    assert!((ey - want_y).abs() < 1e-9, "σy m={m} mp={mp}");
                }
            }
        }
    }

    #[test]
    fn offdiag_identity_channel_trivial_case() {
        let design = MubDesign::new(1).unwrap();
        let id = identity_channel(1);
        let mut rng = StdRng::seed_from_u64(0);
        let s = StateIndex { basis: BasisId::ComputationalZ, k: BitVector::parse("0").unwrap() };
        for _ in 0..20 {
            let out = run_offdiag_experiment(
                &design,
                &id,
                &s,
                &PauliOperator::identity(1),
                &PauliOperator::identity(1),
                Axis::X,
                &mut rng,
            )
            .unwrap();
            assert_eq!(out.ancilla, Some(1));
            assert_eq!(out.record.k_out, s.k);
        }
    }

    #[test]
    fn offdiag_sampling_matches_exact_expectation() {
        // n=1 rotation by π/8: E[σy·survival] = D·Imχ_IX/(D+1) = 2·sin(π/8)cos(π/8)/3
        let design = MubDesign::new(1).unwrap();
        let theta = std::f64::consts::PI / 8.0;
        let ch = x_rotation(theta);
        let m = p("I");
        let mp = p("X");
        let exact = exact_offdiag_expectation(&design, &ch, &m, &mp, Axis::Y).unwrap();
        assert_abs_diff_eq!(exact, 2.0 * theta.sin() * theta.cos() / 3.0, epsilon = 1e-12);
        let mut rng = StdRng::seed_from_u64(77);
        let shots = 40_000usize;
        let mut sum = 0.0;
        for _ in 0..shots {
            use rand::Rng;
            let basis = design.bases()[rng.gen_range(0..3usize)];
            let k = BitVector::from_raw(rng.gen(), 1);
            let s = StateIndex { basis, k };
            let out = run_offdiag_experiment(&design, &ch, &s, &m, &mp, Axis::Y, &mut rng).unwrap();
            if out.record.k_out == s.k {
                sum += f64::from(out.ancilla.unwrap());
            }
        }
        let mean = sum / shots as f64;
        let sigma = (1.0 / shots as f64).sqrt();
        assert!((mean - exact).abs() < 4.0 * sigma, "mean={mean} exact={exact}");
    }

    #[test]
    fn chi_validation_rules() {
        let d2 = 4usize;
        let mut good: Array2<Complex64> = Array2::zeros((d2, d2));
        good[(0, 0)] = Complex64::new(0.75, 0.0);
        good[(1, 1)] = Complex64::new(0.25, 0.0);
        assert!(QuantumChannel::chi(1, good.clone()).is_ok());
        let mut non_herm = good.clone();
        non_herm[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(QuantumChannel::chi(1, non_herm).is_err());
        let mut neg = good.clone();
        neg[(0, 1)] = Complex64::new(0.5, 0.0);
        neg[(1, 0)] = Complex64::new(0.5, 0.0); // eigenvalues 1.0 and 0.0... make it negative
        neg[(1, 1)] = Complex64::new(0.25, 0.0);
        neg[(0, 0)] = Complex64::new(0.75, 0.0);
        // eigenvalues of [[.75,.5],[.5,.25]] block: trace 1, det −0.0625 → one negative
        assert!(QuantumChannel::chi(1, neg).is_err());
        let mut bad_trace = good;
        bad_trace[(1, 1)] = Complex64::new(0.5, 0.0);
        assert!(QuantumChannel::chi(1, bad_trace).is_err());
    }

    #[test]
    fn jacobi_eigenvalues_sanity() {
        let a = ndarray::array![
            [Complex64::new(2.0, 0.0), Complex64::new(0.0, -1.0)],
            [Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.0)]
        ];
        let mut eigs = hermitian_eigenvalues(&a).unwrap();
        eigs.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(eigs[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eigs[1], 3.0, epsilon = 1e-10);
        // invariants on a random Hermitian matrix
        let mut rng = StdRng::seed_from_u64(9);
        let n = 6;
        let mut h: Array2<Complex64> = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = Complex64::new(gaussian(&mut rng), if i == j { 0.0 } else { gaussian(&mut rng) });
                h[(i, j)] = v;
                h[(j, i)] = v.conj();
            }
        }
        let eigs = hermitian_eigenvalues(&h).unwrap();
        let tr: f64 = (0..n).map(|i| h[(i, i)].re).sum();
        let fro: f64 = h.iter().map(|c| c.norm_sqr()).sum();
        assert_abs_diff_eq!(eigs.iter().sum::<f64>(), tr, epsilon = 1e-9);
        assert_abs_diff_eq!(eigs.iter().map(|e| e * e).sum::<f64>(), fro, epsilon = 1e-9);
    }

    #[test]
    fn random_kraus_channel_is_trace_preserving() {
        let mut rng = StdRng::seed_from_u64(17);
        for n in 1..=3usize {
            for k in 1..=3usize {
                assert!(random_kraus_channel(n, k, &mut rng).is_ok());
            }
        }
    }

    #[test]
    fn channel_spec_round_trip_and_errors() {
        let text = r#"{"n": 2, "channel": {"type": "pauli", "probs": {"II": 0.85, "XI": 0.10, "ZZ": 0.05}}}"#;
        let spec = ChannelSpec::parse(text).unwrap();
        let ch = spec.build().unwrap();
        assert!(ch.is_pauli());
        assert_eq!(ch.qubits(), 2);
        let re = ChannelSpec::parse(&spec.to_json()).unwrap().build().unwrap();
        assert_eq!(re.pauli_terms().unwrap().len(), 3);

        let bad_label = r#"{"n": 2, "channel": {"type": "pauli", "probs": {"QQ": 1.0}}}"#;
        match ChannelSpec::parse(bad_label).unwrap().build() {
            Err(Error::ChannelSpec { field, .. }) => assert_eq!(field, "channel.probs.QQ"),
            other => panic!("expected field error, got {other:?}"),
        }
        let bad_sum = r#"{"n": 1, "channel": {"type": "pauli", "probs": {"I": 0.5}}}"#;
        assert!(ChannelSpec::parse(bad_sum).unwrap().build().is_err());
        let bad_dim = r#"{"n": 1, "channel": {"type": "unitary", "matrix": [[[1,0]]]}}"#;
        assert!(ChannelSpec::parse(bad_dim).unwrap().build().is_err());
        assert!(ChannelSpec::parse("{not json").is_err());

        let unitary = r#"{"n": 1, "channel": {"type": "unitary", "matrix": [[[0,0],[1,0]],[[1,0],[0,0]]]}}"#;
        let ch = ChannelSpec::parse(unitary).unwrap().build().unwrap();
        let chi = ch.chi_matrix().unwrap();
        let mx = pauli_index(&p("X"));
        assert_abs_diff_eq!(chi[(mx, mx)].re, 1.0, epsilon = 1e-12);
    }
}
