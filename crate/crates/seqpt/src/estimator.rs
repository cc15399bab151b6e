//! Monte Carlo estimation of χ-matrix elements.
//!
//! Everything here runs on top of the channel simulator: sample budgets,
//! diagonal estimation via survival counting, off-diagonal estimation via the
//! ancilla circuit, replay of stored transition records, and detection of
//! large diagonal coefficients by pairwise GF(2) solving.
//!
//! Determinism contract: shot `i` always draws from an independent ChaCha8
//! stream `i` of the master seed, so concurrent and sequential execution
//! produce bit-identical results.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{self, Axis, QuantumChannel};
use crate::error::{Error, Result};
use crate::gf2::{solve_linear, BitMatrix, BitVector};
use crate::mub::{BasisId, MubDesign, StateIndex};
use crate::pauli::PauliOperator;

/// One transition event `(J, k⃗, k⃗′)`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ExperimentRecord {
    pub basis: BasisId,
    pub k_in: BitVector,
    pub k_out: BitVector,
}

impl ExperimentRecord {
    pub fn new(basis: BasisId, k_in: BitVector, k_out: BitVector) -> Result<Self> {
        if k_in.len() != k_out.len() {
            return Err(Error::SizeMismatch { expected: k_in.len(), got: k_out.len() });
        }
        Ok(ExperimentRecord { basis, k_in, k_out })
    }

    pub fn qubits(&self) -> usize {
        self.k_in.len()
    }

    pub fn survived(&self) -> bool {
        self.k_in == self.k_out
    }

    /// `k_out ⊕ k_in`, the observed transition.
    pub fn delta(&self) -> BitVector {
        self.k_in.xor(&self.k_out)
    }

    /// Line form `J k_in k_out`.
    pub fn to_line(&self) -> String {
        format!("{} {} {}", self.basis.label(), self.k_in, self.k_out)
    }

    pub fn parse_line(line: &str, n: usize) -> Result<Self> {
        let mut parts = line.split_whitespace();
        let (Some(b), Some(kin), Some(kout), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::invalid(format!("bad record line '{line}'")));
        };
        let basis = BasisId::parse(b, n)?;
        let k_in = BitVector::parse(kin)?;
        let k_out = BitVector::parse(kout)?;
        if k_in.len() != n || k_out.len() != n {
            return Err(Error::SizeMismatch { expected: n, got: k_in.len() });
        }
        ExperimentRecord::new(basis, k_in, k_out)
    }
}

/// A point estimate with its Bernoulli-style standard error.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub raw_count: usize,
}

/// Off-diagonal estimate: real and imaginary parts with per-component errors.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ComplexEstimate {
    pub re: Estimate,
    pub im: Estimate,
}

/// Smallest M with `M ≥ ln[2(1−p)⁻¹]/(2ε²)`: enough samples to know a
/// survival frequency to within ε with confidence p.
pub fn chernoff_samples(eps: f64, p: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("ε={eps} out of (0,1)")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p={p} out of (0,1)")));
    }
    Ok(((2.0 / (1.0 - p)).ln() / (2.0 * eps * eps)).ceil() as usize)
}

/// Sample budget for simultaneously estimating every diagonal coefficient to
/// relative precision δ with probability P:
/// `M ≥ 2(D + 1/ε)(D+1)/(D²δ²(1−P))`. For ε ≫ 1/D this simplifies to
/// [`samples_for_full_diag_simplified`].
pub fn samples_for_full_diag(eps: f64, delta: f64, big_p: f64, d: usize) -> Result<usize> {
    if !(eps > 0.0) || !(delta > 0.0) {
        return Err(Error::invalid("ε and δ must be positive"));
    }
    if !(big_p > 0.0 && big_p < 1.0) {
        return Err(Error::invalid(format!("P={big_p} out of (0,1)")));
    }
    if d < 2 || !d.is_power_of_two() {
        return Err(Error::invalid(format!("D={d} is not a power of two ≥ 2")));
    }
    let df = d as f64;
    let m = 2.0 * (df + 1.0 / eps) * (df + 1.0) / (df * df * delta * delta * (1.0 - big_p));
    Ok(m.ceil() as usize)
}

/// The D → ∞ simplification `M ≥ 2/(δ²(1−P))`.
pub fn samples_for_full_diag_simplified(delta: f64, big_p: f64) -> Result<usize> {
    if !(delta > 0.0) {
        return Err(Error::invalid("δ must be positive"));
    }
    if !(big_p > 0.0 && big_p < 1.0) {
        return Err(Error::invalid(format!("P={big_p} out of (0,1)")));
    }
    Ok((2.0 / (delta * delta * (1.0 - big_p))).ceil() as usize)
}

/// Independent RNG stream for shot `shot` of master seed `master`.
pub fn shot_rng(master: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(shot);
    rng
}

/// Uniform draw over all D(D+1) design states: basis first, then index.
pub fn sample_state_index(design: &MubDesign, rng: &mut impl Rng) -> StateIndex {
    let n = design.qubits();
    let which = rng.gen_range(0..=(1u64 << n));
    let basis = if which == 0 {
        BasisId::ComputationalZ
    } else {
        BasisId::MubB(BitVector::from_raw(which - 1, n))
    };
    let k = BitVector::from_raw(rng.gen_range(0..(1u64 << n)), n);
    StateIndex { basis, k }
}

/// Runs `shots` transition experiments on independently sampled design
/// states. Shots execute in parallel but are keyed by index, so the record
/// list is identical for a fixed seed regardless of thread count.
pub fn collect_scan(
    design: &MubDesign,
    ch: &QuantumChannel,
    shots: usize,
    master_seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    if shots == 0 {
        return Err(Error::invalid("need at least one shot"));
    }
    (0..shots as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = shot_rng(master_seed, i);
            let s = sample_state_index(design, &mut rng);
            Ok(channel::run_transition_experiment(design, ch, &s, &mut rng)?.record)
        })
        .collect()
}

/// Replays stored records against target `m`: a shot counts toward the
/// fidelity iff its transition equals the commutation vector of `E_m` in the
/// shot's basis. Returns `χ̂ = ((D+1)·F̂ − 1)/D`.
pub fn estimate_diag_from_records(
    design: &MubDesign,
    records: &[ExperimentRecord],
    m: &PauliOperator,
) -> Result<Estimate> {
    if records.is_empty() {
        return Err(Error::invalid("record list is empty"));
    }
    if m.qubits() != design.qubits() {
        return Err(Error::SizeMismatch { expected: design.qubits(), got: m.qubits() });
    }
    let mut vectors: HashMap<BasisId, BitVector> = HashMap::new();
    let mut count = 0usize;
    for r in records {
        if r.qubits() != design.qubits() {
            return Err(Error::SizeMismatch { expected: design.qubits(), got: r.qubits() });
        }
        let v = match vectors.get(&r.basis) {
            Some(v) => *v,
            None => {
                let v = design.commutation_vector(m, &r.basis)?;
                vectors.insert(r.basis, v);
                v
            }
        };
        if r.delta() == v {
            count += 1;
        }
    }
    Ok(diag_estimate_from_count(count, records.len(), design.dim()))
}

fn diag_estimate_from_count(count: usize, shots: usize, dim: usize) -> Estimate {
    let m = shots as f64;
    let d = dim as f64;
    let f_hat = count as f64 / m;
    let stderr_f = (f_hat * (1.0 - f_hat) / m).sqrt();
    Estimate {
        value: ((d + 1.0) * f_hat - 1.0) / d,
        stderr: (d + 1.0) / d * stderr_f,
        n_samples: shots,
        raw_count: count,
    }
}

/// Monte Carlo estimate of the diagonal element `χ_mm` from `shots`
/// transition experiments.
pub fn estimate_diag(
    design: &MubDesign,
    ch: &QuantumChannel,
    m: &PauliOperator,
    shots: usize,
    master_seed: u64,
) -> Result<Estimate> {
    let records = collect_scan(design, ch, shots, master_seed)?;
    estimate_diag_from_records(design, &records, m)
}

/// Monte Carlo estimate of the off-diagonal element `χ_{mm'}`. Half the
/// budget measures the ancilla along σx (real part), half along σy
/// (imaginary part); odd budgets are rounded up to the next even number.
pub fn estimate_offdiag(
    design: &MubDesign,
    ch: &QuantumChannel,
    m: &PauliOperator,
    mp: &PauliOperator,
    shots: usize,
    master_seed: u64,
) -> Result<ComplexEstimate> {
    if shots < 2 {
        return Err(Error::invalid("off-diagonal estimation needs at least 2 shots"));
    }
    let total = shots + (shots & 1);
    let half = total / 2;
    let values: Vec<(bool, f64)> = (0..total as u64)
        .into_par_iter()
        .map(|i| {
            let axis = if (i as usize) < half { Axis::X } else { Axis::Y };
            let mut rng = shot_rng(master_seed, i);
            let s = sample_state_index(design, &mut rng);
            let out = channel::run_offdiag_experiment(design, ch, &s, m, mp, axis, &mut rng)?;
            let survived = out.record.survived();
            let v = if survived {
                f64::from(out.ancilla.ok_or_else(|| Error::Internal("missing ancilla".into()))?)
            } else {
                0.0
            };
            Ok(((i as usize) < half, v))
        })
        .collect::<Result<_>>()?;
    let d = design.dim() as f64;
    let delta = if m.canonical() == mp.canonical() { 1.0 } else { 0.0 };
    let part = |want_x: bool, scale: f64, offset: f64| {
        let vs: Vec<f64> =
            values.iter().filter(|(is_x, _)| *is_x == want_x).map(|(_, v)| *v).collect();
        let mf = vs.len() as f64;
        let mean = vs.iter().sum::<f64>() / mf;
        // v ∈ {−1, 0, 1} so E[v²] is the survival rate
        let var = (vs.iter().map(|v| v * v).sum::<f64>() / mf - mean * mean).max(0.0);
        Estimate {
            value: scale * mean + offset,
            stderr: scale.abs() * (var / mf).sqrt(),
            n_samples: vs.len(),
            raw_count: vs.iter().filter(|v| **v != 0.0).count(),
        }
    };
    Ok(ComplexEstimate {
        // E[σx·survival] = (D·Reχ + δ)/(D+1); E[σy·survival] = D·Imχ/(D+1)
        re: part(true, (d + 1.0) / d, -delta / d),
        im: part(false, (d + 1.0) / d, 0.0),
    })
}

/// Recovers the unique Pauli consistent with two transition records from
/// *different* bases. Writing `E = ∏ J_i^{q_i} · ∏ J'_j^{q'_j}`, the
/// observed transitions give the linear systems `C·q′ = k_out⊕k_in` (first
/// record) and `Cᵀ·q = k'_out⊕k'_in` (second), with
/// `C_{ij} = sympl(J_i, J'_j)`. Returns `None` when the bases coincide
/// (the paper's degenerate "0 or D solutions" case).
pub fn solve_pair(
    design: &MubDesign,
    r1: &ExperimentRecord,
    r2: &ExperimentRecord,
) -> Result<Option<PauliOperator>> {
    let n = design.qubits();
    if r1.qubits() != n || r2.qubits() != n {
        return Err(Error::SizeMismatch { expected: n, got: r1.qubits().min(r2.qubits()) });
    }
    if r1.basis == r2.basis {
        return Ok(None);
    }
    let g1 = design.canonical_generators(&r1.basis)?;
    let g2 = design.canonical_generators(&r2.basis)?;
    let c = commutation_matrix(&g1, &g2)?;
    Ok(Some(solve_pair_with(&g1, &g2, &c, &r1.delta(), &r2.delta())?))
}

fn commutation_matrix(g1: &[PauliOperator], g2: &[PauliOperator]) -> Result<BitMatrix> {
    let n = g1.len();
    let mut c = BitMatrix::zeros(n);
    for (i, a) in g1.iter().enumerate() {
        for (j, b) in g2.iter().enumerate() {
            c.set(i, j, a.symplectic_product(b)? == 1);
        }
    }
    Ok(c)
}

fn solve_pair_with(
    g1: &[PauliOperator],
    g2: &[PauliOperator],
    c: &BitMatrix,
    delta1: &BitVector,
    delta2: &BitVector,
) -> Result<PauliOperator> {
    // A singular C would contradict the MUB construction; surface it as an
    // internal invariant violation rather than a user error.
    let remap = |e| match e {
        Error::SingularMatrix => {
            Error::Internal("commutation matrix between distinct bases is singular".into())
        }
        other => other,
    };
    let qp = solve_linear(c, delta1).map_err(remap)?;
    let q = solve_linear(&c.transpose(), delta2).map_err(remap)?;
    let n = g1.len();
    let mut e = PauliOperator::identity(n);
    for i in 0..n {
        if q.get(i) {
            e = e.multiply(&g1[i])?;
        }
    }
    for j in 0..n {
        if qp.get(j) {
            e = e.multiply(&g2[j])?;
        }
    }
    Ok(e.canonical())
}

/// One detected coefficient.
#[derive(Clone, Debug)]
pub struct Detection {
    pub operator: PauliOperator,
    pub estimate: Estimate,
}

/// Detection output. `unreliable` is set when the result carries no signal:
/// either the candidate list exceeds half the record count, or no candidate
/// rises above both its own noise floor (4σ) and the uniform-channel level
/// 2/D² — the regime where all diagonal coefficients are ≈ 1/D² and pairwise
/// solving returns essentially random operators.
#[derive(Clone, Debug)]
pub struct DetectionReport {
    pub candidates: Vec<Detection>,
    pub unreliable: bool,
}

/// Scans all cross-basis record pairs, solves each for its candidate Pauli,
/// dedupes, and re-estimates every candidate (plus the identity) against the
/// full record set. Candidates with fewer than 2 matching records
/// (F̂ < 2/M) are dropped; survivors are sorted by descending χ̂.
pub fn detect_large_coefficients(
    design: &MubDesign,
    records: &[ExperimentRecord],
) -> Result<DetectionReport> {
    if records.len() < 2 {
        return Err(Error::invalid("detection needs at least two records"));
    }
    let n = design.qubits();
    let mut generators: HashMap<BasisId, Vec<PauliOperator>> = HashMap::new();
    for r in records {
        if r.qubits() != n {
            return Err(Error::SizeMismatch { expected: n, got: r.qubits() });
        }
        if !generators.contains_key(&r.basis) {
            generators.insert(r.basis, design.canonical_generators(&r.basis)?);
        }
    }
    let mut c_cache: HashMap<(BasisId, BasisId), BitMatrix> = HashMap::new();
    // The solve depends only on (bases, deltas); memoize so the O(M²) pair
    // loop degenerates to hash lookups.
    let mut solved: HashMap<(BasisId, BasisId, u64, u64), PauliOperator> = HashMap::new();
    let mut candidates: HashMap<(u64, u64), PauliOperator> = HashMap::new();
    let id = PauliOperator::identity(n);
    candidates.insert((0, 0), id);
    for (i, r1) in records.iter().enumerate() {
        for r2 in records.iter().skip(i + 1) {
            if r1.basis == r2.basis {
                continue;
            }
            let key = (r1.basis, r2.basis, r1.delta().raw(), r2.delta().raw());
            let op = match solved.get(&key) {
                Some(op) => *op,
                None => {
                    let c = match c_cache.get(&(r1.basis, r2.basis)) {
                        Some(c) => c.clone(),
                        None => {
                            let c = commutation_matrix(&generators[&r1.basis], &generators[&r2.basis])?;
                            c_cache.insert((r1.basis, r2.basis), c.clone());
                            c
                        }
                    };
                    let op = solve_pair_with(
                        &generators[&r1.basis],
                        &generators[&r2.basis],
                        &c,
                        &r1.delta(),
                        &r2.delta(),
                    )?;
                    solved.insert(key, op);
                    op
                }
            };
            candidates.insert((op.x_bits().raw(), op.z_bits().raw()), op);
        }
    }
    let mut kept: Vec<Detection> = Vec::new();
    for op in candidates.values() {
        let estimate = estimate_diag_from_records(design, records, op)?;
        if estimate.raw_count >= 2 {
            kept.push(Detection { operator: *op, estimate });
        }
    }
    kept.sort_by(|a, b| {
        b.estimate
            .value
            .total_cmp(&a.estimate.value)
            .then_with(|| a.operator.to_label().cmp(&b.operator.to_label()))
    });
    let d2 = (design.dim() * design.dim()) as f64;
    let signal = kept.iter().any(|c| {
        c.estimate.value >= (4.0 * c.estimate.stderr).max(2.0 / d2)
    });
    let unreliable = kept.len() * 2 > records.len() || !signal;
    Ok(DetectionReport { candidates: kept, unreliable })
}
