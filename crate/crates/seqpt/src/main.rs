//! Command-line front end for selective process tomography runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use seqpt::channel::{ChannelSpec, QuantumChannel};
use seqpt::circuit::{self, ExportFormat};
use seqpt::error::Error;
use seqpt::estimator::{self, ComplexEstimate, Estimate};
use seqpt::gf2::{primitive_companion, BitVector};
use seqpt::mub::MubDesign;
use seqpt::pauli::PauliOperator;

#[derive(Parser)]
#[command(
    name = "seqpt",
    version,
    about = "Selective quantum process tomography on a simulated channel",
    propagate_version = true
)]
struct Cli {
    /// Master seed; every shot i draws from stream i of this seed.
    #[arg(long, global = true, env = "SEQPT_SEED", default_value_t = 0)]
    seed: u64,

    /// Worker threads for shot execution (default: all cores). Results are
    /// bit-identical for any thread count.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ChannelArg {
    /// Channel specification file (JSON).
    #[arg(long)]
    channel: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate diagonal χ-matrix elements χ_mm.
    EstimateDiag {
        #[command(flatten)]
        channel: ChannelArg,
        /// Comma-separated Pauli labels, e.g. "II,XI,ZZ".
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<String>,
        #[command(flatten)]
        budget: ChernoffBudget,
    },
    /// Estimate one off-diagonal element χ_mm' via the ancilla circuit.
    EstimateOffdiag {
        #[command(flatten)]
        channel: ChannelArg,
        /// The two Pauli labels m,m'.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        targets: Vec<String>,
        /// Shot budget, split evenly between the σx and σy runs; odd values
        /// are rounded up.
        #[arg(long)]
        samples: usize,
    },
    /// Run one transition scan and reuse it for any number of targets.
    Scan {
        #[command(flatten)]
        channel: ChannelArg,
        #[command(flatten)]
        budget: ScanBudget,
        /// Where to write the record lines `J k_in k_out`.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Pauli labels to estimate from the scan, or "all-weight-1".
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        /// Also run large-coefficient detection on the scan.
        #[arg(long)]
        detect: bool,
    },
    /// Detect the Paulis with large diagonal coefficients.
    Detect {
        #[command(flatten)]
        channel: ChannelArg,
        #[arg(long)]
        samples: usize,
    },
    /// Print the change-of-basis circuit for one MUB.
    SynthBasis {
        /// Register size (1..=32 with the built-in polynomial table).
        #[arg(long)]
        n: usize,
        /// Basis label b as a bitstring, e.g. "101".
        #[arg(long)]
        b: String,
        #[arg(long, value_enum, default_value_t = CircuitFormat::Plain)]
        format: CircuitFormat,
    },
    /// Dump the exact ground-truth χ-matrix (n ≤ 3).
    ChiOracle {
        #[command(flatten)]
        channel: ChannelArg,
    },
}

/// Explicit sample count, or the Chernoff budget M ≥ ln[2(1−p)⁻¹]/(2ε²).
#[derive(Args)]
struct ChernoffBudget {
    #[arg(long, conflicts_with_all = ["eps", "p"])]
    samples: Option<usize>,
    /// Additive error ε on the survival frequency (requires --p).
    #[arg(long, requires = "p")]
    eps: Option<f64>,
    /// Confidence level p for the Chernoff budget.
    #[arg(long, requires = "eps")]
    p: Option<f64>,
}

impl ChernoffBudget {
    fn resolve(&self) -> Result<usize, Error> {
        match (self.samples, self.eps, self.p) {
            (Some(m), None, None) => Ok(m),
            (None, Some(eps), Some(p)) => estimator::chernoff_samples(eps, p),
            _ => Err(Error::invalid("give either --samples or --eps with --p")),
        }
    }
}

/// Explicit sample count, or the full-diagonal budget
/// M ≥ 2(D + 1/ε)(D+1)/(D²δ²(1−P)).
#[derive(Args)]
struct ScanBudget {
    #[arg(long, conflicts_with_all = ["eps", "delta", "bigp"])]
    samples: Option<usize>,
    /// Additive error ε (requires --delta and --bigp).
    #[arg(long, requires = "delta", requires = "bigp")]
    eps: Option<f64>,
    /// Relative precision δ on each diagonal coefficient.
    #[arg(long, requires = "eps")]
    delta: Option<f64>,
    /// Simultaneous success probability P.
    #[arg(long, requires = "eps")]
    bigp: Option<f64>,
}

impl ScanBudget {
    fn resolve(&self, dim: usize) -> Result<usize, Error> {
        match (self.samples, self.eps, self.delta, self.bigp) {
            (Some(m), None, None, None) => Ok(m),
            (None, Some(eps), Some(delta), Some(bigp)) => {
                estimator::samples_for_full_diag(eps, delta, bigp, dim)
            }
            _ => Err(Error::invalid("give either --samples or --eps/--delta/--bigp")),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CircuitFormat {
    Plain,
    Qasm,
}

#[derive(Serialize)]
struct TargetReport {
    pauli_label: String,
    #[serde(flatten)]
    estimate: Estimate,
    seed: u64,
}

#[derive(Serialize)]
struct OffdiagTargetReport {
    pauli_labels: [String; 2],
    re: Estimate,
    im: Estimate,
    seed: u64,
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    tool_version: &'static str,
    command: &'static str,
    seed: u64,
    channel_digest: String,
    n_qubits: usize,
    #[serde(flatten)]
    body: T,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore failure: the pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Internal(_) | Error::SingularMatrix => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::EstimateDiag { channel, targets, budget } => {
            let (ch, digest) = load_channel(&channel.channel)?;
            let design = MubDesign::new(ch.qubits())?;
            let samples = budget.resolve()?;
            let targets = parse_targets(targets, ch.qubits())?;
            let mut rows = Vec::with_capacity(targets.len());
            for (i, m) in targets.iter().enumerate() {
                let seed = cli.seed.wrapping_add(i as u64);
                let e = estimator::estimate_diag(&design, &ch, m, samples, seed)?;
                rows.push(TargetReport { pauli_label: m.to_label(), estimate: e, seed });
            }
            emit(cli, report(cli, "estimate-diag", digest, ch.qubits(), DiagBody { targets: rows }))
        }
        Command::EstimateOffdiag { channel, targets, samples } => {
            let (ch, digest) = load_channel(&channel.channel)?;
            let design = MubDesign::new(ch.qubits())?;
            let targets = parse_targets(targets, ch.qubits())?;
            let [m, mp]: [PauliOperator; 2] = targets
                .try_into()
                .map_err(|_| Error::invalid("--targets must name exactly two Paulis"))?;
            if samples % 2 == 1 {
                eprintln!("warning: odd --samples {samples} rounded up to {}", samples + 1);
            }
            let e: ComplexEstimate =
                estimator::estimate_offdiag(&design, &ch, &m, &mp, *samples, cli.seed)?;
            let row = OffdiagTargetReport {
                pauli_labels: [m.to_label(), mp.to_label()],
                re: e.re,
                im: e.im,
                seed: cli.seed,
            };
            emit(cli, report(cli, "estimate-offdiag", digest, ch.qubits(), OffdiagBody { target: row }))
        }
        Command::Scan { channel, budget, records, targets, detect } => {
            let (ch, digest) = load_channel(&channel.channel)?;
            let design = MubDesign::new(ch.qubits())?;
            let samples = budget.resolve(design.dim())?;
            let scan = estimator::collect_scan(&design, &ch, samples, cli.seed)?;
            if let Some(path) = records {
                let mut text = String::new();
                for r in &scan {
                    text.push_str(&r.to_line());
                    text.push('\n');
                }
                fs::write(path, text)?;
            }
            let target_ops = resolve_scan_targets(targets, ch.qubits())?;
            let mut rows = Vec::with_capacity(target_ops.len());
            for m in &target_ops {
                let e = estimator::estimate_diag_from_records(&design, &scan, m)?;
                rows.push(TargetReport { pauli_label: m.to_label(), estimate: e, seed: cli.seed });
            }
            let detection = if *detect {
                Some(detection_body(&design, &scan)?)
            } else {
                None
            };
            emit(
                cli,
                report(
                    cli,
                    "scan",
                    digest,
                    ch.qubits(),
                    ScanBody { n_records: scan.len(), targets: rows, detection },
                ),
            )
        }
        Command::Detect { channel, samples } => {
            let (ch, digest) = load_channel(&channel.channel)?;
            let design = MubDesign::new(ch.qubits())?;
            let scan = estimator::collect_scan(&design, &ch, *samples, cli.seed)?;
            let body = detection_body(&design, &scan)?;
            emit(cli, report(cli, "detect", digest, ch.qubits(), body))
        }
        Command::SynthBasis { n, b, format } => {
            let b = BitVector::parse(b)?;
            if b.len() != *n {
                return Err(Error::SizeMismatch { expected: *n, got: b.len() });
            }
            let m = primitive_companion(*n)?;
            let result = circuit::synthesize_change_of_basis(&b, &m)?;
            let format = match format {
                CircuitFormat::Plain => ExportFormat::Plain,
                CircuitFormat::Qasm => ExportFormat::QasmLike,
            };
            write_text(cli, &result.circuit.export(format))
        }
        Command::ChiOracle { channel } => {
            let (ch, digest) = load_channel(&channel.channel)?;
            let chi = ch.chi_matrix()?;
            let d2 = chi.dim().0;
            let labels: Vec<String> = (0..d2)
                .map(|m| Ok(seqpt::channel::pauli_by_index(m, ch.qubits())?.to_label()))
                .collect::<Result<_, Error>>()?;
            let matrix: Vec<Vec<[f64; 2]>> = (0..d2)
                .map(|i| (0..d2).map(|j| [chi[(i, j)].re, chi[(i, j)].im]).collect())
                .collect();
            emit(cli, report(cli, "chi-oracle", digest, ch.qubits(), ChiBody { labels, matrix }))
        }
    }
}

#[derive(Serialize)]
struct DiagBody {
    targets: Vec<TargetReport>,
}

#[derive(Serialize)]
struct OffdiagBody {
    target: OffdiagTargetReport,
}

#[derive(Serialize)]
struct ScanBody {
    n_records: usize,
    targets: Vec<TargetReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detection: Option<DetectionBody>,
}

#[derive(Serialize)]
struct DetectionBody {
    unreliable: bool,
    candidates: Vec<TargetReport>,
}

#[derive(Serialize)]
struct ChiBody {
    labels: Vec<String>,
    matrix: Vec<Vec<[f64; 2]>>,
}

fn detection_body(
    design: &MubDesign,
    scan: &[estimator::ExperimentRecord],
) -> Result<DetectionBody, Error> {
    let report = estimator::detect_large_coefficients(design, scan)?;
    Ok(DetectionBody {
        unreliable: report.unreliable,
        candidates: report
            .candidates
            .into_iter()
            .map(|c| TargetReport {
                pauli_label: c.operator.to_label(),
                estimate: c.estimate,
                seed: 0,
            })
            .collect(),
    })
}

fn report<T: Serialize>(
    cli: &Cli,
    command: &'static str,
    digest: String,
    n_qubits: usize,
    body: T,
) -> Report<T> {
    Report {
        tool_version: seqpt::VERSION,
        command,
        seed: cli.seed,
        channel_digest: digest,
        n_qubits,
        body,
    }
}

fn load_channel(path: &Path) -> Result<(QuantumChannel, String), Error> {
    let bytes = fs::read(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    let digest = hex(&Sha256::digest(&bytes));
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::invalid(format!("{} is not UTF-8", path.display())))?;
    Ok((ChannelSpec::parse(&text)?.build()?, digest))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_targets(labels: &[String], n: usize) -> Result<Vec<PauliOperator>, Error> {
    labels
        .iter()
        .map(|l| {
            let op = PauliOperator::from_label(l)?;
            if op.qubits() != n {
                return Err(Error::invalid(format!(
                    "target {l} has {} qubits, channel has {n}",
                    op.qubits()
                )));
            }
            Ok(op)
        })
        .collect()
}

fn resolve_scan_targets(labels: &[String], n: usize) -> Result<Vec<PauliOperator>, Error> {
    if labels.len() == 1 && labels[0] == "all-weight-1" {
        let mut out = Vec::new();
        for q in 0..n {
            for pauli in ["X", "Y", "Z"] {
                let mut label = "I".repeat(n);
                label.replace_range(q..q + 1, pauli);
                out.push(PauliOperator::from_label(&label)?);
            }
        }
        return Ok(out);
    }
    parse_targets(labels, n)
}

fn emit<T: Serialize>(cli: &Cli, report: Report<T>) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_text(cli, &text)
}

fn write_text(cli: &Cli, text: &str) -> Result<(), Error> {
    match &cli.output {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
