//! `psdrank` command-line tool.
//!
//! Exit codes: 0 affirmative or pass, 1 negative or fail, 2 usage or input
//! error, 3 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use psdrank::bounds::{psd_rank_interval, sqrt_rank_exact, BoundsOptions};
use psdrank::cpsd::{dnn_check, horn_certificate, verify_cpsd};
use psdrank::factorization::{hermitian_embed, rescale_john, rescale_trace, verify, RealFactorization};
use psdrank::format::{
    factorization_json, matrix_json, parse_factorization, parse_gram, parse_nonnegative, parse_protocol,
    parse_sdp, parse_symmetric, protocol_json, to_json, AnyFactorization,
};
use psdrank::geometry::{
    circulant_region, decide_psd_rank_le_2, factorization_from_ellipse, nested_rect_region, Ellipse, RegionPoint,
    SandwichPair,
};
use psdrank::matgen::{generate, FamilySpec};
use psdrank::quantum::{from_protocol, sample, to_protocol, total_variation, verify_protocol};
use psdrank::sdp::{solve, SdpParams, SdpStatus};
use psdrank::{Error, NonnegativeMatrix, Tolerance};
use serde_json::json;

#[derive(Parser)]
#[command(name = "psdrank", version, about = "Positive semidefinite rank toolkit")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct RunConfig {
    /// Numerical tolerance.
    #[arg(long, global = true, env = "PSDRANK_TOL", default_value_t = 1e-9)]
    tol: f64,
    /// Largest number of free sign bits the square-root rank search may enumerate.
    #[arg(long, global = true, env = "PSDRANK_SQRT_BUDGET", default_value_t = 20)]
    sqrt_budget: usize,
    /// Duality-gap tolerance for `sdp-solve`.
    #[arg(long, global = true, env = "PSDRANK_SDP_GAP", default_value_t = 1e-8)]
    sdp_gap: f64,
    /// Feasibility tolerance for `sdp-solve`.
    #[arg(long, global = true, env = "PSDRANK_SDP_FEAS", default_value_t = 1e-7)]
    sdp_feas: f64,
    #[arg(long, global = true, env = "PSDRANK_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Write a matrix from one of the built-in families.
    Gen {
        #[command(subcommand)]
        family: Family,
        #[arg(short, long, global = true)]
        output: Option<PathBuf>,
    },
    /// Lower and upper bounds on psd rank with certificates.
    Bounds {
        matrix: PathBuf,
        /// Extra factorization files to use as upper-bound certificates.
        #[arg(long = "fact")]
        facts: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decide whether psd rank is at most two; exit 0 if so, 1 if not.
    Rank2 {
        matrix: PathBuf,
        #[arg(short, long, default_value = "ellipse.json")]
        output: PathBuf,
    },
    /// Build a size-2 factorization from a `rank2` certificate.
    ExtractFact {
        matrix: PathBuf,
        certificate: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a factorization against a matrix.
    Verify { matrix: PathBuf, factorization: PathBuf },
    /// Exact square-root rank by sign enumeration.
    SqrtRank {
        matrix: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rescale a factorization.
    Rescale {
        matrix: PathBuf,
        factorization: PathBuf,
        #[arg(long, value_enum, default_value_t = RescaleMode::John)]
        mode: RescaleMode,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Quantum correlation protocols from factorizations.
    Quantum {
        #[command(subcommand)]
        op: QuantumOp,
    },
    /// Completely psd matrices.
    Cpsd {
        #[command(subcommand)]
        op: CpsdOp,
    },
    /// Rank-two decision over a parameter grid, as CSV.
    Region {
        #[arg(value_enum)]
        kind: RegionKind,
        #[arg(long, default_value_t = 41)]
        grid: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve an SDP given as JSON; exit 0 if feasible, 1 if infeasible.
    SdpSolve {
        problem: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Family {
    Derangement {
        #[arg(long)]
        n: usize,
    },
    Circulant3 {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
    },
    Euclidean {
        #[arg(long)]
        n: usize,
    },
    Prime {
        #[arg(long, value_delimiter = ',', required = true)]
        seq: Vec<u64>,
    },
    SquareSlack,
    NestedRectSlack {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
    },
    HexagonSlack,
    Partition {
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    Cos2 {
        #[arg(long)]
        n: usize,
    },
    Horn,
    Identity {
        #[arg(long)]
        n: usize,
    },
}

impl Family {
    fn spec(&self) -> FamilySpec {
        match self {
            Family::Derangement { n } => FamilySpec::Derangement { n: *n },
            Family::Circulant3 { a, b, c } => FamilySpec::Circulant3 { a: *a, b: *b, c: *c },
            Family::Euclidean { n } => FamilySpec::Euclidean { n: *n },
            Family::Prime { seq } => FamilySpec::Prime { seq: seq.clone() },
            Family::SquareSlack => FamilySpec::SquareSlack,
            Family::NestedRectSlack { a, b } => FamilySpec::NestedRectSlack { a: *a, b: *b },
            Family::HexagonSlack => FamilySpec::HexagonSlack,
            Family::Partition { values } => FamilySpec::Partition { values: values.clone() },
            Family::Cos2 { n } => FamilySpec::Cos2 { n: *n },
            Family::Horn => FamilySpec::Horn,
            Family::Identity { n } => FamilySpec::Identity { n: *n },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RescaleMode {
    /// Row factors sum to the identity.
    Trace,
    /// Every factor has eigenvalues at most sqrt(k max M).
    John,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionKind {
    /// M(1, b, c) for b, c in [0, 2].
    Circulant,
    /// Nested rectangles [-a,a]x[-b,b] in the unit square, a, b in (0, 1).
    Nested,
}

#[derive(Subcommand)]
enum QuantumOp {
    /// Build a protocol from a factorization of a matrix summing to one.
    ToProtocol {
        matrix: PathBuf,
        factorization: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check that a protocol generates a matrix.
    Verify { matrix: PathBuf, protocol: PathBuf },
    /// Recover a factorization from a protocol.
    FromProtocol {
        protocol: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Draw samples and print the outcome histogram.
    Sample {
        protocol: PathBuf,
        #[arg(short = 'n', long, default_value_t = 100_000)]
        count: u64,
        /// Matrix to compare the empirical distribution against.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CpsdOp {
    /// Check a Gram representation in psd matrices.
    Verify { matrix: PathBuf, gram: PathBuf },
    /// Inner product with the Horn form; exit 0 if negative (not completely positive).
    Horn { matrix: PathBuf },
    /// Exit 0 if the matrix is psd and entrywise nonnegative.
    Dnn { matrix: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Numerical(_)) { 3 } else { 2 };
        Failure { code, message: e.to_string() }
    }
}

fn input_error(message: String) -> Failure {
    Failure { code: 2, message }
}

type Run = Result<bool, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, format!("{text}\n")).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

/// Writes to `path` if given, otherwise to stdout.
fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write(p, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn matrix(path: &Path) -> Result<NonnegativeMatrix, Failure> {
    Ok(parse_nonnegative(&read(path)?)?)
}

fn real_factorization(path: &Path) -> Result<RealFactorization, Failure> {
    Ok(match parse_factorization(&read(path)?)? {
        AnyFactorization::Real(f) => f,
        AnyFactorization::Hermitian(f) => hermitian_embed(&f),
    })
}

fn region_csv(kind: RegionKind, points: &[RegionPoint]) -> String {
    let header = match kind {
        RegionKind::Circulant => "b,c,decision",
        RegionKind::Nested => "a,b,decision",
    };
    let mut out = String::from(header);
    for p in points {
        let d = match p.decision {
            Some(true) => "true",
            Some(false) => "false",
            None => "undecided",
        };
        out.push_str(&format!("\n{:?},{:?},{d}", p.x, p.y));
    }
    out
}

fn run(cli: Cli) -> Run {
    let cfg = &cli.config;
    let tol = Tolerance::new(cfg.tol)?;
    match cli.command {
        Command::Gen { family, output } => {
            let g = generate(&family.spec())?;
            emit(output.as_deref(), &matrix_json(&g.to_dense()))?;
            Ok(true)
        }
        Command::Bounds { matrix: path, facts, output } => {
            let m = matrix(&path)?;
            let mut opts = BoundsOptions { tol, sqrt_budget: cfg.sqrt_budget, ..BoundsOptions::default() };
            for f in &facts {
                opts.factorizations.push((f.display().to_string(), real_factorization(f)?));
            }
            let iv = psd_rank_interval(&m, &opts)?;
            let text = to_json(&iv);
            if let Some(p) = output {
                write(&p, &text)?;
            }
            println!("{text}");
            Ok(true)
        }
        Command::Rank2 { matrix: path, output } => {
            let d = decide_psd_rank_le_2(&matrix(&path)?, tol)?;
            let text = to_json(&d);
            write(&output, &text)?;
            println!("{text}");
            Ok(d.psd_rank_le_2)
        }
        Command::ExtractFact { matrix: path, certificate, output } => {
            let m = matrix(&path)?;
            let cert: serde_json::Value = serde_json::from_str(&read(&certificate)?)
                .map_err(|e| input_error(format!("malformed certificate: {e}")))?;
            let field = |name: &str| {
                cert.get(name).filter(|v| !v.is_null()).cloned().ok_or_else(|| {
                    input_error(format!("certificate has no {name}; only ellipse certificates can be extracted"))
                })
            };
            let pair: SandwichPair = serde_json::from_value(field("pair")?)
                .map_err(|e| input_error(format!("malformed polytope pair: {e}")))?;
            let e: Ellipse =
                serde_json::from_value(field("ellipse")?).map_err(|e| input_error(format!("malformed ellipse: {e}")))?;
            let f = factorization_from_ellipse(&m, &pair, &e, tol)?;
            emit(output.as_deref(), &factorization_json(&AnyFactorization::Real(f)))?;
            Ok(true)
        }
        Command::Verify { matrix: path, factorization } => {
            let m = matrix(&path)?;
            let report = match parse_factorization(&read(&factorization)?)? {
                AnyFactorization::Real(f) => verify(&m, &f, tol)?,
                AnyFactorization::Hermitian(f) => verify(&m, &f, tol)?,
            };
            println!("{}", to_json(&report));
            Ok(report.pass)
        }
        Command::SqrtRank { matrix: path, output } => {
            let r = sqrt_rank_exact(&matrix(&path)?, cfg.sqrt_budget, tol)?;
            let witness: serde_json::Value =
                serde_json::from_str(&matrix_json(&r.witness)).expect("matrix JSON is valid");
            let text = to_json(&json!({
                "value": r.value,
                "patterns_searched": r.patterns_searched,
                "witness": witness,
            }));
            emit(output.as_deref(), &text)?;
            Ok(true)
        }
        Command::Rescale { matrix: path, factorization, mode, output } => {
            let m = matrix(&path)?;
            let f = real_factorization(&factorization)?;
            let g = match mode {
                RescaleMode::Trace => rescale_trace(&f, &m, tol)?,
                RescaleMode::John => rescale_john(&f, &m, tol)?,
            };
            emit(output.as_deref(), &factorization_json(&AnyFactorization::Real(g)))?;
            Ok(true)
        }
        Command::Quantum { op } => match op {
            QuantumOp::ToProtocol { matrix: path, factorization, output } => {
                let pr = to_protocol(&real_factorization(&factorization)?, &matrix(&path)?, tol)?;
                emit(output.as_deref(), &protocol_json(&pr))?;
                Ok(true)
            }
            QuantumOp::Verify { matrix: path, protocol } => {
                let report = verify_protocol(&matrix(&path)?, &parse_protocol(&read(&protocol)?)?, tol)?;
                println!("{}", to_json(&report));
                Ok(report.pass)
            }
            QuantumOp::FromProtocol { protocol, output } => {
                let f = from_protocol(&parse_protocol(&read(&protocol)?)?, tol)?;
                emit(output.as_deref(), &factorization_json(&AnyFactorization::Real(f)))?;
                Ok(true)
            }
            QuantumOp::Sample { protocol, count, matrix: target } => {
                let pr = parse_protocol(&read(&protocol)?)?;
                let hist = sample(&pr, count, cfg.seed);
                let tv = match target {
                    Some(p) => {
                        let m = matrix(&p)?;
                        if (m.rows(), m.cols()) != (hist.len(), hist.first().map_or(0, Vec::len)) {
                            return Err(input_error("matrix and protocol have different outcome counts".into()));
                        }
                        Some(total_variation(&hist, m.as_dense()))
                    }
                    None => None,
                };
                println!("{}", to_json(&json!({ "samples": count, "seed": cfg.seed, "counts": hist, "total_variation": tv })));
                Ok(true)
            }
        },
        Command::Cpsd { op } => match op {
            CpsdOp::Verify { matrix: path, gram } => {
                let m = parse_symmetric(&read(&path)?)?;
                let report = verify_cpsd(&m, &parse_gram(&read(&gram)?, tol)?, tol)?;
                println!("{}", to_json(&report));
                Ok(report.pass)
            }
            CpsdOp::Horn { matrix: path } => {
                let value = horn_certificate(&parse_symmetric(&read(&path)?)?)?;
                println!("{}", to_json(&json!({ "horn_value": value, "separates": value < 0.0 })));
                Ok(value < 0.0)
            }
            CpsdOp::Dnn { matrix: path } => {
                let ok = dnn_check(&parse_symmetric(&read(&path)?)?, tol);
                println!("{}", to_json(&json!({ "doubly_nonnegative": ok })));
                Ok(ok)
            }
        },
        Command::Region { kind, grid, output } => {
            if grid == 0 {
                return Err(input_error("grid must be positive".into()));
            }
            let points = match kind {
                RegionKind::Circulant => circulant_region(grid, tol),
                RegionKind::Nested => nested_rect_region(grid, tol),
            };
            emit(output.as_deref(), &region_csv(kind, &points))?;
            Ok(true)
        }
        Command::SdpSolve { problem, output } => {
            let p = parse_sdp(&read(&problem)?)?;
            let params = SdpParams { gap_tol: cfg.sdp_gap, feas_tol: cfg.sdp_feas, ..SdpParams::default() };
            if !(params.gap_tol > 0.0 && params.feas_tol > 0.0) {
                return Err(input_error("sdp tolerances must be positive".into()));
            }
            let sol = solve(&p, &params)?;
            emit(output.as_deref(), &to_json(&sol))?;
            match sol.status {
                SdpStatus::NumericalFailure => Err(Failure { code: 3, message: sol.message }),
                _ => Ok(sol.is_feasible()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let code = match run(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    let _ = std::io::stdout().flush();
    ExitCode::from(code)
}
