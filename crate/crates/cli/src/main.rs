//! Command-line driver: generate series files, apply operator pipelines,
//! run verification suites, and print coefficient tables.
//!
//! Exit codes: 0 success (and no FAIL lines from verify), 1 a verify suite
//! emitted FAIL, 2 usage problems (unknown generator, operator, or suite;
//! missing flags), 3 module errors (the error name is printed), 4 file
//! parse errors. Output files are written to a temporary sibling and
//! renamed, so failures never leave partial artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smfp::coeff::CoeffDomain;
use smfp::error::Error;
use smfp::generators::{
    chi10_prop, delta_g1, eisenstein_g1, hasse_series, psi4_prop, theta_constant_g2,
    ThetaCharacteristic,
};
use smfp::operators::{
    cartier, hecke_tl_g1, op_phi, op_theta_det, op_theta_matrix, op_u, op_v, OperatorLog,
};
use smfp::qseries::{MatrixQSeries, SeriesFile};
use smfp::verify::run_suite;
use smfp::QSeries;

#[derive(Parser)]
#[command(
    name = "smfp",
    about = "q-expansion calculus for Siegel modular forms in odd characteristic",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a series file (eisenstein, delta, hasse, theta, chi10, psi4)
    Gen {
        /// Generator name
        generator: String,
        /// Genus, where the generator allows a choice
        #[arg(long = "g", default_value_t = 1)]
        genus: usize,
        /// Odd prime: required by hasse, reduces other generators mod p
        #[arg(long)]
        p: Option<u64>,
        /// Trace bound of the expansion
        #[arg(long = "B", default_value_t = 10)]
        bound: i64,
        /// Rewrite the output at this denominator scale
        #[arg(long = "d")]
        scale: Option<i64>,
        /// Weight, for eisenstein
        #[arg(long)]
        k: Option<i64>,
        /// Theta characteristic bits, for theta (e.g. 0011)
        #[arg(long)]
        m: Option<String>,
        /// Recorded in the run log for reproducibility
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output path (defaults to <generator>.smfp)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a comma-separated operator pipeline to a series file
    Op {
        /// Pipeline, e.g. U,V or reduce,hecke (U V phi hecke reduce thetadet thetamatrix cartier)
        pipeline: String,
        /// Input series file
        #[arg(long = "in")]
        input: PathBuf,
        /// Odd prime for reduce, validated against prime-field inputs
        #[arg(long)]
        p: Option<u64>,
        /// Averaging index for hecke
        #[arg(long)]
        l: Option<u64>,
        /// Recorded in the run log for reproducibility
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output path (defaults to <input stem>.out.smfp)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite and print its report
    Verify {
        /// Suite name (ring-laws frobenius hasse-lift corollary irreducibility
        /// starstar theta-identity phi-tower operators all)
        suite: String,
        /// Restrict the suite to one odd prime
        #[arg(long)]
        p: Option<u64>,
        /// Trace bound override
        #[arg(long = "B")]
        bound: Option<i64>,
        /// Seed for randomized checks, embedded in the report
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Print a coefficient table for a series file
    Table {
        /// Input series file
        #[arg(long = "in")]
        input: PathBuf,
        /// Only print rows with trace at most this value
        #[arg(long)]
        max_trace: Option<i64>,
    },
}

/// A classified failure carrying its exit code.
enum Failure {
    Usage(String),
    Module(Error),
    Parse(Error),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Module(_) | Failure::Io(_) => 3,
            Failure::Parse(_) => 4,
        }
    }

    fn report(&self) -> String {
        match self {
            Failure::Usage(msg) => format!("usage error: {msg}"),
            Failure::Module(e) => format!("error {}: {e}", e.name()),
            Failure::Parse(e) => format!("parse error: {e}"),
            Failure::Io(msg) => format!("io error: {msg}"),
        }
    }
}

fn from_lib(e: Error) -> Failure {
    match e {
        Error::ParseError { .. } => Failure::Parse(e),
        _ => Failure::Module(e),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", f.report());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Gen { generator, genus, p, bound, scale, k, m, seed, out } => {
            cmd_gen(&generator, genus, p, bound, scale, k, m.as_deref(), seed, out)
        }
        Command::Op { pipeline, input, p, l, seed, out } => {
            cmd_op(&pipeline, &input, p, l, seed, out)
        }
        Command::Verify { suite, p, bound, seed } => cmd_verify(&suite, p, bound, seed),
        Command::Table { input, max_trace } => cmd_table(&input, max_trace),
    }
}

/// Writes content to a temporary sibling, then renames it into place.
fn write_atomic(path: &Path, content: &str) -> Result<(), Failure> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let file = path
        .file_name()
        .ok_or_else(|| usage(format!("output path {} has no file name", path.display())))?;
    let tmp = match dir {
        Some(d) => d.join(format!(".{}.tmp", file.to_string_lossy())),
        None => PathBuf::from(format!(".{}.tmp", file.to_string_lossy())),
    };
    fs::write(&tmp, content).map_err(|e| Failure::Io(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    generator: &str,
    genus: usize,
    p: Option<u64>,
    bound: i64,
    scale: Option<i64>,
    k: Option<i64>,
    m: Option<&str>,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<ExitCode, Failure> {
    let series = match generator {
        "eisenstein" => {
            let k = k.ok_or_else(|| usage("gen eisenstein requires --k"))?;
            if genus != 1 {
                return Err(Failure::Module(Error::Unsupported(
                    "eisenstein generation is genus 1 only".into(),
                )));
            }
            eisenstein_g1(k, bound).map_err(from_lib)?
        }
        "delta" => delta_g1(bound).map_err(from_lib)?,
        "hasse" => {
            let p = p.ok_or_else(|| usage("gen hasse requires --p"))?;
            hasse_series(genus, p, bound).map_err(from_lib)?
        }
        "theta" => {
            let m = m.ok_or_else(|| usage("gen theta requires --m (e.g. --m 0011)"))?;
            let characteristic = ThetaCharacteristic::parse(m).map_err(from_lib)?;
            theta_constant_g2(&characteristic, bound).map_err(from_lib)?
        }
        "chi10" => chi10_prop(bound).map_err(from_lib)?,
        "psi4" => psi4_prop(bound).map_err(from_lib)?,
        other => return Err(usage(format!("unknown generator {other}"))),
    };
    let series = match (p, series.domain()) {
        (Some(p), CoeffDomain::ExactRational) => series.reduce_series(p).map_err(from_lib)?,
        _ => series,
    };
    let series = match scale {
        Some(d) => series.rescaled(d).map_err(from_lib)?,
        None => series,
    };
    let path = out.unwrap_or_else(|| PathBuf::from(format!("{generator}.smfp")));
    write_atomic(&path, &series.serialize())?;
    println!("wrote {} ({} coefficients, seed={seed})", path.display(), series.len());
    Ok(ExitCode::SUCCESS)
}

/// A pipeline value: scalar or matrix series.
enum Value {
    Scalar(QSeries),
    Matrix(MatrixQSeries),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Scalar(_) => "scalar",
            Value::Matrix(_) => "matrix",
        }
    }

    fn serialize(&self) -> String {
        match self {
            Value::Scalar(s) => s.serialize(),
            Value::Matrix(m) => m.serialize(),
        }
    }
}

fn read_series(path: &Path) -> Result<Value, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    match smfp::qseries::deserialize(&text).map_err(from_lib)? {
        SeriesFile::Scalar(s) => Ok(Value::Scalar(s)),
        SeriesFile::Matrix(m) => Ok(Value::Matrix(m)),
    }
}

fn apply_step(
    step: &str,
    value: Value,
    p: Option<u64>,
    l: Option<u64>,
) -> Result<(Value, String), Failure> {
    let bad_edge = |name: &str, value: &Value| {
        Failure::Module(Error::Unsupported(format!(
            "operator {name} does not accept a {} series (first bad edge: {name})",
            value.kind()
        )))
    };
    match (step, value) {
        ("U", Value::Scalar(f)) => {
            let out = op_u(&f).map_err(from_lib)?;
            let log = OperatorLog::describe("U", &f, &out).to_string();
            Ok((Value::Scalar(out), log))
        }
        ("V", Value::Scalar(f)) => {
            let out = op_v(&f).map_err(from_lib)?;
            let log = OperatorLog::describe("V", &f, &out).to_string();
            Ok((Value::Scalar(out), log))
        }
        ("phi", Value::Scalar(f)) => {
            let out = op_phi(&f).map_err(from_lib)?;
            let log = OperatorLog::describe("phi", &f, &out).to_string();
            Ok((Value::Scalar(out), log))
        }
        ("hecke", Value::Scalar(f)) => {
            let l = l.ok_or_else(|| usage("operator hecke requires --l"))?;
            let k = f.weight().as_integer().ok_or_else(|| {
                Failure::Module(Error::WeightMismatch {
                    left: f.weight().render(),
                    right: "an integer weight".into(),
                })
            })?;
            let out = hecke_tl_g1(&f, l, k).map_err(from_lib)?;
            let log = OperatorLog::describe("hecke", &f, &out).to_string();
            Ok((Value::Scalar(out), log))
        }
        ("reduce", Value::Scalar(f)) => {
            let p = p.ok_or_else(|| usage("operator reduce requires --p"))?;
            let out = f.reduce_series(p).map_err(from_lib)?;
            let log = OperatorLog::describe("reduce", &f, &out).to_string();
            Ok((Value::Scalar(out), log))
        }
        ("thetadet", Value::Scalar(f)) => {
            let out = op_theta_det(&f).map_err(from_lib)?;
            let log = OperatorLog::describe("thetadet", &f, &out).to_string();
            Ok((Value::Scalar(out), log))
        }
        ("thetamatrix", Value::Scalar(f)) => {
            let out = op_theta_matrix(&f).map_err(from_lib)?;
            let log = format!(
                "op=thetamatrix k_in={} k_out=1/1 B_in={} B_out={}",
                f.weight().render(),
                f.bound(),
                out.bound()
            );
            Ok((Value::Matrix(out), log))
        }
        ("cartier", Value::Matrix(m)) => {
            let out = cartier(&m).map_err(from_lib)?;
            let log =
                format!("op=cartier k_in=1/1 k_out=1/1 B_in={} B_out={}", m.bound(), out.bound());
            Ok((Value::Matrix(out), log))
        }
        (
            name
            @ ("U" | "V" | "phi" | "hecke" | "reduce" | "thetadet" | "thetamatrix" | "cartier"),
            value,
        ) => Err(bad_edge(name, &value)),
        (other, _) => Err(usage(format!("unknown operator {other}"))),
    }
}

fn cmd_op(
    pipeline: &str,
    input: &Path,
    p: Option<u64>,
    l: Option<u64>,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<ExitCode, Failure> {
    let mut value = read_series(input)?;
    // A given prime must agree with a prime-field input.
    if let Some(p) = p {
        let found = match &value {
            Value::Scalar(f) => f.domain().characteristic(),
            Value::Matrix(m) => Some(m.modulus()),
        };
        if let Some(q) = found {
            if q != p {
                return Err(Failure::Module(Error::DomainMismatch {
                    left: format!("Fp:{p}"),
                    right: format!("Fp:{q}"),
                }));
            }
        }
    }
    let mut logs = vec![format!("pipeline={pipeline} in={} seed={seed}", input.display())];
    for step in pipeline.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (next, log) = apply_step(step, value, p, l)?;
        value = next;
        logs.push(log);
    }
    let path = out.unwrap_or_else(|| {
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "series".into());
        input.with_file_name(format!("{stem}.out.smfp"))
    });
    write_atomic(&path, &value.serialize())?;
    let log_path = PathBuf::from(format!("{}.oplog", path.display()));
    write_atomic(&log_path, &(logs.join("\n") + "\n"))?;
    println!("wrote {} and {}", path.display(), log_path.display());
    Ok(ExitCode::SUCCESS)
}

const SUITES: &[&str] = &[
    "ring-laws",
    "frobenius",
    "hasse-lift",
    "corollary",
    "irreducibility",
    "starstar",
    "theta-identity",
    "phi-tower",
    "operators",
    "all",
];

fn cmd_verify(
    suite: &str,
    p: Option<u64>,
    bound: Option<i64>,
    seed: u64,
) -> Result<ExitCode, Failure> {
    if !SUITES.contains(&suite) {
        return Err(usage(format!("unknown suite {suite}; expected one of {}", SUITES.join(", "))));
    }
    let report = run_suite(suite, p, bound, seed).map_err(from_lib)?;
    print!("{report}");
    Ok(if report.has_fail() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_table(input: &Path, max_trace: Option<i64>) -> Result<ExitCode, Failure> {
    match read_series(input)? {
        Value::Scalar(s) => {
            println!(
                "kind=scalar g={} domain={} k={} B={} d={} entries={}",
                s.genus(),
                s.domain(),
                s.weight().render(),
                s.bound(),
                s.scale(),
                s.len()
            );
            for (t, c) in s.iter() {
                if max_trace.is_none_or(|b| t.within_trace(b)) {
                    println!("{} ; {}", t.render(), c.render());
                }
            }
        }
        Value::Matrix(m) => {
            println!(
                "kind=matrix g={} domain=Fp:{} B={} d={} entries={}",
                m.genus(),
                m.modulus(),
                m.bound(),
                m.scale(),
                m.len()
            );
            for (t, a) in m.iter() {
                if max_trace.is_none_or(|b| t.within_trace(b)) {
                    println!("{} ; {}", t.render(), a.render());
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
