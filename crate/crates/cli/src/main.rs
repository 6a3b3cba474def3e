use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gtrellis::decision::{decide, default_lambda_grid, Detector, MonteCarlo, ThresholdRule, TiePolicy};
use gtrellis::forward_backward::posterior_pair;
use gtrellis::matrices::{write_matrix, MatrixSpec};
use gtrellis::oracle_check::{oracle_check, OracleCheckConfig, DEFAULT_TOLERANCE};
use gtrellis::{Error, NoiseModel, PriorModel, TestMatrix, TestVector, Trellis};

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "gtrellis", version, about = "Trellis-based a-posteriori detection for group testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-element log APP ratios and decisions for one observed test vector.
    App(AppArgs),
    /// Monte Carlo ROC sweep, written as CSV.
    Roc(RocArgs),
    /// Generate a test matrix and write it in the text format.
    Genmat(GenmatArgs),
    /// Compare the trellis engine with brute-force enumeration on random instances.
    OracleCheck(OracleCheckArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Hypergraph,
    Ebch,
    Bernoulli,
}

#[derive(Args, Debug)]
struct GeneratorArgs {
    /// Hypergraph vertex count.
    #[arg(long, default_value_t = 9)]
    order: usize,
    /// Hypergraph edge size.
    #[arg(long, default_value_t = 3)]
    uniformity: usize,
    /// Bernoulli matrix rows.
    #[arg(long)]
    rows: Option<usize>,
    /// Bernoulli matrix columns.
    #[arg(long)]
    cols: Option<usize>,
    /// Bernoulli entry probability.
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    /// Bernoulli generator seed.
    #[arg(long, default_value_t = 0)]
    matrix_seed: u64,
}

#[derive(Args, Debug)]
struct MatrixArgs {
    /// Read the test matrix from a file.
    #[arg(long, conflicts_with = "kind")]
    matrix: Option<PathBuf>,
    /// Build one of the stock matrices.
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[command(flatten)]
    generator: GeneratorArgs,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Prior probability that an element is defective.
    #[arg(long)]
    delta: f64,
    /// Noiseless tests (the default).
    #[arg(long, conflicts_with = "eps")]
    noiseless: bool,
    /// Crossover probability of a binary symmetric test channel.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Tie {
    Defective,
    NonDefective,
}

#[derive(Args, Debug)]
struct AppArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Observed outcomes as a bit string, test 1 first.
    #[arg(long, conflicts_with = "tests_file")]
    tests: Option<String>,
    /// File holding the observed outcomes.
    #[arg(long)]
    tests_file: Option<PathBuf>,
    /// Decision threshold on the log APP ratio.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = Tie::Defective)]
    tie: Tie,
}

#[derive(Args, Debug)]
struct RocArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated log APP thresholds; defaults to 61 points spanning
    /// [-15, 15] in the log-likelihood-ratio domain.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Tie::Defective)]
    tie: Tie,
    /// Worker threads for the trials.
    #[arg(long, env = "GTRELLIS_WORKERS")]
    workers: Option<usize>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenmatArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct OracleCheckArgs {
    #[arg(long, default_value_t = 200)]
    cases: usize,
    #[arg(long, default_value_t = 6)]
    max_m: usize,
    #[arg(long, default_value_t = 12)]
    max_n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Scale the prevalence seen by the trellis engine.
    #[arg(long, default_value_t = 1.0, hide = true)]
    engine_delta_skew: f64,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Io(String),
    CheckFailed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn generator_spec(kind: Kind, g: &GeneratorArgs) -> CliResult<MatrixSpec> {
    Ok(match kind {
        Kind::Hypergraph => MatrixSpec::Hypergraph {
            order: g.order,
            uniformity: g.uniformity,
        },
        Kind::Ebch => MatrixSpec::ExtendedBch6457,
        Kind::Bernoulli => MatrixSpec::Bernoulli {
            m: g.rows.ok_or_else(|| validation("--rows is required for --kind bernoulli"))?,
            n: g.cols.ok_or_else(|| validation("--cols is required for --kind bernoulli"))?,
            density: g.density,
            seed: g.matrix_seed,
        },
    })
}

impl MatrixArgs {
    fn spec(&self) -> CliResult<MatrixSpec> {
        match (&self.matrix, self.kind) {
            (Some(path), _) => Ok(MatrixSpec::FromFile { path: path.clone() }),
            (None, Some(kind)) => generator_spec(kind, &self.generator),
            (None, None) => Err(validation("a matrix source is required: --matrix PATH or --kind")),
        }
    }
}

impl ModelArgs {
    fn resolve(&self) -> CliResult<(PriorModel, NoiseModel)> {
        let prior = PriorModel::new(self.delta)?;
        let noise = match self.eps {
            Some(eps) => NoiseModel::bsc(eps)?,
            None => NoiseModel::Noiseless,
        };
        Ok((prior, noise))
    }
}

impl From<Tie> for TiePolicy {
    fn from(t: Tie) -> Self {
        match t {
            Tie::Defective => TiePolicy::Defective,
            Tie::NonDefective => TiePolicy::NonDefective,
        }
    }
}

fn read_test_vector(args: &AppArgs, m: usize) -> CliResult<TestVector> {
    let raw = match (&args.tests, &args.tests_file) {
        (Some(s), _) => s.clone(),
        (None, Some(path)) => fs::read_to_string(path).map_err(|e| io_error(path, e))?,
        (None, None) => return Err(validation("a test vector is required: --tests BITS or --tests-file PATH")),
    };
    let compact: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    let t: TestVector = compact
        .parse()
        .map_err(|e: Error| validation(format!("tests: {e}")))?;
    if t.len() != m {
        return Err(validation(format!(
            "tests: expected {m} outcomes for a {m}-row matrix, got {}",
            t.len()
        )));
    }
    Ok(t)
}

fn cmd_app(args: &AppArgs) -> CliResult<()> {
    let spec = args.matrix.spec()?;
    let a = spec.build()?;
    let (prior, noise) = args.model.resolve()?;
    if args.lambda.is_nan() {
        return Err(validation("lambda must not be NaN"));
    }
    let t = read_test_vector(args, a.m())?;

    let complete = if noise.is_noiseless() {
        None
    } else {
        Some(Trellis::complete(&a)?)
    };
    let detector = Detector::new(&a, complete.as_ref(), prior, noise)?;
    let post = detector.lapp(&t)?;
    let rule = ThresholdRule::app(args.lambda).with_tie(args.tie.into());
    let xhat = decide(post.lapp(), &rule);

    let mut out = String::new();
    let _ = writeln!(out, "# matrix={spec}");
    let _ = writeln!(out, "# m={}", a.m());
    let _ = writeln!(out, "# n={}", a.n());
    let _ = writeln!(out, "# delta={}", prior.delta());
    let _ = writeln!(out, "# noise={noise}");
    let _ = writeln!(out, "# tests={t}");
    let _ = writeln!(out, "# lambda={}", args.lambda);
    let _ = writeln!(out, "# tie={}", rule.tie);
    let _ = writeln!(out, "# log_evidence={}", post.log_evidence());
    let _ = writeln!(out, "element,lapp,p_non_defective,p_defective,xhat");
    for (l, &lapp) in post.lapp().iter().enumerate() {
        let (p0, p1) = posterior_pair(lapp);
        let _ = writeln!(out, "{},{lapp},{p0},{p1},{}", l + 1, xhat.get(l) as u8);
    }
    let _ = writeln!(out, "# xhat={xhat}");
    io::stdout()
        .write_all(out.as_bytes())
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn cmd_roc(args: &RocArgs) -> CliResult<()> {
    let spec = args.matrix.spec()?;
    let a = spec.build()?;
    let (prior, noise) = args.model.resolve()?;
    if args.trials == 0 {
        return Err(validation("trials must be at least 1"));
    }
    if args.workers == Some(0) {
        return Err(validation("workers must be at least 1"));
    }
    let (lambdas, grid_desc) = match &args.lambdas {
        Some(l) => {
            let mut l = l.clone();
            if l.iter().any(|v| v.is_nan()) {
                return Err(validation("lambdas must not be NaN"));
            }
            l.sort_by(f64::total_cmp);
            l.dedup();
            let desc = l.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
            (l, desc)
        }
        None => (default_lambda_grid(&prior), "llr[-15:15:61]".to_string()),
    };

    let mut mc = MonteCarlo::new(args.trials, args.seed);
    if let Some(w) = args.workers {
        mc = mc.with_workers(w);
    }
    let curve = mc.sweep_roc(&a, &prior, &noise, &lambdas, args.tie.into())?;
    let extra = vec![
        ("tool".to_string(), format!("gtrellis {}", env!("CARGO_PKG_VERSION"))),
        ("matrix".to_string(), spec.to_string()),
        ("lambda_grid".to_string(), grid_desc),
    ];
    let csv = curve.csv_string(&extra);
    match &args.out {
        Some(path) => fs::write(path, csv).map_err(|e| io_error(path, e)),
        None => io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn cmd_genmat(args: &GenmatArgs) -> CliResult<()> {
    let a: TestMatrix = generator_spec(args.kind, &args.generator)?.build()?;
    write_matrix(&args.out, &a)?;
    eprintln!("wrote {}x{} matrix to {}", a.m(), a.n(), args.out.display());
    Ok(())
}

fn cmd_oracle_check(args: &OracleCheckArgs) -> CliResult<()> {
    let cfg = OracleCheckConfig {
        cases: args.cases,
        max_m: args.max_m,
        max_n: args.max_n,
        seed: args.seed,
        engine_delta_skew: args.engine_delta_skew,
        ..OracleCheckConfig::default()
    };
    let report = oracle_check(&cfg)?;
    println!("cases={}", report.cases);
    println!("max_relative_deviation={:e}", report.max_relative_deviation);
    println!("worst_case={}", report.worst_case);
    if report.passed(args.tolerance) {
        println!("status=pass");
        Ok(())
    } else {
        println!("status=fail");
        Err(CliError::CheckFailed(format!(
            "max relative deviation {:e} exceeds {:e}",
            report.max_relative_deviation, args.tolerance
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::App(a) => cmd_app(a),
        Command::Roc(a) => cmd_roc(a),
        Command::Genmat(a) => cmd_genmat(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
        Err(CliError::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
    }
}
