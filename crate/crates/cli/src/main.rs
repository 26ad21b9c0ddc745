use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ssbmf::csp::{self, CspInstance, DEFAULT_BUDGET};
use ssbmf::io::{self, GramFile, InstanceFile};
use ssbmf::jennrich::{RecoverConfig, RecoveryReport, TensorMode};
use ssbmf::probes::{self, Modulus};
use ssbmf::recover::{self, Dataset, HeavyRecoveryConfig, Normalization, SyntheticDataset};
use ssbmf::{gen_selection_matrix, gram, Arithmetic, Seed};

mod report;

use report::{Format, Report};

#[derive(Parser)]
#[command(name = "ssbmf", version, about = "Sparse Boolean matrix factorization toolkit")]
struct Cli {
    /// Format of the report written to --out (or stdout).
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    report: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random k-sparse selection matrix (and optionally a mixed dataset).
    Gen(GenArgs),
    /// Boolean (or integer) Gram matrix of an instance.
    Gram(GramArgs),
    /// Recover W from its Boolean Gram matrix.
    Attack(AttackArgs),
    /// Recover W, then the heavy magnitudes of the private dataset.
    Recover(RecoverArgs),
    /// Solve the Max 2-CSP reduction of a factorization instance.
    Csp(CspArgs),
    /// Exact and Monte-Carlo probes of the rank theory.
    #[command(subcommand)]
    Probe(ProbeCommand),
    /// Generate and attack planted instances over several seeds.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instance JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also mix a private dataset with this many coordinates.
    #[arg(long)]
    d: Option<usize>,
    /// Plant one entry per column with |x| = C (k/r) Σ|x|.
    #[arg(long, value_name = "C")]
    heavy: Option<f64>,
    /// Private dataset CSV (r x d).
    #[arg(long, requires = "d")]
    x_out: Option<PathBuf>,
    /// Synthetic observations CSV (m x d).
    #[arg(long, requires = "d")]
    z_out: Option<PathBuf>,
    /// Similarity matrix JSON.
    #[arg(long)]
    gram_out: Option<PathBuf>,
}

#[derive(Args)]
struct GramArgs {
    /// Instance JSON.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also store intersection counts.
    #[arg(long)]
    counts: bool,
    /// Write a 0/1 (or count) CSV instead of JSON.
    #[arg(long)]
    csv: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Anchored,
}

impl From<ModeArg> for TensorMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => TensorMode::Full,
            ModeArg::Anchored => TensorMode::Anchored,
        }
    }
}

#[derive(Args)]
struct RecoveryArgs {
    #[arg(long)]
    r: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Anchored)]
    mode: ModeArg,
    /// Anchor count (anchored mode).
    #[arg(long)]
    anchors: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.25)]
    round_tol: f64,
    /// Clamp inconsistent tensor entries instead of failing.
    #[arg(long)]
    clamp: bool,
    /// Include wall-clock seconds in the report.
    #[arg(long)]
    timing: bool,
}

impl RecoveryArgs {
    fn config(&self) -> RecoverConfig {
        RecoverConfig {
            mode: self.mode.into(),
            anchors: self.anchors,
            seed: Seed(self.seed),
            round_tol: self.round_tol,
            clamp: self.clamp,
            ..RecoverConfig::default()
        }
    }
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    gram: PathBuf,
    #[command(flatten)]
    recovery: RecoveryArgs,
    /// Reference instance; fills in the column permutation.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Recovered instance JSON.
    #[arg(long)]
    w_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizationArg {
    Unbiased,
    Shortcut,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    gram: PathBuf,
    /// Synthetic observations CSV (m x d).
    #[arg(long)]
    synthetic: PathBuf,
    #[command(flatten)]
    recovery: RecoveryArgs,
    #[arg(long, default_value_t = 0.25)]
    eta: f64,
    #[arg(long, default_value_t = 6.0)]
    c_heavy: f64,
    #[arg(long, value_enum, default_value_t = NormalizationArg::Unbiased)]
    normalization: NormalizationArg,
    /// Private dataset CSV, for per-entry errors.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Reference instance, to align recovered rows with the truth.
    #[arg(long)]
    truth_w: Option<PathBuf>,
    /// Magnitude estimates CSV (r x d).
    #[arg(long)]
    x_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CspMode {
    Int,
    Bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Exact,
    Local,
}

#[derive(Args)]
struct CspArgs {
    /// Symmetric instance from a Gram matrix JSON.
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    gram: Option<PathBuf>,
    /// Asymmetric instance from an integer matrix CSV.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = CspMode::Int)]
    mode: CspMode,
    #[arg(long, value_enum, default_value_t = Solver::Local)]
    solver: Solver,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exact solver refuses more complete assignments than this.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: f64,
    /// Instance dump JSON.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Factor instance JSON (symmetric only).
    #[arg(long)]
    w_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ProbeCommand {
    /// Ranks of an instance over F2, F_q and the rationals.
    Rank {
        #[arg(long = "in")]
        input: PathBuf,
        /// Extra primes, comma separated.
        #[arg(long, value_delimiter = ',')]
        primes: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Krawtchouk values, parity probabilities and the exponential bound.
    Krawtchouk {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        k: usize,
        /// A single λ; all λ in 0..=r when omitted.
        #[arg(long)]
        lambda: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full-rank frequency of random instances.
    Singularity {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Largest atom of ⟨w, x⟩ over random k-sparse w.
    Anticoncentration {
        /// Integer vector, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<i64>,
        #[arg(long)]
        k: usize,
        /// "real" or an integer modulus.
        #[arg(long, default_value = "real")]
        modulus: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = probes::DEFAULT_ENVELOPE)]
        envelope: f64,
        /// Enumerate every support instead of sampling.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    r: usize,
    #[arg(long)]
    k: usize,
    /// Rows; the calibrated sample size when omitted.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Anchored)]
    mode: ModeArg,
    #[arg(long)]
    anchors: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error carrying the process exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<ssbmf::Error> for Failure {
    fn from(e: ssbmf::Error) -> Self {
        Failure {
            code: if e.is_parameter_error() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

fn parameter(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type Outcome = Result<u8, Failure>;

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| parameter(format!("{}: {e}", path.display())))
}

fn gen(args: GenArgs) -> Outcome {
    let seed = Seed(args.seed);
    let w = gen_selection_matrix(args.m, args.r, args.k, seed)?;
    io::write_json(&args.out, &InstanceFile::new(&w, Some(seed)))?;
    if let Some(path) = &args.gram_out {
        io::write_json(path, &GramFile::new(&gram(&w, Arithmetic::Boolean)))?;
    }
    if let Some(d) = args.d {
        let (x, _) = recover::planted_dataset(args.r, d, args.k, args.heavy, seed.split(1))?;
        // Mixing reuses the instance seed, so the synthetic rows follow `w`.
        let (syn, _) = recover::gen_instahide(&x, args.m, args.k, seed)?;
        if let Some(path) = &args.x_out {
            io::write_csv_matrix(path, x.matrix())?;
        }
        if let Some(path) = &args.z_out {
            io::write_csv_matrix(path, &syn.z)?;
        }
    }
    Ok(0)
}

fn gram_cmd(args: GramArgs) -> Outcome {
    let (w, _) = io::read_instance(&args.input)?;
    let arithmetic = if args.counts {
        Arithmetic::Integer
    } else {
        Arithmetic::Boolean
    };
    let g = gram(&w, arithmetic);
    if args.csv {
        write_text(&args.out, &io::csv_string(g.to_dense())?)?;
    } else {
        io::write_json(&args.out, &GramFile::new(&g))?;
    }
    Ok(0)
}

fn recovery_value(report: &RecoveryReport) -> Value {
    serde_json::to_value(report).expect("serializable")
}

fn attack(args: AttackArgs, format: Format) -> Outcome {
    let g = io::read_gram(&args.gram)?;
    let cfg = args.recovery.config();
    let start = Instant::now();
    let result = ssbmf::tensor_recover(&g, args.recovery.r, args.recovery.k, &cfg);
    let seconds = start.elapsed().as_secs_f64();
    let (mut report, code) = match result {
        Ok(mut factors) => {
            if let Some(path) = &args.truth {
                let (w, _) = io::read_instance(path)?;
                factors.align(&w);
            }
            if let Some(path) = &args.w_out {
                io::write_json(path, &InstanceFile::new(&factors.w_hat, None))?;
            }
            let code = if factors.success { 0 } else { 3 };
            (RecoveryReport::from_factors(&factors), code)
        }
        Err(e) if e.is_parameter_error() => return Err(e.into()),
        Err(e) => (RecoveryReport::from_error(&e), 3),
    };
    if args.recovery.timing {
        report.seconds = Some(seconds);
    }
    Report::new(recovery_value(&report)).emit(format, args.out.as_deref())?;
    Ok(code)
}

fn recover_cmd(args: RecoverArgs, format: Format) -> Outcome {
    let g = io::read_gram(&args.gram)?;
    let z = SyntheticDataset::public(io::read_csv_matrix_file(&args.synthetic)?)?;
    let (r, k) = (args.recovery.r, args.recovery.k);
    let cfg = HeavyRecoveryConfig {
        eta: args.eta,
        c_heavy: args.c_heavy,
        normalization: match args.normalization {
            NormalizationArg::Unbiased => Normalization::Unbiased,
            NormalizationArg::Shortcut => Normalization::Shortcut,
        },
    };
    let start = Instant::now();
    let result = recover::recover_dataset(&g, &z, r, k, &args.recovery.config(), &cfg);
    let seconds = start.elapsed().as_secs_f64();
    let mut outcome = match result {
        Ok(outcome) => outcome,
        Err(e) if e.is_parameter_error() => return Err(e.into()),
        Err(e) => {
            let report = RecoveryReport::from_error(&e);
            Report::new(json!({ "recovery": recovery_value(&report) })).emit(format, args.out.as_deref())?;
            return Ok(3);
        }
    };
    let truth = args.truth.as_deref().map(io::read_csv_matrix_file).transpose()?.map(Dataset::new).transpose()?;
    if let (Some(path), Some(w_hat)) = (&args.truth_w, &outcome.w_hat) {
        let (w, _) = io::read_instance(path)?;
        if let ssbmf::ColumnMatch::Permutation(p) = ssbmf::match_factors(w_hat, &w) {
            outcome.report.permutation = Some(p);
        }
    }
    if args.recovery.timing {
        outcome.report.seconds = Some(seconds);
    }
    if let (Some(path), Some(x_hat)) = (&args.x_out, &outcome.x_hat) {
        io::write_csv_matrix(path, x_hat.matrix())?;
    }
    let entries = outcome.entry_reports(truth.as_ref(), outcome.report.permutation.as_deref(), k, &cfg);
    let heavy_true: Vec<_> = entries.iter().filter(|e| e.heavy_abs_mass == Some(true)).collect();
    let within = heavy_true
        .iter()
        .filter(|e| e.relative_error.is_some_and(|err| err <= cfg.eta))
        .count();
    let mut value = json!({
        "recovery": recovery_value(&outcome.report),
        "entries": entries,
    });
    if truth.is_some() {
        value["heavy_entries"] = json!(heavy_true.len());
        value["heavy_within_eta"] = json!(within);
    }
    let csv = report::entry_table(&entries);
    Report::new(value).with_table(csv).emit(format, args.out.as_deref())?;
    Ok(if outcome.report.success { 0 } else { 3 })
}

fn csp_cmd(args: CspArgs, format: Format) -> Outcome {
    let mode = match args.mode {
        CspMode::Int => Arithmetic::Integer,
        CspMode::Bool => Arithmetic::Boolean,
    };
    let inst: CspInstance = match (&args.gram, &args.matrix) {
        (Some(path), _) => csp::reduce_symmetric(&io::read_gram(path)?, args.r, args.k, mode)?,
        (None, Some(path)) => {
            let x = io::read_csv_matrix_file(path)?;
            let rows: Vec<Vec<u8>> = io::matrix_rows(&x)
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|v| {
                            if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
                                Ok(v as u8)
                            } else {
                                Err(parameter(format!("matrix entry {v} is not a small nonnegative integer")))
                            }
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<_, _>>()?;
            csp::reduce_asymmetric(&rows, args.r, args.k)?
        }
        (None, None) => return Err(parameter("one of --gram or --matrix is required")),
    };
    if let Some(path) = &args.dump {
        io::write_json(path, &inst.dump())?;
    }
    let best = match args.solver {
        Solver::Exact => csp::solve_exact(&inst, args.budget)?,
        Solver::Local => csp::solve_local(&inst, args.restarts, args.iters, Seed(args.seed))?,
    };
    let factors = csp::assignment_to_factors(&inst, &best.sigma)?;
    let edges = inst.edges();
    let mut value = json!({
        "edges": edges,
        "value": best.value,
        "gap": if edges == 0 { 0.0 } else { (edges - best.value) as f64 / edges as f64 },
        "residual": factors.objective(),
    });
    match &factors {
        csp::CspFactors::Symmetric { w, offdiag_l0, diag_l0 } => {
            value["residual_offdiag"] = json!(offdiag_l0);
            value["residual_with_diag"] = json!(offdiag_l0 + diag_l0);
            if let Some(path) = &args.w_out {
                io::write_json(path, &InstanceFile::new(w, None))?;
            }
        }
        csp::CspFactors::Bipartite { .. } => {
            if args.w_out.is_some() {
                return Err(parameter("--w-out applies to symmetric instances only"));
            }
        }
    }
    Report::new(value).emit(format, args.out.as_deref())?;
    Ok(0)
}

fn probe(cmd: ProbeCommand, format: Format) -> Outcome {
    match cmd {
        ProbeCommand::Rank { input, primes, out } => {
            let (w, _) = io::read_instance(&input)?;
            let rep = probes::rank_report(&w, &primes)?;
            Report::new(serde_json::to_value(&rep).expect("serializable")).emit(format, out.as_deref())?;
        }
        ProbeCommand::Krawtchouk { r, k, lambda, out } => {
            let lambdas: Vec<usize> = match lambda {
                Some(l) => vec![l],
                None => (0..=r).collect(),
            };
            let mut rows = Vec::new();
            for l in lambdas {
                let value = probes::krawtchouk(r, k, l)?;
                let p = probes::f2_zero_probability(r, k, l)?;
                rows.push(json!({ "lambda": l, "krawtchouk": value.to_string(), "f2_zero_probability": p.to_string() }));
            }
            let mut value = json!({ "r": r, "k": k, "values": rows });
            if 100 * k <= 16 * r {
                let bound = probes::krawtchouk_bound_check(r, k)?;
                value["bound"] = serde_json::to_value(bound).expect("serializable");
            }
            let table = report::records_table(&value["values"], &["lambda", "krawtchouk", "f2_zero_probability"]);
            Report::new(value).with_table(table).emit(format, out.as_deref())?;
        }
        ProbeCommand::Singularity { m, r, k, trials, seed, out } => {
            let rec = probes::singularity_experiment(m, r, k, trials, Seed(seed))?;
            let table = report::frequency_table(&[("f2", &rec.f2), ("real", &rec.real)]);
            Report::new(serde_json::to_value(&rec).expect("serializable"))
                .with_table(table)
                .emit(format, out.as_deref())?;
        }
        ProbeCommand::Anticoncentration {
            x,
            k,
            modulus,
            samples,
            seed,
            envelope,
            exact,
            out,
        } => {
            let modulus: Modulus = modulus.parse()?;
            let rep = if exact {
                probes::anticoncentration_exact(&x, k, modulus, envelope)?
            } else {
                probes::anticoncentration_estimate(&x, k, modulus, samples, Seed(seed), envelope)?
            };
            Report::new(serde_json::to_value(&rep).expect("serializable")).emit(format, out.as_deref())?;
        }
    }
    Ok(0)
}

fn bench(args: BenchArgs, format: Format) -> Outcome {
    let m = match args.m {
        Some(m) => m,
        None => ssbmf::required_sample_size(
            args.r,
            args.k,
            3 * args.k,
            args.delta,
            ssbmf::mu::CALIBRATED_SAMPLE_CONSTANT,
        )?,
    };
    let mut runs = Vec::new();
    let mut successes = 0;
    for i in 0..args.seeds {
        let seed = Seed(args.seed).split(i);
        let start = Instant::now();
        let w = gen_selection_matrix(m, args.r, args.k, seed)?;
        let g = gram(&w, Arithmetic::Boolean);
        let cfg = RecoverConfig {
            mode: args.mode.into(),
            anchors: args.anchors,
            seed,
            ..RecoverConfig::default()
        };
        let mut report = match ssbmf::tensor_recover(&g, args.r, args.k, &cfg) {
            Ok(mut factors) => {
                factors.align(&w);
                RecoveryReport::from_factors(&factors)
            }
            Err(e) if e.is_parameter_error() => return Err(e.into()),
            Err(e) => RecoveryReport::from_error(&e),
        };
        let matched = report.success && report.permutation.is_some();
        successes += usize::from(matched);
        if args.timing {
            report.seconds = Some(start.elapsed().as_secs_f64());
        }
        runs.push(json!({ "seed": seed.0, "matched": matched, "report": recovery_value(&report) }));
    }
    let value = json!({
        "m": m,
        "r": args.r,
        "k": args.k,
        "seeds": args.seeds,
        "successes": successes,
        "runs": runs,
    });
    Report::new(value).emit(format, args.out.as_deref())?;
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    let format = cli.report;
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Gram(a) => gram_cmd(a),
        Command::Attack(a) => attack(a, format),
        Command::Recover(a) => recover_cmd(a, format),
        Command::Csp(a) => csp_cmd(a, format),
        Command::Probe(p) => probe(p, format),
        Command::Bench(a) => bench(a, format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
