//! `submod-bench`: generate instances, run the algorithms, verify the
//! analysis on small instances, and measure query scaling.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use submod_knapsack::bench::{self, Algorithm, RunRow};
use submod_knapsack::generate::{generate, Family, GenConfig};
use submod_knapsack::knapsack::{KnapsackParams, Mode};
use submod_knapsack::oracle::Instance;
use submod_knapsack::verify::verify;
use submod_knapsack::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_INVARIANT: u8 = 2;
const EXIT_CAPACITY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "submod-bench",
    version,
    about = "Knapsack-constrained submodular maximization benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance as JSON.
    Gen(GenArgs),
    /// Run one algorithm on an instance and append a CSV row.
    Run(RunArgs),
    /// Check every inequality of the analysis on a small instance.
    Verify(VerifyArgs),
    /// Count oracle queries for growing n.
    Scaling(ScalingArgs),
    /// Run every algorithm on each instance in a directory.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Coverage,
    Facility,
    #[value(alias = "concave")]
    ConcaveModular,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Coverage => Family::Coverage,
            FamilyArg::Facility => Family::Facility,
            FamilyArg::ConcaveModular => Family::ConcaveModular,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Knapsack,
    Density,
    Sviridenko,
    Brute,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Algorithm {
        match a {
            AlgorithmArg::Knapsack => Algorithm::Knapsack,
            AlgorithmArg::Density => Algorithm::Density,
            AlgorithmArg::Sviridenko => Algorithm::Sviridenko,
            AlgorithmArg::Brute => Algorithm::Brute,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Enumerate,
    Practical,
    #[value(alias = "analysis_guided")]
    Analysis,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    family: FamilyArg,
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Costs are drawn from (0, c_max].
    #[arg(long, default_value_t = 0.5)]
    c_max: f64,
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    /// Universe items (coverage), clients (facility) or groups (concave).
    #[arg(long)]
    universe: Option<usize>,
    /// Costs grow with singleton values.
    #[arg(long)]
    adversarial: bool,
    #[arg(long)]
    integer_weights: bool,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParamArgs {
    /// JSON file with a full parameter set; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    phases: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Grid strides for practical mode.
    #[arg(long, default_value_t = 1)]
    v_stride: u64,
    #[arg(long, default_value_t = 1)]
    big_w_stride: u64,
    #[arg(long, default_value_t = 1)]
    w_stride: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest number of guess sequences enumerated per M.
    #[arg(long)]
    limit: Option<u128>,
    #[arg(long)]
    rounding_trials: Option<usize>,
}

impl ParamArgs {
    fn params(&self) -> Result<KnapsackParams, Error> {
        let mut p = match &self.config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            None => KnapsackParams::new(
                0.1,
                Mode::Practical {
                    v: 1,
                    big_w: 1,
                    w: 1,
                },
            ),
        };
        if let Some(e) = self.epsilon {
            p.epsilon = e;
        }
        p.t = self.t.or(p.t);
        p.r = self.r.or(p.r);
        p.phases = self.phases.or(p.phases);
        if let Some(m) = self.mode {
            p.mode = match m {
                ModeArg::Enumerate => Mode::Enumerate,
                ModeArg::Practical => Mode::Practical {
                    v: self.v_stride,
                    big_w: self.big_w_stride,
                    w: self.w_stride,
                },
                ModeArg::Analysis => Mode::AnalysisGuided,
            };
        }
        if let Some(s) = self.seed {
            p.seed = s;
        }
        if let Some(l) = self.limit {
            p.limit = l;
        }
        if let Some(k) = self.rounding_trials {
            p.rounding_trials = k;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args)]
struct RunArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "knapsack")]
    algorithm: AlgorithmArg,
    #[command(flatten)]
    params: ParamArgs,
    /// CSV file the row is appended to.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// Roundings for the unbiasedness, value and cost checks.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Include the full run (fractional point, traces, transcripts).
    #[arg(long)]
    full: bool,
    /// JSON report path; defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long, value_enum, default_value = "coverage")]
    family: FamilyArg,
    /// Ascending ground-set sizes.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1024,2048,4096,8192,16384"
    )]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV path; defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Directory of instance JSON files.
    dir: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// CSV path; defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Lib(Error),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn write_output(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load(path: &Path) -> Result<Instance, Error> {
    let instance = Instance::load(path)?;
    Ok(match instance.name() {
        Some(_) => instance,
        None => {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            instance.with_name(stem.unwrap_or_else(|| "unnamed".into()))
        }
    })
}

fn rows_to_csv(rows: &[RunRow], out: Option<&Path>, append: bool) -> CliResult {
    match out {
        Some(path) => bench::write_rows(path, rows, append)?,
        None => bench::write_rows_to(std::io::stdout().lock(), rows, true)?,
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> CliResult {
    let mut cfg = GenConfig::new(a.family.into(), a.n, a.seed);
    cfg.c_max = a.c_max;
    cfg.density = a.density;
    cfg.universe = a.universe;
    cfg.adversarial = a.adversarial;
    cfg.integer_weights = a.integer_weights;
    let file = generate(&cfg)?;
    let mut text = serde_json::to_string_pretty(&file).map_err(Error::from)?;
    text.push('\n');
    write_output(a.out.as_deref(), &text)
}

fn cmd_run(a: RunArgs) -> CliResult {
    let params = a.params.params()?;
    let instance = load(&a.instance)?;
    let opt = bench::optimum_if_small(&instance)?;
    let outcome = bench::run_algorithm(&instance, a.algorithm.into(), &params, opt)?;
    println!("{}", serde_json::to_string(&outcome).map_err(Error::from)?);
    if let Some(path) = a.out.as_deref() {
        bench::write_rows(path, &[outcome.row], true)?;
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CliResult {
    let params = a.params.params()?;
    let instance = load(&a.instance)?;
    let mut report = verify(&instance, instance.costs(), &params, a.samples)?;
    report.name = instance.name().map(str::to_string);
    if !a.full {
        report.run = None;
    }
    let mut text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    text.push('\n');
    write_output(a.out.as_deref(), &text)?;
    let failed: Vec<String> = report
        .failures()
        .map(|c| match c.phase {
            Some(p) => format!("{} (phase {p})", c.name),
            None => c.name.clone(),
        })
        .collect();
    eprintln!(
        "verify: {} checks, {} failed",
        report.checks.len(),
        failed.len()
    );
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Invariant(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

fn cmd_scaling(a: ScalingArgs) -> CliResult {
    let report = bench::scaling(a.family.into(), &a.ns, a.epsilon, a.seed)?;
    let mut text = String::from("n,algorithm,queries,normalized\n");
    for row in &report.rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            row.n, row.algorithm, row.queries, row.normalized
        ));
    }
    write_output(a.out.as_deref(), &text)?;
    eprintln!(
        "max/min of queries/(n ln(n/eps)): lazy_greedy {:.3}, knapsack_phase {:.3}",
        report.greedy_spread, report.phase_spread
    );
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> CliResult {
    let params = a.params.params()?;
    let mut paths: Vec<PathBuf> = fs::read_dir(&a.dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut rows = Vec::new();
    for path in &paths {
        let instance = load(path)?;
        let opt = bench::optimum_if_small(&instance)?;
        for algorithm in Algorithm::ALL {
            match bench::run_algorithm(&instance, algorithm, &params, opt) {
                Ok(outcome) => rows.push(outcome.row),
                Err(e) if e.is_capacity() => {
                    eprintln!("{}: {algorithm} skipped: {e}", path.display());
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    rows_to_csv(&rows, a.out.as_deref(), false)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Scaling(a) => cmd_scaling(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invariant(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVARIANT)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_capacity() {
                EXIT_CAPACITY
            } else if matches!(e, Error::Infeasible(_) | Error::Protocol(_)) {
                EXIT_INVARIANT
            } else {
                EXIT_USAGE
            })
        }
    }
}
