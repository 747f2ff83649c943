use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mixhom::calibration::{limit_law_for, LimitLaw, DEFAULT_DRAWS};
use mixhom::experiment::{run_experiment, ExperimentOutput, ExperimentSpec};
use mixhom::geometry::{cached_score_matrices, classify_limit};
use mixhom::io::{
    cached_law, density_curves, load_series, read_law, run_report, write_curves_csv, write_json, write_law, Column,
    LoadOptions, ReportOptions,
};
use mixhom::lrt::{bootstrap_null, lrt_statistic_with, LrtConfig, NullStatistic};
use mixhom::{em_fit, EmConfig, Error, Kernel, Result, TuningConstant};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "mixhom", version, about = "EM-test for homogeneity in two-component location-scale mixtures")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the EM-test on a data column.
    Test(TestArgs),
    /// Penalized likelihood ratio test with a simulated null distribution.
    Lrt(LrtArgs),
    /// Simulate and store the limiting law of a kernel.
    Calibrate(CalibrateArgs),
    /// Print the score covariance matrices and the limit case of a kernel.
    Matrices(MatricesArgs),
    /// Run a size, power or tuning experiment described by a JSON file.
    Experiment(ExperimentArgs),
    /// Export fitted mixture and null densities as CSV.
    Curves(CurvesArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV file holding the series.
    #[arg(long)]
    data: PathBuf,
    /// Column index (0-based) or header name.
    #[arg(long, default_value = "0")]
    column: String,
    /// First row is a header.
    #[arg(long)]
    header: bool,
    /// Take logarithms of the (positive) values first.
    #[arg(long)]
    log_transform: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Vec<f64>> {
        let column = match self.column.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(self.column.clone()),
        };
        let opts = LoadOptions { column, has_header: self.header, log_transform: self.log_transform };
        load_series(&self.data, &opts)
    }
}

#[derive(Args, Debug)]
struct EmArgs {
    /// Number of EM iterations.
    #[arg(long = "K", alias = "iterations", default_value_t = 3)]
    k: usize,
    /// Initial proportions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5")]
    pis: Vec<f64>,
    /// Scale-penalty strength: `auto` or a positive number.
    #[arg(long = "a-n", default_value = "auto")]
    a_n: TuningConstant,
}

impl EmArgs {
    fn config(&self) -> EmConfig {
        EmConfig { pis: self.pis.clone(), iterations: self.k, a_n: self.a_n, ..EmConfig::default() }
    }
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long)]
    kernel: Kernel,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Limit draws when the table is simulated.
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    draws: usize,
    /// Stored calibration table (from `calibrate`).
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Directory caching simulated tables by kernel, draws, seed and version.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Also run the LRT with this many simulated null samples.
    #[arg(long)]
    lrt_reps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LrtArgs {
    #[arg(long)]
    kernel: Kernel,
    #[command(flatten)]
    data: DataArgs,
    /// Simulated null samples for the p-value.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long)]
    kernel: Kernel,
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MatricesArgs {
    #[arg(long)]
    kernel: Kernel,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ExperimentKind {
    Type1,
    Power,
    Tuning,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    kind: ExperimentKind,
    /// JSON experiment description.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurvesArgs {
    #[arg(long)]
    kernel: Kernel,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Plot range `lo,hi`; defaults to the data range widened by 10%.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    range: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn io_err(p: &Path, e: io::Error) -> Error {
    Error::Io(format!("{}: {e}", p.display()))
}

fn emit<T: Serialize>(value: &T, out: &Option<PathBuf>) -> Result<()> {
    let mut w = open_out(out)?;
    write_json(value, &mut w)?;
    w.flush().map_err(Error::from)
}

fn test(a: TestArgs) -> Result<()> {
    let data = a.data.load()?;
    let law: LimitLaw = match (&a.calibration, &a.cache_dir) {
        (Some(p), _) => read_law(p)?,
        (None, Some(dir)) => cached_law(dir, &a.kernel, a.draws, a.seed)?,
        (None, None) => limit_law_for(&a.kernel, a.draws, a.seed)?,
    };
    let opts = ReportOptions {
        em: a.em.config(),
        transform: a.data.log_transform.then(|| "log".to_string()),
        lrt_reps: a.lrt_reps,
        seed: a.seed,
    };
    emit(&run_report(&a.kernel, &data, &law, &opts)?, &a.out)
}

fn lrt(a: LrtArgs) -> Result<()> {
    let data = a.data.load()?;
    let cfg = LrtConfig::default();
    let table = bootstrap_null(&a.kernel, data.len(), a.reps, a.seed, &NullStatistic::Lrt(cfg.clone()))?;
    let mut r = lrt_statistic_with(&a.kernel, &data, &cfg, Some(table))?;
    r.null_table = None;
    #[derive(Serialize)]
    struct Out {
        kernel: Kernel,
        n: usize,
        reps: usize,
        seed: u64,
        #[serde(flatten)]
        result: mixhom::LrtResult<f64>,
    }
    emit(&Out { kernel: a.kernel, n: data.len(), reps: a.reps, seed: a.seed, result: r }, &a.out)
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let law = limit_law_for(&a.kernel, a.draws, a.seed)?;
    match &a.out {
        Some(p) => write_law(&law, p),
        None => emit(&law, &None),
    }
}

fn matrices(a: MatricesArgs) -> Result<()> {
    let sm = cached_score_matrices(&a.kernel)?;
    let case = classify_limit(&a.kernel, &sm)?;
    #[derive(Serialize)]
    struct Out<'a> {
        kernel: Kernel,
        case: mixhom::LimitCase,
        matrices: &'a mixhom::ScoreMatrices<f64>,
    }
    emit(&Out { kernel: a.kernel, case, matrices: &sm }, &a.out)
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let text = fs::read_to_string(&a.spec).map_err(|e| io_err(&a.spec, e))?;
    let spec: ExperimentSpec = serde_json::from_str(&text)?;
    let matches = matches!(
        (a.kind, &spec),
        (ExperimentKind::Type1, ExperimentSpec::Type1 { .. })
            | (ExperimentKind::Power, ExperimentSpec::Power { .. })
            | (ExperimentKind::Tuning, ExperimentSpec::Tuning { .. })
    );
    if !matches {
        return Err(Error::Config(format!("spec file does not describe a {:?} experiment", a.kind)));
    }
    let out: ExperimentOutput = run_experiment(&spec)?;
    emit(&out, &a.out)
}

fn curves(a: CurvesArgs) -> Result<()> {
    let data = a.data.load()?;
    let fit = em_fit(&a.kernel, &data, &a.em.config())?;
    let range = match &a.range {
        Some(r) => (r[0], r[1]),
        None => {
            let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = 0.1 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let rows = density_curves(&a.kernel, &fit.best().fit, &fit.null_fit, range, a.points)?;
    let mut w = open_out(&a.out)?;
    write_curves_csv(&rows, &mut w)?;
    w.flush().map_err(Error::from)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Test(a) => test(a),
        Command::Lrt(a) => lrt(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Matrices(a) => matrices(a),
        Command::Experiment(a) => experiment(a),
        Command::Curves(a) => curves(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mixhom [{}]: {e}", e.tag());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
