//! Command-line front end. The `markov-fiber` binary forwards to [`run`],
//! which keeps everything testable in-process.
//!
//! Reports are JSON on stdout. Failures print `{"error": {kind, message}}`
//! and exit nonzero.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::configuration::Configuration;
use crate::datasets::{named_model, Dataset};
use crate::error::{Error, Result};
use crate::fit::{chi_square, g_squared, ipf_fit, llr_from_fits, FitOptions, FitResult, FittedStatistic, StatKind};
use crate::mcmc::{run_chains, ChainConfig, PooledResult};
use crate::models::{Model, ModelFile, ModelSpec};
use crate::moves::{markov_basis, BasisOptions, BasisSource, MoveBasis, MoveType};
use crate::oracle::{components, enumerate_fiber, exact_pvalue_in, DEFAULT_FIBER_CAP};
use crate::table::Table;
use crate::toric::verify_grobner;
use crate::verify::{block_bounds, change_point_models, sweep, InstanceCheck};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MARKOV_FIBER_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "markov-fiber",
    version,
    about = "Exact conditional tests for subtable-effect models of two-way tables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit the model, walk its fiber and report asymptotic and MCMC p-values.
    Test(WalkArgs),
    /// Fit a model by iterative proportional scaling.
    Fit(FitArgs),
    /// Walk the fiber and stream the statistic, without the asymptotic report.
    Sample(WalkArgs),
    /// Inspect Markov bases.
    #[command(subcommand)]
    Moves(MovesCommand),
    /// Enumerate the fiber of a table.
    Fiber(FiberArgs),
    /// Check connectivity, indispensability and Gröbner properties on small grids.
    Verify(VerifyArgs),
    /// Check the quadratic Gröbner basis of change point models.
    GrobnerCheck(GrobnerArgs),
    /// Write the embedded tables and their model specs.
    Datasets(DatasetsArgs),
}

#[derive(Args, Debug, Clone)]
pub struct TableArgs {
    /// Built-in dataset (gilby, victoria).
    #[arg(long, conflicts_with = "table", required_unless_present = "table")]
    pub dataset: Option<String>,
    /// Table as CSV, one row per line.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// The CSV has a header row and a label column.
    #[arg(long)]
    pub header: bool,
    /// Null model: a built-in name or a JSON spec file.
    #[arg(long)]
    pub model: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    Chi2,
    G2,
    Llr,
}

impl From<StatArg> for StatKind {
    fn from(s: StatArg) -> Self {
        match s {
            StatArg::Chi2 => StatKind::Chi2,
            StatArg::G2 => StatKind::G2,
            StatArg::Llr => StatKind::Llr,
        }
    }
}

#[derive(Args, Debug)]
pub struct WalkArgs {
    #[command(flatten)]
    pub input: TableArgs,
    /// Alternative model for the nested log-likelihood ratio.
    #[arg(long)]
    pub alt: Option<String>,
    /// Test statistic; defaults to llr with --alt and chi2 otherwise.
    #[arg(long, value_enum)]
    pub stat: Option<StatArg>,
    #[arg(long, default_value_t = 100_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Independent chains, seeded seed, seed+1, ….
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Write every retained statistic value, one per line (chains in order).
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
    /// Largest grid, in cells, whose basis is enumerated up front.
    #[arg(long, default_value_t = BasisOptions::default().enumeration_threshold)]
    pub enumeration_threshold: usize,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: TableArgs,
    /// Alternative model; adds the nested log-likelihood ratio.
    #[arg(long)]
    pub alt: Option<String>,
    #[arg(long, default_value_t = FitOptions::default().tol)]
    pub tol: f64,
    #[arg(long, default_value_t = FitOptions::default().max_iter)]
    pub max_iter: usize,
}

#[derive(Subcommand, Debug)]
pub enum MovesCommand {
    /// Write an enumerated basis, one move per line.
    Dump(DumpArgs),
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// Take the grid from a built-in dataset.
    #[arg(long, conflicts_with_all = ["rows", "cols"])]
    pub dataset: Option<String>,
    #[arg(long, requires = "cols")]
    pub rows: Option<usize>,
    #[arg(long, requires = "rows")]
    pub cols: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DumpArgs {
    #[arg(long)]
    pub model: String,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Comma-separated move types instead of the model's own basis.
    #[arg(long)]
    pub types: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FiberArgs {
    #[command(flatten)]
    pub input: TableArgs,
    /// Give up beyond this many members.
    #[arg(long, default_value_t = DEFAULT_FIBER_CAP)]
    pub cap: usize,
    /// Check connectivity under `model` (the model's basis) or a
    /// comma-separated list of move types.
    #[arg(long)]
    pub check_connect: Option<String>,
    /// Exact conditional p-value of the statistic.
    #[arg(long)]
    pub exact_p: bool,
    #[arg(long)]
    pub alt: Option<String>,
    #[arg(long, value_enum)]
    pub stat: Option<StatArg>,
    /// Include every member with its probability.
    #[arg(long)]
    pub members: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    ChangePoint,
    Own,
    Common,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Check one model instead of sweeping a family.
    #[arg(long, conflicts_with = "family", requires_all = ["rows", "cols"])]
    pub model: Option<String>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// Sweep every model of this family on the grids in range.
    #[arg(long, value_enum, required_unless_present = "model")]
    pub family: Option<FamilyArg>,
    #[arg(long, default_value_t = 2)]
    pub min_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub max_dim: usize,
    /// Rectangles per change point model (at most).
    #[arg(long, default_value_t = 2)]
    pub max_rects: usize,
    /// Diagonal blocks per block model.
    #[arg(long, default_value_t = 3)]
    pub blocks: usize,
    /// Largest fiber total checked.
    #[arg(long, default_value_t = 5)]
    pub max_total: u64,
    /// Comma-separated move types instead of each model's own basis.
    #[arg(long)]
    pub types: Option<String>,
    /// Also check that every basis move is indispensable.
    #[arg(long)]
    pub indispensable: bool,
    /// Also run the Gröbner check (change point models).
    #[arg(long)]
    pub grobner: bool,
    /// Keep reports of passing instances too.
    #[arg(long)]
    pub all: bool,
}

#[derive(Args, Debug)]
pub struct GrobnerArgs {
    #[arg(long, requires_all = ["rows", "cols"])]
    pub model: Option<String>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub min_dim: usize,
    /// Largest grid side swept (and the bound for a single model).
    #[arg(long, default_value_t = 4)]
    pub max_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub max_rects: usize,
    /// Keep reports of passing instances too.
    #[arg(long)]
    pub all: bool,
}

#[derive(Args, Debug)]
pub struct DatasetsArgs {
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Parses `args` (program name first), runs the command and writes its
/// output to `out`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let body = json!({"error": {"kind": "usage", "message": e.render().to_string().trim()}});
            let _ = writeln!(out, "{body:#}");
            return 2;
        }
    };
    let echo: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, &echo, out) {
        Ok(()) => 0,
        Err(e) => {
            let body = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            let _ = writeln!(out, "{body:#}");
            1
        }
    }
}

fn dispatch(cmd: Command, echo: &[String], out: &mut dyn Write) -> Result<()> {
    let threads = thread_cap()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Parse(format!("thread pool: {e}")))?;
    // Commands run on the capped pool and write into a buffer, since the
    // caller's writer need not be `Send`.
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| {
        let out = &mut buf;
        match cmd {
            Command::Test(a) => cmd_walk(&a, echo, true, threads, out),
            Command::Sample(a) => cmd_walk(&a, echo, false, threads, out),
            Command::Fit(a) => cmd_fit(&a, echo, out),
            Command::Moves(MovesCommand::Dump(a)) => cmd_moves_dump(&a, out),
            Command::Fiber(a) => cmd_fiber(&a, echo, out),
            Command::Verify(a) => cmd_verify(&a, echo, out),
            Command::GrobnerCheck(a) => cmd_grobner(&a, echo, out),
            Command::Datasets(a) => cmd_datasets(&a, out),
        }
    });
    result?;
    out.write_all(&buf)?;
    Ok(())
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Parse(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

/// Resolves a built-in model name or reads a JSON spec file.
pub fn load_model_spec(name_or_path: &str) -> Result<ModelSpec> {
    if let Some(spec) = named_model(name_or_path) {
        return Ok(spec);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(Error::Parse(format!(
            "{name_or_path:?} is neither a built-in model nor a readable file"
        )));
    }
    ModelSpec::from_json(&fs::read_to_string(path)?)
}

fn load_dataset(name: &str) -> Result<Table> {
    Dataset::from_name(name)
        .map(Dataset::table)
        .ok_or_else(|| Error::Parse(format!("unknown dataset {name:?}; expected gilby or victoria")))
}

/// The table named by `--dataset` or read from `--table`, with a label for
/// the report.
fn load_table(args: &TableArgs) -> Result<(Table, String)> {
    match (&args.dataset, &args.table) {
        (Some(name), _) => Ok((load_dataset(name)?, format!("dataset:{name}"))),
        (None, Some(path)) => {
            let file = fs::File::open(path)?;
            Ok((Table::read_csv(file, args.header)?, path.display().to_string()))
        }
        (None, None) => Err(Error::Parse("either --dataset or --table is required".into())),
    }
}

fn load_grid(args: &GridArgs) -> Result<(usize, usize)> {
    match (&args.dataset, args.rows, args.cols) {
        (Some(name), _, _) => {
            let t = load_dataset(name)?;
            Ok((t.rows(), t.cols()))
        }
        (None, Some(r), Some(c)) => Ok((r, c)),
        _ => Err(Error::Parse("give the grid with --dataset or --rows and --cols".into())),
    }
}

fn parse_types(list: &str) -> Result<Vec<MoveType>> {
    list.split(',')
        .map(|s| MoveType::parse(s.trim()).ok_or_else(|| Error::Parse(format!("unknown move type {s:?}"))))
        .collect()
}

fn asymptotic_p(stat: f64, df: usize) -> Option<f64> {
    let dist = ChiSquared::new(df as f64).ok()?;
    let p = dist.sf(stat.max(0.0));
    p.is_finite().then_some(p)
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Null and optional alternative models on a table's grid, the statistic
/// kind, and its degrees of freedom.
struct Setup {
    table: Table,
    source: String,
    null: Model,
    alt: Option<Model>,
    kind: StatKind,
    df: usize,
}

fn setup(input: &TableArgs, alt: Option<&str>, stat: Option<StatArg>) -> Result<Setup> {
    let (table, source) = load_table(input)?;
    let (r, c) = (table.rows(), table.cols());
    let null = Model::new(load_model_spec(&input.model)?, r, c)?;
    let alt = alt.map(|a| Model::new(load_model_spec(a)?, r, c)).transpose()?;
    let kind = match (stat, &alt) {
        (Some(s), _) => s.into(),
        (None, Some(_)) => StatKind::Llr,
        (None, None) => StatKind::Chi2,
    };
    let null_df = Configuration::new(&null).degrees_of_freedom();
    let df = match (kind, &alt) {
        (StatKind::Llr, Some(a)) => null_df.saturating_sub(Configuration::new(a).degrees_of_freedom()),
        (StatKind::Llr, None) => {
            return Err(Error::InvalidModel(vec!["the llr statistic needs an alternative model (--alt)".into()]))
        }
        _ => null_df,
    };
    Ok(Setup {
        table,
        source,
        null,
        alt,
        kind,
        df,
    })
}

fn make_statistic(s: &Setup, opts: FitOptions) -> Result<FittedStatistic> {
    Ok(match s.kind {
        StatKind::Chi2 => FittedStatistic::chi_square(&s.null, opts),
        StatKind::G2 => FittedStatistic::g_squared(&s.null, opts),
        StatKind::Llr => FittedStatistic::llr(&s.null, s.alt.as_ref().expect("checked in setup"), opts)?,
    })
}

#[derive(Serialize)]
struct FitSummary {
    iterations: usize,
    converged: bool,
    max_discrepancy: f64,
}

impl From<&FitResult> for FitSummary {
    fn from(f: &FitResult) -> Self {
        FitSummary {
            iterations: f.iterations,
            converged: f.converged,
            max_discrepancy: f.max_discrepancy,
        }
    }
}

#[derive(Serialize)]
struct BasisSummary {
    source: &'static str,
    /// Move counts per type (enumerated) or type selection weights (lazy).
    types: Vec<(&'static str, f64)>,
}

fn basis_summary(b: &MoveBasis) -> BasisSummary {
    match b.source() {
        BasisSource::Enumerated(_) => BasisSummary {
            source: "enumerated",
            types: b.type_counts().into_iter().map(|(t, n)| (t.as_str(), n as f64)).collect(),
        },
        BasisSource::Lazy(g) => BasisSummary {
            source: "lazy",
            types: g.type_weights().into_iter().map(|(t, w)| (t.as_str(), w)).collect(),
        },
    }
}

#[derive(Serialize)]
struct ChainSummary {
    seed: u64,
    p_value: f64,
    samples: usize,
    accepted: usize,
    stayed: usize,
    acceptance_rate: f64,
}

#[derive(Serialize)]
struct McmcSummary {
    p_value: f64,
    std_error: f64,
    between_chain_se: Option<f64>,
    steps: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
    chains: Vec<ChainSummary>,
}

impl McmcSummary {
    fn new(pooled: &PooledResult, cfg: &ChainConfig) -> Self {
        McmcSummary {
            p_value: pooled.p_value,
            std_error: pooled.std_error,
            between_chain_se: pooled.between_chain_se,
            steps: cfg.steps,
            burn_in: cfg.burn_in,
            thin: cfg.thin,
            seed: cfg.seed,
            chains: pooled
                .chains
                .iter()
                .map(|c| ChainSummary {
                    seed: c.seed,
                    p_value: c.p_value,
                    samples: c.samples.len(),
                    accepted: c.accepted,
                    stayed: c.stayed,
                    acceptance_rate: c.acceptance_rate(),
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct Timings {
    fit_ms: f64,
    basis_ms: f64,
    sampling_ms: f64,
    total_ms: f64,
}

/// Output of `test` and `sample`.
#[derive(Serialize)]
struct RunReport {
    command: Vec<String>,
    input: String,
    rows: usize,
    cols: usize,
    total: u64,
    model: ModelFile,
    alt: Option<ModelFile>,
    statistic: StatKind,
    observed: f64,
    df: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    asymptotic_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alt_fit: Option<FitSummary>,
    mcmc: McmcSummary,
    basis: BasisSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats_out: Option<String>,
    timings: Timings,
}

fn cmd_walk(a: &WalkArgs, echo: &[String], full: bool, threads: Option<usize>, out: &mut dyn Write) -> Result<()> {
    let start = Instant::now();
    let chain = ChainConfig {
        steps: a.steps,
        burn_in: a.burn_in,
        thin: a.thin,
        seed: a.seed,
    };
    chain.validate()?;
    if a.chains == 0 {
        return Err(Error::InvalidChain("at least one chain is required".into()));
    }
    let s = setup(&a.input, a.alt.as_deref(), a.stat)?;
    let opts = FitOptions::default();

    let t = Instant::now();
    let null_fit = ipf_fit(&s.table, &s.null, &opts)?;
    let alt_fit = s.alt.as_ref().map(|m| ipf_fit(&s.table, m, &opts)).transpose()?;
    let observed = make_statistic(&s, opts)?.evaluate(&s.table);
    let fit_ms = ms(t);
    if !observed.is_finite() {
        return Err(Error::NonFiniteStatistic { value: observed, step: 0 });
    }

    let t = Instant::now();
    let basis = markov_basis(
        &s.null,
        &BasisOptions {
            enumeration_threshold: a.enumeration_threshold,
            force_enumeration: false,
        },
    );
    let basis_ms = ms(t);

    let t = Instant::now();
    let pooled = run_chains(&s.table, basis.configuration(), &basis, &chain, a.chains, threads, || {
        let mut st = make_statistic(&s, opts).expect("statistic was built once already");
        move |x: &Table| st.evaluate(x)
    })?;
    let sampling_ms = ms(t);

    if let Some(path) = &a.stats_out {
        let mut w = std::io::BufWriter::new(fs::File::create(path)?);
        for c in &pooled.chains {
            for v in &c.samples {
                writeln!(w, "{v}")?;
            }
        }
        w.flush()?;
    }

    let report = RunReport {
        command: echo.to_vec(),
        input: s.source.clone(),
        rows: s.table.rows(),
        cols: s.table.cols(),
        total: s.table.total(),
        model: ModelFile::from(s.null.spec()),
        alt: s.alt.as_ref().map(|m| ModelFile::from(m.spec())),
        statistic: s.kind,
        observed,
        df: s.df,
        asymptotic_p: if full { asymptotic_p(observed, s.df) } else { None },
        fit: full.then(|| FitSummary::from(&null_fit)),
        alt_fit: if full { alt_fit.as_ref().map(FitSummary::from) } else { None },
        mcmc: McmcSummary::new(&pooled, &chain),
        basis: basis_summary(&basis),
        stats_out: a.stats_out.as_ref().map(|p| p.display().to_string()),
        timings: Timings {
            fit_ms,
            basis_ms,
            sampling_ms,
            total_ms: ms(start),
        },
    };
    emit(out, &report)
}

#[derive(Serialize)]
struct FitReport {
    command: Vec<String>,
    input: String,
    model: ModelFile,
    rows: usize,
    cols: usize,
    expected: Vec<Vec<f64>>,
    iterations: usize,
    converged: bool,
    max_discrepancy: f64,
    chi2: f64,
    g2: f64,
    df: usize,
    asymptotic_p_chi2: Option<f64>,
    asymptotic_p_g2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alt: Option<ModelFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    llr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    llr_df: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    asymptotic_p_llr: Option<f64>,
}

fn cmd_fit(a: &FitArgs, echo: &[String], out: &mut dyn Write) -> Result<()> {
    let s = setup(&a.input, a.alt.as_deref(), a.alt.as_ref().map(|_| StatArg::Llr))?;
    let opts = FitOptions {
        tol: a.tol,
        max_iter: a.max_iter,
    };
    let fit = ipf_fit(&s.table, &s.null, &opts)?;
    let df = Configuration::new(&s.null).degrees_of_freedom();
    let chi2 = chi_square(&s.table, &fit.expected);
    let g2 = g_squared(&s.table, &fit.expected);
    let (llr, llr_df) = match &s.alt {
        Some(alt) => {
            if !crate::models::is_nested(&s.null, alt) {
                return Err(Error::NotNested("the null model is not a submodel of --alt".into()));
            }
            let alt_fit = ipf_fit(&s.table, alt, &opts)?;
            (Some(llr_from_fits(&s.table, &fit, &alt_fit)?), Some(s.df))
        }
        None => (None, None),
    };
    let report = FitReport {
        command: echo.to_vec(),
        input: s.source,
        model: ModelFile::from(s.null.spec()),
        rows: fit.rows,
        cols: fit.cols,
        expected: fit.expected_rows(),
        iterations: fit.iterations,
        converged: fit.converged,
        max_discrepancy: fit.max_discrepancy,
        chi2,
        g2,
        df,
        asymptotic_p_chi2: asymptotic_p(chi2, df),
        asymptotic_p_g2: asymptotic_p(g2, df),
        alt: s.alt.as_ref().map(|m| ModelFile::from(m.spec())),
        asymptotic_p_llr: llr.zip(llr_df).and_then(|(v, d)| asymptotic_p(v, d)),
        llr,
        llr_df,
    };
    emit(out, &report)
}

fn cmd_moves_dump(a: &DumpArgs, out: &mut dyn Write) -> Result<()> {
    let (rows, cols) = load_grid(&a.grid)?;
    let model = Model::new(load_model_spec(&a.model)?, rows, cols)?;
    let kinds = match &a.types {
        Some(list) => parse_types(list)?,
        None => crate::moves::basis_types(&model),
    };
    let basis = MoveBasis::enumerated(&model, &kinds);
    let moves = basis.moves().expect("enumerated basis");
    let write_all = |w: &mut dyn Write| -> Result<()> {
        for z in moves {
            writeln!(w, "{z}")?;
        }
        Ok(())
    };
    match &a.out {
        Some(path) => {
            let mut w = std::io::BufWriter::new(fs::File::create(path)?);
            write_all(&mut w)?;
            w.flush()?;
            let counts: Vec<(&str, usize)> = basis.type_counts().into_iter().map(|(t, n)| (t.as_str(), n)).collect();
            emit(out, &json!({"out": path.display().to_string(), "moves": moves.len(), "types": counts}))
        }
        None => write_all(out),
    }
}

#[derive(Serialize)]
struct Member {
    table: Vec<Vec<u64>>,
    probability: f64,
}

#[derive(Serialize)]
struct FiberReport {
    command: Vec<String>,
    input: String,
    model: ModelFile,
    statistic_t: Vec<u64>,
    size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    connectivity: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    members: Option<Vec<Member>>,
}

fn cmd_fiber(a: &FiberArgs, echo: &[String], out: &mut dyn Write) -> Result<()> {
    let s = setup(&a.input, a.alt.as_deref(), a.stat)?;
    let cfg = Configuration::new(&s.null);
    let t = cfg.sufficient_statistic(&s.table)?;
    let fiber = enumerate_fiber(&t, &cfg, a.cap)?;

    let connectivity = match &a.check_connect {
        Some(which) => {
            let kinds = if which == "model" {
                crate::moves::basis_types(&s.null)
            } else {
                parse_types(which)?
            };
            let basis = MoveBasis::enumerated(&s.null, &kinds);
            let comps = components(&fiber, basis.moves().expect("enumerated basis"));
            Some(json!({
                "types": kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>(),
                "moves": basis.moves().map_or(0, <[_]>::len),
                "connected": comps.len() <= 1,
                "components": comps.len(),
                "component_sizes": comps.iter().map(Vec::len).collect::<Vec<_>>(),
            }))
        }
        None => None,
    };

    let exact = if a.exact_p {
        let mut st = make_statistic(&s, FitOptions::default())?;
        let observed = st.evaluate(&s.table);
        let p = exact_pvalue_in(&fiber, &s.table, |x| st.evaluate(x));
        Some(json!({
            "statistic": s.kind,
            "observed": observed,
            "df": s.df,
            "p_value": p,
            "asymptotic_p": asymptotic_p(observed, s.df),
        }))
    } else {
        None
    };

    let members = a.members.then(|| {
        fiber
            .members()
            .iter()
            .zip(fiber.probabilities())
            .map(|(x, p)| Member {
                table: x.iter_rows().map(<[u64]>::to_vec).collect(),
                probability: p,
            })
            .collect()
    });

    emit(
        out,
        &FiberReport {
            command: echo.to_vec(),
            input: s.source,
            model: ModelFile::from(s.null.spec()),
            statistic_t: t.0,
            size: fiber.len(),
            connectivity,
            exact,
            members,
        },
    )
}

fn family_instances(a: &VerifyArgs, family: FamilyArg) -> Vec<(ModelSpec, usize, usize)> {
    let mut out = Vec::new();
    for r in a.min_dim..=a.max_dim {
        for c in a.min_dim..=a.max_dim {
            match family {
                FamilyArg::ChangePoint => {
                    out.extend(change_point_models(r, c, a.max_rects).into_iter().map(|s| (s, r, c)));
                }
                FamilyArg::Own => {
                    out.extend(block_bounds(r, c, a.blocks).into_iter().map(|b| (ModelSpec::BlockDiagonalOwn(b), r, c)));
                }
                FamilyArg::Common => out.extend(
                    block_bounds(r, c, a.blocks)
                        .into_iter()
                        .map(|b| (ModelSpec::CommonBlockDiagonal(b), r, c)),
                ),
            }
        }
    }
    out
}

fn cmd_verify(a: &VerifyArgs, echo: &[String], out: &mut dyn Write) -> Result<()> {
    let instances = match (&a.model, a.family) {
        (Some(m), _) => {
            let (r, c) = (a.rows.unwrap_or(0), a.cols.unwrap_or(0));
            vec![(load_model_spec(m)?, r, c)]
        }
        (None, Some(f)) => family_instances(a, f),
        (None, None) => return Err(Error::Parse("give --model or --family".into())),
    };
    let explicit = a.types.as_deref().map(parse_types).transpose()?;

    // Group by basis types so a --types override and per-model defaults
    // share one code path.
    type Instance = (ModelSpec, usize, usize);
    let mut groups: Vec<(Vec<MoveType>, Vec<Instance>)> = Vec::new();
    for (spec, r, c) in instances {
        let kinds = match &explicit {
            Some(k) => k.clone(),
            None => crate::moves::basis_types(&Model::new(spec.clone(), r, c)?),
        };
        match groups.iter_mut().find(|(k, _)| *k == kinds) {
            Some((_, v)) => v.push((spec, r, c)),
            None => groups.push((kinds, vec![(spec, r, c)])),
        }
    }
    let mut connectivity = Vec::new();
    let mut passed = true;
    for (kinds, inst) in &groups {
        let mut check = InstanceCheck::new(kinds, a.max_total);
        if a.indispensable {
            check = check.with_indispensability();
        }
        let rep = sweep(inst, &check, a.all || a.model.is_some())?;
        passed &= rep.passed();
        connectivity.push(rep);
    }

    let grobner = if a.grobner {
        let mut reports = Vec::new();
        let mut ok = true;
        for (spec, r, c) in groups.iter().flat_map(|(_, v)| v) {
            let m = Model::new(spec.clone(), *r, *c)?;
            if matches!(spec, ModelSpec::ChangePoint { .. } | ModelSpec::Independence) {
                let g = verify_grobner(&m, (*r).max(*c))?;
                ok &= g.passed();
                if a.all || a.model.is_some() || !g.passed() {
                    reports.push(g);
                }
            }
        }
        passed &= ok;
        Some(json!({"passed": ok, "reports": reports}))
    } else {
        None
    };

    emit(
        out,
        &json!({
            "command": echo,
            "max_total": a.max_total,
            "passed": passed,
            "connectivity": connectivity,
            "grobner": grobner,
        }),
    )
}

fn cmd_grobner(a: &GrobnerArgs, echo: &[String], out: &mut dyn Write) -> Result<()> {
    let instances: Vec<(ModelSpec, usize, usize)> = match &a.model {
        Some(m) => vec![(load_model_spec(m)?, a.rows.unwrap_or(0), a.cols.unwrap_or(0))],
        None => (a.min_dim..=a.max_dim)
            .flat_map(|r| (a.min_dim..=a.max_dim).map(move |c| (r, c)))
            .flat_map(|(r, c)| change_point_models(r, c, a.max_rects).into_iter().map(move |s| (s, r, c)))
            .collect(),
    };
    let start = Instant::now();
    let mut reports = Vec::new();
    let (mut pairs, mut failed) = (0usize, 0usize);
    for (spec, r, c) in &instances {
        let m = Model::new(spec.clone(), *r, *c)?;
        let g = verify_grobner(&m, a.max_dim)?;
        pairs += g.pairs_checked;
        if !g.passed() {
            failed += 1;
        }
        if a.all || a.model.is_some() || !g.passed() {
            reports.push(json!({"model": ModelFile::from(spec), "report": g}));
        }
    }
    emit(
        out,
        &json!({
            "command": echo,
            "instances": instances.len(),
            "pairs_checked": pairs,
            "failed_instances": failed,
            "passed": failed == 0,
            "reports": reports,
            "elapsed_ms": ms(start),
        }),
    )
}

fn cmd_datasets(a: &DatasetsArgs, out: &mut dyn Write) -> Result<()> {
    fs::create_dir_all(&a.out_dir)?;
    let mut written = Vec::new();
    for d in Dataset::ALL {
        let t = d.table();
        let path = a.out_dir.join(format!("{}.csv", d.name()));
        fs::write(&path, t.to_csv_string())?;
        written.push(json!({"dataset": d.name(), "file": path.display().to_string(), "rows": t.rows(), "cols": t.cols(), "total": t.total()}));
        for (name, spec) in d.models() {
            let path = a.out_dir.join(format!("{name}.json"));
            fs::write(&path, spec.to_json() + "\n")?;
            written.push(json!({"model": name, "file": path.display().to_string()}));
        }
    }
    emit(out, &json!({"written": written}))
}
