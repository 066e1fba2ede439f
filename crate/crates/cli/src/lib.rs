//! Command-line front end for `dpclustx`.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpclustx::chart::{chart_spec, render_svg};
use dpclustx::dataset::{load_csv, LoadOptions};
use dpclustx::dpmech::PrivacyBudget;
use dpclustx::eval::EvalReport;
use dpclustx::explain::{
    dp_naive_explain, dp_tabee_explain, generate_global_explanation, tabee_explain,
    ExplanationReport, GlobalExplanation, DEFAULT_K,
};
use dpclustx::{ClusteringFunction, CountTable, Dataset, Error, Schema, Weights};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_GUARD: i32 = 4;

const DEFAULT_EPS: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(
    name = "dpclustx",
    version,
    about = "Differentially private histogram explanations for clusterings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the private explanation pipeline.
    Explain(ExplainArgs),
    /// Run one of the comparison pipelines.
    Baseline {
        #[arg(value_enum)]
        which: Baseline,
        #[command(flatten)]
        args: ExplainArgs,
    },
    /// Score an explanation against the exact data and a reference explanation.
    Evaluate(EvaluateArgs),
    /// Write one cluster label per row for a set of centers.
    Assign(AssignArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Tabee,
    DpTabee,
    DpNaive,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Schema JSON with declared attribute domains.
    #[arg(long)]
    pub schema: PathBuf,
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON array of cluster centers.
    #[arg(long, conflicts_with = "labels", required_unless_present = "labels")]
    pub centers: Option<PathBuf>,
    /// Single-column CSV of per-row cluster labels.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Rows with out-of-domain cells that may be dropped before loading fails.
    #[arg(long, default_value_t = 0)]
    pub max_rejected_rows: usize,
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub lambda_int: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub lambda_suf: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub lambda_div: f64,
}

impl WeightArgs {
    fn weights(&self) -> Result<Weights, Error> {
        Weights::new(self.lambda_int, self.lambda_suf, self.lambda_div)
    }
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Candidate attributes kept per cluster.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long)]
    pub eps_candset: Option<f64>,
    #[arg(long)]
    pub eps_topcomb: Option<f64>,
    #[arg(long)]
    pub eps_hist: Option<f64>,
    /// Total budget split evenly over the three stages.
    #[arg(long, conflicts_with_all = ["eps_candset", "eps_topcomb", "eps_hist"])]
    pub total_eps: Option<f64>,
    /// Total budget of the dp-naive baseline.
    #[arg(long)]
    pub eps: Option<f64>,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write chart.svg.
    #[arg(long)]
    pub svg: bool,
}

impl ExplainArgs {
    fn budget(&self) -> Result<PrivacyBudget, Error> {
        match self.total_eps {
            Some(total) => PrivacyBudget::even(total),
            None => PrivacyBudget::new(
                self.eps_candset.unwrap_or(DEFAULT_EPS),
                self.eps_topcomb.unwrap_or(DEFAULT_EPS),
                self.eps_hist.unwrap_or(DEFAULT_EPS),
            ),
        }
    }

    fn any_budget_flag(&self) -> bool {
        self.eps_candset.is_some()
            || self.eps_topcomb.is_some()
            || self.eps_hist.is_some()
            || self.total_eps.is_some()
            || self.eps.is_some()
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Explanation JSON to score.
    #[arg(long)]
    pub explanation: PathBuf,
    /// Reference explanation JSON (e.g. the non-private baseline).
    #[arg(long)]
    pub reference: PathBuf,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AssignArgs {
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub centers: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub max_rejected_rows: usize,
    /// Output labels CSV.
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SearchSpaceTooLarge { .. }
        | Error::InvalidBudget(_)
        | Error::NonPositiveEpsilon(_)
        | Error::NegativeEpsilon(_) => EXIT_GUARD,
        Error::InvalidWeights(_)
        | Error::InvalidSchema(_)
        | Error::ZeroK
        | Error::KTooLarge { .. }
        | Error::EmptyAttributeSet
        | Error::NonPositiveScale(_)
        | Error::NonPositiveSensitivity(_)
        | Error::EmptyCandidateSet => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, Error> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Per-row labels, one per line; a non-numeric first line is a header.
pub fn read_labels(path: &Path) -> Result<Vec<usize>, Error> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = record.get(0).unwrap_or("").trim();
        match cell.parse::<usize>() {
            Ok(v) => labels.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    row: i,
                    column: "label".into(),
                    message: format!("`{cell}` is not a cluster label"),
                })
            }
        }
    }
    Ok(labels)
}

pub fn read_centers(path: &Path) -> Result<Vec<Vec<f64>>, Error> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

struct Loaded {
    schema: Schema,
    counts: CountTable<u64>,
}

fn load(args: &DataArgs) -> Result<Loaded, Error> {
    let schema = Schema::from_json_file(&args.schema)?;
    let data: Dataset = load_csv(
        &args.data,
        &schema,
        LoadOptions {
            max_rejected_rows: args.max_rejected_rows,
        },
    )?;
    let f = match (&args.centers, &args.labels) {
        (Some(c), _) => ClusteringFunction::center_based(read_centers(c)?)?,
        (None, Some(l)) => ClusteringFunction::label_table(read_labels(l)?, None)?,
        (None, None) => unreachable!("clap requires a clustering source"),
    };
    let partition = f.assign(&data)?;
    let counts = CountTable::build(&data, &partition)?;
    Ok(Loaded { schema, counts })
}

fn write_explanation(
    out: &Path,
    explanation: &GlobalExplanation,
    schema: &Schema,
    svg: bool,
) -> Result<(), Error> {
    let report = ExplanationReport::new(explanation, schema)?;
    write_atomic(&out.join("explanation.json"), &to_json(&report)?)?;
    let spec = chart_spec(&report);
    write_atomic(&out.join("chart.json"), &to_json(&spec)?)?;
    if svg {
        write_atomic(&out.join("chart.svg"), render_svg(&spec).as_bytes())?;
    }
    eprintln!(
        "privacy loss: total={} over {} ledger entries",
        report.budget.total,
        report.budget.ledger.entries().len()
    );
    Ok(())
}

fn cmd_explain(args: &ExplainArgs) -> Result<(), Error> {
    let weights = args.weights.weights()?;
    let budget = args.budget()?;
    if args.eps.is_some() {
        eprintln!("warning: --eps applies to the dp-naive baseline only; ignored");
    }
    echo_budget(&budget);
    let loaded = load(&args.data)?;
    let e = generate_global_explanation(&loaded.counts, args.k, &budget, &weights, args.seed)?;
    write_explanation(&args.out, &e, &loaded.schema, args.svg)
}

fn echo_budget(budget: &PrivacyBudget) {
    eprintln!(
        "privacy budget: eps_candset={} eps_topcomb={} eps_hist={} total={}",
        budget.eps_candset,
        budget.eps_topcomb,
        budget.eps_hist,
        budget.total()
    );
}

fn cmd_baseline(which: Baseline, args: &ExplainArgs) -> Result<(), Error> {
    let weights = args.weights.weights()?;
    let explanation_of = |loaded: &Loaded| match which {
        Baseline::Tabee => tabee_explain(&loaded.counts, args.k, &weights),
        Baseline::DpTabee => {
            dp_tabee_explain(&loaded.counts, args.k, &args.budget()?, &weights, args.seed)
        }
        Baseline::DpNaive => {
            dp_naive_explain(&loaded.counts, args.k, naive_eps(args), &weights, args.seed)
        }
    };
    match which {
        Baseline::Tabee if args.any_budget_flag() => {
            eprintln!("warning: tabee is not private; budget flags ignored")
        }
        Baseline::Tabee => {}
        Baseline::DpTabee => echo_budget(&args.budget()?),
        Baseline::DpNaive => eprintln!("privacy budget: eps={}", naive_eps(args)),
    }
    let loaded = load(&args.data)?;
    let e = explanation_of(&loaded)?;
    write_explanation(&args.out, &e, &loaded.schema, args.svg)
}

fn naive_eps(args: &ExplainArgs) -> f64 {
    args.eps.or(args.total_eps).unwrap_or(DEFAULT_EPS)
}

fn read_report(path: &Path) -> Result<ExplanationReport, Error> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Error> {
    let weights = args.weights.weights()?;
    let loaded = load(&args.data)?;
    let ac = read_report(&args.explanation)?.combination(&loaded.schema)?;
    let reference = read_report(&args.reference)?.combination(&loaded.schema)?;
    let table = loaded.counts.to_scalar::<f64>();
    let report = EvalReport::build(&table, &loaded.schema, &ac, &reference, &weights)?;
    write_atomic(&args.out.join("eval.json"), &to_json(&report)?)?;
    let csv = format!("{}\n{}\n", EvalReport::CSV_HEADER, report.csv_row());
    write_atomic(&args.out.join("eval.csv"), csv.as_bytes())?;
    eprintln!(
        "quality={} reference_quality={} mae={}",
        report.quality, report.reference_quality, report.mae
    );
    Ok(())
}

fn cmd_assign(args: &AssignArgs) -> Result<(), Error> {
    let schema = Schema::from_json_file(&args.schema)?;
    let data = load_csv(
        &args.data,
        &schema,
        LoadOptions {
            max_rejected_rows: args.max_rejected_rows,
        },
    )?;
    let f = ClusteringFunction::center_based(read_centers(&args.centers)?)?;
    let partition = f.assign(&data)?;
    let mut out = String::from("label\n");
    for l in partition.row_labels() {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    write_atomic(&args.out, out.as_bytes())
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("DPCLUSTX_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| format!("DPCLUSTX_THREADS must be a positive integer, got `{value}`"))?;
    if n == 0 {
        return Err("DPCLUSTX_THREADS must be at least 1".into());
    }
    // a second call in the same process keeps the existing pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Run a parsed command and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_CONFIG;
    }
    let result = match &cli.command {
        Command::Explain(args) => cmd_explain(args),
        Command::Baseline { which, args } => cmd_baseline(*which, args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Assign(args) => cmd_assign(args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
