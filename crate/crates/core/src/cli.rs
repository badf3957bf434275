//! The `corank` command line: CSV ingestion, tests, simulation studies and
//! grid/rank dumps.
//!
//! Exit status: 0 success, 1 usage or specification error, 2 data error,
//! 3 numerical error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use crate::baselines::ScatterKind;
use crate::center_outward::center_outward_ranks;
use crate::error::{CorankError, Result};
use crate::rank_tests::{regression_test, GridOptions, TestResult, DEFAULT_SEED};
use crate::scores::ScoreFunction;
use crate::simulation::{run_method, run_null_distribution, run_power_study, Method, SimConfig, FULL_SCALE_REPLICATIONS};
use crate::sphere_grid::{build_grid, Factorization, GridSpec};

/// Smallest sample accepted from a file.
pub const MIN_ROWS: usize = 4;

#[derive(Debug, Parser)]
#[command(name = "corank", version, about = "Center-outward rank tests for multivariate location, MANOVA and regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test equality of location between two samples stored in two CSV files.
    TwoSample(TwoSampleArgs),
    /// One-way MANOVA: test for no group effect.
    Manova(ManovaArgs),
    /// Test a regression coefficient matrix against a hypothesized value.
    Regression(RegressionArgs),
    /// Run a Monte Carlo size/power study described by a JSON config.
    Simulate(SimulateArgs),
    /// Write the grid used for a given sample size and dimension.
    GridDump(GridDumpArgs),
    /// Write center-outward ranks and signs of a sample.
    Ranks(RanksArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScoreArg {
    Sign,
    Wilcoxon,
    Vdw,
}

impl ScoreArg {
    fn score(self, d: usize) -> ScoreFunction {
        match self {
            ScoreArg::Sign => ScoreFunction::Sign,
            ScoreArg::Wilcoxon => ScoreFunction::Wilcoxon,
            ScoreArg::Vdw => ScoreFunction::VanDerWaerden { d },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScatterArg {
    Sample,
    Tyler,
}

impl From<ScatterArg> for ScatterKind {
    fn from(s: ScatterArg) -> Self {
        match s {
            ScatterArg::Sample => ScatterKind::Sample,
            ScatterArg::Tyler => ScatterKind::Tyler,
        }
    }
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Number of radii (requires --ns).
    #[arg(long = "nr", requires = "n_s")]
    n_r: Option<usize>,
    /// Number of directions (requires --nr).
    #[arg(long = "ns", requires = "n_r")]
    n_s: Option<usize>,
    /// Seed for placing tie-break gridpoints.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Do not force antipodally symmetric directions.
    #[arg(long)]
    no_symmetrize: bool,
}

impl GridArgs {
    fn options(&self) -> GridOptions {
        let factorization = match (self.n_r, self.n_s) {
            (Some(n_r), Some(n_s)) => Factorization::Explicit { n_r, n_s },
            _ => Factorization::Balanced,
        };
        GridOptions { factorization, symmetrize: !self.no_symmetrize, seed: self.seed }
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write output to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit JSON (the default for test results).
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long, value_enum, default_value_t = ScoreArg::Wilcoxon)]
    score: ScoreArg,
    #[arg(long, value_enum, default_value_t = Method::Co)]
    method: Method,
    /// Scatter estimator for sphericized and elliptical methods.
    #[arg(long, value_enum, default_value_t = ScatterArg::Sample)]
    scatter: ScatterArg,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct TwoSampleArgs {
    /// The two sample files.
    #[arg(long, num_args = 2, value_names = ["A", "B"], required = true)]
    input: Vec<PathBuf>,
    /// Response columns (default: every column).
    #[arg(long, value_delimiter = ',')]
    response_cols: Vec<String>,
    #[command(flatten)]
    test: TestArgs,
}

#[derive(Debug, Args)]
struct ManovaArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    group_col: String,
    #[arg(long, value_delimiter = ',', required = true)]
    response_cols: Vec<String>,
    #[command(flatten)]
    test: TestArgs,
}

#[derive(Debug, Args)]
struct RegressionArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    response_cols: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    covariate_cols: Vec<String>,
    /// CSV with a header and one row per covariate holding the hypothesized
    /// coefficients (default: zero).
    #[arg(long)]
    beta0: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ScoreArg::Wilcoxon)]
    score: ScoreArg,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Power curve CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the full replication count instead of the config's.
    #[arg(long)]
    full_scale: bool,
    /// Write null statistics per method and replication instead of a power curve.
    #[arg(long)]
    null: bool,
}

#[derive(Debug, Args)]
struct GridDumpArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RanksArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',')]
    response_cols: Vec<String>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A parsed CSV table: header plus string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl Table {
    pub fn read<P: AsRef<Path>>(path: P) -> Result<Table> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| CorankError::Data(format!("{}: {e}", path.display())))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CorankError::Data(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(CorankError::Data(format!("{}: empty file", path.display())));
        }
        let mut records = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| CorankError::Data(format!("{}: line {}: {e}", path.display(), i + 2)))?;
            records.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table { headers, records })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorankError::Data(format!("missing column '{name}' (have {})", self.headers.join(", "))))
    }

    /// Selected columns as an `n x k` real matrix.
    pub fn numeric(&self, columns: &[String]) -> Result<DMatrix<f64>> {
        let idx = columns.iter().map(|c| self.column_index(c)).collect::<Result<Vec<_>>>()?;
        let mut out = DMatrix::zeros(self.records.len(), idx.len());
        for (i, rec) in self.records.iter().enumerate() {
            for (j, &k) in idx.iter().enumerate() {
                let cell = rec.get(k).map(String::as_str).unwrap_or("");
                out[(i, j)] = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CorankError::Data(format!("line {}: column '{}': not a number: '{cell}'", i + 2, columns[j]))
                })?;
            }
        }
        Ok(out)
    }

    pub fn labels(&self, column: &str) -> Result<Vec<String>> {
        let k = self.column_index(column)?;
        Ok(self.records.iter().map(|r| r.get(k).cloned().unwrap_or_default()).collect())
    }
}

/// Responses, optional group labels and optional covariates from one file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub responses: DMatrix<f64>,
    pub response_names: Vec<String>,
    pub groups: Option<Vec<String>>,
    pub covariates: Option<DMatrix<f64>>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.responses.nrows()
    }

    /// Responses split by group label, in order of first appearance.
    pub fn grouped(&self) -> Vec<(String, DMatrix<f64>)> {
        let Some(labels) = &self.groups else {
            return vec![(String::new(), self.responses.clone())];
        };
        let mut order: Vec<&String> = Vec::new();
        for l in labels {
            if !order.contains(&l) {
                order.push(l);
            }
        }
        order
            .into_iter()
            .map(|g| {
                let rows: Vec<usize> = (0..labels.len()).filter(|&i| &labels[i] == g).collect();
                (g.clone(), self.responses.select_rows(rows.iter()))
            })
            .collect()
    }
}

/// Loads a dataset; an empty `responses` selection takes every column not
/// used as group or covariate.
pub fn load_csv<P: AsRef<Path>>(
    path: P,
    responses: &[String],
    group: Option<&str>,
    covariates: &[String],
) -> Result<Dataset> {
    let table = Table::read(&path)?;
    let response_names: Vec<String> = if responses.is_empty() {
        table
            .headers
            .iter()
            .filter(|h| Some(h.as_str()) != group && !covariates.contains(h))
            .cloned()
            .collect()
    } else {
        responses.to_vec()
    };
    if response_names.is_empty() {
        return Err(CorankError::Data("no response columns selected".into()));
    }
    if table.records.len() < MIN_ROWS {
        return Err(CorankError::Data(format!(
            "{}: need at least {MIN_ROWS} data rows, found {}",
            path.as_ref().display(),
            table.records.len()
        )));
    }
    Ok(Dataset {
        responses: table.numeric(&response_names)?,
        response_names,
        groups: group.map(|g| table.labels(g)).transpose()?,
        covariates: if covariates.is_empty() { None } else { Some(table.numeric(covariates)?) },
    })
}

fn open_out<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn emit_result(result: &TestResult, output: &OutputArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut out = open_out(&output.out, stdout)?;
    serde_json::to_writer_pretty(&mut out, result)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run_test(groups: &[DMatrix<f64>], args: &TestArgs) -> Result<TestResult> {
    let d = groups[0].ncols();
    let score = args.score.score(d);
    let opts = args.grid.options();
    run_method(args.method, groups, &score, &opts, args.scatter.into())
}

fn two_sample(args: &TwoSampleArgs, stdout: &mut dyn Write) -> Result<()> {
    let a = load_csv(&args.input[0], &args.response_cols, None, &[])?;
    let b = load_csv(&args.input[1], &args.response_cols, None, &[])?;
    if a.response_names != b.response_names {
        return Err(CorankError::Data("the two files have different response columns".into()));
    }
    let result = run_test(&[a.responses, b.responses], &args.test)?;
    emit_result(&result, &args.test.output, stdout)
}

fn manova(args: &ManovaArgs, stdout: &mut dyn Write) -> Result<()> {
    let data = load_csv(&args.input, &args.response_cols, Some(&args.group_col), &[])?;
    let groups: Vec<DMatrix<f64>> = data.grouped().into_iter().map(|(_, g)| g).collect();
    if groups.len() < 2 {
        return Err(CorankError::Data(format!("column '{}' has a single group", args.group_col)));
    }
    let result = run_test(&groups, &args.test)?;
    emit_result(&result, &args.test.output, stdout)
}

fn regression(args: &RegressionArgs, stdout: &mut dyn Write) -> Result<()> {
    let data = load_csv(&args.input, &args.response_cols, None, &args.covariate_cols)?;
    let c = data.covariates.clone().expect("covariates were requested");
    let (m, d) = (c.ncols(), data.responses.ncols());
    let beta0 = match &args.beta0 {
        None => DMatrix::zeros(m, d),
        Some(path) => {
            let table = Table::read(path)?;
            if table.records.len() != m || table.headers.len() != d {
                return Err(CorankError::Data(format!(
                    "beta0 must have {m} rows and {d} columns, got {} and {}",
                    table.records.len(),
                    table.headers.len()
                )));
            }
            table.numeric(&table.headers.clone())?
        }
    };
    let result = regression_test(&data.responses, &c, &beta0, &args.score.score(d), &args.grid.options())?;
    emit_result(&result, &args.output, stdout)
}

fn simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = SimConfig::from_file(&args.config)?;
    if args.full_scale {
        cfg.replications = FULL_SCALE_REPLICATIONS;
    }
    let mut out = open_out(&args.out, stdout)?;
    if args.null {
        let stats = run_null_distribution(&cfg)?;
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["method", "replication", "statistic"])?;
        for (method, values) in &stats {
            for (r, v) in values.iter().enumerate() {
                w.write_record([method.name().to_string(), r.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
    } else {
        run_power_study(&cfg)?.write_csv(&mut out)?;
    }
    out.flush()?;
    Ok(())
}

fn grid_dump(args: &GridDumpArgs, stdout: &mut dyn Write) -> Result<()> {
    let opts = args.grid.options();
    let spec = GridSpec::new(args.n, args.d, opts.factorization, opts.symmetrize, opts.seed)?;
    let grid = build_grid(&spec)?;
    let mut out = open_out(&args.out, stdout)?;
    grid.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn ranks(args: &RanksArgs, stdout: &mut dyn Write) -> Result<()> {
    let data = load_csv(&args.input, &args.response_cols, None, &[])?;
    let spec = args.grid.options().spec(data.n(), data.responses.ncols())?;
    let (map, rs) = center_outward_ranks(&data.responses, &spec)?;
    let mut out = open_out(&args.out, stdout)?;
    rs.write_csv(&map, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status. Errors are reported on `stderr`.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = write!(stderr, "{}", e.render());
            return 1;
        }
        Err(e) => {
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    let outcome = match &cli.command {
        Command::TwoSample(a) => two_sample(a, stdout),
        Command::Manova(a) => manova(a, stdout),
        Command::Regression(a) => regression(a, stdout),
        Command::Simulate(a) => simulate(a, stdout),
        Command::GridDump(a) => grid_dump(a, stdout),
        Command::Ranks(a) => ranks(a, stdout),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut io::stdout().lock(), &mut io::stderr().lock())
}
