//! Command-line surface. Exit codes: 0 success, 1 usage, 2 data, 3 internal
//! invariant failure.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::engine::{fit, fit_batch};
use crate::io::{self as files, GroupBy, IoError, LineError, ResultRow, SummaryTable};
use crate::models::ModelSpec;
use crate::optimizer::SolveSettings;
use crate::stats;
use crate::synth::{generate_dataset, BenchmarkConfig, Regime};

pub const DEFAULT_LAMBDA_SETS: &str = "1,2,3;1,3,5;1,2,3,4,5";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Internal(_) => 3,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "boundzne", version, about = "Bounded zero-noise extrapolation benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Fit one model to one series and print the result as a JSON line.
    Fit(FitArgs),
    /// Fit every record of a dataset against a list of models.
    Benchmark(BenchmarkArgs),
    /// Pair bounded and unbounded fits and write the summary table.
    Compare(CompareArgs),
    /// Write ECDF step points and per-group improvement fractions.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Ideal-value bin width; must divide 2.
    #[arg(long, default_value_t = 0.05)]
    pub bins: f64,
    #[arg(long, default_value_t = 100)]
    pub per_bin: usize,
    #[arg(long, default_value_t = 10_000)]
    pub shots: u64,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value = DEFAULT_LAMBDA_SETS)]
    pub lambda_sets: String,
    #[arg(long, default_value = "mild,harsh")]
    pub regimes: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Poly,
    Exp,
    Polyexp,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Series file, or `-` for stdin.
    #[arg(long)]
    pub series: String,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub degree: Option<usize>,
    /// `free` or a fixed value.
    #[arg(long)]
    pub asymptote: Option<String>,
    #[arg(long)]
    pub bounded: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl FitArgs {
    pub fn spec(&self) -> Result<ModelSpec, CliError> {
        let mut s = String::from(match self.family {
            FamilyArg::Poly => "poly",
            FamilyArg::Exp => "exp",
            FamilyArg::Polyexp => "polyexp",
        });
        if let Some(d) = self.degree {
            let _ = write!(s, ":d={d}");
        }
        if let Some(a) = &self.asymptote {
            let _ = write!(s, ":a={a}");
        }
        s.push_str(if self.bounded { ":bounded" } else { ":unbounded" });
        s.parse().map_err(|e: crate::models::ModelError| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated model specs; a spec without a bounded flag expands to
    /// both arms.
    #[arg(long)]
    pub models: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, default_value = "lambda_set,backend,width")]
    pub group_by: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Summary table written by `compare`; its `.deltas.jsonl` sibling is read.
    #[arg(long)]
    pub compare: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub ecdf_cap: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn usage(e: LineError) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn parse_model_list(input: &str) -> Result<Vec<ModelSpec>, CliError> {
    let mut specs = Vec::new();
    for part in input.split([',', ' ']).filter(|p| !p.trim().is_empty()) {
        let arms = ModelSpec::parse_arms(part.trim()).map_err(|e| CliError::Usage(e.to_string()))?;
        for arm in arms {
            if !specs.contains(&arm) {
                specs.push(arm);
            }
        }
    }
    if specs.is_empty() {
        return Err(CliError::Usage("no models given".into()));
    }
    Ok(specs)
}

pub fn simulate_config(args: &SimulateArgs) -> Result<BenchmarkConfig, CliError> {
    let regimes = args
        .regimes
        .split(',')
        .map(|name| Regime::named(name.trim()).ok_or_else(|| CliError::Usage(format!("unknown regime `{name}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let config = BenchmarkConfig {
        bin_width: args.bins,
        curves_per_bin: args.per_bin,
        lambda_sets: files::parse_lambda_sets(&args.lambda_sets).map_err(usage)?,
        repetitions: args.reps,
        shots: args.shots,
        regimes,
        seed: args.seed,
        ..BenchmarkConfig::default()
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = simulate_config(args)?;
    let dataset = generate_dataset(&config).map_err(|e| CliError::Data(e.to_string()))?;
    files::write_dataset(&dataset.records, &args.out)?;
    Ok(())
}

fn fit_one(args: &FitArgs) -> Result<String, CliError> {
    let spec = args.spec()?;
    let text = if args.series == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::Data(format!("stdin: {e}")))?;
        s
    } else {
        fs::read_to_string(&args.series).map_err(|e| CliError::Data(format!("{}: {e}", args.series)))?
    };
    let series = files::parse_series(&text).map_err(|e| CliError::Data(e.to_string()))?;
    let result = fit(&series, &spec, &SolveSettings::default(), args.seed);
    check_bound(&result)?;
    serde_json::to_string(&result).map_err(|e| CliError::Internal(e.to_string()))
}

fn check_bound(result: &crate::engine::FitResult) -> Result<(), CliError> {
    if result.spec.bounded {
        if let Some(v) = result.finite_estimate() {
            if !(-1.0..=1.0).contains(&v) {
                return Err(CliError::Internal(format!("bounded fit {} produced {v}", result.spec)));
            }
        }
    }
    Ok(())
}

fn benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let specs = parse_model_list(&args.models)?;
    let records = files::read_dataset(&args.data)?;
    let by_id: HashMap<&str, usize> = records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    if by_id.len() != records.len() {
        return Err(CliError::Data("duplicate record ids".into()));
    }
    let items = fit_batch(&records, &specs, &SolveSettings::default(), args.seed);
    let mut rows = Vec::with_capacity(items.len());
    for item in items {
        check_bound(&item.result)?;
        let record = &records[by_id[item.record_id.as_str()]];
        rows.push(ResultRow::new(record, item.result));
    }
    files::write_results(&rows, &args.out)?;
    Ok(())
}

/// Asserts the per-arm summary invariants before anything is written.
pub fn check_summary(table: &SummaryTable) -> Result<(), CliError> {
    for s in &table.rows {
        let arms = [(s.mae_bounded, s.mse_bounded), (s.mae_unbounded, s.mse_unbounded)];
        for (mae, mse) in arms {
            if let (Some(mae), Some(mse)) = (mae, mse) {
                if mae.mean > mse.mean.sqrt() * (1.0 + 1e-12) + 1e-300 {
                    return Err(CliError::Internal(format!("MAE exceeds RMSE in group {}", s.group)));
                }
            }
        }
        if s.coverage_matched > s.coverage_bounded.min(s.coverage_unbounded) {
            return Err(CliError::Internal(format!("matched coverage too large in group {}", s.group)));
        }
    }
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<(), CliError> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha {} not in (0, 1)", args.alpha)));
    }
    let group_by = GroupBy::parse(&args.group_by).map_err(usage)?;
    let rows = files::read_results(&args.results)?;
    let table = files::summarize_results(&rows, group_by).map_err(|e| CliError::Data(e.to_string()))?;
    check_summary(&table)?;
    files::write_summary(&table, args.alpha, &args.out)?;
    files::write_deltas(&files::delta_rows(&table), &files::deltas_path(&args.out))?;
    Ok(())
}

pub const REPORT_FILE: &str = "report.tsv";

fn report(args: &ReportArgs) -> Result<(), CliError> {
    if !(args.ecdf_cap > 0.0) {
        return Err(CliError::Usage("ecdf cap must be positive".into()));
    }
    let groups = files::read_deltas(&files::deltas_path(&args.compare))?;
    fs::create_dir_all(&args.out_dir).map_err(|e| CliError::Data(format!("{}: {e}", args.out_dir.display())))?;
    let mut summary = String::from("file\tfamily\tlambda_set\tbackend\twidth\tk\tfraction_positive\tholm_p\n");
    for (i, g) in groups.iter().enumerate() {
        let name = format!("ecdf-{i:03}.tsv");
        let (fraction, body) = match stats::ecdf_winsorized(&g.delta, args.ecdf_cap) {
            Ok(e) => {
                let mut body = format!("# {}\nx\tF\n", g.group);
                for (x, f) in &e.points {
                    let _ = writeln!(body, "{x}\t{f}");
                }
                (files::format_percent(e.fraction_positive), Some(body))
            }
            Err(_) => (files::MISSING.to_string(), None),
        };
        let file = match body {
            Some(body) => {
                let path = args.out_dir.join(&name);
                fs::write(&path, body).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                name
            }
            None => files::MISSING.to_string(),
        };
        let _ = writeln!(
            summary,
            "{file}\t{}\t{}\t{}\t{}\t{}\t{fraction}\t{}",
            g.group.family,
            g.group.lambda_set,
            g.group.backend,
            g.group.width,
            g.delta.len(),
            g.holm_p.map(files::format_sci).unwrap_or_else(|| files::MISSING.into()),
        );
    }
    let path = args.out_dir.join(REPORT_FILE);
    fs::write(&path, summary).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => {
            println!("{}", fit_one(a)?);
            Ok(())
        }
        Command::Benchmark(a) => benchmark(a),
        Command::Compare(a) => compare(a),
        Command::Report(a) => report(a),
    }
}
