//! Subcommand definitions and implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pairswap::checks;
use pairswap::isotonic::empirical_isnr;
use pairswap::matching::{fit_plugin_moments, BinCount};
use pairswap::rng::derive_seed;
use pairswap::simulation::{run_trials, ModelKind, ModelSpec};
use pairswap::subsample::{subsample_study, SubsampleConfig};
use pairswap::{run_test, Dataset, Kernel, Method, Strategy, TestConfig};

use crate::config::{ModelName, SimConfig, Sweep, SweepKind};
use crate::csv_io::{load_dataset, read_columns, CsvSchema};
use crate::error::{CliError, CliResult};
use crate::record::{write_json, RunRecord};

#[derive(Debug, Parser)]
#[command(name = "pairswap", version, about = "Pairwise-swap tests of conditional independence under stochastic monotonicity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test X independent of Y given Z on a CSV file.
    Test(TestArgs),
    /// Run the Type I error and power sweeps declared in a TOML file.
    Simulate(SimulateArgs),
    /// Repeat the test on random half-samples.
    Subsample(SubsampleArgs),
    /// Empirical isotonic signal-to-noise ratio of a mean column.
    Isnr(IsnrArgs),
    /// Randomized self-checks of the library.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SchemaArgs {
    /// Response column (a name, or a one-based number with --no-header).
    #[arg(long, default_value = "x")]
    pub x_col: String,
    /// Covariate column.
    #[arg(long, default_value = "y")]
    pub y_col: String,
    /// Control column.
    #[arg(long, default_value = "z")]
    pub z_col: String,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// The file has no header row.
    #[arg(long)]
    pub no_header: bool,
}

impl SchemaArgs {
    pub fn schema(&self) -> CliResult<CsvSchema> {
        Ok(CsvSchema {
            x_col: self.x_col.clone(),
            y_col: self.y_col.clone(),
            z_col: self.z_col.clone(),
            delimiter: delimiter_byte(self.delimiter)?,
            has_header: !self.no_header,
        })
    }
}

fn delimiter_byte(c: char) -> CliResult<u8> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| CliError::Usage(format!("the delimiter must be one ASCII character, got `{c}`")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Args)]
pub struct TestFlags {
    /// linear, sign or trunc:<K>
    #[arg(long, default_value = "linear")]
    pub kernel: String,
    /// neighbour, crossbin[:<K or n^p>] or plugin
    #[arg(long, default_value = "neighbour")]
    pub matching: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Mc)]
    pub method: MethodArg,
    /// Monte Carlo swap draws.
    #[arg(long, default_value_t = pairswap::inference::DEFAULT_DRAWS)]
    pub draws: u64,
    #[arg(long, env = "PAIRSWAP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Level used to report the decision.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

impl TestFlags {
    fn config(&self) -> CliResult<TestConfig> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.draws == 0 {
            return Err(CliError::Usage("--draws must be at least 1".into()));
        }
        Ok(TestConfig {
            kernel: parse_kernel(&self.kernel)?,
            method: match self.method {
                MethodArg::Exact => Method::Exact,
                MethodArg::Mc => Method::MonteCarlo,
            },
            draws: self.draws,
            seed: self.seed,
            alpha: self.alpha,
        })
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    pub file: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[command(flatten)]
    pub flags: TestFlags,
    /// Held-out CSV (same columns) for fitting plug-in moments.
    #[arg(long)]
    pub train_file: Option<PathBuf>,
    /// Write a JSON run record here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    pub file: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[command(flatten)]
    pub flags: TestFlags,
    #[arg(long, default_value_t = 3000)]
    pub repeats: usize,
    /// Replace the binary response on each half-sample by a draw from a
    /// monotone fit on the complement.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IsnrArgs {
    pub file: PathBuf,
    #[arg(long, default_value = "mu")]
    pub mu_col: String,
    #[arg(long, default_value = "z")]
    pub z_col: String,
    /// Noise level.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[arg(long)]
    pub no_header: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Random instances per check.
    #[arg(long, default_value_t = 1000)]
    pub cases: usize,
    #[arg(long, env = "PAIRSWAP_SEED", default_value_t = 0)]
    pub seed: u64,
}

pub fn parse_kernel(s: &str) -> CliResult<Kernel> {
    s.parse().map_err(|e: pairswap::Error| CliError::Usage(e.to_string()))
}

/// Strategy from a `--matching` value. `plugin` needs training data.
pub fn parse_strategy(s: &str, train: Option<&Dataset>, kernel: &Kernel) -> CliResult<Strategy> {
    let usage = |m: String| CliError::Usage(m);
    match s.trim() {
        "neighbour" | "neighbor" => Ok(Strategy::Neighbour),
        "crossbin" => Ok(Strategy::CrossBin(BinCount::Power(2.0 / 3.0))),
        "plugin" => {
            let train = train.ok_or_else(|| usage("--matching plugin needs --train-file".into()))?;
            Ok(Strategy::Plugin(fit_plugin_moments(train, kernel)?))
        }
        other => match other.strip_prefix("crossbin:") {
            Some(k) => Ok(Strategy::CrossBin(
                k.parse().map_err(|e: pairswap::Error| usage(e.to_string()))?,
            )),
            None => Err(usage(format!("unknown matching `{other}`"))),
        },
    }
}

fn print_lines(lines: &[String]) {
    let mut out = std::io::stdout().lock();
    for l in lines {
        let _ = writeln!(out, "{l}");
    }
}

fn maybe_write(out: Option<&Path>, record: &RunRecord) -> CliResult<()> {
    match out {
        Some(p) => write_json(p, record),
        None => Ok(()),
    }
}

pub fn cmd_test(args: &TestArgs, argv: &[String]) -> CliResult<RunRecord> {
    let schema = args.schema.schema()?;
    let cfg = args.flags.config()?;
    let d = load_dataset(&args.file, &schema)?;
    let train = args
        .train_file
        .as_deref()
        .map(|p| load_dataset(p, &schema))
        .transpose()?;
    let strategy = parse_strategy(&args.flags.matching, train.as_ref(), &cfg.kernel)?;
    let result = run_test(&d, &cfg, &strategy)?;
    let method = match result.method {
        Method::Exact => "exact".to_string(),
        Method::MonteCarlo => format!("Monte Carlo, {} draws, seed {}", cfg.draws, cfg.seed),
    };
    let decision = if result.p_value <= cfg.alpha { "reject" } else { "do not reject" };
    print_lines(&[
        format!("observations: {}", d.len()),
        format!("pairs: {}", result.num_pairs),
        format!("statistic: {}", result.statistic),
        format!("p-value: {} ({method})", result.p_value),
        format!("at alpha = {}: {decision}", cfg.alpha),
    ]);
    let record = RunRecord::new(argv, cfg.seed, &result)?;
    maybe_write(args.out.as_deref(), &record)?;
    Ok(record)
}

/// One simulated cell: model parameters, strategy and per-level rates.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub sweep: String,
    pub kind: &'static str,
    pub model: ModelSpec,
    pub strategy: String,
    pub bins: Option<usize>,
    pub trials: usize,
    pub draws: u64,
    pub seed: u64,
    pub mean_pairs: f64,
    pub rates: Vec<pairswap::simulation::ExperimentReport>,
    pub p_values: Vec<f64>,
}

fn model_kinds(s: &Sweep) -> Vec<ModelKind> {
    let mut kinds = Vec::new();
    match s.model {
        ModelName::NullAdditive => {
            for &mu in &s.mu {
                for &gamma in &s.gamma {
                    kinds.push(ModelKind::NullAdditive { mu, gamma });
                }
            }
        }
        ModelName::PartialLinear => {
            for &beta in &s.beta {
                for &gamma in &s.gamma {
                    for &rho in &s.rho {
                        kinds.push(ModelKind::PartialLinear { beta, gamma, rho });
                    }
                }
            }
        }
        ModelName::BoundedPartialLinear => {
            for &beta in &s.beta {
                for &sigma in &s.sigma {
                    kinds.push(ModelKind::BoundedPartialLinear { beta, sigma });
                }
            }
        }
    }
    kinds
}

fn run_sweep(s: &Sweep, sweep_seed: u64) -> CliResult<Vec<CellResult>> {
    let kernel = parse_kernel(&s.kernel)?;
    let strategies = s
        .strategies
        .iter()
        .map(|name| {
            let strategy = parse_strategy(name, None, &kernel)?;
            Ok((name.clone(), strategy))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if let Some(a) = s.alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(CliError::Usage(format!("sweep `{}`: alpha {a} is outside (0, 1)", s.name)));
    }
    if s.draws == 0 {
        return Err(CliError::Usage(format!("sweep `{}`: draws must be at least 1", s.name)));
    }
    let cfg = TestConfig {
        kernel,
        method: Method::MonteCarlo,
        draws: s.draws,
        seed: 0,
        alpha: s.alpha.first().copied().unwrap_or(0.05),
    };
    let mut cells = Vec::new();
    for kind in model_kinds(s) {
        for &n in &s.n {
            let spec = ModelSpec::new(kind, n)?;
            if s.kind == SweepKind::Type1 && !spec.is_null() {
                return Err(CliError::Usage(format!(
                    "sweep `{}` is a type1 sweep but {kind:?} is not a null model",
                    s.name
                )));
            }
            for (name, strategy) in &strategies {
                let seed = derive_seed(sweep_seed, cells.len() as u64);
                let trials = run_trials(&spec, &cfg, strategy, s.trials, seed)?;
                let bins = match strategy {
                    Strategy::CrossBin(b) => Some(b.resolve(n)),
                    _ => None,
                };
                let mean_pairs = trials.num_pairs.iter().sum::<usize>() as f64 / s.trials.max(1) as f64;
                cells.push(CellResult {
                    sweep: s.name.clone(),
                    kind: match s.kind {
                        SweepKind::Type1 => "type1",
                        SweepKind::Power => "power",
                    },
                    model: spec,
                    strategy: name.clone(),
                    bins,
                    trials: s.trials,
                    draws: s.draws,
                    seed,
                    mean_pairs,
                    rates: s.alpha.iter().map(|&a| trials.report(a)).collect(),
                    p_values: trials.p_values,
                });
            }
        }
    }
    Ok(cells)
}

pub const CELL_COLUMNS: [&str; 17] = [
    "sweep", "kind", "model", "mu", "gamma", "beta", "rho", "sigma", "n", "strategy", "bins",
    "alpha", "trials", "draws", "rejection_rate", "std_err", "mean_pairs",
];

fn cell_rows(c: &CellResult) -> Vec<[String; 17]> {
    let n = c.model.n;
    let blank = String::new;
    let (model, mu, gamma, beta, rho, sigma) = match c.model.kind {
        ModelKind::NullAdditive { mu, gamma } => (
            "null_additive",
            mu.to_string(),
            gamma.to_string(),
            blank(),
            blank(),
            blank(),
        ),
        ModelKind::PartialLinear { beta, gamma, rho } => (
            "partial_linear",
            blank(),
            gamma.to_string(),
            beta.at(n).to_string(),
            rho.to_string(),
            blank(),
        ),
        ModelKind::BoundedPartialLinear { beta, sigma } => (
            "bounded_partial_linear",
            blank(),
            blank(),
            beta.at(n).to_string(),
            blank(),
            sigma.to_string(),
        ),
    };
    c.rates
        .iter()
        .map(|r| {
            [
                c.sweep.clone(),
                c.kind.to_string(),
                model.to_string(),
                mu.clone(),
                gamma.clone(),
                beta.clone(),
                rho.clone(),
                sigma.clone(),
                n.to_string(),
                c.strategy.clone(),
                c.bins.map_or_else(blank, |b| b.to_string()),
                r.alpha.to_string(),
                r.trials.to_string(),
                c.draws.to_string(),
                r.rejection_rate.to_string(),
                r.std_err.to_string(),
                c.mean_pairs.to_string(),
            ]
        })
        .collect()
}

fn describe_cell(c: &CellResult) -> String {
    let rows = cell_rows(c);
    let params: Vec<String> = CELL_COLUMNS[3..9]
        .iter()
        .zip(&rows[0][3..9])
        .filter(|(_, v)| !v.is_empty())
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    let rates: Vec<String> = c
        .rates
        .iter()
        .map(|r| format!("alpha {}: {:.4} (se {:.4})", r.alpha, r.rejection_rate, r.std_err))
        .collect();
    format!("{} | {} {} | {} | {}", c.sweep, rows[0][2], params.join(" "), c.strategy, rates.join(", "))
}

pub fn cmd_simulate(args: &SimulateArgs, argv: &[String]) -> CliResult<Vec<RunRecord>> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.config.display())))?;
    let config = SimConfig::parse(&text)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", args.out_dir.display())))?;

    let csv_path = args.out_dir.join("cells.csv");
    let json_path = args.out_dir.join("records.json");
    if config.sweeps.is_empty() {
        for p in [&csv_path, &json_path] {
            std::fs::write(p, "")
                .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", p.display())))?;
        }
        return Ok(Vec::new());
    }
    let io = |e: csv::Error| CliError::Internal(format!("cannot write {}: {e}", csv_path.display()));
    let mut csv = csv::Writer::from_path(&csv_path).map_err(io)?;
    csv.write_record(CELL_COLUMNS).map_err(io)?;

    let mut records = Vec::new();
    for (i, sweep) in config.sweeps.iter().enumerate() {
        let cells = run_sweep(sweep, derive_seed(config.seed, i as u64))?;
        for c in &cells {
            for row in cell_rows(c) {
                csv.write_record(&row).map_err(io)?;
            }
            print_lines(&[describe_cell(c)]);
        }
        records.push(RunRecord::new(argv, config.seed, &cells)?);
    }
    csv.flush()
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", csv_path.display())))?;
    write_json(&json_path, &records)?;
    Ok(records)
}

pub fn cmd_subsample(args: &SubsampleArgs, argv: &[String]) -> CliResult<RunRecord> {
    let schema = args.schema.schema()?;
    let test = args.flags.config()?;
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let d = load_dataset(&args.file, &schema)?;
    if d.len() < 4 {
        return Err(CliError::Data(format!(
            "the subsample study needs at least 4 rows, got {}",
            d.len()
        )));
    }
    let strategy = parse_strategy(&args.flags.matching, None, &test.kernel)?;
    let cfg = SubsampleConfig {
        repeats: args.repeats,
        synthetic: args.synthetic,
        seed: test.seed,
        test,
        strategy,
    };
    let report = subsample_study(&d, &cfg)?;
    let mut lines = vec![
        format!("repeats: {} (half-samples of {})", report.repeats, report.subsample_size),
        format!("mean p-value: {} (se {})", report.mean_p_value, report.std_err),
    ];
    lines.extend(
        report
            .rejections
            .iter()
            .map(|r| format!("P(p <= {}): {} (se {})", r.alpha, r.fraction, r.std_err)),
    );
    print_lines(&lines);
    let record = RunRecord::new(argv, cfg.seed, &report)?;
    maybe_write(args.out.as_deref(), &record)?;
    Ok(record)
}

#[derive(Debug, Serialize)]
struct IsnrResult {
    n: usize,
    sigma: f64,
    isnr: f64,
}

pub fn cmd_isnr(args: &IsnrArgs, argv: &[String]) -> CliResult<RunRecord> {
    if !(args.sigma.is_finite() && args.sigma > 0.0) {
        return Err(CliError::Usage(format!("--sigma must be positive, got {}", args.sigma)));
    }
    let cols = read_columns(
        &args.file,
        &[args.mu_col.as_str(), args.z_col.as_str()],
        delimiter_byte(args.delimiter)?,
        !args.no_header,
    )?;
    let isnr = empirical_isnr(&cols[0], &cols[1], args.sigma)?;
    print_lines(&[format!("isnr: {isnr}")]);
    let record = RunRecord::new(
        argv,
        0,
        &IsnrResult {
            n: cols[0].len(),
            sigma: args.sigma,
            isnr,
        },
    )?;
    maybe_write(args.out.as_deref(), &record)?;
    Ok(record)
}

pub fn cmd_check(args: &CheckArgs) -> CliResult<Vec<checks::CheckOutcome>> {
    let outcomes = checks::run_all(args.cases, args.seed);
    print_lines(
        &outcomes
            .iter()
            .map(|o| {
                let status = if o.passed() { "pass" } else { "FAIL" };
                format!("{status} {} ({} cases, {} failures)", o.name, o.cases, o.failures)
            })
            .collect::<Vec<_>>(),
    );
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.name).collect();
    if failed.is_empty() {
        Ok(outcomes)
    } else {
        Err(CliError::Internal(format!("checks failed: {}", failed.join(", "))))
    }
}

/// Runs a parsed command line. `argv` is echoed into run records.
pub fn run(cli: &Cli, argv: &[String]) -> CliResult<()> {
    match &cli.command {
        Command::Test(a) => cmd_test(a, argv).map(drop),
        Command::Simulate(a) => cmd_simulate(a, argv).map(drop),
        Command::Subsample(a) => cmd_subsample(a, argv).map(drop),
        Command::Isnr(a) => cmd_isnr(a, argv).map(drop),
        Command::Check(a) => cmd_check(a).map(drop),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_parsing() {
        let k = Kernel::Linear;
        assert!(matches!(parse_strategy("neighbour", None, &k), Ok(Strategy::Neighbour)));
        assert!(matches!(
            parse_strategy("crossbin:50", None, &k),
            Ok(Strategy::CrossBin(BinCount::Fixed(50)))
        ));
        assert!(matches!(
            parse_strategy("crossbin:n^0.8", None, &k),
            Ok(Strategy::CrossBin(BinCount::Power(_)))
        ));
        assert!(matches!(parse_strategy("plugin", None, &k), Err(CliError::Usage(_))));
        assert!(matches!(parse_strategy("random", None, &k), Err(CliError::Usage(_))));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
