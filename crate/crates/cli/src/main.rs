//! `rkqte` command line: estimate from a CSV file, run the coverage study,
//! or report bandwidths.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rkqte::bandwidth::select_bandwidths;
use rkqte::{
    ingest, run_coverage, AnalysisConfig, Arm, CellSpec, DgpConfig, KernelSpec, Real, Report, RkdError, Sample, Warning,
};

#[derive(Parser)]
#[command(name = "rkqte", version, about = "Quantile treatment effects in the fuzzy regression kink design")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the QTE process and run both uniform tests on a CSV file.
    Estimate(EstimateArgs),
    /// Monte Carlo coverage study on the simulation design.
    Simulate(SimulateArgs),
    /// Run the bandwidth selectors only.
    Bandwidth(BandwidthArgs),
    /// Print the version.
    Version,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F64,
    F32,
}

/// Flags shared by every subcommand that builds an [`AnalysisConfig`].
/// Each one overrides the matching key in `--config`.
#[derive(Args, Clone)]
struct ConfigFlags {
    /// Flat TOML file with analysis settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "RKQTE_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    kernel: Option<KernelSpec>,
    #[arg(long)]
    kink_location: Option<f64>,
    #[arg(long)]
    theta_a: Option<f64>,
    #[arg(long)]
    y_grid_size: Option<usize>,
    #[arg(long)]
    theta_grid_size: Option<usize>,
    /// Bootstrap draws.
    #[arg(long, short = 'B')]
    draws: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    density_floor: Option<f64>,
    #[arg(long)]
    tol_denominator: Option<f64>,
    /// Fixed KDE bandwidth for f_X(0).
    #[arg(long = "bandwidth-c")]
    bandwidth_c: Option<f64>,
    /// Fixed pilot bandwidth.
    #[arg(long = "bandwidth-h0")]
    bandwidth_h0: Option<f64>,
    /// Fixed main bandwidth.
    #[arg(long = "bandwidth-h")]
    bandwidth_h: Option<f64>,
    #[arg(long)]
    outcome_column: Option<String>,
    #[arg(long)]
    treatment_column: Option<String>,
    #[arg(long)]
    running_column: Option<String>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV with a header row.
    data: PathBuf,
    #[command(flatten)]
    cfg: ConfigFlags,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write `<prefix>_cdf0.csv`, `<prefix>_cdf1.csv`, `<prefix>_qte.csv` and
    /// `<prefix>_bands.csv`.
    #[arg(long)]
    csv_prefix: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    cfg: ConfigFlags,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "500")]
    n: Vec<usize>,
    /// Values of β₁, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    beta1: Vec<f64>,
    /// Values of γ₁, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    gamma1: Vec<f64>,
    /// Monte Carlo replications per cell.
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// Per-cell CSV output.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Full results as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct BandwidthArgs {
    data: PathBuf,
    #[command(flatten)]
    cfg: ConfigFlags,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Model(RkdError),
    Internal(String),
}

impl From<RkdError> for CliError {
    fn from(e: RkdError) -> Self {
        CliError::Model(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Model(e) if e.is_input_error() => 2,
            CliError::Model(e) if e.is_design_failure() => 3,
            CliError::Model(_) | CliError::Internal(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Internal(m) => write!(f, "{m}"),
            CliError::Model(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Simulation settings that may live in the `[dgp]` table of a config file.
fn split_config(path: &Path) -> CliResult<(AnalysisConfig, DgpConfig)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let dgp = match table.remove("dgp") {
        Some(v) => v
            .try_into()
            .map_err(|e| CliError::Input(format!("{}: [dgp]: {e}", path.display())))?,
        None => DgpConfig::default(),
    };
    let cfg = toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((cfg, dgp))
}

impl ConfigFlags {
    fn resolve(&self) -> CliResult<(AnalysisConfig, DgpConfig)> {
        let (mut c, dgp) = match &self.config {
            Some(p) => split_config(p)?,
            None => (AnalysisConfig::default(), DgpConfig::default()),
        };
        macro_rules! take {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag.clone() {
                    c.$($field).+ = v;
                }
            };
        }
        take!(seed => seed);
        take!(kernel => kernel);
        take!(kink_location => kink_location);
        take!(theta_a => theta_a);
        take!(y_grid_size => y_grid_size);
        take!(theta_grid_size => theta_grid_size);
        take!(draws => draws);
        take!(alpha => alpha);
        take!(density_floor => density_floor);
        take!(tol_denominator => tol_denominator);
        take!(outcome_column => columns.outcome);
        take!(treatment_column => columns.treatment);
        take!(running_column => columns.running);
        if self.bandwidth_c.is_some() {
            c.bandwidth.c = self.bandwidth_c;
        }
        if self.bandwidth_h0.is_some() {
            c.bandwidth.h0 = self.bandwidth_h0;
        }
        if self.bandwidth_h.is_some() {
            c.bandwidth.h = self.bandwidth_h;
        }
        c.validate()?;
        Ok((c, dgp))
    }
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => print_stdout(text),
    }
}

/// Print to stdout, treating a closed pipe as success.
fn print_stdout(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Internal(e.to_string())),
        _ => Ok(()),
    }
}

fn create(path: &Path) -> CliResult<fs::File> {
    fs::File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load<T: Real>(path: &Path, cfg: &AnalysisConfig) -> CliResult<Sample<T>> {
    Ok(ingest(path, &cfg.columns, cfg.kink_location)?)
}

fn estimate(args: &EstimateArgs) -> CliResult<()> {
    let (cfg, _) = args.cfg.resolve()?;
    let report = match args.precision {
        Precision::F64 => rkqte::run_analysis(&load::<f64>(&args.data, &cfg)?, &cfg)?,
        Precision::F32 => rkqte::run_analysis(&load::<f32>(&args.data, &cfg)?, &cfg)?,
    };
    write_out(args.output.as_deref(), &report.to_json())?;
    if let Some(prefix) = &args.csv_prefix {
        write_csvs(&report, prefix)?;
    }
    Ok(())
}

fn write_csvs(report: &Report, prefix: &Path) -> CliResult<()> {
    report.write_cdf_csv(Arm::Untreated, create(&suffixed(prefix, "_cdf0.csv"))?)?;
    report.write_cdf_csv(Arm::Treated, create(&suffixed(prefix, "_cdf1.csv"))?)?;
    report.write_qte_csv(create(&suffixed(prefix, "_qte.csv"))?)?;
    report.write_bands_csv(create(&suffixed(prefix, "_bands.csv"))?)?;
    Ok(())
}

fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let (cfg, dgp) = args.cfg.resolve()?;
    if args.reps == 0 {
        return Err(CliError::Input("--reps must be at least 1".into()));
    }
    let mut cells = Vec::new();
    for &n in &args.n {
        for &beta1 in &args.beta1 {
            for &gamma1 in &args.gamma1 {
                cells.push(CellSpec { n, beta1, gamma1 });
            }
        }
    }
    let result = run_coverage::<f64>(&cells, &dgp, &cfg, args.reps, cfg.seed)?;
    print_stdout(result.format_table().trim_end())?;
    if let Some(p) = &args.csv {
        fs::write(p, result.to_csv()).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
    }
    if let Some(p) = &args.json {
        let text = serde_json::to_string_pretty(&result).map_err(|e| CliError::Internal(e.to_string()))?;
        fs::write(p, text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BandwidthReport {
    version: &'static str,
    n: usize,
    kernel: KernelSpec,
    bandwidths: rkqte::BandwidthSet<f64>,
    warnings: Vec<Warning>,
}

fn bandwidth(args: &BandwidthArgs) -> CliResult<()> {
    let (cfg, _) = args.cfg.resolve()?;
    let sample = load::<f64>(&args.data, &cfg)?;
    let mut warnings = Vec::new();
    let bandwidths = select_bandwidths(&sample, cfg.kernel, &cfg.bandwidth, &mut warnings)?;
    let out = BandwidthReport {
        version: rkqte::VERSION,
        n: sample.len(),
        kernel: cfg.kernel,
        bandwidths,
        warnings,
    };
    let text = serde_json::to_string_pretty(&out).map_err(|e| CliError::Internal(e.to_string()))?;
    write_out(args.output.as_deref(), &text)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Bandwidth(a) => bandwidth(a),
        Command::Version => {
            print_stdout(&format!("rkqte {}", rkqte::VERSION))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // per-replication warnings are tallied in the coverage table instead
    let level = if matches!(cli.command, Command::Simulate(_)) { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
