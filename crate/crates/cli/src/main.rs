//! `climarket` — command-line driver for the climate prediction market
//! simulator.
//!
//! Subcommands:
//! - `run`: one future-scenario simulation (synthetic temperatures from the
//!   calibrated true model, trading starts after the historical record).
//! - `historical`: one historical replay (traders bet on the actual record,
//!   fourteen 6-year sequences ending at the final observed year).
//! - `sweep`: Latin hypercube design + replicated simulations per design
//!   row; resumable, parallel across rows.
//! - `prcc`: partial rank correlation coefficients with bootstrap CIs from
//!   a sweep's output.
//!
//! Every subcommand resolves its configuration from defaults, an optional
//! flat `key = value` file (`--config`), and flag overrides, then writes a
//! `manifest.txt` beside its outputs; re-running with `--config` pointed at
//! the manifest reproduces the outputs byte-for-byte.
//!
//! Exit codes: 0 success; 2 configuration or input-data error; 3 runtime
//! failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use climarket_core::series::load_series_csv;
use climarket_core::rng::{self, stream};
use climarket_core::sensitivity::{
    bootstrap_ci, lhs_sample, read_sweep_csv, sweep_row, write_design_csv, write_prcc_csv,
    write_sweep_csv, DesignMatrix, PrccReport, SweepResult, SweepRow, PARAM_NAMES,
};
use climarket_core::sim::{
    check_coverage, run_simulation, write_run_csv, DataBundle, Mode, SimResult,
};
use climarket_core::{par, Error};

use config::{sha256_file, Settings};

/// Agent-based climate prediction market simulator.
#[derive(Parser, Debug)]
#[command(name = "climarket", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one future-scenario simulation and write run.csv + manifest.txt.
    Run(CommonArgs),
    /// Replay the historical record (14 six-year sequences) and write
    /// run.csv + manifest.txt.
    Historical(CommonArgs),
    /// Latin hypercube sweep: design.csv + sweep.csv + manifest.txt.
    /// Re-invoking with a partial sweep.csv in the output directory resumes
    /// where it stopped and produces the identical final file.
    Sweep(SweepArgs),
    /// PRCC with bootstrap confidence intervals from a sweep.csv.
    Prcc(PrccArgs),
}

/// Flags shared by every subcommand; each mirrors a configuration key and
/// overrides both the built-in default and the `--config` file.
#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Flat `key = value` configuration file (a previous run's manifest.txt
    /// works as-is).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; every random stream in the run derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output CSVs and the manifest.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Worker threads for sweep parallelism (0 = library default).
    #[arg(long)]
    workers: Option<usize>,
    /// Temperature anomaly CSV with columns year,anomaly_c.
    #[arg(long, value_name = "PATH")]
    temperature_csv: Option<PathBuf>,
    /// CO2 concentration CSV with columns year,ppm.
    #[arg(long, value_name = "PATH")]
    co2_csv: Option<PathBuf>,
    /// Total solar irradiance CSV with columns year,wm2.
    #[arg(long, value_name = "PATH")]
    tsi_csv: Option<PathBuf>,
    /// Ideology (belief-revision resistance) upper bound, in [0,1].
    #[arg(long)]
    ideo: Option<f64>,
    /// Social network edge budget.
    #[arg(long)]
    n_edge: Option<usize>,
    /// Number of traders.
    #[arg(long)]
    n_traders: Option<usize>,
    /// Risk-taking upper bound, in [0,1].
    #[arg(long)]
    risk_tak: Option<f64>,
    /// Network segmentation (homophily), in [0,1].
    #[arg(long)]
    seg: Option<f64>,
    /// True climate model for future scenarios: co2 or tsi.
    #[arg(long, value_name = "co2|tsi")]
    true_model: Option<String>,
    /// Years per trading sequence.
    #[arg(long)]
    seq_length_years: Option<usize>,
    /// Number of trading sequences (default 8 future, 14 historical).
    #[arg(long)]
    n_sequences: Option<usize>,
    /// Number of temperature bins (securities) per sequence.
    #[arg(long)]
    bins_k: Option<usize>,
    /// Lower edge of the binned temperature range (deg C anomaly).
    #[arg(long, allow_hyphen_values = true)]
    bins_lo: Option<f64>,
    /// Upper edge of the binned temperature range (deg C anomaly).
    #[arg(long, allow_hyphen_values = true)]
    bins_hi: Option<f64>,
    /// Posterior draws kept per trader-side model fit.
    #[arg(long)]
    n_draws: Option<usize>,
    /// Posterior burn-in draws discarded per fit.
    #[arg(long)]
    burn_in: Option<usize>,
    /// CDA sessions per simulated year.
    #[arg(long)]
    passes_per_year: Option<usize>,
    /// Ideology convention: prose (adopt w.p. 1-ideo) or literal.
    #[arg(long, value_name = "prose|literal")]
    ideology_convention: Option<String>,
    /// Model scored as "true" in historical mode: co2 or tsi.
    #[arg(long, value_name = "co2|tsi")]
    historical_true_model: Option<String>,
    /// Per-run convergence summary: time_average or terminal.
    #[arg(long, value_name = "time_average|terminal")]
    score_kind: Option<String>,
    /// Latin hypercube design size (sweep).
    #[arg(long)]
    n_points: Option<usize>,
    /// Simulations averaged per design row (sweep).
    #[arg(long)]
    replicates: Option<usize>,
    /// Bootstrap resamples for PRCC confidence intervals (prcc).
    #[arg(long)]
    n_boot: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct PrccArgs {
    /// Sweep results CSV (defaults to <out_dir>/sweep.csv).
    sweep: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

/// Error with the exit code it maps to: configuration/data problems exit 2,
/// failures after a well-formed run started exit 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Config(m) | Self::Runtime(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

/// Library errors map by kind: only a failure inside a running simulation is
/// a runtime error; everything else reports a bad configuration or input.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::RunFailed(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(&args, Mode::Future),
        Command::Historical(args) => cmd_run(&args, Mode::Historical),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Prcc(args) => cmd_prcc(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

/// Resolve settings from defaults, the optional config file, and flags.
fn resolve(common: &CommonArgs) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    if let Some(path) = &common.config {
        s.load_file(path)?;
    }
    let mut over = |key: &str, value: Option<String>| -> Result<(), CliError> {
        if let Some(v) = value {
            s.apply(key, &v)?;
        }
        Ok(())
    };
    over("seed", common.seed.map(|v| v.to_string()))?;
    over(
        "out_dir",
        common.out_dir.as_ref().map(|v| v.display().to_string()),
    )?;
    over("workers", common.workers.map(|v| v.to_string()))?;
    over(
        "temperature_csv",
        common
            .temperature_csv
            .as_ref()
            .map(|v| v.display().to_string()),
    )?;
    over(
        "co2_csv",
        common.co2_csv.as_ref().map(|v| v.display().to_string()),
    )?;
    over(
        "tsi_csv",
        common.tsi_csv.as_ref().map(|v| v.display().to_string()),
    )?;
    over("ideo", common.ideo.map(|v| v.to_string()))?;
    over("n_edge", common.n_edge.map(|v| v.to_string()))?;
    over("n_traders", common.n_traders.map(|v| v.to_string()))?;
    over("risk_tak", common.risk_tak.map(|v| v.to_string()))?;
    over("seg", common.seg.map(|v| v.to_string()))?;
    over("true_model", common.true_model.clone())?;
    over(
        "seq_length_years",
        common.seq_length_years.map(|v| v.to_string()),
    )?;
    over("n_sequences", common.n_sequences.map(|v| v.to_string()))?;
    over("bins_k", common.bins_k.map(|v| v.to_string()))?;
    over("bins_lo", common.bins_lo.map(|v| v.to_string()))?;
    over("bins_hi", common.bins_hi.map(|v| v.to_string()))?;
    over("n_draws", common.n_draws.map(|v| v.to_string()))?;
    over("burn_in", common.burn_in.map(|v| v.to_string()))?;
    over(
        "passes_per_year",
        common.passes_per_year.map(|v| v.to_string()),
    )?;
    over(
        "ideology_convention",
        common.ideology_convention.clone(),
    )?;
    over(
        "historical_true_model",
        common.historical_true_model.clone(),
    )?;
    over("score_kind", common.score_kind.clone())?;
    over("n_points", common.n_points.map(|v| v.to_string()))?;
    over("replicates", common.replicates.map(|v| v.to_string()))?;
    over("n_boot", common.n_boot.map(|v| v.to_string()))?;
    Ok(s)
}

fn load_bundle(s: &Settings) -> Result<DataBundle, CliError> {
    let temps = load_series_csv(&s.temperature_csv, "year", "anomaly_c")?;
    let co2_ppm = load_series_csv(&s.co2_csv, "year", "ppm")?;
    let tsi_wm2 = load_series_csv(&s.tsi_csv, "year", "wm2")?;
    Ok(DataBundle {
        temps,
        co2_ppm,
        tsi_wm2,
    })
}

fn data_digests(s: &Settings) -> Result<Vec<(String, String)>, CliError> {
    Ok(vec![
        (
            "temperature_csv".to_string(),
            sha256_file(&s.temperature_csv)?,
        ),
        ("co2_csv".to_string(), sha256_file(&s.co2_csv)?),
        ("tsi_csv".to_string(), sha256_file(&s.tsi_csv)?),
    ])
}

fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

/// `run` and `historical`: one simulation, two output files.
fn cmd_run(args: &CommonArgs, mode: Mode) -> Result<(), CliError> {
    let s = resolve(args)?;
    par::set_workers(s.workers);
    let config = s.sim_config(mode);
    config.validate()?;
    let data = load_bundle(&s)?;
    check_coverage(&config, &data)?;
    create_out_dir(&s.out_dir)?;

    let result = run_simulation(&config, &data)?;

    let run_path = s.out_dir.join("run.csv");
    write_run_csv(&result, &run_path).map_err(runtime_io)?;
    let subcommand = match mode {
        Mode::Future => "run",
        Mode::Historical => "historical",
    };
    let manifest = s.manifest_text(subcommand, mode, &data_digests(&s)?);
    write_text(&s.out_dir.join("manifest.txt"), &manifest)?;

    print_run_summary(&result, &run_path);
    Ok(())
}

fn print_run_summary(result: &SimResult, run_path: &Path) {
    let last = result
        .records
        .last()
        .expect("a completed run has at least one sequence");
    println!(
        "{} sequences, {}..={}; final frac_true {:.3}, score {:.3}",
        result.records.len(),
        result.records[0].end_year,
        last.end_year,
        last.frac_true,
        result.convergence_score()
    );
    if let Some(n) = result.clamped_n_edges {
        println!("note: edge budget clamped to {n}");
    }
    if result.rhat_flags > 0 {
        println!(
            "note: {} posterior fits flagged by the split-chain diagnostic",
            result.rhat_flags
        );
    }
    println!("wrote {}", run_path.display());
}

fn runtime_io(e: Error) -> CliError {
    CliError::runtime(e.to_string())
}

/// `sweep`: LHS design, replicated rows in parallel, resumable output.
fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let s = resolve(&args.common)?;
    par::set_workers(s.workers);
    if s.replicates == 0 {
        return Err(CliError::config("replicates must be >= 1"));
    }
    let base = s.sim_config(Mode::Future);
    base.validate()?;
    let data = load_bundle(&s)?;
    check_coverage(&base, &data)?;
    create_out_dir(&s.out_dir)?;

    let mut design_rng = rng::substream(s.seed, &[stream::DESIGN]);
    let design = lhs_sample(s.n_points, &mut design_rng)?;
    write_design_csv(&design, &s.out_dir.join("design.csv")).map_err(runtime_io)?;

    let sweep_path = s.out_dir.join("sweep.csv");
    let mut rows: Vec<SweepRow> = if sweep_path.exists() {
        resume_rows(&sweep_path, &design, s.replicates)?
    } else {
        Vec::new()
    };
    let resumed_from = rows.len();
    if resumed_from > 0 {
        println!(
            "resuming: {resumed_from} of {} rows already complete",
            design.rows.len()
        );
    }

    // Keep the file a valid prefix at all times: canonicalize whatever was
    // recovered, then append completed rows chunk by chunk so an interrupt
    // loses at most one in-flight chunk.
    write_partial(&sweep_path, &rows)?;
    let chunk = par::effective_workers().max(1) * 2;
    while rows.len() < design.rows.len() {
        let start = rows.len();
        let m = chunk.min(design.rows.len() - start);
        let new_rows = par::map_indexed(m, |j| {
            let i = start + j;
            sweep_row(i, &design.rows[i], s.replicates, &base, &data, s.seed)
        });
        rows.extend(new_rows);
        write_partial(&sweep_path, &rows)?;
    }

    let sweep = SweepResult { rows };
    write_sweep_csv(&sweep, &sweep_path).map_err(runtime_io)?;

    let mut digests = data_digests(&s)?;
    digests.push((
        "design_csv".to_string(),
        sha256_file(&s.out_dir.join("design.csv"))?,
    ));
    let manifest = s.manifest_text("sweep", Mode::Future, &digests);
    write_text(&s.out_dir.join("manifest.txt"), &manifest)?;

    let excluded = sweep.rows.iter().filter(|r| r.mean_score.is_none()).count();
    println!(
        "{} rows x {} replicates complete ({excluded} excluded); wrote {}",
        sweep.rows.len(),
        s.replicates,
        sweep_path.display()
    );
    Ok(())
}

/// Rewrite the sweep file from the rows completed so far (canonical CSV
/// form, same bytes the final write will produce for this prefix).
fn write_partial(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    write_sweep_csv(
        &SweepResult {
            rows: rows.to_vec(),
        },
        path,
    )
    .map_err(runtime_io)
}

/// Recover completed rows from an interrupted sweep.csv. Rows must match
/// the regenerated design point-for-point (same seed, same design); a
/// torn final line is dropped, anything else inconsistent is an error.
fn resume_rows(
    path: &Path,
    design: &DesignMatrix,
    replicates: usize,
) -> Result<Vec<SweepRow>, CliError> {
    let existing = match read_sweep_csv(path) {
        Ok(s) => s.rows,
        Err(Error::Parse { line, .. }) if line > 1 => {
            // Torn tail from an interrupted write: re-read only the lines
            // before the malformed one.
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            let keep: Vec<&str> = text.lines().take(line as usize - 1).collect();
            let tmp = path.with_extension("csv.recovered");
            std::fs::write(&tmp, keep.join("\n") + "\n")
                .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", tmp.display())))?;
            let rows = read_sweep_csv(&tmp).map_err(CliError::from)?.rows;
            let _ = std::fs::remove_file(&tmp);
            rows
        }
        Err(e) => return Err(e.into()),
    };
    if existing.len() > design.rows.len() {
        return Err(CliError::config(format!(
            "{}: has {} rows but the design has only {}; it does not belong to this \
             configuration (different seed or n_points?)",
            path.display(),
            existing.len(),
            design.rows.len()
        )));
    }
    for (i, row) in existing.iter().enumerate() {
        if row.params != design.rows[i] || row.n_replicates != replicates {
            return Err(CliError::config(format!(
                "{}: row {} does not match the design derived from this seed; \
                 refusing to resume (delete the file to start over)",
                path.display(),
                i + 1
            )));
        }
    }
    Ok(existing)
}

/// `prcc`: read a sweep, estimate PRCCs, bootstrap the intervals.
fn cmd_prcc(args: &PrccArgs) -> Result<(), CliError> {
    let s = resolve(&args.common)?;
    par::set_workers(s.workers);
    let sweep_path = args
        .sweep
        .clone()
        .unwrap_or_else(|| s.out_dir.join("sweep.csv"));
    let sweep = read_sweep_csv(&sweep_path)?;
    let (x, y) = sweep.xy();
    if x.len() < sweep.rows.len() {
        println!(
            "{} of {} rows excluded for failed replicates",
            sweep.rows.len() - x.len(),
            sweep.rows.len()
        );
    }

    let mut boot_rng = rng::substream(s.seed, &[stream::BOOTSTRAP]);
    let report = bootstrap_ci(&x, &y, s.n_boot, &mut boot_rng).map_err(|e| match e {
        Error::ConstantColumn(which) => {
            CliError::config(format!("PRCC undefined: {} is constant", column_name(&which)))
        }
        Error::RunFailed(m) => CliError::runtime(m),
        other => CliError::Config(other.to_string()),
    })?;

    create_out_dir(&s.out_dir)?;
    let prcc_path = s.out_dir.join("prcc.csv");
    write_prcc_csv(&report, &prcc_path).map_err(runtime_io)?;
    let digests = vec![("sweep_csv".to_string(), sha256_file(&sweep_path)?)];
    let manifest = s.manifest_text("prcc", Mode::Future, &digests);
    write_text(&s.out_dir.join("manifest.txt"), &manifest)?;

    print_prcc_table(&report);
    println!("wrote {}", prcc_path.display());
    Ok(())
}

/// Translate the library's positional column reference into the parameter
/// name a sweep.csv reader knows.
fn column_name(which: &str) -> String {
    if let Some(idx) = which.strip_prefix("input column ") {
        if let Ok(j) = idx.parse::<usize>() {
            if let Some(name) = PARAM_NAMES.get(j) {
                return format!("column '{name}'");
            }
        }
    }
    if which == "output column" {
        return "column 'mean_score'".to_string();
    }
    which.to_string()
}

fn print_prcc_table(report: &PrccReport) {
    println!("{:<12} {:>9} {:>9} {:>9}", "param", "estimate", "ci_low", "ci_high");
    for (name, e) in PARAM_NAMES.iter().zip(&report.entries) {
        println!(
            "{name:<12} {:>9.4} {:>9.4} {:>9.4}",
            e.estimate, e.ci_low, e.ci_high
        );
    }
}
