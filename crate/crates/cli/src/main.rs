//! `geofence`: run stopping-distance campaigns, evaluate safety contracts,
//! fit the latency calibration and print the analytic oracle.
//!
//! Exit codes: 0 success (or contract holds), 1 contract violated,
//! 2 config/usage error, 3 I/O error, 4 contract not applicable.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use geofence_core::calibration::{self, CalibrationGrid, CalibrationScore};
use geofence_core::config::{self, ConfigFile, ConfigRequest};
use geofence_core::contracts::{self, Outcome, SafetyContract};
use geofence_core::harness::{self, ExperimentReport, REPORT_SCHEMA};
use geofence_core::presets::{self, TABLE};

const EXIT_VIOLATED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NOT_APPLICABLE: u8 = 4;

#[derive(Parser)]
#[command(name = "geofence", version, about = "UWB geofence stopping-distance simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more campaigns and write report JSON and samples CSV.
    Run(RunArgs),
    /// Summarize existing report files (box stats, mean interval, verdict).
    Report(ReportArgs),
    /// Evaluate a safety contract against a report.
    ContractEval(ContractArgs),
    /// Check (or search for) the latency calibration against the bench pattern.
    Calibrate(CalibrateArgs),
    /// List the built-in presets.
    Presets(PresetsArgs),
    /// Closed-form stop distance for a straight approach.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    /// Preset id; repeat or comma-separate for several, `all` for T1-T9.
    #[arg(long, value_delimiter = ',')]
    preset: Vec<String>,
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "GEOFENCE_OUT_DIR", default_value = "geofence-out")]
    out: PathBuf,
    /// Write only this format (default: both).
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Override a config field, e.g. `--set tag.period_ms=200`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report JSON files written by `run`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct ContractArgs {
    /// Contract JSON file, or `builtin:sr2` / `builtin:mean-buffer`.
    #[arg(long)]
    contract: String,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// First campaign seed.
    #[arg(long, default_value_t = 1)]
    seed_from: u64,
    /// Number of campaign seeds.
    #[arg(long, default_value_t = 20)]
    campaigns: u64,
    #[arg(long, default_value_t = presets::DEFAULT_RUNS)]
    runs: u64,
    /// Search the grid instead of checking the default calibration.
    #[arg(long)]
    search: bool,
    /// Config file whose `calibration` is used as the starting point.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "GEOFENCE_OUT_DIR", default_value = "geofence-out")]
    out: PathBuf,
}

#[derive(Args)]
struct PresetsArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct OracleArgs {
    /// Approach speed (m/s).
    #[arg(long)]
    speed: f64,
    /// Total stop latency (ms).
    #[arg(long, default_value_t = 0.0)]
    latency_ms: f64,
    /// Buffer width (m).
    #[arg(long, default_value_t = 0.30)]
    buffer: f64,
    /// Braking deceleration (m/s^2); omit for an instantaneous stop.
    #[arg(long)]
    decel: Option<f64>,
}

/// Error carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(msg: impl fmt::Display) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: msg.to_string(),
        }
    }

    fn io(path: &Path, err: impl fmt::Display) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Report(a) => cmd_report(a),
        Command::ContractEval(a) => cmd_contract_eval(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Presets(a) => cmd_presets(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn load_config_file(path: Option<&Path>) -> Result<Option<ConfigFile>, Failure> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = read_text(p)?;
            ConfigFile::parse(&text)
                .map(Some)
                .map_err(|e| Failure::config(format!("{}: {e}", p.display())))
        }
    }
}

fn cmd_run(a: RunArgs) -> CmdResult {
    let file = load_config_file(a.config.as_deref())?;
    let set = a
        .set
        .iter()
        .map(|s| config::parse_override(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::config)?;
    let mut ids: Vec<Option<String>> = Vec::new();
    for p in &a.preset {
        if p == "all" {
            ids.extend(TABLE.iter().map(|r| Some(r.id.to_string())));
        } else {
            ids.push(Some(p.clone()));
        }
    }
    if ids.is_empty() {
        ids.push(None);
    }
    // resolve everything before simulating anything
    let configs = ids
        .into_iter()
        .map(|preset| {
            config::resolve(&ConfigRequest {
                preset,
                file: file.clone(),
                set: set.clone(),
                runs: a.runs,
                seed: a.seed,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::config)?;

    fs::create_dir_all(&a.out).map_err(|e| Failure::io(&a.out, e))?;
    for cfg in &configs {
        let report = harness::run_experiment(cfg).map_err(Failure::config)?;
        if a.format != Some(Format::Csv) {
            write_text(&a.out.join(format!("{}_report.json", cfg.id)), &to_json(&report))?;
        }
        if a.format != Some(Format::Json) {
            write_text(&a.out.join(format!("{}_samples.csv", cfg.id)), &report.samples_csv())?;
        }
        println!("{}", report.summary_line());
    }
    Ok(0)
}

fn load_report(path: &Path) -> Result<ExperimentReport, Failure> {
    let text = read_text(path)?;
    let report: ExperimentReport =
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    if report.schema != REPORT_SCHEMA {
        return Err(Failure::config(format!(
            "{}: unsupported report schema `{}` (expected `{REPORT_SCHEMA}`)",
            path.display(),
            report.schema
        )));
    }
    Ok(report)
}

#[derive(Serialize)]
struct ReportRow {
    id: String,
    n_runs: u64,
    sr2_pass: bool,
    encroachments: u64,
    anomalies: u64,
    min: f64,
    whisker_lo: f64,
    q1: f64,
    median: f64,
    q3: f64,
    whisker_hi: f64,
    max: f64,
    n_outliers: usize,
    mean: f64,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
}

fn report_row(r: &ExperimentReport) -> ReportRow {
    let min = r.samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = r.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ReportRow {
        id: r.config_id.clone(),
        n_runs: r.n_runs,
        sr2_pass: r.sr2_pass,
        encroachments: r.encroachments,
        anomalies: r.anomalies,
        min,
        whisker_lo: r.box_stats.whisker_lo,
        q1: r.box_stats.q1,
        median: r.box_stats.median,
        q3: r.box_stats.q3,
        whisker_hi: r.box_stats.whisker_hi,
        max,
        n_outliers: r.box_stats.outliers.len(),
        mean: geofence_core::stats::mean(&r.samples),
        ci_lo: r.mean_ci.map(|c| c.lo),
        ci_hi: r.mean_ci.map(|c| c.hi),
    }
}

fn cmd_report(a: ReportArgs) -> CmdResult {
    let rows = a
        .reports
        .iter()
        .map(|p| load_report(p).map(|r| report_row(&r)))
        .collect::<Result<Vec<_>, _>>()?;
    let stdout = io::stdout();
    let io_err = |e: &dyn fmt::Display| Failure {
        code: EXIT_IO,
        message: format!("stdout: {e}"),
    };
    match a.format {
        Format::Json => {
            let mut out = stdout.lock();
            out.write_all(to_json(&rows).as_bytes()).map_err(|e| io_err(&e))?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(stdout.lock());
            for row in &rows {
                w.serialize(row).map_err(|e| io_err(&e))?;
            }
            w.flush().map_err(|e| io_err(&e))?;
        }
    }
    Ok(0)
}

fn load_contract(spec: &str) -> Result<SafetyContract, Failure> {
    let contract = match spec {
        "builtin:sr2" => contracts::sr2_contract(),
        "builtin:mean-buffer" => contracts::mean_buffer_contract(),
        path => {
            let p = Path::new(path);
            let text = read_text(p)?;
            serde_json::from_str(&text).map_err(|e| Failure::config(format!("{path}: {e}")))?
        }
    };
    contract.validate().map_err(Failure::config)?;
    Ok(contract)
}

fn cmd_contract_eval(a: ContractArgs) -> CmdResult {
    let contract = load_contract(&a.contract)?;
    let report = load_report(&a.report)?;
    let verdict = contracts::evaluate_contract(&contract, &report.config, &report.samples).map_err(Failure::config)?;
    if a.format == Some(Format::Json) {
        #[derive(Serialize)]
        struct Out<'a> {
            contract: &'a SafetyContract,
            sentence: String,
            report: &'a str,
            verdict: &'a contracts::ContractVerdict,
        }
        print!(
            "{}",
            to_json(&Out {
                contract: &contract,
                sentence: contract.render_sentence(),
                report: &report.config_id,
                verdict: &verdict,
            })
        );
    } else {
        println!("contract: {}", contract.render_sentence());
        println!("evidence: {} ({} samples)", report.config_id, verdict.n_samples);
        println!("conditions_satisfied: {}", verdict.conditions_satisfied);
        for c in &verdict.failed_conditions {
            println!("  unmet: {c}");
        }
        println!("holds: {}", verdict.holds);
        let (lo, hi) = verdict.achieved_confidence_interval;
        println!("interval: [{lo:.4}, {hi:.4}] at {}", contract.confidence);
        println!("{}", verdict.notes);
        let outcome = match verdict.outcome {
            Outcome::Holds => "HOLDS",
            Outcome::Violated => "VIOLATED",
            Outcome::NotApplicable => "NOT APPLICABLE",
        };
        println!("verdict: {outcome}");
    }
    Ok(match verdict.outcome {
        Outcome::Holds => 0,
        Outcome::Violated => EXIT_VIOLATED,
        Outcome::NotApplicable => EXIT_NOT_APPLICABLE,
    })
}

fn print_score(s: &CalibrationScore) {
    println!(
        "calibration {}: misses={} mean_error={:.4} m",
        s.calibration.label, s.misses, s.mean_error_m
    );
    for o in &s.outcomes {
        let lo = o.encroachments.iter().min().copied().unwrap_or(0);
        let hi = o.encroachments.iter().max().copied().unwrap_or(0);
        println!(
            "  {:<3} observed={:<10} pass {:>3}/{:<3} mean={:.4} m encroachments {}..{}",
            o.id, o.observed, o.passes, o.campaigns, o.mean_stop_m, lo, hi
        );
    }
}

fn cmd_calibrate(a: CalibrateArgs) -> CmdResult {
    if a.campaigns == 0 || a.runs == 0 {
        return Err(Failure::config("campaigns and runs must be ≥ 1"));
    }
    let base = load_config_file(a.config.as_deref())?
        .and_then(|f| f.calibration)
        .unwrap_or_default();
    let seeds: Vec<u64> = (a.seed_from..a.seed_from + a.campaigns).collect();
    let best = if a.search {
        let scores =
            calibration::calibrate(&base, &CalibrationGrid::default(), &seeds, a.runs).map_err(Failure::config)?;
        for s in scores.iter().take(5).rev() {
            print_score(s);
        }
        scores.into_iter().next().expect("grid is not empty")
    } else {
        let outcomes = calibration::evaluate(&base, &seeds, a.runs).map_err(Failure::config)?;
        let (misses, mean_error_m) = calibration::score(&outcomes);
        let s = CalibrationScore {
            calibration: base,
            outcomes,
            misses,
            mean_error_m,
        };
        print_score(&s);
        s
    };
    fs::create_dir_all(&a.out).map_err(|e| Failure::io(&a.out, e))?;
    let file = ConfigFile {
        preset: Some("T1".into()),
        calibration: Some(best.calibration.clone()),
        ..Default::default()
    };
    write_text(&a.out.join("calibration_score.json"), &to_json(&best))?;
    write_text(&a.out.join("calibrated_config.json"), &to_json(&file))?;
    Ok(0)
}

#[derive(Serialize)]
struct PresetListing {
    id: String,
    vehicle: String,
    period_ms: f64,
    speed_mps: f64,
    server: bool,
    random_offset: bool,
    nlos_sigma_scale: Option<f64>,
    observed: String,
}

fn preset_listing() -> Vec<PresetListing> {
    presets::preset_ids()
        .into_iter()
        .map(|id| {
            let cfg = presets::preset(id).expect("listed preset");
            let base = match presets::table_row(id) {
                Some(r) => r.observed,
                None if id == presets::NLOS_STRESS_ID => "stress variant, not observed",
                None => "same range as T1",
            };
            PresetListing {
                id: id.to_string(),
                vehicle: cfg.agv.name.clone(),
                period_ms: cfg.tag.period_ms,
                speed_mps: cfg.speed_mps,
                server: cfg.server_contention,
                random_offset: cfg.tag.random_offset,
                nlos_sigma_scale: cfg.error_model.nlos_enabled.then_some(cfg.error_model.nlos_sigma_scale),
                observed: base.to_string(),
            }
        })
        .collect()
}

fn cmd_presets(a: PresetsArgs) -> CmdResult {
    let rows = preset_listing();
    let io_err = |e: &dyn fmt::Display| Failure {
        code: EXIT_IO,
        message: format!("stdout: {e}"),
    };
    match a.format {
        Some(Format::Json) => print!("{}", to_json(&rows)),
        Some(Format::Csv) => {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            for r in &rows {
                w.serialize(r).map_err(|e| io_err(&e))?;
            }
            w.flush().map_err(|e| io_err(&e))?;
        }
        None => {
            println!(
                "{:<15} {:<4} {:>9} {:>10} {:>7} {:>7} {:>5}  observed",
                "id", "agv", "period_ms", "speed_mps", "server", "offset", "nlos"
            );
            for r in &rows {
                let nlos = r
                    .nlos_sigma_scale
                    .map(|s| format!("x{s}"))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{:<15} {:<4} {:>9} {:>10.4} {:>7} {:>7} {:>5}  {}",
                    r.id, r.vehicle, r.period_ms, r.speed_mps, r.server, r.random_offset, nlos, r.observed
                );
            }
        }
    }
    Ok(0)
}

/// `buffer - v L - v^2 / (2 a)`
fn oracle_distance(a: &OracleArgs) -> Result<f64, Failure> {
    let bad = |name: &str, v: f64| Failure::config(format!("{name} must be a non-negative number, got {v}"));
    for (name, v) in [("speed", a.speed), ("latency-ms", a.latency_ms), ("buffer", a.buffer)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(bad(name, v));
        }
    }
    let braking = match a.decel {
        None => 0.0,
        Some(d) if d.is_finite() && d > 0.0 => a.speed * a.speed / (2.0 * d),
        Some(d) => return Err(Failure::config(format!("decel must be positive, got {d}"))),
    };
    Ok(a.buffer - a.speed * a.latency_ms / 1000.0 - braking)
}

fn cmd_oracle(a: OracleArgs) -> CmdResult {
    let d = oracle_distance(&a)?;
    let text = format!("{d:.6}");
    let text = text.trim_end_matches('0').trim_end_matches('.');
    println!("{text}");
    Ok(0)
}
