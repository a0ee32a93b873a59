//! The `dgvf` command line.
//!
//! Exit status: 0 when everything ran and every platoon claim held, 2 when
//! a run finished but a claim failed, 1 on configuration or runtime errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{verify_platoon, PlatoonReport, Tolerances};
use crate::presets::{preset, presets};
use crate::sim::config::LogFormat;
use crate::sim::log::{LogEvent, RunStats, TRAJECTORY_CSV, TRAJECTORY_JSONL};
use crate::sim::{run, validate_config, ScenarioConfig, TrajectoryLog, ValidationReport};
use crate::{Error, Result};

/// Environment variable naming the parent of default output directories.
pub const OUT_DIR_ENV: &str = "DGVF_OUT_DIR";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const REPORT_TOML: &str = "report.toml";
pub const REPORT_TXT: &str = "report.txt";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CLAIMS: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dgvf", version, about = "Spontaneous-ordering platoon simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario, write its log and check the platoon claims.
    Run(RunArgs),
    /// Check a scenario's hypotheses without simulating it.
    Validate {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
    },
    /// List the bundled scenarios.
    ListPresets,
    /// Re-run the analysis on an existing log.
    Report {
        /// `trajectory.csv` or `trajectory.jsonl`.
        #[arg(long)]
        log: PathBuf,
        /// Scenario of the log; defaults to the `summary.toml` next to it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, conflicts_with_all = ["preset", "sweep"])]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "sweep")]
    pub preset: Option<String>,
    /// Run every bundled preset, one worker thread each.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<LogFormat>,
}

fn parse_format(s: &str) -> std::result::Result<LogFormat, String> {
    match s {
        "csv" => Ok(LogFormat::Csv),
        "jsonl" => Ok(LogFormat::Jsonl),
        other => Err(format!("unknown format `{other}` (csv or jsonl)")),
    }
}

/// Everything about a run that is not in the trajectory files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ScenarioConfig,
    pub stats: RunStats,
    pub events: Vec<LogEvent>,
    pub validation: ValidationReport,
}

/// Result of one `run`.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub log: TrajectoryLog,
    pub report: PlatoonReport,
}

impl RunArgs {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(s) = self.seed {
            cfg.robots.seed = s;
        }
        if let Some(dt) = self.dt {
            cfg.integration.dt = dt;
        }
        if let Some(d) = self.duration {
            cfg.integration.duration = d;
        }
        if let Some(f) = self.format {
            cfg.output.format = f;
        }
    }
}

fn default_dir(name: &str) -> PathBuf {
    let base = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    base.join(format!("{name}-{stamp}"))
}

/// Simulates `cfg`, writes log, summary and report into `dir`.
pub fn run_scenario(cfg: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let validation = validate_config(cfg)?;
    let log = run(cfg)?;
    let report = verify_platoon(&log, &Tolerances::from_config(cfg))?;
    log.write(dir, cfg.output.format)?;
    let summary = RunSummary {
        config: cfg.clone(),
        stats: log.stats.clone(),
        events: log.events.clone(),
        validation,
    };
    std::fs::write(dir.join(SUMMARY_FILE), toml::to_string(&summary)?)?;
    write_report(dir, &report)?;
    Ok(RunOutcome { dir: dir.to_path_buf(), log, report })
}

fn write_report(dir: &Path, report: &PlatoonReport) -> Result<()> {
    std::fs::write(dir.join(REPORT_TOML), toml::to_string(report)?)?;
    std::fs::write(dir.join(REPORT_TXT), report.render())?;
    Ok(())
}

/// Analysis of an existing log, with the scenario taken from `config` or
/// from the summary written next to the log.
pub fn report_from_log(log_path: &Path, config: Option<&Path>) -> Result<PlatoonReport> {
    let log = TrajectoryLog::read(log_path)?;
    let cfg = match config {
        Some(p) => ScenarioConfig::load(p)?,
        None => {
            let p = log_path.with_file_name(SUMMARY_FILE);
            let text = std::fs::read_to_string(&p)
                .map_err(|e| Error::config(format!("cannot read {} ({e}); pass --config", p.display())))?;
            toml::from_str::<RunSummary>(&text)?.config
        }
    };
    verify_platoon(&log, &Tolerances::from_config(&cfg))
}

fn load_config(config: Option<&Path>, preset_name: Option<&str>) -> Result<(String, ScenarioConfig)> {
    match (config, preset_name) {
        (Some(p), _) => {
            let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario").to_string();
            Ok((name, ScenarioConfig::load(p)?))
        }
        (None, Some(n)) => Ok((n.to_string(), preset(n)?.config)),
        (None, None) => Err(Error::config("pass --config FILE or --preset NAME")),
    }
}

fn log_file(dir: &Path, format: LogFormat) -> PathBuf {
    dir.join(match format {
        LogFormat::Csv => TRAJECTORY_CSV,
        LogFormat::Jsonl => TRAJECTORY_JSONL,
    })
}

fn print_outcome(name: &str, o: &RunOutcome) {
    println!("== {name}: {}", o.dir.display());
    for e in &o.log.events {
        println!("[{:.3}] {}: {}", e.t, e.kind, e.message);
    }
    println!(
        "steps {}, clamp events {}, max |sum eta| {:.3e}",
        o.log.stats.steps, o.log.stats.clamp_events, o.log.stats.max_abs_eta_sum
    );
    print!("{}", o.report.render());
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    if args.sweep {
        let parent = args.out.clone().unwrap_or_else(|| default_dir("sweep"));
        let jobs: Vec<(String, ScenarioConfig)> = presets()
            .into_iter()
            .map(|p| {
                let mut cfg = p.config;
                args.apply(&mut cfg);
                (p.name.to_string(), cfg)
            })
            .collect();
        let results: Vec<(String, Result<RunOutcome>)> = std::thread::scope(|s| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|(name, cfg)| {
                    let dir = parent.join(name);
                    s.spawn(move || run_scenario(cfg, &dir))
                })
                .collect();
            jobs.iter()
                .zip(handles)
                .map(|((name, _), h)| (name.clone(), h.join().expect("worker panicked")))
                .collect()
        });
        let mut code = EXIT_OK;
        for (name, res) in results {
            match res {
                Ok(o) => {
                    print_outcome(&name, &o);
                    if !o.report.all_passed() && code == EXIT_OK {
                        code = EXIT_CLAIMS;
                    }
                }
                Err(e) => {
                    eprintln!("== {name}: error: {e}");
                    code = EXIT_ERROR;
                }
            }
        }
        return Ok(code);
    }
    let (name, mut cfg) = load_config(args.config.as_deref(), args.preset.as_deref())?;
    args.apply(&mut cfg);
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| default_dir(&name));
    let outcome = run_scenario(&cfg, &dir)?;
    print_outcome(&name, &outcome);
    println!("log: {}", log_file(&dir, cfg.output.format).display());
    Ok(if outcome.report.all_passed() { EXIT_OK } else { EXIT_CLAIMS })
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Validate { config, preset } => {
            let (_, cfg) = load_config(config.as_deref(), preset.as_deref())?;
            let rep = validate_config(&cfg)?;
            print!("{}", rep.render());
            Ok(if rep.has_hard_failure() { EXIT_ERROR } else { EXIT_OK })
        }
        Command::ListPresets => {
            for p in presets() {
                let mark = if p.negative { " (negative)" } else { "" };
                println!("{:<28} {}{mark}", p.name, p.description);
            }
            Ok(EXIT_OK)
        }
        Command::Report { log, config } => {
            let rep = report_from_log(&log, config.as_deref())?;
            print!("{}", rep.render());
            Ok(if rep.all_passed() { EXIT_OK } else { EXIT_CLAIMS })
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
