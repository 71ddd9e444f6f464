//! `hybridnav` command line: run a scenario, compare navigation modes on
//! it, or serve it live over WebSocket.
//!
//! Exit codes: 0 when the robot arrived, 3 when it failed or timed out,
//! 2 for unusable input (bad flags, unreadable or invalid scenario), 1 for
//! I/O errors while writing artifacts or serving.

mod plot;
mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use hybridnav_core::kinematics::LawVariant;
use hybridnav_core::navigator::Strategy;
use hybridnav_core::sim::{Outcome, Scenario, SimTrace, Simulation};

pub use plot::render_svg;
pub use report::{fingerprint, format_table, RunReport};

pub const EXIT_ARRIVED: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_ARRIVED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hybridnav", version, about = "Hybrid A*/VFH navigation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        /// Directory for trace.csv, metrics.json, plans.json (and plot.svg).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: RunOptions,
        /// Also write plot.svg.
        #[arg(long)]
        plot: bool,
    },
    /// Run hybrid, vfh-only and astar-only on one scenario and tabulate.
    Compare {
        scenario: PathBuf,
        /// Write each mode's artifacts to DIR/<mode>/.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve the scenario live: WebSocket at /ws, console at /.
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Wall-clock speed multiplier.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Directory with the built operator console.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Where session logs (trace, command log, replay scenario) go.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct RunOptions {
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Strategy>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the angular correction term without the lateral-error factor.
    #[arg(long)]
    pub law_as_printed: bool,
    /// Fit one quintic over the whole path instead of windows.
    #[arg(long)]
    pub single_quintic: bool,
}

fn parse_mode(s: &str) -> Result<Strategy, String> {
    s.parse()
}

pub fn apply_options(mut scenario: Scenario<f64>, opts: &RunOptions) -> Scenario<f64> {
    if let Some(mode) = opts.mode {
        scenario.nav.strategy = mode;
    }
    if let Some(seed) = opts.seed {
        scenario.sim.seed = seed;
    }
    if opts.law_as_printed {
        scenario.nav.law = LawVariant::AsPrinted;
    }
    if opts.single_quintic {
        scenario.nav.trajectory.single_quintic = true;
    }
    scenario
}

pub fn exit_code(outcome: Outcome) -> i32 {
    match outcome {
        Outcome::Arrived => EXIT_ARRIVED,
        Outcome::Failed | Outcome::Timeout => EXIT_NOT_ARRIVED,
    }
}

/// A finished run with everything needed to write its artifacts.
pub struct RunResult {
    pub scenario: Scenario<f64>,
    pub trace: SimTrace<f64>,
    pub report: RunReport,
    world: hybridnav_core::world::OccupancyGrid<f64>,
}

impl RunResult {
    pub fn execute(scenario: Scenario<f64>) -> Result<Self, hybridnav_core::sim::ScenarioError> {
        let sim = Simulation::new(scenario.clone())?;
        let world = sim.world().clone();
        let trace = sim.run();
        let report = RunReport::new(&scenario, &trace);
        Ok(Self {
            scenario,
            trace,
            report,
            world,
        })
    }

    pub fn svg(&self) -> String {
        render_svg(&self.scenario, &self.world, &self.trace)
    }

    /// Writes `trace.csv`, `metrics.json`, `plans.json` and optionally
    /// `plot.svg`; returns the paths written.
    pub fn write(&self, dir: &Path, plot: bool) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut files = vec![
            (dir.join("trace.csv"), self.trace.to_csv()),
            (dir.join("metrics.json"), pretty(&self.report)),
            (dir.join("plans.json"), pretty(&self.trace.plans)),
        ];
        if plot {
            files.push((dir.join("plot.svg"), self.svg()));
        }
        for (path, text) in &files {
            std::fs::write(path, text)?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifacts serialize");
    s.push('\n');
    s
}

/// Runs every mode serially on the same scenario.
pub fn compare(scenario: &Scenario<f64>) -> Result<Vec<RunResult>, hybridnav_core::sim::ScenarioError> {
    Strategy::ALL
        .iter()
        .map(|&mode| {
            let mut s = scenario.clone();
            s.nav.strategy = mode;
            RunResult::execute(s)
        })
        .collect()
}

fn load(path: &Path, err: &mut dyn Write) -> Option<Scenario<f64>> {
    match Scenario::load(path) {
        Ok(s) => Some(s),
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            None
        }
    }
}

/// The whole program, with injectable output streams. Returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            out: dir,
            opts,
            plot,
        } => {
            let Some(s) = load(&scenario, err) else {
                return EXIT_INVALID;
            };
            let s = apply_options(s, &opts);
            let run = match RunResult::execute(s) {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_INVALID;
                }
            };
            if let Some(dir) = dir {
                if let Err(e) = run.write(&dir, plot) {
                    let _ = writeln!(err, "error: writing {}: {e}", dir.display());
                    return EXIT_IO;
                }
            } else if plot {
                let _ = writeln!(err, "warning: --plot needs --out; no plot written");
            }
            let r = &run.report;
            let _ = writeln!(
                out,
                "{} [{}] {} in {:.2} s, path {:.3} m, {} replans, {} collisions",
                r.scenario,
                r.mode,
                r.outcome.as_str(),
                r.metrics.run_time,
                r.metrics.path_length,
                r.metrics.replan_count,
                r.metrics.collisions
            );
            if let Some(reason) = &r.fail_reason {
                let _ = writeln!(out, "reason: {reason}");
            }
            exit_code(r.outcome)
        }
        Command::Compare { scenario, out: dir, seed } => {
            let Some(mut s) = load(&scenario, err) else {
                return EXIT_INVALID;
            };
            if let Some(seed) = seed {
                s.sim.seed = seed;
            }
            let runs = match compare(&s) {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_INVALID;
                }
            };
            if let Some(dir) = dir {
                for run in &runs {
                    if let Err(e) = run.write(&dir.join(&run.report.mode), true) {
                        let _ = writeln!(err, "error: writing {}: {e}", dir.display());
                        return EXIT_IO;
                    }
                }
            }
            let reports: Vec<RunReport> = runs.into_iter().map(|r| r.report).collect();
            let _ = write!(out, "{}", format_table(&reports));
            EXIT_ARRIVED
        }
        Command::Serve {
            scenario,
            port,
            speed,
            static_dir,
            out: dir,
        } => {
            let Some(s) = load(&scenario, err) else {
                return EXIT_INVALID;
            };
            let mut cfg = hybridnav_telemetry::ServeConfig::new(s, port);
            cfg.speed = speed;
            cfg.static_dir = static_dir;
            cfg.out_dir = dir;
            match hybridnav_telemetry::serve_blocking(cfg) {
                Ok(_) => EXIT_ARRIVED,
                Err(e @ hybridnav_telemetry::ServeError::Scenario(_)) | Err(e @ hybridnav_telemetry::ServeError::Speed(_)) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_INVALID
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_IO
                }
            }
        }
    }
}
