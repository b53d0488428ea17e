use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rhm_core::config::{self, ConfigError};
use rhm_core::output;
use rhm_core::sim::{run_scenario, ScenarioError};

const EXIT_RUNTIME: u8 = 1;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "rhm", version, about = "Random hypersurface model tracking scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or a bundled scenario by name
    Run {
        scenario: String,
        /// Output directory
        #[arg(long, env = "RHM_OUT_DIR", default_value = "rhm-out")]
        out: PathBuf,
        /// Master RNG seed, overriding the file
        #[arg(long)]
        seed: Option<u64>,
        /// Override a scenario key, e.g. tracker.trace_normalize=false
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List bundled scenarios
    List,
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn config_failure(e: ConfigError) -> ExitCode {
    fail(e.exit_code() as u8, e)
}

fn run(scenario: &str, out: PathBuf, seed: Option<u64>, mut overrides: Vec<String>) -> ExitCode {
    if let Some(seed) = seed {
        overrides.push(format!("seed={seed}"));
    }
    let cfg = match config::load(scenario, &overrides) {
        Ok(cfg) => cfg,
        Err(e) => return config_failure(e),
    };
    let report = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(ScenarioError::Invalid(m)) => return config_failure(ConfigError::Invalid(m)),
        Err(e) => return fail(EXIT_RUNTIME, e),
    };
    if cfg.n_runs > 0 && report.diverged_runs == cfg.n_runs {
        return fail(EXIT_DIVERGED, format!("all {} runs diverged", cfg.n_runs));
    }
    if report.diverged_runs > 0 {
        eprintln!("warning: {} of {} runs diverged", report.diverged_runs, cfg.n_runs);
    }

    let bundle = output::render(&report, &cfg);
    let written = match bundle.write(&out) {
        Ok(w) => w,
        Err(e) => return fail(EXIT_RUNTIME, format!("writing {}: {e}", out.display())),
    };
    if let Some(last) = report.final_summary() {
        println!(
            "{}: {} runs x {} steps, final iou {:.4}, mean iou {:.4}, center rmse {:.4}",
            cfg.name, cfg.n_runs, cfg.n_steps, last.iou_of_mean, last.mean_iou, last.center_rmse
        );
        if cfg.burn_in > 0 {
            println!(
                "center rmse after step {}: {:.4}",
                cfg.burn_in,
                report.center_rmse_after(cfg.burn_in)
            );
        }
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            overrides,
        } => run(&scenario, out, seed, overrides),
        Command::List => {
            for name in config::bundled_names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}
