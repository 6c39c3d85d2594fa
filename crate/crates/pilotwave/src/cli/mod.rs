//! Scenario-driven command-line front end.
//!
//! `run <config>` executes one scenario described by a TOML (or JSON) file and
//! writes `manifest.json`, `summary.json` and field/ensemble CSVs into the
//! configured output directory. `verify <suite>` runs the acceptance scenarios
//! at their pinned desk-scale parameters and prints a pass/fail table.
//! `export <run-dir> --format csv|json` re-emits a run summary.
//!
//! Summaries separate hard `assertions` (each with its bound and provenance)
//! from `measurements` (reported values that no identity pins down), so
//! automation never gates on the contested near-zero expectation claims.

mod config;
pub mod scenarios;
pub mod verify;

pub use config::{
    ConstantsConfig, DpConfig, EnsembleConfig, GridConfig, Scenario, ScenarioConfig, TimeConfig,
};
pub use scenarios::{run_scenario, Summary};

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::Error;

/// Environment variable naming the default output root for runs.
pub const OUTPUT_ROOT_ENV: &str = "PILOTWAVE_OUT";

#[derive(Parser)]
#[command(name = "pilotwave", about = "Pilot-wave dynamics laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a TOML/JSON config file.
    Run { config: PathBuf },
    /// Run an acceptance suite: identities, convergence, stochastic, dp, all.
    Verify { suite: String },
    /// Re-emit a run summary in another format.
    Export {
        run_dir: PathBuf,
        #[arg(long, default_value = "json")]
        format: String,
    },
}

/// CLI entry point; returns the process exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config } => run_command(&config),
        Command::Verify { suite } => verify_command(&suite),
        Command::Export { run_dir, format } => export_command(&run_dir, &format),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// 2 for validation problems, 3 for numerical faults.
pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

fn run_command(path: &std::path::Path) -> crate::Result<()> {
    let config = ScenarioConfig::load(path)?;
    let out_dir = config.resolved_output_dir()?;
    let started = std::time::Instant::now();
    let summary = run_scenario(&config)?;
    std::fs::create_dir_all(&out_dir)?;
    summary.write_files(&out_dir)?;
    config.write_manifest(&out_dir, started.elapsed().as_secs_f64())?;
    println!(
        "scenario {:?} complete -> {}",
        config.scenario,
        out_dir.display()
    );
    for line in summary.table_lines() {
        println!("{line}");
    }
    if !summary.all_assertions_pass() {
        println!("note: some assertions failed; see summary.json");
    }
    Ok(())
}

fn verify_command(suite: &str) -> crate::Result<()> {
    let suite = verify::Suite::parse(suite)?;
    let results = verify::run_suite(suite);
    let mut all_pass = true;
    println!(
        "{:<58} {:>13} {:>13}  {}",
        "criterion", "measured", "bound", "status"
    );
    for r in &results {
        all_pass &= r.pass;
        println!(
            "{:<58} {:>13.6e} {:>13.6e}  {}",
            r.name,
            r.measured,
            r.bound,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    if all_pass {
        println!("all {} criteria passed", results.len());
        Ok(())
    } else {
        Err(Error::Numerical("verification failed".into()))
    }
}

fn export_command(run_dir: &std::path::Path, format: &str) -> crate::Result<()> {
    let summary_path = run_dir.join("summary.json");
    let text = std::fs::read_to_string(&summary_path)?;
    match format {
        "json" => {
            println!("{text}");
            Ok(())
        }
        "csv" => {
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let mut rows = vec!["section,name,value".to_string()];
            for section in ["assertions", "measurements"] {
                if let Some(map) = value.get(section).and_then(|v| v.as_object()) {
                    for (k, v) in map {
                        let shown = v
                            .get("value")
                            .and_then(|x| x.as_f64())
                            .or_else(|| v.as_f64());
                        rows.push(format!(
                            "{section},{k},{}",
                            shown.map_or_else(|| v.to_string(), |x| x.to_string())
                        ));
                    }
                }
            }
            let out = run_dir.join("summary.csv");
            std::fs::write(&out, rows.join("\n") + "\n")?;
            println!("wrote {}", out.display());
            Ok(())
        }
        other => Err(Error::Config(format!("unknown export format '{other}'"))),
    }
}
