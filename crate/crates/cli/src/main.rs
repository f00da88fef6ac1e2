//! Scenario runner: run one scenario, sweep a directory, or compare two
//! finished runs against their family's declared orderings.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use liftwing_core::harness::{compare_runs, run_scenario, RunOutput, Scenario, ScenarioMetrics};

#[derive(Parser)]
#[command(name = "liftwing", version, about = "Lifting-wing quadcopter flight simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single scenario file.
    Run(RunArgs),
    /// Run every scenario file in a directory (parallel workers).
    Sweep(SweepArgs),
    /// Compare two metrics files; exits nonzero when a declared ordering fails.
    Compare { run_a: PathBuf, run_b: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Output directory for the log and metrics files.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the log decimation (log every Nth control cycle).
    #[arg(long)]
    decimate: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    dir: PathBuf,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    decimate: Option<usize>,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => {
            let sc = load(&args.scenario, args.seed, args.decimate)?;
            let out = execute(&sc)?;
            write_outputs(&args.out, &sc.name, &out)?;
            print_summary(&out.metrics);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&args.dir)
                .with_context(|| format!("read dir {}", args.dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "toml"))
                .collect();
            files.sort();
            if files.is_empty() {
                bail!("no scenario files in {}", args.dir.display());
            }
            let mut results: Vec<(String, ScenarioMetrics)> = files
                .par_iter()
                .map(|f| {
                    let sc = load(f, args.seed, args.decimate)?;
                    let out = execute(&sc)?;
                    write_outputs(&args.out, &sc.name, &out)?;
                    Ok((sc.name.clone(), out.metrics))
                })
                .collect::<Result<Vec<_>>>()?;
            // Merge deterministically by scenario name.
            results.sort_by(|a, b| a.0.cmp(&b.0));
            for (_, m) in &results {
                print_summary(m);
            }
            let summary: Vec<&ScenarioMetrics> = results.iter().map(|(_, m)| m).collect();
            let path = args.out.join("summary.json");
            std::fs::write(&path, serde_json::to_string_pretty(&summary)?)
                .with_context(|| format!("write {}", path.display()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { run_a, run_b } => {
            let a: ScenarioMetrics = read_json(&run_a)?;
            let b: ScenarioMetrics = read_json(&run_b)?;
            let report = compare_runs(&a, &b)?;
            println!("family: {}  ({} vs {})", report.family, report.a, report.b);
            for c in &report.checks {
                println!("  [{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn load(path: &Path, seed: Option<u64>, decimate: Option<usize>) -> Result<Scenario> {
    let mut sc = Scenario::from_path(path)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(d) = decimate {
        sc.log_decimation = d.max(1);
    }
    Ok(sc)
}

fn execute(sc: &Scenario) -> Result<RunOutput> {
    let out = run_scenario(sc)?;
    if let Some(msg) = &out.metrics.aborted {
        eprintln!("warning: {} aborted early: {msg}", sc.name);
    }
    Ok(out)
}

fn write_outputs(dir: &Path, name: &str, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let log_path = dir.join(format!("{name}.csv"));
    std::fs::write(&log_path, &out.log)?;
    let metrics_path = dir.join(format!("{name}.metrics.json"));
    std::fs::write(&metrics_path, serde_json::to_string_pretty(&out.metrics)?)?;
    Ok(())
}

fn read_json(path: &Path) -> Result<ScenarioMetrics> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("read {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn print_summary(m: &ScenarioMetrics) {
    let mut extras = Vec::new();
    if let Some(t) = m.transition_time {
        extras.push(format!("transition {t:.2} s"));
    }
    if let Some(a) = m.max_altitude_error {
        extras.push(format!("max alt err {a:.3} m"));
    }
    if let Some(r) = m.position_rms {
        extras.push(format!("pos rms {r:.3} m"));
    }
    if let Some(s) = m.sideslip_rms_high {
        extras.push(format!("slip hi {s:.4} rad"));
    }
    if let Some(s) = m.sideslip_rms_low {
        extras.push(format!("slip lo {s:.4} rad"));
    }
    println!(
        "{}: {:.1} s, {:.0} J, mean {:.0} W, Va_end {:.1} m/s{}{}",
        m.name,
        m.elapsed,
        m.total_energy,
        m.mean_power,
        m.final_airspeed,
        if extras.is_empty() { "" } else { " | " },
        extras.join(", ")
    );
}
