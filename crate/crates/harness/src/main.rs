//! `ebbflow`: run scenarios, check properties over traces, and scan for
//! slashable offenses.
//!
//! Exit codes: 0 when every check passes, 1 on a property violation, 2 on a
//! usage or validation error.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ebbflow_harness::checkers::{self, Property, Verdict};
use ebbflow_simnet::compliance;
use ebbflow_simnet::scenario::Scenario;
use ebbflow_simnet::trace::{read_trace, write_trace, TraceRecord};
use ebbflow_simnet::world;

#[derive(Parser)]
#[command(name = "ebbflow", version, about = "Ebb-and-flow consensus simulator and checker")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a scenario, optionally writing the trace.
    Run {
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the execution trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check one property against a stored trace.
    Check {
        /// One of: safety, liveness, reorg-resilience, ssf, prefix, accountability.
        property: String,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Run a scenario under both fork-choice modes and compare outputs.
    Equivalence { scenario: PathBuf },
    /// Scan a stored trace for slashable offenses.
    SlashScan {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Execute a scenario and report schedule and equivocation compliance.
    Compliance { scenario: PathBuf },
}

/// Usage/validation failure, reported on stderr with exit code 2.
struct UsageError(String);

fn load_scenario(path: &Path) -> Result<Scenario, UsageError> {
    let text = fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    Scenario::from_toml(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn load_trace(path: &Path) -> Result<Vec<TraceRecord>, UsageError> {
    let file = fs::File::open(path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    read_trace(BufReader::new(file))
        .map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn print_verdict(v: &Verdict) {
    println!("{} {}", if v.pass { "PASS" } else { "FAIL" }, v.property);
    for violation in &v.violations {
        println!("  violation: {violation}");
    }
    for note in &v.notes {
        println!("  note: {note}");
    }
}

fn real_main(cli: Cli) -> Result<ExitCode, UsageError> {
    match cli.cmd {
        Cmd::Run { scenario, seed, trace } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let out = world::run(&s);
            if let Some(path) = trace {
                let mut buf = Vec::new();
                write_trace(&mut buf, &out.trace)
                    .map_err(|e| UsageError(format!("trace serialization: {e}")))?;
                fs::write(&path, buf)
                    .map_err(|e| UsageError(format!("cannot write {}: {e}", path.display())))?;
            }
            let sends = out
                .trace
                .iter()
                .filter(|r| matches!(r, TraceRecord::Send { .. }))
                .count();
            let top = out.observer.finalized_at.keys().map(|c| c.slot).max().unwrap_or(0);
            println!(
                "ran {} slots (rounds {}..={}), {} sends, observer finalized through slot {}",
                s.horizon,
                s.first_round(),
                s.last_round(),
                sends,
                top
            );
            if let Some((a, b)) = out.conflict {
                println!("conflicting finalization fabricated: slot {} vs slot {}", a.slot, b.slot);
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check { property, trace } => {
            let property: Property = property.parse().map_err(UsageError)?;
            let records = load_trace(&trace)?;
            let verdict = checkers::run_check(property, &records);
            print_verdict(&verdict);
            Ok(if verdict.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Cmd::Equivalence { scenario } => {
            let s = load_scenario(&scenario)?;
            let verdict = checkers::check_equivalence(&s);
            print_verdict(&verdict);
            Ok(if verdict.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Cmd::SlashScan { trace } => {
            let records = load_trace(&trace)?;
            let (verdict, _) = checkers::check_slashing(&records);
            print_verdict(&verdict);
            Ok(if verdict.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Cmd::Compliance { scenario } => {
            let s = load_scenario(&scenario)?;
            let out = world::run(&s);
            let report = compliance::check_compliance(&s, &out.trace);
            println!("{} compliance", if report.compliant { "PASS" } else { "FAIL" });
            if !report.tau_violations.is_empty() {
                println!("  sleepiness violated at slots {:?}", report.tau_violations);
            }
            if !report.head_equivocators.is_empty() {
                println!(
                    "  head-vote equivocators {:?} (bound {})",
                    report.head_equivocators, report.equivocator_bound
                );
            }
            Ok(if report.compliant { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => code,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
