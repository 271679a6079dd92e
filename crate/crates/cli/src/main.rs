//! `ontoact`: run scenarios, lint description bundles, query and serve the
//! capability registry.

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ontoact_core::agent::{GoalStatus, RunReport};
use ontoact_core::matchmaker::SharedRegistry;
use ontoact_core::scenario::{diff_traces, load_descriptions};
use ontoact_core::Scenario;

const EXIT_GOAL_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "ontoact", version, about = "Multi-agent coordination scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print a summary.
    Run {
        scenario: PathBuf,
        /// Write the JSON-lines trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Compare the trace with a golden file.
        #[arg(long)]
        verify: Option<PathBuf>,
    },
    /// Load, validate and link description files.
    Validate {
        #[arg(required = true)]
        bundles: Vec<PathBuf>,
    },
    /// Ask a scenario's registry which agents provide a capability.
    Lookup {
        capability: String,
        #[arg(long)]
        scenario: PathBuf,
        /// Output classes the provider must advertise.
        #[arg(long = "output")]
        outputs: Vec<String>,
    },
    /// Serve a scenario's registry as line-delimited JSON over TCP.
    ServeRegistry {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: String,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            trace,
            verify,
        } => run(&scenario, trace.as_deref(), verify.as_deref()),
        Command::Validate { bundles } => validate(&bundles),
        Command::Lookup {
            capability,
            scenario,
            outputs,
        } => lookup(&capability, &scenario, &outputs),
        Command::ServeRegistry { scenario, addr } => serve(&scenario, &addr),
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn print_summary(name: &str, report: &RunReport) {
    println!("scenario {name}: {} ticks, {} rounds", report.ticks, report.rounds);
    for c in &report.conversations {
        let participants: Vec<&str> = c.participants.iter().map(|p| p.as_str()).collect();
        print!(
            "  conversation {} {} {} -> [{}]: {}",
            c.id,
            c.protocol,
            c.initiator,
            participants.join(", "),
            c.status.as_str()
        );
        match &c.winner {
            Some(w) => println!(", winner {w}"),
            None => println!(),
        }
    }
    for a in &report.agents {
        for (goal, status) in &a.goals {
            match status {
                GoalStatus::Succeeded => println!("  goal {} {goal}: succeeded", a.id),
                GoalStatus::Pending => println!("  goal {} {goal}: pending", a.id),
                GoalStatus::Failed(why) => println!("  goal {} {goal}: failed ({why})", a.id),
            }
        }
    }
}

fn run(path: &Path, trace: Option<&Path>, verify: Option<&Path>) -> ExitCode {
    let scenario = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let (_, report) = match scenario.run() {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    print_summary(&scenario.config.name, &report);

    let jsonl = report.trace.to_jsonl();
    if let Some(out) = trace {
        if let Err(e) = fs::write(out, &jsonl) {
            return fail(EXIT_CONFIG, format!("{}: {e}", out.display()));
        }
    }
    if let Some(golden) = verify {
        let expected = match fs::read_to_string(golden) {
            Ok(t) => t,
            Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", golden.display())),
        };
        let diffs = diff_traces(&expected, &jsonl);
        if !diffs.is_empty() {
            for d in &diffs {
                eprintln!("{d}");
            }
            return fail(
                EXIT_MISMATCH,
                format!("trace differs from {} in {} lines", golden.display(), diffs.len()),
            );
        }
        println!("trace matches {}", golden.display());
    }
    if report.all_goals_succeeded() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_GOAL_FAILED)
    }
}

fn validate(bundles: &[PathBuf]) -> ExitCode {
    match load_descriptions(bundles) {
        Ok(reg) => {
            println!(
                "{} descriptions ok: {} protocols, {} communicative acts, {} actions",
                reg.len(),
                reg.protocols().count(),
                reg.cas().count(),
                reg.actions().count()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_CONFIG, e),
    }
}

fn lookup(capability: &str, path: &Path, outputs: &[String]) -> ExitCode {
    let rt = match Scenario::load(path).and_then(|s| s.runtime()) {
        Ok(rt) => rt,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    for agent in rt.matchmaker.lookup(capability, outputs, &rt.board.data) {
        println!("{agent}");
    }
    ExitCode::SUCCESS
}

fn serve(path: &Path, addr: &str) -> ExitCode {
    let rt = match Scenario::load(path).and_then(|s| s.runtime()) {
        Ok(rt) => rt,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let listener = match TcpListener::bind(addr) {
        Ok(l) => l,
        Err(e) => return fail(EXIT_CONFIG, format!("{addr}: {e}")),
    };
    if let Ok(local) = listener.local_addr() {
        println!("registry listening on {local}");
    }
    let shared = SharedRegistry::new(rt.matchmaker.clone(), rt.board.data.clone());
    match shared.serve(&listener) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_CONFIG, e),
    }
}
