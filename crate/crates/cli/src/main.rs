use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use repsim_cli::commands::{run_rate_table, run_chain_sim, run_link_sim, run_tomography, master_seed, CommandOutput};
use repsim_cli::config::ExperimentConfig;
use repsim_core::Error;

/// Density-operator simulator of quantum-repeater building blocks.
#[derive(Parser)]
#[command(name = "repsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (sectioned key = value text).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides run.master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for replicas and bootstrap resamples.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_parser = ["csv", "json"], default_value = "json")]
    format: String,

    /// Config override, repeatable: --set section.key=value.
    #[arg(long = "set", global = true)]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the heralded-link entanglement rate over arm lengths.
    RateTable,
    /// Simulate the two-link (A — repeater — B) protocol.
    LinkSim,
    /// Simulate an N-node chain, heralded or unheralded.
    ChainSim,
    /// Run the tomography round trip: simulate counts, reconstruct, bootstrap.
    Tomo,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(output) => {
            if let Err(e) = write_output(&cli, &output) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if output.unresolved {
                eprintln!("warning: statistically unresolved result");
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidArgument(_) | Error::IncompleteSettings { .. } => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: &Cli) -> repsim_core::Result<CommandOutput> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::parse("")?,
    };
    for spec in &cli.sets {
        cfg.set_override(spec)?;
    }
    match cli.command {
        Command::RateTable => run_rate_table(&cfg),
        Command::LinkSim => {
            let seed = master_seed(&cfg, cli.seed, true)?;
            run_link_sim(&cfg, seed, cli.workers)
        }
        Command::ChainSim => {
            let seed = master_seed(&cfg, cli.seed, true)?;
            run_chain_sim(&cfg, seed, cli.workers)
        }
        Command::Tomo => {
            let seed = master_seed(&cfg, cli.seed, true)?;
            run_tomography(&cfg, seed, cli.workers)
        }
    }
}

fn write_output(cli: &Cli, output: &CommandOutput) -> std::io::Result<()> {
    let body = if cli.format == "csv" {
        match &output.csv {
            Some(csv) => csv.clone(),
            None => {
                // Commands without a tabular form fall back to JSON.
                serde_json::to_string_pretty(&output.json).expect("artifact serializes") + "\n"
            }
        }
    } else {
        serde_json::to_string_pretty(&output.json).expect("artifact serializes") + "\n"
    };

    match &cli.out {
        Some(path) => {
            std::fs::write(path, body)?;
            if let Some(events) = &output.events_jsonl {
                std::fs::write(path.with_extension("events.jsonl"), format!("{events}\n"))?;
            }
            for (suffix, text) in &output.extra_csv {
                let companion = companion_path(path, suffix);
                std::fs::write(companion, text)?;
            }
        }
        None => {
            print!("{body}");
            if output.events_jsonl.is_some() || !output.extra_csv.is_empty() {
                eprintln!("note: companion artifacts need --out to be written");
            }
        }
    }
    Ok(())
}

fn companion_path(base: &std::path::Path, suffix: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    base.with_file_name(format!("{stem}.{suffix}"))
}
