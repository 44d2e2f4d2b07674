use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use htlc_arena::runner::commands::{self, Flags, ModeFlag, Output};

#[derive(Parser)]
#[command(name = "arena", version, about = "Ledger simulator and strategy verifier for hashed-timelock swaps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one schedule drawn from the seed.
    Simulate(Common),
    /// Expected utilities, exact or Monte Carlo.
    Expect(Common),
    /// Check the scenario's dominance block.
    Dominance(Common),
    /// Run the claim grids and the equilibrium checks.
    Lemmas(Common),
    /// Solo versus pooled mining moments and utilities.
    Pool(Common),
    /// Rounds to completion for one protocol path.
    Ttc(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

#[derive(Args)]
struct Common {
    /// Input file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn flags(&self) -> Flags {
        let mode = self.mode.map(|m| match m {
            ModeArg::Exact => ModeFlag::Exact,
            ModeArg::Mc => ModeFlag::Mc,
        });
        Flags { seed: self.seed, trials: self.trials, mode }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (c, f): (&Common, fn(&Path, Flags) -> Result<Output, commands::CommandError>) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate),
        Command::Expect(c) => (c, commands::expect),
        Command::Dominance(c) => (c, commands::dominance),
        Command::Lemmas(c) => (c, commands::lemmas),
        Command::Pool(c) => (c, commands::pool),
        Command::Ttc(c) => (c, commands::ttc),
    };
    let out = f(&c.scenario, c.flags())?;
    let text = out.report.render();
    match &c.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(out.failed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
