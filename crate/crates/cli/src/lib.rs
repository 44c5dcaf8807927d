//! Scenario-driven batch front-end for `infoprice-core`.

pub mod args;
pub mod commands;
pub mod output;
pub mod scenario;
pub mod verify;

use anyhow::{Context, Result};
use args::{Cli, Command};

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker pool")?;
    pool.install(|| match &cli.command {
        Command::Price(a) => commands::price(a).map(|_| 0),
        Command::Simulate(a) => commands::simulate(a).map(|_| 0),
        Command::Option(a) => commands::option(a).map(|_| 0),
        Command::Verify(a) => verify::verify(a).map(|ok| if ok { 0 } else { 1 }),
    })
}
