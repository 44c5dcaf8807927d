use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "infoprice", version, about = "Information-based asset pricing: price, simulate, option and verify jobs")]
pub struct Cli {
    /// Worker threads for Monte Carlo jobs (default: all cores)
    #[arg(long, global = true, env = "INFOPRICE_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prices every asset at given times and information states
    Price(PriceArgs),
    /// Simulates information paths and asset prices
    Simulate(SimulateArgs),
    /// Values European calls on a single-factor flow
    Option(OptionArgs),
    /// Runs a statistical verification suite
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario file (TOML)
    pub scenario: PathBuf,
    /// Output directory; CSV goes to stdout when omitted (except for `simulate`)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Quadrature nodes per continuous prior
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Maturity guard as a fraction of each factor's maturity
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Valuation time (repeatable)
    #[arg(long = "at", default_value = "0")]
    pub at: Vec<f64>,
    /// Information value `ID=ξ` (repeatable)
    #[arg(long = "xi", value_parser = parse_assignment)]
    pub xi: Vec<(String, f64)>,
    /// Itô sum `ID=∫σdξ`, needed for time-varying rates (repeatable)
    #[arg(long = "stieltjes", value_parser = parse_assignment)]
    pub stieltjes: Vec<(String, f64)>,
    /// Revealed value `ID=x` of a matured factor (repeatable)
    #[arg(long = "reveal", value_parser = parse_assignment)]
    pub reveal: Vec<(String, f64)>,
    /// CSV of observed information (`t,<id>,...`); prices every row
    #[arg(long, conflicts_with_all = ["xi", "stieltjes", "reveal"])]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time steps on [0, horizon]
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OptionArgs {
    #[command(flatten)]
    pub common: Common,
    /// Strike (repeatable)
    #[arg(long, required = true)]
    pub strike: Vec<f64>,
    #[arg(long)]
    pub expiry: f64,
    /// Factor whose flow underlies the option (default: the only factor)
    #[arg(long)]
    pub factor: Option<String>,
    /// Also estimate by Monte Carlo with this many paths
    #[arg(long)]
    pub mc: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Bridge,
    Filter,
    Consistency,
    Innovation,
    Inverse,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time steps (the coarsest grid for the inverse suite)
    #[arg(long)]
    pub grid: Option<usize>,
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (id, value) = s.split_once('=').ok_or_else(|| format!("expected ID=VALUE, got `{s}`"))?;
    let v = value
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad number in `{s}`: {e}"))?;
    Ok((id.trim().to_string(), v))
}
