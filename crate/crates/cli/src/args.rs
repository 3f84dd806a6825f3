//! Command line grammar and range checks.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use tddyn_core::game::GameParams;
use tddyn_core::replicator::max_mutation_strength;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "tddyn",
    version,
    about = "Evolutionary and learning dynamics of the Traveler's Dilemma"
)]
pub struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps; defaults to the available cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output CSV path; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Heatmap path for sweep subcommands.
    #[arg(long, global = true)]
    pub svg: Option<PathBuf>,
    /// Stamp output with the current time instead of SOURCE_DATE_EPOCH.
    #[arg(long, global = true)]
    pub wallclock: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Payoff matrix and classical solution concepts.
    #[command(subcommand)]
    Game(GameCommand),
    /// Replicator-mutator equation.
    #[command(subcommand)]
    Rm(RmCommand),
    /// Wright-Fisher process.
    #[command(subcommand)]
    Wf(WfCommand),
    /// Introspection dynamics.
    #[command(subcommand)]
    Intro(IntroCommand),
    /// Run the oracle battery.
    Verify,
}

#[derive(Debug, Clone, Args)]
pub struct GameArgs {
    #[arg(long = "L", default_value_t = 2)]
    pub lower: i64,
    #[arg(long = "U", default_value_t = 100)]
    pub upper: i64,
    #[arg(long = "R", default_value_t = 2)]
    pub reward: i64,
}

#[derive(Debug, Clone, Args)]
pub struct RangeArgs {
    #[arg(long = "L", default_value_t = 2)]
    pub lower: i64,
    #[arg(long = "U", default_value_t = 100)]
    pub upper: i64,
}

#[derive(Debug, Subcommand)]
pub enum GameCommand {
    /// Full payoff matrix as CSV.
    Matrix(GameArgs),
    /// Kind of every two-claim sub-game.
    Classify(GameArgs),
    /// Claims surviving iterated elimination.
    Eliminate(GameArgs),
}

#[derive(Debug, Subcommand)]
pub enum RmCommand {
    /// One trajectory from the uniform mixture.
    Run(RmRunArgs),
    /// Highest-frequency claim over an (R, q) grid.
    Sweep(RmSweepArgs),
}

#[derive(Debug, Args)]
pub struct RmRunArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long)]
    pub q: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 10_000.0)]
    pub tmax: f64,
    #[arg(long = "conv-tol", default_value_t = 1e-10)]
    pub conv_tol: f64,
    /// Write every n-th step (0: first and last only).
    #[arg(long = "sample-every", default_value_t = 100)]
    pub sample_every: usize,
}

#[derive(Debug, Args)]
pub struct RmSweepArgs {
    #[command(flatten)]
    pub range: RangeArgs,
    #[arg(long = "R-list")]
    pub rewards: List<i64>,
    #[arg(long = "q-list")]
    pub strengths: List<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 10_000.0)]
    pub tmax: f64,
}

#[derive(Debug, Subcommand)]
pub enum WfCommand {
    /// Mean claim per generation for one seed.
    Run(WfRunArgs),
    /// Terminal mean claim over a (rho, mu, delta) grid with replicates.
    Sweep(WfSweepArgs),
}

#[derive(Debug, Args)]
pub struct WfRunArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long = "N", default_value_t = 100)]
    pub population: usize,
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub delta: i64,
    #[arg(long)]
    pub rho: f64,
    /// Generations.
    #[arg(long = "t", default_value_t = 1000)]
    pub generations: usize,
    /// `uniform`, or a claim for a monomorphic start.
    #[arg(long, default_value = "uniform")]
    pub init: String,
}

#[derive(Debug, Args)]
pub struct WfSweepArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long = "N", default_value_t = 100)]
    pub population: usize,
    #[arg(long = "t", default_value_t = 1000)]
    pub generations: usize,
    #[arg(long = "mu-list")]
    pub mus: List<f64>,
    #[arg(long = "delta-list")]
    pub deltas: List<i64>,
    #[arg(long = "rho-list")]
    pub rhos: List<f64>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
}

#[derive(Debug, Subcommand)]
pub enum IntroCommand {
    /// Seeded simulation trace.
    Sim(IntroSimArgs),
    /// Exact stationary distribution.
    Exact(IntroExactArgs),
    /// Exact average claim over an (R, beta) grid.
    Sweep(IntroSweepArgs),
}

#[derive(Debug, Args)]
pub struct IntroSimArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub steps: u64,
    #[arg(long = "burn-in", default_value_t = 0)]
    pub burn_in: u64,
    /// Write every n-th state.
    #[arg(long = "trace-every", default_value_t = 1)]
    pub trace_every: u64,
}

#[derive(Debug, Args)]
pub struct IntroExactArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct IntroSweepArgs {
    #[command(flatten)]
    pub range: RangeArgs,
    #[arg(long = "R-list")]
    pub rewards: List<i64>,
    #[arg(long = "beta-list")]
    pub betas: List<f64>,
}

/// Comma-separated values; each item may also be an inclusive
/// `start:step:stop` range.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl FromStr for List<f64> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim) {
            let parts: Vec<&str> = item.split(':').collect();
            let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number"));
            match parts.as_slice() {
                [one] => out.push(num(one)?),
                [start, step, stop] => {
                    let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
                    if !(step > 0.0) || stop < start {
                        return Err(format!("range `{item}` needs step > 0 and start <= stop"));
                    }
                    let count = ((stop - start) / step + 1e-9).floor() as usize;
                    out.extend((0..=count).map(|k| start + k as f64 * step));
                }
                _ => return Err(format!("cannot read `{item}`")),
            }
        }
        Ok(List(out))
    }
}

impl FromStr for List<i64> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim) {
            let parts: Vec<&str> = item.split(':').collect();
            let num = |p: &str| p.trim().parse::<i64>().map_err(|_| format!("`{p}` is not an integer"));
            match parts.as_slice() {
                [one] => out.push(num(one)?),
                [start, step, stop] => {
                    let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
                    if step <= 0 || stop < start {
                        return Err(format!("range `{item}` needs step > 0 and start <= stop"));
                    }
                    out.extend((start..=stop).step_by(step as usize));
                }
                _ => return Err(format!("cannot read `{item}`")),
            }
        }
        Ok(List(out))
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn game_params(lower: i64, upper: i64, reward: i64) -> Result<GameParams, CliError> {
    if lower < 0 {
        return Err(usage(format!("--L {lower}: the lowest claim must be nonnegative")));
    }
    if lower >= upper {
        return Err(usage(format!("--L {lower} --U {upper}: L < U is required")));
    }
    if reward <= 1 {
        return Err(usage(format!("--R {reward}: the reward must exceed 1")));
    }
    GameParams::new(lower, upper, reward).map_err(|e| usage(e.to_string()))
}

impl GameArgs {
    pub fn params(&self) -> Result<GameParams, CliError> {
        game_params(self.lower, self.upper, self.reward)
    }
}

impl RangeArgs {
    /// Checks the range with the smallest admissible reward.
    pub fn params(&self) -> Result<GameParams, CliError> {
        game_params(self.lower, self.upper, 2)
    }
}

pub fn check_rewards(flag: &str, rewards: &[i64]) -> Result<(), CliError> {
    non_empty(flag, rewards)?;
    match rewards.iter().find(|&&r| r <= 1) {
        Some(r) => Err(usage(format!("{flag}: reward {r} must exceed 1"))),
        None => Ok(()),
    }
}

pub fn check_mutation_strength(flag: &str, q: f64, m: usize) -> Result<(), CliError> {
    let bound = max_mutation_strength::<f64>(m);
    if !(0.0..=bound).contains(&q) {
        return Err(usage(format!(
            "{flag}: q = {q} is out of range; q must lie in [0, {bound}] (= (m-1)/m for m = {m})"
        )));
    }
    Ok(())
}

pub fn check_probability(flag: &str, value: f64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(usage(format!("{flag}: {value} must lie in [0, 1]")));
    }
    Ok(())
}

pub fn check_intensity(flag: &str, value: f64, allow_infinite: bool) -> Result<(), CliError> {
    if value.is_nan() || value < 0.0 || (!allow_infinite && value.is_infinite()) {
        let kind = if allow_infinite { "nonnegative" } else { "finite and nonnegative" };
        return Err(usage(format!("{flag}: {value} must be {kind}")));
    }
    Ok(())
}

pub fn check_positive(flag: &str, value: f64) -> Result<(), CliError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(usage(format!("{flag}: {value} must be positive and finite")));
    }
    Ok(())
}

pub fn check_at_least(flag: &str, value: i64, min: i64) -> Result<(), CliError> {
    if value < min {
        return Err(usage(format!("{flag}: {value} must be at least {min}")));
    }
    Ok(())
}

pub fn non_empty<T>(flag: &str, values: &[T]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(usage(format!("{flag}: the list is empty")));
    }
    Ok(())
}
