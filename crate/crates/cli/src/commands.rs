use std::io::Write;
use std::path::{Path, PathBuf};

use tddyn_core::game::{build_payoff_matrix, classify_all, iterated_elimination, GameParams, SubgameKind};
use tddyn_core::harness::{render_csv, write_csv, write_heatmap_svg, RunMetadata, SweepResult, Value};
use tddyn_core::introspection::{
    average_claim, build_transition, run_intro, stationary_distribution, sweep_intro, IntroConfig,
    JointState,
};
use tddyn_core::replicator::{
    highest_frequency_claim, integrate, sweep_rm, RmConfig, SimplexVector,
};
use tddyn_core::verification::run_battery;
use tddyn_core::wright_fisher::{replicate_means, run_wf, sweep_wf, InitRule, WfConfig};
use tddyn_core::Error;

use crate::args::*;
use crate::CliError;

const DEFAULT_SEED: u64 = 0;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Range checks that clap cannot express.
pub(crate) fn validate(cli: &Cli) -> Result<(), CliError> {
    if cli.threads == Some(0) {
        return Err(usage("--threads: 0 must be at least 1"));
    }
    let sweep = matches!(
        cli.command,
        Command::Rm(RmCommand::Sweep(_)) | Command::Wf(WfCommand::Sweep(_)) | Command::Intro(IntroCommand::Sweep(_))
    );
    if cli.svg.is_some() && !sweep {
        return Err(usage("--svg: heatmaps are only written by sweep subcommands"));
    }
    match &cli.command {
        Command::Game(GameCommand::Matrix(g) | GameCommand::Classify(g) | GameCommand::Eliminate(g)) => {
            g.params().map(drop)
        }
        Command::Rm(RmCommand::Run(a)) => {
            let g = a.game.params()?;
            check_mutation_strength("--q", a.q, g.num_actions())?;
            check_positive("--dt", a.dt)?;
            check_intensity("--tmax", a.tmax, false)?;
            check_positive("--conv-tol", a.conv_tol)
        }
        Command::Rm(RmCommand::Sweep(a)) => {
            let g = a.range.params()?;
            check_rewards("--R-list", &a.rewards.0)?;
            non_empty("--q-list", &a.strengths.0)?;
            for &q in &a.strengths.0 {
                check_mutation_strength("--q-list", q, g.num_actions())?;
            }
            check_positive("--dt", a.dt)?;
            check_intensity("--tmax", a.tmax, false)
        }
        Command::Wf(WfCommand::Run(a)) => {
            let g = a.game.params()?;
            check_at_least("--N", a.population as i64, 1)?;
            check_probability("--mu", a.mu)?;
            check_at_least("--delta", a.delta, 1)?;
            check_intensity("--rho", a.rho, false)?;
            init_rule(&a.init, &g).map(drop)
        }
        Command::Wf(WfCommand::Sweep(a)) => {
            a.game.params()?;
            check_at_least("--N", a.population as i64, 1)?;
            check_at_least("--reps", a.reps as i64, 1)?;
            non_empty("--mu-list", &a.mus.0)?;
            non_empty("--delta-list", &a.deltas.0)?;
            non_empty("--rho-list", &a.rhos.0)?;
            a.mus.0.iter().try_for_each(|&mu| check_probability("--mu-list", mu))?;
            a.deltas.0.iter().try_for_each(|&d| check_at_least("--delta-list", d, 1))?;
            a.rhos.0.iter().try_for_each(|&r| check_intensity("--rho-list", r, false))
        }
        Command::Intro(IntroCommand::Sim(a)) => {
            a.game.params()?;
            check_intensity("--beta", a.beta, true)?;
            if a.burn_in >= a.steps {
                return Err(usage(format!(
                    "--burn-in {}: must be below --steps {}",
                    a.burn_in, a.steps
                )));
            }
            Ok(())
        }
        Command::Intro(IntroCommand::Exact(a)) => {
            a.game.params()?;
            check_intensity("--beta", a.beta, false)
        }
        Command::Intro(IntroCommand::Sweep(a)) => {
            a.range.params()?;
            check_rewards("--R-list", &a.rewards.0)?;
            non_empty("--beta-list", &a.betas.0)?;
            a.betas.0.iter().try_for_each(|&b| check_intensity("--beta-list", b, false))
        }
        Command::Verify => Ok(()),
    }
}

fn init_rule(text: &str, g: &GameParams) -> Result<InitRule, CliError> {
    if text == "uniform" {
        return Ok(InitRule::Uniform);
    }
    match text.parse::<i64>() {
        Ok(c) if g.contains(c) => Ok(InitRule::Monomorphic(c)),
        _ => Err(usage(format!(
            "--init {text}: expected `uniform` or a claim in [{}, {}]",
            g.lower, g.upper
        ))),
    }
}

struct Context<'a> {
    seed: u64,
    threads: usize,
    out: Option<&'a Path>,
    svg: Option<&'a Path>,
    wallclock: bool,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Context<'_> {
    fn emit(&mut self, mut table: SweepResult) -> Result<(), CliError> {
        if self.wallclock {
            table.metadata = table.metadata.with_wallclock();
        }
        match self.out {
            Some(path) => write_csv(&table, path)?,
            None => self.stdout.write_all(render_csv(&table).as_bytes())?,
        }
        Ok(())
    }

    /// Human-readable lines go to stdout unless the table already does.
    fn say(&mut self, line: impl AsRef<str>) -> Result<(), CliError> {
        let sink: &mut dyn Write = if self.out.is_some() { self.stdout } else { self.stderr };
        writeln!(sink, "{}", line.as_ref())?;
        Ok(())
    }

    fn fail_on_rows(&mut self, table: &SweepResult) -> Result<(), CliError> {
        match table.failed_rows() {
            0 => Ok(()),
            n => Err(CliError::Runtime(format!(
                "{n} of {} sweep rows failed; see the `error` column",
                table.rows.len()
            ))),
        }
    }
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    validate(cli)?;
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let mut ctx = Context {
        seed: cli.seed.unwrap_or(DEFAULT_SEED),
        threads,
        out: cli.out.as_deref(),
        svg: cli.svg.as_deref(),
        wallclock: cli.wallclock,
        stdout,
        stderr,
    };
    match &cli.command {
        Command::Game(cmd) => game(cmd, &mut ctx),
        Command::Rm(RmCommand::Run(a)) => rm_run(a, &mut ctx),
        Command::Rm(RmCommand::Sweep(a)) => rm_sweep(a, &mut ctx),
        Command::Wf(WfCommand::Run(a)) => wf_run(a, &mut ctx),
        Command::Wf(WfCommand::Sweep(a)) => wf_sweep(a, &mut ctx),
        Command::Intro(IntroCommand::Sim(a)) => intro_sim(a, &mut ctx),
        Command::Intro(IntroCommand::Exact(a)) => intro_exact(a, &mut ctx),
        Command::Intro(IntroCommand::Sweep(a)) => intro_sweep(a, &mut ctx),
        Command::Verify => verify(&mut ctx),
    }
}

fn game(cmd: &GameCommand, ctx: &mut Context<'_>) -> Result<(), CliError> {
    match cmd {
        GameCommand::Matrix(a) => {
            let g = a.params()?;
            let pm = build_payoff_matrix(&g)?;
            let names: Vec<String> = std::iter::once("claim".to_owned())
                .chain(pm.claims().map(|c| c.to_string()))
                .collect();
            let columns: Vec<&str> = names.iter().map(String::as_str).collect();
            let mut table = SweepResult::new(&columns, RunMetadata::new("game matrix", &g));
            for (i, own) in pm.claims().enumerate() {
                let mut row = vec![Value::Int(own)];
                row.extend(pm.row(i).iter().map(|&p| Value::Int(p)));
                table.push(row);
            }
            ctx.emit(table)
        }
        GameCommand::Classify(a) => {
            let g = a.params()?;
            let all = classify_all(&g)?;
            let mut table = SweepResult::new(
                &["n", "s", "kind", "payoff_dominant", "risk_dominant"],
                RunMetadata::new("game classify", &g),
            );
            for (base, gap, class) in &all {
                let coordination = class.kind == SubgameKind::Coordination;
                if ctx.out.is_none() {
                    let mut line = format!("n={} s={gap} {}", base.claim(), class.kind);
                    if coordination {
                        line.push_str(&format!(
                            " payoff_dominant={} risk_dominant={}",
                            class.high_equilibrium_payoff_dominant, class.high_equilibrium_risk_dominant
                        ));
                    }
                    writeln!(ctx.stdout, "{line}")?;
                }
                table.push(vec![
                    Value::Int(base.claim()),
                    Value::Int(*gap),
                    Value::Text(class.kind.to_string()),
                    Value::Bool(coordination && class.high_equilibrium_payoff_dominant),
                    Value::Bool(coordination && class.high_equilibrium_risk_dominant),
                ]);
            }
            match ctx.out {
                Some(_) => ctx.emit(table),
                None => Ok(()),
            }
        }
        GameCommand::Eliminate(a) => {
            let g = a.params()?;
            let survivors = iterated_elimination(&g)?;
            let text: Vec<String> = survivors.iter().map(|c| c.claim().to_string()).collect();
            writeln!(ctx.stdout, "{}", text.join(" "))?;
            if ctx.out.is_some() {
                let mut table = SweepResult::new(&["claim"], RunMetadata::new("game eliminate", &g));
                for c in survivors {
                    table.push(vec![Value::Int(c.claim())]);
                }
                ctx.emit(table)?;
            }
            Ok(())
        }
    }
}

fn rm_run(a: &RmRunArgs, ctx: &mut Context<'_>) -> Result<(), CliError> {
    let g = a.game.params()?;
    let cfg = RmConfig {
        game: g,
        q: a.q,
        dt: a.dt,
        t_max: a.tmax,
        conv_tol: a.conv_tol,
        sample_every: a.sample_every,
    };
    let traj = integrate(&cfg, &SimplexVector::uniform(g.num_actions()))?;
    let names: Vec<String> = std::iter::once("t".to_owned())
        .chain(g.actions().map(|c| format!("claim_{}", c.claim())))
        .collect();
    let columns: Vec<&str> = names.iter().map(String::as_str).collect();
    let meta = RunMetadata::new("rm run", &cfg)
        .with_shift(traj.payoff_shift)
        .with_scalar("f64")
        .with_extra("converged", traj.converged)
        .with_extra("final_time", traj.final_time);
    let mut table = SweepResult::new(&columns, meta);
    for (t, x) in traj.times.iter().zip(&traj.snapshots) {
        let mut row = vec![Value::Real(*t)];
        row.extend(x.as_slice().iter().map(|&v| Value::Real(v)));
        table.push(row);
    }
    ctx.emit(table)?;
    let claim = highest_frequency_claim(&traj.terminal, &g).claim();
    ctx.say(format!("highest-frequency claim: {claim}"))?;
    ctx.say(format!(
        "{} at t = {} (payoff shift {})",
        if traj.converged { "converged" } else { "stopped at t_max" },
        traj.final_time,
        traj.payoff_shift
    ))
}

fn rm_sweep(a: &RmSweepArgs, ctx: &mut Context<'_>) -> Result<(), CliError> {
    let range = a.range.params()?;
    let mut base = RmConfig::new(range, 0.0);
    base.dt = a.dt;
    base.t_max = a.tmax;
    let table = sweep_rm(&a.rewards.0, &a.strengths.0, &base, ctx.threads);
    heatmap(ctx.svg, &table, "R", "q", "highest_claim", &range)?;
    ctx.emit(table.clone())?;
    ctx.fail_on_rows(&table)
}

fn wf_config(game: GameParams, seed: u64, population: usize, generations: usize) -> WfConfig<f64> {
    let mut cfg = WfConfig::new(game, 0.0, 1, 0.0, seed);
    cfg.population_size = population;
    cfg.generations = generations;
    cfg
}

fn wf_run(a: &WfRunArgs, ctx: &mut Context<'_>) -> Result<(), CliError> {
    let g = a.game.params()?;
    let mut cfg = wf_config(g, ctx.seed, a.population, a.generations);
    cfg.mu = a.mu;
    cfg.delta = a.delta;
    cfg.rho = a.rho;
    cfg.init = init_rule(&a.init, &g)?;
    let result = run_wf(&cfg)?;
    let meta = RunMetadata::new("wf run", &cfg).with_seed(cfg.seed).with_scalar("f64");
    let mut table = SweepResult::new(&["generation", "mean_claim"], meta);
    for (t, m) in result.mean_claims.iter().enumerate() {
        table.push(vec![Value::UInt(t as u64), Value::Real(*m)]);
    }
    ctx.emit(table)?;
    ctx.say(format!("terminal mean claim: {}", result.terminal_mean))
}

fn wf_sweep(a: &WfSweepArgs, ctx: &mut Context<'_>) -> Result<(), CliError> {
    let g = a.game.params()?;
    let base = wf_config(g, ctx.seed, a.population, a.generations);
    let table = sweep_wf(&a.mus.0, &a.deltas.0, &a.rhos.0, a.reps, &base, ctx.threads)?;
    if let Some(svg) = ctx.svg {
        let means = replicate_means(&table);
        for &rho in &a.rhos.0 {
            let mut slice = SweepResult::new(
                &means.columns.iter().map(String::as_str).collect::<Vec<_>>(),
                means.metadata.clone().with_extra("rho", rho),
            );
            for row in means.rows.iter().filter(|r| r[0].as_f64() == Some(rho)) {
                slice.push(row.clone());
            }
            let path = per_value_path(svg, "rho", rho, a.rhos.0.len());
            heatmap(Some(&path), &slice, "mu", "delta", "mean_claim", &g)?;
        }
    }
    ctx.emit(table.clone())?;
    ctx.fail_on_rows(&table)
}

/// `fig3.svg` stays as is for one value; `fig3_rho-0.5.svg` otherwise.
fn per_value_path(path: &Path, key: &str, value: f64, count: usize) -> PathBuf {
    if count == 1 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{key}-{value}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{key}-{value}"),
    };
    path.with_file_name(name)
}

fn heatmap(
    path: Option<&Path>,
    table: &SweepResult,
    x: &str,
    y: &str,
    z: &str,
    range: &GameParams,
) -> Result<(), CliError> {
    if let Some(path) = path {
        write_heatmap_svg(table, x, y, z, (range.lower as f64, range.upper as f64), path)?;
    }
    Ok(())
}

fn intro_sim(a: &IntroSimArgs, ctx: &mut Context<'_>) -> Result<(), CliError> {
    let g = a.game.params()?;
    let mut cfg = IntroConfig::new(g, a.beta, a.steps, a.burn_in, ctx.seed);
    cfg.trace_every = a.trace_every.max(1);
    let run = run_intro(&cfg)?;
    let meta = RunMetadata::new("intro sim", &cfg)
        .with_seed(cfg.seed)
        .with_scalar("f64")
        .with_extra("mean_claim", run.mean_claim)
        .with_extra("claim_std", run.claim_std);
    let mut table = SweepResult::new(&["step", "claim_a", "claim_b"], meta);
    for (step, JointState { a, b }) in &run.trace {
        table.push(vec![Value::UInt(*step), Value::Int(*a), Value::Int(*b)]);
    }
    ctx.emit(table)?;
    ctx.say(format!("post-burn-in mean claim: {}", run.mean_claim))?;
    ctx.say(format!("post-burn-in claim std: {}", run.claim_std))
}

fn intro_exact(a: &IntroExactArgs, ctx: &mut Context<'_>) -> Result<(), CliError> {
    let g = a.game.params()?;
    let kernel = build_transition(&g, a.beta)?;
    let dist = stationary_distribution(&kernel).map_err(|e| match e {
        Error::NoConvergence { iterations, residual, .. } => CliError::Runtime(format!(
            "power iteration stopped after {iterations} iterations at residual {residual:e}"
        )),
        other => other.into(),
    })?;
    let avg = average_claim(&dist);
    #[derive(serde::Serialize)]
    struct ExactConfig {
        game: GameParams,
        beta: f64,
    }
    let meta = RunMetadata::new("intro exact", &ExactConfig { game: g, beta: a.beta })
        .with_scalar("f64")
        .with_extra("average_claim", avg)
        .with_extra("residual", dist.residual)
        .with_extra("iterations", dist.iterations);
    let mut table = SweepResult::new(&["claim_a", "claim_b", "probability"], meta);
    for (s, &p) in dist.probs().iter().enumerate() {
        let JointState { a, b } = JointState::from_index(s, &g);
        table.push(vec![Value::Int(a), Value::Int(b), Value::Real(p)]);
    }
    ctx.emit(table)?;
    ctx.say(format!("average claim: {avg}"))?;
    ctx.say(format!("residual: {:e}", dist.residual))
}

fn intro_sweep(a: &IntroSweepArgs, ctx: &mut Context<'_>) -> Result<(), CliError> {
    let range = a.range.params()?;
    let table = sweep_intro(&a.rewards.0, &a.betas.0, &range, ctx.threads);
    heatmap(ctx.svg, &table, "R", "beta", "average_claim", &range)?;
    ctx.emit(table.clone())?;
    ctx.fail_on_rows(&table)
}

fn verify(ctx: &mut Context<'_>) -> Result<(), CliError> {
    let reports = run_battery();
    for r in &reports {
        writeln!(ctx.stdout, "{r}")?;
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    writeln!(ctx.stdout, "{} of {} oracle checks passed", reports.len() - failed, reports.len())?;
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} oracle checks failed")));
    }
    Ok(())
}
