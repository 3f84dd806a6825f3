//! Replicator-mutator dynamics on the claim simplex.
//!
//! `dx_i/dt = sum_j x_j f_j q_ji - x_i phi`, with `f = P x`,
//! `phi = x . f` and a uniform mutation kernel (`1 - q` on the diagonal,
//! `q / (m - 1)` elsewhere). Integration is fixed-step RK4 with a clip and
//! renormalize guard after every step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{build_payoff_matrix, Action, GameParams, PayoffMatrix};
use crate::harness::{run_parallel, RunMetadata, SweepResult, Value};
use crate::scalar::Real;

/// Frequencies over claims; index `i` is claim `L + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexVector<T> {
    freqs: Vec<T>,
}

impl<T: Real> SimplexVector<T> {
    pub fn new(freqs: Vec<T>) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::param("freqs", "empty frequency vector"));
        }
        if freqs.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
            return Err(Error::param("freqs", "entries must be finite and nonnegative"));
        }
        let total: T = freqs.iter().copied().sum();
        if (total - T::one()).abs() > T::STOCHASTIC_TOL {
            return Err(Error::param("freqs", format!("entries sum to {total}, not 1")));
        }
        Ok(SimplexVector { freqs })
    }

    pub fn uniform(size: usize) -> Self {
        let w = T::one() / T::from_usize(size).expect("size fits scalar");
        SimplexVector {
            freqs: vec![w; size],
        }
    }

    /// All mass on position `index`.
    pub fn pure(size: usize, index: usize) -> Self {
        let mut freqs = vec![T::zero(); size];
        freqs[index] = T::one();
        SimplexVector { freqs }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.freqs
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.freqs
    }
}

/// Row-major uniform mutation kernel; row `j`, column `i` is the
/// probability that type `j` mutates into type `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationMatrix<T> {
    size: usize,
    q: T,
    entries: Vec<T>,
}

impl<T: Real> MutationMatrix<T> {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn strength(&self) -> T {
        self.q
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> T {
        self.entries[from * self.size + to]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }
}

/// Largest admissible mutation strength, `(m - 1) / m`.
pub fn max_mutation_strength<T: Real>(size: usize) -> T {
    T::from_usize(size - 1).unwrap() / T::from_usize(size).unwrap()
}

pub fn build_mutation_matrix<T: Real>(size: usize, q: T) -> Result<MutationMatrix<T>> {
    if size < 2 {
        return Err(Error::param("m", format!("need at least 2 types, got {size}")));
    }
    let q_max = max_mutation_strength::<T>(size);
    // Parsed decimal grids land a rounding step above (m-1)/m at the boundary.
    let slack = T::epsilon() * T::lit(8.0);
    if !(q >= T::zero()) || q > q_max + slack {
        return Err(Error::param(
            "q",
            format!("mutation strength {q} outside [0, {q_max}] for m = {size}"),
        ));
    }
    let off = q / T::from_usize(size - 1).unwrap();
    let diag = T::one() - q;
    let mut entries = vec![off; size * size];
    for i in 0..size {
        entries[i * size + i] = diag;
    }
    Ok(MutationMatrix { size, q, entries })
}

/// Expected payoff of each claim against the mixture `x`, self-interaction
/// included.
pub fn fitness_vector<T: Real>(x: &SimplexVector<T>, pm: &PayoffMatrix) -> Result<Vec<T>> {
    check_dim(pm.size(), x.len())?;
    let mut f = vec![T::zero(); x.len()];
    payoff_times(&lift(pm, 0), x.as_slice(), &mut f);
    Ok(f)
}

/// Right-hand side for raw payoffs.
pub fn rm_rhs<T: Real>(
    x: &SimplexVector<T>,
    pm: &PayoffMatrix,
    mutation: &MutationMatrix<T>,
) -> Result<Vec<T>> {
    check_dim(pm.size(), x.len())?;
    check_dim(mutation.size(), x.len())?;
    let system = ReplicatorMutator {
        payoffs: lift(pm, 0),
        mutation: mutation.clone(),
        shift: 0,
    };
    let mut out = vec![T::zero(); x.len()];
    let mut scratch = Scratch::new(x.len());
    system.rhs(x.as_slice(), &mut out, &mut scratch);
    Ok(out)
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

fn lift<T: Real>(pm: &PayoffMatrix, shift: i64) -> Vec<T> {
    pm.entries().iter().map(|&p| T::from_int(p + shift)).collect()
}

fn payoff_times<T: Real>(payoffs: &[T], x: &[T], out: &mut [T]) {
    let m = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &payoffs[i * m..(i + 1) * m];
        *o = row.iter().zip(x).map(|(&p, &xj)| p * xj).sum();
    }
}

/// Constant added to every payoff before it is used as fitness. Raw
/// payoffs bottom out at `L - R`, so the shift is `max(0, R - L)`.
pub fn payoff_shift(params: &GameParams) -> i64 {
    (params.reward - params.lower).max(0)
}

struct Scratch<T> {
    fitness: Vec<T>,
    weighted: Vec<T>,
}

impl<T: Real> Scratch<T> {
    fn new(m: usize) -> Self {
        Scratch {
            fitness: vec![T::zero(); m],
            weighted: vec![T::zero(); m],
        }
    }
}

/// The vector field for one game and mutation strength.
#[derive(Debug, Clone)]
pub struct ReplicatorMutator<T> {
    payoffs: Vec<T>,
    mutation: MutationMatrix<T>,
    shift: i64,
}

impl<T: Real> ReplicatorMutator<T> {
    /// Fitness uses payoffs shifted by [`payoff_shift`].
    pub fn new(params: &GameParams, q: T) -> Result<Self> {
        let pm = build_payoff_matrix(params)?;
        let shift = payoff_shift(params);
        Ok(ReplicatorMutator {
            payoffs: lift(&pm, shift),
            mutation: build_mutation_matrix(pm.size(), q)?,
            shift,
        })
    }

    pub fn size(&self) -> usize {
        self.mutation.size()
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    fn rhs(&self, x: &[T], out: &mut [T], scratch: &mut Scratch<T>) {
        let m = x.len();
        payoff_times(&self.payoffs, x, &mut scratch.fitness);
        let phi: T = x.iter().zip(&scratch.fitness).map(|(&a, &b)| a * b).sum();
        for j in 0..m {
            scratch.weighted[j] = x[j] * scratch.fitness[j];
        }
        out.iter_mut().for_each(|o| *o = T::zero());
        for (j, &w) in scratch.weighted.iter().enumerate() {
            let row = &self.mutation.entries[j * m..(j + 1) * m];
            for (o, &q) in out.iter_mut().zip(row) {
                *o += w * q;
            }
        }
        for (o, &xi) in out.iter_mut().zip(x) {
            *o -= xi * phi;
        }
    }

    pub fn eval(&self, x: &SimplexVector<T>) -> Result<Vec<T>> {
        check_dim(self.size(), x.len())?;
        let mut out = vec![T::zero(); x.len()];
        self.rhs(x.as_slice(), &mut out, &mut Scratch::new(x.len()));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmConfig<T> {
    pub game: GameParams,
    pub q: T,
    pub dt: T,
    pub t_max: T,
    pub conv_tol: T,
    /// Record a snapshot every this many steps (0: endpoints only).
    pub sample_every: usize,
}

impl<T: Real> RmConfig<T> {
    /// `dt = 0.01`, `t_max = 10_000`, `conv_tol = 1e-10`.
    pub fn new(game: GameParams, q: T) -> Self {
        RmConfig {
            game,
            q,
            dt: T::lit(0.01),
            t_max: T::lit(10_000.0),
            conv_tol: T::lit(1e-10),
            sample_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.game.validate()?;
        build_mutation_matrix(self.game.num_actions(), self.q)?;
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= T::zero()) || !self.t_max.is_finite() {
            return Err(Error::param("t_max", format!("must be nonnegative, got {}", self.t_max)));
        }
        if !(self.conv_tol > T::zero()) {
            return Err(Error::param("conv_tol", format!("must be positive, got {}", self.conv_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmTrajectory<T> {
    pub times: Vec<T>,
    pub snapshots: Vec<SimplexVector<T>>,
    pub terminal: SimplexVector<T>,
    pub final_time: T,
    pub steps: usize,
    pub converged: bool,
    pub payoff_shift: i64,
    /// Largest `|sum x - 1|` seen after a step, before renormalization.
    pub max_sum_drift: T,
    /// Most negative entry seen after a step, before clipping.
    pub min_raw_entry: T,
}

pub fn integrate<T: Real>(cfg: &RmConfig<T>, x0: &SimplexVector<T>) -> Result<RmTrajectory<T>> {
    cfg.validate()?;
    let system = ReplicatorMutator::new(&cfg.game, cfg.q)?;
    let m = system.size();
    check_dim(m, x0.len())?;

    let max_steps = (cfg.t_max / cfg.dt)
        .ceil()
        .to_usize()
        .ok_or_else(|| Error::param("t_max", "step count overflows"))?;
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);

    let mut x = x0.as_slice().to_vec();
    let mut k1 = vec![T::zero(); m];
    let mut k2 = vec![T::zero(); m];
    let mut k3 = vec![T::zero(); m];
    let mut k4 = vec![T::zero(); m];
    let mut stage = vec![T::zero(); m];
    let mut scratch = Scratch::new(m);

    let mut times = vec![T::zero()];
    let mut snapshots = vec![x0.clone()];
    let mut max_sum_drift = T::zero();
    let mut min_raw_entry = T::zero();
    let mut converged = false;
    let mut step = 0usize;

    loop {
        let t = T::from_usize(step).unwrap() * cfg.dt;
        system.rhs(&x, &mut k1, &mut scratch);
        if k1.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure { time: t.as_f64() });
        }
        let norm = k1.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        if norm < cfg.conv_tol {
            converged = true;
            break;
        }
        if step >= max_steps {
            break;
        }

        let dt = cfg.dt;
        for i in 0..m {
            stage[i] = x[i] + half * dt * k1[i];
        }
        system.rhs(&stage, &mut k2, &mut scratch);
        for i in 0..m {
            stage[i] = x[i] + half * dt * k2[i];
        }
        system.rhs(&stage, &mut k3, &mut scratch);
        for i in 0..m {
            stage[i] = x[i] + dt * k3[i];
        }
        system.rhs(&stage, &mut k4, &mut scratch);
        for i in 0..m {
            x[i] += dt * sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
        step += 1;

        if x.iter().any(|v| !v.is_finite()) {
            let time = T::from_usize(step).unwrap() * cfg.dt;
            return Err(Error::IntegrationFailure { time: time.as_f64() });
        }
        let raw_sum: T = x.iter().copied().sum();
        max_sum_drift = max_sum_drift.max((raw_sum - T::one()).abs());
        for v in x.iter_mut() {
            min_raw_entry = min_raw_entry.min(*v);
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        let total: T = x.iter().copied().sum();
        if !(total > T::zero()) {
            let time = T::from_usize(step).unwrap() * cfg.dt;
            return Err(Error::IntegrationFailure { time: time.as_f64() });
        }
        x.iter_mut().for_each(|v| *v /= total);

        if cfg.sample_every > 0 && step % cfg.sample_every == 0 {
            times.push(T::from_usize(step).unwrap() * cfg.dt);
            snapshots.push(SimplexVector { freqs: x.clone() });
        }
    }

    let final_time = T::from_usize(step).unwrap() * cfg.dt;
    let terminal = SimplexVector { freqs: x };
    if times.last() != Some(&final_time) {
        times.push(final_time);
        snapshots.push(terminal.clone());
    }
    Ok(RmTrajectory {
        times,
        snapshots,
        terminal,
        final_time,
        steps: step,
        converged,
        payoff_shift: system.shift(),
        max_sum_drift,
        min_raw_entry,
    })
}

/// Most frequent claim; ties go to the lowest claim.
pub fn highest_frequency_claim<T: Real>(x: &SimplexVector<T>, params: &GameParams) -> Action {
    let mut best = 0;
    for (i, &v) in x.as_slice().iter().enumerate() {
        if v > x.as_slice()[best] {
            best = i;
        }
    }
    Action(params.claim_at(best))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmSweepConfig {
    pub lower: i64,
    pub upper: i64,
    pub rewards: Vec<i64>,
    pub strengths: Vec<f64>,
    pub dt: f64,
    pub t_max: f64,
    pub conv_tol: f64,
}

pub const RM_SWEEP_COLUMNS: [&str; 4] = ["R", "q", "highest_claim", "converged"];

/// Highest-frequency claim from the uniform start for every `(R, q)`,
/// R-major. Rows that fail to integrate carry the error and the sweep
/// continues.
pub fn sweep_rm(
    rewards: &[i64],
    strengths: &[f64],
    base: &RmConfig<f64>,
    threads: usize,
) -> SweepResult {
    let grid: Vec<(i64, f64)> = rewards
        .iter()
        .flat_map(|&r| strengths.iter().map(move |&q| (r, q)))
        .collect();
    let outcomes = run_parallel(&grid, threads, |_, &(reward, q)| {
        let game = GameParams {
            reward,
            ..base.game
        };
        let cfg = RmConfig {
            game,
            q,
            sample_every: 0,
            ..base.clone()
        };
        let x0 = SimplexVector::uniform(game.num_actions());
        let traj = integrate(&cfg, &x0).map_err(|e| e.to_string())?;
        Ok(vec![
            Value::Int(highest_frequency_claim(&traj.terminal, &game).claim()),
            Value::Bool(traj.converged),
        ])
    });
    let config = RmSweepConfig {
        lower: base.game.lower,
        upper: base.game.upper,
        rewards: rewards.to_vec(),
        strengths: strengths.to_vec(),
        dt: base.dt,
        t_max: base.t_max,
        conv_tol: base.conv_tol,
    };
    let max_shift = rewards
        .iter()
        .map(|&reward| payoff_shift(&GameParams { reward, ..base.game }))
        .max()
        .unwrap_or(0);
    let mut meta = RunMetadata::new("rm sweep", &config).with_shift(max_shift);
    if max_shift > 0 {
        meta = meta.with_extra("payoff_shift_rule", "entries + max(0, R - L) per row");
    }
    let keys = grid
        .iter()
        .map(|&(r, q)| vec![Value::Int(r), Value::Real(q)])
        .collect();
    SweepResult::from_outcomes(&RM_SWEEP_COLUMNS, 2, keys, outcomes, meta)
}
