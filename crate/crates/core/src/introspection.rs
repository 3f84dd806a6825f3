//! Two-player introspection dynamics.
//!
//! At every step one player, chosen uniformly, draws an alternative claim
//! uniformly from `[L, U]` and switches to it with the Fermi probability
//! `1 / (1 + exp(-beta * (alt_payoff - payoff)))`, both payoffs taken
//! against the opponent's current claim. The joint claim is a Markov chain
//! on `m^2` states; [`build_transition`] writes its one-step kernel and
//! [`stationary_distribution`] finds the fixed point by power iteration.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GameParams;
use crate::harness::{run_parallel, RunMetadata, SweepResult, Value};
use crate::scalar::{CompensatedSum, Real};

/// Probability of adopting an alternative that changes the payoff by
/// `delta_payoff`.
pub fn fermi<T: Real>(delta_payoff: T, beta: T) -> T {
    if beta.is_infinite() {
        return if delta_payoff > T::zero() {
            T::one()
        } else if delta_payoff < T::zero() {
            T::zero()
        } else {
            T::lit(0.5)
        };
    }
    let x = beta * delta_payoff;
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Ordered pair of claims; `a` is the first player.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointState {
    pub a: i64,
    pub b: i64,
}

impl JointState {
    pub fn new(a: i64, b: i64) -> Self {
        JointState { a, b }
    }

    pub fn swapped(self) -> Self {
        JointState { a: self.b, b: self.a }
    }

    pub fn mean_claim(self) -> f64 {
        (self.a + self.b) as f64 / 2.0
    }

    /// Row-major index `(a - L) * m + (b - L)`.
    pub fn index(self, params: &GameParams) -> usize {
        params.index_of(self.a) * params.num_actions() + params.index_of(self.b)
    }

    pub fn from_index(index: usize, params: &GameParams) -> Self {
        let m = params.num_actions();
        JointState {
            a: params.claim_at(index / m),
            b: params.claim_at(index % m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntroInit {
    /// Both claims uniform on `[L, U]`, independently.
    Uniform,
    Fixed(JointState),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntroConfig<T> {
    pub game: GameParams,
    pub beta: T,
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub init: IntroInit,
    /// Keep every n-th state in the trace; 0 keeps none.
    pub trace_every: u64,
}

impl<T: Real> IntroConfig<T> {
    pub fn new(game: GameParams, beta: T, steps: u64, burn_in: u64, seed: u64) -> Self {
        IntroConfig {
            game,
            beta,
            steps,
            burn_in,
            seed,
            init: IntroInit::Uniform,
            trace_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.game.validate()?;
        if !(self.beta >= T::zero()) {
            return Err(Error::param("beta", format!("must be nonnegative, got {}", self.beta)));
        }
        if self.burn_in >= self.steps {
            return Err(Error::param(
                "burn_in",
                format!("burn-in {} must be below the step count {}", self.burn_in, self.steps),
            ));
        }
        if let IntroInit::Fixed(s) = &self.init {
            self.game.action(s.a)?;
            self.game.action(s.b)?;
        }
        Ok(())
    }
}

/// One introspection update.
pub fn step<T: Real, R: Rng>(state: JointState, cfg: &IntroConfig<T>, rng: &mut R) -> JointState {
    let game = &cfg.game;
    let first_moves = rng.gen::<bool>();
    let alternative = rng.gen_range(game.lower..=game.upper);
    let accept_draw = rng.gen::<f64>();
    let (own, other) = if first_moves { (state.a, state.b) } else { (state.b, state.a) };
    if alternative == own {
        return state;
    }
    let gain = game.payoff_unchecked(alternative, other) - game.payoff_unchecked(own, other);
    if T::lit(accept_draw) < fermi(T::from_int(gain), cfg.beta) {
        if first_moves {
            JointState::new(alternative, state.b)
        } else {
            JointState::new(state.a, alternative)
        }
    } else {
        state
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntroRun {
    /// `(step, state)` pairs, every `trace_every` steps.
    pub trace: Vec<(u64, JointState)>,
    /// Post-burn-in time average of `(a + b) / 2`.
    pub mean_claim: f64,
    /// Post-burn-in standard deviation of the individual claims.
    pub claim_std: f64,
    /// Post-burn-in visit counts per joint state, row-major.
    pub occupancy: Vec<u64>,
    pub samples: u64,
    pub terminal: JointState,
}

impl IntroRun {
    pub fn empirical_distribution(&self) -> Vec<f64> {
        let n = self.samples as f64;
        self.occupancy.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Runs `steps` updates and averages over those after `burn_in`.
pub fn run_intro<T: Real>(cfg: &IntroConfig<T>) -> Result<IntroRun> {
    cfg.validate()?;
    let game = &cfg.game;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = match &cfg.init {
        IntroInit::Uniform => JointState::new(
            rng.gen_range(game.lower..=game.upper),
            rng.gen_range(game.lower..=game.upper),
        ),
        IntroInit::Fixed(s) => *s,
    };
    let mut trace = Vec::new();
    if cfg.trace_every > 0 {
        trace.push((0, state));
    }
    let mut occupancy = vec![0u64; game.num_actions() * game.num_actions()];
    let (mut sum, mut sum_sq) = (0f64, 0f64);
    for t in 1..=cfg.steps {
        state = step(state, cfg, &mut rng);
        if cfg.trace_every > 0 && t % cfg.trace_every == 0 {
            trace.push((t, state));
        }
        if t > cfg.burn_in {
            occupancy[state.index(game)] += 1;
            let (a, b) = (state.a as f64, state.b as f64);
            sum += a + b;
            sum_sq += a * a + b * b;
        }
    }
    let samples = cfg.steps - cfg.burn_in;
    let n_claims = 2.0 * samples as f64;
    let mean = sum / n_claims;
    Ok(IntroRun {
        trace,
        mean_claim: mean,
        claim_std: (sum_sq / n_claims - mean * mean).max(0.0).sqrt(),
        occupancy,
        samples,
        terminal: state,
    })
}

/// Row-stochastic one-step kernel in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel<T> {
    game: GameParams,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<T>,
    /// `moves[(other * m + own) * m + alt]`: probability that a given player
    /// is picked, proposes `alt` and accepts; zero when `alt == own`.
    moves: Vec<T>,
    /// Diagonal of the kernel, row-major.
    stay: Vec<T>,
}

impl<T: Real> TransitionKernel<T> {
    pub fn game(&self) -> &GameParams {
        &self.game
    }

    pub fn num_states(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(destination, probability)` pairs leaving `state`.
    pub fn row(&self, state: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[state]..self.row_ptr[state + 1];
        self.cols[range.clone()]
            .iter()
            .zip(&self.values[range])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, from: usize, to: usize) -> T {
        self.row(from)
            .find(|&(c, _)| c == to)
            .map_or(T::zero(), |(_, v)| v)
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.num_states()).map(|s| self.row(s).map(|(_, v)| v).sum()).collect()
    }

    /// Dense copy, for small chains.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.num_states();
        let mut dense = vec![vec![T::zero(); n]; n];
        for (s, row) in dense.iter_mut().enumerate() {
            for (c, v) in self.row(s) {
                row[c] += v;
            }
        }
        dense
    }

    /// Writes `v K` into `out`. `scratch` must hold `2 m^2` entries.
    pub fn left_multiply(&self, v: &[T], out: &mut [T], scratch: &mut Vec<T>) {
        let m = self.game.num_actions();
        let n = m * m;
        assert_eq!(v.len(), n);
        assert_eq!(out.len(), n);
        scratch.clear();
        scratch.resize(2 * n, T::zero());
        let (vt, moved) = scratch.split_at_mut(n);
        for x in 0..m {
            for y in 0..m {
                vt[y * m + x] = v[x * m + y];
            }
        }
        for (o, (&x, &s)) in out.iter_mut().zip(v.iter().zip(&self.stay)) {
            *o = x * s;
        }
        // Row `(x, y)` of the table serves both players: the second player
        // leaving `(x, y)` and the first player leaving `(y, x)`.
        for x in 0..m {
            let second_out = &mut out[x * m..(x + 1) * m];
            let first_out = &mut moved[x * m..(x + 1) * m];
            for y in 0..m {
                let w_second = v[x * m + y];
                let w_first = vt[x * m + y];
                let table = &self.moves[(x * m + y) * m..(x * m + y + 1) * m];
                for ((s, f), &p) in second_out.iter_mut().zip(first_out.iter_mut()).zip(table) {
                    *s += w_second * p;
                    *f += w_first * p;
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                out[a * m + b] += moved[b * m + a];
            }
        }
    }
}

/// Exact kernel of [`step`]. From `(a, b)` each player moves with
/// probability 1/2 and proposes each claim with probability `1/m`; an
/// accepted proposal is an edge, everything else stays on the diagonal.
pub fn build_transition<T: Real>(params: &GameParams, beta: T) -> Result<TransitionKernel<T>> {
    params.validate()?;
    if !(beta >= T::zero()) || !beta.is_finite() {
        return Err(Error::param("beta", format!("must be finite and nonnegative, got {beta}")));
    }
    let m = params.num_actions();
    let n = m * m;
    let proposal = T::one() / (T::lit(2.0) * T::from_usize(m).unwrap());

    let mut moves = vec![T::zero(); m * m * m];
    for other in 0..m {
        let oc = params.claim_at(other);
        for own in 0..m {
            let base = params.payoff_unchecked(params.claim_at(own), oc);
            for alt in (0..m).filter(|&alt| alt != own) {
                let gain = params.payoff_unchecked(params.claim_at(alt), oc) - base;
                moves[(other * m + own) * m + alt] = proposal * fermi(T::from_int(gain), beta);
            }
        }
    }
    let mut stay = Vec::with_capacity(n);

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(n * (2 * m - 1));
    let mut values = Vec::with_capacity(n * (2 * m - 1));
    row_ptr.push(0);
    let mut row: Vec<(u32, T)> = Vec::with_capacity(2 * m);
    for a in 0..m {
        for b in 0..m {
            row.clear();
            let mut leave = T::zero();
            // First player moves along the column of b.
            for alt in 0..m {
                if alt != a {
                    let p = moves[(b * m + a) * m + alt];
                    row.push(((alt * m + b) as u32, p));
                    leave += p;
                }
            }
            // Second player moves along the row of a.
            for alt in 0..m {
                if alt != b {
                    let p = moves[(a * m + b) * m + alt];
                    row.push(((a * m + alt) as u32, p));
                    leave += p;
                }
            }
            stay.push(T::one() - leave);
            row.push(((a * m + b) as u32, T::one() - leave));
            row.sort_unstable_by_key(|&(c, _)| c);
            for &(c, v) in &row {
                cols.push(c);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
    }
    Ok(TransitionKernel {
        game: *params,
        row_ptr,
        cols,
        values,
        moves,
        stay,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution<T> {
    game: GameParams,
    probs: Vec<T>,
    /// `|| v K - v ||_1` of the returned vector.
    pub residual: T,
    pub iterations: usize,
}

impl<T: Real> StationaryDistribution<T> {
    pub fn new(game: GameParams, probs: Vec<T>, residual: T, iterations: usize) -> Result<Self> {
        game.validate()?;
        let n = game.num_actions() * game.num_actions();
        if probs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: probs.len(),
            });
        }
        Ok(StationaryDistribution {
            game,
            probs,
            residual,
            iterations,
        })
    }

    pub fn game(&self) -> &GameParams {
        &self.game
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, state: JointState) -> T {
        self.probs[state.index(&self.game)]
    }

    /// Claim distributions of the first and second player.
    pub fn marginals(&self) -> (Vec<T>, Vec<T>) {
        let m = self.game.num_actions();
        let mut first = vec![T::zero(); m];
        let mut second = vec![T::zero(); m];
        for a in 0..m {
            for b in 0..m {
                let p = self.probs[a * m + b];
                first[a] += p;
                second[b] += p;
            }
        }
        (first, second)
    }
}

pub const POWER_TOLERANCE: f64 = 1e-12;
pub const POWER_MAX_ITERATIONS: usize = 1_000_000;

/// Power iteration from the uniform vector to an L1 residual below `1e-12`.
pub fn stationary_distribution<T: Real>(
    kernel: &TransitionKernel<T>,
) -> Result<StationaryDistribution<T>> {
    stationary_distribution_with(kernel, T::lit(POWER_TOLERANCE), POWER_MAX_ITERATIONS)
}

pub fn stationary_distribution_with<T: Real>(
    kernel: &TransitionKernel<T>,
    tol: T,
    max_iterations: usize,
) -> Result<StationaryDistribution<T>> {
    let n = kernel.num_states();
    let mut v = vec![T::one() / T::from_usize(n).unwrap(); n];
    let mut next = vec![T::zero(); n];
    let mut scratch = Vec::new();
    let mut residual = T::infinity();
    for iteration in 0..max_iterations {
        kernel.left_multiply(&v, &mut next, &mut scratch);
        residual = next.iter().zip(&v).map(|(&a, &b)| (a - b).abs()).sum();
        if !residual.is_finite() {
            break;
        }
        if residual < tol {
            return StationaryDistribution::new(kernel.game, v, residual, iteration);
        }
        let total: T = next.iter().copied().sum();
        for (dst, &src) in v.iter_mut().zip(&next) {
            *dst = src / total;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
        residual: residual.as_f64(),
        best: v.iter().map(|x| x.as_f64()).collect(),
    })
}

/// Expected `(a + b) / 2` under the distribution, normalized by its total
/// mass and summed with compensation.
pub fn average_claim<T: Real>(dist: &StationaryDistribution<T>) -> T {
    let game = dist.game;
    let m = game.num_actions();
    let mut weighted = CompensatedSum::default();
    let mut mass = CompensatedSum::default();
    for a in 0..m {
        for b in 0..m {
            let p = dist.probs[a * m + b];
            weighted.add_product(p, T::from_int(game.claim_at(a) + game.claim_at(b)));
            mass.add(p);
        }
    }
    weighted.value() / mass.value() / T::lit(2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntroSweepConfig {
    pub lower: i64,
    pub upper: i64,
    pub rewards: Vec<i64>,
    pub betas: Vec<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

pub const INTRO_SWEEP_COLUMNS: [&str; 4] = ["R", "beta", "average_claim", "residual"];

/// Exact average claim for every `(R, beta)`, R-major.
pub fn sweep_intro(
    rewards: &[i64],
    betas: &[f64],
    params: &GameParams,
    threads: usize,
) -> SweepResult {
    let grid: Vec<(i64, f64)> = rewards
        .iter()
        .flat_map(|&r| betas.iter().map(move |&b| (r, b)))
        .collect();
    let outcomes = run_parallel(&grid, threads, |_, &(reward, beta)| {
        let game = GameParams { reward, ..*params };
        let kernel = build_transition(&game, beta).map_err(|e| e.to_string())?;
        let dist = stationary_distribution(&kernel).map_err(|e| match e {
            Error::NoConvergence { residual, .. } => {
                format!("no convergence (residual {residual:e})")
            }
            other => other.to_string(),
        })?;
        Ok(vec![Value::Real(average_claim(&dist)), Value::Real(dist.residual)])
    });
    let keys = grid
        .iter()
        .map(|&(r, b)| vec![Value::Int(r), Value::Real(b)])
        .collect();
    let config = IntroSweepConfig {
        lower: params.lower,
        upper: params.upper,
        rewards: rewards.to_vec(),
        betas: betas.to_vec(),
        tolerance: POWER_TOLERANCE,
        max_iterations: POWER_MAX_ITERATIONS,
    };
    SweepResult::from_outcomes(
        &INTRO_SWEEP_COLUMNS,
        2,
        keys,
        outcomes,
        RunMetadata::new("intro sweep", &config),
    )
}
