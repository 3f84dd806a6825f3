//! Wright-Fisher process with fitness `exp(rho * Pi)`.
//!
//! Each generation every individual accumulates its payoff against all
//! other members of the population, the next generation is drawn with
//! replacement with probability proportional to fitness, and each offspring
//! mutates with probability `mu` by a step drawn uniformly from
//! `{-delta, ..., -1, 1, ..., delta}`, clamped into `[L, U]`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GameParams;
use crate::harness::{mix_seed, run_parallel, RunMetadata, SweepResult, Value};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Population {
    claims: Vec<i64>,
}

impl Population {
    pub fn new(claims: Vec<i64>, params: &GameParams) -> Result<Self> {
        if claims.is_empty() {
            return Err(Error::param("N", "population must not be empty"));
        }
        if let Some(&bad) = claims.iter().find(|&&c| !params.contains(c)) {
            return Err(Error::ClaimOutOfRange {
                claim: bad,
                lower: params.lower,
                upper: params.upper,
            });
        }
        Ok(Population { claims })
    }

    pub fn monomorphic(claim: i64, size: usize) -> Self {
        Population {
            claims: vec![claim; size],
        }
    }

    pub fn claims(&self) -> &[i64] {
        &self.claims
    }

    pub fn len(&self) -> usize {
        self.claims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.claims.is_empty()
    }

    pub fn mean_claim(&self) -> f64 {
        self.claims.iter().sum::<i64>() as f64 / self.claims.len() as f64
    }

    /// Counts per claim, index `i` is claim `L + i`.
    pub fn histogram(&self, params: &GameParams) -> Vec<usize> {
        let mut h = vec![0; params.num_actions()];
        for &c in &self.claims {
            h[params.index_of(c)] += 1;
        }
        h
    }

    /// The common claim if every individual holds it.
    pub fn fixed_claim(&self) -> Option<i64> {
        let first = *self.claims.first()?;
        self.claims.iter().all(|&c| c == first).then_some(first)
    }
}

/// Payoff of each individual summed over every other individual.
///
/// Works from the claim histogram: `O(m^2 + N)`.
pub fn accumulated_payoffs(pop: &Population, params: &GameParams) -> Vec<i64> {
    let hist = pop.histogram(params);
    let present: Vec<usize> = (0..hist.len()).filter(|&i| hist[i] > 0).collect();
    let mut per_claim = vec![0i64; hist.len()];
    for &i in &present {
        let own = params.claim_at(i);
        let total: i64 = present
            .iter()
            .map(|&j| hist[j] as i64 * params.payoff_unchecked(own, params.claim_at(j)))
            .sum();
        // Drop the self-match, which pays the own claim.
        per_claim[i] = total - own;
    }
    pop.claims
        .iter()
        .map(|&c| per_claim[params.index_of(c)])
        .collect()
}

/// Normalized `exp(rho * Pi)`. The maximum is subtracted before
/// exponentiating, so the largest weight is exactly 1 before normalization.
pub fn fitness_weights<T: Real>(payoffs: &[T], rho: T) -> Vec<T> {
    let top = payoffs
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| a.max(b));
    let mut w: Vec<T> = payoffs.iter().map(|&p| (rho * (p - top)).exp()).collect();
    let total: T = w.iter().copied().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitRule {
    /// Each individual claims uniformly at random in `[L, U]`.
    Uniform,
    Monomorphic(i64),
    Explicit(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfConfig<T> {
    pub game: GameParams,
    pub population_size: usize,
    pub mu: T,
    pub delta: i64,
    pub rho: T,
    pub generations: usize,
    pub seed: u64,
    pub init: InitRule,
}

impl<T: Real> WfConfig<T> {
    /// `N = 100`, `t = 1000`, uniform random start.
    pub fn new(game: GameParams, mu: T, delta: i64, rho: T, seed: u64) -> Self {
        WfConfig {
            game,
            population_size: 100,
            mu,
            delta,
            rho,
            generations: 1000,
            seed,
            init: InitRule::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.game.validate()?;
        if self.population_size == 0 {
            return Err(Error::param("N", "population size must be positive"));
        }
        if !(self.mu >= T::zero() && self.mu <= T::one()) {
            return Err(Error::param("mu", format!("must lie in [0, 1], got {}", self.mu)));
        }
        if self.delta < 1 {
            return Err(Error::param("delta", format!("must be at least 1, got {}", self.delta)));
        }
        if !(self.rho >= T::zero()) || !self.rho.is_finite() {
            return Err(Error::param("rho", format!("must be finite and nonnegative, got {}", self.rho)));
        }
        match &self.init {
            InitRule::Monomorphic(c) => {
                self.game.action(*c)?;
            }
            InitRule::Explicit(claims) => {
                if claims.len() != self.population_size {
                    return Err(Error::DimensionMismatch {
                        expected: self.population_size,
                        got: claims.len(),
                    });
                }
                Population::new(claims.clone(), &self.game)?;
            }
            InitRule::Uniform => {}
        }
        Ok(())
    }

    fn initial_population<R: Rng>(&self, rng: &mut R) -> Population {
        match &self.init {
            InitRule::Uniform => Population {
                claims: (0..self.population_size)
                    .map(|_| rng.gen_range(self.game.lower..=self.game.upper))
                    .collect(),
            },
            InitRule::Monomorphic(c) => Population::monomorphic(*c, self.population_size),
            InitRule::Explicit(claims) => Population {
                claims: claims.clone(),
            },
        }
    }
}

/// Draws `N` parents with replacement according to `weights`, then mutates
/// each offspring independently.
pub fn next_generation<T: Real, R: Rng>(
    pop: &Population,
    weights: &[T],
    cfg: &WfConfig<T>,
    rng: &mut R,
) -> Population {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = T::zero();
    for &w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let total = acc;
    let last = pop.len() - 1;
    let claims = (0..pop.len())
        .map(|_| {
            let u = T::lit(rng.gen::<f64>()) * total;
            let parent = cumulative.partition_point(|&c| c <= u).min(last);
            let mut claim = pop.claims[parent];
            if T::lit(rng.gen::<f64>()) < cfg.mu {
                claim = mutate(claim, cfg.delta, &cfg.game, rng);
            }
            claim
        })
        .collect();
    Population { claims }
}

/// One mutation step, uniform over `{-delta..-1, 1..delta}`, clamped.
pub fn mutate<R: Rng>(claim: i64, delta: i64, params: &GameParams, rng: &mut R) -> i64 {
    let k = rng.gen_range(0..2 * delta);
    let step = if k < delta { -(k + 1) } else { k - delta + 1 };
    (claim + step).clamp(params.lower, params.upper)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WfResult {
    /// Mean claim at generations `0..=t`.
    pub mean_claims: Vec<f64>,
    pub terminal_mean: f64,
    pub histogram: Vec<usize>,
    pub terminal: Population,
}

pub fn run_wf<T: Real>(cfg: &WfConfig<T>) -> Result<WfResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop = cfg.initial_population(&mut rng);
    let mut mean_claims = Vec::with_capacity(cfg.generations + 1);
    mean_claims.push(pop.mean_claim());
    for _ in 0..cfg.generations {
        pop = advance(&pop, cfg, &mut rng);
        mean_claims.push(pop.mean_claim());
    }
    Ok(WfResult {
        terminal_mean: pop.mean_claim(),
        histogram: pop.histogram(&cfg.game),
        mean_claims,
        terminal: pop,
    })
}

fn advance<T: Real, R: Rng>(pop: &Population, cfg: &WfConfig<T>, rng: &mut R) -> Population {
    let payoffs: Vec<T> = accumulated_payoffs(pop, &cfg.game)
        .into_iter()
        .map(T::from_int)
        .collect();
    let weights = fitness_weights(&payoffs, cfg.rho);
    next_generation(pop, &weights, cfg, rng)
}

/// Runs until the population is monomorphic or `max_generations` pass.
/// Returns the fixed claim and the generation it fixed at.
pub fn run_until_fixation<T: Real>(
    cfg: &WfConfig<T>,
    max_generations: usize,
) -> Result<Option<(i64, usize)>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop = cfg.initial_population(&mut rng);
    for generation in 0..=max_generations {
        if let Some(c) = pop.fixed_claim() {
            return Ok(Some((c, generation)));
        }
        if generation < max_generations {
            pop = advance(&pop, cfg, &mut rng);
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfSweepConfig {
    pub game: GameParams,
    pub population_size: usize,
    pub generations: usize,
    pub mutation_probabilities: Vec<f64>,
    pub mutation_sizes: Vec<i64>,
    pub selection_intensities: Vec<f64>,
    pub replicates: usize,
    pub base_seed: u64,
}

pub const WF_SWEEP_COLUMNS: [&str; 6] = ["rho", "mu", "delta", "replicate", "seed", "mean_claim"];

/// One row per `(rho, mu, delta, replicate)`, rho-major. The seed of
/// replicate `r` at grid point `g` is `mix_seed(base.seed, g, r)`.
pub fn sweep_wf(
    mutation_probabilities: &[f64],
    mutation_sizes: &[i64],
    selection_intensities: &[f64],
    replicates: usize,
    base: &WfConfig<f64>,
    threads: usize,
) -> Result<SweepResult> {
    if replicates == 0 {
        return Err(Error::param("replicates", "need at least one replicate"));
    }
    let mut grid = Vec::new();
    let mut point = 0u64;
    for &rho in selection_intensities {
        for &mu in mutation_probabilities {
            for &delta in mutation_sizes {
                for rep in 0..replicates {
                    grid.push((rho, mu, delta, rep, mix_seed(base.seed, point, rep as u64)));
                }
                point += 1;
            }
        }
    }
    let outcomes = run_parallel(&grid, threads, |_, &(rho, mu, delta, _, seed)| {
        let cfg = WfConfig {
            mu,
            delta,
            rho,
            seed,
            ..base.clone()
        };
        let result = run_wf(&cfg).map_err(|e| e.to_string())?;
        Ok(vec![Value::Real(result.terminal_mean)])
    });
    let keys = grid
        .iter()
        .map(|&(rho, mu, delta, rep, seed)| {
            vec![
                Value::Real(rho),
                Value::Real(mu),
                Value::Int(delta),
                Value::Int(rep as i64),
                Value::UInt(seed),
            ]
        })
        .collect();
    let config = WfSweepConfig {
        game: base.game,
        population_size: base.population_size,
        generations: base.generations,
        mutation_probabilities: mutation_probabilities.to_vec(),
        mutation_sizes: mutation_sizes.to_vec(),
        selection_intensities: selection_intensities.to_vec(),
        replicates,
        base_seed: base.seed,
    };
    let meta = RunMetadata::new("wf sweep", &config).with_seed(base.seed);
    Ok(SweepResult::from_outcomes(&WF_SWEEP_COLUMNS, 5, keys, outcomes, meta))
}

/// Collapses replicates: one row per `(rho, mu, delta)` with the replicate
/// mean, its standard error and the replicate count.
pub fn replicate_means(sweep: &SweepResult) -> SweepResult {
    let idx = |name: &str| sweep.column_index(name).expect("wf sweep column");
    let (ri, mi, di, ci) = (idx("rho"), idx("mu"), idx("delta"), idx("mean_claim"));
    let mut groups: Vec<((f64, f64, i64), Vec<f64>)> = Vec::new();
    for row in &sweep.rows {
        let key = (
            row[ri].as_f64().unwrap_or(f64::NAN),
            row[mi].as_f64().unwrap_or(f64::NAN),
            row[di].as_f64().unwrap_or(f64::NAN) as i64,
        );
        let value = row[ci].as_f64();
        match groups.last_mut() {
            Some((k, values)) if *k == key => values.extend(value),
            _ => groups.push((key, value.into_iter().collect())),
        }
    }
    let mut out = SweepResult::new(
        &["rho", "mu", "delta", "mean_claim", "std_err", "replicates"],
        sweep.metadata.clone(),
    );
    for ((rho, mu, delta), values) in groups {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        out.push(vec![
            Value::Real(rho),
            Value::Real(mu),
            Value::Int(delta),
            Value::Real(mean),
            Value::Real((var / n).sqrt()),
            Value::Int(values.len() as i64),
        ]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn classic_cfg(mu: f64, delta: i64, rho: f64, seed: u64) -> WfConfig<f64> {
        WfConfig::new(GameParams::classic(), mu, delta, rho, seed)
    }

    #[test]
    fn monomorphic_payoffs() {
        let g = GameParams::classic();
        let pop = Population::monomorphic(40, 7);
        assert_eq!(accumulated_payoffs(&pop, &g), vec![6 * 40; 7]);
    }

    #[test]
    fn small_population_payoffs() {
        let g = GameParams::new(2, 3, 2).unwrap();
        let pop = Population::new(vec![2, 3, 3], &g).unwrap();
        assert_eq!(accumulated_payoffs(&pop, &g), vec![8, 3, 3]);
    }

    #[test]
    fn weights_examples() {
        let w = fitness_weights(&[3.0, 10.0, -4.0, 0.0], 0.0f64);
        assert!(w.iter().all(|&v| (v - 0.25).abs() < 1e-15));

        for rho in [0.01, 1.0, 7.5] {
            let w = fitness_weights(&[0.0, 2f64.ln() / rho], rho);
            assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-15);
            assert_abs_diff_eq!(w[1], 2.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn weights_survive_huge_payoffs() {
        let w = fitness_weights(&[1e6, 1e6 - 1.0, 0.0], 1.0f64);
        assert!(w.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mutation_clamps_to_bounds() {
        let g = GameParams::classic();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let c = mutate(2, 5, &g, &mut rng);
            assert!((2..=7).contains(&c));
            let c = mutate(99, 5, &g, &mut rng);
            assert!((94..=100).contains(&c));
        }
        // Steps below L land exactly on L.
        let mut seen_floor = 0;
        for _ in 0..1000 {
            if mutate(3, 5, &g, &mut rng) == 2 {
                seen_floor += 1;
            }
        }
        // P(step <= -1) = 1/2.
        assert!((400..600).contains(&seen_floor));
    }

    #[test]
    fn mutation_steps_are_uniform_over_nonzero_range() {
        let g = GameParams::classic();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 7];
        for _ in 0..70_000 {
            let c = mutate(50, 3, &g, &mut rng);
            counts[(c - 47) as usize] += 1;
        }
        assert_eq!(counts[3], 0);
        for (i, &n) in counts.iter().enumerate() {
            if i != 3 {
                assert!((10_500..12_800).contains(&n), "step {} count {n}", i as i64 - 3);
            }
        }
    }

    #[test]
    fn no_mutation_copies_parents() {
        let g = GameParams::classic();
        let cfg = classic_cfg(0.0, 3, 1.0, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let parent = Population::new(vec![10, 20, 30, 40, 50], &g).unwrap();
        let w = vec![0.2; 5];
        let child = next_generation(&parent, &w, &cfg, &mut rng);
        assert_eq!(child.len(), 5);
        assert!(child.claims().iter().all(|c| parent.claims().contains(c)));
    }

    #[test]
    fn strong_selection_copies_the_best() {
        let g = GameParams::classic();
        let cfg = classic_cfg(0.0, 1, 50.0, 9);
        let pop = Population::new(vec![2, 50, 50, 50], &g).unwrap();
        // Claim 2 earns 3 * 4 = 12; each 50 earns 0 + 2 * 50 = 100.
        let payoffs: Vec<f64> = accumulated_payoffs(&pop, &g).into_iter().map(|p| p as f64).collect();
        let w = fitness_weights(&payoffs, cfg.rho);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let child = next_generation(&pop, &w, &cfg, &mut rng);
        assert_eq!(child.fixed_claim(), Some(50));
    }

    #[test]
    fn monomorphic_start_without_mutation_stays_put() {
        let mut cfg = classic_cfg(0.0, 5, 1.0, 1);
        cfg.init = InitRule::Monomorphic(37);
        cfg.generations = 50;
        let r = run_wf(&cfg).unwrap();
        assert_eq!(r.terminal.fixed_claim(), Some(37));
        assert_eq!(r.histogram[35], 100);
    }

    #[test]
    fn same_seed_same_result() {
        let mut cfg = classic_cfg(0.3, 4, 0.1, 77);
        cfg.generations = 60;
        assert_eq!(run_wf(&cfg).unwrap(), run_wf(&cfg).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut cfg = classic_cfg(1.5, 1, 1.0, 0);
        assert!(cfg.validate().is_err());
        cfg.mu = 0.5;
        cfg.delta = 0;
        assert!(cfg.validate().is_err());
        cfg.delta = 1;
        cfg.init = InitRule::Explicit(vec![2; 3]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_seeds_do_not_depend_on_later_points() {
        let mut base = classic_cfg(0.1, 1, 1.0, 123);
        base.generations = 5;
        base.population_size = 10;
        let small = sweep_wf(&[0.1], &[1], &[1.0], 2, &base, 1).unwrap();
        let large = sweep_wf(&[0.1, 0.5], &[1], &[1.0], 2, &base, 1).unwrap();
        assert_eq!(small.rows[..], large.rows[..2]);
        assert!(sweep_wf(&[0.1], &[1], &[1.0], 0, &base, 1).is_err());
    }
}
