//! Brute-force oracles for small instances.
//!
//! Each oracle recomputes its answer with its own arithmetic: payoffs,
//! acceptance probabilities and matrices are written out again here rather
//! than borrowed from the modules under test.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{build_payoff_matrix, iterated_elimination, GameParams};
use crate::introspection::{build_transition, stationary_distribution, StationaryDistribution};
use crate::wright_fisher::{accumulated_payoffs, Population};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub instance: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleReport {
    pub fn new(name: &str, instance: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        let max_deviation = if deviation.is_nan() { f64::INFINITY } else { deviation.abs() };
        OracleReport {
            name: name.to_owned(),
            instance: instance.into(),
            max_deviation,
            tolerance,
            passed: max_deviation <= tolerance,
        }
    }

    fn failed(name: &str, instance: impl Into<String>, tolerance: f64, err: &Error) -> Self {
        let mut report = OracleReport::new(name, instance, f64::INFINITY, tolerance);
        report.instance.push_str(&format!(" ({err})"));
        report
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<20} {:<36} max deviation {:.3e} (tolerance {:.0e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.instance,
            self.max_deviation,
            self.tolerance
        )
    }
}

fn td_payoff(own: i64, other: i64, reward: i64) -> i64 {
    match own.cmp(&other) {
        std::cmp::Ordering::Equal => own,
        std::cmp::Ordering::Less => own + reward,
        std::cmp::Ordering::Greater => other - reward,
    }
}

fn instance(params: &GameParams) -> String {
    format!("[{},{}] R={}", params.lower, params.upper, params.reward)
}

/// Stationary vector from the dense kernel and a direct linear solve.
pub fn dense_stationary_oracle(
    params: &GameParams,
    beta: f64,
) -> Result<StationaryDistribution<f64>> {
    params.validate()?;
    let m = params.num_actions();
    if m * m > 400 {
        return Err(Error::param("U", format!("dense oracle needs m^2 <= 400, got m = {m}")));
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::Singular(format!(
            "beta = {beta}: the chain is not irreducible"
        )));
    }
    let n = m * m;
    let claims: Vec<i64> = (params.lower..=params.upper).collect();
    let branch = 1.0 / (2.0 * m as f64);
    let mut kernel = DMatrix::<f64>::zeros(n, n);
    for (ia, &a) in claims.iter().enumerate() {
        for (ib, &b) in claims.iter().enumerate() {
            let from = ia * m + ib;
            for (ix, &x) in claims.iter().enumerate() {
                // First player proposes x against b.
                let gain = td_payoff(x, b, params.reward) - td_payoff(a, b, params.reward);
                let accept = 1.0 / (1.0 + (-beta * gain as f64).exp());
                kernel[(from, ix * m + ib)] += branch * accept;
                kernel[(from, from)] += branch * (1.0 - accept);
                // Second player proposes x against a.
                let gain = td_payoff(x, a, params.reward) - td_payoff(b, a, params.reward);
                let accept = 1.0 / (1.0 + (-beta * gain as f64).exp());
                kernel[(from, ia * m + ix)] += branch * accept;
                kernel[(from, from)] += branch * (1.0 - accept);
            }
        }
    }
    // v K = v  <=>  (K^T - I) v = 0, with the last equation replaced by sum(v) = 1.
    let mut system = kernel.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        system[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular(format!("{} beta={beta}", instance(params))))?;
    let clipped: Vec<f64> = solution.iter().map(|&p| p.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let probs: Vec<f64> = clipped.iter().map(|p| p / total).collect();
    let v = DVector::from_column_slice(&probs);
    let residual = (kernel.transpose() * &v - &v).abs().sum();
    StationaryDistribution::new(*params, probs, residual, 0)
}

/// Accumulated payoffs by the O(N^2) double loop over ordered pairs.
pub fn pairwise_payoff_oracle(pop: &Population, params: &GameParams) -> Result<Vec<i64>> {
    params.validate()?;
    let claims = pop.claims();
    if claims.len() > 1000 {
        return Err(Error::param("N", format!("pairwise oracle needs N <= 1000, got {}", claims.len())));
    }
    Ok((0..claims.len())
        .map(|i| {
            (0..claims.len())
                .filter(|&j| j != i)
                .map(|j| td_payoff(claims[i], claims[j], params.reward))
                .sum()
        })
        .collect())
}

/// All pure profiles in which each claim is a best response to the other.
pub fn nash_enumeration_oracle(params: &GameParams) -> Result<BTreeSet<(i64, i64)>> {
    params.validate()?;
    if params.num_actions() > 200 {
        return Err(Error::param("U", "Nash enumeration needs m <= 200"));
    }
    let claims: Vec<i64> = (params.lower..=params.upper).collect();
    let best: Vec<i64> = claims
        .iter()
        .map(|&other| {
            claims
                .iter()
                .map(|&own| td_payoff(own, other, params.reward))
                .max()
                .unwrap()
        })
        .collect();
    let mut profiles = BTreeSet::new();
    for (ia, &a) in claims.iter().enumerate() {
        for (ib, &b) in claims.iter().enumerate() {
            if td_payoff(a, b, params.reward) == best[ib] && td_payoff(b, a, params.reward) == best[ia] {
                profiles.insert((a, b));
            }
        }
    }
    Ok(profiles)
}

pub const STATIONARY_TOLERANCE: f64 = 1e-10;

fn stationary_report(params: &GameParams, beta: f64) -> OracleReport {
    let name = "dense-stationary";
    let label = format!("{} beta={beta}", instance(params));
    let compare = || -> Result<f64> {
        let dense = dense_stationary_oracle(params, beta)?;
        let power = stationary_distribution(&build_transition(params, beta)?)?;
        Ok(dense
            .probs()
            .iter()
            .zip(power.probs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    };
    match compare() {
        Ok(dev) => OracleReport::new(name, label, dev, STATIONARY_TOLERANCE),
        Err(e) => OracleReport::failed(name, label, STATIONARY_TOLERANCE, &e),
    }
}

fn payoff_report(params: &GameParams, population_size: usize, seed: u64) -> OracleReport {
    let name = "pairwise-payoff";
    let label = format!("{} N={population_size}", instance(params));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let claims = (0..population_size)
        .map(|_| rng.gen_range(params.lower..=params.upper))
        .collect();
    let compare = || -> Result<f64> {
        let pop = Population::new(claims, params)?;
        let brute = pairwise_payoff_oracle(&pop, params)?;
        let fast = accumulated_payoffs(&pop, params);
        Ok(brute
            .iter()
            .zip(&fast)
            .map(|(a, b)| (a - b).abs() as f64)
            .fold(0.0, f64::max))
    };
    match compare() {
        Ok(dev) => OracleReport::new(name, label, dev, 0.0),
        Err(e) => OracleReport::failed(name, label, 0.0, &e),
    }
}

fn matrix_report(params: &GameParams) -> OracleReport {
    let name = "payoff-matrix";
    let label = instance(params);
    match build_payoff_matrix(params) {
        Ok(pm) => {
            let claims: Vec<i64> = (params.lower..=params.upper).collect();
            let mut dev = 0.0f64;
            for (i, &a) in claims.iter().enumerate() {
                for (j, &b) in claims.iter().enumerate() {
                    dev = dev.max((pm.get(i, j) - td_payoff(a, b, params.reward)).abs() as f64);
                }
            }
            OracleReport::new(name, label, dev, 0.0)
        }
        Err(e) => OracleReport::failed(name, label, 0.0, &e),
    }
}

fn equilibrium_report(params: &GameParams) -> OracleReport {
    let name = "nash-elimination";
    let label = instance(params);
    let compare = || -> Result<f64> {
        let nash = nash_enumeration_oracle(params)?;
        let survivors = iterated_elimination(params)?;
        let floor = params.lower;
        let agree = nash == BTreeSet::from([(floor, floor)])
            && survivors.len() == 1
            && survivors[0].claim() == floor;
        Ok(if agree { 0.0 } else { 1.0 })
    };
    match compare() {
        Ok(dev) => OracleReport::new(name, label, dev, 0.0),
        Err(e) => OracleReport::failed(name, label, 0.0, &e),
    }
}

/// Every oracle on a fixed set of small instances.
pub fn run_battery() -> Vec<OracleReport> {
    let g = |l, u, r| GameParams { lower: l, upper: u, reward: r };
    let mut reports = Vec::new();
    for params in [g(2, 100, 2), g(2, 10, 5), g(0, 12, 40)] {
        reports.push(matrix_report(&params));
    }
    for (params, beta) in [
        (g(2, 3, 2), 0.0),
        (g(2, 3, 2), 1.0),
        (g(2, 3, 2), 10.0),
        (g(2, 5, 2), 1.0),
        (g(2, 12, 3), 0.5),
        (g(2, 20, 2), 1.0),
        (g(5, 20, 4), 0.5),
    ] {
        reports.push(stationary_report(&params, beta));
    }
    for (i, (params, n)) in [(g(2, 100, 2), 100), (g(2, 10, 5), 37), (g(1, 1000, 30), 250)]
        .into_iter()
        .enumerate()
    {
        reports.push(payoff_report(&params, n, 0x5eed + i as u64));
    }
    for params in [g(2, 100, 2), g(2, 3, 2), g(7, 20, 3), g(1, 50, 10), g(2, 30, 40)] {
        reports.push(equilibrium_report(&params));
    }
    reports
}
