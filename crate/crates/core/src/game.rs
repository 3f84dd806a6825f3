//! Traveler's Dilemma payoff structure.
//!
//! Two players each claim an integer in `[L, U]`. Equal claims are paid at
//! face value; otherwise the lower claimant receives its claim plus the
//! reward `R` and the higher claimant receives the lower claim minus `R`.
//!
//! Everything in this module is exact integer arithmetic.

use std::fmt;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameParams {
    pub lower: i64,
    pub upper: i64,
    pub reward: i64,
}

impl GameParams {
    pub fn new(lower: i64, upper: i64, reward: i64) -> Result<Self> {
        let params = GameParams {
            lower,
            upper,
            reward,
        };
        params.validate()?;
        Ok(params)
    }

    /// The `[2, 100]` game with `R = 2` used throughout the figures.
    pub fn classic() -> Self {
        GameParams {
            lower: 2,
            upper: 100,
            reward: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower < 0 {
            return Err(Error::InvalidGame(format!(
                "lower bound L = {} must be nonnegative",
                self.lower
            )));
        }
        if self.lower >= self.upper {
            return Err(Error::InvalidGame(format!(
                "L = {} must be strictly below U = {}",
                self.lower, self.upper
            )));
        }
        if self.reward <= 1 {
            return Err(Error::InvalidGame(format!(
                "reward R = {} must exceed 1",
                self.reward
            )));
        }
        Ok(())
    }

    /// Number of claims, `U - L + 1`.
    pub fn num_actions(&self) -> usize {
        (self.upper - self.lower + 1) as usize
    }

    pub fn contains(&self, claim: i64) -> bool {
        (self.lower..=self.upper).contains(&claim)
    }

    pub fn action(&self, claim: i64) -> Result<Action> {
        if self.contains(claim) {
            Ok(Action(claim))
        } else {
            Err(Error::ClaimOutOfRange {
                claim,
                lower: self.lower,
                upper: self.upper,
            })
        }
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> {
        (self.lower..=self.upper).map(Action)
    }

    /// Claim at position `index` of the action space.
    pub fn claim_at(&self, index: usize) -> i64 {
        self.lower + index as i64
    }

    pub fn index_of(&self, claim: i64) -> usize {
        (claim - self.lower) as usize
    }

    /// Payoff without range checks. Callers guarantee both claims are
    /// inside the action space.
    #[inline]
    pub fn payoff_unchecked(&self, own: i64, other: i64) -> i64 {
        use std::cmp::Ordering::*;
        match own.cmp(&other) {
            Equal => own,
            Less => own + self.reward,
            Greater => other - self.reward,
        }
    }
}

/// A single claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action(pub i64);

impl Action {
    pub fn claim(self) -> i64 {
        self.0
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Payoff of the player claiming `own` against an opponent claiming `other`.
pub fn payoff(own: Action, other: Action, params: &GameParams) -> Result<i64> {
    params.action(own.0)?;
    params.action(other.0)?;
    Ok(params.payoff_unchecked(own.0, other.0))
}

/// Row-major `m x m` payoff table; row is the own claim, column the opponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayoffMatrix {
    lower: i64,
    size: usize,
    entries: Vec<i64>,
}

impl PayoffMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn lower(&self) -> i64 {
        self.lower
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.entries[row * self.size + col]
    }

    pub fn row(&self, row: usize) -> &[i64] {
        &self.entries[row * self.size..(row + 1) * self.size]
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn min_entry(&self) -> i64 {
        self.entries.iter().copied().min().unwrap_or(0)
    }

    /// Claims labelling both axes.
    pub fn claims(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.size).map(move |i| self.lower + i as i64)
    }
}

pub fn build_payoff_matrix(params: &GameParams) -> Result<PayoffMatrix> {
    params.validate()?;
    let size = params.num_actions();
    let mut entries = Vec::with_capacity(size * size);
    for own in params.actions() {
        for other in params.actions() {
            entries.push(params.payoff_unchecked(own.0, other.0));
        }
    }
    Ok(PayoffMatrix {
        lower: params.lower,
        size,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubgameKind {
    PrisonersDilemma,
    Coordination,
    Other,
}

impl fmt::Display for SubgameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SubgameKind::PrisonersDilemma => "prisoners-dilemma",
            SubgameKind::Coordination => "coordination",
            SubgameKind::Other => "other",
        };
        f.write_str(name)
    }
}

/// Structure of the 2x2 game obtained by restricting both players to the
/// claims `{n, n + s}`.
///
/// The dominance flags describe the high equilibrium `(n+s, n+s)` and are
/// only set for [`SubgameKind::Coordination`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgameClass {
    pub kind: SubgameKind,
    pub high_equilibrium_payoff_dominant: bool,
    pub high_equilibrium_risk_dominant: bool,
}

pub fn classify_subgame(base: Action, gap: i64, params: &GameParams) -> Result<SubgameClass> {
    params.validate()?;
    if gap < 1 {
        return Err(Error::param("gap", format!("must be positive, got {gap}")));
    }
    let low = params.action(base.0)?.0;
    let high = params.action(low + gap)?.0;

    // a = (low, low), b = low vs high, c = high vs low, d = (high, high)
    let a = params.payoff_unchecked(low, low);
    let b = params.payoff_unchecked(low, high);
    let c = params.payoff_unchecked(high, low);
    let d = params.payoff_unchecked(high, high);

    let low_strictly_dominates = a > c && b > d;
    if low_strictly_dominates && d > a {
        return Ok(SubgameClass {
            kind: SubgameKind::PrisonersDilemma,
            high_equilibrium_payoff_dominant: false,
            high_equilibrium_risk_dominant: false,
        });
    }
    // Weak inequalities: at s = R the high profile is a non-strict equilibrium.
    if a >= c && d >= b {
        return Ok(SubgameClass {
            kind: SubgameKind::Coordination,
            high_equilibrium_payoff_dominant: d > a,
            high_equilibrium_risk_dominant: (d - b) > (a - c),
        });
    }
    Ok(SubgameClass {
        kind: SubgameKind::Other,
        high_equilibrium_payoff_dominant: false,
        high_equilibrium_risk_dominant: false,
    })
}

/// Every admissible `(n, s)` pair with its classification, ordered by `n`
/// then `s`.
pub fn classify_all(params: &GameParams) -> Result<Vec<(Action, i64, SubgameClass)>> {
    params.validate()?;
    let mut out = Vec::new();
    for n in params.lower..params.upper {
        for s in 1..=(params.upper - n) {
            out.push((Action(n), s, classify_subgame(Action(n), s, params)?));
        }
    }
    Ok(out)
}

/// Iterated elimination of strictly dominated actions.
///
/// Dominance is by mixed strategies over the surviving set: in this game no
/// claim is strictly dominated by another single claim once `m >= 3`, since
/// both earn `x - R` against any opponent `x` below them. Each round removes
/// every dominated survivor at once.
pub fn iterated_elimination(params: &GameParams) -> Result<Vec<Action>> {
    let matrix = build_payoff_matrix(params)?;
    let mut alive: Vec<usize> = (0..matrix.size()).collect();
    loop {
        let dominated: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|&i| is_strictly_dominated(&matrix, i, &alive))
            .collect();
        if dominated.is_empty() {
            break;
        }
        alive.retain(|i| !dominated.contains(i));
    }
    Ok(alive
        .into_iter()
        .map(|i| Action(params.lower + i as i64))
        .collect())
}

fn is_strictly_dominated(matrix: &PayoffMatrix, candidate: usize, alive: &[usize]) -> bool {
    if alive.len() < 2 {
        return false;
    }
    // A best response to some surviving opponent claim can never be
    // strictly dominated.
    let best_response_somewhere = alive.iter().any(|&col| {
        let own = matrix.get(candidate, col);
        alive.iter().all(|&row| matrix.get(row, col) <= own)
    });
    if best_response_somewhere {
        return false;
    }
    match dominating_mixture(matrix, candidate, alive) {
        Some(weights) => verify_dominance(matrix, candidate, alive, &weights),
        None => false,
    }
}

/// Finds unnormalised weights `w >= 0` over the other survivors with
/// `sum_k w_k (M[k][j] - M[i][j]) >= 1` for every surviving column `j`,
/// minimising `sum w`. Fixing the margin at 1 instead of maximising it keeps
/// the problem well scaled when the best margin is tiny.
fn dominating_mixture(
    matrix: &PayoffMatrix,
    candidate: usize,
    alive: &[usize],
) -> Option<Vec<(usize, f64)>> {
    let others: Vec<usize> = alive.iter().copied().filter(|&k| k != candidate).collect();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let weights: Vec<_> = others
        .iter()
        .map(|_| lp.add_var(1.0, (0.0, f64::INFINITY)))
        .collect();
    for &col in alive {
        let target = matrix.get(candidate, col);
        let terms: Vec<_> = others
            .iter()
            .zip(&weights)
            .map(|(&k, &w)| (w, (matrix.get(k, col) - target) as f64))
            .collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, 1.0);
    }
    let solution = lp.solve().ok()?.into_solution().ok()?;
    Some(
        others
            .iter()
            .zip(&weights)
            .map(|(&k, &w)| (k, solution.var_value(w)))
            .collect(),
    )
}

/// Exact check that the mixture strictly beats `candidate` against every
/// surviving column.
fn verify_dominance(
    matrix: &PayoffMatrix,
    candidate: usize,
    alive: &[usize],
    weights: &[(usize, f64)],
) -> bool {
    let exact: Vec<(usize, BigRational)> = weights
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .filter_map(|&(k, w)| BigRational::from_float(w).map(|r| (k, r)))
        .collect();
    let total: BigRational = exact.iter().map(|(_, w)| w.clone()).sum();
    if !total.is_positive() {
        return false;
    }
    alive.iter().all(|&col| {
        let mixed: BigRational = exact
            .iter()
            .map(|(k, w)| w * BigRational::from_integer(BigInt::from(matrix.get(*k, col))))
            .sum();
        let target = BigRational::from_integer(BigInt::from(matrix.get(candidate, col))) * &total;
        (mixed - target).is_positive()
    })
}
