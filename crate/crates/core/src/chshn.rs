//! The iterated CHSH game over `n` copies.
//!
//! Inputs and outputs are composite indices whose bit `i` is copy `i`, so
//! the product of per-copy indicators `[a_i ^ b_i = x_i y_i]` is the single
//! test `a ^ b == x & y`. Every `(x, y, a)` admits exactly one winning `b`.

use serde::{Deserialize, Serialize};

use crate::distribution::{chsh_optimal_single_copy, tensor_power};
use crate::efficiency::Policy;
use crate::error::{Error, Result};
use crate::functional::BellFunctional;
use crate::local::{
    local_bound_exact, local_bound_heuristic, DeterministicStrategy, LocalBound, OracleMode, Payoff,
};
use crate::thresholds::{eta_asym, eta_sym, LossyParty, ThresholdReport};

pub const MAX_COPIES: usize = 6;
/// Largest `n` for which a dense coefficient table is materialized.
pub const MAX_DENSE_COPIES: usize = 5;
/// Largest `n` whose quantum value is checked against the tensor power.
pub const MAX_TENSOR_COPIES: usize = 4;
/// Largest `n` whose local bound is enumerated exactly.
pub const MAX_EXACT_COPIES: usize = 3;
/// Best known local values for 4, 5 and 6 copies, found by numerical search.
pub const EMPIRICAL_LOCAL_BOUNDS: [(usize, f64); 3] = [(4, 100.0), (5, 310.0), (6, 1000.0)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IteratedChsh {
    n: usize,
}

impl IteratedChsh {
    pub fn build(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::NoCopies);
        }
        if n > MAX_COPIES {
            return Err(Error::CopyCap { n, cap: MAX_COPIES });
        }
        let game = IteratedChsh { n };
        let d = game.dimension();
        for x in 0..d {
            for y in 0..d {
                for a in 0..d {
                    let winners = (0..d).filter(|&b| game.coefficient(x, y, a, b) == 1.0).count();
                    if winners != 1 {
                        return Err(Error::Invariant(format!(
                            "(x={x}, y={y}, a={a}) has {winners} winning outputs"
                        )));
                    }
                }
            }
        }
        Ok(game)
    }

    pub fn copies(&self) -> usize {
        self.n
    }

    /// `m = o = 2^n`.
    pub fn dimension(&self) -> usize {
        1 << self.n
    }

    pub fn coefficient(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        if a ^ b == x & y {
            1.0
        } else {
            0.0
        }
    }

    /// The unique winning output of Bob for `(x, y, a)`.
    pub fn partner(&self, x: usize, y: usize, a: usize) -> usize {
        a ^ (x & y)
    }

    pub fn to_functional(&self) -> Result<BellFunctional> {
        if self.n > MAX_DENSE_COPIES {
            return Err(Error::CopyCap { n: self.n, cap: MAX_DENSE_COPIES });
        }
        let d = self.dimension();
        Ok(BellFunctional::from_fn(d, d, |x, y, a, b| self.coefficient(x, y, a, b)))
    }
}

impl Payoff for IteratedChsh {
    fn inputs(&self) -> usize {
        self.dimension()
    }

    fn outputs(&self) -> usize {
        self.dimension()
    }

    fn alice_scores(&self, x: usize, bob: &[usize], scores: &mut [f64]) {
        scores.fill(0.0);
        for (y, &b) in bob.iter().enumerate() {
            scores[b ^ (x & y)] += 1.0;
        }
    }

    fn bob_scores(&self, y: usize, alice: &[usize], scores: &mut [f64]) {
        scores.fill(0.0);
        for (x, &a) in alice.iter().enumerate() {
            scores[self.partner(x, y, a)] += 1.0;
        }
    }

    fn value(&self, alice: &[usize], bob: &[usize]) -> f64 {
        let mut wins = 0usize;
        for (x, &a) in alice.iter().enumerate() {
            for (y, &b) in bob.iter().enumerate() {
                wins += usize::from(a ^ b == x & y);
            }
        }
        wins as f64
    }
}

pub fn quantum_value_closed_form(n: usize) -> f64 {
    (2.0 + std::f64::consts::SQRT_2).powi(n as i32)
}

/// Value on `n` copies of the optimal single-copy behavior. Up to
/// [`MAX_TENSOR_COPIES`] the table is built and evaluated, and must agree
/// with `(2 + sqrt 2)^n` to 1e-9; beyond that the closed form is returned.
pub fn quantum_value(n: usize) -> Result<f64> {
    let closed = quantum_value_closed_form(n);
    if n > MAX_TENSOR_COPIES {
        return Ok(closed);
    }
    let game = IteratedChsh::build(n)?;
    let dist = tensor_power(&chsh_optimal_single_copy(), n)?;
    let value = game.to_functional()?.evaluate(dist.table())?;
    if (value - closed).abs() > 1e-9 {
        return Err(Error::Invariant(format!("{n}-copy quantum value {value} differs from {closed}")));
    }
    Ok(value)
}

/// Exact enumeration (`n <= 3`) or see-saw on the implicit payoff.
pub fn local_bound(n: usize, mode: OracleMode) -> Result<LocalBound> {
    let game = IteratedChsh::build(n)?;
    match mode {
        OracleMode::Exact => {
            if n > MAX_EXACT_COPIES {
                return Err(Error::EnumerationCap {
                    strategies: crate::local::alice_strategy_count(game.dimension(), game.dimension()),
                    cap: crate::local::DEFAULT_ENUMERATION_CAP,
                });
            }
            local_bound_exact(&game.to_functional()?)
        }
        OracleMode::Heuristic { restarts, seed } => Ok(local_bound_heuristic(&game, restarts, seed)),
    }
}

/// Places `low` on the low copies and `high` on the copies above them.
pub fn product_strategy(low: &DeterministicStrategy, high: &DeterministicStrategy) -> DeterministicStrategy {
    let shift = low.outputs.trailing_zeros();
    let (dl, dh) = (low.alice.len(), high.alice.len());
    let join = |l: &[usize], h: &[usize]| -> Vec<usize> {
        (0..dl * dh).map(|x| l[x % dl] | (h[x / dl] << shift)).collect()
    };
    DeterministicStrategy {
        alice: join(&low.alice, &high.alice),
        bob: join(&low.bob, &high.bob),
        outputs: low.outputs * high.outputs,
    }
}

/// Upper bound `(1 + sqrt 5)^n` on the local value.
pub fn ambainis_bound(n: usize) -> f64 {
    (1.0 + 5f64.sqrt()).powi(n as i32)
}

/// Threshold bounds from `Q = (2+sqrt 2)^n`, `M_A = M_B = 2^n` and `X = L`.
pub fn threshold_bounds(n: usize, l: f64) -> Result<(f64, f64)> {
    let m = 2f64.powi(n as i32);
    let report = ThresholdReport {
        n,
        policy: Policy::LastOutcome,
        q: quantum_value_closed_form(n),
        l,
        l_provenance: crate::local::Provenance::Exact,
        m_a: m,
        m_b: m,
        x: l,
        eta_sym: None,
        eta_asym: None,
        two_roots: false,
    };
    Ok((eta_sym(&report)?, eta_asym(&report, LossyParty::Alice)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSource {
    Exact,
    Empirical,
    Ambainis,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub l: f64,
    pub source: BoundSource,
    pub eta_sym: f64,
    pub eta_asym: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub n: usize,
    /// Exact local value for small `n`, the Ambainis bound otherwise.
    pub primary: ThresholdPair,
    /// The empirical local value where one is known.
    pub empirical: Option<ThresholdPair>,
}

pub fn table1(ns: &[usize]) -> Result<Vec<Table1Row>> {
    ns.iter()
        .map(|&n| {
            let pair = |l: f64, source| -> Result<ThresholdPair> {
                let (eta_sym, eta_asym) = threshold_bounds(n, l)?;
                Ok(ThresholdPair { l, source, eta_sym, eta_asym })
            };
            let primary = if (1..=MAX_EXACT_COPIES).contains(&n) {
                pair(local_bound(n, OracleMode::Exact)?.value, BoundSource::Exact)?
            } else {
                pair(ambainis_bound(n), BoundSource::Ambainis)?
            };
            let empirical = EMPIRICAL_LOCAL_BOUNDS
                .iter()
                .find(|(k, _)| *k == n)
                .map(|&(_, l)| pair(l, BoundSource::Empirical))
                .transpose()?;
            Ok(Table1Row { n, primary, empirical })
        })
        .collect()
}
