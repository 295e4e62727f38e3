//! Deterministic local strategies and local bounds of Bell functionals.
//!
//! Strategies are ordered lexicographically by their Alice index
//! `sum_x alice[x] * o^x` (then Bob's, same encoding). Every maximization
//! breaks ties toward the smallest index, so results do not depend on how
//! work is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::Behavior;
use crate::error::{Error, Result};
use crate::functional::BellFunctional;

/// Largest number of Alice strategies `local_bound_exact` will enumerate.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 25;
/// Sweep cap for one see-saw run.
pub const MAX_SWEEPS: usize = 1000;
const IMPROVEMENT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
    pub outputs: usize,
}

impl DeterministicStrategy {
    pub fn new(alice: Vec<usize>, bob: Vec<usize>, outputs: usize) -> Result<Self> {
        if alice.len() != bob.len() || alice.is_empty() {
            return Err(Error::Dimension("both maps need the same, nonzero number of inputs".into()));
        }
        if alice.iter().chain(&bob).any(|&v| v >= outputs) {
            return Err(Error::Dimension(format!("strategy output out of range 0..{outputs}")));
        }
        Ok(Self { alice, bob, outputs })
    }

    /// Both parties always output `outcome`.
    pub fn constant(inputs: usize, outputs: usize, outcome: usize) -> Self {
        Self { alice: vec![outcome; inputs], bob: vec![outcome; inputs], outputs }
    }

    pub fn inputs(&self) -> usize {
        self.alice.len()
    }

    pub fn alice_index(&self) -> u128 {
        map_index(&self.alice, self.outputs)
    }

    pub fn bob_index(&self) -> u128 {
        map_index(&self.bob, self.outputs)
    }

    pub fn point(&self) -> Behavior {
        strategy_point(self)
    }
}

fn map_index(map: &[usize], outputs: usize) -> u128 {
    map.iter().rev().fold(0u128, |acc, &v| acc * outputs as u128 + v as u128)
}

/// Map with index `index`, digit `x` being the output for input `x`.
pub fn map_from_index(mut index: u64, inputs: usize, outputs: usize) -> Vec<usize> {
    (0..inputs)
        .map(|_| {
            let d = (index % outputs as u64) as usize;
            index /= outputs as u64;
            d
        })
        .collect()
}

/// `P_D(a,b|x,y) = [a = alice[x]] [b = bob[y]]`.
pub fn strategy_point(s: &DeterministicStrategy) -> Behavior {
    let m = s.inputs();
    Behavior::from_fn(m, s.outputs, |x, y, a, b| {
        if a == s.alice[x] && b == s.bob[y] {
            1.0
        } else {
            0.0
        }
    })
}

/// Linear objective over deterministic strategies.
pub trait Payoff: Sync {
    fn inputs(&self) -> usize;
    fn outputs(&self) -> usize;
    /// `scores[a] = C^A(a|x) + sum_y C(a, bob[y] | x, y)`.
    fn alice_scores(&self, x: usize, bob: &[usize], scores: &mut [f64]);
    /// `scores[b] = C^B(b|y) + sum_x C(alice[x], b | x, y)`.
    fn bob_scores(&self, y: usize, alice: &[usize], scores: &mut [f64]);
    fn value(&self, alice: &[usize], bob: &[usize]) -> f64;
}

impl Payoff for BellFunctional {
    fn inputs(&self) -> usize {
        BellFunctional::inputs(self)
    }

    fn outputs(&self) -> usize {
        BellFunctional::outputs(self)
    }

    fn alice_scores(&self, x: usize, bob: &[usize], scores: &mut [f64]) {
        for (a, s) in scores.iter_mut().enumerate() {
            *s = self.alice_at(x, a) + bob.iter().enumerate().map(|(y, &b)| self.joint_at(x, y, a, b)).sum::<f64>();
        }
    }

    fn bob_scores(&self, y: usize, alice: &[usize], scores: &mut [f64]) {
        for (b, s) in scores.iter_mut().enumerate() {
            *s = self.bob_at(y, b) + alice.iter().enumerate().map(|(x, &a)| self.joint_at(x, y, a, b)).sum::<f64>();
        }
    }

    fn value(&self, alice: &[usize], bob: &[usize]) -> f64 {
        self.value_on_maps(alice, bob)
    }
}

/// First index of the maximum; `current` is kept unless beaten by more than
/// the improvement tolerance.
fn argmax_keep(scores: &[f64], current: Option<usize>) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    match current {
        Some(c) if scores[best] <= scores[c] + IMPROVEMENT_TOL => c,
        _ => best,
    }
}

/// Bob's per-input best response to `alice`, smallest output on ties.
pub fn bob_best_response<P: Payoff + ?Sized>(c: &P, alice: &[usize]) -> Vec<usize> {
    let mut scores = vec![0.0; c.outputs()];
    (0..c.inputs())
        .map(|y| {
            c.bob_scores(y, alice, &mut scores);
            argmax_keep(&scores, None)
        })
        .collect()
}

/// Alice's per-input best response to `bob`, smallest output on ties.
pub fn alice_best_response<P: Payoff + ?Sized>(c: &P, bob: &[usize]) -> Vec<usize> {
    let mut scores = vec![0.0; c.outputs()];
    (0..c.inputs())
        .map(|x| {
            c.alice_scores(x, bob, &mut scores);
            argmax_keep(&scores, None)
        })
        .collect()
}

/// `max` over Bob's maps of the value with Alice fixed to `alice`; Bob
/// optimizes each input independently.
pub fn best_response_value<P: Payoff + ?Sized>(c: &P, alice: &[usize]) -> (f64, Vec<usize>) {
    let bob = bob_best_response(c, alice);
    (c.value(alice, &bob), bob)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalBound {
    pub value: f64,
    pub witness: DeterministicStrategy,
    pub provenance: Provenance,
}

/// Number of Alice strategies `o^m`, as a float to survive overflow.
pub fn alice_strategy_count(inputs: usize, outputs: usize) -> f64 {
    (outputs as f64).powi(inputs as i32)
}

pub fn local_bound_exact(c: &BellFunctional) -> Result<LocalBound> {
    local_bound_exact_capped(c, DEFAULT_ENUMERATION_CAP)
}

/// Maximum over all Alice maps of the best-response value.
pub fn local_bound_exact_capped(c: &BellFunctional, cap: u64) -> Result<LocalBound> {
    let (m, o) = (c.inputs(), c.outputs());
    let count = alice_strategy_count(m, o);
    if count > cap as f64 {
        return Err(Error::EnumerationCap { strategies: count, cap });
    }
    let (value, index) = if c.is_integer() {
        let (v, i) = Enumerator::<i64>::new(c, |v| v as i64).run();
        (v as f64, i)
    } else {
        Enumerator::<f64>::new(c, |v| v).run()
    };
    let alice = map_from_index(index, m, o);
    let bob = bob_best_response(c, &alice);
    Ok(LocalBound { value, witness: DeterministicStrategy { alice, bob, outputs: o }, provenance: Provenance::Exact })
}

trait Scalar: Copy + PartialOrd + std::ops::Add<Output = Self> + Send + Sync + Default {}
impl Scalar for f64 {}
impl Scalar for i64 {}

struct Enumerator<T> {
    m: usize,
    o: usize,
    /// `[x][a][y * o + b]`
    joint: Vec<T>,
    /// `[x][a]`
    alice: Vec<T>,
    /// `[y * o + b]`
    bob: Vec<T>,
    constant: T,
}

impl<T: Scalar> Enumerator<T> {
    fn new(c: &BellFunctional, conv: impl Fn(f64) -> T) -> Self {
        let (m, o) = (c.inputs(), c.outputs());
        let mut joint = Vec::with_capacity(m * m * o * o);
        for x in 0..m {
            for a in 0..o {
                for y in 0..m {
                    for b in 0..o {
                        joint.push(conv(c.joint_at(x, y, a, b)));
                    }
                }
            }
        }
        let alice = (0..m).flat_map(|x| (0..o).map(move |a| (x, a))).map(|(x, a)| conv(c.alice_at(x, a))).collect();
        let bob = (0..m).flat_map(|y| (0..o).map(move |b| (y, b))).map(|(y, b)| conv(c.bob_at(y, b))).collect();
        Self { m, o, joint, alice, bob, constant: conv(c.constant()) }
    }

    fn row(&self, x: usize, a: usize) -> &[T] {
        let w = self.m * self.o;
        let start = (x * self.o + a) * w;
        &self.joint[start..start + w]
    }

    /// Returns `(best value, smallest Alice index attaining it)`.
    fn run(&self) -> (T, u64) {
        let (m, o) = (self.m, self.o);
        // Fix the top `fixed` digits per chunk.
        let mut fixed = 0;
        while fixed < m - 1 && (o as u64).pow(fixed as u32) < 256 {
            fixed += 1;
        }
        let chunks = (o as u64).pow(fixed as u32);
        (0..chunks)
            .into_par_iter()
            .map(|chunk| self.run_chunk(chunk, fixed))
            .reduce_with(|l, r| if r.0 > l.0 || (r.0 == l.0 && r.1 < l.1) { r } else { l })
            .expect("at least one chunk")
    }

    fn run_chunk(&self, chunk: u64, fixed: usize) -> (T, u64) {
        let (m, o) = (self.m, self.o);
        let w = m * o;
        let free = m - fixed;
        let mut digits = vec![0usize; m];
        let top = map_from_index(chunk, fixed, o);
        digits[free..].copy_from_slice(&top);

        // partial[k] holds Bob's marginal plus the contributions of inputs k..m
        // to every (y, b) score; partial_a[k] the matching Alice-marginal sum.
        let mut partial = vec![T::default(); (m + 1) * w];
        let mut partial_a = vec![T::default(); m + 1];
        partial[m * w..].copy_from_slice(&self.bob);
        partial_a[m] = self.constant;
        let refresh = |partial: &mut [T], partial_a: &mut [T], digits: &[usize], from: usize| {
            for k in (1..=from).rev() {
                let (lower, upper) = partial.split_at_mut((k + 1) * w);
                let src = &upper[..w];
                let dst = &mut lower[k * w..];
                let row = self.row(k, digits[k]);
                for i in 0..w {
                    dst[i] = src[i] + row[i];
                }
                partial_a[k] = partial_a[k + 1] + self.alice[k * o + digits[k]];
            }
        };
        refresh(&mut partial, &mut partial_a, &digits, m - 1);

        let base_index: u64 = chunk * (o as u64).pow(free as u32);
        let mut best: Option<(T, u64)> = None;
        let per_chunk = (o as u64).pow(free as u32);
        for offset in 0..per_chunk {
            if offset > 0 {
                // odometer increment over the free digits; refresh the partial
                // sums of every digit above 0 that changed
                let mut k = 0;
                loop {
                    digits[k] += 1;
                    if digits[k] < o {
                        break;
                    }
                    digits[k] = 0;
                    k += 1;
                }
                if k > 0 {
                    refresh(&mut partial, &mut partial_a, &digits, k);
                }
            }
            let a0 = digits[0];
            let row = self.row(0, a0);
            let above = &partial[w..2 * w];
            let mut value = partial_a[1] + self.alice[a0];
            for y in 0..m {
                let span = y * o..(y + 1) * o;
                let mut top = above[span.start] + row[span.start];
                for i in span.start + 1..span.end {
                    let s = above[i] + row[i];
                    if s > top {
                        top = s;
                    }
                }
                value = value + top;
            }
            match best {
                Some((v, _)) if !(value > v) => {}
                _ => best = Some((value, base_index + offset)),
            }
        }
        best.expect("non-empty chunk")
    }
}

/// Runs the see-saw from `restarts` random starting points and returns the
/// best local value found. Always a lower bound on the true local bound.
pub fn local_bound_heuristic<P: Payoff + ?Sized>(c: &P, restarts: usize, seed: u64) -> LocalBound {
    local_bound_heuristic_with_starts(c, restarts, seed, &[])
}

/// Like [`local_bound_heuristic`], with extra deterministic starting points
/// (their Bob maps seed the alternation) run before the random ones.
pub fn local_bound_heuristic_with_starts<P: Payoff + ?Sized>(
    c: &P,
    restarts: usize,
    seed: u64,
    starts: &[DeterministicStrategy],
) -> LocalBound {
    let (m, o) = (c.inputs(), c.outputs());
    let total = starts.len() + restarts.max(1);
    let (value, _, alice, bob) = (0..total)
        .into_par_iter()
        .map(|run| {
            let (alice, bob) = if run < starts.len() {
                (starts[run].alice.clone(), starts[run].bob.clone())
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((run - starts.len()) as u64);
                let alice: Vec<usize> = (0..m).map(|_| rng.gen_range(0..o)).collect();
                let bob: Vec<usize> = (0..m).map(|_| rng.gen_range(0..o)).collect();
                (alice, bob)
            };
            let (alice, bob) = see_saw(c, alice, bob);
            (c.value(&alice, &bob), run, alice, bob)
        })
        .reduce_with(|l, r| if r.0 > l.0 || (r.0 == l.0 && r.1 < l.1) { r } else { l })
        .expect("at least one run");
    LocalBound { value, witness: DeterministicStrategy { alice, bob, outputs: o }, provenance: Provenance::Heuristic }
}

/// Alternating best response until neither map changes (or the sweep cap).
/// A party only switches an output for a strict improvement.
pub fn see_saw<P: Payoff + ?Sized>(c: &P, mut alice: Vec<usize>, mut bob: Vec<usize>) -> (Vec<usize>, Vec<usize>) {
    let (m, o) = (c.inputs(), c.outputs());
    let mut scores = vec![0.0; o];
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for x in 0..m {
            c.alice_scores(x, &bob, &mut scores);
            let a = argmax_keep(&scores, Some(alice[x]));
            changed |= a != alice[x];
            alice[x] = a;
        }
        for y in 0..m {
            c.bob_scores(y, &alice, &mut scores);
            let b = argmax_keep(&scores, Some(bob[y]));
            changed |= b != bob[y];
            bob[y] = b;
        }
        if !changed {
            break;
        }
    }
    (alice, bob)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum OracleMode {
    Exact,
    Heuristic { restarts: usize, seed: u64 },
}

/// Vertex maximizing `direction . P_D`, with its overlap.
pub fn oracle_max_overlap(direction: &BellFunctional, mode: OracleMode) -> Result<(DeterministicStrategy, f64)> {
    let bound = match mode {
        OracleMode::Exact => local_bound_exact(direction)?,
        OracleMode::Heuristic { restarts, seed } => local_bound_heuristic(direction, restarts, seed),
    };
    Ok((bound.witness, bound.value))
}

/// Every Alice map whose best-response value exceeds `threshold`, most
/// violated first (ties by smallest index), truncated to `limit`.
pub fn exceeding_vertices(c: &BellFunctional, threshold: f64, limit: usize) -> Result<Vec<(f64, DeterministicStrategy)>> {
    let (m, o) = (c.inputs(), c.outputs());
    let count = alice_strategy_count(m, o);
    if count > DEFAULT_ENUMERATION_CAP as f64 {
        return Err(Error::EnumerationCap { strategies: count, cap: DEFAULT_ENUMERATION_CAP });
    }
    let mut found: Vec<(f64, u64, Vec<usize>, Vec<usize>)> = (0..count as u64)
        .into_par_iter()
        .filter_map(|index| {
            let alice = map_from_index(index, m, o);
            let (value, bob) = best_response_value(c, &alice);
            (value > threshold).then_some((value, index, alice, bob))
        })
        .collect();
    found.sort_by(|l, r| r.0.total_cmp(&l.0).then(l.1.cmp(&r.1)));
    found.truncate(limit);
    Ok(found
        .into_iter()
        .map(|(v, _, alice, bob)| (v, DeterministicStrategy { alice, bob, outputs: o }))
        .collect())
}
