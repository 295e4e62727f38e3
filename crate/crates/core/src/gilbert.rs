//! Distance from a deflated point to the local polytope by Gilbert's
//! algorithm, with a memory of past atoms and exact reoptimization over
//! their convex hull.
//!
//! Vectors live in full-table coordinates `(x, y, a, b)`. The inner point is
//! kept as an explicit convex combination of atoms; an atom is a vertex or,
//! after eviction or symmetrization, a convex combination of vertices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::behavior::Behavior;
use crate::codec;
use crate::error::{Error, Result};
use crate::functional::BellFunctional;
use crate::local::{
    local_bound_exact, local_bound_heuristic_with_starts, strategy_point, DeterministicStrategy, OracleMode,
};

/// Frank-Wolfe gap at or below which the inner point is taken as the
/// projection of the target.
pub const GAP_TOL: f64 = 1e-12;
const WARM_STARTS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GilbertConfig {
    pub epsilon: f64,
    pub memory: usize,
    pub max_iterations: usize,
    pub symmetrize: bool,
    pub party_exchange: bool,
    pub oracle: OracleMode,
}

impl GilbertConfig {
    pub fn new(epsilon: f64, memory: usize, max_iterations: usize, oracle: OracleMode) -> Result<Self> {
        let cfg = Self { epsilon, memory, max_iterations, symmetrize: false, party_exchange: false, oracle };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_symmetrization(mut self, copies: bool, parties: bool) -> Self {
        self.symmetrize = copies;
        self.party_exchange = parties;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Invariant(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(1..=200).contains(&self.memory) {
            return Err(Error::Invariant(format!("memory must lie in 1..=200, got {}", self.memory)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GilbertStatus {
    /// Distance fell to epsilon or below.
    WithinEpsilon,
    /// No vertex improves on the inner point: with an exact oracle the inner
    /// point is the projection and a positive distance certifies nonlocality;
    /// with the heuristic oracle the search stalled.
    GapClosed,
    IterationLimit,
}

#[derive(Clone, Debug, Serialize)]
pub struct GilbertWitness {
    /// `C = target - inner point`, full-table coordinates.
    pub c: Vec<f64>,
    pub distance: f64,
    /// `C . target`.
    pub value_on_target: f64,
    /// `C . inner point`; every vertex found by the oracle scores at most this
    /// once the gap has closed.
    pub value_on_inner: f64,
}

impl GilbertWitness {
    pub fn functional(&self, inputs: usize, outputs: usize) -> BellFunctional {
        BellFunctional::from_joint(inputs, outputs, self.c.clone()).expect("full-table witness")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub distance: f64,
    pub gap: f64,
    pub atoms: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GilbertRun {
    pub status: GilbertStatus,
    pub iterations: usize,
    pub witness: GilbertWitness,
    pub log: Vec<IterationRecord>,
}

impl GilbertRun {
    pub fn converged(&self) -> bool {
        self.status != GilbertStatus::IterationLimit
    }
}

/// Inner point and its atoms.
#[derive(Clone, Debug)]
pub struct GilbertState {
    target: Vec<f64>,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// `gram[i][j] = (atom_i - target) . (atom_j - target)`
    gram: Vec<Vec<f64>>,
    pub iteration: usize,
    pub best_distance: f64,
}

impl GilbertState {
    pub fn new(target: Vec<f64>, first: Vec<f64>) -> Self {
        let g = sq_dist(&first, &target);
        Self { target, atoms: vec![first], weights: vec![1.0], gram: vec![vec![g]], iteration: 0, best_distance: g.sqrt() }
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self) -> Vec<f64> {
        combine(&self.atoms, &self.weights)
    }

    pub fn distance(&self) -> f64 {
        quad(&self.gram, &self.weights).max(0.0).sqrt()
    }

    /// Adds an atom with weight zero.
    pub fn add_atom(&mut self, atom: Vec<f64>) {
        let shifted: Vec<f64> = atom.iter().zip(&self.target).map(|(a, t)| a - t).collect();
        let row: Vec<f64> = self
            .atoms
            .iter()
            .map(|b| b.iter().zip(&self.target).zip(&shifted).map(|((b, t), s)| (b - t) * s).sum())
            .collect();
        for (g, &v) in self.gram.iter_mut().zip(&row) {
            g.push(v);
        }
        let mut last = row;
        last.push(shifted.iter().map(|s| s * s).sum());
        self.gram.push(last);
        self.atoms.push(atom);
        self.weights.push(0.0);
    }

    fn remove(&mut self, i: usize) {
        self.atoms.remove(i);
        self.weights.remove(i);
        self.gram.remove(i);
        for g in self.gram.iter_mut() {
            g.remove(i);
        }
    }

    /// Merges atoms `i` and `j` into their weighted average. The inner point
    /// does not move.
    fn fold(&mut self, i: usize, j: usize) {
        let (wi, wj) = (self.weights[i], self.weights[j]);
        let s = wi + wj;
        let (ci, cj) = if s > 0.0 { (wi / s, wj / s) } else { (0.5, 0.5) };
        let merged: Vec<f64> = self.atoms[i].iter().zip(&self.atoms[j]).map(|(a, b)| ci * a + cj * b).collect();
        let k = self.atoms.len();
        let row: Vec<f64> = (0..k).map(|l| ci * self.gram[i][l] + cj * self.gram[j][l]).collect();
        let diag = ci * ci * self.gram[i][i] + 2.0 * ci * cj * self.gram[i][j] + cj * cj * self.gram[j][j];
        self.atoms[i] = merged;
        self.weights[i] = s;
        for l in 0..k {
            self.gram[i][l] = row[l];
            self.gram[l][i] = row[l];
        }
        self.gram[i][i] = diag;
        self.remove(j);
    }

    /// Drops zero-weight atoms, then folds the two lightest atoms together
    /// until at most `memory` remain.
    fn enforce_memory(&mut self, memory: usize) {
        let mut i = 0;
        while i < self.atoms.len() && self.atoms.len() > 1 {
            if self.weights[i] <= 0.0 {
                self.remove(i);
            } else {
                i += 1;
            }
        }
        while self.atoms.len() > memory.max(1) {
            let mut order: Vec<usize> = (0..self.atoms.len()).collect();
            order.sort_by(|&a, &b| self.weights[a].total_cmp(&self.weights[b]).then(a.cmp(&b)));
            let (a, b) = (order[0].min(order[1]), order[0].max(order[1]));
            self.fold(a, b);
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn quad(gram: &[Vec<f64>], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, gi) in gram.iter().enumerate() {
        if w[i] != 0.0 {
            s += w[i] * gi.iter().zip(w).map(|(g, v)| g * v).sum::<f64>();
        }
    }
    s
}

fn combine(atoms: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; atoms[0].len()];
    for (a, &w) in atoms.iter().zip(weights) {
        if w != 0.0 {
            for (pi, ai) in p.iter_mut().zip(a) {
                *pi += w * ai;
            }
        }
    }
    p
}

/// Minimum-norm point of the convex hull of `y_i` (given by their Gram
/// matrix), by Wolfe's active-set method started from `start`.
/// Returns `None` on numerical breakdown.
pub fn min_norm_weights(gram: &[Vec<f64>], start: &[f64]) -> Option<Vec<f64>> {
    let k = gram.len();
    let scale = gram.iter().enumerate().map(|(i, g)| g[i]).fold(0.0f64, f64::max).max(1e-300);
    let tol = 1e-12 * scale;
    let mut w = start.to_vec();
    let mut active: Vec<usize> = (0..k).filter(|&i| w[i] > 0.0).collect();
    if active.is_empty() {
        return None;
    }
    for _ in 0..(50 * k + 100) {
        // x . y_j for every j
        let gw: Vec<f64> = (0..k).map(|j| active.iter().map(|&i| gram[j][i] * w[i]).sum()).collect();
        let norm2: f64 = active.iter().map(|&i| w[i] * gw[i]).sum();
        let (j, best) = (0..k)
            .filter(|j| !active.contains(j))
            .map(|j| (j, gw[j]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((usize::MAX, f64::INFINITY));
        if best >= norm2 - tol {
            return Some(w);
        }
        active.push(j);
        loop {
            let s = active.len();
            let mut kkt = DMatrix::<f64>::zeros(s + 1, s + 1);
            for (p, &i) in active.iter().enumerate() {
                for (q, &l) in active.iter().enumerate() {
                    kkt[(p, q)] = gram[i][l];
                }
                kkt[(p, s)] = 1.0;
                kkt[(s, p)] = 1.0;
            }
            let mut rhs = DVector::<f64>::zeros(s + 1);
            rhs[s] = 1.0;
            let v = kkt.lu().solve(&rhs)?;
            if v.iter().any(|x| !x.is_finite()) {
                return None;
            }
            if (0..s).all(|p| v[p] > 1e-15) {
                for (p, &i) in active.iter().enumerate() {
                    w[i] = v[p];
                }
                break;
            }
            // step toward the affine minimizer until a weight hits zero
            let mut theta = 1.0f64;
            for (p, &i) in active.iter().enumerate() {
                if v[p] <= 1e-15 && w[i] - v[p] > 0.0 {
                    theta = theta.min(w[i] / (w[i] - v[p]));
                }
            }
            for (p, &i) in active.iter().enumerate() {
                w[i] = (1.0 - theta) * w[i] + theta * v[p];
            }
            let before = active.len();
            active.retain(|&i| {
                if w[i] <= 1e-15 {
                    w[i] = 0.0;
                    false
                } else {
                    true
                }
            });
            if active.is_empty() || active.len() == before {
                return None;
            }
        }
    }
    None
}

/// Replaces the weights by the minimum-distance combination of the atoms.
/// Falls back to the exact line search between the current point and the
/// newest atom when the active-set solve breaks down or does worse.
pub fn reoptimize_hull(state: &mut GilbertState) {
    let k = state.atoms.len();
    let before = quad(&state.gram, &state.weights);
    let newest = k - 1;
    let line = line_search(&state.gram, &state.weights, newest);
    let line_value = quad(&state.gram, &line);
    let mut start = state.weights.clone();
    if start.iter().all(|&w| w <= 0.0) {
        start[newest] = 1.0;
    }
    let candidate = min_norm_weights(&state.gram, &start).map(|w| {
        let sum: f64 = w.iter().sum();
        w.into_iter().map(|x| x.max(0.0) / sum).collect::<Vec<f64>>()
    });
    state.weights = match candidate {
        Some(w) if quad(&state.gram, &w) <= line_value.min(before) + 1e-15 * (1.0 + before) => w,
        _ if line_value <= before => line,
        _ => state.weights.clone(),
    };
}

/// Minimizes `|(1-g) x + g y_newest|` over `g` in `[0, 1]`.
fn line_search(gram: &[Vec<f64>], w: &[f64], newest: usize) -> Vec<f64> {
    let xx = quad(gram, w);
    let xy: f64 = (0..w.len()).map(|i| w[i] * gram[i][newest]).sum();
    let yy = gram[newest][newest];
    let denom = xx - 2.0 * xy + yy;
    let g = if denom > 0.0 { ((xx - xy) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut out: Vec<f64> = w.iter().map(|v| v * (1.0 - g)).collect();
    out[newest] += g;
    out
}

/// Permutation tables for the symmetry group acting on `(x, y, a, b)`
/// indices of an `n`-copy table with `m = o = 2^n`.
struct Symmetry {
    side: usize,
    perms: Vec<Vec<usize>>,
    party_exchange: bool,
}

impl Symmetry {
    fn new(n: usize, party_exchange: bool) -> Self {
        let side = 1 << n;
        let perms = codec::permutations(n)
            .iter()
            .map(|p| (0..side).map(|v| codec::permute(v, p)).collect())
            .collect();
        Self { side, perms, party_exchange }
    }

    fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        let s = self.side;
        ((x * s + y) * s + a) * s + b
    }

    fn orbit(&self, i: usize, out: &mut Vec<usize>) {
        let s = self.side;
        let (b, rest) = (i % s, i / s);
        let (a, rest) = (rest % s, rest / s);
        let (y, x) = (rest % s, rest / s);
        out.clear();
        for p in &self.perms {
            let (px, py, pa, pb) = (p[x], p[y], p[a], p[b]);
            out.push(self.index(px, py, pa, pb));
            if self.party_exchange {
                out.push(self.index(py, px, pb, pa));
            }
        }
        out.sort_unstable();
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let size = self.perms.len() * if self.party_exchange { 2 } else { 1 };
        let mut orbit = Vec::with_capacity(size);
        (0..v.len())
            .map(|i| {
                self.orbit(i, &mut orbit);
                // a constant orbit is kept as is, which makes the map
                // idempotent; otherwise summing in sorted index order gives
                // the same value across the orbit, bit for bit
                let first = v[orbit[0]];
                if orbit.iter().all(|&j| v[j] == first) {
                    return first;
                }
                orbit.iter().map(|&j| v[j]).sum::<f64>() / size as f64
            })
            .collect()
    }
}

fn copies_of_len(len: usize) -> Option<usize> {
    (1..=6).find(|&n| 1usize << (4 * n) == len)
}

/// Average over all simultaneous copy permutations of `(x, y, a, b)`.
pub fn symmetrize(v: &[f64], n: usize) -> Result<Vec<f64>> {
    symmetrize_with(v, n, false)
}

/// [`symmetrize`], optionally also averaging with the party exchange
/// `(x, y, a, b) -> (y, x, b, a)`.
pub fn symmetrize_with(v: &[f64], n: usize, party_exchange: bool) -> Result<Vec<f64>> {
    if copies_of_len(v.len()) != Some(n) {
        return Err(Error::Dimension(format!("symmetrization needs m = o = 2^{n}, got a vector of length {}", v.len())));
    }
    Ok(Symmetry::new(n, party_exchange).apply(v))
}

/// Runs Gilbert's algorithm from the all-last-outcome vertex.
pub fn gilbert_distance(target: &Behavior, config: &GilbertConfig) -> Result<GilbertRun> {
    config.validate()?;
    let (m, o) = (target.inputs(), target.outputs());
    let symmetry = if config.symmetrize || config.party_exchange {
        let n = copies_of_len(target.entries().len())
            .filter(|&n| 1 << n == m && 1 << n == o)
            .ok_or_else(|| Error::Dimension("symmetrization needs m = o = 2^n".into()))?;
        let mut s = Symmetry::new(n, config.party_exchange);
        if !config.symmetrize {
            s.perms.truncate(1);
        }
        Some(s)
    } else {
        None
    };
    let sym = |v: Vec<f64>| match &symmetry {
        Some(s) => s.apply(&v),
        None => v,
    };

    let t = sym(target.entries().to_vec());
    let first = strategy_point(&DeterministicStrategy::constant(m, o, o - 1)).into_entries();
    let mut state = GilbertState::new(t.clone(), sym(first));
    let mut log = Vec::new();
    let mut starts: Vec<DeterministicStrategy> = Vec::new();
    let mut status = GilbertStatus::IterationLimit;

    for iteration in 1..=config.max_iterations {
        state.iteration = iteration;
        let point = state.point();
        let c: Vec<f64> = t.iter().zip(&point).map(|(a, b)| a - b).collect();
        let distance = state.distance();
        if distance <= config.epsilon {
            status = GilbertStatus::WithinEpsilon;
            break;
        }
        let direction = BellFunctional::from_joint(m, o, c.clone())?;
        let found = match config.oracle {
            OracleMode::Exact => local_bound_exact(&direction)?,
            OracleMode::Heuristic { restarts, seed } => {
                local_bound_heuristic_with_starts(&direction, restarts, seed.wrapping_add(iteration as u64), &starts)
            }
        };
        let on_inner: f64 = c.iter().zip(&point).map(|(a, b)| a * b).sum();
        let gap = found.value - on_inner;
        log.push(IterationRecord { iteration, distance, gap, atoms: state.atoms.len() });
        if gap <= GAP_TOL {
            status = GilbertStatus::GapClosed;
            break;
        }
        if !starts.contains(&found.witness) {
            starts.insert(0, found.witness.clone());
            starts.truncate(WARM_STARTS);
        }
        state.add_atom(sym(strategy_point(&found.witness).into_entries()));
        reoptimize_hull(&mut state);
        state.enforce_memory(config.memory);
        let now = state.distance();
        if now > distance * (1.0 + 1e-9) + 1e-15 {
            return Err(Error::Invariant(format!("distance increased from {distance} to {now}")));
        }
        state.best_distance = state.best_distance.min(now);
    }

    let point = state.point();
    let mut c: Vec<f64> = t.iter().zip(&point).map(|(a, b)| a - b).collect();
    if symmetry.is_some() {
        c = sym(c);
    }
    let distance = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let value_on_target = c.iter().zip(&t).map(|(a, b)| a * b).sum();
    let value_on_inner = c.iter().zip(&point).map(|(a, b)| a * b).sum();
    Ok(GilbertRun {
        status,
        iterations: state.iteration,
        witness: GilbertWitness { c, distance, value_on_target, value_on_inner },
        log,
    })
}
