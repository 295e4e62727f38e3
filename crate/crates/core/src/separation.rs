//! Membership of a behavior in the local polytope by linear programming.
//!
//! The separating functional `C` maximizes `C . t` subject to `C . P_D <= 0`
//! on every deterministic point and `-B <= C <= 1` entrywise. We solve the
//! dual, `min sum_i (u_i + B v_i)` over `sum_l w_l P_l + u - v = t` with
//! `w, u, v >= 0`: its simplex multipliers are `C`, and vertex columns are
//! priced in by exact best-response enumeration.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::behavior::Behavior;
use crate::distribution::MultiCopyDistribution;
use crate::efficiency::{collins_gisin_of, deflate, side, EfficiencyModel, Policy};
use crate::error::{Error, Result};
use crate::functional::BellFunctional;
use crate::local::{
    alice_strategy_count, exceeding_vertices, local_bound_exact, local_bound_heuristic, map_from_index,
    DeterministicStrategy, DEFAULT_ENUMERATION_CAP,
};
use crate::simplex::{RevisedSimplex, SparseColumn, Status};

pub const DEFAULT_LOWER_BOUND: f64 = 64.0;
/// A vertex is a violated constraint when `C . P_D` exceeds this.
pub const VIOLATION_TOL: f64 = 1e-9;
/// `Q*` above this counts as separated.
pub const SEPARATION_TOL: f64 = 1e-6;
/// `Q*` at or below this counts as inside.
pub const INSIDE_TOL: f64 = 1e-9;
const VERTICES_PER_ROUND: usize = 32;
const MAX_ROUNDS: usize = 10_000;
const FULL_ENUMERATION_CAP: f64 = (1u64 << 24) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordinates {
    CollinsGisin,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexSource {
    /// Every deterministic point is a constraint from the start.
    Enumerate,
    /// Constraints are added as the oracle finds them violated.
    Generate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeparationStatus {
    Separated,
    Inside,
    ToleranceLimit,
}

#[derive(Clone, Debug)]
pub struct SeparationProblem {
    pub target: Behavior,
    pub coordinates: Coordinates,
    pub source: VertexSource,
    pub lower_bound: f64,
}

impl SeparationProblem {
    pub fn new(target: Behavior) -> Self {
        Self { target, coordinates: Coordinates::CollinsGisin, source: VertexSource::Generate, lower_bound: DEFAULT_LOWER_BOUND }
    }

    pub fn with_coordinates(mut self, coordinates: Coordinates) -> Self {
        self.coordinates = coordinates;
        self
    }

    pub fn with_source(mut self, source: VertexSource) -> Self {
        self.source = source;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationResult {
    pub q_star: f64,
    pub status: SeparationStatus,
    #[serde(skip)]
    pub functional: BellFunctional,
    /// Oracle rounds (one LP re-solve each).
    pub iterations: usize,
    pub constraints: usize,
    pub pivots: usize,
    /// Largest `C . P_D` over the vertices checked in the final round.
    pub max_vertex_value: f64,
    /// Convex weights reproducing the target, when it is inside.
    #[serde(skip)]
    pub decomposition: Vec<(f64, DeterministicStrategy)>,
}

/// Column-generation state. The vertex pool and the last LP (with its
/// optimal basis) survive across targets of the same scenario, so a new
/// target only needs a dual-simplex repair before pricing resumes.
#[derive(Clone, Debug, Default)]
pub struct Separator {
    pool: Vec<DeterministicStrategy>,
    seen: HashSet<DeterministicStrategy>,
    state: Option<LpState>,
}

#[derive(Clone, Debug)]
struct LpState {
    lp: RevisedSimplex,
    slack_columns: usize,
    columns: Vec<DeterministicStrategy>,
    shape: (usize, usize, Coordinates, VertexSource, u64),
}

impl Separator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }

    fn remember(&mut self, s: DeterministicStrategy) -> bool {
        if self.seen.insert(s.clone()) {
            self.pool.push(s);
            true
        } else {
            false
        }
    }

    fn fresh_state(&self, problem: &SeparationProblem, target: &[f64]) -> Result<LpState> {
        let (m, o) = (problem.target.inputs(), problem.target.outputs());
        let coords = problem.coordinates;
        let mut lp = RevisedSimplex::new(target.to_vec());
        let mut basis = Vec::with_capacity(target.len());
        for (i, &t) in target.iter().enumerate() {
            let u = lp.add_column(vec![(i, 1.0)], 1.0);
            let v = lp.add_column(vec![(i, -1.0)], problem.lower_bound);
            basis.push(if t >= 0.0 { u } else { v });
        }
        lp.set_basis(basis)?;
        let slack_columns = lp.column_count();
        let mut columns = Vec::new();
        if problem.source == VertexSource::Enumerate {
            let per_party = alice_strategy_count(m, o);
            if per_party * per_party > FULL_ENUMERATION_CAP {
                return Err(Error::EnumerationCap { strategies: per_party * per_party, cap: FULL_ENUMERATION_CAP as u64 });
            }
            let count = per_party as u64;
            for ia in 0..count {
                let alice = map_from_index(ia, m, o);
                for ib in 0..count {
                    let s = DeterministicStrategy { alice: alice.clone(), bob: map_from_index(ib, m, o), outputs: o };
                    lp.add_column(vertex_column(&s, coords), 0.0);
                    columns.push(s);
                }
            }
        } else {
            for s in self.pool.iter().filter(|s| s.inputs() == m && s.outputs == o) {
                lp.add_column(vertex_column(s, coords), 0.0);
                columns.push(s.clone());
            }
        }
        Ok(LpState { lp, slack_columns, columns, shape: shape_of(problem) })
    }

    pub fn separate(&mut self, problem: &SeparationProblem) -> Result<SeparationResult> {
        let (m, o) = (problem.target.inputs(), problem.target.outputs());
        let coords = problem.coordinates;
        let target = coordinates_of(&problem.target, coords)?;
        let dim = target.len();

        let mut state = match self.state.take() {
            Some(mut st) if st.shape == shape_of(problem) => {
                st.lp.set_rhs(target.clone())?;
                let cap = 4 * dim;
                match st.lp.restore_feasibility(cap) {
                    Ok(Status::Optimal) => st,
                    _ => self.fresh_state(problem, &target)?,
                }
            }
            _ => self.fresh_state(problem, &target)?,
        };
        let pivots_before = state.lp.pivots;

        let mut iterations = 0;
        let mut limited = false;
        let (functional, max_vertex_value) = loop {
            iterations += 1;
            let lp = &mut state.lp;
            let pivot_cap = 200 * (dim + lp.column_count()) + 10_000;
            if lp.optimize(pivot_cap)? != Status::Optimal {
                limited = true;
            }
            let pi = lp.duals();
            let functional = functional_of(&pi, m, o, coords);
            if problem.source == VertexSource::Enumerate || limited {
                let worst = (state.slack_columns..lp.column_count())
                    .map(|j| -lp.reduced_cost(j, &pi))
                    .fold(f64::NEG_INFINITY, f64::max);
                break (functional, worst);
            }
            let violated = exceeding_vertices(&functional, VIOLATION_TOL, VERTICES_PER_ROUND)?;
            let mut added = false;
            for (_, s) in violated {
                if self.remember(s.clone()) || !state.columns.contains(&s) {
                    state.lp.add_column(vertex_column(&s, coords), 0.0);
                    state.columns.push(s);
                    added = true;
                }
            }
            if !added || iterations >= MAX_ROUNDS {
                limited = iterations >= MAX_ROUNDS;
                let worst = local_bound_exact(&functional)?.value;
                limited |= worst > VIOLATION_TOL;
                break (functional, worst);
            }
        };

        let q_star = functional.evaluate(&problem.target)?;
        let status = if limited {
            SeparationStatus::ToleranceLimit
        } else if q_star > SEPARATION_TOL {
            SeparationStatus::Separated
        } else if q_star <= INSIDE_TOL {
            SeparationStatus::Inside
        } else {
            SeparationStatus::ToleranceLimit
        };
        let decomposition = if status == SeparationStatus::Inside {
            let x = state.lp.primal();
            state
                .columns
                .iter()
                .enumerate()
                .filter_map(|(k, s)| {
                    let w = x[state.slack_columns + k];
                    (w > 1e-12).then(|| (w, s.clone()))
                })
                .collect()
        } else {
            Vec::new()
        };
        let result = SeparationResult {
            q_star,
            status,
            functional,
            iterations,
            constraints: state.columns.len(),
            pivots: state.lp.pivots - pivots_before,
            max_vertex_value,
            decomposition,
        };
        self.state = Some(state);
        Ok(result)
    }
}

fn shape_of(problem: &SeparationProblem) -> (usize, usize, Coordinates, VertexSource, u64) {
    (
        problem.target.inputs(),
        problem.target.outputs(),
        problem.coordinates,
        problem.source,
        problem.lower_bound.to_bits(),
    )
}

pub fn separate(problem: &SeparationProblem) -> Result<SeparationResult> {
    Separator::new().separate(problem)
}

fn coordinates_of(table: &Behavior, coords: Coordinates) -> Result<Vec<f64>> {
    Ok(match coords {
        Coordinates::CollinsGisin => collins_gisin_of(table, 1e-9)?.as_slice().to_vec(),
        Coordinates::Full => table.entries().to_vec(),
    })
}

fn vertex_column(s: &DeterministicStrategy, coords: Coordinates) -> SparseColumn {
    let (m, o) = (s.inputs(), s.outputs);
    match coords {
        Coordinates::CollinsGisin => {
            let k = o - 1;
            let n = side(m, o);
            let rows: Vec<usize> = (0..m).filter(|&x| s.alice[x] < k).map(|x| 1 + x * k + s.alice[x]).collect();
            let cols: Vec<usize> = (0..m).filter(|&y| s.bob[y] < k).map(|y| 1 + y * k + s.bob[y]).collect();
            let mut column = vec![(0, 1.0)];
            column.extend(cols.iter().map(|&c| (c, 1.0)));
            for &r in &rows {
                column.push((r * n, 1.0));
                column.extend(cols.iter().map(|&c| (r * n + c, 1.0)));
            }
            column.sort_unstable_by_key(|e| e.0);
            column
        }
        Coordinates::Full => {
            let mut column = Vec::with_capacity(m * m);
            for x in 0..m {
                for y in 0..m {
                    column.push(((((x * m + y) * o) + s.alice[x]) * o + s.bob[y], 1.0));
                }
            }
            column
        }
    }
}

/// Bell functional whose value on any behavior is `c` dotted with that
/// behavior's coordinates.
pub fn functional_of(c: &[f64], m: usize, o: usize, coords: Coordinates) -> BellFunctional {
    match coords {
        Coordinates::Full => BellFunctional::from_joint(m, o, c.to_vec()).expect("full-table length"),
        Coordinates::CollinsGisin => {
            let k = o - 1;
            let n = side(m, o);
            let mut joint = vec![0.0; m * m * o * o];
            let mut alice = vec![0.0; m * o];
            let mut bob = vec![0.0; m * o];
            for x in 0..m {
                for a in 0..k {
                    alice[x * o + a] = c[(1 + x * k + a) * n];
                    bob[x * o + a] = c[1 + x * k + a];
                    for y in 0..m {
                        for b in 0..k {
                            joint[((x * m + y) * o + a) * o + b] = c[(1 + x * k + a) * n + 1 + y * k + b];
                        }
                    }
                }
            }
            BellFunctional::from_parts(m, o, joint, alice, bob, c[0]).expect("consistent sizes")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EfficiencyMode {
    /// `eta_A = eta_B = eta`.
    #[serde(rename = "sym")]
    Symmetric,
    /// `eta_A = eta`, `eta_B = 1`.
    #[serde(rename = "asym")]
    Asymmetric,
}

impl EfficiencyMode {
    pub fn model(self, eta: f64, policy: Policy) -> Result<EfficiencyModel> {
        match self {
            EfficiencyMode::Symmetric => EfficiencyModel::symmetric(eta, policy),
            EfficiencyMode::Asymmetric => EfficiencyModel::new(eta, 1.0, policy),
        }
    }

    /// Default bisection interval.
    pub fn interval(self) -> (f64, f64) {
        match self {
            EfficiencyMode::Symmetric => (0.5, 1.0),
            EfficiencyMode::Asymmetric => (0.3, 1.0),
        }
    }
}

impl std::str::FromStr for EfficiencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym" => Ok(EfficiencyMode::Symmetric),
            "asym" => Ok(EfficiencyMode::Asymmetric),
            other => Err(Error::Parse { line: 1, column: 1, message: format!("unknown mode `{other}`") }),
        }
    }
}

impl std::fmt::Display for EfficiencyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EfficiencyMode::Symmetric => "sym",
            EfficiencyMode::Asymmetric => "asym",
        })
    }
}

/// Deflated target at efficiency `eta`.
pub fn deflated_target(dist: &MultiCopyDistribution, policy: Policy, mode: EfficiencyMode, eta: f64) -> Result<Behavior> {
    Ok(deflate(dist, mode.model(eta, policy)?).into_table())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectionConfig {
    pub low: f64,
    pub high: f64,
    pub width: f64,
}

impl BisectionConfig {
    pub fn for_mode(mode: EfficiencyMode) -> Self {
        let (low, high) = mode.interval();
        Self { low, high, width: 1e-4 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Bisection {
    /// Smallest efficiency found separated.
    pub eta: f64,
    /// Largest efficiency found not separated.
    pub eta_below: f64,
    pub steps: usize,
    pub vertex_pool: usize,
    /// The separation at `eta`.
    pub at_eta: SeparationResult,
}

/// Smallest efficiency whose deflated point the LP separates with
/// `Q* > SEPARATION_TOL`, to within `config.width`.
pub fn threshold_by_bisection(
    dist: &MultiCopyDistribution,
    policy: Policy,
    mode: EfficiencyMode,
    coordinates: Coordinates,
    config: BisectionConfig,
) -> Result<Bisection> {
    let mut separator = Separator::new();
    let mut run = |eta: f64| -> Result<SeparationResult> {
        let target = deflated_target(dist, policy, mode, eta)?;
        separator.separate(&SeparationProblem::new(target).with_coordinates(coordinates))
    };
    let mut high_result = run(config.high)?;
    if high_result.q_star <= SEPARATION_TOL {
        return Err(Error::NoSeparationAtUnitEfficiency);
    }
    let (mut low, mut high) = (config.low, config.high);
    let mut steps = 1;
    while high - low > config.width {
        let mid = 0.5 * (low + high);
        let r = run(mid)?;
        steps += 1;
        if r.q_star > SEPARATION_TOL {
            high = mid;
            high_result = r;
        } else {
            low = mid;
        }
    }
    let vertex_pool = separator.pool_size();
    Ok(Bisection { eta: high, eta_below: low, steps, vertex_pool, at_eta: high_result })
}

/// Grid fit: the functional scaled to the smallest integer grid that holds
/// every coefficient of `f / max|f|` with denominator at most `max_denominator`.
/// Falls back to rounding on the `max_denominator` grid.
pub fn rationalize(f: &BellFunctional, max_denominator: u64) -> Result<BellFunctional> {
    if f.is_integer() {
        return Ok(f.clone());
    }
    let scale = f.max_abs();
    if scale == 0.0 {
        return Ok(f.map(|_| 0.0));
    }
    let normalized = f.scaled(1.0 / scale);
    let values = coefficient_values(&normalized);
    let fits = |d: f64| values.iter().all(|v| (v * d - (v * d).round()).abs() <= 1e-7 * d.max(1.0));
    let denominator = (1..=max_denominator).map(|d| d as f64).find(|&d| fits(d)).unwrap_or(max_denominator as f64);
    let rounded = normalized.map(|v| (v * denominator).round());
    let g = coefficient_values(&rounded).iter().fold(0u64, |g, &v| gcd(g, v.abs() as u64));
    if g == 0 {
        return Err(Error::Rationalization(max_denominator));
    }
    Ok(rounded.map(|v| v / g as f64))
}

/// [`rationalize`], then checks that the integer functional still separates
/// `target` from the local polytope (exact local bound under the enumeration
/// cap, see-saw bound above it).
pub fn rationalize_separating(f: &BellFunctional, target: &Behavior, max_denominator: u64) -> Result<BellFunctional> {
    let r = rationalize(f, max_denominator)?;
    let count = alice_strategy_count(r.inputs(), r.outputs());
    let local = if count <= DEFAULT_ENUMERATION_CAP as f64 {
        local_bound_exact(&r)?.value
    } else {
        local_bound_heuristic(&r, 1000, 0).value
    };
    if r.evaluate(target)? > local {
        Ok(r)
    } else {
        Err(Error::Rationalization(max_denominator))
    }
}

fn coefficient_values(f: &BellFunctional) -> Vec<f64> {
    let mut v: Vec<f64> = f.joint().to_vec();
    v.extend_from_slice(f.alice());
    v.extend_from_slice(f.bob());
    v.push(f.constant());
    v
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{chsh_optimal_single_copy, tensor_power};

    fn single() -> MultiCopyDistribution {
        tensor_power(&chsh_optimal_single_copy(), 1).unwrap()
    }

    #[test]
    fn single_copy_separation_and_boundary() {
        let t = deflated_target(&single(), Policy::LastOutcome, EfficiencyMode::Symmetric, 0.9).unwrap();
        let r = separate(&SeparationProblem::new(t.clone())).unwrap();
        assert_eq!(r.status, SeparationStatus::Separated);
        assert!(r.max_vertex_value <= VIOLATION_TOL);
        assert!((r.functional.evaluate(&t).unwrap() - r.q_star).abs() < 1e-12);

        let eta = 2.0 * (2f64.sqrt() - 1.0);
        let t = deflated_target(&single(), Policy::LastOutcome, EfficiencyMode::Symmetric, eta).unwrap();
        let r = separate(&SeparationProblem::new(t)).unwrap();
        assert!(r.q_star.abs() < 1e-6, "{}", r.q_star);
    }

    #[test]
    fn inside_has_convex_decomposition() {
        let t = deflated_target(&single(), Policy::LastOutcome, EfficiencyMode::Symmetric, 0.75).unwrap();
        let r = separate(&SeparationProblem::new(t.clone())).unwrap();
        assert_eq!(r.status, SeparationStatus::Inside);
        let total: f64 = r.decomposition.iter().map(|(w, _)| w).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let mut mix = vec![0.0; t.entries().len()];
        for (w, s) in &r.decomposition {
            for (m, p) in mix.iter_mut().zip(s.point().entries()) {
                *m += w * p;
            }
        }
        for (m, p) in mix.iter().zip(t.entries()) {
            assert!((m - p).abs() < 1e-9);
        }
    }

    #[test]
    fn full_enumeration_and_full_table_agree_on_status() {
        let t = deflated_target(&single(), Policy::LastOutcome, EfficiencyMode::Symmetric, 0.9).unwrap();
        let generated = separate(&SeparationProblem::new(t.clone())).unwrap();
        let enumerated = separate(&SeparationProblem::new(t.clone()).with_source(VertexSource::Enumerate)).unwrap();
        assert!((generated.q_star - enumerated.q_star).abs() < 1e-7);
        let full = separate(&SeparationProblem::new(t).with_coordinates(Coordinates::Full)).unwrap();
        assert_eq!(full.status, SeparationStatus::Separated);
    }

    #[test]
    fn rationalize_grid() {
        let f = BellFunctional::from_fn(2, 2, |x, y, a, b| if (a ^ b) == (x & y) { 0.25 } else { -0.125 });
        let r = rationalize(&f, 16).unwrap();
        assert!(r.is_integer());
        assert_eq!(r.joint_at(0, 0, 0, 0), 2.0);
        assert_eq!(r.joint_at(0, 0, 0, 1), -1.0);
        let chsh = BellFunctional::from_fn(2, 2, |x, y, a, b| if (a ^ b) == (x & y) { 3.0 } else { 0.0 });
        assert_eq!(rationalize(&chsh, 16).unwrap(), chsh);
    }
}
