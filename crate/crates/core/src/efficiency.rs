//! Finite detection efficiency and the Collins-Gisin reduced representation.
//!
//! Under [`Policy::LastOutcome`] a party whose detector does not fire outputs
//! the all-ones composite outcome `o - 1`. Under [`Policy::ExtraOutcome`] a
//! no-click is reported as a new outcome `o`, independently per setting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::behavior::{Behavior, INTERNAL_TOL, IO_TOL};
use crate::distribution::MultiCopyDistribution;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    #[serde(rename = "last")]
    LastOutcome,
    #[serde(rename = "extra")]
    ExtraOutcome,
}

impl Policy {
    /// Number of outcomes after deflating an `o`-outcome table.
    pub fn deflated_outputs(self, o: usize) -> usize {
        match self {
            Policy::LastOutcome => o,
            Policy::ExtraOutcome => o + 1,
        }
    }

    /// Outcome reported on a no-click, for an ideal table with `o` outcomes.
    pub fn assigned_outcome(self, o: usize) -> usize {
        match self {
            Policy::LastOutcome => o - 1,
            Policy::ExtraOutcome => o,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::LastOutcome => "last",
            Policy::ExtraOutcome => "extra",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" => Ok(Policy::LastOutcome),
            "extra" => Ok(Policy::ExtraOutcome),
            other => Err(Error::Parse { line: 1, column: 1, message: format!("unknown policy `{other}`") }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyModel {
    eta_a: f64,
    eta_b: f64,
    policy: Policy,
}

impl EfficiencyModel {
    pub fn new(eta_a: f64, eta_b: f64, policy: Policy) -> Result<Self> {
        for eta in [eta_a, eta_b] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::Efficiency(eta));
            }
        }
        Ok(Self { eta_a, eta_b, policy })
    }

    pub fn symmetric(eta: f64, policy: Policy) -> Result<Self> {
        Self::new(eta, eta, policy)
    }

    pub fn eta_a(&self) -> f64 {
        self.eta_a
    }

    pub fn eta_b(&self) -> f64 {
        self.eta_b
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }
}

/// An ideal table after accounting for detector losses.
#[derive(Clone, Debug, PartialEq)]
pub struct DeflatedPoint {
    table: Behavior,
    model: EfficiencyModel,
}

impl DeflatedPoint {
    pub fn table(&self) -> &Behavior {
        &self.table
    }

    pub fn model(&self) -> &EfficiencyModel {
        &self.model
    }

    pub fn inputs(&self) -> usize {
        self.table.inputs()
    }

    pub fn outputs(&self) -> usize {
        self.table.outputs()
    }

    pub fn into_table(self) -> Behavior {
        self.table
    }
}

/// `deflate_table` on the table of an n-copy distribution.
pub fn deflate(dist: &MultiCopyDistribution, model: EfficiencyModel) -> DeflatedPoint {
    deflate_table(dist.table(), model)
}

/// Mixes the four click/no-click cases with weights `eta_A eta_B`,
/// `eta_A (1 - eta_B)`, `(1 - eta_A) eta_B` and `(1 - eta_A)(1 - eta_B)`.
pub fn deflate_table(ideal: &Behavior, model: EfficiencyModel) -> DeflatedPoint {
    let (m, o) = (ideal.inputs(), ideal.outputs());
    let marg = ideal.marginals_unchecked();
    let (ea, eb) = (model.eta_a, model.eta_b);
    let policy = model.policy;
    let out = policy.deflated_outputs(o);
    let fail = policy.assigned_outcome(o);
    let table = Behavior::from_fn(m, out, |x, y, a, b| {
        let mut p = 0.0;
        if a < o && b < o {
            p += ea * eb * ideal.get(x, y, a, b);
        }
        if a < o && b == fail {
            p += ea * (1.0 - eb) * marg.alice(x, a);
        }
        if a == fail && b < o {
            p += (1.0 - ea) * eb * marg.bob(y, b);
        }
        if a == fail && b == fail {
            p += (1.0 - ea) * (1.0 - eb);
        }
        p
    });
    debug_assert!(table.validate(1e-10).is_ok());
    DeflatedPoint { table, model }
}

/// Reduced representation of a no-signaling table with `m` inputs and `o`
/// outcomes: a square matrix of side `m (o - 1) + 1` whose row/column 0 is
/// the unit, with `P^A(a|x)`, `P^B(b|y)` and `P(a,b|x,y)` for `a, b < o - 1`.
/// Row `1 + x (o - 1) + a` belongs to `(a|x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollinsGisinPoint {
    inputs: usize,
    outputs: usize,
    policy: Option<Policy>,
    matrix: Vec<f64>,
}

impl CollinsGisinPoint {
    pub fn side(&self) -> usize {
        side(self.inputs, self.outputs)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn policy(&self) -> Option<Policy> {
        self.policy
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.side() + col]
    }

    pub fn from_matrix(inputs: usize, outputs: usize, matrix: Vec<f64>) -> Result<Self> {
        let s = side(inputs, outputs);
        if matrix.len() != s * s {
            return Err(Error::Dimension(format!("expected a {s}x{s} matrix, got {} entries", matrix.len())));
        }
        Ok(Self { inputs, outputs, policy: None, matrix })
    }

    /// Text form: one header line `m <m> o <o> policy <last|extra|none>`
    /// followed by the matrix rows.
    pub fn to_text(&self) -> String {
        let policy = self.policy.map_or("none".to_string(), |p| p.to_string());
        let mut out = format!("m {} o {} policy {}\n", self.inputs, self.outputs, policy);
        let s = self.side();
        for r in 0..s {
            let row: Vec<String> = self.matrix[r * s..(r + 1) * s].iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, column: 1, message: "missing header".into() })?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        let bad_header = || Error::Parse {
            line: 1,
            column: 1,
            message: "header must read `m <m> o <o> policy <last|extra|none>`".into(),
        };
        if tokens.len() != 6 || tokens[0] != "m" || tokens[2] != "o" || tokens[4] != "policy" {
            return Err(bad_header());
        }
        let m: usize = tokens[1].parse().map_err(|_| bad_header())?;
        let o: usize = tokens[3].parse().map_err(|_| bad_header())?;
        let policy = match tokens[5] {
            "none" => None,
            p => Some(p.parse()?),
        };
        let s = side(m, o);
        let mut matrix = Vec::with_capacity(s * s);
        for (i, line) in lines {
            for (j, token) in line.split_whitespace().enumerate() {
                let v: f64 = token.parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    column: j + 1,
                    message: format!("non-numeric token `{token}`"),
                })?;
                matrix.push(v);
            }
        }
        let mut point = Self::from_matrix(m, o, matrix)?;
        point.policy = policy;
        Ok(point)
    }
}

pub fn side(inputs: usize, outputs: usize) -> usize {
    inputs * (outputs - 1) + 1
}

/// `collins_gisin_of` on the table of a deflated point.
pub fn to_collins_gisin(point: &DeflatedPoint) -> Result<CollinsGisinPoint> {
    let mut cg = collins_gisin_of(&point.table, INTERNAL_TOL.max(1e-10))?;
    cg.policy = Some(point.model.policy);
    Ok(cg)
}

/// Reduced representation of any no-signaling table.
pub fn collins_gisin_of(table: &Behavior, tol: f64) -> Result<CollinsGisinPoint> {
    let (m, o) = (table.inputs(), table.outputs());
    let marg = table.marginals(tol)?;
    let k = o - 1;
    let s = side(m, o);
    let mut matrix = vec![0.0; s * s];
    matrix[0] = 1.0;
    for x in 0..m {
        for a in 0..k {
            matrix[(1 + x * k + a) * s] = marg.alice(x, a);
            matrix[1 + x * k + a] = marg.bob(x, a);
        }
    }
    for x in 0..m {
        for a in 0..k {
            for y in 0..m {
                for b in 0..k {
                    matrix[(1 + x * k + a) * s + 1 + y * k + b] = table.get(x, y, a, b);
                }
            }
        }
    }
    Ok(CollinsGisinPoint { inputs: m, outputs: o, policy: None, matrix })
}

/// Rebuilds the full table; entries for the last outcome follow from
/// normalization and no-signaling.
pub fn from_collins_gisin(cg: &CollinsGisinPoint, inputs: usize, outputs: usize) -> Result<DeflatedPoint> {
    let table = table_from_collins_gisin(cg, inputs, outputs)?;
    let policy = cg.policy.unwrap_or(Policy::LastOutcome);
    // The efficiencies are not recoverable from the table alone; record the
    // lossless model.
    let model = EfficiencyModel { eta_a: 1.0, eta_b: 1.0, policy };
    Ok(DeflatedPoint { table, model })
}

pub fn table_from_collins_gisin(cg: &CollinsGisinPoint, inputs: usize, outputs: usize) -> Result<Behavior> {
    if cg.inputs != inputs || cg.outputs != outputs {
        return Err(Error::Dimension(format!(
            "CG point is (m={}, o={}), requested (m={inputs}, o={outputs})",
            cg.inputs, cg.outputs
        )));
    }
    let (m, o) = (inputs, outputs);
    let k = o - 1;
    let s = side(m, o);
    let at = |r: usize, c: usize| cg.matrix[r * s + c];
    let pa = |x: usize, a: usize| at(1 + x * k + a, 0);
    let pb = |y: usize, b: usize| at(0, 1 + y * k + b);
    let pj = |x: usize, y: usize, a: usize, b: usize| at(1 + x * k + a, 1 + y * k + b);
    let mut entries = Vec::with_capacity(m * m * o * o);
    for x in 0..m {
        for y in 0..m {
            for a in 0..o {
                for b in 0..o {
                    let v = match (a < k, b < k) {
                        (true, true) => pj(x, y, a, b),
                        (true, false) => pa(x, a) - (0..k).map(|b| pj(x, y, a, b)).sum::<f64>(),
                        (false, true) => pb(y, b) - (0..k).map(|a| pj(x, y, a, b)).sum::<f64>(),
                        (false, false) => {
                            let joint: f64 = (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).map(|(a, b)| pj(x, y, a, b)).sum();
                            1.0 - (0..k).map(|a| pa(x, a)).sum::<f64>() - (0..k).map(|b| pb(y, b)).sum::<f64>()
                                + joint
                        }
                    };
                    if !(-IO_TOL..=1.0 + IO_TOL).contains(&v) {
                        return Err(Error::Reconstruction { x, y, a, b, value: v });
                    }
                    entries.push(v);
                }
            }
        }
    }
    Behavior::from_entries(m, o, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{chsh_optimal_single_copy, tensor_power};

    fn ideal(n: usize) -> MultiCopyDistribution {
        tensor_power(&chsh_optimal_single_copy(), n).unwrap()
    }

    #[test]
    fn unit_efficiency_is_identity() {
        let d = ideal(2);
        let p = deflate(&d, EfficiencyModel::symmetric(1.0, Policy::LastOutcome).unwrap());
        assert_eq!(p.table(), d.table());
    }

    #[test]
    fn zero_efficiency_is_the_no_click_vertex() {
        let d = ideal(2);
        let p = deflate(&d, EfficiencyModel::symmetric(0.0, Policy::LastOutcome).unwrap());
        for x in 0..4 {
            for y in 0..4 {
                for a in 0..4 {
                    for b in 0..4 {
                        let expected = if a == 3 && b == 3 { 1.0 } else { 0.0 };
                        assert_eq!(p.table().get(x, y, a, b), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn joint_block_scales_by_product_of_efficiencies() {
        let d = ideal(2);
        let (ea, eb) = (0.83, 0.61);
        let p = deflate(&d, EfficiencyModel::new(ea, eb, Policy::LastOutcome).unwrap());
        for x in 0..4 {
            for y in 0..4 {
                for a in 0..3 {
                    for b in 0..3 {
                        let expected = ea * eb * d.table().get(x, y, a, b);
                        assert!((p.table().get(x, y, a, b) - expected).abs() < 1e-15);
                    }
                }
            }
        }
        p.table().validate(INTERNAL_TOL).unwrap();
    }

    #[test]
    fn extra_outcome_at_unit_efficiency_pads_with_zero() {
        let d = ideal(1);
        let p = deflate(&d, EfficiencyModel::symmetric(1.0, Policy::ExtraOutcome).unwrap());
        assert_eq!(p.outputs(), 3);
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..3 {
                    for b in 0..3 {
                        let expected = if a < 2 && b < 2 { d.table().get(x, y, a, b) } else { 0.0 };
                        assert_eq!(p.table().get(x, y, a, b), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn extra_outcome_no_click_mass() {
        let d = ideal(1);
        let p = deflate(&d, EfficiencyModel::new(0.7, 0.9, Policy::ExtraOutcome).unwrap());
        assert!((p.table().get(0, 1, 2, 2) - 0.3 * 0.1).abs() < 1e-15);
        p.table().validate(INTERNAL_TOL).unwrap();
    }

    #[test]
    fn efficiency_out_of_range() {
        assert!(EfficiencyModel::new(1.2, 0.5, Policy::LastOutcome).is_err());
        assert!(EfficiencyModel::new(0.5, -0.1, Policy::LastOutcome).is_err());
    }

    #[test]
    fn collins_gisin_sizes() {
        let d = ideal(2);
        let last = deflate(&d, EfficiencyModel::symmetric(0.9, Policy::LastOutcome).unwrap());
        assert_eq!(to_collins_gisin(&last).unwrap().side(), 13);
        let extra = deflate(&d, EfficiencyModel::symmetric(0.9, Policy::ExtraOutcome).unwrap());
        assert_eq!(to_collins_gisin(&extra).unwrap().side(), 17);
    }

    #[test]
    fn collins_gisin_roundtrip() {
        let d = ideal(2);
        for policy in [Policy::LastOutcome, Policy::ExtraOutcome] {
            let p = deflate(&d, EfficiencyModel::new(0.8, 0.7, policy).unwrap());
            let cg = to_collins_gisin(&p).unwrap();
            let back = from_collins_gisin(&cg, p.inputs(), p.outputs()).unwrap();
            for (u, v) in back.table().entries().iter().zip(p.table().entries()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_only_matrix_is_the_last_outcome_vertex() {
        let mut matrix = vec![0.0; 25];
        matrix[0] = 1.0;
        let cg = CollinsGisinPoint::from_matrix(2, 3, matrix).unwrap();
        let p = from_collins_gisin(&cg, 2, 3).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..3 {
                    for b in 0..3 {
                        let expected = if a == 2 && b == 2 { 1.0 } else { 0.0 };
                        assert_eq!(p.table().get(x, y, a, b), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn ideal_single_copy_from_hand_reconstruction() {
        // P^A = P^B = 1/2 and P(0,0|x,y) = (1 + (-1)^(xy) c)/4 determine the table.
        let c = std::f64::consts::SQRT_2 / 2.0;
        let mut matrix = vec![0.0; 9];
        matrix[0] = 1.0;
        for i in 1..3 {
            matrix[i] = 0.5;
            matrix[i * 3] = 0.5;
        }
        for x in 0..2 {
            for y in 0..2 {
                let s = if x * y == 1 { -1.0 } else { 1.0 };
                matrix[(1 + x) * 3 + 1 + y] = 0.25 * (1.0 + s * c);
            }
        }
        let cg = CollinsGisinPoint::from_matrix(2, 2, matrix).unwrap();
        let p = from_collins_gisin(&cg, 2, 2).unwrap();
        let expected = chsh_optimal_single_copy();
        for (u, v) in p.table().entries().iter().zip(expected.table().entries()) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn reconstruction_rejects_impossible_matrix() {
        let mut matrix = vec![0.0; 9];
        matrix[0] = 1.0;
        matrix[3] = 0.9; // P^A(0|0)
        matrix[4] = 0.95; // P(0,0|0,0) > P^A(0|0) is fine, but P^B(0|0) = 0 makes P(1,0) negative
        let cg = CollinsGisinPoint::from_matrix(2, 2, matrix).unwrap();
        assert!(matches!(from_collins_gisin(&cg, 2, 2), Err(Error::Reconstruction { .. })));
    }

    #[test]
    fn text_roundtrip() {
        let d = ideal(1);
        let p = deflate(&d, EfficiencyModel::symmetric(0.85, Policy::ExtraOutcome).unwrap());
        let cg = to_collins_gisin(&p).unwrap();
        let back = CollinsGisinPoint::from_text(&cg.to_text()).unwrap();
        assert_eq!(back, cg);
    }
}
