//! Conditional probability tables `P(a,b|x,y)` for two parties.
//!
//! Entries are stored row-major in `(x, y, a, b)` order, which is also the
//! order of the serialized `entries` array and of the coefficient tensors
//! used by [`crate::functional::BellFunctional`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for tables generated inside the crate.
pub const INTERNAL_TOL: f64 = 1e-12;
/// Tolerance for tables read from outside (files, user input).
pub const IO_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    inputs: usize,
    outputs: usize,
    entries: Vec<f64>,
}

/// Per-party marginals `P^A(a|x)` and `P^B(b|y)`, stored `[x * o + a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginals {
    pub inputs: usize,
    pub outputs: usize,
    pub alice: Vec<f64>,
    pub bob: Vec<f64>,
}

impl Marginals {
    pub fn alice(&self, x: usize, a: usize) -> f64 {
        self.alice[x * self.outputs + a]
    }

    pub fn bob(&self, y: usize, b: usize) -> f64 {
        self.bob[y * self.outputs + b]
    }
}

#[inline]
pub fn table_index(m: usize, o: usize, x: usize, y: usize, a: usize, b: usize) -> usize {
    ((x * m + y) * o + a) * o + b
}

impl Behavior {
    /// Builds a table and validates it at tolerance `tol`.
    pub fn new(inputs: usize, outputs: usize, entries: Vec<f64>, tol: f64) -> Result<Self> {
        let table = Self::from_entries(inputs, outputs, entries)?;
        table.validate(tol)?;
        Ok(table)
    }

    /// Builds a table without checking probabilistic invariants.
    pub fn from_entries(inputs: usize, outputs: usize, entries: Vec<f64>) -> Result<Self> {
        let expected = inputs * inputs * outputs * outputs;
        if inputs == 0 || outputs == 0 || entries.len() != expected {
            return Err(Error::Dimension(format!(
                "table with m={inputs}, o={outputs} needs {expected} entries, got {}",
                entries.len()
            )));
        }
        Ok(Self { inputs, outputs, entries })
    }

    pub fn from_fn(
        inputs: usize,
        outputs: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut entries = Vec::with_capacity(inputs * inputs * outputs * outputs);
        for x in 0..inputs {
            for y in 0..inputs {
                for a in 0..outputs {
                    for b in 0..outputs {
                        entries.push(f(x, y, a, b));
                    }
                }
            }
        }
        Self { inputs, outputs, entries }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        table_index(self.inputs, self.outputs, x, y, a, b)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.entries[self.index(x, y, a, b)]
    }

    fn context(&self, x: usize, y: usize) -> &[f64] {
        let block = self.outputs * self.outputs;
        let start = (x * self.inputs + y) * block;
        &self.entries[start..start + block]
    }

    /// Largest deviation from 1 of a per-context sum.
    pub fn normalization_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.inputs {
            for y in 0..self.inputs {
                let sum: f64 = self.context(x, y).iter().sum();
                worst = worst.max((sum - 1.0).abs());
            }
        }
        worst
    }

    fn raw_alice(&self, x: usize, y: usize) -> Vec<f64> {
        let o = self.outputs;
        let ctx = self.context(x, y);
        (0..o).map(|a| ctx[a * o..(a + 1) * o].iter().sum()).collect()
    }

    fn raw_bob(&self, x: usize, y: usize) -> Vec<f64> {
        let o = self.outputs;
        let ctx = self.context(x, y);
        (0..o).map(|b| (0..o).map(|a| ctx[a * o + b]).sum()).collect()
    }

    /// Largest violation of the no-signaling conditions in either direction.
    pub fn signaling_deviation(&self) -> f64 {
        let m = self.inputs;
        let mut worst: f64 = 0.0;
        for x in 0..m {
            let reference = self.raw_alice(x, 0);
            for y in 1..m {
                for (u, v) in reference.iter().zip(self.raw_alice(x, y)) {
                    worst = worst.max((u - v).abs());
                }
            }
        }
        for y in 0..m {
            let reference = self.raw_bob(0, y);
            for x in 1..m {
                for (u, v) in reference.iter().zip(self.raw_bob(x, y)) {
                    worst = worst.max((u - v).abs());
                }
            }
        }
        worst
    }

    /// Checks nonnegativity, normalization and no-signaling at `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if let Some(bad) = self.entries.iter().find(|&&p| !(p >= -tol && p <= 1.0 + tol)) {
            return Err(Error::InvalidDistribution(format!("entry {bad} outside [0, 1]")));
        }
        let norm = self.normalization_deviation();
        if norm > tol {
            return Err(Error::InvalidDistribution(format!(
                "context sums deviate from 1 by {norm:e}"
            )));
        }
        let deviation = self.signaling_deviation();
        if deviation > tol {
            return Err(Error::Signaling { deviation, tolerance: tol });
        }
        Ok(())
    }

    /// Marginal tables, after verifying they do not depend on the remote input.
    pub fn marginals(&self, tol: f64) -> Result<Marginals> {
        let deviation = self.signaling_deviation();
        if deviation > tol {
            return Err(Error::Signaling { deviation, tolerance: tol });
        }
        Ok(self.marginals_unchecked())
    }

    /// Marginals read off the `y = 0` (resp. `x = 0`) contexts.
    pub fn marginals_unchecked(&self) -> Marginals {
        let m = self.inputs;
        let alice = (0..m).flat_map(|x| self.raw_alice(x, 0)).collect();
        let bob = (0..m).flat_map(|y| self.raw_bob(0, y)).collect();
        Marginals { inputs: m, outputs: self.outputs, alice, bob }
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.entries.iter().zip(other).map(|(p, c)| p * c).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(m: usize, o: usize) -> Behavior {
        let p = 1.0 / (o * o) as f64;
        Behavior::from_fn(m, o, |_, _, _, _| p)
    }

    #[test]
    fn uniform_table_is_valid() {
        let t = uniform(3, 4);
        t.validate(INTERNAL_TOL).unwrap();
        let marg = t.marginals(INTERNAL_TOL).unwrap();
        assert!(marg.alice.iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn signaling_table_is_rejected() {
        // Bob's output copies Alice's input: P(a,b|x,y) = 1/2 [b = x].
        let t = Behavior::from_fn(2, 2, |x, _, _, b| if b == x { 0.5 } else { 0.0 });
        assert!(matches!(t.validate(1e-10), Err(Error::Signaling { .. })));
        assert!(t.marginals(1e-10).is_err());
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(Behavior::from_entries(2, 2, vec![0.0; 15]).is_err());
    }
}
