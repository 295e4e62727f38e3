//! Quantum correlations of projective qubit measurements on the maximally
//! entangled state `(|00> + |11>)/sqrt 2`, and their n-fold tensor powers.
//!
//! Only the closed form `P(a,b|x,y) = (1 + (-1)^(a xor b) a_x . b'_y) / 4`
//! with `b' = (b1, -b2, b3)` is used; the state is never materialized.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::behavior::{Behavior, Marginals, INTERNAL_TOL, IO_TOL};
use crate::codec;
use crate::error::{Error, Result};

/// Default cap on the number of copies; memory grows as `2^(4n)`.
pub const DEFAULT_COPY_CAP: usize = 4;

const BLOCH_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm_sq = x * x + y * y + z * z;
        if (norm_sq - 1.0).abs() > BLOCH_TOL {
            return Err(Error::NonUnitBloch { x, y, z, norm_sq });
        }
        Ok(Self { x, y, z })
    }

    /// The vector with its second component negated, as seen through the
    /// transpose trick on `|phi+>`.
    fn conjugated(self) -> Self {
        Self { x: self.x, y: -self.y, z: self.z }
    }

    fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Alice => f.write_str("alice"),
            Party::Bob => f.write_str("bob"),
        }
    }
}

/// One Bloch direction per measurement setting of a party.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementFamily {
    pub party: Party,
    settings: Vec<BlochVector>,
}

impl MeasurementFamily {
    pub fn new(party: Party, settings: Vec<BlochVector>) -> Result<Self> {
        if settings.is_empty() {
            return Err(Error::SettingCount { expected: 1, got: 0 });
        }
        Ok(Self { party, settings })
    }

    pub fn settings(&self) -> &[BlochVector] {
        &self.settings
    }

    /// Alice's CHSH-optimal directions `x` and `z`.
    pub fn chsh_alice() -> Self {
        Self {
            party: Party::Alice,
            settings: vec![
                BlochVector { x: 1.0, y: 0.0, z: 0.0 },
                BlochVector { x: 0.0, y: 0.0, z: 1.0 },
            ],
        }
    }

    /// Bob's CHSH-optimal directions `(x +- z)/sqrt 2`.
    pub fn chsh_bob() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            party: Party::Bob,
            settings: vec![
                BlochVector { x: h, y: 0.0, z: h },
                BlochVector { x: h, y: 0.0, z: -h },
            ],
        }
    }
}

/// A two-setting, two-outcome table for one copy.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleCopyDistribution {
    table: Behavior,
}

impl SingleCopyDistribution {
    pub fn table(&self) -> &Behavior {
        &self.table
    }

    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.table.get(x, y, a, b)
    }

    pub fn from_behavior(table: Behavior) -> Result<Self> {
        if table.inputs() != 2 || table.outputs() != 2 {
            return Err(Error::Dimension("single-copy table must be 2x2x2x2".into()));
        }
        table.validate(IO_TOL)?;
        Ok(Self { table })
    }
}

/// `P(a,b|x,y) = (1 + (-1)^(a xor b) (-1)^(xy) sqrt2/2) / 4`.
pub fn chsh_optimal_single_copy() -> SingleCopyDistribution {
    let c = std::f64::consts::SQRT_2 / 2.0;
    let table = Behavior::from_fn(2, 2, |x, y, a, b| {
        let sign_ab = if (a ^ b) == 0 { 1.0 } else { -1.0 };
        let sign_xy = if x * y == 0 { 1.0 } else { -1.0 };
        0.25 * (1.0 + sign_ab * sign_xy * c)
    });
    SingleCopyDistribution { table }
}

/// Correlations of two-setting measurement families on `|phi+>`.
pub fn single_copy_from_bloch(
    alice: &MeasurementFamily,
    bob: &MeasurementFamily,
) -> Result<SingleCopyDistribution> {
    for family in [alice, bob] {
        if family.settings.len() != 2 {
            return Err(Error::SettingCount { expected: 2, got: family.settings.len() });
        }
        for v in &family.settings {
            BlochVector::new(v.x, v.y, v.z)?;
        }
    }
    let table = Behavior::from_fn(2, 2, |x, y, a, b| {
        let sign = if (a ^ b) == 0 { 1.0 } else { -1.0 };
        let overlap = alice.settings[x].dot(bob.settings[y].conjugated());
        0.25 * (1.0 + sign * overlap)
    });
    Ok(SingleCopyDistribution { table })
}

/// The n-fold product of a single-copy table, with composite inputs and
/// outputs packed by [`crate::codec`].
#[derive(Clone, Debug, PartialEq)]
pub struct MultiCopyDistribution {
    n: usize,
    table: Behavior,
}

impl MultiCopyDistribution {
    pub fn copies(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &Behavior {
        &self.table
    }

    pub fn inputs(&self) -> usize {
        self.table.inputs()
    }

    pub fn outputs(&self) -> usize {
        self.table.outputs()
    }

    pub fn marginals(&self) -> Result<Marginals> {
        marginals(self)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = DistributionDocument {
            n: self.n,
            m: self.inputs(),
            o: self.outputs(),
            entries: self.table.entries().to_vec(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Loads and validates a serialized distribution, including the check
    /// that it factorizes over copies.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DistributionDocument = serde_json::from_str(text)?;
        if doc.n == 0 || doc.m != 1 << doc.n || doc.o != 1 << doc.n {
            return Err(Error::Dimension(format!(
                "n={} requires m=o={}, got m={}, o={}",
                doc.n,
                1usize << doc.n.min(63),
                doc.m,
                doc.o
            )));
        }
        let table = Behavior::new(doc.m, doc.o, doc.entries, IO_TOL)?;
        let dist = Self { n: doc.n, table };
        let deviation = dist.factorization_deviation();
        if deviation > IO_TOL {
            return Err(Error::InvalidDistribution(format!(
                "table does not factorize over copies (deviation {deviation:e})"
            )));
        }
        Ok(dist)
    }

    /// Single-copy table of copy `copy`, obtained by summing out the other
    /// copies' outputs with their inputs held at 0.
    pub fn copy_marginal(&self, copy: usize) -> Behavior {
        let m = self.inputs();
        let mut entries = vec![0.0; 16];
        for x in 0..m {
            for y in 0..m {
                let others_zero = (x & !(1 << copy)) == 0 && (y & !(1 << copy)) == 0;
                if !others_zero {
                    continue;
                }
                let (xi, yi) = (codec::bit(x, copy), codec::bit(y, copy));
                for a in 0..m {
                    for b in 0..m {
                        let (ai, bi) = (codec::bit(a, copy), codec::bit(b, copy));
                        entries[((xi * 2 + yi) * 2 + ai) * 2 + bi] += self.table.get(x, y, a, b);
                    }
                }
            }
        }
        Behavior::from_entries(2, 2, entries).expect("fixed size")
    }

    /// Largest deviation between the table and the product of its per-copy
    /// marginal tables.
    pub fn factorization_deviation(&self) -> f64 {
        let per_copy: Vec<Behavior> = (0..self.n).map(|i| self.copy_marginal(i)).collect();
        let m = self.inputs();
        let mut worst: f64 = 0.0;
        for x in 0..m {
            for y in 0..m {
                for a in 0..m {
                    for b in 0..m {
                        let product: f64 = per_copy
                            .iter()
                            .enumerate()
                            .map(|(i, t)| {
                                t.get(codec::bit(x, i), codec::bit(y, i), codec::bit(a, i), codec::bit(b, i))
                            })
                            .product();
                        worst = worst.max((product - self.table.get(x, y, a, b)).abs());
                    }
                }
            }
        }
        worst
    }
}

#[derive(Serialize, Deserialize)]
struct DistributionDocument {
    n: usize,
    m: usize,
    o: usize,
    entries: Vec<f64>,
}

/// `tensor_power_capped` with [`DEFAULT_COPY_CAP`].
pub fn tensor_power(base: &SingleCopyDistribution, n: usize) -> Result<MultiCopyDistribution> {
    tensor_power_capped(base, n, DEFAULT_COPY_CAP)
}

/// `P(a,b|x,y) = prod_i P(a_i,b_i|x_i,y_i)` over `n` copies.
pub fn tensor_power_capped(
    base: &SingleCopyDistribution,
    n: usize,
    cap: usize,
) -> Result<MultiCopyDistribution> {
    if n == 0 {
        return Err(Error::NoCopies);
    }
    if n > cap {
        return Err(Error::CopyCap { n, cap });
    }
    let d = 1usize << n;
    let table = Behavior::from_fn(d, d, |x, y, a, b| {
        (0..n)
            .map(|i| base.get(codec::bit(x, i), codec::bit(y, i), codec::bit(a, i), codec::bit(b, i)))
            .product()
    });
    debug_assert!(table.validate(INTERNAL_TOL).is_ok());
    Ok(MultiCopyDistribution { n, table })
}

/// Marginals `P^A(a|x)` and `P^B(b|y)`, verified independent of the remote input.
pub fn marginals(dist: &MultiCopyDistribution) -> Result<Marginals> {
    dist.table.marginals(INTERNAL_TOL)
}
