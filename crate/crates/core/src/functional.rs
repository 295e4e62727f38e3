//! Bell functionals: a joint coefficient tensor `C[a][b][x][y]`, optional
//! one-party blocks `C^A[a|x]`, `C^B[b|y]`, and a constant term.
//!
//! The value on a behavior `P` is
//! `constant + sum C^A P^A + sum C^B P^B + sum C P`.
//!
//! # Block text format
//!
//! ```text
//! m 4
//! o 4
//! layout reduced
//! constant -1
//! alice
//! <k rows (outputs a) by m columns (inputs x)>
//! bob
//! <k rows (outputs b) by m columns (inputs y)>
//! joint
//! <m*k rows by m*k columns>
//! ```
//!
//! In the joint block, `C[a][b][x][y]` is element `(a, b)` of the `k x k`
//! sub-block at block coordinate `(x, y)`. With `layout reduced`, `k = o - 1`
//! and every coefficient touching the last outcome is zero; with
//! `layout full`, `k = o`. The `constant`, `alice` and `bob` sections are
//! optional. Lines starting with `#` are ignored.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::behavior::{table_index, Behavior};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    inputs: usize,
    outputs: usize,
    joint: Vec<f64>,
    alice: Vec<f64>,
    bob: Vec<f64>,
    constant: f64,
    integer: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// Blocks of size `o - 1`; last-outcome coefficients are zero.
    Reduced,
    /// Blocks of size `o`.
    Full,
}

fn all_integral(values: &[f64]) -> bool {
    values.iter().all(|v| v.fract() == 0.0 && v.abs() < 9.0e15)
}

impl BellFunctional {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            joint: vec![0.0; inputs * inputs * outputs * outputs],
            alice: vec![0.0; inputs * outputs],
            bob: vec![0.0; inputs * outputs],
            constant: 0.0,
            integer: true,
        }
    }

    /// A functional with only joint coefficients, given in `(x, y, a, b)` order.
    pub fn from_joint(inputs: usize, outputs: usize, joint: Vec<f64>) -> Result<Self> {
        Self::from_parts(inputs, outputs, joint, vec![0.0; inputs * outputs], vec![0.0; inputs * outputs], 0.0)
    }

    /// `alice` and `bob` are indexed `[x * o + a]` and `[y * o + b]`.
    pub fn from_parts(
        inputs: usize,
        outputs: usize,
        joint: Vec<f64>,
        alice: Vec<f64>,
        bob: Vec<f64>,
        constant: f64,
    ) -> Result<Self> {
        let (m, o) = (inputs, outputs);
        if joint.len() != m * m * o * o || alice.len() != m * o || bob.len() != m * o {
            return Err(Error::Dimension(format!(
                "functional with m={m}, o={o} got joint {}, alice {}, bob {}",
                joint.len(),
                alice.len(),
                bob.len()
            )));
        }
        let mut f = Self { inputs, outputs, joint, alice, bob, constant, integer: false };
        f.refresh_integer_flag();
        Ok(f)
    }

    pub fn from_fn(
        inputs: usize,
        outputs: usize,
        f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let joint = Behavior::from_fn(inputs, outputs, f).into_entries();
        Self::from_joint(inputs, outputs, joint).expect("consistent sizes")
    }

    fn refresh_integer_flag(&mut self) {
        self.integer = all_integral(&self.joint)
            && all_integral(&self.alice)
            && all_integral(&self.bob)
            && all_integral(&[self.constant]);
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn is_integer(&self) -> bool {
        self.integer
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn alice(&self) -> &[f64] {
        &self.alice
    }

    pub fn bob(&self) -> &[f64] {
        &self.bob
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    #[inline]
    pub fn joint_at(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.joint[table_index(self.inputs, self.outputs, x, y, a, b)]
    }

    #[inline]
    pub fn alice_at(&self, x: usize, a: usize) -> f64 {
        self.alice[x * self.outputs + a]
    }

    #[inline]
    pub fn bob_at(&self, y: usize, b: usize) -> f64 {
        self.bob[y * self.outputs + b]
    }

    pub fn has_marginals(&self) -> bool {
        self.alice.iter().chain(&self.bob).any(|&c| c != 0.0) || self.constant != 0.0
    }

    /// Whether every coefficient touching the last outcome is zero.
    pub fn is_reduced(&self) -> bool {
        let (m, o) = (self.inputs, self.outputs);
        let last = o - 1;
        for x in 0..m {
            if self.alice_at(x, last) != 0.0 || self.bob_at(x, last) != 0.0 {
                return false;
            }
            for y in 0..m {
                for k in 0..o {
                    if self.joint_at(x, y, last, k) != 0.0 || self.joint_at(x, y, k, last) != 0.0 {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|c| c * factor)
    }

    /// Applies `f` to every coefficient, including the constant.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut out = Self {
            inputs: self.inputs,
            outputs: self.outputs,
            joint: self.joint.iter().map(|&c| f(c)).collect(),
            alice: self.alice.iter().map(|&c| f(c)).collect(),
            bob: self.bob.iter().map(|&c| f(c)).collect(),
            constant: f(self.constant),
            integer: false,
        };
        out.refresh_integer_flag();
        out
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.joint
            .iter()
            .chain(&self.alice)
            .chain(&self.bob)
            .chain(std::iter::once(&self.constant))
            .fold(0.0f64, |acc, c| acc.max(c.abs()))
    }

    /// Relabels outputs: outcome `a` of Alice becomes `perm_a[a]`, and
    /// likewise for Bob.
    pub fn relabel_outputs(&self, perm_a: &[usize], perm_b: &[usize]) -> Self {
        let (m, o) = (self.inputs, self.outputs);
        let mut out = Self::zeros(m, o);
        for x in 0..m {
            for y in 0..m {
                for a in 0..o {
                    for b in 0..o {
                        out.joint[table_index(m, o, x, y, perm_a[a], perm_b[b])] = self.joint_at(x, y, a, b);
                    }
                }
            }
            for a in 0..o {
                out.alice[x * o + perm_a[a]] = self.alice_at(x, a);
                out.bob[x * o + perm_b[a]] = self.bob_at(x, a);
            }
        }
        out.constant = self.constant;
        out.integer = self.integer;
        out
    }

    /// Value of the functional on a behavior with matching dimensions.
    pub fn evaluate(&self, p: &Behavior) -> Result<f64> {
        if p.inputs() != self.inputs || p.outputs() != self.outputs {
            return Err(Error::Dimension(format!(
                "functional is (m={}, o={}), behavior is (m={}, o={})",
                self.inputs,
                self.outputs,
                p.inputs(),
                p.outputs()
            )));
        }
        let mut value = self.constant + p.dot(&self.joint);
        if self.alice.iter().chain(&self.bob).any(|&c| c != 0.0) {
            let marg = p.marginals_unchecked();
            value += marg.alice.iter().zip(&self.alice).map(|(p, c)| p * c).sum::<f64>();
            value += marg.bob.iter().zip(&self.bob).map(|(p, c)| p * c).sum::<f64>();
        }
        Ok(value)
    }

    /// Value on the deterministic point `a = alice[x]`, `b = bob[y]`.
    pub fn value_on_maps(&self, alice: &[usize], bob: &[usize]) -> f64 {
        let mut value = self.constant;
        for (x, &a) in alice.iter().enumerate() {
            value += self.alice_at(x, a);
            for (y, &b) in bob.iter().enumerate() {
                value += self.joint_at(x, y, a, b);
            }
        }
        for (y, &b) in bob.iter().enumerate() {
            value += self.bob_at(y, b);
        }
        value
    }

    /// Folds the one-party blocks and the constant into the joint tensor.
    /// The result has the same value on every normalized no-signaling behavior.
    pub fn to_joint_only(&self) -> Self {
        let (m, o) = (self.inputs, self.outputs);
        let mut joint = self.joint.clone();
        let share = self.constant / (m * m) as f64;
        for x in 0..m {
            for y in 0..m {
                for a in 0..o {
                    for b in 0..o {
                        joint[table_index(m, o, x, y, a, b)] +=
                            self.alice_at(x, a) / m as f64 + self.bob_at(y, b) / m as f64 + share;
                    }
                }
            }
        }
        Self::from_joint(m, o, joint).expect("same shape")
    }

    pub fn to_block_text(&self, layout: Layout) -> Result<String> {
        if layout == Layout::Reduced && !self.is_reduced() {
            return Err(Error::Dimension(
                "reduced layout requires zero coefficients on the last outcome".into(),
            ));
        }
        let (m, o) = (self.inputs, self.outputs);
        let k = match layout {
            Layout::Reduced => o - 1,
            Layout::Full => o,
        };
        let fmt_num = |v: f64| -> String {
            if v == 0.0 {
                "0".to_string()
            } else {
                format!("{v}")
            }
        };
        let mut out = String::new();
        writeln!(out, "m {m}").unwrap();
        writeln!(out, "o {o}").unwrap();
        writeln!(
            out,
            "layout {}",
            match layout {
                Layout::Reduced => "reduced",
                Layout::Full => "full",
            }
        )
        .unwrap();
        if self.constant != 0.0 {
            writeln!(out, "constant {}", fmt_num(self.constant)).unwrap();
        }
        let write_matrix = |out: &mut String, rows: Vec<Vec<String>>| {
            let width = rows.iter().flatten().map(|s| s.len()).max().unwrap_or(1);
            for row in rows {
                let line: Vec<String> = row.iter().map(|s| format!("{s:>width$}")).collect();
                writeln!(out, "{}", line.join(" ")).unwrap();
            }
        };
        if self.alice.iter().chain(&self.bob).any(|&c| c != 0.0) {
            for (name, block) in [("alice", &self.alice), ("bob", &self.bob)] {
                writeln!(out, "{name}").unwrap();
                let rows = (0..k)
                    .map(|a| (0..m).map(|x| fmt_num(block[x * o + a])).collect())
                    .collect();
                write_matrix(&mut out, rows);
            }
        }
        writeln!(out, "joint").unwrap();
        let rows = (0..m * k)
            .map(|r| {
                let (x, a) = (r / k, r % k);
                (0..m * k)
                    .map(|c| {
                        let (y, b) = (c / k, c % k);
                        fmt_num(self.joint_at(x, y, a, b))
                    })
                    .collect()
            })
            .collect();
        write_matrix(&mut out, rows);
        Ok(out)
    }

    pub fn parse_block_text(text: &str) -> Result<Self> {
        Parser::new(text).parse()
    }
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            })
            .collect();
        Self { lines, pos: 0 }
    }

    fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
        Error::Parse { line, column, message: message.into() }
    }

    fn end_line(&self) -> usize {
        self.lines.last().map_or(1, |(n, _)| n + 1)
    }

    fn peek_keyword(&self) -> Option<&'a str> {
        self.lines.get(self.pos).and_then(|(_, l)| l.split_whitespace().next())
    }

    fn header_value(&mut self, key: &str) -> Result<&'a str> {
        let Some(&(line, text)) = self.lines.get(self.pos) else {
            return Err(Self::err(self.end_line(), 1, format!("missing `{key}` header")));
        };
        let mut tokens = text.split_whitespace();
        if tokens.next() != Some(key) {
            return Err(Self::err(line, 1, format!("expected `{key}` header")));
        }
        let value = tokens
            .next()
            .ok_or_else(|| Self::err(line, text.len() + 1, format!("`{key}` needs a value")))?;
        self.pos += 1;
        Ok(value)
    }

    fn parse_usize(&mut self, key: &str) -> Result<usize> {
        let line = self.lines.get(self.pos).map_or(0, |l| l.0);
        let value = self.header_value(key)?;
        value
            .parse()
            .map_err(|_| Self::err(line, key.len() + 2, format!("`{value}` is not a count")))
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let Some(&(line, text)) = self.lines.get(self.pos) else {
                return Err(Self::err(
                    self.end_line(),
                    1,
                    format!("block `{name}` is truncated: expected {rows} rows, found {r}"),
                ));
            };
            if r > 0 && matches!(text.split_whitespace().next(), Some("alice" | "bob" | "joint")) {
                return Err(Self::err(
                    line,
                    1,
                    format!("block `{name}` is truncated: expected {rows} rows, found {r}"),
                ));
            }
            let mut row = Vec::with_capacity(cols);
            let mut offset = 0;
            for token in text.split_whitespace() {
                let column = text[offset..].find(token).map_or(offset, |i| offset + i) + 1;
                offset = column - 1 + token.len();
                let value: f64 = token
                    .parse()
                    .map_err(|_| Self::err(line, column, format!("non-numeric token `{token}`")))?;
                row.push(value);
            }
            if row.len() != cols {
                return Err(Self::err(
                    line,
                    1,
                    format!("block `{name}` row has {} entries, expected {cols}", row.len()),
                ));
            }
            out.push(row);
            self.pos += 1;
        }
        Ok(out)
    }

    fn expect_section(&mut self, name: &str) -> Result<()> {
        match self.lines.get(self.pos) {
            Some(&(_, text)) if text.trim() == name => {
                self.pos += 1;
                Ok(())
            }
            Some(&(line, _)) => Err(Self::err(line, 1, format!("expected section `{name}`"))),
            None => Err(Self::err(self.end_line(), 1, format!("missing block `{name}`"))),
        }
    }

    fn parse(mut self) -> Result<BellFunctional> {
        let m = self.parse_usize("m")?;
        let o = self.parse_usize("o")?;
        if m == 0 || o < 2 {
            return Err(Self::err(1, 1, "need m >= 1 and o >= 2"));
        }
        let layout_line = self.lines.get(self.pos).map_or(0, |l| l.0);
        let layout = match self.header_value("layout")? {
            "reduced" => Layout::Reduced,
            "full" => Layout::Full,
            other => return Err(Self::err(layout_line, 8, format!("unknown layout `{other}`"))),
        };
        let k = if layout == Layout::Reduced { o - 1 } else { o };
        let mut f = BellFunctional::zeros(m, o);
        if self.peek_keyword() == Some("constant") {
            let line = self.lines[self.pos].0;
            let value = self.header_value("constant")?;
            f.constant = value
                .parse()
                .map_err(|_| Self::err(line, 10, format!("non-numeric token `{value}`")))?;
        }
        if self.peek_keyword() == Some("alice") {
            for name in ["alice", "bob"] {
                self.expect_section(name)?;
                let rows = self.matrix(name, k, m)?;
                let block = if name == "alice" { &mut f.alice } else { &mut f.bob };
                for (a, row) in rows.iter().enumerate() {
                    for (x, &v) in row.iter().enumerate() {
                        block[x * o + a] = v;
                    }
                }
            }
        }
        self.expect_section("joint")?;
        let rows = self.matrix("joint", m * k, m * k)?;
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                let (x, a, y, b) = (r / k, r % k, c / k, c % k);
                f.joint[table_index(m, o, x, y, a, b)] = v;
            }
        }
        if let Some(&(line, _)) = self.lines.get(self.pos) {
            return Err(Self::err(line, 1, "unexpected trailing content"));
        }
        f.refresh_integer_flag();
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chsh() -> BellFunctional {
        BellFunctional::from_fn(2, 2, |x, y, a, b| if (a ^ b) == (x & y) { 1.0 } else { 0.0 })
    }

    #[test]
    fn zero_functional_evaluates_to_zero() {
        let p = Behavior::from_fn(2, 2, |_, _, _, _| 0.25);
        assert_eq!(BellFunctional::zeros(2, 2).evaluate(&p).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = Behavior::from_fn(2, 3, |_, _, _, _| 1.0 / 9.0);
        assert!(matches!(chsh().evaluate(&p), Err(Error::Dimension(_))));
    }

    #[test]
    fn full_layout_roundtrip_is_byte_identical() {
        let f = chsh();
        let text = f.to_block_text(Layout::Full).unwrap();
        let back = BellFunctional::parse_block_text(&text).unwrap();
        assert_eq!(back, f);
        assert!(back.is_integer());
        assert_eq!(back.to_block_text(Layout::Full).unwrap(), text);
    }

    #[test]
    fn reduced_layout_rejects_last_outcome_coefficients() {
        assert!(chsh().to_block_text(Layout::Reduced).is_err());
    }

    #[test]
    fn marginal_blocks_and_constant_roundtrip() {
        let mut f = BellFunctional::zeros(2, 3);
        f.alice[0] = -2.0;
        f.bob[4] = 0.5;
        f.joint[table_index(2, 3, 1, 0, 1, 0)] = 3.0;
        f.constant = -1.0;
        f.refresh_integer_flag();
        assert!(!f.is_integer());
        let text = f.to_block_text(Layout::Reduced).unwrap();
        let back = BellFunctional::parse_block_text(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_block_text(Layout::Reduced).unwrap(), text);
    }

    #[test]
    fn truncated_file_names_missing_block() {
        let text = chsh().to_block_text(Layout::Full).unwrap();
        let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        let err = BellFunctional::parse_block_text(&cut).unwrap_err().to_string();
        assert!(err.contains("joint"), "{err}");
        let headless = "m 2\no 2\nlayout full\n";
        let err = BellFunctional::parse_block_text(headless).unwrap_err().to_string();
        assert!(err.contains("missing block `joint`"), "{err}");
    }

    #[test]
    fn bad_token_reports_position() {
        let text = "m 1\no 2\nlayout full\njoint\n1 0\n0 x1\n";
        match BellFunctional::parse_block_text(text) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (6, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn joint_only_form_agrees_on_behaviors() {
        let mut f = chsh();
        f.alice[1] = -1.5;
        f.bob[2] = 2.0;
        f.constant = 0.25;
        let g = f.to_joint_only();
        let p = crate::distribution::chsh_optimal_single_copy();
        let lhs = f.evaluate(p.table()).unwrap();
        let rhs = g.evaluate(p.table()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
