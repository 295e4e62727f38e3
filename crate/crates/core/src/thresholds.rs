//! Detection-efficiency thresholds of a Bell functional against an n-copy
//! distribution.
//!
//! With efficiencies `(eta_A, eta_B)` the deflated behavior is bilinear in
//! the two efficiencies, so the functional's value is
//! `eta_A eta_B Q + eta_A (1-eta_B) M_A + (1-eta_A) eta_B M_B + (1-eta_A)(1-eta_B) X`,
//! where `M_A` is the value when only Alice clicks and `M_B` when only Bob does.

use serde::{Deserialize, Serialize};

use crate::distribution::MultiCopyDistribution;
use crate::efficiency::{deflate, EfficiencyModel, Policy};
use crate::error::{Error, Result};
use crate::functional::BellFunctional;
use crate::local::{alice_strategy_count, local_bound_exact, local_bound_heuristic, LocalBound, Provenance, DEFAULT_ENUMERATION_CAP};

/// See-saw settings used when the exact local bound is out of reach.
pub const PROFILE_RESTARTS: usize = 1000;
pub const PROFILE_SEED: u64 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossyParty {
    Alice,
    Bob,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub n: usize,
    pub policy: Policy,
    pub q: f64,
    pub l: f64,
    pub l_provenance: Provenance,
    pub m_a: f64,
    pub m_b: f64,
    pub x: f64,
    pub eta_sym: Option<f64>,
    pub eta_asym: Option<f64>,
    /// Set when both roots of the symmetric quadratic lie in (0, 1].
    pub two_roots: bool,
}

impl ThresholdReport {
    /// Fills in whichever thresholds exist for this profile.
    pub fn with_thresholds(mut self) -> Self {
        if let Ok((eta, two)) = eta_sym_detailed(&self) {
            self.eta_sym = Some(eta);
            self.two_roots = two;
        }
        self.eta_asym = eta_asym(&self, LossyParty::Alice).ok();
        self
    }
}

/// `(Q, M_A, M_B, X)` plus the local bound (exact when Alice has at most
/// [`DEFAULT_ENUMERATION_CAP`] strategies, see-saw otherwise).
pub fn profile(c: &BellFunctional, dist: &MultiCopyDistribution, policy: Policy) -> Result<ThresholdReport> {
    let local = if alice_strategy_count(c.inputs(), c.outputs()) <= DEFAULT_ENUMERATION_CAP as f64 {
        local_bound_exact(c)?
    } else {
        local_bound_heuristic(c, PROFILE_RESTARTS, PROFILE_SEED)
    };
    profile_with_local(c, dist, policy, &local)
}

pub fn profile_with_local(
    c: &BellFunctional,
    dist: &MultiCopyDistribution,
    policy: Policy,
    local: &LocalBound,
) -> Result<ThresholdReport> {
    let expected = policy.deflated_outputs(dist.outputs());
    if c.inputs() != dist.inputs() || c.outputs() != expected {
        return Err(Error::Dimension(format!(
            "functional is (m={}, o={}), deflated distribution is (m={}, o={expected})",
            c.inputs(),
            c.outputs(),
            dist.inputs()
        )));
    }
    let value = |eta_a: f64, eta_b: f64| -> Result<f64> {
        c.evaluate(deflate(dist, EfficiencyModel::new(eta_a, eta_b, policy)?).table())
    };
    Ok(ThresholdReport {
        n: dist.copies(),
        policy,
        q: value(1.0, 1.0)?,
        l: local.value,
        l_provenance: local.provenance,
        m_a: value(1.0, 0.0)?,
        m_b: value(0.0, 1.0)?,
        x: value(0.0, 0.0)?,
        eta_sym: None,
        eta_asym: None,
        two_roots: false,
    })
}

pub fn eta_sym(report: &ThresholdReport) -> Result<f64> {
    eta_sym_detailed(report).map(|(eta, _)| eta)
}

/// Smallest `eta` in (0, 1] with `eta^2 Q + eta(1-eta)(M_A+M_B) + (1-eta)^2 X = L`,
/// and whether a second root also lies in (0, 1].
pub fn eta_sym_detailed(report: &ThresholdReport) -> Result<(f64, bool)> {
    let ThresholdReport { q, l, x, .. } = *report;
    let m = report.m_a + report.m_b;
    if q <= l {
        return Err(Error::Threshold(format!("Q = {q} does not exceed L = {l}")));
    }
    let scale = 1.0 + q.abs().max(l.abs()).max(m.abs()).max(x.abs());
    let in_range = |eta: f64| eta > 0.0 && eta <= 1.0 + 1e-12;
    if (x - l).abs() <= 1e-12 * scale {
        let eta = (2.0 * l - m) / (q + l - m);
        return if in_range(eta) {
            Ok((eta.min(1.0), false))
        } else {
            Err(Error::Threshold(format!("closed-form threshold {eta} outside (0, 1]")))
        };
    }
    quadratic_roots(q, l, m, x, scale)
}

fn quadratic_roots(q: f64, l: f64, m: f64, x: f64, scale: f64) -> Result<(f64, bool)> {
    let in_range = |eta: f64| eta > 0.0 && eta <= 1.0 + 1e-12;
    let a = q - m + x;
    let b = m - 2.0 * x;
    let c = x - l;
    let mut roots = Vec::new();
    if a.abs() <= 1e-14 * scale {
        if b != 0.0 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= -1e-12 * scale * scale {
            let s = disc.max(0.0).sqrt();
            // numerically stable pair
            let t = -0.5 * (b + b.signum() * s);
            if t != 0.0 {
                roots.push(t / a);
                roots.push(c / t);
            } else {
                roots.push(0.0);
            }
        }
    }
    let mut valid: Vec<f64> = roots.into_iter().filter(|&r| in_range(r)).map(|r| r.min(1.0)).collect();
    valid.sort_by(f64::total_cmp);
    valid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    match valid.first() {
        Some(&eta) => Ok((eta, valid.len() > 1)),
        None => Err(Error::Threshold("no root of the symmetric threshold equation in (0, 1]".into())),
    }
}

/// Threshold for one lossy party while the other detects perfectly:
/// `eta = (L - M) / (Q - M)`, where `M` is the value when only the perfect
/// party clicks.
pub fn eta_asym(report: &ThresholdReport, lossy: LossyParty) -> Result<f64> {
    let m = match lossy {
        LossyParty::Alice => report.m_b,
        LossyParty::Bob => report.m_a,
    };
    if report.q <= m {
        return Err(Error::Threshold(format!("Q = {} does not exceed the one-sided value {m}", report.q)));
    }
    let eta = (report.l - m) / (report.q - m);
    if eta > 0.0 && eta <= 1.0 + 1e-12 {
        Ok(eta.min(1.0))
    } else {
        Err(Error::Threshold(format!("asymmetric threshold {eta} outside (0, 1]")))
    }
}

/// Thresholds of a correlation-type functional (vanishing one-sided values)
/// with quantum-to-local ratio `q_over_l`: `(2 / (r + 1), 1 / r)`.
pub fn correlation_thresholds(q_over_l: f64) -> Result<(f64, f64)> {
    if !(q_over_l > 1.0) {
        return Err(Error::Threshold(format!("ratio {q_over_l} must exceed 1")));
    }
    Ok((2.0 / (q_over_l + 1.0), 1.0 / q_over_l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{chsh_optimal_single_copy, tensor_power};
    use std::f64::consts::SQRT_2;

    fn synthetic(q: f64, l: f64, m: f64, x: f64) -> ThresholdReport {
        ThresholdReport {
            n: 1,
            policy: Policy::LastOutcome,
            q,
            l,
            l_provenance: Provenance::Exact,
            m_a: m,
            m_b: m,
            x,
            eta_sym: None,
            eta_asym: None,
            two_roots: false,
        }
    }

    #[test]
    fn chsh_profile_and_thresholds() {
        let chsh = BellFunctional::from_fn(2, 2, |x, y, a, b| if (a ^ b) == (x & y) { 1.0 } else { 0.0 });
        let dist = tensor_power(&chsh_optimal_single_copy(), 1).unwrap();
        let r = profile(&chsh, &dist, Policy::LastOutcome).unwrap();
        assert!((r.q - (2.0 + SQRT_2)).abs() < 1e-12);
        assert!((r.m_a - 2.0).abs() < 1e-12 && (r.m_b - 2.0).abs() < 1e-12);
        assert_eq!((r.x, r.l), (3.0, 3.0));
        assert!((eta_sym(&r).unwrap() - 2.0 * (SQRT_2 - 1.0)).abs() < 1e-12);
        assert!((eta_asym(&r, LossyParty::Alice).unwrap() - 1.0 / SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn quadratic_reduces_to_closed_form() {
        for (q, l, m) in [(5.0, 3.0, 2.0), (2.0 + SQRT_2, 3.0, 2.0), (1.6568542494923797, 0.0, -3.5)] {
            let closed = eta_sym(&synthetic(q, l, m, l)).unwrap();
            let (quadratic, two) = quadratic_roots(q, l, 2.0 * m, l, 10.0).unwrap();
            assert!((closed - quadratic).abs() < 1e-12);
            assert!(!two);
            let nudged = eta_sym(&synthetic(q, l, m, l - 1e-9)).unwrap();
            assert!((closed - nudged).abs() < 1e-8);
        }
    }

    #[test]
    fn quadratic_root_solves_equation() {
        let r = synthetic(7.0, 2.0, -1.5, 0.5);
        let eta = eta_sym(&r).unwrap();
        let v = eta * eta * r.q + eta * (1.0 - eta) * (r.m_a + r.m_b) + (1.0 - eta).powi(2) * r.x;
        assert!((v - r.l).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_formula() {
        let q = 4.5 * (1.0 + SQRT_2) - 9.0;
        let r = ThresholdReport { m_b: -2.25, ..synthetic(q, 0.0, 0.0, 0.0) };
        assert!((eta_asym(&r, LossyParty::Alice).unwrap() - (1.0 + 2.0 * SQRT_2) / 7.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_ratio() {
        let (s, a) = correlation_thresholds(1.4359).unwrap();
        assert!((s - 0.8211).abs() < 5e-5 && (a - 0.6964).abs() < 5e-5);
        assert!((correlation_thresholds(SQRT_2).unwrap().0 - 2.0 * (SQRT_2 - 1.0)).abs() < 1e-12);
        assert_eq!(correlation_thresholds(2.0).unwrap(), (2.0 / 3.0, 0.5));
        assert!(correlation_thresholds(1.0).is_err());
    }

    #[test]
    fn no_threshold_without_violation() {
        assert!(eta_sym(&synthetic(3.0, 3.0, 2.0, 3.0)).is_err());
    }
}
