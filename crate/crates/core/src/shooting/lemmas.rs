//! Numerically checkable consequences of the two shooting regimes: fast
//! crossing for large slopes, the linear limit for small ones, and the
//! first integral of the shifted equation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use super::{classify, shot_events, OutcomeTag, DEFAULT_X_MAX, EVENT_DERIV_ZERO};
use crate::checks::CheckReport;
use crate::error::{Error, Result};
use crate::ode::{
    integrate, integrate_x, Direction, EventSpec, StepControl, XEnergySystem, XState,
};

/// End of the window on which the linear limit is compared, `5π/(3√3)`.
pub const X_MINUS: f64 = 5.0 * PI / (3.0 * 1.732_050_807_568_877_2);

/// Crossing bound `(a² − 1/2)^{−1/2} + 1` for `a > 1/√2`.
pub fn lemma2_bound(a: f64) -> f64 {
    (a * a - 0.5).powf(-0.5) + 1.0
}

/// Check that a shot with `a > 1/√2` crosses 1 no later than
/// [`lemma2_bound`] with `y' > 0` on every node before.
pub fn lemma2_witness(a: f64, ctrl: &StepControl) -> Result<CheckReport> {
    if !(a > FRAC_1_SQRT_2) || !a.is_finite() {
        return Err(Error::Precondition(format!(
            "crossing witness needs a > 1/sqrt(2), got {a}"
        )));
    }
    let bound = lemma2_bound(a);
    let out = classify(a, ctrl, bound + 1.0)?;
    let last = |tr: &crate::ode::Trajectory| {
        let s = tr.last_state();
        Some((tr.end(), s[0], s[1]))
    };
    let x1 = match (out.tag, out.location) {
        (OutcomeTag::CrossedOne, Some(x1)) if x1 <= bound => x1,
        _ => {
            return Err(Error::CheckFailed {
                check: "lemma2".into(),
                detail: format!(
                    "a = {a}: expected a crossing of 1 before x+ = {bound}, got {} at {:?}",
                    out.tag, out.location
                ),
                node: last(&out.trajectory),
            })
        }
    };
    let mut min_yp = f64::INFINITY;
    for (x, s) in out.trajectory.nodes() {
        if s[1] <= 0.0 {
            return Err(Error::CheckFailed {
                check: "lemma2".into(),
                detail: format!("a = {a}: y' = {} <= 0 before the crossing", s[1]),
                node: Some((x, s[0], s[1])),
            });
        }
        min_yp = min_yp.min(s[1]);
    }
    Ok(CheckReport::pass("lemma2")
        .metric("a", a)
        .metric("x1", x1)
        .metric("x_plus", bound)
        .metric("min_yp", min_yp))
}

/// `W(x) = (2/√3) e^{x/2} sin(√3 x / 2)`, the solution of `W'' − W' + W = 0`
/// with `W(0) = 0`, `W'(0) = 1`.
pub fn linear_limit_w(x: f64) -> f64 {
    let s3 = 3f64.sqrt();
    2.0 / s3 * (0.5 * x).exp() * (0.5 * s3 * x).sin()
}

pub fn linear_limit_w_prime(x: f64) -> f64 {
    let s3 = 3f64.sqrt();
    let k = 0.5 * s3 * x;
    (0.5 * x).exp() * (k.sin() / s3 + k.cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearLimitReport {
    pub a: f64,
    /// `sup |y(x, a)/a − W(x)|` over `[0, X_MINUS]`.
    pub sup_error: f64,
    /// First zero of `y'`, if it falls in the window.
    pub deriv_zero_at: Option<f64>,
    /// Minimum of `y` over the window, excluding `x = 0`.
    pub min_y: f64,
}

const LINEAR_LIMIT_SAMPLES: usize = 4000;

/// Compare the rescaled shot `y(x, a)/a` against [`linear_limit_w`] on
/// `[0, X_MINUS]`, sampling the dense output on a uniform grid.
pub fn linear_limit_report(a: f64, ctrl: &StepControl) -> Result<LinearLimitReport> {
    if !(a > 0.0) {
        return Err(Error::Precondition(format!(
            "linear limit needs a > 0, got {a}"
        )));
    }
    let events = EventSpec::new().with(EVENT_DERIV_ZERO, Direction::Falling, false, |_, s| s[1]);
    let tr = integrate_x(XState::new(0.0, 0.0, a), ctrl, &events, X_MINUS)?;
    if tr.end() < X_MINUS {
        return Err(Error::CheckFailed {
            check: "lemma3".into(),
            detail: format!(
                "integration stopped at x = {} ({:?})",
                tr.end(),
                tr.termination()
            ),
            node: None,
        });
    }
    let mut sup: f64 = 0.0;
    let mut min_y = f64::INFINITY;
    let mut buf = [0.0; 2];
    let mut visit = |x: f64, y: f64| {
        sup = sup.max((y / a - linear_limit_w(x)).abs());
        if x > 0.0 {
            min_y = min_y.min(y);
        }
    };
    for (x, s) in tr.nodes() {
        visit(x, s[0]);
    }
    for i in 0..=LINEAR_LIMIT_SAMPLES {
        let x = X_MINUS * i as f64 / LINEAR_LIMIT_SAMPLES as f64;
        tr.interpolate_into(x, &mut buf);
        visit(x, buf[0]);
    }
    Ok(LinearLimitReport {
        a,
        sup_error: sup,
        deriv_zero_at: tr.first_hit(EVENT_DERIV_ZERO).map(|h| h.location),
        min_y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub a: f64,
    /// `a² − 1/2`.
    pub constant: f64,
    /// Largest deviation from `constant` relative to `|constant|`.
    pub max_rel_deviation: f64,
    /// End of the pre-event range that was checked.
    pub x_end: f64,
    pub nodes: usize,
}

/// Track `v'² − 2v²(1 − v/2)² − 2∫₀ˣ v'² ds` with `v = 1 − y` along the shot
/// up to its first event; the exact value is `a² − 1/2` throughout.
pub fn energy_identity(a: f64, ctrl: &StepControl) -> Result<EnergyReport> {
    if !a.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite slope {a}")));
    }
    let tr = integrate(
        &XEnergySystem,
        0.0,
        &[0.0, a, 0.0],
        ctrl,
        &shot_events(true),
        DEFAULT_X_MAX,
    )?;
    let constant = a * a - 0.5;
    let scale = if constant == 0.0 { 1.0 } else { constant.abs() };
    let mut worst: f64 = 0.0;
    for (_, s) in tr.nodes() {
        let v = 1.0 - s[0];
        let vp = -s[1];
        let q = v * (1.0 - 0.5 * v);
        let e = vp * vp - 2.0 * q * q - 2.0 * s[2];
        worst = worst.max((e - constant).abs() / scale);
    }
    Ok(EnergyReport {
        a,
        constant,
        max_rel_deviation: worst,
        x_end: tr.end(),
        nodes: tr.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_values() {
        assert!((lemma2_bound(1.0) - (2f64.sqrt() + 1.0)).abs() < 1e-15);
        assert!((lemma2_bound(5.0) - (24.5f64.powf(-0.5) + 1.0)).abs() < 1e-15);
        assert!(lemma2_bound(5.0) < 1.2021);
    }

    #[test]
    fn x_minus_value() {
        assert!((X_MINUS - 5.0 * PI / (3.0 * 3f64.sqrt())).abs() < 1e-15);
        assert!((X_MINUS - 3.0230).abs() < 1e-4);
    }

    #[test]
    fn w_closed_form_values() {
        assert_eq!(linear_limit_w(0.0), 0.0);
        assert!((linear_limit_w_prime(0.0) - 1.0).abs() < 1e-15);
        assert!(linear_limit_w(2.0 * PI / 3f64.sqrt()).abs() < 1e-14);
        assert!(linear_limit_w(X_MINUS) > 0.0);
        assert!(linear_limit_w_prime(X_MINUS) < 0.0);
    }

    #[test]
    fn w_solves_linear_equation() {
        // Central differences of W' against W'' = W' − W.
        let h = 1e-4;
        for x in [0.3, 1.1, 2.5] {
            let wpp = (linear_limit_w_prime(x + h) - linear_limit_w_prime(x - h)) / (2.0 * h);
            let wp_fd = (linear_limit_w(x + h) - linear_limit_w(x - h)) / (2.0 * h);
            assert!((wp_fd - linear_limit_w_prime(x)).abs() < 1e-7);
            assert!((wpp - (linear_limit_w_prime(x) - linear_limit_w(x))).abs() < 1e-7);
        }
    }

    #[test]
    fn witness_at_unit_and_large_slope() {
        let ctrl = StepControl::default();
        let r = lemma2_witness(1.0, &ctrl).unwrap();
        assert!(r.passed);
        assert!(r.metrics["x1"] < 2.41421);
        let r = lemma2_witness(5.0, &ctrl).unwrap();
        assert!(r.metrics["x1"] < 1.2020);
    }

    #[test]
    fn witness_rejects_small_slope() {
        assert!(matches!(
            lemma2_witness(0.5, &StepControl::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn energy_constant_along_shots() {
        for a in [0.3, 0.8, 1.0] {
            let r = energy_identity(a, &StepControl::default()).unwrap();
            assert!(r.max_rel_deviation < 1e-8, "a = {a}: {r:?}");
        }
    }
}
