//! Shooting over the initial slope `a = y'(0)`.
//!
//! Each shot integrates `y'' − y' = y³ − y`, `y(0) = 0`, `y'(0) = a` and is
//! decided by whichever happens first: `y` rising through 1 (the slope lies
//! in S⁺) or `y'` falling through 0 (S⁻). Both sets are open, so bisection
//! between one point of each converges to the unique slope `a*` that
//! belongs to neither.

mod lemmas;
mod manifold;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::events::localization_width;
use crate::ode::{integrate_x, Direction, EventSpec, StepControl, Termination, Trajectory, XState};

pub use lemmas::{
    energy_identity, lemma2_bound, lemma2_witness, linear_limit_report, linear_limit_w,
    linear_limit_w_prime, EnergyReport, LinearLimitReport, X_MINUS,
};
pub use manifold::{connecting_orbit, ConnectingOrbit, MANIFOLD_SPREAD};

pub const EVENT_CROSSED_ONE: &str = "crossed_one";
pub const EVENT_DERIV_ZERO: &str = "deriv_zero";

/// Default decision horizon in `x`.
pub const DEFAULT_X_MAX: f64 = 40.0;
/// Horizon doubling stops here.
pub const X_MAX_CAP: f64 = 200.0;
/// Distance from 1 required for [`OutcomeTag::ConvergedToOne`].
pub const FAR_TOL: f64 = 1e-6;

/// Upper seed; just above 1/√2, so every shot from here crosses 1.
pub const SEED_HI: f64 = 0.71;
pub const SEED_LO_START: f64 = 0.35;
pub const SEED_FLOOR: f64 = 1e-8;
/// Smallest bisection tolerance accepted by [`find_astar`].
pub const MIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeTag {
    CrossedOne,
    DerivCrossedZero,
    ConvergedToOne,
    Undetermined,
}

impl OutcomeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeTag::CrossedOne => "CrossedOne",
            OutcomeTag::DerivCrossedZero => "DerivCrossedZero",
            OutcomeTag::ConvergedToOne => "ConvergedToOne",
            OutcomeTag::Undetermined => "Undetermined",
        }
    }

    /// True for the two tags bisection can act on.
    pub fn is_decisive(self) -> bool {
        matches!(self, OutcomeTag::CrossedOne | OutcomeTag::DerivCrossedZero)
    }
}

impl std::fmt::Display for OutcomeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classification of one shot.
#[derive(Debug, Clone)]
pub struct ShotOutcome {
    pub a: f64,
    pub tag: OutcomeTag,
    /// Coordinate of the deciding event.
    pub location: Option<f64>,
    pub trajectory: Trajectory,
}

/// Terminal events `y − 1` rising and `y'` falling through zero.
pub fn shot_events(terminal: bool) -> EventSpec {
    EventSpec::new()
        .with(EVENT_CROSSED_ONE, Direction::Rising, terminal, |_, s| {
            s[0] - 1.0
        })
        .with(EVENT_DERIV_ZERO, Direction::Falling, terminal, |_, s| s[1])
}

/// Decide from the terminal hits of a trajectory integrated with
/// [`shot_events`] (or the deficit-chart equivalents, which reuse the labels).
pub(crate) fn decide(tr: &Trajectory) -> (OutcomeTag, Option<f64>) {
    let Termination::Event(_) = tr.termination() else {
        return (OutcomeTag::Undetermined, None);
    };
    let mut terminal = tr.hits().iter().filter(|h| h.terminal);
    let Some(first) = terminal.next() else {
        return (OutcomeTag::Undetermined, None);
    };
    let tied = terminal.any(|h| {
        h.label != first.label
            && (h.location - first.location).abs() <= localization_width(first.location)
    });
    if tied {
        return (OutcomeTag::Undetermined, None);
    }
    let tag = match first.label.as_str() {
        EVENT_CROSSED_ONE => OutcomeTag::CrossedOne,
        EVENT_DERIV_ZERO => OutcomeTag::DerivCrossedZero,
        _ => return (OutcomeTag::Undetermined, None),
    };
    (tag, Some(first.location))
}

/// Classify the slope `a > 0` on `[0, x_max]`.
pub fn classify(a: f64, ctrl: &StepControl, x_max: f64) -> Result<ShotOutcome> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidInput(format!(
            "shooting slope must be positive, got {a}"
        )));
    }
    let tr = integrate_x(XState::new(0.0, 0.0, a), ctrl, &shot_events(true), x_max)?;
    if let Termination::StepLimit = tr.termination() {
        return Err(Error::StepLimitExceeded {
            t: tr.end(),
            steps: ctrl.max_steps,
        });
    }
    let (mut tag, location) = decide(&tr);
    if tag == OutcomeTag::Undetermined && *tr.termination() == Termination::ReachedEnd {
        let s = tr.last_state();
        let (y, yp) = (s[0], s[1]);
        if y > 0.0 && y < 1.0 && yp > 0.0 && (1.0 - y) < FAR_TOL {
            tag = OutcomeTag::ConvergedToOne;
        }
    }
    Ok(ShotOutcome {
        a,
        tag,
        location,
        trajectory: tr,
    })
}

/// Bracket `(lo, hi)` with `lo` in S⁻ and `hi` in S⁺.
///
/// `hi` is fixed at [`SEED_HI`]; `lo` halves from [`SEED_LO_START`] until a
/// derivative crossing is observed.
pub fn seed_bracket(ctrl: &StepControl, x_max: f64) -> Result<(f64, f64)> {
    let hi = SEED_HI;
    if classify(hi, ctrl, x_max)?.tag != OutcomeTag::CrossedOne {
        return Err(Error::SeedFailure { floor: SEED_FLOOR });
    }
    let mut lo = SEED_LO_START;
    while lo > SEED_FLOOR {
        if classify(lo, ctrl, x_max)?.tag == OutcomeTag::DerivCrossedZero {
            return Ok((lo, hi));
        }
        lo *= 0.5;
    }
    Err(Error::SeedFailure { floor: SEED_FLOOR })
}

/// Result of the bisection for `a*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstarResult {
    pub a_star: f64,
    /// `(lo, hi)` with `lo` in S⁻ and `hi` in S⁺ at `x_max_used`.
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub x_max_used: f64,
    /// Every classification performed, in order.
    pub log: Vec<(f64, OutcomeTag)>,
}

impl AstarResult {
    pub fn bracket_lo(&self) -> f64 {
        self.bracket.0
    }

    pub fn bracket_hi(&self) -> f64 {
        self.bracket.1
    }

    pub fn width(&self) -> f64 {
        self.bracket.1 - self.bracket.0
    }
}

enum Resolved {
    Tag(OutcomeTag),
    CapExceeded,
}

/// Classify `a`, doubling the horizon on indecisive outcomes.
fn resolve(
    a: f64,
    ctrl: &StepControl,
    x_max: &mut f64,
    log: &mut Vec<(f64, OutcomeTag)>,
) -> Result<Resolved> {
    loop {
        let tag = classify(a, ctrl, *x_max)?.tag;
        log.push((a, tag));
        if tag.is_decisive() {
            return Ok(Resolved::Tag(tag));
        }
        if *x_max >= X_MAX_CAP {
            return Ok(Resolved::CapExceeded);
        }
        *x_max = (*x_max * 2.0).min(X_MAX_CAP);
    }
}

/// Bisect on the classifier until the bracket is no wider than `tol`.
///
/// Requires `lo` in S⁻ and `hi` in S⁺. Indecisive midpoints extend the
/// horizon (doubling, capped at [`X_MAX_CAP`]); ConvergedToOne is never
/// used as a decision.
pub fn find_astar(
    bracket: (f64, f64),
    tol: f64,
    ctrl: &StepControl,
    x_max: f64,
) -> Result<AstarResult> {
    let (mut lo, mut hi) = bracket;
    if !(tol >= MIN_TOL) || !tol.is_finite() {
        return Err(Error::Precondition(format!(
            "tol {tol:e} below {MIN_TOL:e}"
        )));
    }
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Precondition(format!(
            "bracket ({lo}, {hi}) must satisfy 0 < lo < hi"
        )));
    }
    if !(x_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "x_max must be positive, got {x_max}"
        )));
    }
    let mut x_max = x_max;
    let mut log = Vec::new();

    match resolve(lo, ctrl, &mut x_max, &mut log)? {
        Resolved::Tag(OutcomeTag::DerivCrossedZero) => {}
        _ => {
            return Err(Error::Precondition(format!(
                "lower endpoint {lo} is not in S- (log: {log:?})"
            )))
        }
    }
    match resolve(hi, ctrl, &mut x_max, &mut log)? {
        Resolved::Tag(OutcomeTag::CrossedOne) => {}
        _ => {
            return Err(Error::Precondition(format!(
                "upper endpoint {hi} is not in S+ (log: {log:?})"
            )))
        }
    }

    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        match resolve(mid, ctrl, &mut x_max, &mut log)? {
            Resolved::Tag(OutcomeTag::CrossedOne) => hi = mid,
            Resolved::Tag(_) => lo = mid,
            Resolved::CapExceeded => {
                let partial = AstarResult {
                    a_star: 0.5 * (lo + hi),
                    bracket: (lo, hi),
                    iterations,
                    x_max_used: x_max,
                    log,
                };
                return Err(Error::XMaxCapExceeded {
                    a: mid,
                    partial: Box::new(partial),
                });
            }
        }
    }

    Ok(AstarResult {
        a_star: 0.5 * (lo + hi),
        bracket: (lo, hi),
        iterations,
        x_max_used: x_max,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn ctrl() -> StepControl {
        StepControl::default()
    }

    #[test]
    fn classify_upper_regime() {
        let out = classify(1.0, &ctrl(), DEFAULT_X_MAX).unwrap();
        assert_eq!(out.tag, OutcomeTag::CrossedOne);
        assert!(out.location.unwrap() < 2f64.sqrt() + 1.0);

        let out = classify(0.75, &ctrl(), DEFAULT_X_MAX).unwrap();
        assert_eq!(out.tag, OutcomeTag::CrossedOne);
    }

    #[test]
    fn classify_small_slope() {
        let out = classify(0.01, &ctrl(), DEFAULT_X_MAX).unwrap();
        assert_eq!(out.tag, OutcomeTag::DerivCrossedZero);
        assert!(out.location.unwrap() < X_MINUS);
    }

    #[test]
    fn crossed_one_has_positive_derivative_before_crossing() {
        for a in [0.2, 0.5, 0.75, 3.0] {
            let out = classify(a, &ctrl(), DEFAULT_X_MAX).unwrap();
            assert_eq!(out.tag, OutcomeTag::CrossedOne);
            let loc = out.location.unwrap();
            for (x, s) in out.trajectory.nodes() {
                if x < loc {
                    assert!(s[1] > 0.0, "a = {a}: y' = {} at x = {x}", s[1]);
                }
            }
        }
    }

    #[test]
    fn classify_rejects_nonpositive() {
        assert!(classify(0.0, &ctrl(), 10.0).is_err());
        assert!(classify(-0.3, &ctrl(), 10.0).is_err());
        assert!(classify(f64::NAN, &ctrl(), 10.0).is_err());
    }

    #[test]
    fn short_horizon_is_undetermined() {
        let out = classify(0.01, &ctrl(), 1.0).unwrap();
        assert_eq!(out.tag, OutcomeTag::Undetermined);
        assert!(out.location.is_none());
    }

    #[test]
    fn seed_bracket_defaults() {
        let (lo, hi) = seed_bracket(&ctrl(), DEFAULT_X_MAX).unwrap();
        assert_eq!(hi, SEED_HI);
        assert!(hi > FRAC_1_SQRT_2);
        assert!(lo <= SEED_LO_START);
        assert_eq!(
            classify(lo, &ctrl(), DEFAULT_X_MAX).unwrap().tag,
            OutcomeTag::DerivCrossedZero
        );
    }

    #[test]
    fn seed_bracket_truncated_horizon_fails() {
        assert!(matches!(
            seed_bracket(&ctrl(), 1.0),
            Err(Error::SeedFailure { .. })
        ));
    }

    #[test]
    fn coarse_bisection_iteration_count() {
        let res = find_astar((0.01, 0.71), 1e-3, &ctrl(), DEFAULT_X_MAX).unwrap();
        assert!(res.iterations <= 12);
        assert!(res.width() <= 1e-3);
        assert!(res.a_star > 0.0 && res.a_star < FRAC_1_SQRT_2);
    }

    #[test]
    fn invalid_bracket_is_rejected() {
        let err = find_astar((0.8, 1.0), 1e-6, &ctrl(), DEFAULT_X_MAX).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert!(find_astar((0.01, 0.71), 1e-13, &ctrl(), DEFAULT_X_MAX).is_err());
    }

    #[test]
    fn astar_json_shape() {
        let res = find_astar((0.01, 0.71), 1e-2, &ctrl(), DEFAULT_X_MAX).unwrap();
        let v = serde_json::to_value(&res).unwrap();
        let obj = v.as_object().unwrap();
        for key in ["a_star", "bracket", "iterations", "x_max_used", "log"] {
            assert!(obj.contains_key(key), "missing {key}");
        }
        assert_eq!(obj["bracket"].as_array().unwrap().len(), 2);
        let first = &obj["log"].as_array().unwrap()[0];
        assert_eq!(first[1].as_str(), Some("DerivCrossedZero"));
    }
}
