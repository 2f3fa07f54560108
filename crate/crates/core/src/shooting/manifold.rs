//! The connecting orbit at `a*`, followed far into the saddle's stable
//! manifold.
//!
//! A single forward shot from any representable slope leaves the saddle
//! `(1, 0)` once its unstable component (growth `e^{2x}`) overtakes the
//! decaying deficit `1 − y ~ c e^{−x}`; in double precision that happens
//! around `x ≈ 8`. The orbit is therefore assembled from segments. Each
//! segment restarts at the last trustworthy point of the previous one,
//! keeps `u = ln(1 − y)` fixed and re-bisects `p = y'/(y − 1)` with the same
//! crossing classifier, now acting on the restart state. A segment is kept
//! only while its two bracketing shots agree to [`MANIFOLD_SPREAD`], so every
//! retained node lies within that distance of the true orbit (which is
//! sandwiched between the two shots).

use super::{decide, AstarResult, OutcomeTag, EVENT_CROSSED_ONE, EVENT_DERIV_ZERO};
use crate::error::{Error, Result};
use crate::ode::{
    deficit_to_x, integrate, DeficitSystem, Direction, EventSpec, StepControl, Termination,
    Trajectory,
};

/// Largest disagreement in `(u, p)` between the two bracketing shots of a
/// segment for which nodes are kept.
pub const MANIFOLD_SPREAD: f64 = 1e-9;

/// `p` below this means `y` is about to reach 1.
const ESCAPE_P: f64 = -3.0;
const CHART_HORIZON: f64 = 40.0;
const MIN_SEGMENT: f64 = 0.25;
const RESTART_HALF_WIDTH: f64 = 1e-8;
const MAX_HALF_WIDTH: f64 = 1e-2;

fn chart_events() -> EventSpec {
    EventSpec::new()
        .with(EVENT_CROSSED_ONE, Direction::Falling, true, |_, s| {
            s[1] - ESCAPE_P
        })
        .with(EVENT_DERIV_ZERO, Direction::Rising, true, |_, s| s[1])
}

fn chart_shot(x0: f64, u0: f64, p0: f64, ctrl: &StepControl) -> Result<(OutcomeTag, Trajectory)> {
    let tr = integrate(
        &DeficitSystem,
        x0,
        &[u0, p0],
        ctrl,
        &chart_events(),
        x0 + CHART_HORIZON,
    )?;
    if let Termination::StepLimit = tr.termination() {
        return Err(Error::StepLimitExceeded {
            t: tr.end(),
            steps: ctrl.max_steps,
        });
    }
    Ok((decide(&tr).0, tr))
}

/// Bracketing pair at a restart point: `p_d` falls back (derivative
/// crossing), `p_c` escapes through 1, `p_c < p_d`.
struct Bracket {
    p_d: f64,
    p_c: f64,
    tr_d: Trajectory,
    tr_c: Trajectory,
}

fn verified_bracket(
    x0: f64,
    u0: f64,
    mut p_d: f64,
    mut p_c: f64,
    ctrl: &StepControl,
) -> Result<Bracket> {
    let mut widen = (p_d - p_c).max(RESTART_HALF_WIDTH);
    loop {
        let (tag_d, tr_d) = chart_shot(x0, u0, p_d, ctrl)?;
        let (tag_c, tr_c) = chart_shot(x0, u0, p_c, ctrl)?;
        if tag_d == OutcomeTag::DerivCrossedZero && tag_c == OutcomeTag::CrossedOne {
            return Ok(Bracket {
                p_d,
                p_c,
                tr_d,
                tr_c,
            });
        }
        if tag_d != OutcomeTag::DerivCrossedZero {
            p_d += widen;
        }
        if tag_c != OutcomeTag::CrossedOne {
            p_c -= widen;
        }
        widen *= 10.0;
        if widen > MAX_HALF_WIDTH {
            return Err(Error::Precondition(format!(
                "no manifold bracket around p in ({p_c}, {p_d}) at x = {x0}"
            )));
        }
    }
}

fn bisect(x0: f64, u0: f64, mut b: Bracket, ctrl: &StepControl) -> Result<Bracket> {
    loop {
        let mid = 0.5 * (b.p_d + b.p_c);
        if mid <= b.p_c || mid >= b.p_d {
            return Ok(b);
        }
        let (tag, tr) = chart_shot(x0, u0, mid, ctrl)?;
        match tag {
            OutcomeTag::DerivCrossedZero => {
                b.p_d = mid;
                b.tr_d = tr;
            }
            OutcomeTag::CrossedOne => {
                b.p_c = mid;
                b.tr_c = tr;
            }
            _ => return Ok(b),
        }
    }
}

/// Index of the last node of `b.tr_d` at which both shots still agree.
fn valid_until(b: &Bracket) -> usize {
    let mut other = [0.0; 2];
    let mut last = 0;
    for (i, (x, s)) in b.tr_d.nodes().enumerate().skip(1) {
        if !b.tr_c.interpolate_into(x, &mut other) {
            break;
        }
        let spread = (s[0] - other[0]).abs().max((s[1] - other[1]).abs());
        if spread > MANIFOLD_SPREAD {
            break;
        }
        last = i;
    }
    last
}

/// Connecting orbit in the deficit chart, `(x, u, p)`.
#[derive(Debug, Clone)]
pub struct ConnectingOrbit {
    pub trajectory: Trajectory,
    /// `y'(0)` of the first segment after refinement inside the bracket.
    pub initial_slope: f64,
    /// Restart coordinates.
    pub joints: Vec<f64>,
}

impl ConnectingOrbit {
    /// The orbit as `(x, y, y')`.
    pub fn x_trajectory(&self) -> Result<Trajectory> {
        deficit_to_x(&self.trajectory)
    }
}

/// Follow the orbit through `a*` out to `x_max`.
///
/// The first segment starts from `y(0) = 0` with the slope refined inside
/// (or within `1e-8` of) the bracket of `astar`.
pub fn connecting_orbit(
    astar: &AstarResult,
    x_max: f64,
    ctrl: &StepControl,
) -> Result<ConnectingOrbit> {
    if !(x_max > 0.0) || !x_max.is_finite() {
        return Err(Error::InvalidInput(format!(
            "x_max must be positive, got {x_max}"
        )));
    }
    let (lo, hi) = astar.bracket;
    let mut x0 = 0.0;
    let mut u0 = 0.0;
    let mut b = verified_bracket(x0, u0, -lo, -hi, ctrl)?;

    let mut coords: Vec<f64> = Vec::new();
    let mut states: Vec<Vec<f64>> = Vec::new();
    let mut joints = Vec::new();
    let mut initial_slope = f64::NAN;

    loop {
        b = bisect(x0, u0, b, ctrl)?;
        if coords.is_empty() {
            initial_slope = -b.p_d;
        } else {
            // The restart state replaces the previous segment's last node.
            coords.pop();
            states.pop();
            joints.push(x0);
        }
        let last = valid_until(&b);
        let seg_end = b.tr_d.coords()[last];
        if seg_end - x0 < MIN_SEGMENT && seg_end < x_max {
            return Err(Error::Precondition(format!(
                "manifold continuation stalled at x = {x0}"
            )));
        }
        let seg = if seg_end >= x_max {
            b.tr_d.truncated(x_max)
        } else {
            b.tr_d.truncated(seg_end)
        };
        for (x, s) in seg.nodes() {
            coords.push(x);
            states.push(s.to_vec());
        }
        if seg_end >= x_max {
            break;
        }
        x0 = seg.end();
        let s = seg.last_state();
        u0 = s[0];
        let p = s[1];
        b = verified_bracket(x0, u0, p + RESTART_HALF_WIDTH, p - RESTART_HALF_WIDTH, ctrl)?;
    }

    let trajectory = Trajectory::from_nodes(&DeficitSystem, &coords, &states)?;
    Ok(ConnectingOrbit {
        trajectory,
        initial_slope,
        joints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{fit_far_field, log_derivative_check, FAR_BAND_HI};
    use crate::shooting::{find_astar, DEFAULT_X_MAX};

    #[test]
    fn orbit_reaches_far_field() {
        let ctrl = StepControl::default();
        let t0 = std::time::Instant::now();
        let astar = find_astar((0.01, 0.71), 1e-10, &ctrl, DEFAULT_X_MAX).unwrap();
        let t1 = t0.elapsed();
        let orbit = connecting_orbit(&astar, 25.0, &ctrl).unwrap();
        eprintln!(
            "astar {:?} in {:?}, orbit in {:?}",
            astar.a_star,
            t1,
            t0.elapsed() - t1
        );
        eprintln!("joints {:?} nodes {}", orbit.joints, orbit.trajectory.len());
        assert!((orbit.initial_slope - astar.a_star).abs() < 1e-9);
        let xt = orbit.x_trajectory().unwrap();
        for (x, s) in xt.nodes().skip(1) {
            assert!(s[0] > 0.0 && s[0] < 1.0 && s[1] > 0.0, "x = {x}: {s:?}");
        }
        let fit = fit_far_field(&orbit.trajectory, FAR_BAND_HI).unwrap();
        eprintln!("{fit:?}");
        eprintln!(
            "logder {}",
            log_derivative_check(&orbit.trajectory, Some((10.0, 20.0))).unwrap()
        );
        assert!((fit.slope + 1.0).abs() <= 1e-3);
        assert!(fit.c_d_mismatch() <= 1e-6);
    }
}
