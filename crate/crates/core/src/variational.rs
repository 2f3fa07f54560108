//! Sensitivity of the radial shot with respect to its initial slope.
//!
//! `ψ = ∂f/∂a` solves the linearized equation `r²ψ'' + ψ = 3f²ψ` with
//! `ψ(1) = 0`, `ψ'(1) = 1`. It is co-integrated with `f` as one augmented
//! system, together with the running integral `∫₁ʳ f³ψ/s² ds` so that the
//! Wronskian relation
//!
//! ```text
//! f'ψ − fψ' = −2 ∫₁ʳ f³ψ / s² ds
//! ```
//!
//! can be checked at integrator accuracy.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate, Domain, EventSpec, OdeSystem, StepControl, Trajectory};
use crate::shooting::{classify, OutcomeTag, DEFAULT_X_MAX};

/// `(f, f', ψ, ψ', ∫ f³ψ/s²)` in `r`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SensitivitySystem;

const SENSITIVITY_COLUMNS: &[&str] = &["r", "f", "fp", "psi", "psip"];

impl OdeSystem for SensitivitySystem {
    fn dim(&self) -> usize {
        5
    }

    fn rhs(&self, r: f64, y: &[f64], dy: &mut [f64]) {
        let (f, fp, psi, psip) = (y[0], y[1], y[2], y[3]);
        let r2 = r * r;
        let f2 = f * f;
        dy[0] = fp;
        dy[1] = (f2 * f - f) / r2;
        dy[2] = psip;
        dy[3] = (3.0 * f2 * psi - psi) / r2;
        dy[4] = f2 * f * psi / r2;
    }

    fn domain(&self) -> Domain {
        Domain::R
    }

    fn columns(&self) -> &'static [&'static str] {
        SENSITIVITY_COLUMNS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityNode {
    pub r: f64,
    pub f: f64,
    pub fp: f64,
    pub psi: f64,
    pub psip: f64,
}

impl SensitivityNode {
    fn from_state(r: f64, s: &[f64]) -> Self {
        Self {
            r,
            f: s[0],
            fp: s[1],
            psi: s[2],
            psip: s[3],
        }
    }
}

/// Co-integrated `f` and `ψ` on a grid starting at `r = 1`.
#[derive(Debug, Clone)]
pub struct SensitivityProfile {
    pub a: f64,
    trajectory: Trajectory,
}

impl SensitivityProfile {
    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }

    pub fn r_end(&self) -> f64 {
        self.trajectory.end()
    }

    pub fn nodes(&self) -> impl Iterator<Item = SensitivityNode> + '_ {
        self.trajectory
            .nodes()
            .map(|(r, s)| SensitivityNode::from_state(r, s))
    }

    /// Dense-output state at `r`, or `None` outside the integrated range.
    pub fn at(&self, r: f64) -> Option<SensitivityNode> {
        self.trajectory
            .interpolate(r)
            .map(|s| SensitivityNode::from_state(r, &s))
    }

    /// CSV `r,f,fp,psi,psip` at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,f,fp,psi,psip\n");
        for n in self.nodes() {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                n.r, n.f, n.fp, n.psi, n.psip
            );
        }
        s
    }
}

/// Integrate `(f, ψ)` from `r = 1` with `f(1) = 0, f'(1) = a, ψ(1) = 0,
/// ψ'(1) = 1` up to `r_max` or the blow-up guard on `f`.
pub fn solve_sensitivity(a: f64, r_max: f64, ctrl: &StepControl) -> Result<SensitivityProfile> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Precondition(format!(
            "slope must be non-negative, got {a}"
        )));
    }
    if !(r_max > 1.0) || !r_max.is_finite() {
        return Err(Error::Precondition(format!(
            "r_max must exceed 1, got {r_max}"
        )));
    }
    let trajectory = integrate(
        &SensitivitySystem,
        1.0,
        &[0.0, a, 0.0, 1.0, 0.0],
        ctrl,
        &EventSpec::new(),
        r_max,
    )?;
    if let crate::ode::Termination::StepLimit = trajectory.termination() {
        return Err(Error::StepLimitExceeded {
            t: trajectory.end(),
            steps: ctrl.max_steps,
        });
    }
    Ok(SensitivityProfile { a, trajectory })
}

/// Worst node-wise violation of `f'ψ − fψ' = −2∫₁ʳ f³ψ/s² ds`, each
/// measured against the larger side plus `1e-12`.
pub fn wronskian_residual(p: &SensitivityProfile) -> f64 {
    p.trajectory
        .nodes()
        .map(|(_, s)| {
            let w = s[1] * s[2] - s[0] * s[3];
            let rhs = -2.0 * s[4];
            (w - rhs).abs() / (w.abs().max(rhs.abs()) + 1e-12)
        })
        .fold(0.0, f64::max)
}

pub const FD_DELTA_MIN: f64 = 1e-7;
pub const FD_DELTA_MAX: f64 = 1e-3;
pub const FD_DELTA_DEFAULT: f64 = 1e-5;

/// Worst relative disagreement between `ψ(r, a)` and the central difference
/// `(f(r, a+δ) − f(r, a−δ)) / 2δ` over the probe radii.
pub fn finite_difference_check(
    a: f64,
    delta: f64,
    r_probe: &[f64],
    ctrl: &StepControl,
) -> Result<f64> {
    if !(FD_DELTA_MIN..=FD_DELTA_MAX).contains(&delta) {
        return Err(Error::Precondition(format!(
            "delta {delta:e} outside [{FD_DELTA_MIN:e}, {FD_DELTA_MAX:e}]"
        )));
    }
    if r_probe.is_empty() {
        return Err(Error::Precondition("no probe radii".into()));
    }
    if let Some(&bad) = r_probe.iter().find(|&&r| !(r > 1.0) || !r.is_finite()) {
        return Err(Error::ProbeOutOfRange(bad));
    }
    let r_max = r_probe.iter().copied().fold(f64::MIN, f64::max);
    let base = solve_sensitivity(a, r_max, ctrl)?;
    let plus = solve_sensitivity(a + delta, r_max, ctrl)?;
    let minus = solve_sensitivity((a - delta).max(0.0), r_max, ctrl)?;
    let denom = a + delta - (a - delta).max(0.0);

    let mut worst: f64 = 0.0;
    for &r in r_probe {
        let (Some(b), Some(p), Some(m)) = (base.at(r), plus.at(r), minus.at(r)) else {
            return Err(Error::ProbeOutOfRange(r));
        };
        let fd = (p.f - m.f) / denom;
        let scale = b.psi.abs().max(f64::MIN_POSITIVE);
        worst = worst.max((b.psi - fd).abs() / scale);
    }
    Ok(worst)
}

/// `(a, r₁(a))` with `r₁` the least root of `f(r, a) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingCurve {
    pub points: Vec<(f64, f64)>,
}

impl CrossingCurve {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 < w[0].1)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("a,r1\n");
        for (a, r1) in &self.points {
            let _ = writeln!(s, "{a:.16e},{r1:.16e}");
        }
        s
    }
}

/// First crossing radius `r₁ = exp(x₁)` of the shot with slope `a`.
pub fn crossing_radius(a: f64, ctrl: &StepControl) -> Result<f64> {
    let out = classify(a, ctrl, DEFAULT_X_MAX)?;
    match (out.tag, out.location) {
        (OutcomeTag::CrossedOne, Some(x1)) => Ok(x1.exp()),
        _ => Err(Error::NotInSPlus(a)),
    }
}

/// Crossing radii over a strictly increasing grid of slopes in S⁺.
pub fn crossing_curve(a_grid: &[f64], ctrl: &StepControl) -> Result<CrossingCurve> {
    if a_grid.is_empty() {
        return Err(Error::Precondition("empty slope grid".into()));
    }
    if a_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition(
            "slope grid must increase strictly".into(),
        ));
    }
    let points = a_grid
        .iter()
        .map(|&a| crossing_radius(a, ctrl).map(|r1| (a, r1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossingCurve { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub a: f64,
    pub r1: f64,
    /// Central difference between the neighbouring grid points.
    pub grid_slope: f64,
    /// Central difference of `r₁` at `a ± δ`.
    pub local_slope: f64,
    /// `−ψ(r₁, a) / f'(r₁, a)`.
    pub sensitivity_slope: f64,
    /// `|local − sensitivity| / |sensitivity|`.
    pub rel_mismatch: f64,
}

/// Slope diagnostics at every interior grid point of `curve`.
pub fn slope_check(curve: &CrossingCurve, delta: f64, ctrl: &StepControl) -> Result<Vec<SlopeRow>> {
    if !(FD_DELTA_MIN..=FD_DELTA_MAX).contains(&delta) {
        return Err(Error::Precondition(format!(
            "delta {delta:e} outside [{FD_DELTA_MIN:e}, {FD_DELTA_MAX:e}]"
        )));
    }
    let pts = &curve.points;
    let mut rows = Vec::new();
    for i in 1..pts.len().saturating_sub(1) {
        let (a, r1) = pts[i];
        let grid_slope = (pts[i + 1].1 - pts[i - 1].1) / (pts[i + 1].0 - pts[i - 1].0);
        let local_slope =
            (crossing_radius(a + delta, ctrl)? - crossing_radius(a - delta, ctrl)?) / (2.0 * delta);
        let prof = solve_sensitivity(a, r1, ctrl)?;
        let at = prof.at(r1).ok_or(Error::ProbeOutOfRange(r1))?;
        let sensitivity_slope = -at.psi / at.fp;
        rows.push(SlopeRow {
            a,
            r1,
            grid_slope,
            local_slope,
            sensitivity_slope,
            rel_mismatch: (local_slope - sensitivity_slope).abs() / sensitivity_slope.abs(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctrl() -> StepControl {
        StepControl::default()
    }

    #[test]
    fn initial_node() {
        let p = solve_sensitivity(0.4, 2.0, &ctrl()).unwrap();
        let n = p.nodes().next().unwrap();
        assert_eq!((n.r, n.f, n.fp, n.psi, n.psip), (1.0, 0.0, 0.4, 0.0, 1.0));
        assert!(p.nodes().zip(p.nodes().skip(1)).all(|(a, b)| b.r > a.r));
    }

    #[test]
    fn zero_slope_reduces_to_euler_equation() {
        let p = solve_sensitivity(0.0, 20.0, &ctrl()).unwrap();
        let s3 = 3f64.sqrt();
        for n in p.nodes() {
            assert_eq!(n.f, 0.0);
            let exact = 2.0 / s3 * n.r.sqrt() * (0.5 * s3 * n.r.ln()).sin();
            assert!((n.psi - exact).abs() < 1e-8, "r = {}", n.r);
        }
        assert!(wronskian_residual(&p) <= 1e-10);
    }

    #[test]
    fn finite_difference_agrees_at_half() {
        let err = finite_difference_check(0.5, 1e-5, &[1.5, 2.0, 3.0], &ctrl()).unwrap();
        assert!(err <= 1e-4, "{err:e}");
    }

    #[test]
    fn finite_difference_rejects_large_delta() {
        assert!(matches!(
            finite_difference_check(0.5, 1e-1, &[2.0], &ctrl()),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            finite_difference_check(0.5, 1e-5, &[0.5], &ctrl()),
            Err(Error::ProbeOutOfRange(_))
        ));
    }

    #[test]
    fn probe_beyond_blowup_is_out_of_range() {
        // a = 2 blows up (f > 10) well before r = 1e6.
        let r = finite_difference_check(2.0, 1e-5, &[2.0, 1e6], &ctrl());
        assert!(matches!(r, Err(Error::ProbeOutOfRange(_))), "{r:?}");
    }

    #[test]
    fn crossing_curve_upper_regime() {
        let c = crossing_curve(&[0.75, 0.9, 1.0], &ctrl()).unwrap();
        assert!(c.is_strictly_decreasing());
        assert!(c.to_csv().starts_with("a,r1\n"));
    }

    #[test]
    fn crossing_curve_rejects_slope_below_astar() {
        assert!(matches!(
            crossing_curve(&[0.1], &ctrl()),
            Err(Error::NotInSPlus(_))
        ));
        assert!(crossing_curve(&[0.9, 0.75], &ctrl()).is_err());
    }

    #[test]
    fn wronskian_before_crossing() {
        let x1 = classify(0.5, &ctrl(), DEFAULT_X_MAX)
            .unwrap()
            .location
            .unwrap();
        let p = solve_sensitivity(0.5, x1.exp(), &ctrl()).unwrap();
        let res = wronskian_residual(&p);
        assert!(res <= 1e-6, "{res:e}");
    }

    #[test]
    fn psi_positive_up_to_crossing() {
        for a in [0.75, 1.0, 2.0] {
            let r1 = crossing_radius(a, &ctrl()).unwrap();
            let p = solve_sensitivity(a, r1, &ctrl()).unwrap();
            assert!(p.nodes().skip(1).all(|n| n.psi > 0.0), "a = {a}");
        }
    }

    fn astar() -> f64 {
        crate::shooting::find_astar((0.01, 0.71), 1e-10, &ctrl(), DEFAULT_X_MAX)
            .unwrap()
            .a_star
    }

    #[test]
    fn finite_difference_at_astar_far_probes() {
        let err = finite_difference_check(astar(), 1e-5, &[2.0, 5.0, 10.0], &ctrl()).unwrap();
        assert!(err <= 1e-3, "{err:e}");
    }

    #[test]
    fn crossing_curve_near_astar() {
        let a = astar();
        let c = crossing_curve(&[a + 0.01, a + 0.05, a + 0.2], &ctrl()).unwrap();
        assert!(c.is_strictly_decreasing());
        assert!(c.points[0].1 > 20.0, "{:?}", c.points);
    }
}
