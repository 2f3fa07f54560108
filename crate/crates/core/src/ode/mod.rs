//! The radial equation in both coordinate systems and an adaptive
//! Dormand–Prince 5(4) integrator with event localization.
//!
//! With `r = eˣ` and `f(r) = y(x)` the equation `r² f'' + f = f³` becomes
//! the autonomous system `y'' − y' + y = y³`. Everything downstream works in
//! one of three charts:
//!
//! | [`Domain`]  | coordinate | components                       |
//! |-------------|------------|----------------------------------|
//! | `X`         | `x = ln r` | `y`, `y'`                        |
//! | `R`         | `r`        | `f`, `df/dr`                     |
//! | `Deficit`   | `x`        | `u = ln(1 − y)`, `p = y'/(y − 1)` |
//!
//! The deficit chart keeps full relative precision near the saddle `(1, 0)`
//! where `1 − y` underflows the resolution of `y` itself.

mod dopri;
pub(crate) mod events;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dopri::integrate;
pub use events::{Direction, Event, EventHit, EventSpec};
pub use trajectory::{Termination, Trajectory};

/// Phase-space point in the logarithmic coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XState {
    pub x: f64,
    pub y: f64,
    pub yp: f64,
}

/// Phase-space point in the radial coordinate, `r ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RState {
    pub r: f64,
    pub f: f64,
    pub fp: f64,
}

impl XState {
    pub fn new(x: f64, y: f64, yp: f64) -> Self {
        Self { x, y, yp }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yp.is_finite()
    }

    /// Chain rule image under `r = eˣ`.
    pub fn to_r(self) -> RState {
        let r = self.x.exp();
        RState {
            r,
            f: self.y,
            fp: self.yp / r,
        }
    }
}

impl RState {
    pub fn new(r: f64, f: f64, fp: f64) -> Self {
        Self { r, f, fp }
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite() && self.f.is_finite() && self.fp.is_finite()
    }

    pub fn to_x(self) -> XState {
        XState {
            x: self.r.ln(),
            y: self.f,
            yp: self.fp * self.r,
        }
    }
}

/// Right-hand side of `y'' = y' + y³ − y`.
pub fn rhs_x(s: &XState) -> (f64, f64) {
    (s.yp, s.yp + s.y * s.y * s.y - s.y)
}

/// Right-hand side of `r² f'' = f³ − f`.
pub fn rhs_r(s: &RState) -> Result<(f64, f64)> {
    if !(s.r > 0.0) {
        return Err(Error::InvalidInput(format!(
            "radial rhs needs r > 0, got {}",
            s.r
        )));
    }
    Ok((s.fp, (s.f * s.f * s.f - s.f) / (s.r * s.r)))
}

/// Which chart a trajectory is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    X,
    R,
    Deficit,
}

/// Adaptive step-size control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Integration stops once the guarded component exceeds this in magnitude.
    pub blowup_bound: f64,
}

pub const TOL_MIN: f64 = 1e-14;
pub const TOL_MAX: f64 = 1e-2;

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_max: 0.1,
            max_steps: 500_000,
            blowup_bound: 10.0,
        }
    }
}

impl StepControl {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_band = |v: f64| (TOL_MIN..=TOL_MAX).contains(&v);
        if !in_band(self.rtol) {
            return Err(Error::InvalidInput(format!(
                "rtol {} outside [{TOL_MIN:e}, {TOL_MAX:e}]",
                self.rtol
            )));
        }
        if !in_band(self.atol) {
            return Err(Error::InvalidInput(format!(
                "atol {} outside [{TOL_MIN:e}, {TOL_MAX:e}]",
                self.atol
            )));
        }
        if !(self.h_init > 0.0 && self.h_init.is_finite()) {
            return Err(Error::InvalidInput("h_init must be positive".into()));
        }
        if !(self.h_max > 0.0 && self.h_max.is_finite()) {
            return Err(Error::InvalidInput("h_max must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be positive".into()));
        }
        if !(self.blowup_bound > 1.0) {
            return Err(Error::InvalidInput("blowup_bound must exceed 1".into()));
        }
        Ok(())
    }
}

/// A first-order system the integrator can advance.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    fn domain(&self) -> Domain;

    /// Column names for export: the coordinate first, then the leading
    /// components. Auxiliary components past these are not exported.
    fn columns(&self) -> &'static [&'static str];

    /// Quantity compared against [`StepControl::blowup_bound`].
    fn guard(&self, y: &[f64]) -> f64 {
        y[0].abs()
    }
}

pub(crate) const X_COLUMNS: &[&str] = &["x", "y", "yp"];
pub(crate) const R_COLUMNS: &[&str] = &["r", "f", "fp"];
pub(crate) const DEFICIT_COLUMNS: &[&str] = &["x", "u", "p"];

/// `(y, y')` in the logarithmic coordinate.
#[derive(Debug, Clone, Copy, Default)]
pub struct XSystem;

impl OdeSystem for XSystem {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = y[1] + y[0] * y[0] * y[0] - y[0];
    }

    fn domain(&self) -> Domain {
        Domain::X
    }

    fn columns(&self) -> &'static [&'static str] {
        X_COLUMNS
    }
}

/// [`XSystem`] plus the running integral `∫₀ˣ y'² ds` as a third component.
#[derive(Debug, Clone, Copy, Default)]
pub struct XEnergySystem;

impl OdeSystem for XEnergySystem {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        XSystem.rhs(t, y, dy);
        dy[2] = y[1] * y[1];
    }

    fn domain(&self) -> Domain {
        Domain::X
    }

    fn columns(&self) -> &'static [&'static str] {
        X_COLUMNS
    }
}

/// `(f, f')` in the radial coordinate. Only valid for `r > 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RSystem;

impl OdeSystem for RSystem {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, r: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = (y[0] * y[0] * y[0] - y[0]) / (r * r);
    }

    fn domain(&self) -> Domain {
        Domain::R
    }

    fn columns(&self) -> &'static [&'static str] {
        R_COLUMNS
    }
}

/// The equation for `v = 1 − y` written in `(u, p) = (ln v, v'/v)`:
///
/// ```text
/// u' = p
/// p' = p + 2 − 3v + v² − p²,   v = eᵘ
/// ```
///
/// Valid while `y < 1`. The saddle `(1, 0)` sits at `u → −∞, p = −1`.
/// The guard watches `|p|`, which diverges when `y` reaches 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct DeficitSystem;

impl OdeSystem for DeficitSystem {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let v = y[0].exp();
        let p = y[1];
        dy[0] = p;
        dy[1] = p + 2.0 - 3.0 * v + v * v - p * p;
    }

    fn domain(&self) -> Domain {
        Domain::Deficit
    }

    fn columns(&self) -> &'static [&'static str] {
        DEFICIT_COLUMNS
    }

    fn guard(&self, y: &[f64]) -> f64 {
        y[1].abs()
    }
}

/// Integrate the logarithmic-coordinate equation from `initial` to `x_max`.
pub fn integrate_x(
    initial: XState,
    ctrl: &StepControl,
    events: &EventSpec,
    x_max: f64,
) -> Result<Trajectory> {
    if !initial.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite state {initial:?}")));
    }
    integrate(
        &XSystem,
        initial.x,
        &[initial.y, initial.yp],
        ctrl,
        events,
        x_max,
    )
}

/// Integrate the radial equation from `initial` (with `r ≥ 1`) to `r_max`.
pub fn integrate_r(
    initial: RState,
    ctrl: &StepControl,
    events: &EventSpec,
    r_max: f64,
) -> Result<Trajectory> {
    if !initial.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite state {initial:?}")));
    }
    if initial.r < 1.0 {
        return Err(Error::InvalidInput(format!(
            "radial integration starts at r >= 1, got {}",
            initial.r
        )));
    }
    integrate(
        &RSystem,
        initial.r,
        &[initial.f, initial.fp],
        ctrl,
        events,
        r_max,
    )
}

/// Pointwise image of an `X` trajectory under `r = eˣ`, `f' = y'/r`.
///
/// The result interpolates with cubic Hermite segments built from the radial
/// right-hand side.
pub fn transform_to_r(t: &Trajectory) -> Result<Trajectory> {
    if t.domain() != Domain::X {
        return Err(Error::InvalidInput(format!(
            "transform_to_r expects an X trajectory, got {:?}",
            t.domain()
        )));
    }
    t.map_chart(Domain::R, R_COLUMNS, &RSystem, |x, s| {
        let r = x.exp();
        (r, [s[0], s[1] / r])
    })
}

/// Inverse of [`transform_to_r`].
pub fn transform_to_x(t: &Trajectory) -> Result<Trajectory> {
    if t.domain() != Domain::R {
        return Err(Error::InvalidInput(format!(
            "transform_to_x expects an R trajectory, got {:?}",
            t.domain()
        )));
    }
    t.map_chart(Domain::X, X_COLUMNS, &XSystem, |r, s| {
        (r.ln(), [s[0], s[1] * r])
    })
}

/// Express a deficit-chart trajectory as `(x, y, y')`.
pub fn deficit_to_x(t: &Trajectory) -> Result<Trajectory> {
    if t.domain() != Domain::Deficit {
        return Err(Error::InvalidInput(format!(
            "deficit_to_x expects a Deficit trajectory, got {:?}",
            t.domain()
        )));
    }
    t.map_chart(Domain::X, X_COLUMNS, &XSystem, |x, s| {
        let v = s[0].exp();
        (x, [-s[0].exp_m1(), -s[1] * v])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_x_fixed_points_and_substitution() {
        assert_eq!(rhs_x(&XState::new(0.0, 0.0, 0.0)), (0.0, 0.0));
        assert_eq!(rhs_x(&XState::new(0.0, 1.0, 0.0)), (0.0, 0.0));
        let (dy, dyp) = rhs_x(&XState::new(0.0, 0.5, 0.2));
        assert_eq!(dy, 0.2);
        assert!((dyp - (-0.175)).abs() < 1e-15);
    }

    #[test]
    fn rhs_r_values() {
        assert_eq!(rhs_r(&RState::new(1.0, 0.0, 0.3)).unwrap(), (0.3, 0.0));
        assert_eq!(rhs_r(&RState::new(2.0, 1.0, 0.0)).unwrap(), (0.0, 0.0));
        let (df, dfp) = rhs_r(&RState::new(2.0, 0.5, 0.1)).unwrap();
        assert_eq!(df, 0.1);
        assert!((dfp - (-0.09375)).abs() < 1e-15);
    }

    #[test]
    fn rhs_r_rejects_nonpositive_radius() {
        assert!(rhs_r(&RState::new(0.0, 0.5, 0.1)).is_err());
        assert!(rhs_r(&RState::new(-1.0, 0.5, 0.1)).is_err());
    }

    #[test]
    fn state_chain_rule() {
        let r = XState::new(0.0, 0.0, 0.7).to_r();
        assert_eq!((r.r, r.f, r.fp), (1.0, 0.0, 0.7));
        let r = XState::new(2f64.ln(), 0.4, 0.2).to_r();
        assert!((r.r - 2.0).abs() < 1e-15);
        assert_eq!(r.f, 0.4);
        assert!((r.fp - 0.1).abs() < 1e-15);
    }

    #[test]
    fn step_control_bounds() {
        assert!(StepControl::default().validate().is_ok());
        assert!(StepControl::with_tolerances(1e-1, 1e-12)
            .validate()
            .is_err());
        assert!(StepControl::with_tolerances(1e-10, 1e-15)
            .validate()
            .is_err());
        let c = StepControl {
            blowup_bound: 1.0,
            ..StepControl::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn deficit_rhs_matches_shifted_equation() {
        // v'' − v' = 2v − 3v² + v³ with v = eᵘ, p = v'/v.
        let (u, p) = (-0.7_f64, -0.4_f64);
        let v = u.exp();
        let vp = p * v;
        let vpp = vp + 2.0 * v - 3.0 * v * v + v * v * v;
        let mut dy = [0.0; 2];
        DeficitSystem.rhs(0.0, &[u, p], &mut dy);
        let expected_pp = vpp / v - p * p;
        assert!((dy[1] - expected_pp).abs() < 1e-14);
    }
}
