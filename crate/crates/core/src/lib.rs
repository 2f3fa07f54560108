//! Shooting solver and numerical verification toolkit for the boundary value
//! problem
//!
//! ```text
//! r² f'' + f = f³,   f(1) = 0,   f(∞) = 1,   f > 0 on (1, ∞).
//! ```
//!
//! The crate is organised bottom-up:
//!
//! - [`ode`]: both forms of the equation, an adaptive Dormand–Prince 5(4)
//!   integrator with event localization, and trajectory charts.
//! - [`shooting`]: the crossing classifier over the initial slope
//!   `a = f'(1)`, bracket seeding, bisection for the unique connecting slope
//!   `a*`, and construction of the connecting orbit.
//! - [`variational`]: the sensitivity `ψ = ∂f/∂a`, the Wronskian identity and
//!   the crossing curve `r₁(a)`.
//! - [`asymptotics`]: far-field and near-origin fits and the saddle spectrum.
//! - [`checks`]: the verification suite behind `ymbvp verify`.

pub mod asymptotics;
pub mod checks;
pub mod error;
mod lsq;
pub mod ode;
pub mod shooting;
pub mod variational;

pub use asymptotics::{
    fit_far_field, fit_near_origin, log_derivative_check, saddle_spectrum, FarFieldFit, FitResult,
};
pub use checks::{verify, CheckReport, VerifyConfig};
pub use error::{Error, Result};
pub use ode::{
    integrate, integrate_r, integrate_x, rhs_r, rhs_x, transform_to_r, transform_to_x, Direction,
    Domain, EventSpec, RState, StepControl, Termination, Trajectory, XState,
};
pub use shooting::{classify, find_astar, seed_bracket, AstarResult, OutcomeTag, ShotOutcome};
pub use shooting::{connecting_orbit, ConnectingOrbit};
pub use variational::{
    crossing_curve, finite_difference_check, slope_check, solve_sensitivity, wronskian_residual,
    CrossingCurve, SensitivityProfile,
};
