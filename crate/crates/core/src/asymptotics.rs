//! Asymptotic fits at both ends of the connecting orbit, and the saddle at
//! `(1, 0)`.
//!
//! Far field: `1 − y = c e^{−x} − (3/4) c² e^{−2x} + …`. Near the inner
//! boundary: `f = a ln r + (a/2) ln² r + O(ln⁴ r)`.
//!
//! Windows are chosen by value bands of `1 − y` (or of `r − 1`), never by
//! fixed coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq;
use crate::ode::{Domain, Trajectory};

pub const FAR_BAND_LO: f64 = 1e-8;
pub const FAR_BAND_HI: f64 = 1e-3;
/// Relative size of the correction term below which the residual is noise.
pub const CORRECTION_FLOOR: f64 = 1e-6;
pub const MIN_WINDOW_NODES: usize = 10;
pub const NEAR_ORIGIN_WIDTH: f64 = 1e-3;
const NEAR_ORIGIN_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameter: f64,
    pub window: (f64, f64),
    pub residual_order: f64,
    pub rms_residual: f64,
}

/// Far-field fit: `fit.parameter` is `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarFieldFit {
    pub fit: FitResult,
    /// Slope of the straight-line fit of `ln(1 − y)` against `x`.
    pub slope: f64,
    /// `exp` of that fit's intercept.
    pub log_linear_c: f64,
    /// Same extrapolation as `c`, applied to `y'`.
    pub d: f64,
    pub window_nodes: usize,
    /// Nodes where the correction `1 − y − c e^{−x}` exceeds
    /// [`CORRECTION_FLOOR`] relative to `1 − y`.
    pub correction_nodes: usize,
}

impl FarFieldFit {
    pub fn c(&self) -> f64 {
        self.fit.parameter
    }

    pub fn c_d_mismatch(&self) -> f64 {
        (self.c() - self.d).abs() / self.c().abs()
    }

    /// `false` when the correction band is too thin for `residual_order` to
    /// be trusted.
    pub fn residual_order_reliable(&self) -> bool {
        self.correction_nodes >= MIN_WINDOW_NODES && self.fit.residual_order.is_finite()
    }
}

/// `(x, 1 − y, y', y'/(y − 1))` at every node, whatever the chart.
fn far_samples(t: &Trajectory) -> Vec<[f64; 4]> {
    t.nodes()
        .map(|(c, s)| match t.domain() {
            Domain::X => {
                let v = 1.0 - s[0];
                [c, v, s[1], -s[1] / v]
            }
            Domain::R => {
                let v = 1.0 - s[0];
                let yp = c * s[1];
                [c.ln(), v, yp, -yp / v]
            }
            Domain::Deficit => {
                let v = s[0].exp();
                [c, v, -s[1] * v, s[1]]
            }
        })
        .collect()
}

fn band(samples: &[[f64; 4]], hi: f64) -> Vec<[f64; 4]> {
    samples
        .iter()
        .copied()
        .filter(|s| s[1] > FAR_BAND_LO && s[1] < hi)
        .collect()
}

fn check_band(hi: f64) -> Result<()> {
    if !(hi > FAR_BAND_LO && hi < 1.0) {
        return Err(Error::InvalidInput(format!(
            "window_start_tol must lie in ({FAR_BAND_LO:e}, 1), got {hi}"
        )));
    }
    Ok(())
}

/// Intercept of `g·eˣ ≈ k₀ + k₁ e^{−x} + k₂ e^{−2x}`.
fn extrapolate(x: &[f64], g: &[f64]) -> Option<f64> {
    let s: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
    let rhs: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| gi * xi.exp()).collect();
    let cols = [
        vec![1.0; x.len()],
        s.clone(),
        s.iter().map(|v| v * v).collect(),
    ];
    lsq::solve(&cols, &rhs).map(|k| k[0])
}

/// Fit `1 − y ≈ c e^{−x}` on the nodes with `1e-8 < 1 − y < window_start_tol`.
///
/// `c` is extrapolated from the second-order fit of `(1 − y)eˣ` in `e^{−x}`;
/// `d` the same from `y'eˣ`. The correction exponent comes from a line fit
/// of `ln|1 − y − c e^{−x}|` where that correction stands clear of noise.
pub fn fit_far_field(t: &Trajectory, window_start_tol: f64) -> Result<FarFieldFit> {
    check_band(window_start_tol)?;
    let w = band(&far_samples(t), window_start_tol);
    if w.len() < MIN_WINDOW_NODES {
        return Err(Error::WindowTooShort {
            found: w.len(),
            needed: MIN_WINDOW_NODES,
        });
    }
    if w.iter().any(|s| s[2] <= 0.0) {
        return Err(Error::Precondition(
            "y' must stay positive across the far-field window".into(),
        ));
    }
    let x: Vec<f64> = w.iter().map(|s| s[0]).collect();
    let v: Vec<f64> = w.iter().map(|s| s[1]).collect();
    let yp: Vec<f64> = w.iter().map(|s| s[2]).collect();
    let ln_v: Vec<f64> = v.iter().map(|v| v.ln()).collect();

    let singular = || Error::Precondition("far-field fit is singular".into());
    let (slope, intercept, rms) = lsq::line(&x, &ln_v).ok_or_else(singular)?;
    let c = extrapolate(&x, &v).ok_or_else(singular)?;
    let d = extrapolate(&x, &yp).ok_or_else(singular)?;

    let (bx, by): (Vec<f64>, Vec<f64>) = w
        .iter()
        .filter_map(|s| {
            let res = s[1] - c * (-s[0]).exp();
            (res.abs() >= CORRECTION_FLOOR * s[1]).then(|| (s[0], res.abs().ln()))
        })
        .unzip();
    let residual_order = if bx.len() >= 2 {
        lsq::line(&bx, &by).map_or(f64::NAN, |l| l.0)
    } else {
        f64::NAN
    };

    Ok(FarFieldFit {
        fit: FitResult {
            parameter: c,
            window: (x[0], x[x.len() - 1]),
            residual_order,
            rms_residual: rms,
        },
        slope,
        log_linear_c: intercept.exp(),
        d,
        window_nodes: w.len(),
        correction_nodes: bx.len(),
    })
}

/// `max |y'/(y − 1) + 1| / e^{−x}` over the nodes in `window` (an `x`
/// interval) or, by default, over the far-field value band.
pub fn log_derivative_check(t: &Trajectory, window: Option<(f64, f64)>) -> Result<f64> {
    let all = far_samples(t);
    let w: Vec<[f64; 4]> = match window {
        Some((lo, hi)) => {
            if !(hi > lo) {
                return Err(Error::InvalidInput(format!("empty window ({lo}, {hi})")));
            }
            all.into_iter()
                .filter(|s| s[0] >= lo && s[0] <= hi)
                .collect()
        }
        None => band(&all, FAR_BAND_HI),
    };
    if w.len() < MIN_WINDOW_NODES {
        return Err(Error::WindowTooShort {
            found: w.len(),
            needed: MIN_WINDOW_NODES,
        });
    }
    Ok(w.iter()
        .map(|s| (s[3] + 1.0).abs() * s[0].exp())
        .fold(0.0, f64::max))
}

/// Slope of `f` against `ln r` as `r → 1`.
///
/// The dense output is sampled on `r ∈ (1, 1 + 1e-3]` and fitted by
/// `f ≈ s·ln r + q·ln² r` (no constant, since `f(1) = 0`); `s` is reported.
/// `residual_order` is the log-log slope of `|f − s ln r|`.
pub fn fit_near_origin(t: &Trajectory) -> Result<FitResult> {
    let to_r: fn(f64) -> f64 = match t.domain() {
        Domain::R => |c| c,
        Domain::X => f64::exp,
        Domain::Deficit => {
            return Err(Error::InvalidInput(
                "near-origin fit needs an r- or x-domain trajectory".into(),
            ))
        }
    };
    if t.is_empty() || (to_r(t.start()) - 1.0).abs() > 1e-15 {
        return Err(Error::Precondition("trajectory must start at r = 1".into()));
    }
    let r_hi = (1.0 + NEAR_ORIGIN_WIDTH).min(to_r(t.end()));
    let mut lx = Vec::new();
    let mut f = Vec::new();
    let mut buf = vec![0.0; t.dim()];
    for i in 1..=NEAR_ORIGIN_SAMPLES {
        let r = 1.0 + NEAR_ORIGIN_WIDTH * i as f64 / NEAR_ORIGIN_SAMPLES as f64;
        if r > r_hi {
            break;
        }
        let c = match t.domain() {
            Domain::R => r,
            _ => r.ln(),
        };
        if t.interpolate_into(c, &mut buf) {
            lx.push(r.ln());
            f.push(buf[0]);
        }
    }
    if lx.len() < MIN_WINDOW_NODES {
        return Err(Error::WindowTooShort {
            found: lx.len(),
            needed: MIN_WINDOW_NODES,
        });
    }
    let sq: Vec<f64> = lx.iter().map(|v| v * v).collect();
    let k = lsq::solve(&[lx.clone(), sq.clone()], &f)
        .ok_or_else(|| Error::Precondition("near-origin fit is singular".into()))?;
    let slope = k[0];
    let rms = lsq::rms(
        lx.iter()
            .zip(&sq)
            .zip(&f)
            .map(|((l, q), fi)| fi - (k[0] * l + k[1] * q)),
    );
    let (px, py): (Vec<f64>, Vec<f64>) = lx
        .iter()
        .zip(&f)
        .filter_map(|(l, fi)| {
            let res = (fi - slope * l).abs();
            (res > 0.0).then(|| (l.ln(), res.ln()))
        })
        .unzip();
    let residual_order = lsq::line(&px, &py).map_or(f64::NAN, |l| l.0);
    Ok(FitResult {
        parameter: slope,
        window: (0.0, lx[lx.len() - 1]),
        residual_order,
        rms_residual: rms,
    })
}

/// Eigenvalues `(λ₋, λ₊)` of the linearization of `y₁' = y₂,
/// y₂' = y₂ − y₁ + y₁³` at `(1, 0)`.
///
/// The Jacobian there is `[[0, 1], [2, 1]]`, characteristic polynomial
/// `λ² − λ − 2`.
pub fn saddle_spectrum() -> (f64, f64) {
    let (tr, det) = (1.0_f64, -2.0_f64);
    let disc = (tr * tr - 4.0 * det).sqrt();
    (0.5 * (tr - disc), 0.5 * (tr + disc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{integrate_r, DeficitSystem, RState, StepControl, XSystem};

    fn deficit_traj(x: &[f64], v: impl Fn(f64) -> f64, vp: impl Fn(f64) -> f64) -> Trajectory {
        let states: Vec<Vec<f64>> = x.iter().map(|&x| vec![v(x).ln(), vp(x) / v(x)]).collect();
        Trajectory::from_nodes(&DeficitSystem, x, &states).unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn saddle_is_exact() {
        assert_eq!(saddle_spectrum(), (-1.0, 2.0));
    }

    #[test]
    fn pure_exponential_gives_unit_ratio_deviation_zero() {
        let x = grid(8.0, 19.0, 200);
        let t = deficit_traj(&x, |x| (-x).exp(), |x| -(-x).exp());
        assert!(log_derivative_check(&t, None).unwrap() <= 1e-12);
        let xs = grid(0.5, 3.0, 50);
        let states: Vec<Vec<f64>> = xs
            .iter()
            .map(|&x| vec![1.0 - (-x).exp(), (-x).exp()])
            .collect();
        let tx = Trajectory::from_nodes(&XSystem, &xs, &states).unwrap();
        assert!(log_derivative_check(&tx, Some((0.5, 3.0))).unwrap() <= 1e-12);
    }

    #[test]
    fn second_order_term_gives_order_one_constant() {
        let x = grid(8.0, 19.0, 200);
        let v = |x: f64| (-x).exp() - (-2.0 * x).exp();
        let vp = |x: f64| -(-x).exp() + 2.0 * (-2.0 * x).exp();
        let t = deficit_traj(&x, v, vp);
        let r = log_derivative_check(&t, None).unwrap();
        assert!((r - 1.0).abs() < 1e-3, "{r}");
    }

    #[test]
    fn far_field_recovers_synthetic_coefficients() {
        let c = 4.9;
        let v = |x: f64| c * (-x).exp() - 0.75 * c * c * (-2.0 * x).exp();
        let vp = |x: f64| -c * (-x).exp() + 1.5 * c * c * (-2.0 * x).exp();
        let x = grid(0.0, 25.0, 300);
        let t = deficit_traj(&x, v, vp);
        let fit = fit_far_field(&t, FAR_BAND_HI).unwrap();
        assert!((fit.c() - c).abs() / c < 1e-10, "{fit:?}");
        assert!(fit.c_d_mismatch() < 1e-10);
        assert!((fit.slope + 1.0).abs() < 1e-3);
        assert!((fit.fit.residual_order + 2.0).abs() < 1e-2);
        assert!(fit.residual_order_reliable());
        assert!(fit.fit.window.0 > 8.0 && fit.fit.window.1 < 20.0);
    }

    #[test]
    fn far_field_window_too_short() {
        let x = grid(0.0, 5.0, 50);
        let t = deficit_traj(&x, |x| (-x).exp(), |x| -(-x).exp());
        assert!(matches!(
            fit_far_field(&t, FAR_BAND_HI),
            Err(Error::WindowTooShort { .. })
        ));
        assert!(fit_far_field(&t, 2.0).is_err());
    }

    #[test]
    fn fit_result_json_shape() {
        let f = FitResult {
            parameter: 1.5,
            window: (1.0, 2.0),
            residual_order: -2.0,
            rms_residual: 0.0,
        };
        let j = serde_json::to_value(f).unwrap();
        assert_eq!(
            j,
            serde_json::json!({"parameter": 1.5, "window": [1.0, 2.0], "residual_order": -2.0, "rms_residual": 0.0})
        );
    }

    #[test]
    fn near_origin_slope_matches_shooting_slope() {
        let ctrl = StepControl::default();
        for a in [0.3, 0.5, 1.0] {
            let t = integrate_r(RState::new(1.0, 0.0, a), &ctrl, &Default::default(), 2.0).unwrap();
            let fit = fit_near_origin(&t).unwrap();
            assert!((fit.parameter - a).abs() <= 5e-7 * a, "a = {a}: {fit:?}");
            assert!((fit.residual_order - 2.0).abs() < 0.05);
        }
    }
}
