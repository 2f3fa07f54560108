//! The verification suite: every checkable statement about the problem,
//! each reduced to a [`CheckReport`].

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    fit_far_field, fit_near_origin, log_derivative_check, saddle_spectrum, FAR_BAND_HI,
};
use crate::error::{Error, Result};
use crate::ode::{integrate_r, integrate_x, EventSpec, RState, StepControl, XState};
use crate::shooting::{
    classify, connecting_orbit, energy_identity, find_astar, lemma2_witness, linear_limit_report,
    AstarResult, OutcomeTag, DEFAULT_X_MAX, X_MINUS,
};
use crate::variational::{
    crossing_curve, crossing_radius, finite_difference_check, slope_check, solve_sensitivity,
    wronskian_residual, FD_DELTA_DEFAULT,
};

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub detail: String,
}

impl CheckReport {
    pub fn pass(check: &str) -> Self {
        Self {
            check: check.to_string(),
            passed: true,
            metrics: BTreeMap::new(),
            detail: String::new(),
        }
    }

    pub fn fail(check: &str, detail: impl Into<String>) -> Self {
        Self {
            check: check.to_string(),
            passed: false,
            metrics: BTreeMap::new(),
            detail: detail.into(),
        }
    }

    pub fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    fn require(&mut self, ok: bool, what: impl fmt::Display) {
        if !ok {
            self.passed = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(&what.to_string());
        }
    }

    fn set(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }
}

pub const CHECKS: &[&str] = &[
    "lemma2",
    "lemma3",
    "energy",
    "astar",
    "lemma4",
    "sensitivity",
    "lemma5",
    "wronskian",
    "crossing_curve",
    "equivalence",
    "saddle",
];

/// Loosest relative tolerance the suite accepts. The thresholds below are
/// meaningless once the integrator itself is this coarse.
pub const VERIFY_RTOL_MAX: f64 = 1e-6;

pub const ASTAR_BRACKET: (f64, f64) = (0.01, 0.71);
/// A second bracket with a different lower end, both endpoints classified.
pub const ASTAR_ALT_BRACKET: (f64, f64) = (0.05, 0.705);
pub const ASTAR_TOL: f64 = 1e-10;
pub const ORBIT_X_MAX: f64 = 25.0;
pub const STEP_GRID_POINTS: usize = 50;

pub const LEMMA2_SLOPES: &[f64] = &[0.75, 1.0, 2.0, 5.0];
pub const LEMMA3_SLOPES: &[f64] = &[1e-2, 5e-3, 2.5e-3];
pub const ENERGY_SLOPES: &[f64] = &[0.3, 0.8, 1.0];
pub const FD_PROBES: &[f64] = &[1.5, 2.0, 3.0];
pub const LEMMA5_SLOPES: &[f64] = &[0.75, 0.9, 1.0, 2.0];
pub const EQUIVALENCE_SLOPES: &[f64] = &[0.1, 0.5, 1.0];
pub const ODD_SLOPES: &[f64] = &[0.2, 0.7];
pub const SENSITIVITY_R_MAX: f64 = 20.0;

#[derive(Debug, Clone, Default)]
pub struct VerifyConfig {
    pub ctrl: StepControl,
    /// Replaces the default slope lists of the checks that take one.
    pub a: Option<f64>,
    /// Subset of [`CHECKS`] to run; all when `None`.
    pub only: Option<Vec<String>>,
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        self.ctrl.validate()?;
        if self.ctrl.rtol > VERIFY_RTOL_MAX {
            return Err(Error::InvalidInput(format!(
                "verification needs rtol <= {VERIFY_RTOL_MAX:e}, got {:e}",
                self.ctrl.rtol
            )));
        }
        if let Some(a) = self.a {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::InvalidInput(format!("invalid slope {a}")));
            }
        }
        if let Some(only) = &self.only {
            if only.is_empty() {
                return Err(Error::InvalidInput("empty check list".into()));
            }
            if let Some(bad) = only.iter().find(|c| !CHECKS.contains(&c.as_str())) {
                return Err(Error::InvalidInput(format!(
                    "unknown check '{bad}' (known: {})",
                    CHECKS.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn slopes(&self, default: &[f64]) -> Vec<f64> {
        self.a.map_or_else(|| default.to_vec(), |a| vec![a])
    }
}

/// Shared state across checks; `a*` is computed at most once.
struct Suite<'a> {
    cfg: &'a VerifyConfig,
    astar: OnceCell<std::result::Result<AstarResult, String>>,
}

impl Suite<'_> {
    fn astar(&self) -> Result<&AstarResult> {
        self.astar
            .get_or_init(|| {
                find_astar(ASTAR_BRACKET, ASTAR_TOL, &self.cfg.ctrl, DEFAULT_X_MAX)
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::Precondition(format!("a* unavailable: {e}")))
    }

    fn ctrl(&self) -> &StepControl {
        &self.cfg.ctrl
    }
}

/// Run the configured checks in [`CHECKS`] order.
pub fn verify(cfg: &VerifyConfig) -> Result<Vec<CheckReport>> {
    cfg.validate()?;
    let suite = Suite {
        cfg,
        astar: OnceCell::new(),
    };
    Ok(CHECKS
        .iter()
        .filter(|c| match &cfg.only {
            Some(o) => o.iter().any(|x| x == *c),
            None => true,
        })
        .map(|&name| {
            run(&suite, name).unwrap_or_else(|e| {
                let mut r = CheckReport::fail(name, e.to_string());
                if let Error::CheckFailed {
                    node: Some((t, y, yp)),
                    ..
                } = e
                {
                    r.set("node_t", t);
                    r.set("node_y", y);
                    r.set("node_yp", yp);
                }
                r
            })
        })
        .collect())
}

fn run(s: &Suite, name: &str) -> Result<CheckReport> {
    match name {
        "lemma2" => lemma2(s),
        "lemma3" => lemma3(s),
        "energy" => energy(s),
        "astar" => astar(s),
        "lemma4" => lemma4(s),
        "sensitivity" => sensitivity(s),
        "lemma5" => lemma5(s),
        "wronskian" => wronskian(s),
        "crossing_curve" => crossing(s),
        "equivalence" => equivalence(s),
        "saddle" => saddle(),
        _ => Err(Error::InvalidInput(format!("unknown check '{name}'"))),
    }
}

fn lemma2(s: &Suite) -> Result<CheckReport> {
    let mut r = CheckReport::pass("lemma2");
    for a in s.cfg.slopes(LEMMA2_SLOPES) {
        let w = lemma2_witness(a, s.ctrl())?;
        r.set(format!("x1[{a}]"), w.metrics["x1"]);
        r.set(format!("x_plus[{a}]"), w.metrics["x_plus"]);
    }
    Ok(r)
}

fn lemma3(s: &Suite) -> Result<CheckReport> {
    let mut r = CheckReport::pass("lemma3");
    let mut errs = Vec::new();
    for &a in LEMMA3_SLOPES {
        let rep = linear_limit_report(a, s.ctrl())?;
        r.set(format!("sup_error[{a}]"), rep.sup_error);
        r.require(
            rep.deriv_zero_at.is_some_and(|x| x < X_MINUS),
            format_args!(
                "a = {a}: y' does not vanish before x- ({:?})",
                rep.deriv_zero_at
            ),
        );
        r.require(
            rep.min_y > 0.0,
            format_args!("a = {a}: y reaches {}", rep.min_y),
        );
        errs.push(rep.sup_error);
    }
    for (i, w) in errs.windows(2).enumerate() {
        let ratio = w[0] / w[1];
        r.set(format!("ratio[{i}]"), ratio);
        r.require(
            (3.4..=4.6).contains(&ratio),
            format_args!("error ratio {ratio} outside [3.4, 4.6]"),
        );
    }
    Ok(r)
}

fn energy(s: &Suite) -> Result<CheckReport> {
    let mut r = CheckReport::pass("energy");
    for a in s.cfg.slopes(ENERGY_SLOPES) {
        let e = energy_identity(a, s.ctrl())?;
        r.set(format!("rel_dev[{a}]"), e.max_rel_deviation);
        r.require(
            e.max_rel_deviation <= 1e-8,
            format_args!("a = {a}: deviation {:e}", e.max_rel_deviation),
        );
    }
    Ok(r)
}

/// Outcome of `classify` on `a_i = 0.71·i/n`, `i = 1..=n`.
pub fn step_grid(n: usize, ctrl: &StepControl) -> Result<Vec<(f64, OutcomeTag)>> {
    (1..=n)
        .map(|i| {
            let a = ASTAR_BRACKET.1 * i as f64 / n as f64;
            classify(a, ctrl, DEFAULT_X_MAX).map(|o| (a, o.tag))
        })
        .collect()
}

/// `true` when every tag below `a_star` is DerivCrossedZero and every tag
/// above is CrossedOne.
pub fn is_clean_step(grid: &[(f64, OutcomeTag)], a_star: f64) -> bool {
    grid.iter().all(|&(a, tag)| {
        if a < a_star {
            tag == OutcomeTag::DerivCrossedZero
        } else {
            tag == OutcomeTag::CrossedOne
        }
    })
}

fn astar(s: &Suite) -> Result<CheckReport> {
    let res = s.astar()?;
    let mut r = CheckReport::pass("astar")
        .metric("a_star", res.a_star)
        .metric("width", res.width())
        .metric("iterations", res.iterations as f64);
    r.require(
        res.width() <= ASTAR_TOL,
        format_args!("bracket width {:e}", res.width()),
    );

    let alt = find_astar(ASTAR_ALT_BRACKET, ASTAR_TOL, s.ctrl(), DEFAULT_X_MAX)?;
    let diff = (alt.a_star - res.a_star).abs();
    r.set("alt_bracket_diff", diff);
    r.require(
        diff <= 2.0 * ASTAR_TOL,
        format_args!("second bracket differs by {diff:e}"),
    );

    let grid = step_grid(STEP_GRID_POINTS, s.ctrl())?;
    r.require(
        is_clean_step(&grid, res.a_star),
        "classifier grid is not a clean step",
    );
    Ok(r)
}

fn lemma4(s: &Suite) -> Result<CheckReport> {
    let res = s.astar()?;
    let orbit = connecting_orbit(res, ORBIT_X_MAX, s.ctrl())?;
    let xt = orbit.x_trajectory()?;
    let mut r = CheckReport::pass("lemma4")
        .metric("nodes", xt.len() as f64)
        .metric("joints", orbit.joints.len() as f64);
    if let Some((x, st)) = xt
        .nodes()
        .skip(1)
        .find(|(_, st)| !(st[0] > 0.0 && st[0] < 1.0 && st[1] > 0.0))
    {
        return Err(Error::CheckFailed {
            check: "lemma4".into(),
            detail: format!("monotone approach violated at x = {x}"),
            node: Some((x, st[0], st[1])),
        });
    }
    let fit = fit_far_field(&orbit.trajectory, FAR_BAND_HI)?;
    let (lambda_minus, _) = saddle_spectrum();
    r.set("c", fit.c());
    r.set("d", fit.d);
    r.set("slope", fit.slope);
    r.set("residual_order", fit.fit.residual_order);
    r.set("c_d_mismatch", fit.c_d_mismatch());
    r.set("window_lo", fit.fit.window.0);
    r.set("window_hi", fit.fit.window.1);
    r.require(fit.c() > 0.0, "c <= 0");
    r.require(
        (fit.slope + 1.0).abs() <= 1e-3,
        format_args!("slope {}", fit.slope),
    );
    r.require(
        (fit.slope - lambda_minus).abs() <= 1e-3,
        "slope disagrees with the stable eigenvalue",
    );
    if fit.residual_order_reliable() {
        r.require(
            (fit.fit.residual_order + 2.0).abs() <= 0.1,
            format_args!("residual order {}", fit.fit.residual_order),
        );
    }
    r.require(
        fit.c_d_mismatch() <= 1e-6,
        format_args!("|c - d|/c = {:e}", fit.c_d_mismatch()),
    );
    let ld = log_derivative_check(&orbit.trajectory, Some((10.0, 20.0)))?;
    r.set("log_derivative_ratio", ld);
    r.require(ld <= 10.0, format_args!("log-derivative ratio {ld}"));

    let near = integrate_r(
        RState::new(1.0, 0.0, res.a_star),
        s.ctrl(),
        &EventSpec::new(),
        2.0,
    )?;
    let nf = fit_near_origin(&near)?;
    let rel = (nf.parameter - res.a_star).abs() / res.a_star;
    r.set("near_origin_rel", rel);
    r.require(
        rel <= 1e-6,
        format_args!("near-origin slope off by {rel:e}"),
    );
    Ok(r)
}

fn sensitivity(s: &Suite) -> Result<CheckReport> {
    let mut r = CheckReport::pass("sensitivity");
    let slopes = match s.cfg.a {
        Some(a) => vec![a],
        None => vec![0.5, s.astar()?.a_star],
    };
    for a in slopes {
        let err = finite_difference_check(a, FD_DELTA_DEFAULT, FD_PROBES, s.ctrl())?;
        r.set(format!("fd_rel[{a}]"), err);
        r.require(
            err <= 1e-4,
            format_args!("a = {a}: ψ vs finite difference {err:e}"),
        );
    }
    let p = solve_sensitivity(0.0, SENSITIVITY_R_MAX, s.ctrl())?;
    let s3 = 3f64.sqrt();
    let euler = p
        .nodes()
        .map(|n| (n.psi - 2.0 / s3 * n.r.sqrt() * (0.5 * s3 * n.r.ln()).sin()).abs())
        .fold(0.0, f64::max);
    r.set("euler_error", euler);
    r.require(
        euler <= 1e-8,
        format_args!("closed form at a = 0 off by {euler:e}"),
    );
    Ok(r)
}

fn lemma5(s: &Suite) -> Result<CheckReport> {
    let mut r = CheckReport::pass("lemma5");
    for a in s.cfg.slopes(LEMMA5_SLOPES) {
        let r1 = crossing_radius(a, s.ctrl())?;
        let p = solve_sensitivity(a, r1, s.ctrl())?;
        let min_psi = p
            .nodes()
            .skip(1)
            .map(|n| n.psi)
            .fold(f64::INFINITY, f64::min);
        r.set(format!("min_psi[{a}]"), min_psi);
        r.require(
            min_psi > 0.0,
            format_args!("a = {a}: ψ reaches {min_psi:e} before r1"),
        );
    }
    if s.cfg.a.is_none() {
        let a = s.astar()?.a_star;
        let p = solve_sensitivity(a, SENSITIVITY_R_MAX, s.ctrl())?;
        r.require(
            p.r_end() >= SENSITIVITY_R_MAX,
            format_args!("integration stopped at r = {}", p.r_end()),
        );
        let (min_psi, min_psip) = p
            .nodes()
            .skip(1)
            .fold((f64::INFINITY, f64::INFINITY), |(m, mp), n| {
                (m.min(n.psi), mp.min(n.psip))
            });
        r.set("min_psi[a*]", min_psi);
        r.set("min_psip[a*]", min_psip);
        r.require(
            min_psi > 0.0 && min_psip > 0.0,
            "ψ or ψ' not positive at a*",
        );
    }
    Ok(r)
}

fn wronskian(s: &Suite) -> Result<CheckReport> {
    let mut r = CheckReport::pass("wronskian");
    let mut runs: Vec<(f64, f64)> = Vec::new();
    match s.cfg.a {
        Some(a) => {
            let r_max = crossing_radius(a, s.ctrl()).unwrap_or(SENSITIVITY_R_MAX);
            runs.push((a, r_max));
        }
        None => {
            runs.push((0.0, SENSITIVITY_R_MAX));
            runs.push((s.astar()?.a_star, SENSITIVITY_R_MAX));
            for a in [0.5, 0.75, 1.0, 2.0] {
                runs.push((a, crossing_radius(a, s.ctrl())?));
            }
        }
    }
    for (a, r_max) in runs {
        let res = wronskian_residual(&solve_sensitivity(a, r_max, s.ctrl())?);
        r.set(format!("residual[{a}]"), res);
        r.require(res <= 1e-6, format_args!("a = {a}: residual {res:e}"));
    }
    Ok(r)
}

/// `{a*+0.01, a*+0.05, a*+0.1, a*+0.3, 0.9, 1.0}`.
pub fn crossing_grid(a_star: f64) -> Vec<f64> {
    vec![
        a_star + 0.01,
        a_star + 0.05,
        a_star + 0.1,
        a_star + 0.3,
        0.9,
        1.0,
    ]
}

fn crossing(s: &Suite) -> Result<CheckReport> {
    let curve = crossing_curve(&crossing_grid(s.astar()?.a_star), s.ctrl())?;
    let mut r = CheckReport::pass("crossing_curve");
    for (a, r1) in &curve.points {
        r.set(format!("r1[{a:.6}]"), *r1);
    }
    r.require(
        curve.is_strictly_decreasing(),
        "r1(a) is not strictly decreasing",
    );
    for row in slope_check(&curve, FD_DELTA_DEFAULT, s.ctrl())? {
        r.set(format!("slope_mismatch[{:.6}]", row.a), row.rel_mismatch);
        r.require(
            row.grid_slope < 0.0,
            format_args!("a = {}: grid slope {}", row.a, row.grid_slope),
        );
        r.require(
            row.rel_mismatch <= 1e-3,
            format_args!("a = {}: dr1/da mismatch {:e}", row.a, row.rel_mismatch),
        );
    }
    Ok(r)
}

/// Largest gap between the `x`-domain and `r`-domain solutions with slope
/// `a`, compared at the `r` nodes up to `r_max` (or the first crossing of 1).
pub fn domain_gap(a: f64, r_max: f64, ctrl: &StepControl) -> Result<f64> {
    let r_end = match classify(a.abs().max(f64::MIN_POSITIVE), ctrl, r_max.ln()) {
        Ok(o) if o.tag == OutcomeTag::CrossedOne => o.location.map_or(r_max, f64::exp),
        _ => r_max,
    };
    let none = EventSpec::new();
    let xt = integrate_x(XState::new(0.0, 0.0, a), ctrl, &none, r_end.ln())?;
    let rt = integrate_r(RState::new(1.0, 0.0, a), ctrl, &none, r_end)?;
    let mut worst: f64 = 0.0;
    for (r, st) in rt.nodes() {
        let Some(xs) = xt.interpolate(r.ln()) else {
            continue;
        };
        let x = XState::new(r.ln(), xs[0], xs[1]).to_r();
        worst = worst.max((x.f - st[0]).abs()).max((x.fp - st[1]).abs());
    }
    Ok(worst)
}

/// Largest `|y(x, −a) + y(x, a)|` over the nodes of both shots.
pub fn odd_symmetry_gap(a: f64, x_max: f64, ctrl: &StepControl) -> Result<f64> {
    let none = EventSpec::new();
    let p = integrate_x(XState::new(0.0, 0.0, a), ctrl, &none, x_max)?;
    let m = integrate_x(XState::new(0.0, 0.0, -a), ctrl, &none, x_max)?;
    let mut worst: f64 = 0.0;
    for (x, sp) in p.nodes() {
        if let Some(sm) = m.interpolate(x) {
            worst = worst.max((sp[0] + sm[0]).abs()).max((sp[1] + sm[1]).abs());
        }
    }
    Ok(worst)
}

fn equivalence(s: &Suite) -> Result<CheckReport> {
    let mut r = CheckReport::pass("equivalence");
    for a in s.cfg.slopes(EQUIVALENCE_SLOPES) {
        let gap = domain_gap(a, SENSITIVITY_R_MAX, s.ctrl())?;
        r.set(format!("domain_gap[{a}]"), gap);
        r.require(
            gap <= 1e-8,
            format_args!("a = {a}: domains differ by {gap:e}"),
        );
    }
    for a in s.cfg.slopes(ODD_SLOPES) {
        let odd = odd_symmetry_gap(a, SENSITIVITY_R_MAX.ln(), s.ctrl())?;
        r.set(format!("odd_gap[{a}]"), odd);
        r.require(
            odd <= 1e-10,
            format_args!("a = {a}: odd symmetry off by {odd:e}"),
        );
    }
    Ok(r)
}

fn saddle() -> Result<CheckReport> {
    let (lm, lp) = saddle_spectrum();
    let mut r = CheckReport::pass("saddle")
        .metric("lambda_minus", lm)
        .metric("lambda_plus", lp);
    r.require(lm == -1.0 && lp == 2.0, "spectrum is not (-1, 2)");
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_and_unknown_names() {
        let cfg = VerifyConfig {
            only: Some(vec!["saddle".into()]),
            ..Default::default()
        };
        let out = verify(&cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].passed);
        let bad = VerifyConfig {
            only: Some(vec!["nope".into()]),
            ..Default::default()
        };
        assert!(verify(&bad).is_err());
    }

    #[test]
    fn loose_tolerance_rejected() {
        let cfg = VerifyConfig {
            ctrl: StepControl::with_tolerances(1e-2, 1e-12),
            ..Default::default()
        };
        assert!(matches!(verify(&cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn single_slope_lemma2() {
        let cfg = VerifyConfig {
            only: Some(vec!["lemma2".into()]),
            a: Some(1.0),
            ..Default::default()
        };
        let out = verify(&cfg).unwrap();
        assert!(out[0].passed, "{:?}", out[0]);
        assert!(out[0].metrics.contains_key("x1[1]"));
    }

    #[test]
    fn failing_witness_is_reported_not_raised() {
        let cfg = VerifyConfig {
            only: Some(vec!["lemma2".into()]),
            a: Some(0.5),
            ..Default::default()
        };
        let out = verify(&cfg).unwrap();
        assert!(!out[0].passed);
    }

    #[test]
    fn full_suite_passes() {
        let out = verify(&VerifyConfig::default()).unwrap();
        assert_eq!(out.len(), CHECKS.len());
        for r in &out {
            assert!(r.passed, "{}: {} {:?}", r.check, r.detail, r.metrics);
        }
    }
}
