//! Dormand–Prince 5(4) with the Hairer–Wanner continuous extension.

use super::events::{localization_width, refine_root};
use super::trajectory::{dopri_eval, Dense};
use super::{EventHit, EventSpec, OdeSystem, StepControl, Termination, Trajectory};
use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Steps smaller than this abort the integration.
pub const H_UNDERFLOW: f64 = 1e-13;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Work {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            err: vec![0.0; n],
        }
    }
}

/// Advance `sys` from `(t0, y0)` toward `t_max`.
///
/// Terminates at the first of: a terminal event, the blow-up guard, `t_max`,
/// or `ctrl.max_steps` accepted steps (reported as
/// [`Termination::StepLimit`], not as an error). Events are checked at
/// accepted step endpoints and localized on the dense output; every
/// localized event also becomes a node flagged with its label.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    ctrl: &StepControl,
    events: &EventSpec,
    t_max: f64,
) -> Result<Trajectory> {
    ctrl.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::InvalidInput(format!(
            "initial state has {} components, system expects {n}",
            y0.len()
        )));
    }
    if !t0.is_finite() || y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("initial state must be finite".into()));
    }
    if !(t_max > t0) || !t_max.is_finite() {
        return Err(Error::InvalidInput(format!(
            "end {t_max} must exceed start {t0}"
        )));
    }

    let mut traj = Trajectory::empty(sys.domain(), sys.columns(), n);
    let mut w = Work::new(n);
    let mut t = t0;
    let mut y = y0.to_vec();
    sys.rhs(t, &y, &mut w.k[0]);
    traj.push_node(t, &y, &w.k[0], Dense::Hermite);

    let mut g_prev = Vec::with_capacity(events.events().len());
    let mut g_new = Vec::with_capacity(events.events().len());
    events.eval_all(t, &y, &mut g_prev);

    let mut h = ctrl.h_init.min(ctrl.h_max);
    let mut accepted = 0usize;
    let mut last_rejected = false;

    loop {
        if accepted >= ctrl.max_steps {
            traj.finish(Termination::StepLimit);
            return Ok(traj);
        }
        let remaining = t_max - t;
        let last = h * 1.01 >= remaining;
        if last {
            h = remaining;
        }
        if h < H_UNDERFLOW {
            return Err(Error::StiffnessSuspected { t, h });
        }

        let err = stage(sys, t, &y, h, ctrl, &mut w);
        if !err.is_finite() || err > 1.0 {
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).max(FAC_MIN)
            } else {
                FAC_MIN
            };
            h *= fac;
            last_rejected = true;
            continue;
        }

        accepted += 1;
        let t_new = if last { t_max } else { t + h };
        let coef = dense_coefficients(&y, &w, h, n);

        // Events over [t, t_new].
        events.eval_all(t_new, &w.y_new, &mut g_new);
        let mut candidates: Vec<(f64, usize)> = Vec::new();
        for (i, ev) in events.events().iter().enumerate() {
            if ev.direction.triggered(g_prev[i], g_new[i]) {
                let mut buf = vec![0.0; n];
                let root = refine_root(
                    |s| {
                        dopri_eval(n, t, h, &coef, s, &mut buf);
                        ev.eval(s, &buf)
                    },
                    t,
                    t_new,
                    g_prev[i],
                    g_new[i],
                );
                candidates.push((root.clamp(t, t_new), i));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut stop_at: Option<f64> = None;
        for &(root, i) in &candidates {
            if let Some(s) = stop_at {
                // Later roots only matter when they tie with the terminal one.
                if root - s > localization_width(s) {
                    break;
                }
            }
            let ev = &events.events()[i];
            let state = if root >= t_new {
                w.y_new.clone()
            } else {
                let mut s = vec![0.0; n];
                dopri_eval(n, t, h, &coef, root, &mut s);
                s
            };
            let hit = EventHit {
                label: ev.label.clone(),
                location: root,
                state: state.clone(),
                terminal: ev.terminal,
            };
            let last_t = traj.end();
            if stop_at.is_some() || root <= last_t {
                // Ties and roots on the previous node share that node.
                traj.record_hit(hit, root <= last_t);
            } else if root >= t_new {
                traj.push_node(
                    t_new,
                    &w.y_new,
                    &w.k[6],
                    Dense::Dopri {
                        t0: t,
                        h,
                        coef: coef.clone(),
                    },
                );
                traj.record_hit(hit, true);
            } else {
                let mut d = vec![0.0; n];
                sys.rhs(root, &state, &mut d);
                traj.push_node(
                    root,
                    &state,
                    &d,
                    Dense::Dopri {
                        t0: t,
                        h,
                        coef: coef.clone(),
                    },
                );
                traj.record_hit(hit, true);
            }
            if ev.terminal && stop_at.is_none() {
                stop_at = Some(root);
            }
        }

        if let Some(s) = stop_at {
            let label = traj
                .hits()
                .iter()
                .find(|h| h.terminal && h.location == s)
                .map(|h| h.label.clone())
                .unwrap_or_default();
            traj.finish(Termination::Event(label));
            return Ok(traj);
        }

        if traj.end() < t_new {
            traj.push_node(t_new, &w.y_new, &w.k[6], Dense::Dopri { t0: t, h, coef });
        }

        if sys.guard(&w.y_new) > ctrl.blowup_bound {
            traj.finish(Termination::BlowUp);
            return Ok(traj);
        }
        if last {
            traj.finish(Termination::ReachedEnd);
            return Ok(traj);
        }

        // FSAL: the last stage is the derivative at the new point.
        t = t_new;
        y.copy_from_slice(&w.y_new);
        w.k.swap(0, 6);
        std::mem::swap(&mut g_prev, &mut g_new);

        let mut fac = if err == 0.0 {
            FAC_MAX
        } else {
            (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
        };
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        h = (h * fac).min(ctrl.h_max);
    }
}

/// One trial step. Fills `w.y_new`, `w.k[1..=6]` and returns the scaled
/// error norm.
fn stage<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    h: f64,
    ctrl: &StepControl,
    w: &mut Work,
) -> f64 {
    let n = y.len();
    let Work { k, tmp, y_new, err } = w;
    let [k1, k2, k3, k4, k5, k6, k7] = k;

    for i in 0..n {
        tmp[i] = y[i] + h * A21 * k1[i];
    }
    sys.rhs(t + C2 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    sys.rhs(t + C3 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    sys.rhs(t + C4 * h, tmp, k4);
    for i in 0..n {
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    sys.rhs(t + C5 * h, tmp, k5);
    for i in 0..n {
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    sys.rhs(t + h, tmp, k6);
    for i in 0..n {
        y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    sys.rhs(t + h, y_new, k7);

    let mut sum = 0.0;
    for i in 0..n {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = ctrl.atol + ctrl.rtol * y[i].abs().max(y_new[i].abs());
        let e = err[i] / sc;
        sum += e * e;
    }
    if y_new.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    (sum / n as f64).sqrt()
}

fn dense_coefficients(y: &[f64], w: &Work, h: f64, n: usize) -> Box<[f64]> {
    let mut c = vec![0.0; 5 * n].into_boxed_slice();
    let k = &w.k;
    for i in 0..n {
        let ydiff = w.y_new[i] - y[i];
        let bspl = h * k[0][i] - ydiff;
        c[i] = y[i];
        c[n + i] = ydiff;
        c[2 * n + i] = bspl;
        c[3 * n + i] = ydiff - h * k[6][i] - bspl;
        c[4 * n + i] = h
            * (D1 * k[0][i]
                + D3 * k[2][i]
                + D4 * k[3][i]
                + D5 * k[4][i]
                + D6 * k[5][i]
                + D7 * k[6][i]);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{Direction, Domain, OdeSystem};

    /// y' = y on [0, 1].
    struct Growth;

    impl OdeSystem for Growth {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[0];
        }
        fn domain(&self) -> Domain {
            Domain::X
        }
        fn columns(&self) -> &'static [&'static str] {
            &["t", "y"]
        }
        fn guard(&self, _y: &[f64]) -> f64 {
            0.0
        }
    }

    /// Harmonic oscillator, y'' = −y.
    struct Oscillator;

    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
        fn domain(&self) -> Domain {
            Domain::X
        }
        fn columns(&self) -> &'static [&'static str] {
            &["t", "y", "yp"]
        }
    }

    #[test]
    fn exponential_growth_to_tolerance() {
        let ctrl = StepControl::default();
        let tr = integrate(&Growth, 0.0, &[1.0], &ctrl, &EventSpec::new(), 1.0).unwrap();
        assert_eq!(tr.end(), 1.0);
        assert!((tr.last_state()[0] - std::f64::consts::E).abs() < 1e-9);
        assert_eq!(tr.termination(), &Termination::ReachedEnd);
    }

    #[test]
    fn dense_output_is_fourth_order_accurate() {
        let ctrl = StepControl::default();
        let tr = integrate(&Oscillator, 0.0, &[0.0, 1.0], &ctrl, &EventSpec::new(), 6.0).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..600 {
            let t = i as f64 * 0.01;
            let s = tr.interpolate(t).unwrap();
            worst = worst
                .max((s[0] - t.sin()).abs())
                .max((s[1] - t.cos()).abs());
        }
        assert!(worst < 1e-8, "dense error {worst:e}");
    }

    #[test]
    fn event_localized_to_first_zero_of_sine() {
        let ctrl = StepControl::default();
        let ev = EventSpec::new().with("zero", Direction::Falling, true, |_, y| y[0]);
        let tr = integrate(&Oscillator, 0.0, &[0.0, 1.0], &ctrl, &ev, 10.0).unwrap();
        let hit = tr.first_hit("zero").unwrap();
        assert!((hit.location - std::f64::consts::PI).abs() < 1e-10);
        assert_eq!(tr.end(), hit.location);
        assert_eq!(tr.termination(), &Termination::Event("zero".into()));
        assert_eq!(tr.node_event(tr.len() - 1), Some("zero"));
    }

    #[test]
    fn non_terminal_events_become_flagged_nodes() {
        let ctrl = StepControl::default();
        let ev = EventSpec::new().with("zero", Direction::Any, false, |_, y| y[0]);
        let tr = integrate(&Oscillator, 0.0, &[0.0, 1.0], &ctrl, &ev, 10.0).unwrap();
        let locs: Vec<f64> = tr.hits().iter().map(|h| h.location).collect();
        assert_eq!(locs.len(), 3);
        for (k, l) in locs.iter().enumerate() {
            assert!((l - (k + 1) as f64 * std::f64::consts::PI).abs() < 1e-9);
        }
        let flagged = (0..tr.len())
            .filter(|&i| tr.node_event(i).is_some())
            .count();
        assert_eq!(flagged, 3);
        assert!(tr.coords().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn step_limit_is_a_termination_reason() {
        let ctrl = StepControl {
            max_steps: 3,
            ..StepControl::default()
        };
        let tr = integrate(
            &Oscillator,
            0.0,
            &[0.0, 1.0],
            &ctrl,
            &EventSpec::new(),
            100.0,
        )
        .unwrap();
        assert_eq!(tr.termination(), &Termination::StepLimit);
        assert_eq!(tr.len(), 4);
    }

    #[test]
    fn rejects_backward_range() {
        let ctrl = StepControl::default();
        assert!(integrate(&Growth, 1.0, &[1.0], &ctrl, &EventSpec::new(), 0.5).is_err());
    }
}
