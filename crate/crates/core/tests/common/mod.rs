//! Independent fixed-step reference integrator for the shooting problem.
//!
//! Classical fourth-order Runge–Kutta on `y'' = y' + y³ − y`, no step
//! control, no dense output. Shares nothing with the library beyond the
//! equation itself.

#![allow(dead_code)]

pub const H: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Cross,
    Turn,
    Open,
}

fn f(y: f64, yp: f64) -> (f64, f64) {
    (yp, yp + y * y * y - y)
}

pub fn rk4(y: f64, yp: f64, h: f64) -> (f64, f64) {
    let (k1, l1) = f(y, yp);
    let (k2, l2) = f(y + 0.5 * h * k1, yp + 0.5 * h * l1);
    let (k3, l3) = f(y + 0.5 * h * k2, yp + 0.5 * h * l2);
    let (k4, l4) = f(y + h * k3, yp + h * l3);
    (
        y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
        yp + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4),
    )
}

/// First event of the shot with slope `a` on `[0, x_max]`, located by
/// bisecting the length of a single RK4 substep from the last node.
pub fn shoot(a: f64, x_max: f64) -> (Tag, f64) {
    let (mut y, mut yp) = (0.0, a);
    let n = (x_max / H).ceil() as usize;
    for i in 0..n {
        let (y1, yp1) = rk4(y, yp, H);
        let cross = y < 1.0 && y1 >= 1.0;
        let turn = yp > 0.0 && yp1 <= 0.0;
        if cross || turn {
            let g = |s: f64| {
                let (ys, yps) = rk4(y, yp, s);
                (ys - 1.0, yps)
            };
            let root = |which: usize| {
                let (mut lo, mut hi) = (0.0, H);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let v = g(mid);
                    let v = if which == 0 { v.0 >= 0.0 } else { v.1 <= 0.0 };
                    if v {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            };
            let x0 = i as f64 * H;
            let sc = if cross { root(0) } else { f64::INFINITY };
            let st = if turn { root(1) } else { f64::INFINITY };
            return if sc <= st {
                (Tag::Cross, x0 + sc)
            } else {
                (Tag::Turn, x0 + st)
            };
        }
        y = y1;
        yp = yp1;
    }
    (Tag::Open, x_max)
}

/// Bisection for the slope separating `Turn` from `Cross`.
pub fn astar(mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    assert_eq!(shoot(lo, 40.0).0, Tag::Turn);
    assert_eq!(shoot(hi, 40.0).0, Tag::Cross);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let mut x_max = 40.0;
        let tag = loop {
            match shoot(mid, x_max) {
                (Tag::Open, _) if x_max < 200.0 => x_max *= 2.0,
                (t, _) => break t,
            }
        };
        match tag {
            Tag::Cross => hi = mid,
            Tag::Turn => lo = mid,
            Tag::Open => panic!("oracle cannot decide a = {mid}"),
        }
    }
    0.5 * (lo + hi)
}

/// `(y, y')` at `x` from a fixed-step run.
pub fn state_at(a: f64, x: f64) -> (f64, f64) {
    let n = (x / H).floor() as usize;
    let (mut y, mut yp) = (0.0, a);
    for _ in 0..n {
        (y, yp) = rk4(y, yp, H);
    }
    rk4(y, yp, x - n as f64 * H)
}
