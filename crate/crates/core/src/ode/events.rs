use std::fmt;

use serde::{Deserialize, Serialize};

/// Which sign changes of an event function count as a hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Any,
    /// Negative before, non-negative after.
    Rising,
    /// Positive before, non-positive after.
    Falling,
}

impl Direction {
    pub(crate) fn triggered(self, before: f64, after: f64) -> bool {
        let rising = before < 0.0 && after >= 0.0;
        let falling = before > 0.0 && after <= 0.0;
        match self {
            Direction::Any => rising || falling,
            Direction::Rising => rising,
            Direction::Falling => falling,
        }
    }
}

type EventFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// A scalar function of `(t, state)` whose sign changes are localized.
pub struct Event {
    pub label: String,
    pub direction: Direction,
    pub terminal: bool,
    func: Box<EventFn>,
}

impl Event {
    pub fn new<F>(label: impl Into<String>, direction: Direction, terminal: bool, func: F) -> Self
    where
        F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            direction,
            terminal,
            func: Box::new(func),
        }
    }

    pub fn eval(&self, t: f64, y: &[f64]) -> f64 {
        (self.func)(t, y)
    }
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Event")
            .field("label", &self.label)
            .field("direction", &self.direction)
            .field("terminal", &self.terminal)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Default)]
pub struct EventSpec {
    events: Vec<Event>,
}

impl EventSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with<F>(mut self, label: &str, direction: Direction, terminal: bool, func: F) -> Self
    where
        F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.events
            .push(Event::new(label, direction, terminal, func));
        self
    }

    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub(crate) fn eval_all(&self, t: f64, y: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.events.iter().map(|e| e.eval(t, y)));
    }
}

/// A localized event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventHit {
    pub label: String,
    pub location: f64,
    pub state: Vec<f64>,
    pub terminal: bool,
}

/// Relative width below which a root bracket is considered converged.
pub(crate) const LOCALIZATION_RTOL: f64 = 1e-12;

pub(crate) fn localization_width(t: f64) -> f64 {
    LOCALIZATION_RTOL * t.abs().max(1.0)
}

/// Illinois-modified regula falsi for a sign change of `g` on `[a, b]`.
///
/// `ga` and `gb` are the endpoint values, which must straddle zero (with
/// `gb` allowed to be exactly zero). Returns a point within the localization
/// width of the first root the bracket converges to.
pub(crate) fn refine_root<G>(mut g: G, mut a: f64, mut b: f64, mut ga: f64, mut gb: f64) -> f64
where
    G: FnMut(f64) -> f64,
{
    if gb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= localization_width(b) {
            break;
        }
        let mut c = (a * gb - b * ga) / (gb - ga);
        // Fall back to bisection when the secant point is degenerate.
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let gc = g(c);
        if gc == 0.0 {
            return c;
        }
        if (gc < 0.0) == (ga < 0.0) {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}
