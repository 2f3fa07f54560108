use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use super::{Domain, EventHit, OdeSystem};
use crate::error::{Error, Result};

/// Why integration stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Event(String),
    ReachedEnd,
    BlowUp,
    StepLimit,
}

/// Interpolant for one interval between consecutive nodes.
#[derive(Debug, Clone)]
pub(crate) enum Dense {
    /// Cubic Hermite from node values and node derivatives.
    Hermite,
    /// Dormand–Prince continuous extension over `[t0, t0 + h]`, stored as
    /// five coefficient blocks of length `dim`.
    Dopri { t0: f64, h: f64, coef: Box<[f64]> },
}

/// An ordered record of accepted steps with dense output and event hits.
#[derive(Debug, Clone)]
pub struct Trajectory {
    domain: Domain,
    columns: &'static [&'static str],
    dim: usize,
    t: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
    dense: Vec<Dense>,
    node_event: Vec<Option<usize>>,
    hits: Vec<EventHit>,
    termination: Termination,
}

impl Trajectory {
    pub(crate) fn empty(domain: Domain, columns: &'static [&'static str], dim: usize) -> Self {
        Self {
            domain,
            columns,
            dim,
            t: Vec::new(),
            y: Vec::new(),
            dy: Vec::new(),
            dense: Vec::new(),
            node_event: Vec::new(),
            hits: Vec::new(),
            termination: Termination::ReachedEnd,
        }
    }

    /// Build a trajectory from sampled nodes, interpolated by cubic Hermite
    /// segments using `sys` for the node derivatives.
    pub fn from_nodes<S: OdeSystem + ?Sized>(
        sys: &S,
        coords: &[f64],
        states: &[Vec<f64>],
    ) -> Result<Self> {
        if coords.len() != states.len() || coords.is_empty() {
            return Err(Error::InvalidInput(
                "need one state per coordinate and at least one node".into(),
            ));
        }
        let mut out = Self::empty(sys.domain(), sys.columns(), sys.dim());
        let mut d = vec![0.0; sys.dim()];
        for (&t, s) in coords.iter().zip(states) {
            if s.len() != sys.dim() {
                return Err(Error::InvalidInput(format!(
                    "state has {} components, system expects {}",
                    s.len(),
                    sys.dim()
                )));
            }
            if let Some(&last) = out.t.last() {
                if !(t > last) {
                    return Err(Error::InvalidInput(format!(
                        "coordinates must increase strictly ({last} then {t})"
                    )));
                }
            }
            sys.rhs(t, s, &mut d);
            out.push_node(t, s, &d, Dense::Hermite);
        }
        Ok(out)
    }

    pub(crate) fn push_node(&mut self, t: f64, y: &[f64], dy: &[f64], seg: Dense) {
        debug_assert_eq!(y.len(), self.dim);
        if !self.t.is_empty() {
            self.dense.push(seg);
        }
        self.t.push(t);
        self.y.extend_from_slice(y);
        self.dy.extend_from_slice(dy);
        self.node_event.push(None);
    }

    pub(crate) fn record_hit(&mut self, hit: EventHit, at_last_node: bool) {
        if at_last_node {
            let last = self.node_event.len() - 1;
            if self.node_event[last].is_none() {
                self.node_event[last] = Some(self.hits.len());
            }
        }
        self.hits.push(hit);
    }

    pub(crate) fn finish(&mut self, reason: Termination) {
        self.termination = reason;
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn columns(&self) -> &'static [&'static str] {
        self.columns
    }

    /// Number of state components per node (including auxiliary ones).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Independent-variable values of the nodes.
    pub fn coords(&self) -> &[f64] {
        &self.t
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.y[i * self.dim..(i + 1) * self.dim]
    }

    pub fn derivative(&self, i: usize) -> &[f64] {
        &self.dy[i * self.dim..(i + 1) * self.dim]
    }

    /// Iterate `(coordinate, state)` pairs.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.t.iter().copied().zip(self.y.chunks_exact(self.dim))
    }

    /// Component `k` at every node.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.y.chunks_exact(self.dim).map(|s| s[k]).collect()
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn hits(&self) -> &[EventHit] {
        &self.hits
    }

    pub fn first_hit(&self, label: &str) -> Option<&EventHit> {
        self.hits.iter().find(|h| h.label == label)
    }

    /// Label of the event flagged at node `i`, if any.
    pub fn node_event(&self, i: usize) -> Option<&str> {
        self.node_event[i].map(|k| self.hits[k].label.as_str())
    }

    pub fn termination(&self) -> &Termination {
        &self.termination
    }

    /// State at `t` from the dense output. Returns `None` outside the range.
    /// At a node the stored state is returned unchanged.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.interpolate_into(t, &mut out).then_some(out)
    }

    pub(crate) fn interpolate_into(&self, t: f64, out: &mut [f64]) -> bool {
        if self.t.is_empty() || !(t >= self.start() && t <= self.end()) {
            return false;
        }
        let i = match self.t.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => {
                out.copy_from_slice(self.state(i));
                return true;
            }
            Err(i) => i - 1,
        };
        self.eval_segment(i, t, out);
        true
    }

    pub(crate) fn eval_segment(&self, i: usize, t: f64, out: &mut [f64]) {
        match &self.dense[i] {
            Dense::Dopri { t0, h, coef } => dopri_eval(self.dim, *t0, *h, coef, t, out),
            Dense::Hermite => {
                let (t0, t1) = (self.t[i], self.t[i + 1]);
                let h = t1 - t0;
                let s = (t - t0) / h;
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                let (y0, y1) = (self.state(i), self.state(i + 1));
                let (d0, d1) = (self.derivative(i), self.derivative(i + 1));
                for k in 0..self.dim {
                    out[k] = h00 * y0[k] + h10 * h * d0[k] + h01 * y1[k] + h11 * h * d1[k];
                }
            }
        }
    }

    /// Nodes with coordinate in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.nodes().filter(move |(t, _)| *t >= lo && *t <= hi)
    }

    /// Keep nodes up to and including `t_end`, adding an interpolated node at
    /// `t_end` if it falls between nodes.
    pub fn truncated(&self, t_end: f64) -> Self {
        let mut out = self.clone();
        if t_end >= self.end() {
            return out;
        }
        let keep = self.t.partition_point(|&v| v <= t_end).max(1);
        out.t.truncate(keep);
        out.y.truncate(keep * self.dim);
        out.dy.truncate(keep * self.dim);
        out.node_event.truncate(keep);
        out.dense.truncate(keep - 1);
        out.hits.retain(|h| h.location <= t_end);
        if out.end() < t_end {
            let mut s = vec![0.0; self.dim];
            self.eval_segment(keep - 1, t_end, &mut s);
            let d = self.dy_at_fraction(keep - 1, t_end);
            let seg = self.dense[keep - 1].clone();
            out.push_node(t_end, &s, &d, seg);
        }
        out.termination = Termination::ReachedEnd;
        out
    }

    fn dy_at_fraction(&self, i: usize, t: f64) -> Vec<f64> {
        // Linear blend of node derivatives; only used to seed Hermite data
        // at a truncation point.
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.derivative(i)
            .iter()
            .zip(self.derivative(i + 1))
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Rebuild in another chart. `map` sends `(coordinate, state)` to the new
    /// coordinate and leading two components; auxiliary components are dropped.
    pub(crate) fn map_chart<S, F>(
        &self,
        domain: Domain,
        columns: &'static [&'static str],
        sys: &S,
        map: F,
    ) -> Result<Self>
    where
        S: OdeSystem + ?Sized,
        F: Fn(f64, &[f64]) -> (f64, [f64; 2]),
    {
        debug_assert_eq!(sys.domain(), domain);
        let mut out = Self::empty(domain, columns, 2);
        let mut d = [0.0; 2];
        for (t, s) in self.nodes() {
            let (c, v) = map(t, s);
            if let Some(&last) = out.t.last() {
                if !(c > last) {
                    return Err(Error::InvalidInput(format!(
                        "chart map is not increasing near {t}"
                    )));
                }
            }
            sys.rhs(c, &v, &mut d);
            out.push_node(c, &v, &d, Dense::Hermite);
        }
        out.node_event.clone_from(&self.node_event);
        out.hits = self
            .hits
            .iter()
            .map(|h| {
                let (c, v) = map(h.location, &h.state);
                EventHit {
                    label: h.label.clone(),
                    location: c,
                    state: v.to_vec(),
                    terminal: h.terminal,
                }
            })
            .collect();
        out.termination = self.termination.clone();
        Ok(out)
    }

    /// CSV with the exported columns, 17 significant digits, and a trailing
    /// `event` column naming the event localized at that row.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let ncols = self.columns.len();
        s.push_str(&self.columns.join(","));
        s.push_str(",event\n");
        for i in 0..self.len() {
            let _ = write!(s, "{:.16e}", self.t[i]);
            for v in &self.state(i)[..ncols - 1] {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push(',');
            if let Some(label) = self.node_event(i) {
                s.push_str(label);
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

pub(crate) fn dopri_eval(dim: usize, t0: f64, h: f64, coef: &[f64], t: f64, out: &mut [f64]) {
    let theta = (t - t0) / h;
    let theta1 = 1.0 - theta;
    for k in 0..dim {
        let c = |j: usize| coef[j * dim + k];
        out[k] = c(0) + theta * (c(1) + theta1 * (c(2) + theta * (c(3) + theta1 * c(4))));
    }
}
