//! Convergence indices computed from a run record, plus the analytic
//! settling-time bound used as a pure diagnostic.

use serde::Serialize;

use super::record::{RunRecord, Tick};
use crate::{Error, Result};

/// Summary indices over one run. Times are seconds; step counts are ticks.
/// `None` marks a threshold that was never crossed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub e1_initial: f64,
    pub e1_final: f64,
    /// First step with `|e1| < threshold`; `None` when the run never got there.
    pub t_max_steps: Option<usize>,
    /// Time to decay to 10% of the initial error.
    pub t_d: Option<f64>,
    pub t_d_steps: Option<usize>,
    /// Time from the 10% crossing to the threshold crossing.
    pub t_s: Option<f64>,
    /// Rectangle-rule integral of `|e1|` over the logged ticks.
    pub iae: f64,
    pub t1_final: f64,
    pub t1_max: f64,
    /// Mean prediction error over the last (up to) 100 ticks.
    pub t1_tail_mean: f64,
}

pub fn compute_metrics(rec: &RunRecord, threshold: f64) -> Metrics {
    compute_metrics_ticks(&rec.ticks, threshold)
}

pub fn compute_metrics_ticks(ticks: &[Tick], threshold: f64) -> Metrics {
    if ticks.is_empty() {
        return Metrics {
            e1_initial: 0.0,
            e1_final: 0.0,
            t_max_steps: None,
            t_d: None,
            t_d_steps: None,
            t_s: None,
            iae: 0.0,
            t1_final: 0.0,
            t1_max: 0.0,
            t1_tail_mean: 0.0,
        };
    }
    let e1_initial = ticks[0].norm_e1;
    let e1_final = ticks[ticks.len() - 1].norm_e1;
    let t_max_steps = ticks.iter().position(|tk| tk.norm_e1 < threshold);
    let (t_d, t_d_steps, t_s) = if e1_initial < threshold {
        (Some(0.0), Some(0), Some(0.0))
    } else {
        let decade = ticks
            .iter()
            .enumerate()
            .find(|(_, tk)| tk.norm_e1 <= 0.1 * e1_initial);
        let cross = ticks.iter().find(|tk| tk.norm_e1 < threshold);
        let t_d = decade.map(|(_, tk)| tk.t);
        let t_d_steps = decade.map(|(i, _)| i);
        let t_s = match (t_d, cross) {
            (Some(td), Some(tc)) => Some((tc.t - td).max(0.0)),
            _ => None,
        };
        (t_d, t_d_steps, t_s)
    };
    let iae: f64 = ticks
        .windows(2)
        .map(|w| w[0].norm_e1 * (w[1].t - w[0].t))
        .sum();
    let t1_final = ticks[ticks.len() - 1].t1;
    let t1_max = ticks.iter().map(|tk| tk.t1).fold(0.0, f64::max);
    let tail = &ticks[ticks.len().saturating_sub(100)..];
    let t1_tail_mean = tail.iter().map(|tk| tk.t1).sum::<f64>() / tail.len() as f64;
    Metrics {
        e1_initial,
        e1_final,
        t_max_steps,
        t_d,
        t_d_steps,
        t_s,
        iae,
        t1_final,
        t1_max,
        t1_tail_mean,
    }
}

/// Analytic settling-time bound for the practical finite-time estimator:
/// residual-set radius `Omega = b / ((1 - v) a)` and
/// `T_s = (2 / (a v)) (sqrt(V2_0) - Omega)`, clamped at zero.
///
/// The constants `a` and `b` depend on unknown disturbance bounds, so this is
/// documentation-grade only and never asserted against measured times.
pub fn compute_ts_bound(v2_0: f64, a: f64, b: f64, v: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !(0.0..1.0).contains(&v) || v == 0.0 || !(b >= 0.0) || !(v2_0 >= 0.0) {
        return Err(Error::InvalidConfiguration(format!(
            "settling bound inputs a={a} b={b} v={v} V2_0={v2_0}"
        )));
    }
    let omega = b / ((1.0 - v) * a);
    let t_s = (2.0 / (a * v)) * (v2_0.sqrt() - omega);
    Ok((t_s.max(0.0), omega))
}
