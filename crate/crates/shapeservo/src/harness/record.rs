//! Per-tick run logs and their CSV/JSON serializations.

use std::io::Write;

use crate::{Error, Result};

/// Schema tag written into every log header; bump when columns change.
pub const LOG_VERSION: &str = "servo-log-v1";

/// One control tick. `u` is the command applied over `[t, t + dt)`; the final
/// tick of a run carries `u = 0` since no further command is issued.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Tick {
    pub t: f64,
    pub r: [f64; 6],
    pub u: [f64; 6],
    pub s: [f64; 10],
    pub shat: [f64; 10],
    pub e1: [f64; 10],
    pub e2: [f64; 10],
    pub sigma1: [f64; 10],
    pub sigma2: [f64; 10],
    pub norm_e1: f64,
    pub norm_e2: f64,
    pub norm_sigma1: f64,
    pub norm_sigma2: f64,
    pub t1: f64,
    pub beta_hat: f64,
}

/// Complete record of one scenario run.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunRecord {
    pub version: &'static str,
    pub method: String,
    pub converged: bool,
    /// Commands actually applied (ticks minus the final observation).
    pub steps: usize,
    pub dt: f64,
    pub threshold: f64,
    pub target: [f64; 10],
    /// Populated when the run aborted (estimator divergence, invalid plant
    /// state); the record then holds everything logged up to the abort.
    pub error: Option<String>,
    pub ticks: Vec<Tick>,
}

impl RunRecord {
    /// CSV with a versioned header comment and a fixed 39-column schema.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {} method={}", LOG_VERSION, self.method)?;
        write!(w, "t")?;
        for i in 0..6 {
            write!(w, ",r{i}")?;
        }
        for i in 0..6 {
            write!(w, ",u{i}")?;
        }
        for i in 0..10 {
            write!(w, ",s{i}")?;
        }
        for i in 0..10 {
            write!(w, ",e1_{i}")?;
        }
        writeln!(w, ",norm_e1,norm_e2,norm_sigma1,norm_sigma2,T1,beta_hat")?;
        for tick in &self.ticks {
            write!(w, "{}", tick.t)?;
            for v in tick.r.iter().chain(&tick.u) {
                write!(w, ",{v}")?;
            }
            for v in tick.s.iter().chain(&tick.e1) {
                write!(w, ",{v}")?;
            }
            writeln!(
                w,
                ",{},{},{},{},{},{}",
                tick.norm_e1,
                tick.norm_e2,
                tick.norm_sigma1,
                tick.norm_sigma2,
                tick.t1,
                tick.beta_hat
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Full record (vectors included) as pretty JSON.
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)
            .map_err(|e| Error::Config(format!("JSON serialization: {e}")))
    }

    pub fn max_command_norm(&self) -> f64 {
        self.ticks
            .iter()
            .map(|t| t.u.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.ticks.iter().all(|t| {
            t.r.iter()
                .chain(&t.u)
                .chain(&t.s)
                .chain(&t.shat)
                .chain(&t.e1)
                .chain(&t.e2)
                .chain(&t.sigma1)
                .chain(&t.sigma2)
                .all(|v| v.is_finite())
                && t.norm_e1.is_finite()
                && t.norm_e2.is_finite()
                && t.norm_sigma1.is_finite()
                && t.norm_sigma2.is_finite()
                && t.t1.is_finite()
                && t.beta_hat.is_finite()
        })
    }
}

#[cfg(test)]
pub(crate) fn blank_tick(t: f64) -> Tick {
    Tick {
        t,
        r: [0.0; 6],
        u: [0.0; 6],
        s: [0.0; 10],
        shat: [0.0; 10],
        e1: [0.0; 10],
        e2: [0.0; 10],
        sigma1: [0.0; 10],
        sigma2: [0.0; 10],
        norm_e1: 0.0,
        norm_e2: 0.0,
        norm_sigma1: 0.0,
        norm_sigma2: 0.0,
        t1: 0.0,
        beta_hat: 0.0,
    }
}
