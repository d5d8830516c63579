//! Signal-level utilities shared by the estimators and controllers:
//! elementwise fractional powers, chattering-free sign, numerical
//! differentiation, and actuator saturation.

use nalgebra::{SMatrix, SVector};
use serde::Serialize;

use crate::{Error, PoseVec, Result};

/// `sig^k(x)`: elementwise `|x_i|^k * sign(x_i)`.
pub fn sig_vec<const D: usize>(x: &SVector<f64, D>, k: f64) -> SVector<f64, D> {
    x.map(|v| v.abs().powf(k) * v.signum() * if v == 0.0 { 0.0 } else { 1.0 })
}

/// Diagonal matrix `diag(|x_i|^k)`.
pub fn diag_abs_pow<const D: usize>(x: &SVector<f64, D>, k: f64) -> SMatrix<f64, D, D> {
    SMatrix::from_diagonal(&x.map(|v| v.abs().powf(k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignMode {
    /// Exact sign with `sign(0) = 0`.
    Hard,
    /// `tanh(x / eps)` boundary-layer smoothing.
    Tanh,
}

/// Sign function configuration used wherever a switching term appears.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SignSpec {
    pub mode: SignMode,
    /// Boundary-layer width for [`SignMode::Tanh`].
    pub eps_s: f64,
}

impl Default for SignSpec {
    fn default() -> Self {
        Self {
            mode: SignMode::Tanh,
            eps_s: 0.05,
        }
    }
}

impl SignSpec {
    pub fn apply_scalar(&self, x: f64) -> f64 {
        smooth_sign(x, self.mode, self.eps_s)
    }

    pub fn apply<const D: usize>(&self, x: &SVector<f64, D>) -> SVector<f64, D> {
        x.map(|v| self.apply_scalar(v))
    }
}

pub fn smooth_sign(x: f64, mode: SignMode, eps_s: f64) -> f64 {
    match mode {
        SignMode::Hard => {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        SignMode::Tanh => (x / eps_s).tanh(),
    }
}

/// First/second derivatives of a sampled vector signal: first-order low-pass
/// on the samples, then backward differences over the retained history.
/// Outputs stay zero until three samples have been absorbed.
#[derive(Debug, Clone)]
pub struct DerivativeFilter<const D: usize> {
    a_f: f64,
    history: [(SVector<f64, D>, f64); 3],
    seen: usize,
}

impl<const D: usize> DerivativeFilter<D> {
    /// `a_f` in [0, 1): 0 disables smoothing, values near 1 smooth heavily.
    pub fn new(a_f: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a_f) {
            return Err(Error::InvalidConfiguration(format!(
                "filter pole a_f = {a_f} outside [0, 1)"
            )));
        }
        Ok(Self {
            a_f,
            history: [(SVector::zeros(), 0.0); 3],
            seen: 0,
        })
    }

    /// Absorb one sample; returns `(xdot, xddot)` (zeros during warm-up).
    pub fn update(
        &mut self,
        sample: &SVector<f64, D>,
        t: f64,
    ) -> Result<(SVector<f64, D>, SVector<f64, D>)> {
        if self.seen > 0 && t <= self.history[2].1 {
            return Err(Error::NonMonotonicTime {
                prev: self.history[2].1,
                now: t,
            });
        }
        let filtered = if self.seen == 0 {
            *sample
        } else {
            self.a_f * self.history[2].0 + (1.0 - self.a_f) * sample
        };
        self.history.rotate_left(1);
        self.history[2] = (filtered, t);
        self.seen += 1;
        if self.seen < 3 {
            return Ok((SVector::zeros(), SVector::zeros()));
        }
        let [(x0, t0), (x1, t1), (x2, t2)] = &self.history;
        let d2 = (x2 - x1) / (t2 - t1);
        let d1 = (x1 - x0) / (t1 - t0);
        let dd = (d2 - d1) / (t2 - t1);
        Ok((d2, dd))
    }
}

/// Per-axis velocity limits for the dual-gripper command.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SaturationSpec {
    /// Linear speed bound [m/s], applied to x/y components of both grippers.
    pub linear: f64,
    /// Angular speed bound [rad/s].
    pub angular: f64,
}

impl SaturationSpec {
    pub fn new(linear: f64, angular: f64) -> Result<Self> {
        if linear > 0.0 && angular > 0.0 {
            Ok(Self { linear, angular })
        } else {
            Err(Error::InvalidConfiguration(format!(
                "saturation limits {linear} m/s, {angular} rad/s"
            )))
        }
    }
}

impl Default for SaturationSpec {
    fn default() -> Self {
        Self {
            linear: 0.06,
            angular: 0.2,
        }
    }
}

/// Clamp the command layout `(x1, y1, th1, x2, y2, th2)` to the limits.
pub fn saturate(u: &PoseVec, spec: &SaturationSpec) -> PoseVec {
    let mut out = *u;
    for i in [0, 1, 3, 4] {
        out[i] = out[i].clamp(-spec.linear, spec.linear);
    }
    for i in [2, 5] {
        out[i] = out[i].clamp(-spec.angular, spec.angular);
    }
    out
}
