//! Online estimation of the deformation Jacobian.
//!
//! Four interchangeable updates: recursive least squares and a linear Kalman
//! filter on vec(J) as baselines, plus the two sliding-mode adaptive laws
//! paired with the sliding-mode controllers. The sliding-mode laws consume
//! numerically differentiated signals, and every error stream they act on
//! closes an algebraic loop: a correction of size d shifts the error by d the
//! same tick, and a backward second difference reports that shift as d/dt^2,
//! which the laws feed straight back. The raw loop gain is (1 - a)/dt per
//! tick, so each second-difference channel must run with pole
//! `a >= 1 - dt/4` (see [`ddot_filter_pole`]); first-difference, feature and
//! actuation streams have no such loop and keep the configured smoothing.

use nalgebra::SMatrix;

use crate::control::TerminalGains;
use crate::signals::{diag_abs_pow, SignSpec};
use crate::{Error, FeatureVec, Jacobian, PoseVec, Result};

/// Initial adaptive disturbance gain.
pub const BETA0: f64 = 0.001;
/// Below this actuation norm the pseudo-inverse of `u` is meaningless and
/// every update freezes.
pub const EPS_U: f64 = 1e-6;
/// Below this surface norm the robust (surface pseudo-inverse) terms drop out.
pub const EPS_SIGMA: f64 = 1e-9;

type Mat6 = SMatrix<f64, 6, 6>;
type Mat60 = SMatrix<f64, 60, 60>;
type Vec60 = nalgebra::SVector<f64, 60>;

/// `e2 = sdot - Jhat u`: instantaneous model residual.
pub fn estimation_error(jhat: &Jacobian, s_dot: &FeatureVec, u: &PoseVec) -> FeatureVec {
    s_dot - jhat * u
}

/// Smoothing pole for any second-difference channel that feeds back into the
/// loop that produced it: the configured `a_f` floored at `1 - dt/4`. A
/// correction of size d moves the error signal by d the same tick, the
/// backward second difference reports d/dt^2, and the laws feed that straight
/// back, so the raw loop gain is (1 - a)/dt per tick; the floor caps it at
/// 1/4. This applies to `e2_ddot` in the estimation laws and equally to
/// `e1_ddot` in the closed-loop controllers, which otherwise lock into a
/// saturation-bounded period-two limit cycle.
pub fn ddot_filter_pole(a_f: f64, dt: f64) -> f64 {
    a_f.max(1.0 - dt / 4.0)
}

/// Actuation-transient threshold for [`actuation_transient`].
pub const GATE_RATIO: f64 = 0.25;

/// Minimum actuation norm for a sliding-mode update to carry usable signal.
/// The flows divide by `|u|^2` through `u^+`, so below this floor any
/// residual in the flow terms (filter lag, numerical noise) is amplified by
/// `1/|u|` into the estimate while the motion itself reveals almost nothing
/// about the Jacobian.
pub const MIN_EXCITATION: f64 = 5e-3;

/// True when the actuation direction is changing faster than the derivative
/// filters can track. The sliding-mode flows contain `(s_ddot - J u_dot) u^+`,
/// whose defect part is `E u_dot u^+`; the component of `u_dot` parallel to
/// `u` only rescales the active column, but the orthogonal component shears
/// the whole defect matrix by up to `|u_dot_perp| dt / |u|` per tick, which
/// compounds geometrically across command jumps (saturation-boundary flips in
/// closed loop). Updates are skipped on such ticks.
pub fn actuation_transient(u: &PoseVec, u_dot: &PoseVec, dt: f64) -> bool {
    let un2 = u.norm_squared();
    if un2 <= EPS_U * EPS_U {
        // The laws freeze on vanishing actuation on their own.
        return false;
    }
    let perp = u_dot - u * (u.dot(u_dot) / un2);
    perp.norm() * dt > GATE_RATIO * un2.sqrt()
}

/// Composite admission test for the sliding-mode updates: enough excitation
/// to divide by, and a command direction steady enough to difference.
pub fn smc_update_usable(u: &PoseVec, u_dot: &PoseVec, dt: f64) -> bool {
    u.norm() >= MIN_EXCITATION && !actuation_transient(u, u_dot, dt)
}

/// Disturbance-gain adaptation `betadot = tanh(|u|^2/chi) |u|^2 - gamma beta`,
/// Euler-integrated and clamped at zero.
pub fn beta_update(beta_hat: f64, u: &PoseVec, chi: f64, gamma: f64, dt: f64) -> f64 {
    let un2 = u.norm_squared();
    let rate = (un2 / chi).tanh() * un2 - gamma * beta_hat;
    (beta_hat + rate * dt).max(0.0)
}

/// Per-tick signal bundle consumed by the updates. Baselines read
/// `delta_s`/`delta_r`; the sliding-mode laws read the derivative chain.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorInputs {
    pub s_ddot: FeatureVec,
    /// Command applied over the interval the signals were recorded on.
    pub u: PoseVec,
    pub u_dot: PoseVec,
    pub e2: FeatureVec,
    pub e2_dot: FeatureVec,
    pub e2_ddot: FeatureVec,
    pub sigma1: FeatureVec,
    pub sigma2: FeatureVec,
    pub delta_s: FeatureVec,
    pub delta_r: PoseVec,
    pub dt: f64,
}

impl EstimatorInputs {
    pub fn zero(dt: f64) -> Self {
        Self {
            s_ddot: FeatureVec::zeros(),
            u: PoseVec::zeros(),
            u_dot: PoseVec::zeros(),
            e2: FeatureVec::zeros(),
            e2_dot: FeatureVec::zeros(),
            e2_ddot: FeatureVec::zeros(),
            sigma1: FeatureVec::zeros(),
            sigma2: FeatureVec::zeros(),
            delta_s: FeatureVec::zeros(),
            delta_r: PoseVec::zeros(),
            dt,
        }
    }
}

/// Recursive least squares over the rows of J with forgetting factor.
#[derive(Debug, Clone)]
pub struct RlsState {
    pub lambda: f64,
    pub p: Mat6,
}

impl RlsState {
    pub fn new(lambda: f64, p0: f64) -> Result<Self> {
        if lambda > 0.0 && lambda <= 1.0 && p0 > 0.0 {
            Ok(Self {
                lambda,
                p: Mat6::identity() * p0,
            })
        } else {
            Err(Error::InvalidConfiguration(format!(
                "RLS lambda {lambda}, P0 {p0}"
            )))
        }
    }

    pub fn update(&mut self, jhat: &mut Jacobian, delta_s: &FeatureVec, delta_r: &PoseVec) {
        if delta_r.norm() <= EPS_U {
            return; // no excitation
        }
        let pr = self.p * delta_r;
        let gain = pr / (self.lambda + delta_r.dot(&pr));
        *jhat += (delta_s - *jhat * delta_r) * gain.transpose();
        self.p = (self.p - gain * (delta_r.transpose() * self.p)) / self.lambda;
        self.p = (self.p + self.p.transpose()) / 2.0;
    }
}

/// Linear Kalman filter on x = vec(Jhat) with measurement
/// `delta_s = (delta_r^T (x) I) x + noise`.
#[derive(Debug, Clone)]
pub struct LkfState {
    pub q: f64,
    pub rho_m: f64,
    pub p: Box<Mat60>,
}

impl LkfState {
    pub fn new(q: f64, rho_m: f64, p0: f64) -> Result<Self> {
        if q >= 0.0 && rho_m > 0.0 && p0 > 0.0 {
            Ok(Self {
                q,
                rho_m,
                p: Box::new(Mat60::identity() * p0),
            })
        } else {
            Err(Error::InvalidConfiguration(format!(
                "LKF q {q}, rho_m {rho_m}, P0 {p0}"
            )))
        }
    }

    pub fn update(&mut self, jhat: &mut Jacobian, delta_s: &FeatureVec, delta_r: &PoseVec) {
        if delta_r.norm() <= EPS_U {
            return;
        }
        // Predict: x is a random walk.
        *self.p += Mat60::identity() * self.q;
        // H = delta_r^T kron I10 maps vec(J) (column-major) to J delta_r.
        let mut h = SMatrix::<f64, 10, 60>::zeros();
        for j in 0..6 {
            for i in 0..10 {
                h[(i, 10 * j + i)] = delta_r[j];
            }
        }
        let x = Vec60::from_column_slice(jhat.as_slice());
        let s_mat = h * *self.p * h.transpose() + SMatrix::<f64, 10, 10>::identity() * self.rho_m;
        let chol = match nalgebra::Cholesky::new(s_mat) {
            Some(c) => c,
            None => return, // rho_m > 0 makes this unreachable in practice
        };
        let k = chol.solve(&(h * *self.p)).transpose(); // P H^T S^{-1}, 60x10
        let x_new = x + k * (delta_s - h * x);
        *self.p = (Mat60::identity() - k * h) * *self.p;
        *self.p = (*self.p + self.p.transpose()) / 2.0;
        *jhat = Jacobian::from_column_slice(x_new.as_slice());
    }
}

/// Gains of the linear sliding-mode adaptive law (surface gain `K2 = k2 I`).
#[derive(Debug, Clone, Copy)]
pub struct LsmcLaw {
    pub k2: f64,
}

impl LsmcLaw {
    pub fn new(k2: f64) -> Result<Self> {
        if k2 > 0.0 {
            Ok(Self { k2 })
        } else {
            Err(Error::InvalidConfiguration(format!("LSMC k2 {k2}")))
        }
    }
}

/// Gains of the terminal sliding-mode adaptive law.
#[derive(Debug, Clone, Copy)]
pub struct FtsmcLaw {
    pub eps2: f64,
    pub gains: TerminalGains,
    pub sign: SignSpec,
}

impl FtsmcLaw {
    pub fn new(eps2: f64, gains: TerminalGains, sign: SignSpec) -> Result<Self> {
        if eps2 > 0.0 {
            Ok(Self { eps2, gains, sign })
        } else {
            Err(Error::InvalidConfiguration(format!("FTSMC eps2 {eps2}")))
        }
    }
}

/// Row pseudo-inverse `u^+ = u^T / |u|^2`, assuming the caller checked `|u|`.
fn u_pinv(u: &PoseVec) -> nalgebra::SMatrix<f64, 1, 6> {
    u.transpose() / u.norm_squared()
}

/// Linear sliding-mode Jacobian flow
/// `Jdot = (s_ddot - J u_dot - K2^{-1} varpi) u^+`, Euler-integrated.
pub fn lsmc_jacobian_update(
    jhat: &mut Jacobian,
    inp: &EstimatorInputs,
    law: &LsmcLaw,
    chi: f64,
    beta_hat: f64,
) {
    if inp.u.norm() <= EPS_U {
        return;
    }
    let un2 = inp.u.norm_squared();
    let mut varpi = -inp.sigma2 - inp.e2_ddot;
    let sn2 = inp.sigma2.norm_squared();
    if sn2.sqrt() > EPS_SIGMA {
        // Robust term through the surface pseudo-inverse sigma2 / |sigma2|^2;
        // dropped on the surface, where the stability argument cancels it.
        varpi -= inp.sigma2 / sn2 * ((un2 / chi).tanh() * beta_hat * un2);
    }
    let flow = (inp.s_ddot - *jhat * inp.u_dot - varpi / law.k2) * u_pinv(&inp.u);
    *jhat += flow * inp.dt;
}

/// Terminal sliding-mode Jacobian flow
/// `Jdot = (s_ddot - J u_dot + eps2 sgn(sigma2) + varpi
///          + alpha2 p2 |e2_dot|^{p2-1} e2_ddot + beta2 q2 |e2|^{q2-1} e2_dot) u^+`.
pub fn ftsmc_jacobian_update(
    jhat: &mut Jacobian,
    inp: &EstimatorInputs,
    law: &FtsmcLaw,
    chi: f64,
    beta_hat: f64,
) {
    if inp.u.norm() <= EPS_U {
        return;
    }
    let un2 = inp.u.norm_squared();
    let g = &law.gains;
    let mut varpi = FeatureVec::zeros();
    let sn2 = inp.sigma2.norm_squared();
    if sn2.sqrt() > EPS_SIGMA {
        varpi = inp.sigma2 / sn2
            * ((un2 / chi).tanh() * beta_hat * un2 + 0.25 * inp.sigma1.norm_squared());
    }
    let flow = (inp.s_ddot - *jhat * inp.u_dot
        + law.eps2 * law.sign.apply(&inp.sigma2)
        + varpi
        + g.alpha * g.p * (diag_abs_pow(&inp.e2_dot, g.p - 1.0) * inp.e2_ddot)
        + g.beta * g.q * (diag_abs_pow(&inp.e2, g.q - 1.0) * inp.e2_dot))
        * u_pinv(&inp.u);
    *jhat += flow * inp.dt;
}

#[derive(Debug, Clone)]
pub enum MethodState {
    Rls(RlsState),
    Lkf(LkfState),
    Lsmc(LsmcLaw),
    Ftsmc(FtsmcLaw),
}

/// Jacobian estimate plus the per-method state and the shared adaptive gain.
#[derive(Debug, Clone)]
pub struct JacobianEstimate {
    jhat: Jacobian,
    beta_hat: f64,
    chi: f64,
    gamma: f64,
    state: MethodState,
}

impl JacobianEstimate {
    pub fn new(jhat0: Jacobian, chi: f64, gamma: f64, state: MethodState) -> Result<Self> {
        if !(chi > 0.0) || !(gamma >= 0.0) {
            return Err(Error::InvalidConfiguration(format!(
                "estimator chi {chi}, gamma {gamma}"
            )));
        }
        if jhat0.iter().any(|v| !v.is_finite()) {
            return Err(Error::EstimatorDiverged("initial Jacobian"));
        }
        Ok(Self {
            jhat: jhat0,
            beta_hat: BETA0,
            chi,
            gamma,
            state,
        })
    }

    pub fn jhat(&self) -> &Jacobian {
        &self.jhat
    }

    pub fn beta_hat(&self) -> f64 {
        self.beta_hat
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn state(&self) -> &MethodState {
        &self.state
    }

    pub fn method_name(&self) -> &'static str {
        match self.state {
            MethodState::Rls(_) => "rls",
            MethodState::Lkf(_) => "lkf",
            MethodState::Lsmc(_) => "lsmc",
            MethodState::Ftsmc(_) => "ftsmc",
        }
    }

    pub fn update_beta(&mut self, u: &PoseVec, dt: f64) {
        self.beta_hat = beta_update(self.beta_hat, u, self.chi, self.gamma, dt);
    }

    /// Apply one tick of the selected update law; rejects non-finite results.
    pub fn update(&mut self, inp: &EstimatorInputs) -> Result<()> {
        match &mut self.state {
            MethodState::Rls(rls) => rls.update(&mut self.jhat, &inp.delta_s, &inp.delta_r),
            MethodState::Lkf(lkf) => lkf.update(&mut self.jhat, &inp.delta_s, &inp.delta_r),
            MethodState::Lsmc(law) => {
                if smc_update_usable(&inp.u, &inp.u_dot, inp.dt) {
                    let law = *law;
                    lsmc_jacobian_update(&mut self.jhat, inp, &law, self.chi, self.beta_hat);
                }
            }
            MethodState::Ftsmc(law) => {
                if smc_update_usable(&inp.u, &inp.u_dot, inp.dt) {
                    let law = *law;
                    ftsmc_jacobian_update(&mut self.jhat, inp, &law, self.chi, self.beta_hat);
                }
            }
        }
        if self.jhat.iter().any(|v| !v.is_finite()) {
            return Err(Error::EstimatorDiverged("Jacobian estimate"));
        }
        Ok(())
    }
}
