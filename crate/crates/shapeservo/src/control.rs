//! Shape/position controllers on the 10-dimensional feature error.
//!
//! Three laws share a damped pseudo-inverse of the estimated deformation
//! Jacobian: a resolved-rate baseline, a linear sliding-mode controller, and
//! a nonsingular terminal sliding-mode controller with fractional powers.

use nalgebra::{Cholesky, Const, SMatrix};

use crate::signals::{diag_abs_pow, sig_vec, SignSpec};
use crate::{Error, FeatureVec, Jacobian, PoseVec, Result, FEATURE_DIM};

pub type FeatureMat = SMatrix<f64, FEATURE_DIM, FEATURE_DIM>;

/// Task-space error bundle maintained by the run loop.
#[derive(Debug, Clone, Copy)]
pub struct TaskError {
    pub e1: FeatureVec,
    pub e1_dot: FeatureVec,
    pub e1_ddot: FeatureVec,
    pub e2: FeatureVec,
    pub e2_dot: FeatureVec,
    pub e2_ddot: FeatureVec,
}

impl TaskError {
    pub fn zero() -> Self {
        Self {
            e1: FeatureVec::zeros(),
            e1_dot: FeatureVec::zeros(),
            e1_ddot: FeatureVec::zeros(),
            e2: FeatureVec::zeros(),
            e2_dot: FeatureVec::zeros(),
            e2_ddot: FeatureVec::zeros(),
        }
    }
}

/// The two sliding surfaces evaluated at one tick.
#[derive(Debug, Clone, Copy)]
pub struct SlidingState {
    pub sigma1: FeatureVec,
    pub sigma2: FeatureVec,
}

impl SlidingState {
    pub fn zero() -> Self {
        Self {
            sigma1: FeatureVec::zeros(),
            sigma2: FeatureVec::zeros(),
        }
    }
}

/// SPD gain for the linear surface, with its factorization cached.
#[derive(Clone)]
pub struct LinearGains {
    k: FeatureMat,
    chol: Cholesky<f64, Const<FEATURE_DIM>>,
}

impl std::fmt::Debug for LinearGains {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearGains").field("k", &self.k).finish()
    }
}

impl LinearGains {
    pub fn new(k: FeatureMat) -> Result<Self> {
        if (k - k.transpose()).norm() > 1e-9 * k.norm().max(1.0) {
            return Err(Error::InvalidConfiguration(
                "linear surface gain must be symmetric".into(),
            ));
        }
        let chol = Cholesky::new(k).ok_or_else(|| {
            Error::InvalidConfiguration("linear surface gain must be positive definite".into())
        })?;
        Ok(Self { k, chol })
    }

    pub fn scalar(k: f64) -> Result<Self> {
        Self::new(FeatureMat::identity() * k)
    }

    pub fn matrix(&self) -> &FeatureMat {
        &self.k
    }

    pub fn solve(&self, rhs: &FeatureVec) -> FeatureVec {
        self.chol.solve(rhs)
    }
}

/// Gains of the nonsingular terminal surface `e + alpha sig^p(edot) + beta sig^q(e)`.
#[derive(Debug, Clone, Copy)]
pub struct TerminalGains {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
}

impl TerminalGains {
    /// Requires `alpha, beta > 0`, `p` strictly inside (1, 2), and `q > p`.
    pub fn new(alpha: f64, beta: f64, p: f64, q: f64) -> Result<Self> {
        if alpha > 0.0 && beta > 0.0 && p > 1.0 && p < 2.0 && q > p {
            Ok(Self { alpha, beta, p, q })
        } else {
            Err(Error::InvalidConfiguration(format!(
                "terminal gains alpha={alpha} beta={beta} p={p} q={q}"
            )))
        }
    }
}

/// `sigma = K e + edot`.
pub fn surface_linear(e: &FeatureVec, e_dot: &FeatureVec, k: &LinearGains) -> FeatureVec {
    k.matrix() * e + e_dot
}

/// `sigma = e + alpha sig^p(edot) + beta sig^q(e)`.
pub fn surface_terminal(e: &FeatureVec, e_dot: &FeatureVec, g: &TerminalGains) -> FeatureVec {
    e + g.alpha * sig_vec(e_dot, g.p) + g.beta * sig_vec(e, g.q)
}

/// Damped left pseudo-inverse `(J^T J + mu I)^{-1} J^T`.
pub fn damped_pinv(j: &Jacobian, mu: f64) -> SMatrix<f64, 6, FEATURE_DIM> {
    let jt = j.transpose();
    let gram = jt * j + SMatrix::<f64, 6, 6>::identity() * mu;
    // mu > 0 keeps the Gram matrix positive definite even at singular J.
    match Cholesky::new(gram) {
        Some(chol) => chol.solve(&jt),
        None => jt * 0.0,
    }
}

/// Resolved-rate baseline `u = -lambda_c J^+ e1`.
pub fn control_classical(e1: &FeatureVec, jhat: &Jacobian, lambda_c: f64, mu: f64) -> PoseVec {
    -lambda_c * (damped_pinv(jhat, mu) * e1)
}

/// Linear sliding-mode law `u = J^+ K1^{-1} (-sigma1 + K1 sd_dot - e1_ddot)`.
pub fn control_lsmc(
    sigma1: &FeatureVec,
    sd_dot: &FeatureVec,
    e1_ddot: &FeatureVec,
    jhat: &Jacobian,
    k1: &LinearGains,
    mu: f64,
) -> PoseVec {
    let rhs = -sigma1 + k1.matrix() * sd_dot - e1_ddot;
    damped_pinv(jhat, mu) * k1.solve(&rhs)
}

/// Terminal sliding-mode law
/// `u = J^+ (-alpha p |e1_dot|^{p-1} e1_ddot - eps1 sgn(sigma1) - beta q |e1|^{q-1} e1_dot + sd_dot)`.
#[allow(clippy::too_many_arguments)]
pub fn control_ftsmc(
    e1: &FeatureVec,
    e1_dot: &FeatureVec,
    e1_ddot: &FeatureVec,
    sigma1: &FeatureVec,
    sd_dot: &FeatureVec,
    jhat: &Jacobian,
    g: &TerminalGains,
    eps1: f64,
    sign: &SignSpec,
    mu: f64,
) -> PoseVec {
    let rhs = -g.alpha * g.p * (diag_abs_pow(e1_dot, g.p - 1.0) * e1_ddot)
        - eps1 * sign.apply(sigma1)
        - g.beta * g.q * (diag_abs_pow(e1, g.q - 1.0) * e1_dot)
        + sd_dot;
    damped_pinv(jhat, mu) * rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::SignMode;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn unit(i: usize) -> FeatureVec {
        let mut v = FeatureVec::zeros();
        v[i] = 1.0;
        v
    }

    fn random_jacobian(seed: u64) -> Jacobian {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Jacobian::from_fn(|_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn linear_surface_arithmetic() {
        let k = LinearGains::scalar(2.0).unwrap();
        let e = FeatureVec::repeat(1.0);
        let ed = FeatureVec::repeat(0.5);
        let s = surface_linear(&e, &ed, &k);
        for i in 0..10 {
            assert_relative_eq!(s[i], 2.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn terminal_surface_hand_value() {
        let g = TerminalGains::new(1.0, 1.0, 1.5, 2.0).unwrap();
        let e = unit(0) * 0.04;
        let ed = unit(0) * 0.09;
        let s = surface_terminal(&e, &ed, &g);
        // 0.04 + 0.09^1.5 + 0.04^2
        assert_relative_eq!(s[0], 0.04 + 0.09f64.powf(1.5) + 0.0016, epsilon = 1e-12);
        for i in 1..10 {
            assert_eq!(s[i], 0.0);
        }
    }

    #[test]
    fn terminal_surface_zero_at_origin() {
        let g = TerminalGains::new(0.5, 0.5, 1.5, 2.0).unwrap();
        let s = surface_terminal(&FeatureVec::zeros(), &FeatureVec::zeros(), &g);
        assert_eq!(s, FeatureVec::zeros());
    }

    #[test]
    fn gain_validation() {
        assert!(TerminalGains::new(0.5, 0.5, 1.0, 2.0).is_err()); // p not in (1,2)
        assert!(TerminalGains::new(0.5, 0.5, 2.0, 3.0).is_err());
        assert!(TerminalGains::new(0.5, 0.5, 1.5, 1.2).is_err()); // q <= p
        assert!(TerminalGains::new(-0.5, 0.5, 1.5, 2.0).is_err());
        assert!(LinearGains::scalar(-1.0).is_err());
        let mut k = FeatureMat::identity();
        k[(0, 1)] = 0.5; // asymmetric
        assert!(LinearGains::new(k).is_err());
    }

    #[test]
    fn pseudo_inverse_satisfies_moore_penrose_residual() {
        for seed in 0..5 {
            let j = random_jacobian(seed);
            let pinv = damped_pinv(&j, 1e-9);
            let defect = (j * pinv * j - j).norm();
            assert!(defect < 1e-6, "seed {seed}: defect {defect}");
        }
    }

    #[test]
    fn classical_zero_error_zero_command() {
        let u = control_classical(&FeatureVec::zeros(), &random_jacobian(1), 0.8, 1e-6);
        assert_eq!(u, PoseVec::zeros());
    }

    #[test]
    fn classical_identity_block_recovers_error() {
        // J = [I6; 0]: the pseudo-inverse simply reads off the first six
        // components, so u = -lambda_c * v.
        let mut j = Jacobian::zeros();
        for i in 0..6 {
            j[(i, i)] = 1.0;
        }
        let mut e1 = FeatureVec::zeros();
        let v = [0.3, -0.1, 0.25, 0.0, -0.4, 0.12];
        for (i, &x) in v.iter().enumerate() {
            e1[i] = x;
        }
        let u = control_classical(&e1, &j, 0.8, 1e-12);
        for i in 0..6 {
            assert_relative_eq!(u[i], -0.8 * v[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn pseudo_inverse_scale_compatibility() {
        let j = random_jacobian(2);
        let e1 = FeatureVec::from_fn(|i, _| 0.1 * (i as f64 + 1.0));
        let u1 = control_classical(&e1, &j, 1.0, 1e-6);
        let j2 = j * 2.0;
        let u2 = control_classical(&e1, &j2, 1.0, 1e-6);
        let rel = (u2 * 2.0 - u1).norm() / u1.norm();
        assert!(rel < 1e-4, "scale defect {rel}");
    }

    #[test]
    fn lsmc_idles_on_the_surface() {
        let k1 = LinearGains::scalar(0.8).unwrap();
        let u = control_lsmc(
            &FeatureVec::zeros(),
            &FeatureVec::zeros(),
            &FeatureVec::zeros(),
            &random_jacobian(3),
            &k1,
            1e-6,
        );
        assert_eq!(u, PoseVec::zeros());
    }

    #[test]
    fn lsmc_reduces_to_classical_for_static_error() {
        // With e1_dot = e1_ddot = 0 and static target, sigma1 = K1 e1 and the
        // K1 factors cancel: u = -J^+ e1 regardless of K1.
        let j = random_jacobian(4);
        let e1 = FeatureVec::from_fn(|i, _| 0.05 * (i as f64 - 4.0));
        let classical = control_classical(&e1, &j, 1.0, 1e-6);
        for k in [0.5, 0.8, 1.6] {
            let k1 = LinearGains::scalar(k).unwrap();
            let sigma1 = surface_linear(&e1, &FeatureVec::zeros(), &k1);
            let u = control_lsmc(
                &sigma1,
                &FeatureVec::zeros(),
                &FeatureVec::zeros(),
                &j,
                &k1,
                1e-6,
            );
            assert_relative_eq!((u - classical).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn ftsmc_rests_at_equilibrium() {
        let g = TerminalGains::new(0.5, 0.5, 1.5, 2.0).unwrap();
        let zero = FeatureVec::zeros();
        for mode in [SignMode::Hard, SignMode::Tanh] {
            let sign = SignSpec { mode, eps_s: 0.05 };
            let u = control_ftsmc(
                &zero,
                &zero,
                &zero,
                &zero,
                &zero,
                &random_jacobian(5),
                &g,
                0.05,
                &sign,
                1e-6,
            );
            assert_eq!(u, PoseVec::zeros(), "mode {mode:?}");
        }
    }

    #[test]
    fn ftsmc_is_continuous_near_origin_with_tanh() {
        let g = TerminalGains::new(0.5, 0.5, 1.5, 2.0).unwrap();
        let sign = SignSpec::default();
        let j = random_jacobian(6);
        let mut prev = PoseVec::zeros();
        for &scale in &[1e-2, 1e-4, 1e-6, 1e-9] {
            let e1 = FeatureVec::repeat(scale);
            let sigma1 = surface_terminal(&e1, &FeatureVec::zeros(), &g);
            let u = control_ftsmc(
                &e1,
                &FeatureVec::zeros(),
                &FeatureVec::zeros(),
                &sigma1,
                &FeatureVec::zeros(),
                &j,
                &g,
                0.05,
                &sign,
                1e-6,
            );
            assert!(u.norm() < prev.norm() + 1.0);
            prev = u;
        }
        assert!(prev.norm() < 1e-3, "command {} at 1e-9 error", prev.norm());
    }

    #[test]
    fn ftsmc_fractional_terms_stay_finite_at_zero_rate() {
        // |e1_dot|^{p-1} with p < 2 has a negative-exponent look, but the
        // diagonal form is |x|^{p-1} with p-1 > 0: zero rate must not blow up.
        let g = TerminalGains::new(0.5, 0.5, 1.5, 2.0).unwrap();
        let e1 = FeatureVec::repeat(0.2);
        let sigma1 = surface_terminal(&e1, &FeatureVec::zeros(), &g);
        let u = control_ftsmc(
            &e1,
            &FeatureVec::zeros(),
            &FeatureVec::repeat(5.0),
            &sigma1,
            &FeatureVec::zeros(),
            &random_jacobian(7),
            &g,
            0.05,
            &SignSpec::default(),
            1e-6,
        );
        assert!(u.iter().all(|v| v.is_finite()));
    }
}
