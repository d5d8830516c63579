//! The closed-loop scenario runner and the four-method sweep.
//!
//! Loop order per tick: observe the contour, extract features, update the
//! derivative filters, evaluate both sliding surfaces, then — unless the run
//! is over — adapt the disturbance gain, compute and saturate the command,
//! feed the estimator the signals produced by the *previous* command (the one
//! the measured derivatives correspond to), and step the plant. The open-loop
//! prediction is propagated with the post-update Jacobian and the new command.

use rand::{Rng, SeedableRng};

use super::config::{
    ControlMethod, EstimatorInit, EstimatorKind, ObjectKind, ScenarioConfig, TargetSpec,
};
use super::record::{RunRecord, Tick, LOG_VERSION};
use crate::control::{
    control_classical, control_ftsmc, control_lsmc, surface_linear, surface_terminal, LinearGains,
    TerminalGains,
};
use crate::estimation::{
    estimation_error, ddot_filter_pole, EstimatorInputs, FtsmcLaw, JacobianEstimate, LkfState,
    LsmcLaw, MethodState, RlsState,
};
use crate::geometry::{resample_closed, Contour};
use crate::moments::{extract_features, CameraSpec, FeatureExtractor};
use crate::plant::{plant_observe, plant_step, probe_initial_jacobian, GripperState, ObjectModel, Projection};
use crate::signals::{saturate, DerivativeFilter, SaturationSpec};
use crate::{FeatureVec, Jacobian, PoseVec, Result};

fn arr10(v: &FeatureVec) -> [f64; 10] {
    v.as_slice().try_into().expect("static size")
}

/// One explicit-Euler step of the open-loop feature prediction,
/// `shat' = shat + Jhat * u * dt`.
///
/// Chained from `shat(0) = s(0)` with a frozen model this is the open-loop
/// audit of that model: every defect it ever had stays in the integral. The
/// run log wants the *live* defect instead, so the loop re-anchors the
/// prediction to the current estimate each tick (see `run_inner`) rather
/// than chaining this step across estimator updates.
pub fn propagate_shat(shat: &FeatureVec, jhat: &Jacobian, u: &PoseVec, dt: f64) -> FeatureVec {
    shat + jhat * u * dt
}

fn arr6(v: &PoseVec) -> [f64; 6] {
    v.as_slice().try_into().expect("static size")
}

fn build_object(cfg: &ScenarioConfig, r0: &GripperState, proj: Projection) -> Result<ObjectModel> {
    match cfg.object_kind {
        ObjectKind::Cable => ObjectModel::elastic_cable(cfg.object_w, cfg.object_tau, proj),
        ObjectKind::Box => {
            // The grasp distance is frozen at grasp time, i.e. the start pose.
            let d0 = (r0.p1() - r0.p2()).norm();
            ObjectModel::rigid_box(cfg.box_length, cfg.box_height, d0, proj)
        }
        ObjectKind::Beam => {
            ObjectModel::nh_beam(cfg.object_w, cfg.object_tau, cfg.object_rho, proj)
        }
    }
}

/// Desired features, computed once. Pose targets render through the same
/// plant (always feasible); contour files may name an unreachable shape.
fn target_features(cfg: &ScenarioConfig, obj: &ObjectModel, cam: &CameraSpec) -> Result<FeatureVec> {
    match &cfg.target {
        TargetSpec::Pose(p) => {
            let rt = GripperState::new(*p)?;
            Ok(extract_features(&plant_observe(&rt, obj, cfg.samples)?, cam)?.s)
        }
        TargetSpec::Contour(path) => {
            let c = resample_closed(&Contour::from_path(path)?, cfg.samples)?;
            Ok(extract_features(&c, cam)?.s)
        }
    }
}

fn initial_jacobian(
    cfg: &ScenarioConfig,
    r0: &GripperState,
    obj: &ObjectModel,
    cam: &CameraSpec,
) -> Result<Jacobian> {
    match cfg.est_init {
        EstimatorInit::Probe => probe_initial_jacobian(r0, obj, cfg.probe_delta, cam, cfg.samples),
        EstimatorInit::Random => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            Ok(Jacobian::from_fn(|_, _| rng.gen_range(-0.5..0.5)))
        }
    }
}

fn make_estimator(cfg: &ScenarioConfig, jhat0: Jacobian) -> Result<JacobianEstimate> {
    let state = match cfg.estimator() {
        EstimatorKind::Rls => MethodState::Rls(RlsState::new(cfg.rls_lambda, cfg.rls_p0)?),
        EstimatorKind::Lkf => MethodState::Lkf(LkfState::new(cfg.lkf_q, cfg.lkf_rho_m, cfg.lkf_p0)?),
        EstimatorKind::Lsmc => MethodState::Lsmc(LsmcLaw::new(cfg.k2)?),
        EstimatorKind::Ftsmc => MethodState::Ftsmc(FtsmcLaw::new(
            cfg.eps2,
            TerminalGains::new(cfg.alpha2, cfg.beta2, cfg.p2, cfg.q2)?,
            cfg.sign,
        )?),
    };
    JacobianEstimate::new(jhat0, cfg.chi, cfg.gamma, state)
}

/// Run one scenario to convergence, the step limit, or an abort. Faults are
/// reported in the record's `error` field rather than escalated, so a sweep
/// always yields one record per method.
pub fn run_scenario(cfg: &ScenarioConfig) -> RunRecord {
    let mut rec = RunRecord {
        version: LOG_VERSION,
        method: cfg.method.name().to_string(),
        converged: false,
        steps: 0,
        dt: cfg.dt,
        threshold: cfg.threshold,
        target: [0.0; 10],
        error: None,
        ticks: Vec::new(),
    };
    if let Err(e) = run_inner(cfg, &mut rec) {
        rec.error = Some(e.to_string());
    }
    rec.steps = rec.ticks.len().saturating_sub(1);
    rec
}

fn run_inner(cfg: &ScenarioConfig, rec: &mut RunRecord) -> Result<()> {
    cfg.validate()?;
    let cam = CameraSpec::new(cfg.cam_width, cfg.cam_height)?;
    let proj = Projection::centered(cfg.cam_scale, &cam)?;
    let r0 = GripperState::new(cfg.init_pose)?;
    let obj = build_object(cfg, &r0, proj)?;
    let s_d = target_features(cfg, &obj, &cam)?;
    rec.target = arr10(&s_d);
    let sd_dot = FeatureVec::zeros(); // static target

    let mut est = make_estimator(cfg, initial_jacobian(cfg, &r0, &obj, &cam)?)?;
    let k1 = LinearGains::scalar(cfg.k1)?;
    let g1 = TerminalGains::new(cfg.alpha1, cfg.beta1, cfg.p1, cfg.q1)?;
    let k2 = LinearGains::scalar(cfg.k2)?;
    let g2 = TerminalGains::new(cfg.alpha2, cfg.beta2, cfg.p2, cfg.q2)?;
    let sat = SaturationSpec::new(cfg.limit_linear, cfg.limit_angular)?;

    let mut extractor = FeatureExtractor::new(cam, cfg.normalization);
    let ddot_pole = ddot_filter_pole(cfg.a_f, cfg.dt);
    // The estimation-side second difference enters the sliding laws with a
    // constant coefficient, so beyond the stability floor it also needs a
    // horizon long against the run: anything shorter replays decayed error
    // history into the estimate while contributing nothing at the plateaus.
    let e2_ddot_pole = ddot_pole.max(1.0 - cfg.dt / 400.0);
    let mut f_s = DerivativeFilter::<10>::new(cfg.a_f)?;
    // Both error chains are split: first differences keep the configured
    // smoothing so the surfaces stay in phase, while second differences come
    // from heavily smoothed copies because they echo the laws' own
    // corrections (see `ddot_filter_pole`).
    let mut f_e1_dot = DerivativeFilter::<10>::new(cfg.a_f)?;
    let mut f_e1_ddot = DerivativeFilter::<10>::new(ddot_pole)?;
    let mut f_e2_dot = DerivativeFilter::<10>::new(cfg.a_f)?;
    let mut f_e2_ddot = DerivativeFilter::<10>::new(e2_ddot_pole)?;
    let mut f_u = DerivativeFilter::<6>::new(cfg.a_f)?;

    let mut r = r0;
    let mut u_prev = PoseVec::zeros();
    let mut dr_cum = PoseVec::zeros();
    let mut s0: Option<FeatureVec> = None;

    for k in 0..=cfg.max_steps {
        let t = k as f64 * cfg.dt;
        let contour = plant_observe(&r, &obj, cfg.samples)?;
        let s = extractor.extract(&contour)?.s;
        // Open-loop check of the current model: predict the whole excursion
        // from the start features and the accumulated command, so the
        // prediction error vanishes as the estimate converges instead of
        // integrating early drift forever.
        let s0v = *s0.get_or_insert(s);
        let shat_now = s0v + est.jhat() * dr_cum;
        let t1 = (s - shat_now).norm();
        let e1 = s - s_d;

        let (s_dot, s_ddot) = f_s.update(&s, t)?;
        let (e1_dot, _) = f_e1_dot.update(&e1, t)?;
        let (_, e1_ddot) = f_e1_ddot.update(&e1, t)?;
        // The model residual only means something once the feature filter
        // delivers real derivatives (k >= 2). Its own filter starts there
        // too: priming it with placeholder zeros would turn the first
        // genuine residual into a fake step with a 1/dt^2 second difference.
        let warm = k >= 2;
        let e2 = if warm {
            estimation_error(est.jhat(), &s_dot, &u_prev)
        } else {
            FeatureVec::zeros()
        };
        let (e2_dot, e2_ddot) = if warm {
            let (d, _) = f_e2_dot.update(&e2, t)?;
            let (_, dd) = f_e2_ddot.update(&e2, t)?;
            (d, dd)
        } else {
            (FeatureVec::zeros(), FeatureVec::zeros())
        };
        let (u_dot, _) = f_u.update(&u_prev, t)?;

        let sigma1 = match cfg.method {
            ControlMethod::ClassicalRls | ControlMethod::ClassicalLkf => FeatureVec::zeros(),
            ControlMethod::Lsmc => surface_linear(&e1, &e1_dot, &k1),
            ControlMethod::Ftsmc => surface_terminal(&e1, &e1_dot, &g1),
        };
        let sigma2 = match cfg.estimator() {
            EstimatorKind::Rls | EstimatorKind::Lkf => FeatureVec::zeros(),
            EstimatorKind::Lsmc => surface_linear(&e2, &e2_dot, &k2),
            EstimatorKind::Ftsmc => surface_terminal(&e2, &e2_dot, &g2),
        };

        let converged = e1.norm() < cfg.threshold && k >= cfg.min_steps;
        let finished = converged || k == cfg.max_steps;
        let u_new = if finished {
            PoseVec::zeros()
        } else {
            let raw = match cfg.method {
                ControlMethod::ClassicalRls | ControlMethod::ClassicalLkf => {
                    control_classical(&e1, est.jhat(), cfg.lambda_c, cfg.mu)
                }
                ControlMethod::Lsmc => {
                    control_lsmc(&sigma1, &sd_dot, &e1_ddot, est.jhat(), &k1, cfg.mu)
                }
                ControlMethod::Ftsmc => control_ftsmc(
                    &e1, &e1_dot, &e1_ddot, &sigma1, &sd_dot, est.jhat(), &g1, cfg.eps1,
                    &cfg.sign, cfg.mu,
                ),
            };
            saturate(&raw, &sat)
        };

        rec.ticks.push(Tick {
            t,
            r: arr6(r.vector()),
            u: arr6(&u_new),
            s: arr10(&s),
            shat: arr10(&shat_now),
            e1: arr10(&e1),
            e2: arr10(&e2),
            sigma1: arr10(&sigma1),
            sigma2: arr10(&sigma2),
            norm_e1: e1.norm(),
            norm_e2: e2.norm(),
            norm_sigma1: sigma1.norm(),
            norm_sigma2: sigma2.norm(),
            t1,
            beta_hat: est.beta_hat(),
        });

        if finished {
            rec.converged = converged;
            return Ok(());
        }

        // Adaptation engages once the residual filter is warm in turn.
        if k >= 4 {
            est.update_beta(&u_prev, cfg.dt);
            let inp = EstimatorInputs {
                s_ddot,
                u: u_prev,
                u_dot,
                e2,
                e2_dot,
                e2_ddot,
                sigma1,
                sigma2,
                delta_s: s_dot * cfg.dt,
                delta_r: u_prev * cfg.dt,
                dt: cfg.dt,
            };
            est.update(&inp)?;
        }
        r = plant_step(&r, &u_new, cfg.dt, &obj);
        dr_cum += u_new * cfg.dt;
        u_prev = u_new;
    }
    Ok(())
}

/// Run all four controller/estimator pairings on the same scenario, one
/// thread each (runs share nothing mutable).
pub fn sweep(cfg: &ScenarioConfig) -> Vec<RunRecord> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = ControlMethod::ALL
            .iter()
            .map(|&method| {
                let mut c = cfg.clone();
                c.method = method;
                c.estimator_override = None;
                scope.spawn(move || run_scenario(&c))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    })
}
