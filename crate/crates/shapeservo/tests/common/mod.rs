//! Shared fixtures for the integration suites: the synthetic estimator race,
//! a random-contour generator, command-limit audits, and lazily shared
//! scenario runs (each expensive scenario is computed once per test binary).
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapeservo::control::{surface_linear, surface_terminal, LinearGains, TerminalGains};
use shapeservo::estimation::{
    beta_update, estimation_error, ftsmc_jacobian_update, lsmc_jacobian_update, EstimatorInputs,
    FtsmcLaw, LkfState, LsmcLaw, RlsState, BETA0,
};
use shapeservo::geometry::Contour;
use shapeservo::harness::{
    run_scenario, ControlMethod, RunRecord, ScenarioConfig, TargetSpec,
};
use shapeservo::signals::{DerivativeFilter, SignSpec};
use shapeservo::{FeatureVec, Jacobian, PoseVec};

/// Path of a committed scenario file, resolved from the package root.
pub fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn load_scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::from_path(&scenario_path(name))
        .unwrap_or_else(|e| panic!("loading {name}: {e}"))
}

// ---------------------------------------------------------------------------
// Random smooth contours (pixel coordinates).

/// Star-shaped blob with harmonics 2..=5 at random amplitude and phase: no
/// reflection or rotation symmetry survives, so every invariant channel
/// carries real signal, and the radius stays positive so the polygon never
/// self-intersects.
pub fn random_blob(rng: &mut ChaCha8Rng) -> Contour {
    let n = 200;
    let tau = std::f64::consts::TAU;
    let cx = rng.gen_range(280.0..360.0);
    let cy = rng.gen_range(200.0..280.0);
    let r0 = rng.gen_range(60.0..120.0);
    let harmonics: Vec<(f64, f64, f64)> = (2..=5)
        .map(|k| (k as f64, rng.gen_range(0.03..0.12), rng.gen_range(0.0..tau)))
        .collect();
    let pts = (0..n)
        .map(|i| {
            let th = tau * i as f64 / n as f64;
            let bump: f64 = harmonics.iter().map(|(k, a, ph)| a * (k * th + ph).cos()).sum();
            let r = r0 * (1.0 + bump);
            Point2::new(cx + r * th.cos(), cy + r * th.sin())
        })
        .collect();
    Contour::new(pts).expect("blob contour is valid by construction")
}

// ---------------------------------------------------------------------------
// Command-limit audit.

/// Every logged command must respect the component-wise actuation limits:
/// indices 0, 1, 3, 4 are linear velocities, 2 and 5 angular.
pub fn assert_commands_within_limits(rec: &RunRecord, linear: f64, angular: f64) {
    for (k, tick) in rec.ticks.iter().enumerate() {
        for i in [0usize, 1, 3, 4] {
            assert!(
                tick.u[i].abs() <= linear,
                "{} tick {k}: |u[{i}]| = {} exceeds linear limit {linear}",
                rec.method,
                tick.u[i].abs()
            );
        }
        for i in [2usize, 5] {
            assert!(
                tick.u[i].abs() <= angular,
                "{} tick {k}: |u[{i}]| = {} exceeds angular limit {angular}",
                rec.method,
                tick.u[i].abs()
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Lazily shared scenario runs.

pub struct TimedRun {
    pub record: RunRecord,
    pub seconds: f64,
}

fn timed(cfg: &ScenarioConfig) -> TimedRun {
    let start = Instant::now();
    let record = run_scenario(cfg);
    TimedRun {
        record,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// The four controller/estimator pairings on the committed cable scenario,
/// run sequentially so each run's wall time is its own.
pub fn cable_runs() -> &'static Vec<TimedRun> {
    static RUNS: OnceLock<Vec<TimedRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let base = load_scenario("cable.cfg");
        ControlMethod::ALL
            .iter()
            .map(|&method| {
                let mut cfg = base.clone();
                cfg.method = method;
                cfg.estimator_override = None;
                timed(&cfg)
            })
            .collect()
    })
}

pub fn box_run() -> &'static TimedRun {
    static RUN: OnceLock<TimedRun> = OnceLock::new();
    RUN.get_or_init(|| timed(&load_scenario("rigid_box.cfg")))
}

pub fn beam_run() -> &'static TimedRun {
    static RUN: OnceLock<TimedRun> = OnceLock::new();
    RUN.get_or_init(|| timed(&load_scenario("nh_beam.cfg")))
}

/// Cable scenario with the target equal to the start configuration, forced to
/// run a fixed 200-step horizon.
pub fn quiescent_run() -> &'static TimedRun {
    static RUN: OnceLock<TimedRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut cfg = load_scenario("cable.cfg");
        cfg.method = ControlMethod::Ftsmc;
        cfg.target = TargetSpec::Pose(cfg.init_pose);
        cfg.min_steps = 200;
        cfg.max_steps = 200;
        timed(&cfg)
    })
}

// ---------------------------------------------------------------------------
// Estimator race on a synthetic linear plant.

pub struct RaceOutcome {
    pub name: &'static str,
    pub t1_at_10: f64,
    pub tail_mean: f64,
}

/// Sequential per-axis half-sine bursts with zero-stops between them; the
/// second sweep repeats the axes with opposite sign so the excursion returns.
/// Amplitudes under 25% of peak are clamped to exact zero, so the laws'
/// actuation guard freezes updates around the direction switches.
pub fn dwell_command(k: usize, amp: f64, burst: usize, stop: usize) -> PoseVec {
    let seg = burst + stop;
    let m = (k / seg) % 12;
    let phase = k % seg;
    let mut u = PoseVec::zeros();
    if phase < burst {
        let x = std::f64::consts::PI * (phase as f64 + 0.5) / burst as f64;
        let a = x.sin();
        if a >= 0.25 {
            u[m % 6] = amp * a * if m / 6 == 0 { 1.0 } else { -1.0 };
        }
    }
    u
}

/// Race the four update laws against the same exactly-linear plant under the
/// same persistently exciting command schedule, from the same wrong initial
/// estimate. Returns the open-loop prediction defect early in the run and
/// its mean over the last 100 steps, per method.
pub fn run_race() -> Vec<RaceOutcome> {
    let dt = 0.1;
    let steps = 500;
    let burst = 28;
    let stop = 3;
    let amp = 0.05;

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let j_true = Jacobian::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    let j0 = Jacobian::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    let k2 = LinearGains::scalar(1.0).unwrap();
    let lsmc = LsmcLaw::new(1.0).unwrap();
    let ftsmc = FtsmcLaw::new(
        0.05,
        TerminalGains::new(0.3, 0.3, 1.5, 2.0).unwrap(),
        SignSpec::default(),
    )
    .unwrap();

    ["rls", "lkf", "lsmc", "ftsmc"]
        .into_iter()
        .map(|which| {
            let mut jhat = j0;
            let mut rls = RlsState::new(0.96, 10.0).unwrap();
            let mut lkf = LkfState::new(1e-6, 2e-6, 1.0).unwrap();
            let mut fs = DerivativeFilter::<10>::new(0.0).unwrap();
            let mut fe2_fast = DerivativeFilter::<10>::new(0.2).unwrap();
            let mut fe2_slow = DerivativeFilter::<10>::new(1.0 - dt / 400.0).unwrap();
            let mut fu = DerivativeFilter::<6>::new(0.0).unwrap();
            let mut s = FeatureVec::zeros();
            let s0 = s;
            let mut dr_cum = PoseVec::zeros();
            let mut u_prev = PoseVec::zeros();
            let mut beta = BETA0;
            let mut t1_at_10 = f64::NAN;
            let mut tail = Vec::new();
            for k in 0..steps {
                let t = k as f64 * dt;
                let t1 = ((s - s0) - jhat * dr_cum).norm();
                if k == 10 {
                    t1_at_10 = t1;
                }
                if k + 100 >= steps {
                    tail.push(t1);
                }
                let (s_dot, s_ddot) = fs.update(&s, t).unwrap();
                let (u_dot, _) = fu.update(&u_prev, t).unwrap();
                if k >= 2 {
                    let e2 = estimation_error(&jhat, &s_dot, &u_prev);
                    let (e2_dot, _) = fe2_fast.update(&e2, t).unwrap();
                    let (_, e2_ddot) = fe2_slow.update(&e2, t).unwrap();
                    if k >= 12 {
                        let mut inp = EstimatorInputs::zero(dt);
                        inp.s_ddot = s_ddot;
                        inp.u = u_prev;
                        inp.u_dot = u_dot;
                        inp.e2 = e2;
                        inp.e2_dot = e2_dot;
                        inp.e2_ddot = e2_ddot;
                        inp.delta_s = s_dot * dt;
                        inp.delta_r = u_prev * dt;
                        inp.sigma2 = match which {
                            "lsmc" => surface_linear(&e2, &e2_dot, &k2),
                            "ftsmc" => surface_terminal(&e2, &e2_dot, &ftsmc.gains),
                            _ => FeatureVec::zeros(),
                        };
                        beta = beta_update(beta, &u_prev, 1.0, 0.1, dt);
                        match which {
                            "rls" => rls.update(&mut jhat, &inp.delta_s, &inp.delta_r),
                            "lkf" => lkf.update(&mut jhat, &inp.delta_s, &inp.delta_r),
                            "lsmc" => lsmc_jacobian_update(&mut jhat, &inp, &lsmc, 1e3, beta),
                            _ => ftsmc_jacobian_update(&mut jhat, &inp, &ftsmc, 1e3, beta),
                        }
                    }
                }
                let u = dwell_command(k, amp, burst, stop);
                s += j_true * u * dt;
                dr_cum += u * dt;
                u_prev = u;
            }
            let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
            RaceOutcome {
                name: which,
                t1_at_10,
                tail_mean,
            }
        })
        .collect()
}
