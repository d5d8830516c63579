//! Flat `key = value` scenario configuration.
//!
//! Every key has a default; unknown or duplicated keys are rejected so a
//! typo'd scenario file fails loudly instead of silently running defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::moments::NormalizationMode;
use crate::signals::{SignMode, SignSpec};
use crate::{Error, PoseVec, Result};

/// Controller/estimator pairings exercised by `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ControlMethod {
    ClassicalRls,
    ClassicalLkf,
    Lsmc,
    Ftsmc,
}

impl ControlMethod {
    pub const ALL: [ControlMethod; 4] = [
        ControlMethod::ClassicalRls,
        ControlMethod::ClassicalLkf,
        ControlMethod::Lsmc,
        ControlMethod::Ftsmc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ControlMethod::ClassicalRls => "classical-rls",
            ControlMethod::ClassicalLkf => "classical-lkf",
            ControlMethod::Lsmc => "lsmc",
            ControlMethod::Ftsmc => "ftsmc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "classical-rls" => Ok(ControlMethod::ClassicalRls),
            "classical-lkf" => Ok(ControlMethod::ClassicalLkf),
            "lsmc" => Ok(ControlMethod::Lsmc),
            "ftsmc" => Ok(ControlMethod::Ftsmc),
            other => Err(Error::Config(format!(
                "unknown control method `{other}` (expected classical-rls, classical-lkf, lsmc, ftsmc)"
            ))),
        }
    }
}

/// Which update law maintains the Jacobian estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum EstimatorKind {
    Rls,
    Lkf,
    Lsmc,
    Ftsmc,
}

impl EstimatorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rls" => Ok(EstimatorKind::Rls),
            "lkf" => Ok(EstimatorKind::Lkf),
            "lsmc" => Ok(EstimatorKind::Lsmc),
            "ftsmc" => Ok(EstimatorKind::Ftsmc),
            other => Err(Error::Config(format!(
                "unknown estimator `{other}` (expected rls, lkf, lsmc, ftsmc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    Cable,
    Box,
    Beam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorInit {
    /// Central-difference probe around the start pose.
    Probe,
    /// Seeded random entries; exercises the adaptive laws from a cold start.
    Random,
}

/// Target feature source: a gripper pose rendered through the plant (always
/// feasible) or a raw contour file (may be unreachable).
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Pose(PoseVec),
    Contour(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub object_kind: ObjectKind,
    /// Cable/beam half-width (m).
    pub object_w: f64,
    /// Hermite tip-tangent magnitude (m).
    pub object_tau: f64,
    /// Beam rigid middle fraction.
    pub object_rho: f64,
    pub box_length: f64,
    pub box_height: f64,
    pub cam_width: f64,
    pub cam_height: f64,
    pub cam_scale: f64,
    pub dt: f64,
    pub samples: usize,
    pub a_f: f64,
    pub sign: SignSpec,
    pub limit_linear: f64,
    pub limit_angular: f64,
    pub normalization: NormalizationMode,
    pub method: ControlMethod,
    /// Overrides the estimator implied by `method` when set.
    pub estimator_override: Option<EstimatorKind>,
    pub k1: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub p1: f64,
    pub q1: f64,
    pub eps1: f64,
    pub lambda_c: f64,
    pub mu: f64,
    pub est_init: EstimatorInit,
    pub probe_delta: f64,
    pub rls_lambda: f64,
    pub rls_p0: f64,
    pub lkf_q: f64,
    pub lkf_rho_m: f64,
    pub lkf_p0: f64,
    pub k2: f64,
    pub chi: f64,
    pub gamma: f64,
    pub eps2: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub p2: f64,
    pub q2: f64,
    pub threshold: f64,
    pub max_steps: usize,
    /// Convergence exit is suppressed before this step; keeps degenerate
    /// (already-converged) scenarios running for fixed-horizon checks.
    pub min_steps: usize,
    pub seed: u64,
    pub init_pose: PoseVec,
    pub target: TargetSpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            object_kind: ObjectKind::Cable,
            object_w: 0.02,
            object_tau: 0.6,
            object_rho: 0.5,
            box_length: 0.3,
            box_height: 0.1,
            cam_width: 640.0,
            cam_height: 480.0,
            cam_scale: 500.0,
            dt: 0.02,
            samples: 300,
            a_f: 0.7,
            sign: SignSpec::default(),
            limit_linear: 0.06,
            limit_angular: 0.2,
            normalization: NormalizationMode::PerFrame,
            method: ControlMethod::Ftsmc,
            estimator_override: None,
            k1: 0.8,
            alpha1: 0.5,
            beta1: 0.5,
            p1: 1.5,
            q1: 2.0,
            eps1: 0.2,
            lambda_c: 0.8,
            mu: 1e-6,
            est_init: EstimatorInit::Probe,
            probe_delta: 1e-3,
            rls_lambda: 0.98,
            rls_p0: 10.0,
            lkf_q: 1e-6,
            lkf_rho_m: 1e-4,
            lkf_p0: 1.0,
            k2: 1.0,
            chi: 1.0,
            gamma: 0.1,
            eps2: 0.05,
            alpha2: 0.3,
            beta2: 0.3,
            p2: 1.5,
            q2: 2.0,
            threshold: 0.01,
            max_steps: 1500,
            min_steps: 0,
            seed: 0,
            init_pose: PoseVec::from_column_slice(&[-0.16, 0.03, 0.4, 0.16, -0.03, -0.4]),
            target: TargetSpec::Pose(PoseVec::from_column_slice(&[
                -0.14, 0.13, 0.4, 0.16, 0.07, -0.4,
            ])),
        }
    }
}

impl ScenarioConfig {
    /// Resolved estimator: an explicit override, or the one the controller
    /// pairing implies.
    pub fn estimator(&self) -> EstimatorKind {
        self.estimator_override.unwrap_or(match self.method {
            ControlMethod::ClassicalRls => EstimatorKind::Rls,
            ControlMethod::ClassicalLkf => EstimatorKind::Lkf,
            ControlMethod::Lsmc => EstimatorKind::Lsmc,
            ControlMethod::Ftsmc => EstimatorKind::Ftsmc,
        })
    }

    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{origin}:{}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if map.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!(
                    "{origin}:{}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Self::from_map(map, origin)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text, &path.display().to_string())
    }

    fn from_map(mut map: BTreeMap<String, String>, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();

        fn take_f64(
            map: &mut BTreeMap<String, String>,
            key: &str,
            slot: &mut f64,
        ) -> Result<()> {
            if let Some(v) = map.remove(key) {
                *slot = v
                    .parse()
                    .map_err(|_| Error::Config(format!("key `{key}`: bad number `{v}`")))?;
            }
            Ok(())
        }
        fn take_usize(
            map: &mut BTreeMap<String, String>,
            key: &str,
            slot: &mut usize,
        ) -> Result<()> {
            if let Some(v) = map.remove(key) {
                *slot = v
                    .parse()
                    .map_err(|_| Error::Config(format!("key `{key}`: bad count `{v}`")))?;
            }
            Ok(())
        }

        if let Some(v) = map.remove("object.kind") {
            cfg.object_kind = match v.as_str() {
                "cable" | "elastic-cable" => ObjectKind::Cable,
                "box" | "rigid-box" => ObjectKind::Box,
                "beam" | "nh-beam" => ObjectKind::Beam,
                other => {
                    return Err(Error::Config(format!(
                        "object.kind `{other}` (expected elastic-cable, rigid-box, nh-beam)"
                    )))
                }
            };
        }
        take_f64(&mut map, "object.w", &mut cfg.object_w)?;
        take_f64(&mut map, "object.tau", &mut cfg.object_tau)?;
        take_f64(&mut map, "object.rho", &mut cfg.object_rho)?;
        take_f64(&mut map, "object.box_length", &mut cfg.box_length)?;
        take_f64(&mut map, "object.box_height", &mut cfg.box_height)?;
        take_f64(&mut map, "camera.width", &mut cfg.cam_width)?;
        take_f64(&mut map, "camera.height", &mut cfg.cam_height)?;
        take_f64(&mut map, "camera.scale", &mut cfg.cam_scale)?;
        take_f64(&mut map, "plant.dt", &mut cfg.dt)?;
        take_usize(&mut map, "plant.N", &mut cfg.samples)?;
        take_f64(&mut map, "signals.a_f", &mut cfg.a_f)?;
        if let Some(v) = map.remove("signals.sign_mode") {
            cfg.sign.mode = match v.as_str() {
                "tanh" => SignMode::Tanh,
                "hard" => SignMode::Hard,
                other => {
                    return Err(Error::Config(format!(
                        "signals.sign_mode `{other}` (expected tanh or hard)"
                    )))
                }
            };
        }
        take_f64(&mut map, "signals.eps_s", &mut cfg.sign.eps_s)?;
        take_f64(&mut map, "limits.linear", &mut cfg.limit_linear)?;
        take_f64(&mut map, "limits.angular", &mut cfg.limit_angular)?;
        if let Some(v) = map.remove("moments.normalization") {
            cfg.normalization = match v.as_str() {
                "per-frame" => NormalizationMode::PerFrame,
                "running" => NormalizationMode::Running,
                other => {
                    return Err(Error::Config(format!(
                        "moments.normalization `{other}` (expected per-frame or running)"
                    )))
                }
            };
        }
        if let Some(v) = map.remove("control.method") {
            cfg.method = ControlMethod::parse(&v)?;
        }
        if let Some(v) = map.remove("estimator.method") {
            cfg.estimator_override = Some(EstimatorKind::parse(&v)?);
        }
        take_f64(&mut map, "control.K1", &mut cfg.k1)?;
        take_f64(&mut map, "control.alpha1", &mut cfg.alpha1)?;
        take_f64(&mut map, "control.beta1", &mut cfg.beta1)?;
        take_f64(&mut map, "control.p1", &mut cfg.p1)?;
        take_f64(&mut map, "control.q1", &mut cfg.q1)?;
        take_f64(&mut map, "control.eps1", &mut cfg.eps1)?;
        take_f64(&mut map, "control.lambda_c", &mut cfg.lambda_c)?;
        take_f64(&mut map, "control.mu", &mut cfg.mu)?;
        if let Some(v) = map.remove("estimator.init") {
            cfg.est_init = match v.as_str() {
                "probe" => EstimatorInit::Probe,
                "random" => EstimatorInit::Random,
                other => {
                    return Err(Error::Config(format!(
                        "estimator.init `{other}` (expected probe or random)"
                    )))
                }
            };
        }
        take_f64(&mut map, "estimator.delta", &mut cfg.probe_delta)?;
        take_f64(&mut map, "estimator.lambda", &mut cfg.rls_lambda)?;
        take_f64(&mut map, "estimator.p0", &mut cfg.rls_p0)?;
        take_f64(&mut map, "estimator.q", &mut cfg.lkf_q)?;
        take_f64(&mut map, "estimator.rho_m", &mut cfg.lkf_rho_m)?;
        take_f64(&mut map, "estimator.kf_p0", &mut cfg.lkf_p0)?;
        take_f64(&mut map, "estimator.K2", &mut cfg.k2)?;
        take_f64(&mut map, "estimator.chi", &mut cfg.chi)?;
        take_f64(&mut map, "estimator.gamma", &mut cfg.gamma)?;
        take_f64(&mut map, "estimator.eps2", &mut cfg.eps2)?;
        take_f64(&mut map, "estimator.alpha2", &mut cfg.alpha2)?;
        take_f64(&mut map, "estimator.beta2", &mut cfg.beta2)?;
        take_f64(&mut map, "estimator.p2", &mut cfg.p2)?;
        take_f64(&mut map, "estimator.q2", &mut cfg.q2)?;
        take_f64(&mut map, "threshold", &mut cfg.threshold)?;
        take_usize(&mut map, "max_steps", &mut cfg.max_steps)?;
        take_usize(&mut map, "min_steps", &mut cfg.min_steps)?;
        if let Some(v) = map.remove("seed") {
            cfg.seed = v
                .parse()
                .map_err(|_| Error::Config(format!("key `seed`: bad integer `{v}`")))?;
        }
        if let Some(v) = map.remove("init.pose") {
            cfg.init_pose = parse_pose(&v, "init.pose")?;
        }
        let target_pose = map.remove("target.pose");
        let target_contour = map.remove("target.contour");
        match (target_pose, target_contour) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either target.pose or target.contour, not both".into(),
                ))
            }
            (Some(p), None) => cfg.target = TargetSpec::Pose(parse_pose(&p, "target.pose")?),
            (None, Some(c)) => cfg.target = TargetSpec::Contour(PathBuf::from(c)),
            (None, None) => {}
        }

        if let Some((key, _)) = map.into_iter().next() {
            return Err(Error::Config(format!("{origin}: unknown key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::Config(format!("threshold {} not > 0", self.threshold)));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be > 0".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("plant.dt {} not > 0", self.dt)));
        }
        if self.samples < 3 {
            return Err(Error::Config(format!("plant.N {} too small", self.samples)));
        }
        Ok(())
    }
}

fn parse_pose(text: &str, key: &str) -> Result<PoseVec> {
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|_| Error::Config(format!("{key}: bad number `{tok}`")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != 6 {
        return Err(Error::Config(format!(
            "{key}: expected 6 numbers (x1 y1 th1 x2 y2 th2), got {}",
            vals.len()
        )));
    }
    Ok(PoseVec::from_column_slice(&vals))
}
