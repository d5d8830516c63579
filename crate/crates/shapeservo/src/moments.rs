//! Arc-length-weighted contour moments and the 10-dimensional feature vector.
//!
//! A contour with vertices `(u_k, v_k)` and arc increments `dm_k` yields raw
//! moments `h_ij = sum u^i v^j dm` and central moments `eta_ij` about the
//! arc-length centroid. Seven Hu-style polynomial combinations of the
//! `eta_ij` are invariant to translation and rotation of the contour (not to
//! scale); log-compression tames their dynamic range. Three pose features
//! (centroid and principal-axis angle) complete the feature vector.

use nalgebra::Point2;
use serde::Serialize;

use crate::geometry::{arc_lengths, Contour};
use crate::{Error, FeatureVec, Result};

/// Magnitudes below this are clamped before taking logs.
pub const EPS_PHI: f64 = 1e-12;
/// Below this the principal-axis angle is considered undefined (isotropic
/// second moments) and reported as zero.
pub const EPS_ANG: f64 = 1e-12;

/// Raw and central arc-length-weighted moments up to third order.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RawMoments {
    pub h00: f64,
    pub h10: f64,
    pub h01: f64,
    pub h20: f64,
    pub h11: f64,
    pub h02: f64,
    pub h30: f64,
    pub h21: f64,
    pub h12: f64,
    pub h03: f64,
    pub u_bar: f64,
    pub v_bar: f64,
    pub eta20: f64,
    pub eta11: f64,
    pub eta02: f64,
    pub eta30: f64,
    pub eta21: f64,
    pub eta12: f64,
    pub eta03: f64,
}

/// Virtual camera dimensions used to normalize centroid features.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CameraSpec {
    pub width: f64,
    pub height: f64,
}

impl CameraSpec {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite() {
            Ok(Self { width, height })
        } else {
            Err(Error::InvalidConfiguration(format!(
                "camera dimensions {width}x{height}"
            )))
        }
    }
}

pub fn raw_moments(c: &Contour) -> Result<RawMoments> {
    let dm = arc_lengths(c);
    let pts = c.points();
    let h00: f64 = dm.iter().sum();
    if h00 <= EPS_PHI {
        return Err(Error::DegenerateContour(format!(
            "total arc length {h00} leaves the centroid undefined"
        )));
    }
    let mut h10 = 0.0;
    let mut h01 = 0.0;
    for (p, &w) in pts.iter().zip(&dm) {
        h10 += p.x * w;
        h01 += p.y * w;
    }
    let u_bar = h10 / h00;
    let v_bar = h01 / h00;

    // Raw higher orders and, in the same pass, central moments about the
    // centroid (direct centered sums, not shift identities).
    let mut h20 = 0.0;
    let mut h11 = 0.0;
    let mut h02 = 0.0;
    let mut h30 = 0.0;
    let mut h21 = 0.0;
    let mut h12 = 0.0;
    let mut h03 = 0.0;
    let mut eta = [0.0f64; 7]; // 20, 11, 02, 30, 21, 12, 03
    for (p, &w) in pts.iter().zip(&dm) {
        let (u, v) = (p.x, p.y);
        h20 += u * u * w;
        h11 += u * v * w;
        h02 += v * v * w;
        h30 += u * u * u * w;
        h21 += u * u * v * w;
        h12 += u * v * v * w;
        h03 += v * v * v * w;
        let (x, y) = (u - u_bar, v - v_bar);
        eta[0] += x * x * w;
        eta[1] += x * y * w;
        eta[2] += y * y * w;
        eta[3] += x * x * x * w;
        eta[4] += x * x * y * w;
        eta[5] += x * y * y * w;
        eta[6] += y * y * y * w;
    }
    Ok(RawMoments {
        h00,
        h10,
        h01,
        h20,
        h11,
        h02,
        h30,
        h21,
        h12,
        h03,
        u_bar,
        v_bar,
        eta20: eta[0],
        eta11: eta[1],
        eta02: eta[2],
        eta30: eta[3],
        eta21: eta[4],
        eta12: eta[5],
        eta03: eta[6],
    })
}

/// The seven translation/rotation-invariant polynomial combinations of the
/// central moments.
pub fn hu_invariants(m: &RawMoments) -> [f64; 7] {
    let (e20, e11, e02) = (m.eta20, m.eta11, m.eta02);
    let (e30, e21, e12, e03) = (m.eta30, m.eta21, m.eta12, m.eta03);
    let a = e30 + e12;
    let b = e21 + e03;
    let c = e30 - 3.0 * e12;
    let d = 3.0 * e21 - e03;
    [
        e20 + e02,
        (e20 - e02).powi(2) + 4.0 * e11 * e11,
        c * c + d * d,
        a * a + b * b,
        c * a * (a * a - 3.0 * b * b) + d * b * (3.0 * a * a - b * b),
        (e20 - e02) * (a * a - b * b) + 4.0 * e11 * a * b,
        d * a * (a * a - 3.0 * b * b) - c * b * (3.0 * a * a - b * b),
    ]
}

/// `|ln |phi||` with magnitudes clamped at [`EPS_PHI`].
pub fn log_compress(phi: &[f64; 7]) -> [f64; 7] {
    phi.map(|p| p.abs().max(EPS_PHI).ln().abs())
}

/// Centroid and principal-axis angle. The angle is half the `atan2` of the
/// second central moments, wrapped to (-pi/4, pi/4]; isotropic contours
/// (both arguments below [`EPS_ANG`]) report zero.
pub fn pose_features(m: &RawMoments) -> (f64, f64, f64) {
    let num = 2.0 * m.eta11;
    let den = m.eta20 - m.eta02;
    let angle = if num.abs() < EPS_ANG && den.abs() < EPS_ANG {
        0.0
    } else {
        let mut th = 0.5 * num.atan2(den); // (-pi/2, pi/2]
        let quarter = std::f64::consts::FRAC_PI_4;
        if th > quarter {
            th -= 2.0 * quarter;
        } else if th <= -quarter {
            th += 2.0 * quarter;
        }
        th
    };
    (m.u_bar, m.v_bar, angle)
}

/// Raw features `sbar` (1..7 log-compressed invariants, 8..10 pose) and the
/// normalized feature vector `s`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShapeFeature {
    pub sbar: [f64; 10],
    pub s: FeatureVec,
}

/// Everything the feature pipeline computes for one contour. `moments` are
/// in pixel coordinates; `phi` holds the invariants actually fed into the
/// feature vector, evaluated in image-width units.
#[derive(Debug, Clone, Serialize)]
pub struct FeatureBreakdown {
    pub moments: RawMoments,
    pub phi: [f64; 7],
    pub feature: ShapeFeature,
}

/// Invariants for the feature vector are evaluated with coordinates divided
/// by the image width. On raw pixel coordinates the moments reach 1e6 and the
/// identically-zero invariants of symmetric shapes float on cancellation
/// noise far above the log clamp, varying from pose to pose; in width units
/// they land below [`EPS_PHI`] and the clamp pins them to a constant.
fn conditioned_invariants(c: &Contour, cam: &CameraSpec) -> Result<[f64; 7]> {
    let k = 1.0 / cam.width;
    let scaled = Contour::new(
        c.points()
            .iter()
            .map(|p| Point2::new(p.x * k, p.y * k))
            .collect(),
    )?;
    Ok(hu_invariants(&raw_moments(&scaled)?))
}

fn sbar_of(m: &RawMoments, phi: &[f64; 7]) -> [f64; 10] {
    let logs = log_compress(phi);
    let (u_bar, v_bar, angle) = pose_features(m);
    let mut sbar = [0.0; 10];
    sbar[..7].copy_from_slice(&logs);
    sbar[7] = u_bar;
    sbar[8] = v_bar;
    sbar[9] = angle;
    sbar
}

fn normalize(sbar: &[f64; 10], cam: &CameraSpec, span: Option<(f64, f64)>) -> FeatureVec {
    let inv = &sbar[..7];
    let mean = inv.iter().sum::<f64>() / 7.0;
    let (lo, hi) = span.unwrap_or_else(|| frame_span(sbar));
    let den = hi - lo;
    let mut s = FeatureVec::zeros();
    if den > 0.0 {
        for i in 0..7 {
            s[i] = (inv[i] - mean) / den;
        }
    }
    s[7] = (2.0 * sbar[7] - cam.width) / cam.width;
    s[8] = (2.0 * sbar[8] - cam.height) / cam.height;
    s[9] = sbar[9] / std::f64::consts::PI;
    s
}

fn frame_span(sbar: &[f64; 10]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &sbar[..7] {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Stateless per-frame feature extraction: invariants are centered on their
/// own mean and scaled by the current frame's spread.
pub fn extract_features(c: &Contour, cam: &CameraSpec) -> Result<ShapeFeature> {
    let m = raw_moments(c)?;
    let phi = conditioned_invariants(c, cam)?;
    let sbar = sbar_of(&m, &phi);
    Ok(ShapeFeature {
        sbar,
        s: normalize(&sbar, cam, None),
    })
}

pub fn extract_features_detailed(c: &Contour, cam: &CameraSpec) -> Result<FeatureBreakdown> {
    let m = raw_moments(c)?;
    let phi = conditioned_invariants(c, cam)?;
    let sbar = sbar_of(&m, &phi);
    Ok(FeatureBreakdown {
        moments: m,
        phi,
        feature: ShapeFeature {
            sbar,
            s: normalize(&sbar, cam, None),
        },
    })
}

/// How the invariant block `s_1..s_7` is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormalizationMode {
    /// Spread of the current frame's seven values (the default).
    PerFrame,
    /// Running min/max of the seven values over all frames seen so far;
    /// stabilizes the denominator along a trajectory.
    Running,
}

/// Feature extractor carrying the running-normalization state.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    cam: CameraSpec,
    mode: NormalizationMode,
    running: Option<(f64, f64)>,
}

impl FeatureExtractor {
    pub fn new(cam: CameraSpec, mode: NormalizationMode) -> Self {
        Self {
            cam,
            mode,
            running: None,
        }
    }

    pub fn extract(&mut self, c: &Contour) -> Result<ShapeFeature> {
        let m = raw_moments(c)?;
        let phi = conditioned_invariants(c, &self.cam)?;
        let sbar = sbar_of(&m, &phi);
        let span = match self.mode {
            NormalizationMode::PerFrame => None,
            NormalizationMode::Running => {
                let (lo, hi) = frame_span(&sbar);
                let merged = match self.running {
                    Some((rlo, rhi)) => (rlo.min(lo), rhi.max(hi)),
                    None => (lo, hi),
                };
                self.running = Some(merged);
                Some(merged)
            }
        };
        Ok(ShapeFeature {
            sbar,
            s: normalize(&sbar, &self.cam, span),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_rigid, resample_closed, RigidTransform2D};
    use approx::assert_relative_eq;

    fn unit_square() -> Contour {
        Contour::from_pairs([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]).unwrap()
    }

    fn cam() -> CameraSpec {
        CameraSpec::new(640.0, 480.0).unwrap()
    }

    /// Independent hand summation over the four unit-length edges.
    #[test]
    fn unit_square_raw_moments() {
        let m = raw_moments(&unit_square()).unwrap();
        assert_relative_eq!(m.h00, 4.0, epsilon = 1e-12);
        assert_relative_eq!(m.u_bar, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.v_bar, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.eta20, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.eta02, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.eta11, 0.0, epsilon = 1e-12);
        for e in [m.eta30, m.eta21, m.eta12, m.eta03] {
            assert_relative_eq!(e, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_square_invariants() {
        let phi = hu_invariants(&raw_moments(&unit_square()).unwrap());
        assert_relative_eq!(phi[0], 2.0, epsilon = 1e-12);
        for &p in &phi[1..] {
            assert_relative_eq!(p, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn translation_moves_centroid_only() {
        let c = blob(13, 1.0);
        let t = RigidTransform2D::new(0.0, 12.5, -3.25);
        let m0 = raw_moments(&c).unwrap();
        let m1 = raw_moments(&apply_rigid(&c, &t)).unwrap();
        assert_relative_eq!(m1.u_bar, m0.u_bar + 12.5, max_relative = 1e-9);
        assert_relative_eq!(m1.v_bar, m0.v_bar - 3.25, max_relative = 1e-9);
        for (a, b) in [
            (m0.eta20, m1.eta20),
            (m0.eta11, m1.eta11),
            (m0.eta02, m1.eta02),
            (m0.eta30, m1.eta30),
            (m0.eta03, m1.eta03),
        ] {
            assert_relative_eq!(a, b, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn degenerate_contour_rejected() {
        let c = Contour::from_pairs([(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)]).unwrap();
        assert!(raw_moments(&c).is_err());
    }

    /// Irregular closed test blob with no special symmetry.
    fn blob(n: usize, scale: f64) -> Contour {
        Contour::from_pairs((0..n).map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let r = scale * (1.0 + 0.31 * (3.0 * a).sin() + 0.17 * (2.0 * a + 0.5).cos());
            (r * a.cos(), r * a.sin())
        }))
        .unwrap()
    }

    fn rel_diff(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn invariants_survive_rigid_motion() {
        let c = blob(41, 80.0);
        let phi0 = hu_invariants(&raw_moments(&c).unwrap());
        for (k, (ang, tx, ty)) in [(0.7, 50.0, -20.0), (-2.1, 0.0, 7.0), (3.0, -33.0, 90.0)]
            .iter()
            .enumerate()
        {
            let t = RigidTransform2D::new(*ang, *tx, *ty);
            let phi1 = hu_invariants(&raw_moments(&apply_rigid(&c, &t)).unwrap());
            for i in 0..7 {
                assert!(
                    rel_diff(phi0[i], phi1[i]) < 1e-9,
                    "case {k}, phi{}: {} vs {}",
                    i + 1,
                    phi0[i],
                    phi1[i]
                );
            }
        }
    }

    #[test]
    fn first_invariant_scales_cubically() {
        // Doubling the contour doubles both coordinates and arc weights, so
        // second-order central moments (and phi_1) pick up a factor 8.
        let c = blob(29, 1.0);
        let doubled =
            Contour::from_pairs(c.points().iter().map(|p| (2.0 * p.x, 2.0 * p.y))).unwrap();
        let p1 = hu_invariants(&raw_moments(&c).unwrap())[0];
        let p2 = hu_invariants(&raw_moments(&doubled).unwrap())[0];
        assert_relative_eq!(p2 / p1, 8.0, max_relative = 1e-9);
    }

    #[test]
    fn log_compression_values() {
        let out = log_compress(&[1.0, (2.0f64).exp(), (-2.0f64).exp(), 0.0, -1.0, 1e-12, -1e-13]);
        assert_relative_eq!(out[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(out[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(out[2], 2.0, epsilon = 1e-12);
        let clamp = 12.0 * (10.0f64).ln(); // |ln 1e-12|
        assert_relative_eq!(out[3], clamp, epsilon = 1e-9);
        assert_relative_eq!(out[4], 0.0, epsilon = 1e-15); // sign is discarded
        assert_relative_eq!(out[5], clamp, epsilon = 1e-9);
        assert_relative_eq!(out[6], clamp, epsilon = 1e-9);
    }

    #[test]
    fn square_angle_degenerates_to_zero() {
        let (_, _, ang) = pose_features(&raw_moments(&unit_square()).unwrap());
        assert_eq!(ang, 0.0);
    }

    fn rectangle(w: f64, h: f64) -> Contour {
        let c = Contour::from_pairs([
            (-w / 2.0, -h / 2.0),
            (w / 2.0, -h / 2.0),
            (w / 2.0, h / 2.0),
            (-w / 2.0, h / 2.0),
        ])
        .unwrap();
        // 280 samples over perimeter 5.6 put a sample on every corner, so the
        // sampled point set keeps the rectangle's full symmetry and eta11
        // vanishes exactly.
        resample_closed(&c, 280).unwrap()
    }

    #[test]
    fn principal_angle_tracks_rotation() {
        let r = rectangle(2.0, 0.8);
        let (_, _, a0) = pose_features(&raw_moments(&r).unwrap());
        assert_relative_eq!(a0, 0.0, epsilon = 1e-9);
        for dth in [-0.6, -0.2, 0.15, 0.5] {
            let t = RigidTransform2D::new(dth, 0.0, 0.0);
            let (_, _, a) = pose_features(&raw_moments(&apply_rigid(&r, &t)).unwrap());
            assert_relative_eq!(a, dth, epsilon = 1e-3);
        }
    }

    #[test]
    fn angle_stays_on_principal_branch() {
        let r = rectangle(2.0, 0.8);
        // A rotation past pi/4 wraps back into (-pi/4, pi/4].
        let t = RigidTransform2D::new(1.0, 0.0, 0.0);
        let (_, _, a) = pose_features(&raw_moments(&apply_rigid(&r, &t)).unwrap());
        assert_relative_eq!(a, 1.0 - std::f64::consts::FRAC_PI_2, epsilon = 1e-3);
    }

    #[test]
    fn normalized_invariants_center_and_bound() {
        let f = extract_features(&blob(37, 90.0), &cam()).unwrap();
        let sum: f64 = f.s.as_slice()[..7].iter().sum();
        assert_relative_eq!(sum, 0.0, epsilon = 1e-9);
        for &v in &f.s.as_slice()[..7] {
            assert!(v.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn centroid_feature_normalization() {
        let cam = cam();
        // Square centered on the image center.
        let centered = Contour::from_pairs([
            (310.0, 230.0),
            (330.0, 230.0),
            (330.0, 250.0),
            (310.0, 250.0),
        ])
        .unwrap();
        let f = extract_features(&centered, &cam).unwrap();
        assert_relative_eq!(f.s[7], 0.0, epsilon = 1e-12);
        assert_relative_eq!(f.s[8], 0.0, epsilon = 1e-12);
        // Centroid at the far image corner maps to exactly (1, 1).
        let corner = Contour::from_pairs([
            (630.0, 470.0),
            (650.0, 470.0),
            (650.0, 490.0),
            (630.0, 490.0),
        ])
        .unwrap();
        let f = extract_features(&corner, &cam).unwrap();
        assert_relative_eq!(f.s[7], 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.s[8], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn all_equal_invariants_normalize_to_zero() {
        // A tiny circle-ish contour whose invariants all clamp identically is
        // hard to build; drive `normalize` directly instead.
        let sbar = [3.0; 10];
        let s = normalize(&sbar, &cam(), None);
        for i in 0..7 {
            assert_eq!(s[i], 0.0);
        }
    }

    #[test]
    fn start_point_cyclic_invariance() {
        let c = blob(53, 70.0);
        let s0 = extract_features(&c, &cam()).unwrap().sbar;
        for shift in [1, 17, 52] {
            let rotated: Vec<_> = (0..c.len())
                .map(|i| {
                    let p = c.points()[(i + shift) % c.len()];
                    (p.x, p.y)
                })
                .collect();
            let s1 = extract_features(&Contour::from_pairs(rotated).unwrap(), &cam())
                .unwrap()
                .sbar;
            for i in 0..10 {
                assert_relative_eq!(s0[i], s1[i], epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn running_normalization_reuses_widest_span() {
        let mut ext = FeatureExtractor::new(cam(), NormalizationMode::Running);
        let big = ext.extract(&blob(37, 150.0)).unwrap();
        let small_running = ext.extract(&blob(37, 2.0)).unwrap();
        let small_frame = extract_features(&blob(37, 2.0), &cam()).unwrap();
        // Same raw values, different scaling once the span is held.
        for i in 0..10 {
            assert_relative_eq!(small_running.sbar[i], small_frame.sbar[i], epsilon = 1e-12);
        }
        assert!(big.s.as_slice()[..7].iter().any(|v| v.abs() > 1e-3));
        let num = |f: &ShapeFeature, i: usize| f.s[i];
        // Running span is at least as wide as the frame span, so magnitudes shrink.
        for i in 0..7 {
            assert!(num(&small_running, i).abs() <= num(&small_frame, i).abs() + 1e-12);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn raw_invariants_rigid_motion_property(
            seedlings in proptest::collection::vec(0.05f64..1.0, 8..24),
            ang in -3.1f64..3.1,
            tx in -200.0f64..200.0,
            ty in -200.0f64..200.0,
        ) {
            let n = seedlings.len();
            let c = Contour::from_pairs(seedlings.iter().enumerate().map(|(i, r)| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                (320.0 + 100.0 * r * a.cos(), 240.0 + 100.0 * r * a.sin())
            })).unwrap();
            let t = RigidTransform2D::new(ang, tx, ty);
            let s0 = extract_features(&c, &cam()).unwrap().sbar;
            let s1 = extract_features(&apply_rigid(&c, &t), &cam()).unwrap().sbar;
            for i in 0..7 {
                proptest::prop_assert!(
                    (s0[i] - s1[i]).abs() / s0[i].abs().max(s1[i].abs()).max(1.0) < 1e-9,
                    "sbar{} {} vs {}", i + 1, s0[i], s1[i]
                );
            }
        }
    }
}
