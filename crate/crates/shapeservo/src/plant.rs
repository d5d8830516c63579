//! Quasi-static dual-gripper plant: object models that deform instantly to
//! the gripper configuration and render a closed contour into a virtual
//! camera.
//!
//! Three object families cover the rigid/deformable spectrum: a fully
//! elastic cable (cubic Hermite centerline between the gripper tips), a
//! fully rigid box (pose constrained by the grasp), and a partially rigid
//! beam (rigid middle fraction, elastic ends).

use nalgebra::{Point2, Vector2};

use crate::geometry::{resample_closed, wrap_angle, Contour};
use crate::moments::{extract_features, CameraSpec};
use crate::{Error, Jacobian, PoseVec, Result};

/// Fraction of the ring budget spent on each flat tip cap (at least one
/// vertex per cap). A function of the budget alone so the vertex allocation
/// never depends on the gripper state.
fn cap_count(n: usize) -> usize {
    (n / 64).max(1)
}

/// Split a ring budget of `n` vertices into (cap at tip 1, cap at tip 2,
/// vertices per side). Odd budgets park the spare vertex on the first cap.
fn ring_allocation(n: usize) -> Result<(usize, usize, usize)> {
    let c = cap_count(n);
    let cap_a = c + (n - 2 * c) % 2;
    let side = (n - cap_a - c) / 2;
    if side < 2 {
        return Err(Error::InvalidConfiguration(format!(
            "sample budget {n} too small for a thick ring"
        )));
    }
    Ok((cap_a, c, side))
}

/// Dual planar gripper configuration `(x1, y1, th1, x2, y2, th2)`,
/// angles wrapped to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperState {
    r: PoseVec,
}

impl GripperState {
    pub fn new(r: PoseVec) -> Result<Self> {
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfiguration(
                "non-finite gripper state".into(),
            ));
        }
        Ok(Self::wrapped(r))
    }

    fn wrapped(mut r: PoseVec) -> Self {
        r[2] = wrap_angle(r[2]);
        r[5] = wrap_angle(r[5]);
        Self { r }
    }

    pub fn vector(&self) -> &PoseVec {
        &self.r
    }

    pub fn p1(&self) -> Point2<f64> {
        Point2::new(self.r[0], self.r[1])
    }

    pub fn p2(&self) -> Point2<f64> {
        Point2::new(self.r[3], self.r[4])
    }

    pub fn theta1(&self) -> f64 {
        self.r[2]
    }

    pub fn theta2(&self) -> f64 {
        self.r[5]
    }
}

/// World-to-pixel map: `u = offset_u + scale * x`, `v = offset_v + scale * y`.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub scale: f64,
    pub offset_u: f64,
    pub offset_v: f64,
}

impl Projection {
    pub fn new(scale: f64, offset_u: f64, offset_v: f64) -> Result<Self> {
        if scale > 0.0 && scale.is_finite() {
            Ok(Self {
                scale,
                offset_u,
                offset_v,
            })
        } else {
            Err(Error::InvalidConfiguration(format!(
                "projection scale {scale}"
            )))
        }
    }

    /// Centered in a camera image.
    pub fn centered(scale: f64, cam: &CameraSpec) -> Result<Self> {
        Self::new(scale, cam.width / 2.0, cam.height / 2.0)
    }

    fn project(&self, p: Point2<f64>) -> Point2<f64> {
        Point2::new(
            self.offset_u + self.scale * p.x,
            self.offset_v + self.scale * p.y,
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ObjectModel {
    /// Elastic cable of half-width `half_width`; the centerline is a cubic
    /// Hermite spline with tip tangents `tangent_scale * (cos th, sin th)`.
    ElasticCable {
        half_width: f64,
        tangent_scale: f64,
        proj: Projection,
    },
    /// Rigid rectangle grasped at both ends; the grasp distance is fixed at
    /// grasp time and re-imposed after every integration step.
    RigidBox {
        length: f64,
        height: f64,
        grasp_distance: f64,
        proj: Projection,
    },
    /// Beam with a rigid middle fraction and elastic ends.
    NhBeam {
        half_width: f64,
        tangent_scale: f64,
        rigid_fraction: f64,
        proj: Projection,
    },
}

impl ObjectModel {
    pub fn elastic_cable(half_width: f64, tangent_scale: f64, proj: Projection) -> Result<Self> {
        if half_width > 0.0 && tangent_scale > 0.0 {
            Ok(Self::ElasticCable {
                half_width,
                tangent_scale,
                proj,
            })
        } else {
            Err(Error::InvalidConfiguration(format!(
                "cable half-width {half_width}, tangent scale {tangent_scale}"
            )))
        }
    }

    pub fn rigid_box(length: f64, height: f64, grasp_distance: f64, proj: Projection) -> Result<Self> {
        if length > 0.0 && height > 0.0 && grasp_distance > 0.0 {
            Ok(Self::RigidBox {
                length,
                height,
                grasp_distance,
                proj,
            })
        } else {
            Err(Error::InvalidConfiguration(format!(
                "box {length}x{height}, grasp distance {grasp_distance}"
            )))
        }
    }

    pub fn nh_beam(
        half_width: f64,
        tangent_scale: f64,
        rigid_fraction: f64,
        proj: Projection,
    ) -> Result<Self> {
        if half_width > 0.0 && tangent_scale > 0.0 && (0.0..1.0).contains(&rigid_fraction) {
            Ok(Self::NhBeam {
                half_width,
                tangent_scale,
                rigid_fraction,
                proj,
            })
        } else {
            Err(Error::InvalidConfiguration(format!(
                "beam half-width {half_width}, tangent scale {tangent_scale}, rigid fraction {rigid_fraction}"
            )))
        }
    }

}

/// Explicit Euler step `r' = r + u * dt`, angle-wrapped; the rigid box then
/// projects the tip pair back onto its fixed grasp distance (midpoint kept).
pub fn plant_step(r: &GripperState, u: &PoseVec, dt: f64, obj: &ObjectModel) -> GripperState {
    let mut next = r.r + u * dt;
    if let ObjectModel::RigidBox { grasp_distance, .. } = obj {
        let p1 = Vector2::new(next[0], next[1]);
        let p2 = Vector2::new(next[3], next[4]);
        let mid = (p1 + p2) / 2.0;
        let diff = p1 - p2;
        let dist = diff.norm();
        let dir = if dist > 1e-12 {
            diff / dist
        } else {
            // Tips coincide after integration: reuse the pre-step direction.
            let prev = r.p1() - r.p2();
            prev / prev.norm()
        };
        let half = grasp_distance / 2.0 * dir;
        next[0] = mid.x + half.x;
        next[1] = mid.y + half.y;
        next[3] = mid.x - half.x;
        next[4] = mid.y - half.y;
    }
    GripperState::wrapped(next)
}

fn hermite_point(p0: Vector2<f64>, m0: Vector2<f64>, p1: Vector2<f64>, m1: Vector2<f64>, t: f64) -> Vector2<f64> {
    let t2 = t * t;
    let t3 = t2 * t;
    p0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * (t3 - 2.0 * t2 + t)
        + p1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * (t3 - t2)
}

fn hermite_tangent(p0: Vector2<f64>, m0: Vector2<f64>, p1: Vector2<f64>, m1: Vector2<f64>, t: f64) -> Vector2<f64> {
    let t2 = t * t;
    p0 * (6.0 * t2 - 6.0 * t)
        + m0 * (3.0 * t2 - 4.0 * t + 1.0)
        + p1 * (-6.0 * t2 + 6.0 * t)
        + m1 * (3.0 * t2 - 2.0 * t)
}

/// Sample one Hermite span into `(position, tangent)` pairs at the given
/// parameters.
fn sample_span(
    p0: Vector2<f64>,
    m0: Vector2<f64>,
    p1: Vector2<f64>,
    m1: Vector2<f64>,
    params: impl Iterator<Item = f64>,
    out: &mut Vec<(Vector2<f64>, Vector2<f64>)>,
) {
    for t in params {
        out.push((
            hermite_point(p0, m0, p1, m1, t),
            hermite_tangent(p0, m0, p1, m1, t),
        ));
    }
}

/// Thicken a sampled centerline by `w` on both sides and close it into a ring
/// with exactly `2 * len + cap_a + cap_b` vertices: left side forward, flat
/// cap across the far tip, right side back, flat cap across the near tip.
///
/// The ring is emitted directly on the centerline's parameter grid instead of
/// being arc-length-resampled afterwards: every vertex is then a smooth
/// function of the gripper state (equal-arc resampling jumps segments as the
/// state moves, which puts kinks at the corner caps), and a mirrored state
/// renders an exactly mirrored vertex set. The arc-length weighting in the
/// moment sums absorbs the mildly uneven spacing this leaves behind.
fn offset_ring(
    centerline: &[(Vector2<f64>, Vector2<f64>)],
    w: f64,
    cap_a: usize,
    cap_b: usize,
) -> Result<Vec<Vector2<f64>>> {
    let mut left = Vec::with_capacity(centerline.len());
    let mut right = Vec::with_capacity(centerline.len());
    for &(p, tan) in centerline {
        let norm = tan.norm();
        if norm < 1e-9 {
            return Err(Error::InvalidConfiguration(
                "degenerate centerline tangent".into(),
            ));
        }
        let n = Vector2::new(-tan.y, tan.x) / norm;
        left.push(p + n * w);
        right.push(p - n * w);
    }
    let mut ring = Vec::with_capacity(2 * centerline.len() + cap_a + cap_b);
    ring.extend(left.iter().copied());
    let (lb, rb) = (left[left.len() - 1], right[right.len() - 1]);
    for i in 1..=cap_b {
        ring.push(lb + (rb - lb) * (i as f64 / (cap_b + 1) as f64));
    }
    ring.extend(right.iter().rev().copied());
    let (ra, la) = (right[0], left[0]);
    for i in 1..=cap_a {
        ring.push(ra + (la - ra) * (i as f64 / (cap_a + 1) as f64));
    }
    Ok(ring)
}

fn project_ring(ring: Vec<Vector2<f64>>, proj: &Projection) -> Result<Contour> {
    let pts: Vec<Point2<f64>> = ring
        .into_iter()
        .map(|p| proj.project(Point2::from(p)))
        .collect();
    Contour::new(pts)
}

/// Render the object contour for gripper state `r`, resampled to `n` points.
pub fn plant_observe(r: &GripperState, obj: &ObjectModel, n: usize) -> Result<Contour> {
    let p1 = r.p1().coords;
    let p2 = r.p2().coords;
    let dist = (p2 - p1).norm();
    match *obj {
        ObjectModel::ElasticCable {
            half_width,
            tangent_scale,
            proj,
        } => {
            if dist < 2.0 * half_width {
                return Err(Error::InvalidConfiguration(format!(
                    "grippers {dist:.4} apart, closer than cable width {:.4}",
                    2.0 * half_width
                )));
            }
            let (cap_a, cap_b, side) = ring_allocation(n)?;
            let m1 = tangent_scale * Vector2::new(r.theta1().cos(), r.theta1().sin());
            let m2 = tangent_scale * Vector2::new(r.theta2().cos(), r.theta2().sin());
            let mut center = Vec::with_capacity(side);
            let last = side - 1;
            sample_span(
                p1,
                m1,
                p2,
                m2,
                (0..side).map(move |j| j as f64 / last as f64),
                &mut center,
            );
            project_ring(offset_ring(&center, half_width, cap_a, cap_b)?, &proj)
        }
        ObjectModel::RigidBox {
            length,
            height,
            proj,
            ..
        } => {
            if dist < 1e-12 {
                return Err(Error::InvalidConfiguration(
                    "coincident grippers leave the box pose undefined".into(),
                ));
            }
            let mid = (p1 + p2) / 2.0;
            let axis = (p2 - p1) / dist;
            let perp = Vector2::new(-axis.y, axis.x);
            let (hl, hh) = (length / 2.0, height / 2.0);
            let ring = vec![
                mid - axis * hl - perp * hh,
                mid + axis * hl - perp * hh,
                mid + axis * hl + perp * hh,
                mid - axis * hl + perp * hh,
            ];
            // Corners sit at fixed arc offsets from the start vertex, so the
            // equal-arc resample picks a pose-independent point pattern in
            // the body frame.
            resample_closed(&project_ring(ring, &proj)?, n)
        }
        ObjectModel::NhBeam {
            half_width,
            tangent_scale,
            rigid_fraction,
            proj,
        } => {
            if dist < 2.0 * half_width {
                return Err(Error::InvalidConfiguration(format!(
                    "grippers {dist:.4} apart, closer than beam width {:.4}",
                    2.0 * half_width
                )));
            }
            // Rigid middle segment: fraction of the tip span, posed at the
            // mean of the two gripper poses (circular mean for the angle).
            let mid = (p1 + p2) / 2.0;
            let th_m = (r.theta1().sin() + r.theta2().sin())
                .atan2(r.theta1().cos() + r.theta2().cos());
            let dir_m = Vector2::new(th_m.cos(), th_m.sin());
            let half_seg = rigid_fraction * dist / 2.0;
            let q1 = mid - dir_m * half_seg;
            let q2 = mid + dir_m * half_seg;
            let m1 = tangent_scale * Vector2::new(r.theta1().cos(), r.theta1().sin());
            let m2 = tangent_scale * Vector2::new(r.theta2().cos(), r.theta2().sin());
            let mm = tangent_scale * dir_m;
            let (cap_a, cap_b, side) = ring_allocation(n)?;
            // Both elastic spans get the same count so a mirrored state still
            // samples a mirrored set; the rigid interior takes the rest on a
            // midpoint grid (junctions excluded, tangent continuous anyway).
            let e = (((side as f64) * (1.0 - rigid_fraction) / 2.0).round() as usize)
                .clamp(1, (side - 1) / 2);
            let r_cnt = side - 2 * e;
            let mut center = Vec::with_capacity(side);
            sample_span(
                p1,
                m1,
                q1,
                mm,
                (0..e).map(move |j| j as f64 / e as f64),
                &mut center,
            );
            for k in 0..r_cnt {
                let t = (k as f64 + 0.5) / r_cnt as f64;
                center.push((q1 + (q2 - q1) * t, mm));
            }
            sample_span(
                q2,
                mm,
                p2,
                m2,
                (0..e).map(move |j| (j + 1) as f64 / e as f64),
                &mut center,
            );
            project_ring(offset_ring(&center, half_width, cap_a, cap_b)?, &proj)
        }
    }
}

/// Initial deformation Jacobian by central differences: column `j` probes
/// `r +/- delta e_j` through the full observe/extract pipeline.
pub fn probe_initial_jacobian(
    r: &GripperState,
    obj: &ObjectModel,
    delta: f64,
    cam: &CameraSpec,
    n: usize,
) -> Result<Jacobian> {
    if delta <= 0.0 {
        return Err(Error::InvalidConfiguration(format!("probe delta {delta}")));
    }
    let mut jac = Jacobian::zeros();
    for j in 0..6 {
        let mut plus = *r.vector();
        let mut minus = *r.vector();
        plus[j] += delta;
        minus[j] -= delta;
        let sp = extract_features(&plant_observe(&GripperState::wrapped(plus), obj, n)?, cam)?;
        let sm = extract_features(&plant_observe(&GripperState::wrapped(minus), obj, n)?, cam)?;
        jac.set_column(j, &((sp.s - sm.s) / (2.0 * delta)));
    }
    Ok(jac)
}
