//! Closed contours in image/world coordinates and the rigid maps acting on them.

use nalgebra::{Point2, Vector2};

use crate::{Error, Result};

/// Smallest perimeter we accept before declaring a contour degenerate.
const MIN_PERIMETER: f64 = 1e-12;

/// Closed polyline. Vertices are stored in order; the edge from the last
/// vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    points: Vec<Point2<f64>>,
}

impl Contour {
    /// At least three finite vertices are required.
    pub fn new(points: Vec<Point2<f64>>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::DegenerateContour(format!(
                "{} vertices, need at least 3",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::DegenerateContour("non-finite vertex".into()));
        }
        Ok(Self { points })
    }

    pub fn from_pairs<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Result<Self> {
        Self::new(pairs.into_iter().map(|(x, y)| Point2::new(x, y)).collect())
    }

    pub fn points(&self) -> &[Point2<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor guarantees >= 3 vertices
    }

    /// Parse a contour from plain text: one `u v` pair per line.
    /// Blank lines and `#` comments are skipped; closure is implicit.
    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<f64> {
                tok.ok_or(())
                    .and_then(|t| t.parse::<f64>().map_err(|_| ()))
                    .map_err(|()| Error::FileFormat {
                        path: origin.to_string(),
                        msg: format!("line {}: expected `u v`, got {line:?}", lineno + 1),
                    })
            };
            let u = parse(it.next())?;
            let v = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::FileFormat {
                    path: origin.to_string(),
                    msg: format!("line {}: expected exactly two columns", lineno + 1),
                });
            }
            points.push(Point2::new(u, v));
        }
        Self::new(points)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }
}

/// Per-vertex arc increments `dm_k = |c_k - c_{k-1}|` with the wrap-around
/// convention `c_0 := c_N`, so entry 0 holds the closing edge length.
pub fn arc_lengths(c: &Contour) -> Vec<f64> {
    let p = c.points();
    let n = p.len();
    (0..n)
        .map(|k| {
            let prev = p[(k + n - 1) % n];
            (p[k] - prev).norm()
        })
        .collect()
}

pub fn perimeter(c: &Contour) -> f64 {
    arc_lengths(c).iter().sum()
}

/// Resample a closed contour to exactly `n` points at equal arc-length steps,
/// starting at vertex 0 and walking the polyline edges.
pub fn resample_closed(c: &Contour, n: usize) -> Result<Contour> {
    if n < 3 {
        return Err(Error::DegenerateContour(format!(
            "cannot resample to {n} points"
        )));
    }
    let p = c.points();
    let m = p.len();
    // Cumulative arc position of each vertex, plus the closing edge.
    let mut pos = Vec::with_capacity(m + 1);
    pos.push(0.0);
    for i in 1..m {
        pos.push(pos[i - 1] + (p[i] - p[i - 1]).norm());
    }
    let total = pos[m - 1] + (p[0] - p[m - 1]).norm();
    pos.push(total);
    if !(total > MIN_PERIMETER) || !total.is_finite() {
        return Err(Error::DegenerateContour(format!(
            "perimeter {total} too small to resample"
        )));
    }

    let step = total / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize; // walking index into pos; targets are increasing
    for k in 0..n {
        let target = k as f64 * step;
        while seg + 1 < pos.len() && pos[seg + 1] < target {
            seg += 1;
        }
        let a = p[seg % m];
        let b = p[(seg + 1) % m];
        let den = pos[seg + 1] - pos[seg];
        if den > 0.0 {
            let alpha = (target - pos[seg]) / den;
            out.push(a + (b - a) * alpha);
        } else {
            out.push(a);
        }
    }
    Contour::new(out)
}

/// Proper rigid motion of the plane: rotation by `angle` about the origin,
/// then translation. The stored angle is wrapped to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform2D {
    angle: f64,
    translation: Vector2<f64>,
}

impl RigidTransform2D {
    pub fn new(angle: f64, tx: f64, ty: f64) -> Self {
        Self {
            angle: wrap_angle(angle),
            translation: Vector2::new(tx, ty),
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn translation(&self) -> Vector2<f64> {
        self.translation
    }

    pub fn apply_point(&self, p: Point2<f64>) -> Point2<f64> {
        let (s, c) = self.angle.sin_cos();
        Point2::new(
            c * p.x - s * p.y + self.translation.x,
            s * p.x + c * p.y + self.translation.y,
        )
    }
}

pub fn apply_rigid(c: &Contour, t: &RigidTransform2D) -> Contour {
    Contour {
        points: c.points.iter().map(|&p| t.apply_point(p)).collect(),
    }
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi); // [0, 2*pi)
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}
