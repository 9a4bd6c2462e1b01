//! Convex polygon helpers in the plane.
//!
//! Polygons are vertex lists in counter-clockwise order. The clipping routine
//! is the classic Sutherland–Hodgman pass against one half-plane at a time,
//! which is exact for convex inputs up to floating-point rounding.

/// A point in the plane.
pub type Point2 = [f64; 2];

/// The closed half-plane `a·x + b·y <= c`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HalfPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HalfPlane {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    /// Signed slack: non-negative inside the half-plane.
    #[inline]
    pub fn slack(&self, p: Point2) -> f64 {
        self.c - (self.a * p[0] + self.b * p[1])
    }

    /// The complementary half-plane `a·x + b·y >= c`.
    pub fn flipped(&self) -> Self {
        Self::new(-self.a, -self.b, -self.c)
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        self.slack(p) >= -tol
    }
}

/// Shoelace area (positive for counter-clockwise order).
pub fn signed_area(poly: &[Point2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        acc += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * acc
}

pub fn area(poly: &[Point2]) -> f64 {
    signed_area(poly).abs()
}

/// Clips a convex polygon against a half-plane, keeping the part with
/// non-negative slack.
pub fn clip_halfplane(poly: &[Point2], hp: &HalfPlane) -> Vec<Point2> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    if n == 0 {
        return out;
    }
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let s_cur = hp.slack(cur);
        let s_next = hp.slack(next);
        if s_cur >= 0.0 {
            out.push(cur);
        }
        if (s_cur >= 0.0) != (s_next >= 0.0) {
            let t = s_cur / (s_cur - s_next);
            out.push([
                cur[0] + t * (next[0] - cur[0]),
                cur[1] + t * (next[1] - cur[1]),
            ]);
        }
    }
    dedup_vertices(&mut out, 1e-15);
    out
}

/// Intersection of two convex polygons, both counter-clockwise.
pub fn intersect_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let p = clip[i];
        let q = clip[(i + 1) % n];
        // Left side of the directed edge p→q is the interior for CCW order.
        let a = q[1] - p[1];
        let b = p[0] - q[0];
        let c = a * p[0] + b * p[1];
        out = clip_halfplane(&out, &HalfPlane::new(a, b, c));
    }
    out
}

fn dedup_vertices(poly: &mut Vec<Point2>, tol: f64) {
    poly.dedup_by(|a, b| (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol);
    while poly.len() > 1 {
        let first = poly[0];
        let last = poly[poly.len() - 1];
        if (first[0] - last[0]).abs() <= tol && (first[1] - last[1]).abs() <= tol {
            poly.pop();
        } else {
            break;
        }
    }
}
