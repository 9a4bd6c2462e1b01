use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::polygon::{self, Point2};
use super::GeometryError;

/// Oriented 3D box: center, extents along the local axes and a heading about
/// the vertical axis. Serialized as `[cx, cy, cz, l, w, h, theta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 7]", into = "[f64; 7]")]
pub struct Box7DoF {
    center: [f64; 3],
    extents: [f64; 3],
    theta: f64,
}

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

impl Box7DoF {
    pub fn new(
        cx: f64,
        cy: f64,
        cz: f64,
        l: f64,
        w: f64,
        h: f64,
        theta: f64,
    ) -> Result<Self, GeometryError> {
        let vals = [cx, cy, cz, l, w, h, theta];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if !(l > 0.0 && w > 0.0 && h > 0.0) {
            return Err(GeometryError::NonPositiveExtent { l, w, h });
        }
        Ok(Self {
            center: [cx, cy, cz],
            extents: [l, w, h],
            theta: normalize_angle(theta),
        })
    }

    /// Axis-aligned box (theta = 0).
    pub fn axis_aligned(center: [f64; 3], extents: [f64; 3]) -> Result<Self, GeometryError> {
        Self::new(
            center[0], center[1], center[2], extents[0], extents[1], extents[2], 0.0,
        )
    }

    pub fn center(&self) -> [f64; 3] {
        self.center
    }

    /// `[l, w, h]`.
    pub fn extents(&self) -> [f64; 3] {
        self.extents
    }

    pub fn length(&self) -> f64 {
        self.extents[0]
    }

    pub fn width(&self) -> f64 {
        self.extents[1]
    }

    pub fn height(&self) -> f64 {
        self.extents[2]
    }

    pub fn heading(&self) -> f64 {
        self.theta
    }

    pub fn volume(&self) -> f64 {
        self.extents[0] * self.extents[1] * self.extents[2]
    }

    pub fn z_range(&self) -> (f64, f64) {
        let half = 0.5 * self.extents[2];
        (self.center[2] - half, self.center[2] + half)
    }

    /// Same box moved by `delta`.
    pub fn translated(&self, delta: [f64; 3]) -> Self {
        let mut out = *self;
        for (c, d) in out.center.iter_mut().zip(delta) {
            *c += d;
        }
        out
    }

    /// Same box with every extent multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self, GeometryError> {
        let [cx, cy, cz] = self.center;
        let [l, w, h] = self.extents;
        Self::new(cx, cy, cz, l * factor, w * factor, h * factor, self.theta)
    }

    /// Rigid rotation of the box about the vertical axis through the origin.
    pub fn rotated_about_origin(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let [x, y, z] = self.center;
        Self {
            center: [c * x - s * y, s * x + c * y, z],
            extents: self.extents,
            theta: normalize_angle(self.theta + angle),
        }
    }

    /// Bird's-eye footprint corners, counter-clockwise.
    pub fn bev_corners(&self) -> [Point2; 4] {
        let (s, c) = self.theta.sin_cos();
        let hl = 0.5 * self.extents[0];
        let hw = 0.5 * self.extents[1];
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        // local order above is CCW: (+,+) → (-,+) → (-,-) → (+,-)
        local.map(|[u, v]| {
            [
                self.center[0] + c * u - s * v,
                self.center[1] + s * u + c * v,
            ]
        })
    }

    /// Whether a point lies inside the closed box.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let (s, c) = self.theta.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        let (z0, z1) = self.z_range();
        u.abs() <= 0.5 * self.extents[0] && v.abs() <= 0.5 * self.extents[1] && p[2] >= z0 && p[2] <= z1
    }

    /// Maps local coordinates in `[-0.5, 0.5]^3` (fractions of the extents)
    /// to a world point.
    pub fn local_to_world(&self, frac: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.theta.sin_cos();
        let u = frac[0] * self.extents[0];
        let v = frac[1] * self.extents[1];
        [
            self.center[0] + c * u - s * v,
            self.center[1] + s * u + c * v,
            self.center[2] + frac[2] * self.extents[2],
        ]
    }
}

impl TryFrom<[f64; 7]> for Box7DoF {
    type Error = GeometryError;

    fn try_from(v: [f64; 7]) -> Result<Self, Self::Error> {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6])
    }
}

impl From<Box7DoF> for [f64; 7] {
    fn from(b: Box7DoF) -> Self {
        [
            b.center[0], b.center[1], b.center[2], b.extents[0], b.extents[1], b.extents[2], b.theta,
        ]
    }
}

/// Intersection-over-union of two oriented boxes.
///
/// The overlap volume is the rotated bird's-eye intersection area times the
/// overlap of the vertical intervals.
pub fn iou3d(a: &Box7DoF, b: &Box7DoF) -> f64 {
    let (a0, a1) = a.z_range();
    let (b0, b1) = b.z_range();
    let dz = a1.min(b1) - a0.max(b0);
    if dz <= 0.0 {
        return 0.0;
    }
    let inter_area = polygon::area(&polygon::intersect_convex(&a.bev_corners(), &b.bev_corners()));
    if inter_area <= 0.0 {
        return 0.0;
    }
    let inter = inter_area * dz;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
