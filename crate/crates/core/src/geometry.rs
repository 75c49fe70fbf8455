//! Planar geometry shared by the simulator, the rasterizer and the section maps.
//!
//! World coordinates are meters with +y pointing "up" on screen; image
//! coordinates are pixels with +y pointing down. Both use [`Vec2`].

use serde::{Deserialize, Serialize};

/// Serialized as a two-element array `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn from_angle(angle: f64) -> Vec2 {
        Vec2::new(angle.cos(), angle.sin())
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Normalizes an angle into `[0, 2π)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let a = angle.rem_euclid(tau);
    // rem_euclid can round up to exactly tau for tiny negative inputs
    if a >= tau {
        0.0
    } else {
        a
    }
}

/// Oriented rectangle: center, half-extents along its local axes, rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    pub half_extents: Vec2,
    pub angle: f64,
}

impl OrientedRect {
    pub fn new(center: Vec2, half_extents: Vec2, angle: f64) -> Self {
        Self {
            center,
            half_extents,
            angle,
        }
    }

    /// Local unit axes (along length, along width).
    pub fn axes(&self) -> [Vec2; 2] {
        let u = Vec2::from_angle(self.angle);
        [u, u.perp()]
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Vec2; 4] {
        let [u, v] = self.axes();
        let a = u * self.half_extents.x;
        let b = v * self.half_extents.y;
        [
            self.center + a + b,
            self.center - a + b,
            self.center - a - b,
            self.center + a - b,
        ]
    }

    /// Point expressed in the rectangle's local frame.
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        let [u, v] = self.axes();
        let d = p - self.center;
        Vec2::new(d.dot(u), d.dot(v))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.half_extents.x && l.y.abs() <= self.half_extents.y
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let c = self.center.dot(axis);
        let [u, v] = self.axes();
        let r = self.half_extents.x * u.dot(axis).abs() + self.half_extents.y * v.dot(axis).abs();
        (c - r, c + r)
    }

    /// Signed separation along the best separating axis. Positive means a gap
    /// of that width exists; zero or negative means the rectangles overlap
    /// (touching counts as overlap).
    pub fn separation(&self, other: &OrientedRect) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for axis in self.axes().into_iter().chain(other.axes()) {
            let (a0, a1) = self.project(axis);
            let (b0, b1) = other.project(axis);
            let gap = (b0 - a1).max(a0 - b1);
            best = best.max(gap);
        }
        best
    }

    /// Separating-axis overlap test.
    pub fn overlaps(&self, other: &OrientedRect) -> bool {
        self.separation(other) <= 0.0
    }

    /// Distance from `p` to the rectangle (zero inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let l = self.to_local(p);
        let dx = (l.x.abs() - self.half_extents.x).max(0.0);
        let dy = (l.y.abs() - self.half_extents.y).max(0.0);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn overlaps_circle(&self, other: &Circle) -> bool {
        (self.center - other.center).length() <= self.radius + other.radius
    }

    pub fn overlaps_rect(&self, rect: &OrientedRect) -> bool {
        rect.distance_to(self.center) <= self.radius
    }
}

/// Even-odd containment with boundary points counted as inside.
pub fn polygon_contains(polygon: &[Vec2], p: Vec2) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = polygon[j];
        let b = polygon[i];
        if on_segment(a, b, p) {
            return true;
        }
        if (b.y > p.y) != (a.y > p.y) {
            let x_cross = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    let ab = b - a;
    let ap = p - a;
    let len = ab.length();
    if len == 0.0 {
        return ap.length() <= 1e-9;
    }
    if (ab.cross(ap) / len).abs() > 1e-9 {
        return false;
    }
    let t = ap.dot(ab) / (len * len);
    (-1e-12..=1.0 + 1e-12).contains(&t)
}

/// Shortest distance from `p` to the polygon outline.
pub fn distance_to_outline(polygon: &[Vec2], p: Vec2) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|i| segment_distance(polygon[i], polygon[(i + 1) % n], p))
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    };
    (a + ab * t - p).length()
}

/// Twice the signed area; zero for degenerate polygons.
pub fn signed_area2(polygon: &[Vec2]) -> f64 {
    let n = polygon.len();
    (0..n).map(|i| polygon[i].cross(polygon[(i + 1) % n])).sum()
}

/// A polygon is usable as a region when it has three or more vertices and
/// encloses a non-zero area.
pub fn is_non_degenerate(polygon: &[Vec2]) -> bool {
    polygon.len() >= 3 && signed_area2(polygon).abs() > 1e-12
}

/// Vertex average; used as the representative point of a footprint.
pub fn centroid(points: &[Vec2]) -> Vec2 {
    if points.is_empty() {
        return Vec2::default();
    }
    let sum = points.iter().fold(Vec2::default(), |acc, &p| acc + p);
    sum * (1.0 / points.len() as f64)
}

/// Clips a polygon to the axis-aligned box `[min, max]` (Sutherland-Hodgman).
pub fn clip_to_box(polygon: &[Vec2], min: Vec2, max: Vec2) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = polygon.to_vec();
    let planes: [(Vec2, f64); 4] = [
        (Vec2::new(1.0, 0.0), min.x),
        (Vec2::new(-1.0, 0.0), -max.x),
        (Vec2::new(0.0, 1.0), min.y),
        (Vec2::new(0.0, -1.0), -max.y),
    ];
    for (normal, offset) in planes {
        if out.is_empty() {
            break;
        }
        let input = std::mem::take(&mut out);
        let inside = |p: Vec2| p.dot(normal) >= offset;
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let (cin, pin) = (inside(cur), inside(prev));
            if cin != pin {
                let dp = prev.dot(normal) - offset;
                let dc = cur.dot(normal) - offset;
                let t = dp / (dp - dc);
                let mut hit = prev + (cur - prev) * t;
                // snap onto the plane to avoid drift outside the box
                if normal.x != 0.0 {
                    hit.x = offset * normal.x;
                } else {
                    hit.y = offset * normal.y;
                }
                out.push(hit);
            }
            if cin {
                out.push(cur);
            }
        }
    }
    out
}

/// Axis-aligned bounding box `(min, max)` of a point set.
pub fn bounds(points: &[Vec2]) -> Option<(Vec2, Vec2)> {
    let first = *points.first()?;
    Some(points.iter().fold((first, first), |(lo, hi), p| {
        (
            Vec2::new(lo.x.min(p.x), lo.y.min(p.y)),
            Vec2::new(hi.x.max(p.x), hi.y.max(p.y)),
        )
    }))
}
