//! Reference implementations used only by tests. Each one favours the most
//! literal formulation over speed.

use std::collections::BTreeMap;

use trafficmon::geometry::{Circle, OrientedRect, Vec2};

pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

fn cross(o: Vec2, a: Vec2, b: Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Point inside (or on) a convex polygon given counter-clockwise.
pub fn convex_contains(poly: &[Vec2], p: Vec2) -> bool {
    (0..poly.len()).all(|i| cross(poly[i], poly[(i + 1) % poly.len()], p) >= 0.0)
}

/// Samples an n-by-n lattice (edges included) over each rectangle and checks
/// containment in the other.
pub fn lattice_hit(a: &OrientedRect, b: &OrientedRect, n: usize) -> bool {
    let covers = |from: &OrientedRect, into: &OrientedRect| {
        let c = from.corners();
        let poly = into.corners();
        let (u, v) = (c[0] - c[1], c[2] - c[1]);
        (0..n).any(|i| {
            (0..n).any(|j| {
                let p = c[1] + u * (i as f64 / (n - 1) as f64) + v * (j as f64 / (n - 1) as f64);
                convex_contains(&poly, p)
            })
        })
    };
    covers(a, b) || covers(b, a)
}

fn segment_point_distance(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    (a + ab * t - p).length()
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0) != (d2 > 0.0)) && ((d3 > 0.0) != (d4 > 0.0))
}

fn segment_distance(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> f64 {
    if segments_cross(a, b, c, d) {
        return 0.0;
    }
    segment_point_distance(a, b, c)
        .min(segment_point_distance(a, b, d))
        .min(segment_point_distance(c, d, a))
        .min(segment_point_distance(c, d, b))
}

fn edges(poly: &[Vec2]) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
    (0..poly.len()).map(move |i| (poly[i], poly[(i + 1) % poly.len()]))
}

/// Smallest distance between the outlines of two closed polygons.
pub fn boundary_gap(a: &[Vec2], b: &[Vec2]) -> f64 {
    edges(a)
        .flat_map(|(p, q)| edges(b).map(move |(r, s)| segment_distance(p, q, r, s)))
        .fold(f64::INFINITY, f64::min)
}

pub fn polylines_touch(a: &[Vec2], b: &[Vec2]) -> bool {
    edges(a).any(|(p, q)| edges(b).any(|(r, s)| segments_cross(p, q, r, s)))
}

/// Rectangle with each side moved outward by `d` (inward when negative).
pub fn offset(r: &OrientedRect, d: f64) -> OrientedRect {
    OrientedRect::new(r.center, Vec2::new(r.half_extents.x + d, r.half_extents.y + d), r.angle)
}

/// Exact overlap of two rectangles: a corner inside the other or crossing edges.
pub fn rects_overlap(a: &OrientedRect, b: &OrientedRect) -> bool {
    let (pa, pb) = (a.corners(), b.corners());
    pa.iter().any(|&p| convex_contains(&pb, p))
        || pb.iter().any(|&p| convex_contains(&pa, p))
        || polylines_touch(&pa, &pb)
}

/// Circle and rectangle share a point: the center is inside, or some edge
/// comes within one radius of it.
pub fn circle_meets_rect(c: &Circle, r: &OrientedRect) -> bool {
    let corners = r.corners();
    convex_contains(&corners, c.center)
        || edges(&corners).any(|(a, b)| segment_point_distance(a, b, c.center) <= c.radius)
}

pub fn distance_to_polyline(poly: &[Vec2], p: Vec2) -> f64 {
    edges(poly)
        .map(|(a, b)| segment_point_distance(a, b, p))
        .fold(f64::INFINITY, f64::min)
}

/// Alias substitution by exhaustive scan: at every position try every alias,
/// keep the longest case-insensitive match bounded by non-word characters.
pub fn substitute(text: &str, table: &BTreeMap<String, String>) -> String {
    let chars: Vec<char> = text.chars().collect();
    let lower: Vec<char> = text.to_lowercase().chars().collect();
    assert_eq!(chars.len(), lower.len(), "test texts are ASCII");
    let word = |c: char| c.is_alphanumeric();
    let mut out = String::new();
    let mut i = 0;
    while i < chars.len() {
        let boundary_before = i == 0 || !word(chars[i - 1]);
        let mut best: Option<(usize, &str)> = None;
        if boundary_before {
            for (alias, real) in table {
                let a: Vec<char> = alias.to_lowercase().chars().collect();
                let end = i + a.len();
                if end <= chars.len()
                    && lower[i..end] == a[..]
                    && (end == chars.len() || !word(chars[end]))
                    && best.is_none_or(|(len, _)| a.len() > len)
                {
                    best = Some((a.len(), real));
                }
            }
        }
        match best {
            Some((len, real)) => {
                out.push_str(real);
                i += len;
            }
            None => {
                out.push(chars[i]);
                i += 1;
            }
        }
    }
    out
}

/// Best total weight over every injective row-to-column assignment.
pub fn best_assignment(weights: &[Vec<i64>], cols: usize) -> i64 {
    fn go(weights: &[Vec<i64>], row: usize, used: &mut Vec<bool>) -> i64 {
        if row == weights.len() {
            return 0;
        }
        let mut best = i64::MIN;
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                best = best.max(weights[row][c] + go(weights, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    go(weights, 0, &mut vec![false; cols])
}

/// Precision, recall and F1 from raw counts.
pub fn prf(tp: f64, fp: f64, fn_: f64) -> (f64, f64, f64) {
    let p = tp / (tp + fp);
    let r = tp / (tp + fn_);
    (p, r, 2.0 * p * r / (p + r))
}
