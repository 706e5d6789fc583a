//! Planar geometry on the top-down (x, z) plane.
//!
//! Every solid in the world is one of three convex-ish primitives: a capsule
//! (walls and door spans, a segment with half-thickness), an axis-aligned
//! rectangle, or a circle. Ray queries accept an `inflate` radius so the same
//! code answers both "where does this sensor ray hit" and "where does a disc of
//! radius r moving along this line first touch".

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or vector in meters. `z` is the second planar axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub z: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, z: 0.0 };

    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.z * o.z
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.z - self.z * o.x
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn length_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).length()
    }

    /// Unit vector, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let len = self.length();
        if len > 0.0 && len.is_finite() {
            Some(self * (1.0 / len))
        } else {
            None
        }
    }

    pub fn from_angle(radians: f64) -> Vec2 {
        Vec2::new(radians.cos(), radians.sin())
    }

    pub fn angle(self) -> f64 {
        self.z.atan2(self.x)
    }

    /// Rotate counter-clockwise by `radians`.
    pub fn rotated(self, radians: f64) -> Vec2 {
        let (s, c) = radians.sin_cos();
        Vec2::new(self.x * c - self.z * s, self.x * s + self.z * c)
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.z, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.z + o.z)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.z - o.z)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.z * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.z)
    }
}

/// Axis-aligned rectangle, `min` ≤ `max` componentwise when well formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub const fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn from_corners(a: Vec2, b: Vec2) -> Self {
        Self {
            min: Vec2::new(a.x.min(b.x), a.z.min(b.z)),
            max: Vec2::new(a.x.max(b.x), a.z.max(b.z)),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.z - self.min.z
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.z >= self.min.z && p.z <= self.max.z
    }

    pub fn contains_aabb(&self, o: &Aabb) -> bool {
        self.contains(o.min) && self.contains(o.max)
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: Vec2::new(self.min.x.min(o.min.x), self.min.z.min(o.min.z)),
            max: Vec2::new(self.max.x.max(o.max.x), self.max.z.max(o.max.z)),
        }
    }

    pub fn expanded(&self, by: f64) -> Aabb {
        Aabb {
            min: Vec2::new(self.min.x - by, self.min.z - by),
            max: Vec2::new(self.max.x + by, self.max.z + by),
        }
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(self.min.x, self.max.x),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    /// Distance from `p` to the rectangle (0 inside).
    pub fn distance(&self, p: Vec2) -> f64 {
        p.distance(self.closest_point(p))
    }

    /// Nearest point on the rectangle's boundary.
    pub fn closest_boundary_point(&self, p: Vec2) -> Vec2 {
        if !self.contains(p) {
            return self.closest_point(p);
        }
        let candidates = [
            (p.x - self.min.x, Vec2::new(self.min.x, p.z)),
            (self.max.x - p.x, Vec2::new(self.max.x, p.z)),
            (p.z - self.min.z, Vec2::new(p.x, self.min.z)),
            (self.max.z - p.z, Vec2::new(p.x, self.max.z)),
        ];
        candidates
            .iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|c| c.1)
            .unwrap_or(p)
    }

    pub fn overlaps_circle(&self, c: Vec2, r: f64) -> bool {
        self.distance(c) < r
    }
}

/// Closest point to `p` on segment `a`–`b`.
pub fn closest_point_on_segment(a: Vec2, b: Vec2, p: Vec2) -> Vec2 {
    let ab = b - a;
    let len_sq = ab.length_sq();
    if len_sq == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

pub fn distance_to_segment(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    p.distance(closest_point_on_segment(a, b, p))
}

/// Whether segments `p1`–`p2` and `q1`–`q2` cross or touch.
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = (p2 - p1).cross(q1 - p1);
    let d2 = (p2 - p1).cross(q2 - p1);
    let d3 = (q2 - q1).cross(p1 - q1);
    let d4 = (q2 - q1).cross(p2 - q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: Vec2, b: Vec2, p: Vec2| distance_to_segment(a, b, p) == 0.0;
    on(p1, p2, q1) || on(p1, p2, q2) || on(q1, q2, p1) || on(q1, q2, p2)
}

/// Euclidean distance between segment `a`–`b` and rectangle `r` (0 when they overlap).
pub fn segment_aabb_distance(a: Vec2, b: Vec2, r: &Aabb) -> f64 {
    if r.contains(a) || r.contains(b) {
        return 0.0;
    }
    let corners = [
        r.min,
        Vec2::new(r.max.x, r.min.z),
        r.max,
        Vec2::new(r.min.x, r.max.z),
    ];
    for i in 0..4 {
        if segments_intersect(a, b, corners[i], corners[(i + 1) % 4]) {
            return 0.0;
        }
    }
    let from_ends = r.distance(a).min(r.distance(b));
    corners
        .iter()
        .map(|c| distance_to_segment(a, b, *c))
        .fold(from_ends, f64::min)
}

/// Solid primitives of the static world and of fire hazards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// All points within `radius` of the segment `a`–`b`.
    Capsule {
        a: Vec2,
        b: Vec2,
        radius: f64,
    },
    Rect(Aabb),
    Circle {
        center: Vec2,
        radius: f64,
    },
}

impl Shape {
    pub fn contains(&self, p: Vec2) -> bool {
        self.signed_gap(p, 0.0) <= 0.0
    }

    /// Distance from `p` to the shape surface, minus `inflate`. Negative inside.
    /// For rectangles the interior distance is approximated by 0 (the solver
    /// only needs the sign and the exterior magnitude).
    pub fn signed_gap(&self, p: Vec2, inflate: f64) -> f64 {
        match *self {
            Shape::Capsule { a, b, radius } => distance_to_segment(a, b, p) - radius - inflate,
            Shape::Rect(r) => {
                if r.contains(p) {
                    // depth to nearest edge, negated
                    let d = (p.x - r.min.x)
                        .min(r.max.x - p.x)
                        .min(p.z - r.min.z)
                        .min(r.max.z - p.z);
                    -d - inflate
                } else {
                    r.distance(p) - inflate
                }
            }
            Shape::Circle { center, radius } => p.distance(center) - radius - inflate,
        }
    }

    /// Unit outward normal of the shape's surface nearest to `p`, used to push
    /// an overlapping disc back out.
    pub fn outward_normal(&self, p: Vec2) -> Vec2 {
        let surface = match *self {
            Shape::Capsule { a, b, .. } => closest_point_on_segment(a, b, p),
            Shape::Rect(r) => {
                if r.contains(p) {
                    let on_edge = r.closest_boundary_point(p);
                    // Inside: outward is from p towards the nearest edge.
                    return (on_edge - p).normalized().unwrap_or(Vec2::new(1.0, 0.0));
                }
                r.closest_point(p)
            }
            Shape::Circle { center, .. } => center,
        };
        (p - surface).normalized().unwrap_or(Vec2::new(1.0, 0.0))
    }

    /// Axis-aligned bounds of the shape.
    pub fn bounds(&self) -> Aabb {
        match *self {
            Shape::Capsule { a, b, radius } => Aabb::from_corners(a, b).expanded(radius),
            Shape::Rect(r) => r,
            Shape::Circle { center, radius } => Aabb::new(center, center).expanded(radius),
        }
    }

    /// First parameter `t ≥ 0` at which the ray `origin + t·dir` enters the
    /// shape grown by `inflate`. Returns `Some(0.0)` when the origin is already
    /// inside. `dir` must be unit length.
    pub fn ray_entry(&self, origin: Vec2, dir: Vec2, inflate: f64) -> Option<f64> {
        match *self {
            Shape::Circle { center, radius } => ray_circle(origin, dir, center, radius + inflate),
            Shape::Capsule { a, b, radius } => ray_capsule(origin, dir, a, b, radius + inflate),
            Shape::Rect(r) => {
                if inflate <= 0.0 {
                    return ray_aabb(origin, dir, &r);
                }
                // Rounded rectangle = two expanded slabs plus four corner discs.
                let wide = Aabb::new(
                    Vec2::new(r.min.x - inflate, r.min.z),
                    Vec2::new(r.max.x + inflate, r.max.z),
                );
                let tall = Aabb::new(
                    Vec2::new(r.min.x, r.min.z - inflate),
                    Vec2::new(r.max.x, r.max.z + inflate),
                );
                let corners = [
                    r.min,
                    r.max,
                    Vec2::new(r.min.x, r.max.z),
                    Vec2::new(r.max.x, r.min.z),
                ];
                let mut best = min_opt(ray_aabb(origin, dir, &wide), ray_aabb(origin, dir, &tall));
                for c in corners {
                    best = min_opt(best, ray_circle(origin, dir, c, inflate));
                }
                best
            }
        }
    }
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Ray vs disc. Returns the entry parameter, 0 when starting inside.
pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let m = origin - center;
    let c = m.length_sq() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = m.dot(dir);
    if b > 0.0 {
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    Some((-b - disc.sqrt()).max(0.0))
}

/// Slab test. Returns the entry parameter, 0 when starting inside.
pub fn ray_aabb(origin: Vec2, dir: Vec2, r: &Aabb) -> Option<f64> {
    let mut t_min = 0.0_f64;
    let mut t_max = f64::INFINITY;
    for (o, d, lo, hi) in [
        (origin.x, dir.x, r.min.x, r.max.x),
        (origin.z, dir.z, r.min.z, r.max.z),
    ] {
        if d.abs() < 1e-300 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let inv = 1.0 / d;
            let (mut t0, mut t1) = ((lo - o) * inv, (hi - o) * inv);
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_min = t_min.max(t0);
            t_max = t_max.min(t1);
            if t_min > t_max {
                return None;
            }
        }
    }
    Some(t_min)
}

/// Ray vs capsule (segment `a`–`b` swept by `radius`).
pub fn ray_capsule(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2, radius: f64) -> Option<f64> {
    let ab = b - a;
    let len = ab.length();
    let mut best = min_opt(
        ray_circle(origin, dir, a, radius),
        ray_circle(origin, dir, b, radius),
    );
    if len > 0.0 {
        // Body rectangle in the segment's local frame: u along, v across.
        let u = ab * (1.0 / len);
        let v = u.perp();
        let rel = origin - a;
        let lo = Vec2::new(rel.dot(u), rel.dot(v));
        let ld = Vec2::new(dir.dot(u), dir.dot(v));
        let body = Aabb::new(Vec2::new(0.0, -radius), Vec2::new(len, radius));
        best = min_opt(best, ray_aabb(lo, ld, &body));
    }
    best
}
