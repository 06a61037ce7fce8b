//! Planar points, circles and the admissible domain shapes.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A point (or vector) in the plane. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T> From<[T; 2]> for Point<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Point { x, y }
    }
}

impl<T> From<Point<T>> for [T; 2] {
    fn from(p: Point<T>) -> Self {
        [p.x, p.y]
    }
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    pub fn zero() -> Self {
        Point::new(T::zero(), T::zero())
    }

    /// Unit vector at angle `theta`.
    pub fn polar(theta: T) -> Self {
        Point::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn norm2(self) -> T {
        self.dot(self)
    }

    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Counterclockwise quarter turn.
    pub fn rot_ccw(self) -> Self {
        Point::new(-self.y, self.x)
    }

    /// Clockwise quarter turn; the rotated gradient is `grad.rot_cw()`.
    pub fn rot_cw(self) -> Self {
        Point::new(self.y, -self.x)
    }

    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Real> Add for Point<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Point<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Point<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Point::new(self.x * s, self.y * s)
    }
}

impl<T: Real> Neg for Point<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Point::new(-self.x, -self.y)
    }
}

/// The circle `∂B_radius(center)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Circle<T> {
    pub center: Point<T>,
    pub radius: T,
}

impl<T: Real> Circle<T> {
    pub fn new(center: Point<T>, radius: T) -> Self {
        Circle { center, radius }
    }

    pub fn point_at(&self, theta: T) -> Point<T> {
        self.center + Point::polar(theta) * self.radius
    }

    /// Closed polyline approximation with `n` vertices, counterclockwise.
    pub fn polyline(&self, n: usize) -> Vec<Point<T>> {
        let step = T::two_pi() / T::lit(n as f64);
        (0..n).map(|k| self.point_at(step * T::lit(k as f64))).collect()
    }

    /// Distance from `p` to the circle itself.
    pub fn distance_to(&self, p: Point<T>) -> T {
        (p.dist(self.center) - self.radius).abs()
    }

    pub fn contains(&self, p: Point<T>) -> bool {
        p.dist(self.center) < self.radius
    }
}

/// Admissible domain shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain<T> {
    Disk { center: Point<T>, radius: T },
    Rect { min: Point<T>, max: Point<T> },
}

impl<T: Real> Domain<T> {
    pub fn contains(&self, p: Point<T>) -> bool {
        match *self {
            Domain::Disk { center, radius } => p.dist(center) <= radius,
            Domain::Rect { min, max } => p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y,
        }
    }

    /// Signed distance to the boundary, negative inside.
    pub fn signed_distance(&self, p: Point<T>) -> T {
        match *self {
            Domain::Disk { center, radius } => p.dist(center) - radius,
            Domain::Rect { min, max } => {
                let dx = (min.x - p.x).max(p.x - max.x);
                let dy = (min.y - p.y).max(p.y - max.y);
                if dx <= T::zero() && dy <= T::zero() {
                    dx.max(dy)
                } else {
                    Point::new(dx.max(T::zero()), dy.max(T::zero())).norm()
                }
            }
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Point<T>, Point<T>) {
        match *self {
            Domain::Disk { center, radius } => (
                center - Point::new(radius, radius),
                center + Point::new(radius, radius),
            ),
            Domain::Rect { min, max } => (min, max),
        }
    }

    pub fn area(&self) -> T {
        match *self {
            Domain::Disk { radius, .. } => T::PI() * radius * radius,
            Domain::Rect { min, max } => (max.x - min.x) * (max.y - min.y),
        }
    }

    pub fn diameter(&self) -> T {
        let (a, b) = self.bounds();
        match *self {
            Domain::Disk { radius, .. } => radius + radius,
            Domain::Rect { .. } => a.dist(b),
        }
    }

    /// Counterclockwise closed polyline following the boundary pushed inward by `inset`.
    pub fn inset_boundary(&self, inset: T, spacing: T) -> Vec<Point<T>> {
        match *self {
            Domain::Disk { center, radius } => {
                let r = radius - inset;
                let n = ((T::two_pi() * r / spacing).ceil().as_f64() as usize).max(16);
                Circle::new(center, r).polyline(n)
            }
            Domain::Rect { min, max } => {
                let a = min + Point::new(inset, inset);
                let b = max - Point::new(inset, inset);
                let corners = [a, Point::new(b.x, a.y), b, Point::new(a.x, b.y)];
                let mut out = Vec::new();
                for k in 0..4 {
                    let p = corners[k];
                    let q = corners[(k + 1) % 4];
                    let n = ((p.dist(q) / spacing).ceil().as_f64() as usize).max(1);
                    for s in 0..n {
                        let t = T::lit(s as f64 / n as f64);
                        out.push(p + (q - p) * t);
                    }
                }
                out
            }
        }
    }
}
