//! Plane geometry: vectors, segments, axis-aligned rectangles.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

pub const fn vec2(x: f64, y: f64) -> Vec2 {
    Vec2 { x, y }
}

impl Vec2 {
    pub const ZERO: Vec2 = vec2(0.0, 0.0);

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product; positive when `o` is
    /// counterclockwise of `self`.
    pub fn det(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Unit vector; zero input maps to zero.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self / n
        } else {
            Vec2::ZERO
        }
    }

    /// Counterclockwise rotation by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        vec2(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Rotation by +90 degrees.
    pub fn perp(self) -> Vec2 {
        vec2(-self.y, self.x)
    }

    /// Clips the magnitude to `max`, preserving direction.
    pub fn clipped(self, max: f64) -> Vec2 {
        let n = self.norm();
        if n > max {
            self * (max / n)
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        vec2(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        vec2(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        vec2(self.x * k, self.y * k)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, k: f64) -> Vec2 {
        vec2(self.x / k, self.y / k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        vec2(-self.x, -self.y)
    }
}

/// Line segment between two points.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Segment { a, b }
    }

    /// Closest point on the segment to `p`.
    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let ab = self.b - self.a;
        let len_sq = ab.norm_sq();
        if len_sq == 0.0 {
            return self.a;
        }
        let t = ((p - self.a).dot(ab) / len_sq).clamp(0.0, 1.0);
        self.a + ab * t
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        (p - self.closest_point(p)).norm()
    }

    /// Proper or touching intersection with another segment.
    pub fn intersects(&self, o: &Segment) -> bool {
        fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
            (b - a).det(c - a)
        }
        fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
            p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
        }
        let d1 = orient(o.a, o.b, self.a);
        let d2 = orient(o.a, o.b, self.b);
        let d3 = orient(self.a, self.b, o.a);
        let d4 = orient(self.a, self.b, o.b);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        (d1 == 0.0 && on_segment(o.a, o.b, self.a))
            || (d2 == 0.0 && on_segment(o.a, o.b, self.b))
            || (d3 == 0.0 && on_segment(self.a, self.b, o.a))
            || (d4 == 0.0 && on_segment(self.a, self.b, o.b))
    }
}

/// Axis-aligned rectangle, stored as min/max corners.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        assert!(min.x <= max.x && min.y <= max.y, "rect corners out of order");
        Rect { min, max }
    }

    /// Strict interior; the boundary does not count as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    pub fn edges(&self) -> [Segment; 4] {
        let bl = self.min;
        let br = vec2(self.max.x, self.min.y);
        let tr = self.max;
        let tl = vec2(self.min.x, self.max.y);
        [
            Segment::new(bl, br),
            Segment::new(br, tr),
            Segment::new(tr, tl),
            Segment::new(tl, bl),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_zero_is_zero() {
        assert_eq!(Vec2::ZERO.normalized(), Vec2::ZERO);
    }

    #[test]
    fn rotation_quarter_turn() {
        let r = vec2(1.0, 0.0).rotated(std::f64::consts::FRAC_PI_2);
        assert!((r.x - 0.0).abs() < 1e-15 && (r.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn clip_preserves_direction() {
        let v = vec2(3.0, 4.0).clipped(1.0);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((v.x / v.y - 0.75).abs() < 1e-12);
    }

    #[test]
    fn segment_closest_point_clamps_to_endpoints() {
        let s = Segment::new(vec2(0.0, 0.0), vec2(1.0, 0.0));
        assert_eq!(s.closest_point(vec2(-2.0, 1.0)), vec2(0.0, 0.0));
        assert_eq!(s.closest_point(vec2(0.5, 3.0)), vec2(0.5, 0.0));
        assert_eq!(s.closest_point(vec2(9.0, -1.0)), vec2(1.0, 0.0));
    }

    #[test]
    fn segment_intersection_cases() {
        let s = Segment::new(vec2(0.0, 0.0), vec2(2.0, 2.0));
        assert!(s.intersects(&Segment::new(vec2(0.0, 2.0), vec2(2.0, 0.0))));
        assert!(!s.intersects(&Segment::new(vec2(3.0, 0.0), vec2(3.0, 2.0))));
        // Touching at an endpoint counts.
        assert!(s.intersects(&Segment::new(vec2(2.0, 2.0), vec2(3.0, 2.0))));
    }

    #[test]
    fn rect_interior_is_strict() {
        let r = Rect::new(vec2(0.0, 0.0), vec2(2.0, 1.0));
        assert!(r.contains(vec2(1.0, 0.5)));
        assert!(!r.contains(vec2(0.0, 0.5)));
        assert!(!r.contains(vec2(3.0, 0.5)));
    }
}
