//! Static obstacles: wall segments and axis-aligned rectangles, with a
//! nearest-boundary query used for collision tests and denoising guidance.

use serde::{Deserialize, Serialize};

use crate::geom::{vec2, Rect, Segment, Vec2};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObstacleMap {
    pub segments: Vec<Segment>,
    pub rects: Vec<Rect>,
}

/// Result of a nearest-boundary query.
///
/// `difference` runs from the nearest boundary point to the query point when
/// outside, and from the query point to the nearest boundary point when
/// inside, so its magnitude is always the unsigned distance to the boundary
/// and its direction always leads out of (or away from) the obstacle.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ObstacleQuery {
    pub difference: Vec2,
    pub inside: bool,
    /// Outward unit normal at the nearest boundary point. Coincides with the
    /// direction of `difference` whenever the distance is positive; it is the
    /// deterministic fallback direction when the query point sits exactly on
    /// a boundary.
    pub normal: Vec2,
}

impl ObstacleQuery {
    pub fn distance(&self) -> f64 {
        self.difference.norm()
    }

    /// Unit direction away from the obstacle, falling back to the boundary
    /// normal at zero distance.
    pub fn away_direction(&self) -> Vec2 {
        let d = self.difference.normalized();
        if d == Vec2::ZERO {
            self.normal
        } else {
            d
        }
    }
}

fn segment_normal_towards(seg: &Segment, p: Vec2, bp: Vec2) -> Vec2 {
    let d = (p - bp).normalized();
    if d != Vec2::ZERO {
        return d;
    }
    // On the segment itself: perpendicular of the segment direction.
    (seg.b - seg.a).perp().normalized()
}

/// Outward face normal for a boundary point of `rect`, with a fixed
/// bottom/right/top/left priority for corners.
fn rect_face_normal(rect: &Rect, bp: Vec2) -> Vec2 {
    if bp.y == rect.min.y {
        vec2(0.0, -1.0)
    } else if bp.x == rect.max.x {
        vec2(1.0, 0.0)
    } else if bp.y == rect.max.y {
        vec2(0.0, 1.0)
    } else {
        vec2(-1.0, 0.0)
    }
}

impl ObstacleMap {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty() && self.rects.is_empty()
    }

    /// Nearest boundary point over all primitives. `None` on an empty map.
    /// The boundary itself counts as outside; ties keep the first primitive
    /// in segment-then-rect order.
    pub fn query(&self, p: Vec2) -> Option<ObstacleQuery> {
        let mut best: Option<(f64, ObstacleQuery)> = None;
        let mut consider = |dist: f64, q: ObstacleQuery| {
            if best.as_ref().map_or(true, |(d, _)| dist < *d) {
                best = Some((dist, q));
            }
        };

        for seg in &self.segments {
            let bp = seg.closest_point(p);
            let diff = p - bp;
            consider(
                diff.norm(),
                ObstacleQuery { difference: diff, inside: false, normal: segment_normal_towards(seg, p, bp) },
            );
        }
        for rect in &self.rects {
            if rect.contains(p) {
                let (bp, dist) = rect
                    .edges()
                    .iter()
                    .map(|e| {
                        let c = e.closest_point(p);
                        (c, (p - c).norm())
                    })
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .unwrap();
                consider(
                    dist,
                    ObstacleQuery {
                        difference: bp - p,
                        inside: true,
                        normal: (bp - p).normalized(),
                    },
                );
            } else {
                let bp = vec2(p.x.clamp(rect.min.x, rect.max.x), p.y.clamp(rect.min.y, rect.max.y));
                let diff = p - bp;
                let normal = if diff == Vec2::ZERO { rect_face_normal(rect, bp) } else { diff.normalized() };
                consider(diff.norm(), ObstacleQuery { difference: diff, inside: false, normal });
            }
        }
        best.map(|(_, q)| q)
    }

    /// True when a disc of `radius` at `p` overlaps any obstacle.
    pub fn disc_collides(&self, p: Vec2, radius: f64) -> bool {
        match self.query(p) {
            Some(q) => q.inside || q.distance() < radius,
            None => false,
        }
    }
}
