//! Desired-path geometry: polylines and circles with arc-length lookahead.

use crate::error::{Error, Result};

/// Travel direction around a circular path, seen from above with +X right
/// and +Y up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Cw,
    Ccw,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Cw => "CW",
            Direction::Ccw => "CCW",
        }
    }

    pub fn parse(s: &str) -> Option<Direction> {
        match s {
            "CW" => Some(Direction::Cw),
            "CCW" => Some(Direction::Ccw),
            _ => None,
        }
    }

    /// +1 for CCW (heading increases along travel), -1 for CW.
    pub fn sign(&self) -> f64 {
        match self {
            Direction::Ccw => 1.0,
            Direction::Cw => -1.0,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A desired path, traversed from the first vertex onwards (polyline) or
/// around the circle in `direction`.
#[derive(Debug, Clone, PartialEq)]
pub enum PathSpec {
    Polyline { vertices: Vec<(f64, f64)> },
    Circle { centre: (f64, f64), radius: f64, direction: Direction },
}

impl PathSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PathSpec::Polyline { vertices } => {
                if vertices.len() < 2 {
                    return Err(Error::InvalidInput(
                        "polyline path needs at least 2 vertices".into(),
                    ));
                }
                for v in vertices {
                    if !v.0.is_finite() || !v.1.is_finite() {
                        return Err(Error::InvalidInput("non-finite path vertex".into()));
                    }
                }
                Ok(())
            }
            PathSpec::Circle { radius, centre, .. } => {
                if !(*radius > 0.0) || !centre.0.is_finite() || !centre.1.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "circle path needs a positive finite radius, got {radius}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Translate the whole path by (dx, dy).
    pub fn translated(&self, dx: f64, dy: f64) -> PathSpec {
        match self {
            PathSpec::Polyline { vertices } => PathSpec::Polyline {
                vertices: vertices.iter().map(|(x, y)| (x + dx, y + dy)).collect(),
            },
            PathSpec::Circle { centre, radius, direction } => PathSpec::Circle {
                centre: (centre.0 + dx, centre.1 + dy),
                radius: *radius,
                direction: *direction,
            },
        }
    }

    pub fn start(&self) -> (f64, f64) {
        match self {
            PathSpec::Polyline { vertices } => vertices[0],
            // circle traversal starts at the top by convention
            PathSpec::Circle { centre, radius, .. } => (centre.0, centre.1 + radius),
        }
    }

    /// Heading of travel at the start point.
    pub fn start_heading(&self) -> f64 {
        match self {
            PathSpec::Polyline { vertices } => {
                let (a, b) = (vertices[0], vertices[1]);
                (b.1 - a.1).atan2(b.0 - a.0)
            }
            // tangent at the top of the circle
            PathSpec::Circle { direction, .. } => match direction {
                Direction::Cw => 0.0,
                Direction::Ccw => std::f64::consts::PI,
            },
        }
    }

    /// Total length for polylines; circles are unbounded.
    pub fn polyline_length(&self) -> Option<f64> {
        match self {
            PathSpec::Polyline { vertices } => Some(
                vertices
                    .windows(2)
                    .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
                    .sum(),
            ),
            PathSpec::Circle { .. } => None,
        }
    }

    /// Arc-length position of the nearest point on the path. For circles the
    /// value is an angle-derived arc from the +X axis and only differences
    /// are meaningful.
    pub fn progress(&self, pos: (f64, f64)) -> f64 {
        match self {
            PathSpec::Polyline { vertices } => project_polyline(vertices, pos).0,
            PathSpec::Circle { centre, radius, direction } => {
                let ang = (pos.1 - centre.1).atan2(pos.0 - centre.0);
                direction.sign() * ang * radius
            }
        }
    }

    /// Point on the path `dist` metres of arc beyond the nearest point to
    /// `pos`. Beyond a polyline's ends the final (or first) segment is
    /// extended, so a lookahead always exists.
    pub fn lookahead_point(&self, pos: (f64, f64), dist: f64) -> (f64, f64) {
        match self {
            PathSpec::Polyline { vertices } => {
                let (s, _) = project_polyline(vertices, pos);
                point_at_polyline(vertices, s + dist)
            }
            PathSpec::Circle { centre, radius, direction } => {
                let ang = (pos.1 - centre.1).atan2(pos.0 - centre.0);
                let target = ang + direction.sign() * dist / radius;
                (centre.0 + radius * target.cos(), centre.1 + radius * target.sin())
            }
        }
    }

    /// Point at arc position `s`, in the same coordinate that
    /// [`PathSpec::progress`] returns, so
    /// `point_at_arc(progress(p) + d) == lookahead_point(p, d)`.
    pub fn point_at_arc(&self, s: f64) -> (f64, f64) {
        match self {
            PathSpec::Polyline { vertices } => point_at_polyline(vertices, s),
            PathSpec::Circle { centre, radius, direction } => {
                let ang = direction.sign() * s / radius;
                (centre.0 + radius * ang.cos(), centre.1 + radius * ang.sin())
            }
        }
    }
}

/// Nearest point on the polyline: (arc distance from the first vertex,
/// euclidean distance to the path).
fn project_polyline(vertices: &[(f64, f64)], p: (f64, f64)) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY);
    let mut acc = 0.0;
    for w in vertices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let seg_len = len2.sqrt();
        if seg_len > 0.0 {
            let u = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
            let (qx, qy) = (a.0 + u * dx, a.1 + u * dy);
            let d = (p.0 - qx).hypot(p.1 - qy);
            if d < best.1 {
                best = (acc + u * seg_len, d);
            }
        }
        acc += seg_len;
    }
    best
}

/// Point at arc distance `s` from the first vertex, extrapolating along the
/// end segments for out-of-range `s`.
fn point_at_polyline(vertices: &[(f64, f64)], s: f64) -> (f64, f64) {
    let mut acc = 0.0;
    let mut last_seg: Option<((f64, f64), (f64, f64), f64)> = None;
    for w in vertices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg_len = (b.0 - a.0).hypot(b.1 - a.1);
        if seg_len == 0.0 {
            continue;
        }
        if s <= acc + seg_len {
            let u = (s - acc) / seg_len; // may be negative before the start
            return (a.0 + u * (b.0 - a.0), a.1 + u * (b.1 - a.1));
        }
        acc += seg_len;
        last_seg = Some((a, b, seg_len));
    }
    // past the end: extend the final segment
    let (a, b, seg_len) = last_seg.expect("validated polyline has a nonzero segment");
    let u = (s - (acc - seg_len)) / seg_len;
    (a.0 + u * (b.0 - a.0), a.1 + u * (b.1 - a.1))
}
