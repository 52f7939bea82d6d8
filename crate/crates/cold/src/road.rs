//! Synthetic ground-truth roads composed of straights and circular arcs.
//!
//! The centerline is C1-continuous at segment joints; lane boundaries are
//! exact offset curves (parallel lines and concentric arcs), queryable at
//! any arc length.

use thiserror::Error;

use crate::geometry::{heading_dir, normalize_angle, Point2, Pose2};
use crate::polyline::{Frame, Lane, Polyline};

#[derive(Debug, Error, PartialEq)]
pub enum RoadError {
    #[error("segment {index}: length must be positive, got {got}")]
    BadLength { index: usize, got: f64 },
    #[error("segment {index}: radius must be positive, got {got}")]
    BadRadius { index: usize, got: f64 },
    #[error("segment {index}: |angle| must be <= 180 deg, got {got}")]
    BadAngle { index: usize, got: f64 },
    #[error("lane width must be positive, got {got}")]
    BadWidth { got: f64 },
    #[error("road spec has no segments")]
    Empty,
    #[error("segment {index}: boundary offset {offset} m exceeds arc radius {radius} m")]
    SelfIntersecting {
        index: usize,
        offset: f64,
        radius: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnDirection {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentSpec {
    Straight { length: f64 },
    Arc { radius: f64, angle_deg: f64, direction: TurnDirection },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadSpec {
    pub segments: Vec<SegmentSpec>,
    pub lane_width: f64,
}

impl RoadSpec {
    pub fn validate(&self) -> Result<(), RoadError> {
        if self.segments.is_empty() {
            return Err(RoadError::Empty);
        }
        if self.lane_width <= 0.0 {
            return Err(RoadError::BadWidth { got: self.lane_width });
        }
        for (index, seg) in self.segments.iter().enumerate() {
            match *seg {
                SegmentSpec::Straight { length } => {
                    if length <= 0.0 {
                        return Err(RoadError::BadLength { index, got: length });
                    }
                }
                SegmentSpec::Arc { radius, angle_deg, .. } => {
                    if radius <= 0.0 {
                        return Err(RoadError::BadRadius { index, got: radius });
                    }
                    if angle_deg.abs() > 180.0 || angle_deg == 0.0 {
                        return Err(RoadError::BadAngle { index, got: angle_deg });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Piece {
    Line {
        start: Point2,
        heading: f64,
        len: f64,
    },
    Arc {
        center: Point2,
        radius: f64,
        start_heading: f64,
        turn: TurnDirection,
        len: f64,
    },
}

impl Piece {
    fn len(&self) -> f64 {
        match self {
            Piece::Line { len, .. } | Piece::Arc { len, .. } => *len,
        }
    }

    fn point_at(&self, s: f64) -> Point2 {
        match *self {
            Piece::Line { start, heading, .. } => start + heading_dir(heading) * s,
            Piece::Arc {
                center,
                radius,
                start_heading,
                turn,
                ..
            } => {
                let phi = arc_heading(start_heading, turn, s / radius);
                center + radial_dir(phi, turn) * radius
            }
        }
    }

    fn heading_at(&self, s: f64) -> f64 {
        match *self {
            Piece::Line { heading, .. } => heading,
            Piece::Arc {
                radius,
                start_heading,
                turn,
                ..
            } => arc_heading(start_heading, turn, s / radius),
        }
    }

    /// Projection of `p` onto the piece: (arc length clamped to the piece,
    /// distance).
    fn project(&self, p: Point2) -> (f64, f64) {
        match *self {
            Piece::Line { start, heading, len } => {
                let d = heading_dir(heading);
                let t = (p - start).dot(d).clamp(0.0, len);
                (t, p.dist(start + d * t))
            }
            Piece::Arc {
                center,
                radius,
                start_heading,
                turn,
                len,
            } => {
                let v = p - center;
                // Angle parameter of p on the circle, in the turn sense.
                let phi = match turn {
                    TurnDirection::Right => v.x.atan2(v.y),
                    TurnDirection::Left => (-v.x).atan2(-v.y),
                };
                let dphi = match turn {
                    TurnDirection::Right => phi - start_heading,
                    TurnDirection::Left => start_heading - phi,
                };
                // Wrap into (-pi, pi] then clamp into the sweep.
                let mut u = normalize_angle(dphi);
                if u > std::f64::consts::PI {
                    u -= std::f64::consts::TAU;
                }
                let s = (u * radius).clamp(0.0, len);
                (s, p.dist(self.point_at(s)))
            }
        }
    }
}

fn arc_heading(start_heading: f64, turn: TurnDirection, dphi: f64) -> f64 {
    match turn {
        TurnDirection::Right => start_heading + dphi,
        TurnDirection::Left => start_heading - dphi,
    }
}

/// Direction from arc center to the point at heading `phi`.
fn radial_dir(phi: f64, turn: TurnDirection) -> Point2 {
    // Right turn: center sits to the vehicle's right, point = center + r*left.
    // Left turn: point = center + r*right.
    let (s, c) = phi.sin_cos();
    match turn {
        TurnDirection::Right => Point2::new(s, c),
        TurnDirection::Left => Point2::new(-s, -c),
    }
}

/// Piecewise line/arc curve, queryable at any arc length.
#[derive(Debug, Clone)]
pub struct PiecewiseCurve {
    pieces: Vec<(f64, Piece)>,
    total: f64,
}

impl PiecewiseCurve {
    fn new(pieces: Vec<Piece>) -> Self {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(pieces.len());
        for p in pieces {
            let len = p.len();
            out.push((acc, p));
            acc += len;
        }
        PiecewiseCurve { pieces: out, total: acc }
    }

    pub fn length(&self) -> f64 {
        self.total
    }

    fn piece_at(&self, s: f64) -> (&Piece, f64) {
        let s = s.clamp(0.0, self.total);
        let idx = match self
            .pieces
            .binary_search_by(|(start, _)| start.partial_cmp(&s).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        let (start, piece) = &self.pieces[idx];
        (piece, (s - start).clamp(0.0, piece.len()))
    }

    pub fn point_at(&self, s: f64) -> Point2 {
        let (piece, local) = self.piece_at(s);
        piece.point_at(local)
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let (piece, local) = self.piece_at(s);
        normalize_angle(piece.heading_at(local))
    }

    pub fn pose_at(&self, s: f64) -> Pose2 {
        Pose2::new(self.point_at(s), self.heading_at(s))
    }

    /// Closest point on the curve: (arc length, distance).
    pub fn project(&self, p: Point2) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for (start, piece) in &self.pieces {
            let (s, d) = piece.project(p);
            if d < best.1 {
                best = (start + s, d);
            }
        }
        best
    }
}

/// Uniform arc-length sampling of a curve, both endpoints included; the
/// final step may be shorter than nominal.
pub fn sample_polyline(curve: &PiecewiseCurve, spacing: f64) -> Polyline {
    assert!(spacing > 0.0, "spacing must be positive");
    let total = curve.length();
    let mut pts = Vec::new();
    let mut s = 0.0;
    while s < total - 1e-9 {
        pts.push(curve.point_at(s));
        s += spacing;
    }
    pts.push(curve.point_at(total));
    Polyline::new(pts, Frame::World).expect("sampled road polyline is valid")
}

/// A built road: centerline plus exact offset boundary curves.
#[derive(Debug, Clone)]
pub struct Road {
    pub center: PiecewiseCurve,
    pub left: PiecewiseCurve,
    pub right: PiecewiseCurve,
    pub width: f64,
}

impl Road {
    /// Ground-truth lane polylines sampled at `spacing`.
    pub fn sample_lane(&self, spacing: f64) -> Lane {
        Lane::new(
            sample_polyline(&self.left, spacing),
            sample_polyline(&self.right, spacing),
            self.width,
        )
        .expect("sampled lane is valid")
    }
}

/// Build centerline and offset boundaries from a road spec.
pub fn build_road(spec: &RoadSpec) -> Result<Road, RoadError> {
    spec.validate()?;
    let half = spec.lane_width / 2.0;
    let mut pose = Pose2::new(Point2::new(0.0, 0.0), 0.0);
    let mut center = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();

    for (index, seg) in spec.segments.iter().enumerate() {
        match *seg {
            SegmentSpec::Straight { length } => {
                center.push(Piece::Line {
                    start: pose.position,
                    heading: pose.heading,
                    len: length,
                });
                left.push(Piece::Line {
                    start: pose.position + pose.left() * half,
                    heading: pose.heading,
                    len: length,
                });
                right.push(Piece::Line {
                    start: pose.position + pose.right() * half,
                    heading: pose.heading,
                    len: length,
                });
                pose = Pose2::new(pose.position + pose.forward() * length, pose.heading);
            }
            SegmentSpec::Arc { radius, angle_deg, direction } => {
                if half >= radius {
                    return Err(RoadError::SelfIntersecting {
                        index,
                        offset: half,
                        radius,
                    });
                }
                let sweep = angle_deg.abs().to_radians();
                let arm = match direction {
                    TurnDirection::Right => pose.right(),
                    TurnDirection::Left => pose.left(),
                };
                let arc_center = pose.position + arm * radius;
                // Inner boundary (turn side) shrinks, outer grows.
                let (r_left, r_right) = match direction {
                    TurnDirection::Right => (radius + half, radius - half),
                    TurnDirection::Left => (radius - half, radius + half),
                };
                for (pieces, r) in [
                    (&mut center, radius),
                    (&mut left, r_left),
                    (&mut right, r_right),
                ] {
                    pieces.push(Piece::Arc {
                        center: arc_center,
                        radius: r,
                        start_heading: pose.heading,
                        turn: direction,
                        len: r * sweep,
                    });
                }
                let end_heading = arc_heading(pose.heading, direction, sweep);
                let end = arc_center + radial_dir(end_heading, direction) * radius;
                pose = Pose2::new(end, end_heading);
            }
        }
    }

    Ok(Road {
        center: PiecewiseCurve::new(center),
        left: PiecewiseCurve::new(left),
        right: PiecewiseCurve::new(right),
        width: spec.lane_width,
    })
}

/// The rural scenario spec used throughout the evaluation harness.
pub fn rural_spec(lane_width: f64) -> RoadSpec {
    RoadSpec {
        segments: vec![
            SegmentSpec::Straight { length: 40.0 },
            SegmentSpec::Arc {
                radius: 12.73,
                angle_deg: 90.0,
                direction: TurnDirection::Right,
            },
            SegmentSpec::Straight { length: 30.0 },
            SegmentSpec::Arc {
                radius: 20.0,
                angle_deg: 45.0,
                direction: TurnDirection::Left,
            },
            SegmentSpec::Straight { length: 40.0 },
        ],
        lane_width,
    }
}
