//! Lanelet-style lane representation: ordered boundary point lists.

use thiserror::Error;

use crate::geometry::{dir_heading, Point2};

#[derive(Debug, Error, PartialEq)]
pub enum PolylineError {
    #[error("polyline needs at least 2 points, got {got}")]
    TooFewPoints { got: usize },
    #[error("consecutive points {index} and {} coincide", index + 1)]
    DuplicatePoint { index: usize },
    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },
    #[error("lane boundaries are in different frames")]
    FrameMismatch,
    #[error("lane width must be positive, got {got}")]
    BadWidth { got: f64 },
}

/// Coordinate frame a polyline lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    World,
    Vehicle(u32),
}

/// Ordered 2-D point sequence with a frame tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point2>,
    frame: Frame,
}

impl Polyline {
    pub fn new(points: Vec<Point2>, frame: Frame) -> Result<Self, PolylineError> {
        if points.len() < 2 {
            return Err(PolylineError::TooFewPoints { got: points.len() });
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(PolylineError::NonFinite { index: i });
            }
        }
        for i in 0..points.len() - 1 {
            if points[i].dist(points[i + 1]) < 1e-12 {
                return Err(PolylineError::DuplicatePoint { index: i });
            }
        }
        Ok(Polyline { points, frame })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> Point2 {
        self.points[0]
    }

    pub fn last(&self) -> Point2 {
        *self.points.last().unwrap()
    }

    /// Total arc length of the polyline.
    pub fn arc_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].dist(w[1]))
            .sum()
    }

    /// Cumulative arc length at every vertex.
    pub fn cumulative_lengths(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.points.windows(2) {
            acc += w[0].dist(w[1]);
            out.push(acc);
        }
        out
    }

    /// Point at arc length `s`, clamped to the polyline ends.
    pub fn point_at_arc(&self, s: f64) -> Point2 {
        if s <= 0.0 {
            return self.first();
        }
        let mut acc = 0.0;
        for w in self.points.windows(2) {
            let seg = w[0].dist(w[1]);
            if acc + seg >= s {
                let t = (s - acc) / seg;
                return w[0] + (w[1] - w[0]) * t;
            }
            acc += seg;
        }
        self.last()
    }

    /// Heading of the segment containing arc length `s`.
    pub fn heading_at_arc(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for w in self.points.windows(2) {
            let seg = w[0].dist(w[1]);
            if acc + seg >= s || acc + seg >= self.arc_length() - 1e-12 {
                return dir_heading(w[1] - w[0]);
            }
            acc += seg;
        }
        dir_heading(self.last() - self.points[self.points.len() - 2])
    }

    /// Resample at uniform arc-length steps of `spacing`, keeping both
    /// endpoints. The final step may be shorter than nominal.
    pub fn resample(&self, spacing: f64) -> Polyline {
        assert!(spacing > 0.0);
        let total = self.arc_length();
        let mut pts = Vec::with_capacity((total / spacing) as usize + 2);
        // Single monotone walk over the segments; sample targets and
        // segment boundaries both advance, so the whole resample is O(n).
        let mut s = 0.0;
        let mut acc = 0.0;
        let mut seg_iter = self.points.windows(2);
        let mut seg = seg_iter.next();
        while s < total - 1e-9 {
            while let Some(w) = seg {
                let len = w[0].dist(w[1]);
                if acc + len >= s {
                    break;
                }
                acc += len;
                seg = seg_iter.next();
            }
            match seg {
                Some(w) => {
                    let len = w[0].dist(w[1]);
                    let t = if len > 0.0 { (s - acc) / len } else { 0.0 };
                    pts.push(w[0] + (w[1] - w[0]) * t);
                }
                None => break,
            }
            s += spacing;
        }
        pts.push(self.last());
        Polyline::new(pts, self.frame).expect("resampled polyline is valid")
    }

    pub fn reversed(&self) -> Polyline {
        let mut pts = self.points.clone();
        pts.reverse();
        Polyline {
            points: pts,
            frame: self.frame,
        }
    }

    /// Closest point on the polyline segments to `p`: returns the arc
    /// length of the projection and its distance.
    pub fn project(&self, p: Point2) -> (f64, f64) {
        let mut best_s = 0.0;
        let mut best_d = f64::INFINITY;
        let mut acc = 0.0;
        for w in self.points.windows(2) {
            let seg = w[1] - w[0];
            let len = seg.norm();
            let t = ((p - w[0]).dot(seg) / (len * len)).clamp(0.0, 1.0);
            let q = w[0] + seg * t;
            let d = p.dist(q);
            if d < best_d {
                best_d = d;
                best_s = acc + t * len;
            }
            acc += len;
        }
        (best_s, best_d)
    }
}

/// The GT sample point minimizing Euclidean distance to `p`; ties broken
/// by lowest index.
pub fn closest_point(gt: &Polyline, p: Point2) -> (Point2, f64) {
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, q) in gt.points().iter().enumerate() {
        let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    (gt.points()[best], best_d2.sqrt())
}

/// A lane as two boundary polylines.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub left: Polyline,
    pub right: Polyline,
    pub width: f64,
}

impl Lane {
    pub fn new(left: Polyline, right: Polyline, width: f64) -> Result<Self, PolylineError> {
        if left.frame() != right.frame() {
            return Err(PolylineError::FrameMismatch);
        }
        if width <= 0.0 {
            return Err(PolylineError::BadWidth { got: width });
        }
        Ok(Lane { left, right, width })
    }

    /// Centerline polyline from index-paired boundary points (up to the
    /// shorter boundary). Boundaries produced by the sensor have equal
    /// counts; fused lanes may differ by the seam points.
    pub fn centerline(&self) -> Polyline {
        let n = self.left.len().min(self.right.len());
        let mut pts: Vec<Point2> = Vec::with_capacity(n);
        for i in 0..n {
            let m = (self.left.points()[i] + self.right.points()[i]) * 0.5;
            if pts.last().map_or(true, |p: &Point2| p.dist(m) > 1e-9) {
                pts.push(m);
            }
        }
        Polyline::new(pts, self.left.frame()).expect("centerline is valid")
    }
}
