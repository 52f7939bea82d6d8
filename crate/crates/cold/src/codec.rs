//! Binary lane-message codec: cubic-Bézier sections for compact V2X
//! exchange, plus the raw point-list size baseline.
//!
//! Wire layout (all little-endian): magic `CLDM` (4 B), version = 1
//! (1 B), vehicle_id (4 B), frame_id (4 B), section_count (1 B), then
//! per section a 32-bit section length and 8 control points as pairs of
//! 64-bit floats (left boundary p0..p3, then right boundary p0..p3).
//! Total 14 + 132 n bytes.

use thiserror::Error;

use crate::geometry::Point2;
use crate::polyline::{Frame, Lane, Polyline};
use crate::sensor::DetectedLane;

pub const MAGIC: [u8; 4] = *b"CLDM";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;
pub const SECTION_LEN: usize = 4 + 8 * 16;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("need at least 4 points to fit a cubic Bezier, got {got}")]
    TooFewPoints { got: usize },
    #[error("degenerate input: all points coincide")]
    Degenerate,
    #[error("message has {got} sections, the wire format carries at most 255")]
    TooManySections { got: usize },
    #[error("bad magic at offset {offset}")]
    BadMagic { offset: usize },
    #[error("unsupported version {found} at offset {offset}")]
    BadVersion { offset: usize, found: u8 },
    #[error("truncated input at offset {offset}")]
    Truncated { offset: usize },
    #[error("{count} trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize, count: usize },
}

/// Cubic Bézier curve with four control points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBezier {
    pub p: [Point2; 4],
}

/// One encoded lane section: a Bézier per boundary plus its length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BezierSection {
    pub left: CubicBezier,
    pub right: CubicBezier,
    pub section_length: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneMessage {
    pub vehicle_id: u32,
    pub frame_id: u32,
    pub sections: Vec<BezierSection>,
}

/// De Casteljau evaluation at `t` in [0, 1].
pub fn eval_bezier(curve: &CubicBezier, t: f64) -> Point2 {
    let mut q = curve.p;
    for level in (1..4).rev() {
        for i in 0..level {
            q[i] = q[i] * (1.0 - t) + q[i + 1] * t;
        }
    }
    q[0]
}

fn bernstein(t: f64) -> [f64; 4] {
    let u = 1.0 - t;
    [u * u * u, 3.0 * t * u * u, 3.0 * t * t * u, t * t * t]
}

fn derivatives(curve: &CubicBezier, t: f64) -> (Point2, Point2) {
    let p = &curve.p;
    let u = 1.0 - t;
    let d1 = (p[1] - p[0]) * (3.0 * u * u)
        + (p[2] - p[1]) * (6.0 * u * t)
        + (p[3] - p[2]) * (3.0 * t * t);
    let d2 = (p[2] - p[1] * 2.0 + p[0]) * (6.0 * u) + (p[3] - p[2] * 2.0 + p[1]) * (6.0 * t);
    (d1, d2)
}

/// Closed-form normal-equation solve for p1/p2 at fixed parameters.
fn solve_interior(points: &[Point2], params: &[f64], p0: Point2, p3: Point2) -> (Point2, Point2) {
    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    let mut rhs1 = Point2::new(0.0, 0.0);
    let mut rhs2 = Point2::new(0.0, 0.0);
    for (p, &t) in points.iter().zip(params) {
        let b = bernstein(t);
        let d = *p - p0 * b[0] - p3 * b[3];
        a11 += b[1] * b[1];
        a12 += b[1] * b[2];
        a22 += b[2] * b[2];
        rhs1 = rhs1 + d * b[1];
        rhs2 = rhs2 + d * b[2];
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-12 {
        // Not enough interior support; degrade to a uniform chord.
        (p0 + (p3 - p0) * (1.0 / 3.0), p0 + (p3 - p0) * (2.0 / 3.0))
    } else {
        (
            (rhs1 * a22 - rhs2 * a12) * (1.0 / det),
            (rhs2 * a11 - rhs1 * a12) * (1.0 / det),
        )
    }
}

/// Move each parameter toward the closest point on the curve (Newton
/// steps on the squared-distance objective).
fn reproject(points: &[Point2], params: &mut [f64], curve: &CubicBezier) {
    for _ in 0..2 {
        for (p, t) in points.iter().zip(params.iter_mut()) {
            let c = eval_bezier(curve, *t);
            let (d1, d2) = derivatives(curve, *t);
            let diff = c - *p;
            let den = d1.dot(d1) + diff.dot(d2);
            if den.abs() > 1e-12 {
                *t = (*t - diff.dot(d1) / den).clamp(0.0, 1.0);
            }
        }
    }
}

/// Least-squares cubic Bézier fit with clamped endpoints. Interior
/// control points minimize the squared distances from the input points
/// to the curve; parameters start at chord length and are refined by a
/// few projection passes so the fit approximates the geometric optimum.
pub fn fit_bezier(points: &[Point2]) -> Result<CubicBezier, CodecError> {
    if points.len() < 4 {
        return Err(CodecError::TooFewPoints { got: points.len() });
    }
    let mut params = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    params.push(0.0);
    for w in points.windows(2) {
        acc += w[0].dist(w[1]);
        params.push(acc);
    }
    if acc < 1e-12 {
        return Err(CodecError::Degenerate);
    }
    for t in params.iter_mut() {
        *t /= acc;
    }
    let p0 = points[0];
    let p3 = *points.last().unwrap();
    let (mut p1, mut p2) = solve_interior(points, &params, p0, p3);
    for _ in 0..3 {
        let curve = CubicBezier { p: [p0, p1, p2, p3] };
        reproject(points, &mut params, &curve);
        let refit = solve_interior(points, &params, p0, p3);
        p1 = refit.0;
        p2 = refit.1;
    }
    Ok(CubicBezier { p: [p0, p1, p2, p3] })
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode(msg: &LaneMessage) -> Result<Vec<u8>, CodecError> {
    if msg.sections.len() > 255 {
        return Err(CodecError::TooManySections {
            got: msg.sections.len(),
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + SECTION_LEN * msg.sections.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    put_u32(&mut out, msg.vehicle_id);
    put_u32(&mut out, msg.frame_id);
    out.push(msg.sections.len() as u8);
    for s in &msg.sections {
        out.extend_from_slice(&s.section_length.to_le_bytes());
        for curve in [&s.left, &s.right] {
            for p in &curve.p {
                out.extend_from_slice(&p.x.to_le_bytes());
                out.extend_from_slice(&p.y.to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.bytes.len() {
            return Err(CodecError::Truncated {
                offset: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, CodecError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<LaneMessage, CodecError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(CodecError::BadMagic { offset: 0 });
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(CodecError::BadVersion {
            offset: 4,
            found: version,
        });
    }
    let vehicle_id = r.u32()?;
    let frame_id = r.u32()?;
    let count = r.u8()? as usize;
    let mut sections = Vec::with_capacity(count);
    for _ in 0..count {
        let section_length = r.f32()?;
        let mut curves = [CubicBezier {
            p: [Point2::new(0.0, 0.0); 4],
        }; 2];
        for curve in curves.iter_mut() {
            for p in curve.p.iter_mut() {
                let x = r.f64()?;
                let y = r.f64()?;
                *p = Point2::new(x, y);
            }
        }
        sections.push(BezierSection {
            left: curves[0],
            right: curves[1],
            section_length,
        });
    }
    if r.pos != bytes.len() {
        return Err(CodecError::TrailingBytes {
            offset: r.pos,
            count: bytes.len() - r.pos,
        });
    }
    Ok(LaneMessage {
        vehicle_id,
        frame_id,
        sections,
    })
}

/// Size of the uncompressed baseline: every boundary point shipped as
/// three 32-bit floats (x, y, z).
pub fn raw_size(lane: &DetectedLane) -> usize {
    12 * (lane.left.len() + lane.right.len())
}

/// Arc-length fractions (in (0,1)) at which a boundary's curvature
/// regime (left turn / straight / right turn) changes persistently.
fn split_fractions(points: &[Point2]) -> Vec<f64> {
    let n = points.len();
    let k = 25usize; // ~2.5 m baseline at 0.10 m spacing
    let min_run = 40usize;
    if n < 2 * k + 2 || n < 2 * min_run {
        return Vec::new();
    }
    // Signed turn over a 2k-point baseline; threshold rejects noise.
    let classify = |i: usize| -> i8 {
        let a = points[i] - points[i - k];
        let b = points[i + k] - points[i];
        let theta = (a.cross(b)).atan2(a.dot(b));
        if theta > 0.06 {
            1
        } else if theta < -0.06 {
            -1
        } else {
            0
        }
    };
    let mut classes = vec![0i8; n];
    for i in k..n - k {
        classes[i] = classify(i);
    }
    for i in 0..k {
        classes[i] = classes[k];
        classes[n - 1 - i] = classes[n - 1 - k];
    }
    // Collapse to runs, merging short ones into their predecessor.
    let mut runs: Vec<(i8, usize, usize)> = Vec::new();
    for (i, c) in classes.iter().enumerate() {
        match runs.last_mut() {
            Some((rc, _, end)) if rc == c => *end = i,
            _ => runs.push((*c, i, i)),
        }
    }
    let mut merged: Vec<(i8, usize, usize)> = Vec::new();
    for run in runs {
        let len = run.2 - run.1 + 1;
        match merged.last_mut() {
            Some(prev) if len < min_run => prev.2 = run.2,
            _ => merged.push(run),
        }
    }
    if merged.len() > 1 && merged[0].2 - merged[0].1 + 1 < min_run {
        let first = merged.remove(0);
        merged[0].1 = first.1;
    }
    let cum = cumulative(points);
    let total = *cum.last().unwrap();
    merged[..merged.len() - 1]
        .iter()
        .map(|(_, _, end)| cum[*end] / total)
        .collect()
}

fn cumulative(points: &[Point2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in points.windows(2) {
        acc += w[0].dist(w[1]);
        out.push(acc);
    }
    out
}

fn arc_len(points: &[Point2]) -> f64 {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Index of the boundary point closest to the given arc-length fraction.
fn index_at_fraction(cum: &[f64], frac: f64) -> usize {
    let target = frac * cum.last().unwrap();
    match cum.binary_search_by(|s| s.partial_cmp(&target).unwrap()) {
        Ok(i) => i,
        Err(i) => {
            if i == 0 {
                0
            } else if i >= cum.len() {
                cum.len() - 1
            } else if target - cum[i - 1] <= cum[i] - target {
                i - 1
            } else {
                i
            }
        }
    }
}

/// Encode a local detection as Bézier sections, split where either
/// boundary's curvature regime changes. Split positions are expressed
/// as arc-length fractions so the two boundaries stay in step even
/// though the inner boundary of a turn is shorter than the outer one.
pub fn lane_to_message(
    lane: &DetectedLane,
    vehicle_id: u32,
    frame_id: u32,
) -> Result<LaneMessage, CodecError> {
    let left = lane.left.points();
    let right = lane.right.points();
    let mut fracs: Vec<f64> = split_fractions(left);
    fracs.extend(split_fractions(right));
    fracs.retain(|f| *f > 0.02 && *f < 0.98);
    fracs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    fracs.dedup_by(|a, b| (*a - *b).abs() < 0.02);
    if fracs.len() > 254 {
        fracs.clear();
    }
    let mut bounds = vec![0.0];
    bounds.extend(fracs);
    bounds.push(1.0);

    let cum_l = cumulative(left);
    let cum_r = cumulative(right);
    let mut sections = Vec::with_capacity(bounds.len() - 1);
    for w in bounds.windows(2) {
        let (la, lb) = (index_at_fraction(&cum_l, w[0]), index_at_fraction(&cum_l, w[1]));
        let (ra, rb) = (index_at_fraction(&cum_r, w[0]), index_at_fraction(&cum_r, w[1]));
        let seg_l = &left[la..=lb];
        let seg_r = &right[ra..=rb];
        sections.push(BezierSection {
            left: fit_bezier(seg_l)?,
            right: fit_bezier(seg_r)?,
            section_length: ((arc_len(seg_l) + arc_len(seg_r)) / 2.0) as f32,
        });
    }
    Ok(LaneMessage {
        vehicle_id,
        frame_id,
        sections,
    })
}

/// Reconstruct boundary polylines from a message, sampled at `spacing`.
/// The result lives in the sender's vehicle frame.
pub fn message_to_lane(msg: &LaneMessage, spacing: f64) -> Lane {
    let mut left: Vec<Point2> = Vec::new();
    let mut right: Vec<Point2> = Vec::new();
    let push = |out: &mut Vec<Point2>, p: Point2| {
        if out.last().map_or(true, |q| q.dist(p) > 1e-9) {
            out.push(p);
        }
    };
    for s in &msg.sections {
        let steps = ((s.section_length as f64 / spacing).round() as usize).max(1);
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            push(&mut left, eval_bezier(&s.left, t));
            push(&mut right, eval_bezier(&s.right, t));
        }
    }
    let frame = Frame::Vehicle(msg.vehicle_id);
    Lane::new(
        Polyline::new(left, frame).expect("decoded boundary is valid"),
        Polyline::new(right, frame).expect("decoded boundary is valid"),
        4.0,
    )
    .expect("decoded lane is valid")
}
