//! Planar geometry primitives shared by the fusion pipeline.
//!
//! Headings follow a left-handed vehicle convention: x points forward,
//! positive angles turn clockwise (towards the vehicle's right), and all
//! angles are normalized to `[0, 2*pi)`. A vehicle at heading `psi` moves
//! along `(cos psi, -sin psi)` in the world frame, so a right turn
//! increases the heading and a cooperative vehicle turning right ends up
//! at `psi_rel ~ 90 deg` with `y_rel > 0`.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("lines are parallel (|cross| = {cross:.3e})")]
    Parallel { cross: f64 },
    #[error("degenerate segment of length {len:.3e} m")]
    DegenerateSegment { len: f64 },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
}

/// Wrap an angle into `[0, 2*pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a % TAU;
    if r < 0.0 {
        r + TAU
    } else {
        r
    }
}

/// Smallest absolute difference between two angles, in `[0, pi]`.
pub fn wrapped_diff(a: f64, b: f64) -> f64 {
    let d = normalize_angle(a - b);
    d.min(TAU - d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(&self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(&self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(&self, o: Point2) -> f64 {
        (*self - o).norm()
    }

    pub fn normalized(&self) -> Point2 {
        let n = self.norm();
        Point2::new(self.x / n, self.y / n)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Unit vector of a heading under the clockwise-positive convention.
pub fn heading_dir(heading: f64) -> Point2 {
    Point2::new(heading.cos(), -heading.sin())
}

/// Heading of a direction vector, normalized to `[0, 2*pi)`.
pub fn dir_heading(d: Point2) -> f64 {
    normalize_angle((-d.y).atan2(d.x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    pub position: Point2,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(position: Point2, heading: f64) -> Self {
        Pose2 {
            position,
            heading: normalize_angle(heading),
        }
    }

    /// Forward unit vector in the world frame.
    pub fn forward(&self) -> Point2 {
        heading_dir(self.heading)
    }

    /// Unit vector pointing to the vehicle's right.
    pub fn right(&self) -> Point2 {
        heading_dir(self.heading + TAU / 4.0)
    }

    /// Unit vector pointing to the vehicle's left.
    pub fn left(&self) -> Point2 {
        -self.right()
    }
}

/// Relative pose of a cooperative vehicle in the ego frame: x forward,
/// y positive to the right, heading difference clockwise-positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    pub x_rel: f64,
    pub y_rel: f64,
    pub psi_rel: f64,
}

/// Rigid transform of a vehicle-frame point into the world frame.
pub fn to_world(pose: Pose2, local: Point2) -> Point2 {
    let (s, c) = pose.heading.sin_cos();
    Point2::new(
        pose.position.x + local.x * c + local.y * s,
        pose.position.y - local.x * s + local.y * c,
    )
}

/// Inverse of [`to_world`].
pub fn to_local(pose: Pose2, world: Point2) -> Point2 {
    let (s, c) = pose.heading.sin_cos();
    let v = world - pose.position;
    Point2::new(v.x * c - v.y * s, v.x * s + v.y * c)
}

/// Pose of `coop` expressed in the ego frame.
pub fn relative_pose(ego: Pose2, coop: Pose2) -> RelativePose {
    let v = coop.position - ego.position;
    RelativePose {
        x_rel: v.dot(ego.forward()),
        y_rel: v.dot(ego.right()),
        psi_rel: normalize_angle(coop.heading - ego.heading),
    }
}

/// Intersection of two infinite lines given by a point and a direction.
pub fn line_intersection(
    p1: Point2,
    dir1: Point2,
    p2: Point2,
    dir2: Point2,
) -> Result<Point2, GeometryError> {
    let d1 = dir1.normalized();
    let d2 = dir2.normalized();
    let denom = d1.cross(d2);
    if denom.abs() < 1e-9 {
        return Err(GeometryError::Parallel { cross: denom });
    }
    let t = (p2 - p1).cross(d2) / denom;
    Ok(p1 + d1 * t)
}

/// Foot of the perpendicular from `p` onto the infinite line through `a`, `b`.
pub fn orthogonal_foot(p: Point2, a: Point2, b: Point2) -> Result<Point2, GeometryError> {
    let ab = b - a;
    let len = ab.norm();
    if len < 1e-9 {
        return Err(GeometryError::DegenerateSegment { len });
    }
    let t = (p - a).dot(ab) / (len * len);
    Ok(a + ab * t)
}

/// Direction of the least-squares line through the last `k` points of
/// `points`, oriented along point order. Uses the principal axis of the
/// point scatter, so it handles vertical runs and sampling jitter.
pub fn tail_heading(points: &[Point2], k: usize) -> Result<f64, GeometryError> {
    if k < 2 || points.len() < k {
        return Err(GeometryError::TooFewPoints {
            needed: k.max(2),
            got: points.len(),
        });
    }
    let tail = &points[points.len() - k..];
    let n = tail.len() as f64;
    let mean = tail.iter().fold(Point2::new(0.0, 0.0), |acc, p| acc + *p) * (1.0 / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in tail {
        let d = *p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let alpha = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut dir = Point2::new(alpha.cos(), alpha.sin());
    let chord = tail[tail.len() - 1] - tail[0];
    if dir.dot(chord) < 0.0 {
        dir = -dir;
    }
    Ok(dir_heading(dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEG: f64 = std::f64::consts::PI / 180.0;

    fn assert_close(a: Point2, b: Point2, tol: f64) {
        assert!(a.dist(b) < tol, "{a:?} vs {b:?}");
    }

    #[test]
    fn to_world_identity_pose() {
        let pose = Pose2::new(Point2::new(0.0, 0.0), 0.0);
        assert_close(to_world(pose, Point2::new(3.0, 1.0)), Point2::new(3.0, 1.0), 1e-12);
    }

    #[test]
    fn to_world_pure_translation() {
        let pose = Pose2::new(Point2::new(10.0, 0.0), 0.0);
        assert_close(to_world(pose, Point2::new(0.0, 0.0)), Point2::new(10.0, 0.0), 1e-12);
    }

    #[test]
    fn to_world_quarter_turn_matches_rotation_oracle() {
        // Hand-rolled clockwise rotation matrix for the left-handed convention.
        let rot = |psi: f64, p: Point2| {
            Point2::new(
                p.x * psi.cos() + p.y * psi.sin(),
                -p.x * psi.sin() + p.y * psi.cos(),
            )
        };
        let pose = Pose2::new(Point2::new(0.0, 0.0), 90.0 * DEG);
        let local = Point2::new(1.0, 0.0);
        let got = to_world(pose, local);
        assert_close(got, rot(90.0 * DEG, local), 1e-12);
        // 1 m along the rotated forward axis.
        assert_close(got, heading_dir(90.0 * DEG), 1e-12);
    }

    #[test]
    fn to_local_roundtrip() {
        let pose = Pose2::new(Point2::new(4.2, -7.3), 2.1);
        let p = Point2::new(-3.0, 11.5);
        assert_close(to_local(pose, to_world(pose, p)), p, 1e-12);
    }

    #[test]
    fn relative_pose_collinear() {
        let ego = Pose2::new(Point2::new(0.0, 0.0), 0.0);
        let coop = Pose2::new(Point2::new(20.0, 0.0), 0.0);
        let r = relative_pose(ego, coop);
        assert!((r.x_rel - 20.0).abs() < 1e-12);
        assert!(r.y_rel.abs() < 1e-12);
        assert!(r.psi_rel.abs() < 1e-12);
    }

    #[test]
    fn relative_pose_identity() {
        let ego = Pose2::new(Point2::new(5.0, 5.0), 1.0);
        let r = relative_pose(ego, ego);
        assert_eq!((r.x_rel, r.y_rel, r.psi_rel), (0.0, 0.0, 0.0));
    }

    #[test]
    fn relative_pose_ahead_right() {
        // Coop placed 10 m ahead-right of ego heading; oracle is the
        // inverse rigid transform.
        let ego = Pose2::new(Point2::new(5.0, 5.0), 45.0 * DEG);
        let offset = ego.forward() * 8.0 + ego.right() * 6.0;
        let coop = Pose2::new(ego.position + offset, 45.0 * DEG);
        let r = relative_pose(ego, coop);
        assert!(r.x_rel > 0.0 && r.y_rel > 0.0);
        assert!((r.x_rel - 8.0).abs() < 1e-12);
        assert!((r.y_rel - 6.0).abs() < 1e-12);
    }

    #[test]
    fn line_intersection_axis_aligned() {
        let p = line_intersection(
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(5.0, -5.0),
            Point2::new(0.0, 1.0),
        )
        .unwrap();
        assert_close(p, Point2::new(5.0, 0.0), 1e-12);
    }

    #[test]
    fn line_intersection_parallel() {
        let err = line_intersection(
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 0.0),
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::Parallel { .. }));
    }

    #[test]
    fn line_intersection_sloped_oracle() {
        // Two 45 deg sloped lines from (0,0) and (10,0); oracle solves the
        // 2x2 system [d1 -d2][t u]^T = p2 - p1 by hand.
        let p1 = Point2::new(0.0, 0.0);
        let d1 = Point2::new(1.0, 1.0).normalized();
        let p2 = Point2::new(10.0, 0.0);
        let d2 = Point2::new(-1.0, 1.0).normalized();
        let det = d1.x * d2.y - d1.y * d2.x;
        let rhs = p2 - p1;
        let t = (rhs.x * d2.y - rhs.y * d2.x) / det;
        let expected = p1 + d1 * t;
        let got = line_intersection(p1, d1, p2, d2).unwrap();
        assert_close(got, expected, 1e-12);
        assert_close(got, Point2::new(5.0, 5.0), 1e-12);
    }

    #[test]
    fn line_intersection_lies_on_both_lines() {
        let p1 = Point2::new(1.0, 2.0);
        let d1 = Point2::new(3.0, 1.0).normalized();
        let p2 = Point2::new(-4.0, 7.0);
        let d2 = Point2::new(1.0, -2.0).normalized();
        let q = line_intersection(p1, d1, p2, d2).unwrap();
        assert!((q - p1).cross(d1).abs() < 1e-9);
        assert!((q - p2).cross(d2).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_foot_symmetric() {
        let f = orthogonal_foot(
            Point2::new(5.0, 5.0),
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
        )
        .unwrap();
        assert_close(f, Point2::new(5.0, 0.0), 1e-12);
    }

    #[test]
    fn orthogonal_foot_idempotent_on_line() {
        let p = Point2::new(3.0, 3.0);
        let f = orthogonal_foot(p, Point2::new(0.0, 0.0), Point2::new(6.0, 6.0)).unwrap();
        assert_close(f, p, 1e-12);
    }

    #[test]
    fn orthogonal_foot_dot_product_oracle() {
        let p = Point2::new(3.0, 4.0);
        let a = Point2::new(0.0, 0.0);
        let b = Point2::new(6.0, 8.0);
        let f = orthogonal_foot(p, a, b).unwrap();
        // (p - f) perpendicular to (b - a).
        assert!((p - f).dot(b - a).abs() < 1e-9);
        // Oracle: projection length (p.ab)/|ab| along ab.
        let t = p.dot(b - a) / (b - a).norm();
        assert_close(f, (b - a).normalized() * t, 1e-12);
    }

    #[test]
    fn orthogonal_foot_degenerate() {
        let err = orthogonal_foot(
            Point2::new(1.0, 1.0),
            Point2::new(2.0, 2.0),
            Point2::new(2.0, 2.0),
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateSegment { .. }));
    }

    #[test]
    fn tail_heading_along_x() {
        let pts: Vec<Point2> = (0..10).map(|i| Point2::new(i as f64 * 0.1, 0.0)).collect();
        assert!(tail_heading(&pts, 5).unwrap().abs() < 1e-12);
    }

    #[test]
    fn tail_heading_rightward_is_90_clockwise() {
        // Points running along -y are rightward under the convention.
        let pts: Vec<Point2> = (0..10).map(|i| Point2::new(0.0, -(i as f64) * 0.1)).collect();
        let h = tail_heading(&pts, 5).unwrap();
        assert!((h - 90.0 * DEG).abs() < 1e-12, "h = {h}");
    }

    #[test]
    fn tail_heading_too_few_points() {
        let pts = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)];
        assert!(tail_heading(&pts, 5).is_err());
    }

    #[test]
    fn tail_heading_noisy_straight_statistical() {
        use rand::{Rng, SeedableRng};
        let mut sum_signed = 0.0;
        for seed in 0..100u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let normal = rand_distr::Normal::new(0.0, 0.01).unwrap();
            let pts: Vec<Point2> = (0..20)
                .map(|i| Point2::new(i as f64 * 0.1, rng.sample(normal)))
                .collect();
            let h = tail_heading(&pts, 20).unwrap();
            let signed = if h > std::f64::consts::PI {
                h - std::f64::consts::TAU
            } else {
                h
            };
            // Per-seed: 20 points over 1.9 m keep the fit well below 1 deg.
            assert!(signed.abs() < 1.0 * DEG, "seed {seed}: {signed}");
            sum_signed += signed;
        }
        assert!((sum_signed / 100.0).abs() < 0.2 * DEG);
    }

    #[test]
    fn normalize_and_wrap() {
        assert!((normalize_angle(-0.5) - (TAU - 0.5)).abs() < 1e-12);
        assert!((wrapped_diff(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
    }
}
