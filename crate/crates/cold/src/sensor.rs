//! Generic lane sensor: samples lane boundaries from the ground-truth
//! road, forward from the vehicle, with configurable error models.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geometry::{heading_dir, to_local, Pose2};
use crate::polyline::{Frame, Polyline};
use crate::road::{PiecewiseCurve, Road};
use crate::scenario::ErrorModelSpec;

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("vehicle is off-road: {dist:.2} m from the centerline (lane width {width} m)")]
    OffRoad { dist: f64, width: f64 },
    #[error("detection range {range} m leaves fewer than two boundary points")]
    RangeTooShort { range: f64 },
}

/// Sensor error model. Noise is lateral-only and deterministic per
/// (seed, frame, boundary side, point index).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorModel {
    None,
    Offset(f64),
    Noise { sigma: f64, seed: u64 },
}

impl ErrorModel {
    pub fn from_spec(spec: ErrorModelSpec, seed: u64) -> Self {
        match spec {
            ErrorModelSpec::None => ErrorModel::None,
            ErrorModelSpec::Offset(v) => ErrorModel::Offset(v),
            ErrorModelSpec::Noise(sigma) => ErrorModel::Noise { sigma, seed },
        }
    }
}

/// A locally perceived lane: both boundaries in the vehicle frame plus
/// the perceiving vehicle's world pose.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedLane {
    pub left: Polyline,
    pub right: Polyline,
    pub perceiver: Pose2,
    pub range: f64,
}

impl DetectedLane {
    /// Boundary transformed into the world frame.
    pub fn boundary_world(&self, side: Side) -> Polyline {
        let b = match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        };
        let pts = b
            .points()
            .iter()
            .map(|p| crate::geometry::to_world(self.perceiver, *p))
            .collect();
        Polyline::new(pts, Frame::World).expect("world boundary is valid")
    }

    /// Centerline in the world frame, from index-paired boundary points.
    pub fn centerline_world(&self) -> Polyline {
        let l = self.boundary_world(Side::Left);
        let r = self.boundary_world(Side::Right);
        let n = l.len().min(r.len());
        let pts = (0..n)
            .map(|i| (l.points()[i] + r.points()[i]) * 0.5)
            .collect();
        Polyline::new(pts, Frame::World).expect("centerline is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Counter-based lateral noise: every point draws from a generator keyed
/// by (seed, frame, side, index), so frames can be evaluated in parallel
/// with reproducible output.
fn lateral_noise(seed: u64, frame: u32, side: Side, index: u32, sigma: f64) -> f64 {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&frame.to_le_bytes());
    key[12] = match side {
        Side::Left => 0,
        Side::Right => 1,
    };
    key[13..17].copy_from_slice(&index.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    Normal::new(0.0, sigma).unwrap().sample(&mut rng)
}

fn sense_boundary(
    curve: &PiecewiseCurve,
    pose: Pose2,
    vehicle_id: u32,
    start_s: f64,
    count: usize,
    spacing: f64,
    err: ErrorModel,
    frame_id: u32,
    side: Side,
) -> Polyline {
    let mut pts = Vec::with_capacity(count);
    for k in 0..count {
        let s = start_s + k as f64 * spacing;
        let mut p = curve.point_at(s);
        let left_dir = -heading_dir(curve.heading_at(s) + std::f64::consts::FRAC_PI_2);
        match err {
            ErrorModel::None => {}
            ErrorModel::Offset(d) => p = p + left_dir * d,
            ErrorModel::Noise { sigma, seed } => {
                p = p + left_dir * lateral_noise(seed, frame_id, side, k as u32, sigma);
            }
        }
        pts.push(to_local(pose, p));
    }
    Polyline::new(pts, Frame::Vehicle(vehicle_id)).expect("sensed boundary is valid")
}

/// Sample both lane boundaries from the GT road, starting at the closest
/// boundary point to the vehicle and extending forward `range` meters.
pub fn sense(
    vehicle_id: u32,
    pose: Pose2,
    road: &Road,
    range: f64,
    spacing: f64,
    err: ErrorModel,
    frame_id: u32,
) -> Result<DetectedLane, SensorError> {
    let (_, center_dist) = road.center.project(pose.position);
    if center_dist > road.width {
        return Err(SensorError::OffRoad {
            dist: center_dist,
            width: road.width,
        });
    }
    let (s_left, _) = road.left.project(pose.position);
    let (s_right, _) = road.right.project(pose.position);
    let avail = (road.left.length() - s_left).min(road.right.length() - s_right);
    let n = (range.min(avail) / spacing).floor() as usize;
    if n < 1 {
        return Err(SensorError::RangeTooShort { range });
    }
    let count = n + 1;
    let left = sense_boundary(
        &road.left, pose, vehicle_id, s_left, count, spacing, err, frame_id, Side::Left,
    );
    let right = sense_boundary(
        &road.right, pose, vehicle_id, s_right, count, spacing, err, frame_id, Side::Right,
    );
    Ok(DetectedLane {
        left,
        right,
        perceiver: pose,
        range,
    })
}
