//! Error metrics against the ground-truth road, distribution statistics,
//! and perception-range measurement.

use thiserror::Error;

use crate::fusion::FusedLane;
use crate::geometry::{Point2, Pose2};
use crate::polyline::Polyline;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("lane and ground truth live in different frames")]
    FrameMismatch,
    #[error("cannot aggregate zero reports")]
    Empty,
}

/// Per-frame evaluation record. The error metric is the mean of absolute
/// closest-point distances per boundary; `p95` is the nearest-rank 95th
/// percentile over both boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub frame_id: u32,
    pub mse_left: f64,
    pub mse_right: f64,
    pub max_left: f64,
    pub max_right: f64,
    pub p95: f64,
    pub perception_range: f64,
    pub runtime_us: f64,
}

/// Spatial grid over the GT samples so closest-point queries do not scan
/// every sample; results are identical to the brute-force scan,
/// including the lowest-index tie break.
pub struct GtIndex<'a> {
    gt: &'a Polyline,
    cell: f64,
    min: Point2,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl<'a> GtIndex<'a> {
    pub fn new(gt: &'a Polyline) -> Self {
        let pts = gt.points();
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in pts {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        let cell = 1.0;
        let nx = ((max_x - min_x) / cell).floor() as usize + 1;
        let ny = ((max_y - min_y) / cell).floor() as usize + 1;
        let mut cells = vec![Vec::new(); nx * ny];
        for (i, p) in pts.iter().enumerate() {
            let cx = ((p.x - min_x) / cell) as usize;
            let cy = ((p.y - min_y) / cell) as usize;
            cells[cy * nx + cx].push(i as u32);
        }
        GtIndex {
            gt,
            cell,
            min: Point2::new(min_x, min_y),
            nx,
            ny,
            cells,
        }
    }

    /// Exact nearest GT sample (lowest index on ties), via expanding
    /// ring search. A candidate at ring r is only final once all cells
    /// within distance `best` have been visited.
    pub fn closest(&self, p: Point2) -> (usize, f64) {
        let pts = self.gt.points();
        let cx = (((p.x - self.min.x) / self.cell).floor() as i64).clamp(0, self.nx as i64 - 1);
        let cy = (((p.y - self.min.y) / self.cell).floor() as i64).clamp(0, self.ny as i64 - 1);
        let mut best = (usize::MAX, f64::INFINITY);
        let max_ring = self.nx.max(self.ny) as i64;
        for ring in 0..=max_ring {
            // Once every cell that could beat the current best has been
            // scanned, stop. Cells at ring r start at distance
            // (r-1)*cell from p in the worst case.
            if best.0 != usize::MAX {
                let floor_dist = (ring as f64 - 1.0) * self.cell;
                if floor_dist > 0.0 && floor_dist * floor_dist > best.1 {
                    break;
                }
            }
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs().max(dy.abs()) != ring {
                        continue;
                    }
                    let (x, y) = (cx + dx, cy + dy);
                    if x < 0 || y < 0 || x >= self.nx as i64 || y >= self.ny as i64 {
                        continue;
                    }
                    for &i in &self.cells[y as usize * self.nx + x as usize] {
                        // Same arithmetic as the brute-force scan so both
                        // round identically.
                        let q = pts[i as usize];
                        let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
                        if d2 < best.1 || (d2 == best.1 && (i as usize) < best.0) {
                            best = (i as usize, d2);
                        }
                    }
                }
            }
        }
        debug_assert!(best.0 != usize::MAX);
        (best.0, best.1.sqrt())
    }
}

/// Nearest-rank percentile of an unsorted sample.
fn nearest_rank(mut values: Vec<f64>, pct: f64) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    let rank = ((pct / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    values[rank - 1]
}

/// Closest-point error statistics of a boundary against a densely
/// sampled GT boundary: (mean, max, p95, per-point distances).
pub fn lane_error(l: &Polyline, gt: &Polyline) -> Result<(f64, f64, f64, Vec<f64>), EvalError> {
    if l.frame() != gt.frame() {
        return Err(EvalError::FrameMismatch);
    }
    let index = GtIndex::new(gt);
    let per_point: Vec<f64> = l.points().iter().map(|p| index.closest(*p).1).collect();
    let mean = per_point.iter().sum::<f64>() / per_point.len() as f64;
    let max = per_point.iter().cloned().fold(0.0, f64::max);
    let p95 = nearest_rank(per_point.clone(), 95.0);
    Ok((mean, max, p95, per_point))
}

/// Along-track extent of lane knowledge: arc length of the collective
/// centerline from the ego position to its end.
pub fn perception_range(l_coll: &FusedLane, ego_pose: Pose2) -> f64 {
    let center = l_coll.lane.centerline();
    let (s_ego, _) = center.project(ego_pose.position);
    center.arc_length() - s_ego
}

/// Per-field mean, standard deviation (population), and max over frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub frames: usize,
    pub mean: EvalReport,
    pub std: EvalReport,
    pub max: EvalReport,
}

pub fn aggregate(reports: &[EvalReport]) -> Result<Summary, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = reports.len() as f64;
    let fields: [fn(&EvalReport) -> f64; 7] = [
        |r| r.mse_left,
        |r| r.mse_right,
        |r| r.max_left,
        |r| r.max_right,
        |r| r.p95,
        |r| r.perception_range,
        |r| r.runtime_us,
    ];
    let mut means = [0.0; 7];
    let mut stds = [0.0; 7];
    let mut maxs = [0.0f64; 7];
    for (k, f) in fields.iter().enumerate() {
        let vals: Vec<f64> = reports.iter().map(f).collect();
        means[k] = vals.iter().sum::<f64>() / n;
        stds[k] = (vals.iter().map(|v| (v - means[k]).powi(2)).sum::<f64>() / n).sqrt();
        maxs[k] = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    let make = |v: [f64; 7]| EvalReport {
        frame_id: 0,
        mse_left: v[0],
        mse_right: v[1],
        max_left: v[2],
        max_right: v[3],
        p95: v[4],
        perception_range: v[5],
        runtime_us: v[6],
    };
    Ok(Summary {
        frames: reports.len(),
        mean: make(means),
        std: make(stds),
        max: make(maxs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyline::{closest_point, Frame};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gt_line(n: usize, spacing: f64) -> Polyline {
        Polyline::new(
            (0..n)
                .map(|i| Point2::new(i as f64 * spacing, 0.0))
                .collect(),
            Frame::World,
        )
        .unwrap()
    }

    #[test]
    fn subset_has_zero_error() {
        let gt = gt_line(5001, 0.02);
        let sub = Polyline::new(
            (0..100).map(|i| Point2::new(i as f64 * 1.0, 0.0)).collect(),
            Frame::World,
        )
        .unwrap();
        let (mean, max, p95, _) = lane_error(&sub, &gt).unwrap();
        assert_eq!((mean, max, p95), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_shift_on_straight() {
        let gt = gt_line(5001, 0.02);
        let shifted = Polyline::new(
            (0..=300)
                .map(|i| Point2::new(i as f64 * 0.1 + 10.0, 0.5))
                .collect(),
            Frame::World,
        )
        .unwrap();
        let (mean, max, _, _) = lane_error(&shifted, &gt).unwrap();
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        assert!((max - 0.5).abs() < 0.01, "max {max}");
    }

    #[test]
    fn outlier_percentile() {
        let gt = gt_line(5001, 0.02);
        let mut pts: Vec<Point2> = (0..99).map(|i| Point2::new(i as f64 * 0.5, 0.0)).collect();
        pts.push(Point2::new(50.0, 1.0));
        let l = Polyline::new(pts, Frame::World).unwrap();
        let (_, max, p95, per) = lane_error(&l, &gt).unwrap();
        assert_eq!(per.len(), 100);
        assert_eq!(max, 1.0);
        assert_eq!(p95, 0.0); // nearest rank 95 of 100 points, 99 zeros
    }

    #[test]
    fn frame_mismatch() {
        let gt = gt_line(100, 0.02);
        let l = Polyline::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)],
            Frame::Vehicle(0),
        )
        .unwrap();
        assert_eq!(lane_error(&l, &gt), Err(EvalError::FrameMismatch));
    }

    #[test]
    fn grid_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let gt = Polyline::new(
            (0..4000)
                .map(|i| {
                    let s = i as f64 * 0.02;
                    Point2::new(s, (s * 0.3).sin() * 5.0)
                })
                .collect(),
            Frame::World,
        )
        .unwrap();
        let index = GtIndex::new(&gt);
        for _ in 0..500 {
            let p = Point2::new(rng.gen_range(-5.0..85.0), rng.gen_range(-10.0..10.0));
            let (bp, bd) = closest_point(&gt, p);
            let (gi, gd) = index.closest(p);
            assert_eq!(gd, bd, "distance mismatch at {p:?}");
            assert_eq!(gt.points()[gi], bp, "index mismatch at {p:?}");
        }
    }

    #[test]
    fn mirror_symmetry_on_straight() {
        let gt = gt_line(5001, 0.02);
        let up = Polyline::new(
            (0..=200)
                .map(|i| Point2::new(10.0 + i as f64 * 0.1, 0.3))
                .collect(),
            Frame::World,
        )
        .unwrap();
        let down = Polyline::new(
            up.points().iter().map(|p| Point2::new(p.x, -p.y)).collect(),
            Frame::World,
        )
        .unwrap();
        let a = lane_error(&up, &gt).unwrap();
        let b = lane_error(&down, &gt).unwrap();
        assert_eq!((a.0, a.1, a.2), (b.0, b.1, b.2));
    }

    #[test]
    fn max_monotonicity() {
        let gt = gt_line(5001, 0.02);
        let base: Vec<Point2> = (0..=100).map(|i| Point2::new(i as f64 * 0.5, 0.1)).collect();
        let l1 = Polyline::new(base.clone(), Frame::World).unwrap();
        let (mean1, max1, _, _) = lane_error(&l1, &gt).unwrap();
        let mut worse = base;
        worse.push(Point2::new(51.0, 2.0));
        let l2 = Polyline::new(worse, Frame::World).unwrap();
        let (mean2, max2, _, _) = lane_error(&l2, &gt).unwrap();
        assert!(max2 > max1);
        assert!(mean2 >= mean1);
    }

    fn report(frame: u32, v: f64) -> EvalReport {
        EvalReport {
            frame_id: frame,
            mse_left: v,
            mse_right: 2.0 * v,
            max_left: 3.0 * v,
            max_right: 4.0 * v,
            p95: v,
            perception_range: 30.0 + v,
            runtime_us: 100.0 * v,
        }
    }

    #[test]
    fn aggregate_oracles() {
        let single = aggregate(&[report(0, 0.5)]).unwrap();
        assert_eq!(single.mean, report(0, 0.5));
        assert_eq!(single.std.mse_left, 0.0);
        assert_eq!(single.max, report(0, 0.5));

        let constant = aggregate(&[report(0, 0.3), report(1, 0.3), report(2, 0.3)]).unwrap();
        assert!(constant.std.max_right.abs() < 1e-12);

        // Hand-computed over [1, 2, 6]: mean 3, population std sqrt(14/3),
        // max 6 (scaled per field).
        let s = aggregate(&[report(0, 1.0), report(1, 2.0), report(2, 6.0)]).unwrap();
        assert!((s.mean.mse_left - 3.0).abs() < 1e-12);
        assert!((s.std.mse_left - (14.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((s.max.mse_left - 6.0).abs() < 1e-12);
        assert!((s.mean.mse_right - 6.0).abs() < 1e-12);
        assert!((s.max.max_right - 24.0).abs() < 1e-12);

        assert_eq!(aggregate(&[]), Err(EvalError::Empty));
    }
}
