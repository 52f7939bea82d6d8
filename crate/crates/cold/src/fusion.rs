//! Collective lane detection fusion.
//!
//! Two modes: convoy fusion merges overlapping detections by weighted
//! mean; spline fusion bridges a detection gap with a natural cubic
//! spline, optionally forced through a geometrically estimated curve
//! apex.

use thiserror::Error;

use crate::geometry::{
    heading_dir, line_intersection, orthogonal_foot, tail_heading, wrapped_diff, GeometryError,
    Point2, RelativePose,
};
use crate::polyline::{Frame, Lane, Polyline};
use crate::scenario::ScenarioConfig;
use crate::sensor::{DetectedLane, Side};
use crate::spline::{fit_spline, SplineError};

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("overlap region is empty")]
    EmptyOverlap,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Tunables of the fusion pipeline. Defaults carry the published values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    /// (ego, coop) weights of the convoy weighted-mean fusion.
    pub weights: (f64, f64),
    /// Maximum gap d_s that spline fusion will bridge.
    pub max_interp_distance: f64,
    /// Positioning deviation threshold t_pos.
    pub t_pos: f64,
    /// Orientation deviation threshold t_psi, degrees.
    pub t_psi_deg: f64,
    /// Relative tail orientation above which a curve is assumed, degrees
    /// (strictly greater-than).
    pub curve_threshold_deg: f64,
    /// Enable apex estimation for curved gaps.
    pub apex_enabled: bool,
    /// Fraction of the P_i -> P_j vector at which the apex is placed.
    pub apex_factor: f64,
    /// Lateral disagreement at the overlap start above which convoy
    /// weights are linearly ramped instead of held constant.
    pub blend_threshold: f64,
    /// Resampling step for overlap correspondence and gap sampling.
    pub resample_spacing: f64,
    /// Points used for tail direction estimates.
    pub tail_points: usize,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            weights: (0.25, 0.75),
            max_interp_distance: 20.0,
            t_pos: 0.40,
            t_psi_deg: 10.0,
            curve_threshold_deg: 10.0,
            apex_enabled: true,
            apex_factor: 0.4,
            blend_threshold: 0.20,
            resample_spacing: 0.10,
            tail_points: 5,
        }
    }
}

impl FusionParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        FusionParams {
            weights: cfg.fusion_weights,
            max_interp_distance: cfg.max_interp_distance,
            resample_spacing: cfg.detection_spacing,
            ..FusionParams::default()
        }
    }
}

/// Provenance of a point in the collective lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Ego,
    Fused,
    Interpolated,
    Coop,
}

/// The collectively perceived lane, in the world frame, with per-point
/// provenance for each boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedLane {
    pub lane: Lane,
    pub provenance_left: Vec<Provenance>,
    pub provenance_right: Vec<Provenance>,
    pub perception_range: f64,
}

impl FusedLane {
    /// Wrap a local detection as a world-frame, ego-only collective lane.
    pub fn local_only(det: &DetectedLane) -> FusedLane {
        let left = det.boundary_world(Side::Left);
        let right = det.boundary_world(Side::Right);
        let range = (left.arc_length() + right.arc_length()) / 2.0;
        let (nl, nr) = (left.len(), right.len());
        FusedLane {
            lane: Lane::new(left, right, 4.0).expect("local lane is valid"),
            provenance_left: vec![Provenance::Ego; nl],
            provenance_right: vec![Provenance::Ego; nr],
            perception_range: range,
        }
    }
}

/// Overlapping along-track interval of two detections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapRegion {
    pub ego_start_index: usize,
    pub ego_end_index: usize,
    pub coop_start_index: usize,
    pub coop_end_index: usize,
    pub length: f64,
}

/// Outcome of the spline-fusion plausibility check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionCase {
    Ahead,
    AheadRight,
    AheadLeft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Behind,
    LateralOffset,
    Heading,
    GapTooLarge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Fusible(FusionCase),
    Rejected(RejectReason),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusibilityDecision {
    pub verdict: Verdict,
    pub d_s: f64,
}

/// Gap between the end of the ego detection and the begin of the coop
/// detection, measured on the centerlines in the world frame.
pub fn detection_gap(ego: &DetectedLane, coop: &DetectedLane) -> f64 {
    let e = ego.centerline_world();
    let c = coop.centerline_world();
    e.last().dist(c.first())
}

/// Reorder a world-frame boundary so arc length increases along the
/// perceiver's driving direction.
fn orient_forward(boundary: Polyline, heading: f64) -> Polyline {
    let chord = boundary.last() - boundary.first();
    if chord.dot(heading_dir(heading)) < 0.0 {
        boundary.reversed()
    } else {
        boundary
    }
}

/// Detect whether the coop detection begins before the ego detection
/// ends. Returns `None` when a positive gap exists.
pub fn detect_overlap(ego: &DetectedLane, coop: &DetectedLane) -> Option<OverlapRegion> {
    let spacing = 0.10;
    let ego_c = orient_forward(ego.centerline_world(), ego.perceiver.heading).resample(spacing);
    let coop_c = orient_forward(coop.centerline_world(), coop.perceiver.heading).resample(spacing);
    let ego_len = ego_c.arc_length();
    let coop_start = coop_c.first();
    let (s_start, _) = ego_c.project(coop_start);
    // Projection clamps at the ego end; a positive forward residual there
    // means a gap, not an overlap.
    if s_start >= ego_len - 1e-9 {
        return None;
    }
    let forward = (coop_start - ego_c.last()).dot(heading_dir(ego_c.heading_at_arc(ego_len)));
    if forward > 0.0 {
        return None;
    }
    let length = ego_len - s_start;
    Some(OverlapRegion {
        ego_start_index: ((s_start / spacing).ceil() - 1e-9) as usize,
        ego_end_index: ego_c.len() - 1,
        coop_start_index: 0,
        coop_end_index: ((length / spacing).floor() as usize).min(coop_c.len() - 1),
        length,
    })
}

/// Weighted mean of two corresponding points (the convoy fusion rule).
pub fn weighted_mean(ego: Point2, coop: Point2, weights: (f64, f64)) -> Point2 {
    ego * weights.0 + coop * weights.1
}

fn fuse_boundary(
    ego_b: &Polyline,
    coop_b: &Polyline,
    params: &FusionParams,
) -> Result<(Vec<Point2>, Vec<Provenance>), FusionError> {
    let spacing = params.resample_spacing;
    let ego_r = ego_b.resample(spacing);
    let coop_r = coop_b.resample(spacing);
    let ego_len = ego_r.arc_length();
    let (s_start, start_offset) = ego_r.project(coop_r.first());
    if ego_len - s_start <= spacing {
        return Err(FusionError::EmptyOverlap);
    }
    let ramp = start_offset > params.blend_threshold;
    let overlap_len = ego_len - s_start;

    let mut pts = Vec::new();
    let mut prov = Vec::new();
    let cum = ego_r.cumulative_lengths();
    let coop_cum = coop_r.cumulative_lengths();
    let coop_pts = coop_r.points();
    // Arc-length lookup via binary search over the cumulative table; the
    // per-point linear scan is too slow for long overlaps.
    let coop_at = |u: f64| -> Point2 {
        if u <= 0.0 {
            return coop_pts[0];
        }
        let i = coop_cum.partition_point(|&c| c < u);
        if i >= coop_pts.len() {
            return *coop_pts.last().unwrap();
        }
        let seg = coop_cum[i] - coop_cum[i - 1];
        if seg <= 0.0 {
            return coop_pts[i];
        }
        let t = (u - coop_cum[i - 1]) / seg;
        coop_pts[i - 1] + (coop_pts[i] - coop_pts[i - 1]) * t
    };
    for (i, p) in ego_r.points().iter().enumerate() {
        let s = cum[i];
        if s < s_start {
            pts.push(*p);
            prov.push(Provenance::Ego);
        } else {
            let u = s - s_start;
            let q = coop_at(u);
            let lambda = if ramp { (u / overlap_len).clamp(0.0, 1.0) } else { 1.0 };
            let w_ego = 1.0 + (params.weights.0 - 1.0) * lambda;
            let w_coop = params.weights.1 * lambda;
            pts.push(weighted_mean(*p, q, (w_ego, w_coop)));
            prov.push(Provenance::Fused);
        }
    }
    // Remaining coop information beyond the ego detection.
    for (i, p) in coop_r.points().iter().enumerate() {
        if coop_cum[i] > overlap_len + 1e-9 {
            pts.push(*p);
            prov.push(Provenance::Coop);
        }
    }
    Ok((pts, prov))
}

/// Convoy fusion: ego-only prefix, weighted-mean overlap, coop-only
/// suffix. Correspondence is equal along-track arc length after
/// resampling both boundaries at the configured spacing.
pub fn convoy_fuse(
    ego: &DetectedLane,
    coop: &DetectedLane,
    ov: &OverlapRegion,
    params: &FusionParams,
) -> Result<FusedLane, FusionError> {
    if ov.length <= 0.0 {
        return Err(FusionError::EmptyOverlap);
    }
    let mut boundaries = Vec::with_capacity(2);
    let mut provs = Vec::with_capacity(2);
    for side in [Side::Left, Side::Right] {
        let ego_b = orient_forward(ego.boundary_world(side), ego.perceiver.heading);
        let coop_b = orient_forward(coop.boundary_world(side), coop.perceiver.heading);
        let (pts, prov) = fuse_boundary(&ego_b, &coop_b, params)?;
        boundaries.push(Polyline::new(pts, Frame::World).expect("fused boundary is valid"));
        provs.push(prov);
    }
    let right = boundaries.pop().unwrap();
    let left = boundaries.pop().unwrap();
    let prov_right = provs.pop().unwrap();
    let prov_left = provs.pop().unwrap();
    let range = (left.arc_length() + right.arc_length()) / 2.0;
    Ok(FusedLane {
        lane: Lane::new(left, right, 4.0).expect("fused lane is valid"),
        provenance_left: prov_left,
        provenance_right: prov_right,
        perception_range: range,
    })
}

/// Plausibility check for spline fusion: relative pose must match one of
/// the three condition sets, and the gap must be within the
/// interpolation cap.
pub fn check_fusibility(
    rel: RelativePose,
    ego: &DetectedLane,
    coop: &DetectedLane,
    params: &FusionParams,
) -> FusibilityDecision {
    let d_s = detection_gap(ego, coop);
    let reject = |reason| FusibilityDecision {
        verdict: Verdict::Rejected(reason),
        d_s,
    };
    if rel.x_rel <= 0.0 {
        return reject(RejectReason::Behind);
    }
    let t_psi = params.t_psi_deg.to_radians();
    let near = |target_deg: f64| wrapped_diff(rel.psi_rel, target_deg.to_radians()) <= t_psi;
    let case = if near(0.0) && rel.y_rel.abs() <= params.t_pos {
        Some(FusionCase::Ahead)
    } else if near(90.0) && rel.y_rel > 0.0 {
        Some(FusionCase::AheadRight)
    } else if near(270.0) && rel.y_rel < 0.0 {
        Some(FusionCase::AheadLeft)
    } else if near(0.0) || near(90.0) || near(270.0) {
        // Heading fits one of the cases; the lateral predicate failed.
        return reject(RejectReason::LateralOffset);
    } else {
        return reject(RejectReason::Heading);
    };
    if d_s > params.max_interp_distance {
        return reject(RejectReason::GapTooLarge);
    }
    FusibilityDecision {
        verdict: Verdict::Fusible(case.unwrap()),
        d_s,
    }
}

fn tails_indicate_curve(
    ego_b: &Polyline,
    coop_b: &Polyline,
    params: &FusionParams,
) -> Result<bool, GeometryError> {
    let k = params.tail_points;
    let h_ego = tail_heading(ego_b.points(), k)?;
    let head: Vec<Point2> = coop_b.points()[..k.min(coop_b.len())].to_vec();
    let h_coop = tail_heading(&head, k)?;
    Ok(wrapped_diff(h_ego, h_coop) > params.curve_threshold_deg.to_radians())
}

/// True iff the relative orientation of the end of the ego detection and
/// the begin of the coop detection exceeds the curve threshold
/// (strictly).
pub fn is_curve(
    ego: &DetectedLane,
    coop: &DetectedLane,
    params: &FusionParams,
) -> Result<bool, GeometryError> {
    let ego_c = orient_forward(ego.centerline_world(), ego.perceiver.heading);
    let coop_c = orient_forward(coop.centerline_world(), coop.perceiver.heading);
    tails_indicate_curve(&ego_c, &coop_c, params)
}

/// Apex point from the triangle construction: extend the ego tail forward
/// and the coop head backward to their intersection P_i, project it onto
/// the chord between the boundary endpoints to get P_j, and place the
/// apex at `factor` of the P_i -> P_j vector.
pub fn estimate_apex(
    ego_boundary: &Polyline,
    coop_boundary: &Polyline,
    params: &FusionParams,
) -> Result<Point2, GeometryError> {
    let k = params.tail_points;
    let h_ego = tail_heading(ego_boundary.points(), k)?;
    let head: Vec<Point2> = coop_boundary.points()[..k.min(coop_boundary.len())].to_vec();
    let h_coop = tail_heading(&head, k)?;
    let p_end = ego_boundary.last();
    let p_begin = coop_boundary.first();
    let p_i = line_intersection(p_end, heading_dir(h_ego), p_begin, heading_dir(h_coop))?;
    let p_j = orthogonal_foot(p_i, p_end, p_begin)?;
    Ok(p_i + (p_j - p_i) * params.apex_factor)
}

/// Known points for the gap spline: third-to-last and last ego points,
/// the optional apex, then first and third coop points.
pub fn select_known_points(
    ego_boundary: &Polyline,
    coop_boundary: &Polyline,
    apex: Option<Point2>,
) -> Result<Vec<Point2>, GeometryError> {
    if ego_boundary.len() < 3 || coop_boundary.len() < 3 {
        return Err(GeometryError::TooFewPoints {
            needed: 3,
            got: ego_boundary.len().min(coop_boundary.len()),
        });
    }
    let e = ego_boundary.points();
    let c = coop_boundary.points();
    let mut out = vec![e[e.len() - 3], e[e.len() - 1]];
    if let Some(a) = apex {
        out.push(a);
    }
    out.push(c[0]);
    out.push(c[2]);
    Ok(out)
}

fn spline_fuse_boundary(
    ego_b: &Polyline,
    coop_b: &Polyline,
    curve: bool,
    params: &FusionParams,
) -> Result<(Vec<Point2>, Vec<Provenance>), FusionError> {
    let apex = if curve && params.apex_enabled {
        match estimate_apex(ego_b, coop_b, params) {
            // Near-collinear tails (one boundary of a curving lane can
            // still run straight) put the "intersection" on the shared
            // line, degenerating the apex onto an adjacent knot. Such an
            // apex adds no information; drop it.
            Ok(a)
                if a.dist(ego_b.last()) < params.resample_spacing
                    || a.dist(coop_b.first()) < params.resample_spacing =>
            {
                None
            }
            Ok(a) => Some(a),
            // Parallel tails despite the curve verdict: fall back to
            // straight four-point fitting.
            Err(GeometryError::Parallel { .. }) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let known = select_known_points(ego_b, coop_b, apex)?;
    let spline = fit_spline(&known)?;
    let knots = spline.knots();
    // Sample only the gap: between the last ego knot and the first coop
    // knot (the knot after the optional apex).
    let t_from = knots[1];
    let t_to = knots[knots.len() - 2];
    let gap = spline.sample_range(t_from, t_to, params.resample_spacing);

    let mut pts: Vec<Point2> = ego_b.points().to_vec();
    let mut prov = vec![Provenance::Ego; pts.len()];
    for p in &gap[1..gap.len().saturating_sub(1)] {
        if pts.last().map_or(true, |q| q.dist(*p) > 1e-9) {
            pts.push(*p);
            prov.push(Provenance::Interpolated);
        }
    }
    for p in coop_b.points() {
        if pts.last().map_or(true, |q| q.dist(*p) > 1e-9) {
            pts.push(*p);
            prov.push(Provenance::Coop);
        }
    }
    Ok((pts, prov))
}

/// Spline fusion: bridge the gap between the two detections with a
/// natural cubic spline per boundary, through the estimated apex when
/// the gap curves.
pub fn spline_fuse(
    ego: &DetectedLane,
    coop: &DetectedLane,
    params: &FusionParams,
) -> Result<FusedLane, FusionError> {
    let curve = is_curve(ego, coop, params)?;
    let mut boundaries = Vec::with_capacity(2);
    let mut provs = Vec::with_capacity(2);
    for side in [Side::Left, Side::Right] {
        let ego_b = orient_forward(ego.boundary_world(side), ego.perceiver.heading);
        let coop_b = orient_forward(coop.boundary_world(side), coop.perceiver.heading);
        let (pts, prov) = spline_fuse_boundary(&ego_b, &coop_b, curve, params)?;
        boundaries.push(Polyline::new(pts, Frame::World).expect("fused boundary is valid"));
        provs.push(prov);
    }
    let right = boundaries.pop().unwrap();
    let left = boundaries.pop().unwrap();
    let prov_right = provs.pop().unwrap();
    let prov_left = provs.pop().unwrap();
    let range = (left.arc_length() + right.arc_length()) / 2.0;
    Ok(FusedLane {
        lane: Lane::new(left, right, 4.0).expect("fused lane is valid"),
        provenance_left: prov_left,
        provenance_right: prov_right,
        perception_range: range,
    })
}

/// Check the provenance ordering invariant: contiguous runs in the order
/// Ego, Fused?, Interpolated?, Coop.
pub fn provenance_ordered(prov: &[Provenance]) -> bool {
    let rank = |p: &Provenance| match p {
        Provenance::Ego => 0,
        Provenance::Fused => 1,
        Provenance::Interpolated => 2,
        Provenance::Coop => 3,
    };
    prov.windows(2).all(|w| rank(&w[0]) <= rank(&w[1]))
}
