//! Scenario runner: steps two vehicles along the road, runs
//! sense -> exchange -> fuse -> evaluate per frame and writes per-frame
//! CSVs plus a summary table.

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codec::{decode, encode, lane_to_message, message_to_lane, CodecError};
use crate::eval::{aggregate, lane_error, perception_range, EvalError, EvalReport, Summary};
use crate::fusion::{
    check_fusibility, convoy_fuse, detect_overlap, spline_fuse, FusedLane, FusionError,
    FusionParams, Verdict,
};
use crate::geometry::{relative_pose, Pose2};
use crate::polyline::Lane;
use crate::road::{build_road, Road, RoadError};
use crate::scenario::ScenarioConfig;
use crate::sensor::{sense, DetectedLane, ErrorModel, SensorError};

pub const DT: f64 = 0.1;
pub const SPEED_JITTER: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("vehicle passed the end of the road at s = {s:.2} m (length {length:.2} m)")]
    EndOfRoad { s: f64, length: f64 },
    #[error(transparent)]
    Road(#[from] RoadError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Kinematic state of both vehicles at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameState {
    pub frame_id: u32,
    pub ego_s: f64,
    pub coop_s: f64,
    pub ego_pose: Pose2,
    pub coop_pose: Pose2,
    pub d_actual: f64,
}

impl FrameState {
    pub fn initial(cfg: &ScenarioConfig, road: &Road) -> FrameState {
        let ego_s = cfg.start;
        let coop_s = cfg.start + cfg.gap;
        FrameState {
            frame_id: 0,
            ego_s,
            coop_s,
            ego_pose: road.center.pose_at(ego_s),
            coop_pose: road.center.pose_at(coop_s),
            d_actual: coop_s - ego_s,
        }
    }
}

/// Deterministic per-(seed, frame, vehicle) speed factor in 1 ± 5%.
fn speed_factor(seed: u64, frame: u32, vehicle: u8) -> f64 {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&frame.to_le_bytes());
    key[12] = 0xAA; // domain separator vs. sensor noise keys
    key[13] = vehicle;
    let mut rng = ChaCha8Rng::from_seed(key);
    1.0 + SPEED_JITTER * rng.gen_range(-1.0..=1.0)
}

/// Advance both vehicles along the centerline by one tick.
pub fn step(state: &FrameState, cfg: &ScenarioConfig, road: &Road) -> Result<FrameState, SimError> {
    let length = road.center.length();
    let ego_s = state.ego_s + cfg.speed * DT * speed_factor(cfg.seed, state.frame_id, 0);
    let coop_s = state.coop_s + cfg.speed * DT * speed_factor(cfg.seed, state.frame_id, 1);
    for s in [ego_s, coop_s] {
        if s > length {
            return Err(SimError::EndOfRoad { s, length });
        }
    }
    Ok(FrameState {
        frame_id: state.frame_id + 1,
        ego_s,
        coop_s,
        ego_pose: road.center.pose_at(ego_s),
        coop_pose: road.center.pose_at(coop_s),
        d_actual: coop_s - ego_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelect {
    Auto,
    Convoy,
    Spline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameMode {
    Convoy,
    Spline,
    Local,
}

impl FrameMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameMode::Convoy => "convoy",
            FrameMode::Spline => "spline",
            FrameMode::Local => "local",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub codec: bool,
    pub mode: ModeSelect,
    pub apex: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            codec: true,
            mode: ModeSelect::Auto,
            apex: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub reports: Vec<EvalReport>,
    pub modes: Vec<FrameMode>,
    pub summary: Summary,
    pub codec_enabled: bool,
    pub scenario: ScenarioConfig,
}

fn codec_roundtrip(det: &DetectedLane, vehicle_id: u32, frame_id: u32) -> Result<DetectedLane, SimError> {
    let msg = lane_to_message(det, vehicle_id, frame_id)?;
    let rebuilt = message_to_lane(&decode(&encode(&msg)?)?, 0.10);
    Ok(DetectedLane {
        left: rebuilt.left,
        right: rebuilt.right,
        perceiver: det.perceiver,
        range: det.range,
    })
}

fn nearest_rank(mut values: Vec<f64>, pct: f64) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    let rank = ((pct / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    values[rank - 1]
}

/// Run one frame of the pipeline: sense both vehicles, optionally pass
/// the coop detection through the wire codec, fuse, evaluate against GT.
pub fn run_frame(
    state: &FrameState,
    road: &Road,
    gt: &Lane,
    cfg: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<(EvalReport, FrameMode), SimError> {
    let err = ErrorModel::from_spec(cfg.error_model, cfg.seed);
    let ego_det = sense(
        0,
        state.ego_pose,
        road,
        cfg.sensor_range,
        cfg.detection_spacing,
        err,
        state.frame_id,
    )?;
    let coop_det = sense(
        1,
        state.coop_pose,
        road,
        cfg.sensor_range,
        cfg.detection_spacing,
        err,
        state.frame_id,
    )?;
    let coop_det = if opts.codec {
        codec_roundtrip(&coop_det, 1, state.frame_id)?
    } else {
        coop_det
    };

    let mut params = FusionParams::from_config(cfg);
    params.apex_enabled = opts.apex;

    let started = Instant::now();
    let (fused, mode) = fuse_frame(&ego_det, &coop_det, state, &params, opts)?;
    let runtime_us = started.elapsed().as_secs_f64() * 1e6;

    let (mean_l, max_l, _, per_l) = lane_error(&fused.lane.left, &gt.left)?;
    let (mean_r, max_r, _, per_r) = lane_error(&fused.lane.right, &gt.right)?;
    let mut all = per_l;
    all.extend(per_r);
    let p95 = nearest_rank(all, 95.0);
    let range = perception_range(&fused, state.ego_pose);
    Ok((
        EvalReport {
            frame_id: state.frame_id,
            mse_left: mean_l,
            mse_right: mean_r,
            max_left: max_l,
            max_right: max_r,
            p95,
            perception_range: range,
            runtime_us,
        },
        mode,
    ))
}

fn fuse_frame(
    ego_det: &DetectedLane,
    coop_det: &DetectedLane,
    state: &FrameState,
    params: &FusionParams,
    opts: &RunOptions,
) -> Result<(FusedLane, FrameMode), SimError> {
    let try_convoy = matches!(opts.mode, ModeSelect::Auto | ModeSelect::Convoy);
    let try_spline = matches!(opts.mode, ModeSelect::Auto | ModeSelect::Spline);
    if try_convoy {
        if let Some(ov) = detect_overlap(ego_det, coop_det) {
            return Ok((
                convoy_fuse(ego_det, coop_det, &ov, params)?,
                FrameMode::Convoy,
            ));
        }
    }
    if try_spline {
        let rel = relative_pose(state.ego_pose, state.coop_pose);
        let decision = check_fusibility(rel, ego_det, coop_det, params);
        if let Verdict::Fusible(_) = decision.verdict {
            return Ok((spline_fuse(ego_det, coop_det, params)?, FrameMode::Spline));
        }
    }
    Ok((FusedLane::local_only(ego_det), FrameMode::Local))
}

/// Execute the full scenario: up to `cfg.frames` frames, stopping cleanly
/// at the end of the road.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunResult, SimError> {
    let road = build_road(&cfg.road)?;
    let gt = road.sample_lane(cfg.gt_spacing);
    let mut state = FrameState::initial(cfg, &road);
    let mut reports = Vec::new();
    let mut modes = Vec::new();
    let length = road.center.length();
    for _ in 0..cfg.frames {
        if state.coop_s + cfg.detection_spacing >= length {
            break;
        }
        let (report, mode) = run_frame(&state, &road, &gt, cfg, opts)?;
        reports.push(report);
        modes.push(mode);
        state = match step(&state, cfg, &road) {
            Ok(next) => next,
            Err(SimError::EndOfRoad { .. }) => break,
            Err(e) => return Err(e),
        };
    }
    let summary = aggregate(&reports)?;
    Ok(RunResult {
        reports,
        modes,
        summary,
        codec_enabled: opts.codec,
        scenario: cfg.clone(),
    })
}

pub const CSV_HEADER: &str =
    "frame_id,mode,mse_left,mse_right,max_left,max_right,p95,range_m,runtime_us";

pub fn write_frames_csv(path: &Path, result: &RunResult) -> Result<(), SimError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{CSV_HEADER}")?;
    for (r, m) in result.reports.iter().zip(&result.modes) {
        writeln!(
            f,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.frame_id,
            m.as_str(),
            r.mse_left,
            r.mse_right,
            r.max_left,
            r.max_right,
            r.p95,
            r.perception_range,
            r.runtime_us
        )?;
    }
    Ok(())
}

pub fn summary_text(result: &RunResult) -> String {
    let s = &result.summary;
    let mode = result
        .modes
        .first()
        .map(|m| m.as_str())
        .unwrap_or("none");
    let mut out = String::new();
    out.push_str(&format!(
        "frames: {}   codec: {}   dominant mode: {}\n\n",
        s.frames,
        if result.codec_enabled { "on" } else { "off" },
        mode
    ));
    out.push_str("metric            mean        std        max\n");
    let row = |name: &str, f: fn(&EvalReport) -> f64| {
        format!(
            "{:<14} {:>10.4} {:>10.4} {:>10.4}\n",
            name,
            f(&s.mean),
            f(&s.std),
            f(&s.max)
        )
    };
    out.push_str(&row("mse_left [m]", |r| r.mse_left));
    out.push_str(&row("mse_right [m]", |r| r.mse_right));
    out.push_str(&row("max_left [m]", |r| r.max_left));
    out.push_str(&row("max_right [m]", |r| r.max_right));
    out.push_str(&row("p95 [m]", |r| r.p95));
    out.push_str(&row("range [m]", |r| r.perception_range));
    out.push_str(&row("runtime [us]", |r| r.runtime_us));
    out
}

pub fn write_outputs(dir: &Path, result: &RunResult) -> Result<(), SimError> {
    std::fs::create_dir_all(dir)?;
    write_frames_csv(&dir.join("frames.csv"), result)?;
    std::fs::write(dir.join("summary.txt"), summary_text(result))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road::{RoadSpec, SegmentSpec, TurnDirection};

    fn straight_cfg() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.road = RoadSpec {
            segments: vec![SegmentSpec::Straight { length: 200.0 }],
            lane_width: 4.0,
        };
        cfg.gap = 25.0;
        cfg.frames = 10;
        cfg
    }

    #[test]
    fn step_kinematics() {
        let cfg = straight_cfg();
        let road = build_road(&cfg.road).unwrap();
        let s0 = FrameState::initial(&cfg, &road);
        let s1 = step(&s0, &cfg, &road).unwrap();
        let advance = s1.ego_s - s0.ego_s;
        assert!((advance - 1.0).abs() <= 0.05 + 1e-12, "advance {advance}");
        assert_eq!(s1.ego_pose.heading, 0.0);
        assert_eq!(s1.frame_id, 1);
    }

    #[test]
    fn step_heading_on_arc() {
        let mut cfg = straight_cfg();
        cfg.road = RoadSpec {
            segments: vec![SegmentSpec::Arc {
                radius: 12.73,
                angle_deg: 90.0,
                direction: TurnDirection::Right,
            }],
            lane_width: 4.0,
        };
        cfg.gap = 5.0;
        let road = build_road(&cfg.road).unwrap();
        let s0 = FrameState::initial(&cfg, &road);
        let s1 = step(&s0, &cfg, &road).unwrap();
        let advance = s1.ego_s - s0.ego_s;
        let dh = crate::geometry::normalize_angle(s1.ego_pose.heading - s0.ego_pose.heading);
        assert!((dh - advance / 12.73).abs() < 1e-9, "dh {dh}");
    }

    #[test]
    fn end_of_road_terminates() {
        let mut cfg = straight_cfg();
        cfg.start = 195.0;
        cfg.gap = 4.0;
        cfg.speed = 20.0;
        let road = build_road(&cfg.road).unwrap();
        let mut state = FrameState::initial(&cfg, &road);
        let mut hit_end = false;
        for _ in 0..10 {
            match step(&state, &cfg, &road) {
                Ok(s) => state = s,
                Err(SimError::EndOfRoad { .. }) => {
                    hit_end = true;
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(hit_end);
    }

    #[test]
    fn convoy_scenario_end_to_end() {
        let cfg = straight_cfg();
        let opts = RunOptions::default();
        let result = run_scenario(&cfg, &opts).unwrap();
        assert_eq!(result.reports.len(), 10);
        assert!(result.modes.iter().all(|m| *m == FrameMode::Convoy));
        let range = result.summary.mean.perception_range;
        assert!((range - 55.0).abs() < 1.0, "range {range}");
    }

    #[test]
    fn spline_scenario_selected_for_gap() {
        let mut cfg = straight_cfg();
        cfg.gap = 60.0; // d_s = 30
        cfg.max_interp_distance = 40.0;
        cfg.frames = 3;
        let result = run_scenario(&cfg, &RunOptions::default()).unwrap();
        assert!(result.modes.iter().all(|m| *m == FrameMode::Spline));
        assert!(result.summary.mean.perception_range >= 85.0);
    }

    #[test]
    fn rejected_gap_falls_back_to_local() {
        let mut cfg = straight_cfg();
        cfg.gap = 60.0; // d_s = 30 > default cap 20
        cfg.frames = 2;
        let result = run_scenario(&cfg, &RunOptions::default()).unwrap();
        assert!(result.modes.iter().all(|m| *m == FrameMode::Local));
        let range = result.summary.mean.perception_range;
        assert!((range - 30.0).abs() < 0.2, "range {range}");
    }

    #[test]
    fn single_frame_summary_equals_report() {
        let mut cfg = straight_cfg();
        cfg.frames = 1;
        let result = run_scenario(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(result.reports.len(), 1);
        assert_eq!(result.summary.mean.mse_left, result.reports[0].mse_left);
        assert_eq!(result.summary.std.mse_left, 0.0);
    }

    fn csv_without_runtime(result: &RunResult) -> String {
        let mut out = String::new();
        for (r, m) in result.reports.iter().zip(&result.modes) {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                r.frame_id,
                m.as_str(),
                r.mse_left,
                r.mse_right,
                r.max_left,
                r.max_right,
                r.p95,
                r.perception_range
            ));
        }
        out
    }

    #[test]
    fn deterministic_given_seed() {
        let mut cfg = straight_cfg();
        cfg.error_model = crate::scenario::ErrorModelSpec::Noise(0.05);
        cfg.seed = 99;
        let a = run_scenario(&cfg, &RunOptions::default()).unwrap();
        let b = run_scenario(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(csv_without_runtime(&a), csv_without_runtime(&b));
    }
}
