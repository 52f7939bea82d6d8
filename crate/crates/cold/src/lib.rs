//! CoLD: collective lane detection.
//!
//! Fuses locally perceived lane sections from an ego vehicle and one
//! cooperative vehicle into a single collective lane, either by
//! weighted-mean convoy fusion over overlapping detections or by cubic
//! spline interpolation across a detection gap, with an optional binary
//! wire codec for the exchanged lane messages, a synthetic road
//! generator, a configurable lane sensor, evaluation metrics, and a
//! scenario runner.

pub mod codec;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod polyline;
pub mod road;
pub mod scenario;
pub mod sensor;
pub mod sim;
pub mod spline;

pub use codec::{decode, encode, fit_bezier, lane_to_message, message_to_lane, LaneMessage};
pub use eval::{aggregate, lane_error, perception_range, EvalReport};
pub use fusion::{
    check_fusibility, convoy_fuse, detect_overlap, estimate_apex, is_curve, spline_fuse,
    FusedLane, FusionParams,
};
pub use geometry::{Point2, Pose2};
pub use polyline::{Frame, Lane, Polyline};
pub use road::{build_road, Road, RoadSpec};
pub use scenario::{parse_scenario, ScenarioConfig};
pub use sensor::{sense, DetectedLane, ErrorModel};
pub use sim::{run_scenario, RunOptions, RunResult};
pub use spline::fit_spline;
