//! Line-oriented scenario configuration format.
//!
//! One directive per line, `key = value` (a `:` separator is accepted as
//! well), `#` starts a comment. Units are meters and degrees throughout.
//!
//! ```text
//! road.segments = straight 40 | arc right 12.73 90 | straight 40
//! road.lane_width = 4.0
//! sensor.range = 30.0
//! sensor.spacing = 0.10
//! sensor.error = noise 0.05        # none | offset <m> | noise <sigma m>
//! gt.spacing = 0.02
//! sim.gap = 20.0
//! sim.start = 0.0
//! sim.speed = 10.0
//! sim.frames = 300
//! sim.seed = 42
//! fusion.weights = 0.25 0.75
//! fusion.max_interp = 20.0
//! ```

use thiserror::Error;

use crate::road::{RoadSpec, SegmentSpec, TurnDirection};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("semantic error at line {line}: {message}")]
    Semantic { line: usize, message: String },
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn semantic(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Semantic {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorModelSpec {
    None,
    Offset(f64),
    Noise(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub road: RoadSpec,
    pub sensor_range: f64,
    pub detection_spacing: f64,
    pub gt_spacing: f64,
    /// Initial along-track inter-vehicle distance (d_v).
    pub gap: f64,
    /// Initial ego along-track position on the centerline.
    pub start: f64,
    pub speed: f64,
    pub frames: u32,
    pub error_model: ErrorModelSpec,
    pub seed: u64,
    pub max_interp_distance: f64,
    pub fusion_weights: (f64, f64),
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            road: RoadSpec {
                segments: vec![SegmentSpec::Straight { length: 100.0 }],
                lane_width: 4.0,
            },
            sensor_range: 30.0,
            detection_spacing: 0.10,
            gt_spacing: 0.02,
            gap: 20.0,
            start: 0.0,
            speed: 10.0,
            frames: 100,
            error_model: ErrorModelSpec::None,
            seed: 0,
            max_interp_distance: 20.0,
            fusion_weights: (0.25, 0.75),
        }
    }
}

fn parse_f64(line: usize, s: &str, what: &str) -> Result<f64, ScenarioError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| semantic(line, format!("invalid {what}: `{}`", s.trim())))
}

fn parse_segments(line: usize, value: &str) -> Result<Vec<SegmentSpec>, ScenarioError> {
    let mut out = Vec::new();
    for part in value.split(|c| c == '|' || c == ',') {
        let toks: Vec<&str> = part.split_whitespace().collect();
        match toks.as_slice() {
            ["straight", len] => out.push(SegmentSpec::Straight {
                length: parse_f64(line, len, "segment length")?,
            }),
            ["arc", dir, radius, angle] => {
                let direction = match *dir {
                    "left" => TurnDirection::Left,
                    "right" => TurnDirection::Right,
                    other => {
                        return Err(semantic(
                            line,
                            format!("arc direction must be left or right, got `{other}`"),
                        ))
                    }
                };
                out.push(SegmentSpec::Arc {
                    radius: parse_f64(line, radius, "arc radius")?,
                    angle_deg: parse_f64(line, angle, "arc angle")?,
                    direction,
                });
            }
            [] => continue,
            _ => {
                return Err(syntax(
                    line,
                    1,
                    format!("unrecognized segment `{}`", part.trim()),
                ))
            }
        }
    }
    if out.is_empty() {
        return Err(semantic(line, "road.segments is empty"));
    }
    // Validate here so the error carries the offending line.
    for seg in &out {
        match *seg {
            SegmentSpec::Straight { length } if length <= 0.0 => {
                return Err(semantic(line, format!("segment length must be positive, got {length}")))
            }
            SegmentSpec::Arc { radius, .. } if radius <= 0.0 => {
                return Err(semantic(line, format!("arc radius must be positive, got {radius}")))
            }
            SegmentSpec::Arc { angle_deg, .. } if angle_deg.abs() > 180.0 || angle_deg == 0.0 => {
                return Err(semantic(line, format!("|arc angle| must be in (0, 180], got {angle_deg}")))
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Parse a scenario file. Rejects unknown keys; applies defaults for
/// omitted ones.
pub fn parse_scenario(text: &[u8]) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::str::from_utf8(text)
        .map_err(|e| syntax(0, e.valid_up_to(), "input is not valid UTF-8"))?;
    let mut cfg = ScenarioConfig::default();
    let mut saw_segments = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let sep = line
            .char_indices()
            .find(|&(_, c)| c == '=' || c == ':')
            .ok_or_else(|| syntax(line_no, line.len(), "expected `key = value`"))?;
        let key = line[..sep.0].trim().to_ascii_lowercase();
        let value = line[sep.0 + 1..].trim();
        if value.is_empty() {
            return Err(syntax(line_no, sep.0 + 2, format!("missing value for `{key}`")));
        }

        match key.as_str() {
            "road.segments" | "road" | "segments" => {
                cfg.road.segments = parse_segments(line_no, value)?;
                saw_segments = true;
            }
            "road.lane_width" => cfg.road.lane_width = parse_f64(line_no, value, "lane width")?,
            "sensor.range" => cfg.sensor_range = parse_f64(line_no, value, "sensor range")?,
            "sensor.spacing" => {
                cfg.detection_spacing = parse_f64(line_no, value, "sensor spacing")?
            }
            "sensor.error" => {
                let toks: Vec<&str> = value.split_whitespace().collect();
                cfg.error_model = match toks.as_slice() {
                    ["none"] => ErrorModelSpec::None,
                    ["offset", v] => ErrorModelSpec::Offset(parse_f64(line_no, v, "offset")?),
                    ["noise", v] => ErrorModelSpec::Noise(parse_f64(line_no, v, "noise sigma")?),
                    _ => {
                        return Err(semantic(
                            line_no,
                            format!("sensor.error must be none | offset <m> | noise <sigma>, got `{value}`"),
                        ))
                    }
                };
            }
            "gt.spacing" => cfg.gt_spacing = parse_f64(line_no, value, "gt spacing")?,
            "sim.gap" | "gap" => cfg.gap = parse_f64(line_no, value, "gap")?,
            "sim.start" => cfg.start = parse_f64(line_no, value, "start position")?,
            "sim.speed" => cfg.speed = parse_f64(line_no, value, "speed")?,
            "sim.frames" => {
                cfg.frames = value
                    .parse::<u32>()
                    .map_err(|_| semantic(line_no, format!("invalid frame count: `{value}`")))?
            }
            "sim.seed" => {
                cfg.seed = value
                    .parse::<u64>()
                    .map_err(|_| semantic(line_no, format!("invalid seed: `{value}`")))?
            }
            "fusion.weights" => {
                let toks: Vec<&str> = value.split_whitespace().collect();
                if toks.len() != 2 {
                    return Err(semantic(line_no, "fusion.weights needs two values"));
                }
                cfg.fusion_weights = (
                    parse_f64(line_no, toks[0], "ego weight")?,
                    parse_f64(line_no, toks[1], "coop weight")?,
                );
            }
            "fusion.max_interp" => {
                cfg.max_interp_distance = parse_f64(line_no, value, "max interpolation distance")?
            }
            other => return Err(semantic(line_no, format!("unknown key `{other}`"))),
        }
    }

    validate(&cfg, saw_segments)?;
    Ok(cfg)
}

fn validate(cfg: &ScenarioConfig, saw_segments: bool) -> Result<(), ScenarioError> {
    let _ = saw_segments; // a default road is acceptable
    cfg.road
        .validate()
        .map_err(|e| semantic(0, e.to_string()))?;
    for (name, v) in [
        ("sensor.range", cfg.sensor_range),
        ("sensor.spacing", cfg.detection_spacing),
        ("gt.spacing", cfg.gt_spacing),
        ("sim.gap", cfg.gap),
        ("sim.speed", cfg.speed),
        ("fusion.max_interp", cfg.max_interp_distance),
    ] {
        if !(v > 0.0) {
            return Err(semantic(0, format!("{name} must be positive, got {v}")));
        }
    }
    if cfg.start < 0.0 {
        return Err(semantic(0, format!("sim.start must be >= 0, got {}", cfg.start)));
    }
    let (we, wc) = cfg.fusion_weights;
    if we < 0.0 || wc < 0.0 || (we + wc - 1.0).abs() > 1e-9 {
        return Err(semantic(
            0,
            format!("fusion.weights must be non-negative and sum to 1, got {we} {wc}"),
        ));
    }
    match cfg.error_model {
        ErrorModelSpec::Noise(s) if s < 0.0 => {
            Err(semantic(0, format!("noise sigma must be >= 0, got {s}")))
        }
        _ => Ok(()),
    }
}

/// Canonical text form; `parse_scenario(pretty_print(cfg)) == cfg`.
pub fn pretty_print(cfg: &ScenarioConfig) -> String {
    let segments = cfg
        .road
        .segments
        .iter()
        .map(|s| match *s {
            SegmentSpec::Straight { length } => format!("straight {length}"),
            SegmentSpec::Arc { radius, angle_deg, direction } => {
                let d = match direction {
                    TurnDirection::Left => "left",
                    TurnDirection::Right => "right",
                };
                format!("arc {d} {radius} {angle_deg}")
            }
        })
        .collect::<Vec<_>>()
        .join(" | ");
    let error = match cfg.error_model {
        ErrorModelSpec::None => "none".to_string(),
        ErrorModelSpec::Offset(v) => format!("offset {v}"),
        ErrorModelSpec::Noise(v) => format!("noise {v}"),
    };
    format!(
        "road.segments = {segments}\n\
         road.lane_width = {}\n\
         sensor.range = {}\n\
         sensor.spacing = {}\n\
         sensor.error = {error}\n\
         gt.spacing = {}\n\
         sim.gap = {}\n\
         sim.start = {}\n\
         sim.speed = {}\n\
         sim.frames = {}\n\
         sim.seed = {}\n\
         fusion.weights = {} {}\n\
         fusion.max_interp = {}\n",
        cfg.road.lane_width,
        cfg.sensor_range,
        cfg.detection_spacing,
        cfg.gt_spacing,
        cfg.gap,
        cfg.start,
        cfg.speed,
        cfg.frames,
        cfg.seed,
        cfg.fusion_weights.0,
        cfg.fusion_weights.1,
        cfg.max_interp_distance,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = parse_scenario(b"road: straight 100").unwrap();
        assert_eq!(cfg.road.segments, vec![SegmentSpec::Straight { length: 100.0 }]);
        assert_eq!(cfg.sensor_range, 30.0);
        assert_eq!(cfg.detection_spacing, 0.10);
        assert_eq!(cfg.gt_spacing, 0.02);
        assert_eq!(cfg.fusion_weights, (0.25, 0.75));
        assert_eq!(cfg.max_interp_distance, 20.0);
    }

    #[test]
    fn shorthand_keys_and_commas() {
        let cfg = parse_scenario(
            b"gap: 20\nsegments: straight 40, arc right 12.73 90, straight 40",
        )
        .unwrap();
        assert_eq!(cfg.gap, 20.0);
        assert_eq!(
            cfg.road.segments,
            vec![
                SegmentSpec::Straight { length: 40.0 },
                SegmentSpec::Arc {
                    radius: 12.73,
                    angle_deg: 90.0,
                    direction: TurnDirection::Right
                },
                SegmentSpec::Straight { length: 40.0 },
            ]
        );
    }

    #[test]
    fn negative_radius_is_semantic_error() {
        let err = parse_scenario(b"road.segments = arc right -5 90").unwrap_err();
        match err {
            ScenarioError::Semantic { line: 1, message } => {
                assert!(message.contains("radius"), "{message}");
            }
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_scenario(b"road: straight 10\nbogus.key = 1").unwrap_err();
        assert!(matches!(err, ScenarioError::Semantic { line: 2, .. }));
    }

    #[test]
    fn weights_must_sum_to_one() {
        let err =
            parse_scenario(b"road: straight 10\nfusion.weights = 0.5 0.6").unwrap_err();
        assert!(matches!(err, ScenarioError::Semantic { .. }));
    }

    #[test]
    fn syntax_error_carries_location() {
        let err = parse_scenario(b"road: straight 10\njust some words").unwrap_err();
        assert!(matches!(err, ScenarioError::Syntax { line: 2, .. }));
    }

    #[test]
    fn pretty_print_roundtrip() {
        let mut cfg = ScenarioConfig::default();
        cfg.road = crate::road::rural_spec(4.0);
        cfg.error_model = ErrorModelSpec::Noise(0.05);
        cfg.gap = 50.0;
        cfg.seed = 42;
        cfg.frames = 300;
        let text = pretty_print(&cfg);
        let back = parse_scenario(text.as_bytes()).unwrap();
        assert_eq!(back, cfg);
    }
}
