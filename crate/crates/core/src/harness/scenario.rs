//! Scenario files: TOML in, validated [`Scenario`] out.

use crate::control::{PidGains, DEFAULT_DECAY};
use crate::faults::{OutageModel, OutageReport};
use crate::fusion::FusionPolicy;
use crate::metrics::{DEFAULT_CRASH_HOLD, DEFAULT_CRASH_THRESHOLD};
use crate::perception::{CameraKind, CameraModel, Rect};
use crate::wire::{ChannelModel, Delay};
use crate::world::{Pose, SegmentSpec, Track, TrackSpec, VehicleParams};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DEFAULT_DURATION: f64 = 100.0;
pub const DEFAULT_TIMESTEP: f64 = 0.005;
pub const ONBOARD_RATE: f64 = 11.0;
pub const INFRASTRUCTURE_RATE: f64 = 30.0;
/// Capture-to-send processing delay of each camera pipeline.
pub const ONBOARD_LATENCY: f64 = 0.2;
pub const INFRASTRUCTURE_LATENCY: f64 = 0.1;

/// Relative slack for the tick-alignment checks.
const ALIGN_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("invalid {key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrackConfig {
    Reference,
    RoundedRectangle {
        #[serde(default = "board_default")]
        board_size: f64,
        margin: f64,
        corner_radius: f64,
        #[serde(default = "line_default")]
        line_width: f64,
    },
    Segments {
        #[serde(default = "board_default")]
        board_size: f64,
        #[serde(default = "line_default")]
        line_width: f64,
        start: Pose,
        segments: Vec<SegmentSpec>,
    },
}

fn board_default() -> f64 {
    2.0
}

fn line_default() -> f64 {
    0.02
}

impl TrackConfig {
    pub fn to_spec(&self) -> TrackSpec {
        match self {
            TrackConfig::Reference => TrackSpec::reference(),
            TrackConfig::RoundedRectangle {
                board_size,
                margin,
                corner_radius,
                line_width,
            } => TrackSpec::rounded_rectangle(*board_size, *margin, *corner_radius, *line_width),
            TrackConfig::Segments {
                board_size,
                line_width,
                start,
                segments,
            } => TrackSpec {
                board_size: *board_size,
                line_width: *line_width,
                start: Pose::new(start.x, start.y, start.heading),
                segments: segments.clone(),
            },
        }
    }
}

/// Camera fields a scenario may override; the rest come from the defaults of
/// the sensor kind.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub image_width: Option<u32>,
    pub image_height: Option<u32>,
    pub pixels_per_meter: Option<f64>,
    pub crop_size: Option<u32>,
    pub coverage: Option<Rect>,
    pub occluders: Option<Vec<Rect>>,
    pub origin: Option<[f64; 2]>,
    pub mount: Option<[f64; 2]>,
    pub calibrated_range: Option<f64>,
    pub look_ahead: Option<f64>,
    pub noise_px: Option<f64>,
    pub min_area: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    kind: CameraKind,
    rate: Option<f64>,
    latency: Option<f64>,
    gains: Option<PidGains>,
    decay: Option<f64>,
    #[serde(default)]
    camera: CameraConfig,
    #[serde(default)]
    channel: ChannelModel,
    #[serde(default)]
    outage: OutageModel,
    #[serde(default)]
    outage_report: OutageReport,
    phase: Option<f64>,
    outage_phase: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrashRule {
    pub enabled: bool,
    pub threshold: f64,
    pub hold: f64,
}

impl Default for CrashRule {
    fn default() -> Self {
        CrashRule {
            enabled: true,
            threshold: DEFAULT_CRASH_THRESHOLD,
            hold: DEFAULT_CRASH_HOLD,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    track: Option<TrackConfig>,
    vehicle: Option<VehicleParams>,
    start: Option<Pose>,
    sensors: Option<Vec<RawSensor>>,
    fusion: Option<FusionPolicy>,
    ttl: Option<f64>,
    duration: Option<f64>,
    timestep: Option<f64>,
    seed: Option<u64>,
    crash: Option<CrashRule>,
    post_outage_window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub kind: CameraKind,
    /// Frames per second.
    pub rate: f64,
    /// Seconds between capturing a frame and sending its command.
    pub latency: f64,
    pub gains: PidGains,
    pub decay: f64,
    pub camera: CameraModel,
    pub channel: ChannelModel,
    pub outage: OutageModel,
    pub outage_report: OutageReport,
    /// First frame time; drawn from the seed when absent.
    pub phase: Option<f64>,
    /// Outage schedule offset; drawn from the seed when absent.
    pub outage_phase: Option<f64>,
}

impl SensorSpec {
    pub fn onboard() -> Self {
        SensorSpec {
            kind: CameraKind::Onboard,
            rate: ONBOARD_RATE,
            latency: ONBOARD_LATENCY,
            gains: PidGains::ONBOARD,
            decay: DEFAULT_DECAY,
            camera: CameraModel::onboard(),
            channel: ChannelModel::default(),
            outage: OutageModel::None,
            outage_report: OutageReport::ZeroReports,
            phase: None,
            outage_phase: None,
        }
    }

    pub fn infrastructure(origin: [f64; 2], coverage: Option<Rect>) -> Self {
        SensorSpec {
            kind: CameraKind::Infrastructure,
            rate: INFRASTRUCTURE_RATE,
            latency: INFRASTRUCTURE_LATENCY,
            gains: PidGains::INFRASTRUCTURE,
            decay: DEFAULT_DECAY,
            camera: CameraModel::infrastructure(origin, coverage),
            channel: ChannelModel::default(),
            outage: OutageModel::None,
            outage_report: OutageReport::ZeroReports,
            phase: None,
            outage_phase: None,
        }
    }
}

/// A complete, validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub track: TrackSpec,
    pub vehicle: VehicleParams,
    /// Initial pose; the track start when absent.
    pub start: Option<Pose>,
    pub sensors: Vec<SensorSpec>,
    pub fusion: FusionPolicy,
    /// Drop a source from fusion when its last report is older than this.
    pub ttl: Option<f64>,
    pub duration: f64,
    pub timestep: f64,
    pub seed: u64,
    pub crash: CrashRule,
    /// Samples taken after each outage end.
    pub post_outage_window: usize,
}

/// The reference infrastructure pair: two overhead cameras framing the whole
/// board, mounted beyond its bottom and top edges. Each resolves its own half
/// at full resolution and the far half at reduced resolution.
pub fn reference_infra_pair() -> [SensorSpec; 2] {
    let origin = [-(1280.0 / REFERENCE_PAIR_PPM - 2.0) / 2.0, 2.0];
    [[1.0, -0.2], [1.0, 2.2]].map(|mount| {
        let mut s = SensorSpec::infrastructure(origin, None);
        s.camera.pixels_per_meter = REFERENCE_PAIR_PPM;
        s.camera.mount = Some(mount);
        s
    })
}

/// Fits the 2 m board into the 720-pixel image height.
pub const REFERENCE_PAIR_PPM: f64 = 360.0;

impl Scenario {
    /// The reference track with the given sensors and default settings.
    pub fn reference(name: &str, sensors: Vec<SensorSpec>, fusion: FusionPolicy) -> Self {
        Scenario {
            name: name.to_string(),
            track: TrackSpec::reference(),
            vehicle: VehicleParams::default(),
            start: None,
            sensors,
            fusion,
            ttl: None,
            duration: DEFAULT_DURATION,
            timestep: DEFAULT_TIMESTEP,
            seed: 1,
            crash: CrashRule::default(),
            post_outage_window: crate::metrics::DEFAULT_WINDOW,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        let track = raw.track.ok_or_else(|| ConfigError::MissingField("track".into()))?;
        let raw_sensors = raw.sensors.ok_or_else(|| ConfigError::MissingField("sensors".into()))?;
        let mut sensors = Vec::with_capacity(raw_sensors.len());
        for (i, s) in raw_sensors.into_iter().enumerate() {
            sensors.push(resolve_sensor(i, s)?);
        }
        let scenario = Scenario {
            name: raw.name.unwrap_or_else(|| "scenario".to_string()),
            track: track.to_spec(),
            vehicle: raw.vehicle.unwrap_or_default(),
            start: raw.start.map(|p| Pose::new(p.x, p.y, p.heading)),
            sensors,
            fusion: raw.fusion.unwrap_or(FusionPolicy::ConfidenceWeighted),
            ttl: raw.ttl,
            duration: raw.duration.unwrap_or(DEFAULT_DURATION),
            timestep: raw.timestep.unwrap_or(DEFAULT_TIMESTEP),
            seed: raw.seed.unwrap_or(1),
            crash: raw.crash.unwrap_or_default(),
            post_outage_window: raw.post_outage_window.unwrap_or(crate::metrics::DEFAULT_WINDOW),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn build_track(&self) -> Result<Track, ConfigError> {
        Track::from_spec(&self.track).map_err(|e| invalid("track", e.to_string()))
    }

    pub fn start_pose(&self) -> Pose {
        self.start.unwrap_or(self.track.start)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.build_track()?;
        let dt = self.timestep;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("timestep", "must be positive"));
        }
        let ticks_per_second = 1.0 / dt;
        if (ticks_per_second - ticks_per_second.round()).abs() > ALIGN_TOL * ticks_per_second.max(1.0) {
            return Err(invalid(
                "timestep",
                format!("{dt} s does not divide one second, so sensor frames cannot be tick-aligned"),
            ));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(invalid("duration", "must be positive"));
        }
        if let Some(ttl) = self.ttl {
            if !(ttl.is_finite() && ttl > 0.0) {
                return Err(invalid("ttl", "must be positive"));
            }
        }
        if self.crash.threshold <= 0.0 || self.crash.hold < 0.0 {
            return Err(invalid("crash", "threshold must be positive and hold non-negative"));
        }
        if self.post_outage_window == 0 {
            return Err(invalid("post_outage_window", "must be at least 1"));
        }
        let v = &self.vehicle;
        for (key, val) in [
            ("vehicle.wheel_separation", v.wheel_separation),
            ("vehicle.power_to_speed", v.power_to_speed),
            ("vehicle.max_power", v.max_power),
            ("vehicle.marker_spacing", v.marker_spacing),
        ] {
            if !(val.is_finite() && val > 0.0) {
                return Err(invalid(key, "must be positive"));
            }
        }
        if self.sensors.is_empty() {
            return Err(invalid("sensors", "at least one sensor is required"));
        }
        let onboard = self.sensors.iter().filter(|s| s.kind == CameraKind::Onboard).count();
        if onboard > 1 {
            return Err(invalid("sensors", "at most one onboard sensor is supported"));
        }
        for (i, s) in self.sensors.iter().enumerate() {
            let key = |f: &str| format!("sensors[{i}].{f}");
            if !(s.rate.is_finite() && s.rate > 0.0 && s.rate <= ticks_per_second.round()) {
                return Err(invalid(
                    key("rate"),
                    format!("must be in (0, {}] Hz", ticks_per_second.round()),
                ));
            }
            if !(s.latency.is_finite() && s.latency >= 0.0) {
                return Err(invalid(key("latency"), "must be non-negative"));
            }
            check_aligned(&key("latency"), s.latency, dt)?;
            s.gains.validate().map_err(|r| invalid(key("gains"), r))?;
            if !(0.0..1.0).contains(&s.decay) {
                return Err(invalid(key("decay"), "must be in [0, 1)"));
            }
            s.camera.validate().map_err(|e| invalid(key("camera"), e.to_string()))?;
            if s.camera.kind != s.kind {
                return Err(invalid(key("camera"), "camera kind differs from sensor kind"));
            }
            s.channel.validate().map_err(|r| invalid(key("channel"), r))?;
            match s.channel.delay {
                Delay::Fixed { seconds } => check_aligned(&key("channel.delay.seconds"), seconds, dt)?,
                Delay::Uniform { .. } => {}
            }
            s.outage.validate().map_err(|r| invalid(key("outage"), r))?;
            match s.outage {
                OutageModel::None => {}
                OutageModel::Periodic { period, duration } => {
                    check_aligned(&key("outage.period"), period, dt)?;
                    check_aligned(&key("outage.duration"), duration, dt)?;
                }
                OutageModel::Probabilistic { interval, .. } => {
                    check_aligned(&key("outage.interval"), interval, dt)?;
                }
            }
            if let Some(p) = s.phase {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(invalid(key("phase"), "must be non-negative"));
                }
            }
            if let Some(p) = s.outage_phase {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(invalid(key("outage_phase"), "must be non-negative"));
                }
            }
        }
        Ok(())
    }
}

fn check_aligned(key: &str, value: f64, dt: f64) -> Result<(), ConfigError> {
    let ticks = value / dt;
    if (ticks - ticks.round()).abs() > ALIGN_TOL * ticks.abs().max(1.0) {
        return Err(invalid(key, format!("{value} s is not a whole number of {dt} s ticks")));
    }
    Ok(())
}

fn resolve_sensor(i: usize, s: RawSensor) -> Result<SensorSpec, ConfigError> {
    let c = s.camera;
    let mut camera = match s.kind {
        CameraKind::Onboard => CameraModel::onboard(),
        CameraKind::Infrastructure => {
            let origin = c
                .origin
                .ok_or_else(|| ConfigError::MissingField(format!("sensors[{i}].camera.origin")))?;
            CameraModel::infrastructure(origin, None)
        }
    };
    if let Some(v) = c.image_width {
        camera.image_width = v;
    }
    if let Some(v) = c.image_height {
        camera.image_height = v;
    }
    if let Some(v) = c.pixels_per_meter {
        camera.pixels_per_meter = v;
    }
    if let Some(v) = c.crop_size {
        camera.crop_size = v;
    }
    if let Some(v) = c.look_ahead {
        camera.look_ahead = v;
    }
    if let Some(v) = c.noise_px {
        camera.noise_px = v;
    }
    if let Some(v) = c.min_area {
        camera.min_area = v;
    }
    if c.coverage.is_some() {
        camera.coverage = c.coverage;
    }
    if c.mount.is_some() {
        camera.mount = c.mount;
    }
    if let Some(v) = c.calibrated_range {
        camera.calibrated_range = v;
    }
    if let Some(v) = &c.occluders {
        camera.occluders = v.clone();
    }
    Ok(SensorSpec {
        kind: s.kind,
        rate: s.rate.unwrap_or(match s.kind {
            CameraKind::Onboard => ONBOARD_RATE,
            CameraKind::Infrastructure => INFRASTRUCTURE_RATE,
        }),
        latency: s.latency.unwrap_or(match s.kind {
            CameraKind::Onboard => ONBOARD_LATENCY,
            CameraKind::Infrastructure => INFRASTRUCTURE_LATENCY,
        }),
        gains: s.gains.unwrap_or(PidGains::for_kind(s.kind)),
        decay: s.decay.unwrap_or(DEFAULT_DECAY),
        camera,
        channel: s.channel,
        outage: s.outage,
        outage_report: s.outage_report,
        phase: s.phase,
        outage_phase: s.outage_phase,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_toml_str(&text)
}
