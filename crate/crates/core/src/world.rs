//! Board geometry, the closed track, and skid-steer vehicle kinematics.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

const CLOSE_TOL: f64 = 1e-9;

/// Wraps an angle in degrees into `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let mut d = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if d >= 360.0 {
        d -= 360.0;
    }
    d
}

/// Vehicle position on the board and heading (degrees, counterclockwise from +x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            x,
            y,
            heading: normalize_deg(heading),
        }
    }

    pub fn heading_rad(&self) -> f64 {
        self.heading.to_radians()
    }

    /// Unit vector along the heading.
    pub fn forward(&self) -> [f64; 2] {
        let h = self.heading_rad();
        [h.cos(), h.sin()]
    }

    /// Unit vector pointing to the vehicle's left.
    pub fn left(&self) -> [f64; 2] {
        let [c, s] = self.forward();
        [-s, c]
    }

    /// Converts a board point into the vehicle frame as `(forward, left)`.
    pub fn to_local(&self, p: [f64; 2]) -> (f64, f64) {
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        let f = self.forward();
        let l = self.left();
        (dx * f[0] + dy * f[1], dx * l[0] + dy * l[1])
    }

    /// Converts a vehicle-frame offset into a board point.
    pub fn to_board(&self, forward: f64, left: f64) -> [f64; 2] {
        let f = self.forward();
        let l = self.left();
        [
            self.x + forward * f[0] + left * l[0],
            self.y + forward * f[1] + left * l[1],
        ]
    }
}

/// One piece of a track description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmentSpec {
    Straight {
        length: f64,
    },
    /// Positive sweep turns left (counterclockwise).
    Arc {
        radius: f64,
        sweep_deg: f64,
    },
}

/// Hand-editable track description: a start pose and a chain of segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSpec {
    #[serde(default = "default_board_size")]
    pub board_size: f64,
    #[serde(default = "default_line_width")]
    pub line_width: f64,
    pub start: Pose,
    pub segments: Vec<SegmentSpec>,
}

fn default_board_size() -> f64 {
    2.0
}

fn default_line_width() -> f64 {
    0.02
}

impl TrackSpec {
    /// Counterclockwise rounded rectangle whose bounding box starts at
    /// `(margin, margin)` on a square board.
    pub fn rounded_rectangle(board_size: f64, margin: f64, corner_radius: f64, line_width: f64) -> Self {
        let side = board_size - 2.0 * margin;
        let straight = side - 2.0 * corner_radius;
        let mut segments = Vec::with_capacity(8);
        for _ in 0..4 {
            segments.push(SegmentSpec::Straight { length: straight });
            segments.push(SegmentSpec::Arc {
                radius: corner_radius,
                sweep_deg: 90.0,
            });
        }
        TrackSpec {
            board_size,
            line_width,
            start: Pose::new(margin + corner_radius, margin, 0.0),
            segments,
        }
    }

    /// The default reference loop: 1.8 m rounded square, 0.4 m corners, 2 cm line.
    pub fn reference() -> Self {
        Self::rounded_rectangle(2.0, 0.1, 0.4, 0.02)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("track has no segments")]
    Empty,
    #[error("segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
    #[error("segment {index} leaves the {board_size} m board")]
    OutsideBoard { index: usize, board_size: f64 },
    #[error("loop does not close (gap {gap:.3e} m)")]
    NotClosed { gap: f64 },
    #[error("invalid track parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Line {
        start: [f64; 2],
        dir: [f64; 2],
        length: f64,
    },
    Arc {
        center: [f64; 2],
        radius: f64,
        /// Angle of the radius vector at the start of the arc, radians.
        start_angle: f64,
        /// Signed sweep, radians; positive is counterclockwise.
        sweep: f64,
    },
}

impl Piece {
    fn length(&self) -> f64 {
        match *self {
            Piece::Line { length, .. } => length,
            Piece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Point and tangent direction (radians) at arclength `s` from the piece start.
    fn at(&self, s: f64) -> ([f64; 2], f64) {
        match *self {
            Piece::Line { start, dir, .. } => ([start[0] + s * dir[0], start[1] + s * dir[1]], dir[1].atan2(dir[0])),
            Piece::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let sign = sweep.signum();
                let a = start_angle + sign * s / radius;
                (
                    [center[0] + radius * a.cos(), center[1] + radius * a.sin()],
                    a + sign * PI / 2.0,
                )
            }
        }
    }

    /// Nearest point on the piece and the tangent there (radians).
    fn nearest(&self, p: [f64; 2]) -> ([f64; 2], f64) {
        match *self {
            Piece::Line { start, dir, length } => {
                let t = ((p[0] - start[0]) * dir[0] + (p[1] - start[1]) * dir[1]).clamp(0.0, length);
                self.at(t)
            }
            Piece::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let a = (p[1] - center[1]).atan2(p[0] - center[0]);
                // angular distance travelled from the start in the sweep direction
                let rel = if sweep >= 0.0 {
                    (a - start_angle).rem_euclid(2.0 * PI)
                } else {
                    (start_angle - a).rem_euclid(2.0 * PI)
                };
                let span = sweep.abs();
                let s = if rel <= span {
                    rel * radius
                } else {
                    // outside the arc: pick the closer endpoint
                    let to_end = rel - span;
                    let to_start = 2.0 * PI - rel;
                    if to_end < to_start {
                        span * radius
                    } else {
                        0.0
                    }
                };
                let (q0, t0) = self.at(s);
                if rel <= span {
                    return (q0, t0);
                }
                // endpoints may tie; compare both explicitly
                let (qs, ts) = self.at(0.0);
                let (qe, te) = self.at(span * radius);
                if dist2(p, qs) <= dist2(p, qe) {
                    (qs, ts)
                } else {
                    (qe, te)
                }
            }
        }
    }

    fn end(&self) -> ([f64; 2], f64) {
        self.at(self.length())
    }

    /// Board-space bounding box `(min, max)`.
    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let (p0, _) = self.at(0.0);
        let (p1, _) = self.end();
        let mut lo = [p0[0].min(p1[0]), p0[1].min(p1[1])];
        let mut hi = [p0[0].max(p1[0]), p0[1].max(p1[1])];
        if let Piece::Arc {
            center,
            radius,
            start_angle,
            sweep,
        } = *self
        {
            for k in 0..4 {
                let axis = k as f64 * PI / 2.0;
                let rel = if sweep >= 0.0 {
                    (axis - start_angle).rem_euclid(2.0 * PI)
                } else {
                    (start_angle - axis).rem_euclid(2.0 * PI)
                };
                if rel <= sweep.abs() {
                    let q = [center[0] + radius * axis.cos(), center[1] + radius * axis.sin()];
                    lo = [lo[0].min(q[0]), lo[1].min(q[1])];
                    hi = [hi[0].max(q[0]), hi[1].max(q[1])];
                }
            }
        }
        (lo, hi)
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// A centerline point sampled at a fixed arclength spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub point: [f64; 2],
    /// Tangent direction, radians.
    pub tangent: f64,
}

/// A validated closed loop on the board.
#[derive(Debug, Clone)]
pub struct Track {
    board_size: f64,
    line_width: f64,
    pieces: Vec<Piece>,
    length: f64,
    samples: Vec<TrackSample>,
    sample_spacing: f64,
}

/// Target spacing of the centerline samples used by the virtual cameras.
pub const SAMPLE_SPACING: f64 = 0.002;

impl Track {
    pub fn from_spec(spec: &TrackSpec) -> Result<Track, TrackError> {
        if !(spec.board_size.is_finite() && spec.board_size > 0.0) {
            return Err(TrackError::InvalidParameter(format!(
                "board_size must be positive, got {}",
                spec.board_size
            )));
        }
        if !(spec.line_width.is_finite() && spec.line_width > 0.0) {
            return Err(TrackError::InvalidParameter(format!(
                "line_width must be positive, got {}",
                spec.line_width
            )));
        }
        if spec.segments.is_empty() {
            return Err(TrackError::Empty);
        }
        let mut pos = [spec.start.x, spec.start.y];
        let mut heading = spec.start.heading_rad();
        let mut pieces = Vec::with_capacity(spec.segments.len());
        for (index, seg) in spec.segments.iter().enumerate() {
            let piece = match *seg {
                SegmentSpec::Straight { length } => {
                    if !(length.is_finite() && length > 0.0) {
                        return Err(TrackError::InvalidSegment {
                            index,
                            reason: format!("straight length must be positive, got {length}"),
                        });
                    }
                    Piece::Line {
                        start: pos,
                        dir: [heading.cos(), heading.sin()],
                        length,
                    }
                }
                SegmentSpec::Arc { radius, sweep_deg } => {
                    if !(radius.is_finite() && radius > 0.0) {
                        return Err(TrackError::InvalidSegment {
                            index,
                            reason: format!("arc radius must be positive, got {radius}"),
                        });
                    }
                    if !(sweep_deg.is_finite() && sweep_deg != 0.0 && sweep_deg.abs() <= 360.0) {
                        return Err(TrackError::InvalidSegment {
                            index,
                            reason: format!("arc sweep must be in [-360, 360] and nonzero, got {sweep_deg}"),
                        });
                    }
                    let sign = sweep_deg.signum();
                    // center lies to the left for counterclockwise arcs
                    let normal = heading + sign * PI / 2.0;
                    let center = [pos[0] + radius * normal.cos(), pos[1] + radius * normal.sin()];
                    Piece::Arc {
                        center,
                        radius,
                        start_angle: (pos[1] - center[1]).atan2(pos[0] - center[0]),
                        sweep: sweep_deg.to_radians(),
                    }
                }
            };
            let (lo, hi) = piece.bounds();
            let b = spec.board_size;
            if lo[0] < -CLOSE_TOL || lo[1] < -CLOSE_TOL || hi[0] > b + CLOSE_TOL || hi[1] > b + CLOSE_TOL {
                return Err(TrackError::OutsideBoard { index, board_size: b });
            }
            let (end, tangent) = piece.end();
            pos = end;
            heading = tangent;
            pieces.push(piece);
        }
        let gap = dist2(pos, [spec.start.x, spec.start.y]).sqrt();
        if gap > CLOSE_TOL {
            return Err(TrackError::NotClosed { gap });
        }
        let length: f64 = pieces.iter().map(Piece::length).sum();
        let n = (length / SAMPLE_SPACING).ceil().max(1.0) as usize;
        let spacing = length / n as f64;
        let mut samples = Vec::with_capacity(n);
        let mut piece_idx = 0;
        let mut piece_start = 0.0;
        for i in 0..n {
            let s = i as f64 * spacing;
            while piece_idx + 1 < pieces.len() && s >= piece_start + pieces[piece_idx].length() {
                piece_start += pieces[piece_idx].length();
                piece_idx += 1;
            }
            let (point, tangent) = pieces[piece_idx].at(s - piece_start);
            samples.push(TrackSample { point, tangent });
        }
        Ok(Track {
            board_size: spec.board_size,
            line_width: spec.line_width,
            pieces,
            length,
            samples,
            sample_spacing: spacing,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn board_size(&self) -> f64 {
        self.board_size
    }

    pub fn line_width(&self) -> f64 {
        self.line_width
    }

    /// Centerline samples in loop order.
    pub fn samples(&self) -> &[TrackSample] {
        &self.samples
    }

    pub fn sample_spacing(&self) -> f64 {
        self.sample_spacing
    }

    /// Nearest centerline point and the tangent (radians) there.
    pub fn nearest(&self, p: [f64; 2]) -> ([f64; 2], f64) {
        let mut best = self.pieces[0].nearest(p);
        let mut best_d = dist2(p, best.0);
        for piece in &self.pieces[1..] {
            let cand = piece.nearest(p);
            let d = dist2(p, cand.0);
            if d < best_d {
                best = cand;
                best_d = d;
            }
        }
        best
    }
}

/// Signed distance from the pose to the nearest centerline point; positive
/// when the vehicle is left of the track direction.
pub fn lateral_deviation(track: &Track, pose: &Pose) -> f64 {
    let p = [pose.x, pose.y];
    let (q, tangent) = track.nearest(p);
    let d = dist2(p, q).sqrt();
    let cross = tangent.cos() * (p[1] - q[1]) - tangent.sin() * (p[0] - q[0]);
    if cross < 0.0 {
        -d
    } else {
        d
    }
}

/// Drive and body parameters of the skid-steer vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Distance between the wheels, meters.
    pub wheel_separation: f64,
    /// Ground speed per applied power unit, m/s.
    pub power_to_speed: f64,
    pub max_power: f64,
    pub nominal_power: f64,
    /// Distance between the green and orange marker centers, meters.
    pub marker_spacing: f64,
    /// Body footprint behind the front edge, used for line occlusion.
    pub body_length: f64,
    pub body_width: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let nominal_power = 100.0 / 3.0;
        VehicleParams {
            wheel_separation: 0.12,
            power_to_speed: 0.25 / nominal_power,
            max_power: 255.0,
            nominal_power,
            marker_spacing: 0.08,
            body_length: 0.16,
            body_width: 0.10,
        }
    }
}

impl VehicleParams {
    pub fn nominal_speed(&self) -> f64 {
        self.power_to_speed * self.nominal_power
    }

    /// Front edge of the vehicle: one marker spacing ahead of the reference point.
    pub fn front_offset(&self) -> f64 {
        self.marker_spacing
    }
}

/// Advances the pose by `dt` seconds under constant wheel powers using exact
/// arc integration. Powers are clamped to `[0, max_power]`.
pub fn step_vehicle(pose: &Pose, left: f64, right: f64, dt: f64, params: &VehicleParams) -> Pose {
    let l = left.clamp(0.0, params.max_power);
    let r = right.clamp(0.0, params.max_power);
    let v = params.power_to_speed * (l + r) / 2.0;
    let omega = params.power_to_speed * (r - l) / params.wheel_separation;
    if v == 0.0 && omega == 0.0 {
        return *pose;
    }
    let th = pose.heading_rad();
    if r == l {
        return Pose {
            x: pose.x + v * dt * th.cos(),
            y: pose.y + v * dt * th.sin(),
            heading: pose.heading,
        };
    }
    let radius = v / omega;
    let th2 = th + omega * dt;
    Pose::new(
        pose.x + radius * (th2.sin() - th.sin()),
        pose.y - radius * (th2.cos() - th.cos()),
        pose.heading + (omega * dt).to_degrees(),
    )
}
