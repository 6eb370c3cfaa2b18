//! Virtual cameras.
//!
//! Instead of segmenting pixels, each camera projects the vehicle markers and
//! the visible part of the track centerline through a scale-and-translate map
//! into image coordinates (y grows downward). Everything downstream of the
//! blob extraction is computed exactly as a vision pipeline would: robot
//! angle from the marker pair, the folded best-fit-rectangle angle of the
//! line, its quadrant disambiguation, the direction and position fixes, the
//! on-vehicle offset and the area-based confidence.

use crate::world::{normalize_deg, Pose, Track, VehicleParams};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraKind {
    Onboard,
    Infrastructure,
}

pub const DEFAULT_CALIBRATED_RANGE: f64 = 1.0;

/// Axis-aligned board-space rectangle, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("degenerate marker pair")]
    DegenerateMarkers,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

/// Geometry and noise model of one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub kind: CameraKind,
    pub image_width: u32,
    pub image_height: u32,
    pub pixels_per_meter: f64,
    /// Infrastructure: half-size of the look-ahead window. Onboard: rows of
    /// the bottom strip.
    pub crop_size: u32,
    /// Board region this camera can see. `None` is the whole board.
    pub coverage: Option<Rect>,
    /// Board regions blocked from view inside the coverage.
    pub occluders: Vec<Rect>,
    /// Infrastructure: board position of the image's top-left corner.
    pub origin: [f64; 2],
    /// Infrastructure: board point below the camera. Objects farther from it
    /// cover fewer pixels, see [`CameraModel::resolution_factor`].
    pub mount: Option<[f64; 2]>,
    /// Distance from the mount up to which `pixels_per_meter` holds, meters.
    pub calibrated_range: f64,
    /// Onboard: distance from the vehicle reference point to the strip center.
    pub look_ahead: f64,
    /// Half-range of the uniform pixel jitter applied to observed centers.
    pub noise_px: f64,
    /// Smallest blob area (px²) that counts as a detection.
    pub min_area: f64,
}

impl CameraModel {
    pub fn onboard() -> Self {
        CameraModel {
            kind: CameraKind::Onboard,
            image_width: 320,
            image_height: 240,
            pixels_per_meter: 1200.0,
            crop_size: 80,
            coverage: None,
            occluders: Vec::new(),
            origin: [0.0, 0.0],
            mount: None,
            calibrated_range: DEFAULT_CALIBRATED_RANGE,
            look_ahead: 0.1,
            noise_px: 2.0,
            min_area: 10.0,
        }
    }

    pub fn infrastructure(origin: [f64; 2], coverage: Option<Rect>) -> Self {
        CameraModel {
            kind: CameraKind::Infrastructure,
            image_width: 1280,
            image_height: 720,
            pixels_per_meter: 500.0,
            crop_size: 75,
            coverage,
            occluders: Vec::new(),
            origin,
            mount: None,
            calibrated_range: DEFAULT_CALIBRATED_RANGE,
            look_ahead: 0.0,
            noise_px: 2.0,
            min_area: 200.0,
        }
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(PerceptionError::InvalidCamera(
                "image dimensions must be positive".into(),
            ));
        }
        let half_min = self.image_width.min(self.image_height) as f64 / 2.0;
        if self.crop_size == 0 || self.crop_size as f64 >= half_min {
            return Err(PerceptionError::InvalidCamera(format!(
                "crop_size {} must be in (0, {half_min})",
                self.crop_size
            )));
        }
        if !(self.pixels_per_meter.is_finite() && self.pixels_per_meter > 0.0) {
            return Err(PerceptionError::InvalidCamera(
                "pixels_per_meter must be positive".into(),
            ));
        }
        if !(self.noise_px.is_finite() && self.noise_px >= 0.0) {
            return Err(PerceptionError::InvalidCamera("noise_px must be non-negative".into()));
        }
        if !(self.min_area.is_finite() && self.min_area >= 0.0) {
            return Err(PerceptionError::InvalidCamera("min_area must be non-negative".into()));
        }
        if let Some(c) = self.coverage {
            if !(c.x_min < c.x_max && c.y_min < c.y_max) {
                return Err(PerceptionError::InvalidCamera("coverage rectangle is empty".into()));
            }
        }
        if !(self.calibrated_range.is_finite() && self.calibrated_range > 0.0) {
            return Err(PerceptionError::InvalidCamera(
                "calibrated_range must be positive".into(),
            ));
        }
        if self.occluders.iter().any(|o| !(o.x_min < o.x_max && o.y_min < o.y_max)) {
            return Err(PerceptionError::InvalidCamera("occluder rectangle is empty".into()));
        }
        Ok(())
    }

    fn covers(&self, p: [f64; 2]) -> bool {
        self.coverage.is_none_or(|c| c.contains(p)) && !self.occluders.iter().any(|o| o.contains(p))
    }

    /// Relative linear resolution at board point `p`: 1 within
    /// `calibrated_range` of the mount, `calibrated_range / d` beyond it.
    /// Always 1 without a mount.
    pub fn resolution_factor(&self, p: [f64; 2]) -> f64 {
        match self.mount {
            None => 1.0,
            Some(m) => (self.calibrated_range / (p[0] - m[0]).hypot(p[1] - m[1])).min(1.0),
        }
    }

    /// Board point to infrastructure image pixels.
    pub fn board_to_image(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.origin[0]) * self.pixels_per_meter,
            (self.origin[1] - p[1]) * self.pixels_per_meter,
        ]
    }

    fn in_image(&self, q: [f64; 2]) -> bool {
        q[0] >= 0.0 && q[1] >= 0.0 && q[0] < self.image_width as f64 && q[1] < self.image_height as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerObservation {
    pub green_center: [f64; 2],
    pub orange_center: [f64; 2],
    pub visible: bool,
}

impl MarkerObservation {
    fn hidden() -> Self {
        MarkerObservation {
            green_center: [-1.0, -1.0],
            orange_center: [-1.0, -1.0],
            visible: false,
        }
    }
}

/// Best-fit rectangle of the line blob inside the look-ahead crop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineBoxObservation {
    /// Rectangle center in crop coordinates.
    pub center: [f64; 2],
    pub width: f64,
    pub height: f64,
    /// Rectangle angle in `[-90, 0]`.
    pub raw_angle: f64,
    pub visible_fraction: f64,
    /// Vehicle front center in crop coordinates (the crop center for
    /// infrastructure cameras).
    pub front_center: [f64; 2],
    pub visible: bool,
}

impl LineBoxObservation {
    fn hidden() -> Self {
        LineBoxObservation {
            center: [-1.0, -1.0],
            width: 0.0,
            height: 0.0,
            raw_angle: 0.0,
            visible_fraction: 0.0,
            front_center: [0.0, 0.0],
            visible: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub markers: MarkerObservation,
    pub line: LineBoxObservation,
}

impl Observation {
    fn hidden() -> Self {
        Observation {
            markers: MarkerObservation::hidden(),
            line: LineBoxObservation::hidden(),
        }
    }
}

fn jitter<R: Rng + ?Sized>(rng: &mut R, amp: f64) -> f64 {
    if amp > 0.0 {
        rng.gen_range(-amp..=amp)
    } else {
        0.0
    }
}

/// Folds a line direction (image math convention, degrees) into the
/// best-fit-rectangle convention: angle in `[-90, 0]` plus width/height
/// ordered so the quadrant guess can recover the direction mod 180.
pub fn fold_line_angle(direction_deg: f64, length: f64, thickness: f64) -> (f64, f64, f64) {
    let phi = direction_deg.rem_euclid(180.0);
    if phi <= 90.0 {
        (-phi, length, thickness)
    } else {
        (90.0 - phi, thickness, length)
    }
}

/// Longest run of consecutive visible samples on the closed loop, as
/// `(start index, run length)`.
fn longest_run(mask: &[bool]) -> Option<(usize, usize)> {
    let n = mask.len();
    if n == 0 || !mask.iter().any(|&m| m) {
        return None;
    }
    if mask.iter().all(|&m| m) {
        return Some((0, n));
    }
    // start scanning right after a hidden sample so wrapped runs stay whole
    let first_hidden = mask.iter().position(|&m| !m).unwrap();
    let mut best: Option<(usize, usize)> = None;
    let mut cur_start = 0;
    let mut cur_len = 0;
    for k in 1..=n {
        let i = (first_hidden + k) % n;
        if mask[i] {
            if cur_len == 0 {
                cur_start = i;
            }
            cur_len += 1;
        } else if cur_len > 0 {
            if best.is_none_or(|(_, l)| cur_len > l) {
                best = Some((cur_start, cur_len));
            }
            cur_len = 0;
        }
    }
    best
}

struct Blob {
    centroid: [f64; 2],
    first: [f64; 2],
    last: [f64; 2],
    length_px: f64,
}

fn extract_blob(track: &Track, ppm: f64, mask: &[bool], project: impl Fn([f64; 2]) -> [f64; 2]) -> Option<Blob> {
    let (start, len) = longest_run(mask)?;
    let samples = track.samples();
    let n = samples.len();
    let mut sum = [0.0, 0.0];
    for k in 0..len {
        let q = project(samples[(start + k) % n].point);
        sum[0] += q[0];
        sum[1] += q[1];
    }
    Some(Blob {
        centroid: [sum[0] / len as f64, sum[1] / len as f64],
        first: project(samples[start].point),
        last: project(samples[(start + len - 1) % n].point),
        length_px: len as f64 * track.sample_spacing() * ppm,
    })
}

/// Projects the vehicle and the look-ahead line into the camera image.
///
/// Noise is drawn from `rng` only when `camera.noise_px > 0`.
pub fn observe<R: Rng + ?Sized>(
    camera: &CameraModel,
    track: &Track,
    pose: &Pose,
    vehicle: &VehicleParams,
    rng: &mut R,
) -> Observation {
    match camera.kind {
        CameraKind::Onboard => observe_onboard(camera, track, pose, rng),
        CameraKind::Infrastructure => observe_infrastructure(camera, track, pose, vehicle, rng),
    }
}

fn observe_onboard<R: Rng + ?Sized>(camera: &CameraModel, track: &Track, pose: &Pose, rng: &mut R) -> Observation {
    if !camera.covers([pose.x, pose.y]) {
        return Observation::hidden();
    }
    let ppm = camera.pixels_per_meter;
    let w = camera.image_width as f64;
    let h = camera.image_height as f64;
    let rows = camera.crop_size as f64;
    let depth = rows / ppm;
    let near = camera.look_ahead - depth / 2.0;
    let far = camera.look_ahead + depth / 2.0;
    let half_width = w / 2.0 / ppm;
    let reach2 = far.abs().max(near.abs()).powi(2) + half_width.powi(2);

    let samples = track.samples();
    let mask: Vec<bool> = samples
        .iter()
        .map(|s| {
            let dx = s.point[0] - pose.x;
            let dy = s.point[1] - pose.y;
            if dx * dx + dy * dy > reach2 {
                return false;
            }
            let (f, l) = pose.to_local(s.point);
            f >= near && f <= far && l.abs() <= half_width && camera.covers(s.point)
        })
        .collect();

    // image x grows to the vehicle's right, image y grows toward the vehicle
    let project = |p: [f64; 2]| {
        let (f, l) = pose.to_local(p);
        [w / 2.0 - l * ppm, h - (f - near) * ppm]
    };
    let markers = MarkerObservation::hidden();
    let Some(blob) = extract_blob(track, ppm, &mask, project) else {
        return Observation {
            markers,
            line: LineBoxObservation::hidden(),
        };
    };
    let thickness = track.line_width() * ppm;
    if blob.length_px * thickness <= camera.min_area {
        return Observation {
            markers,
            line: LineBoxObservation::hidden(),
        };
    }
    let noise = camera.noise_px;
    let first = [blob.first[0] + jitter(rng, noise), blob.first[1] + jitter(rng, noise)];
    let last = [blob.last[0] + jitter(rng, noise), blob.last[1] + jitter(rng, noise)];
    let direction = (-(last[1] - first[1])).atan2(last[0] - first[0]).to_degrees();
    let (raw_angle, width, height) = fold_line_angle(direction, blob.length_px, thickness);
    let crop_top = h - rows;
    let center = [
        blob.centroid[0] + jitter(rng, noise),
        blob.centroid[1] + jitter(rng, noise) - crop_top,
    ];
    Observation {
        markers,
        line: LineBoxObservation {
            center,
            width,
            height,
            raw_angle,
            visible_fraction: (blob.length_px / rows).min(1.0),
            front_center: [w / 2.0, rows],
            visible: true,
        },
    }
}

fn observe_infrastructure<R: Rng + ?Sized>(
    camera: &CameraModel,
    track: &Track,
    pose: &Pose,
    vehicle: &VehicleParams,
    rng: &mut R,
) -> Observation {
    let half = vehicle.marker_spacing / 2.0;
    let green_b = pose.to_board(-half, 0.0);
    let orange_b = pose.to_board(half, 0.0);
    if !camera.covers(green_b) || !camera.covers(orange_b) {
        return Observation::hidden();
    }
    // a distant vehicle spans fewer pixels: same jitter in pixels is a larger
    // error in board units, and the line blob shrinks
    let resolution = camera.resolution_factor([pose.x, pose.y]);
    let noise = camera.noise_px / resolution;
    let g = camera.board_to_image(green_b);
    let o = camera.board_to_image(orange_b);
    let g = [(g[0] + jitter(rng, noise)).round(), (g[1] + jitter(rng, noise)).round()];
    let o = [(o[0] + jitter(rng, noise)).round(), (o[1] + jitter(rng, noise)).round()];
    if !camera.in_image(g) || !camera.in_image(o) {
        return Observation::hidden();
    }
    let markers = MarkerObservation {
        green_center: g,
        orange_center: o,
        visible: true,
    };
    let hidden_line = Observation {
        markers,
        line: LineBoxObservation::hidden(),
    };
    if compute_robot_angle(g, o).is_err() {
        return hidden_line;
    }

    // look-ahead window centered on the front edge, shrunk at image borders
    let crop = camera.crop_size as f64;
    let xdim = camera.image_width as f64;
    let ydim = camera.image_height as f64;
    let box_x = o[0] - (g[0] - o[0]) / 2.0;
    let box_y = o[1] - (g[1] - o[1]) / 2.0;
    let xc = if box_x > xdim - crop {
        xdim - box_x
    } else if box_x < crop {
        box_x
    } else {
        crop
    };
    let yc = if box_y > ydim - crop {
        ydim - box_y
    } else if box_y < crop {
        box_y
    } else {
        crop
    };
    if xc <= 0.0 || yc <= 0.0 {
        return hidden_line;
    }
    let (wx0, wx1, wy0, wy1) = (box_x - xc, box_x + xc, box_y - yc, box_y + yc);

    let ppm = camera.pixels_per_meter;
    let front = vehicle.front_offset();
    let body_half = vehicle.body_width / 2.0;
    let center_b = pose.to_board(front, 0.0);
    let reach2 = ((xc + noise * 2.0).powi(2) + (yc + noise * 2.0).powi(2)) / (ppm * ppm) * 2.0;
    let mask: Vec<bool> = track
        .samples()
        .iter()
        .map(|s| {
            let dx = s.point[0] - center_b[0];
            let dy = s.point[1] - center_b[1];
            if dx * dx + dy * dy > reach2 || !camera.covers(s.point) {
                return false;
            }
            let (f, l) = pose.to_local(s.point);
            if f <= front && f >= front - vehicle.body_length && l.abs() <= body_half {
                return false;
            }
            let q = camera.board_to_image(s.point);
            q[0] >= wx0 && q[0] <= wx1 && q[1] >= wy0 && q[1] <= wy1
        })
        .collect();
    let Some(blob) = extract_blob(track, ppm, &mask, |p| camera.board_to_image(p)) else {
        return hidden_line;
    };
    let thickness = track.line_width() * ppm;
    if blob.length_px * thickness <= camera.min_area {
        return hidden_line;
    }
    let first = [blob.first[0] + jitter(rng, noise), blob.first[1] + jitter(rng, noise)];
    let last = [blob.last[0] + jitter(rng, noise), blob.last[1] + jitter(rng, noise)];
    let direction = (-(last[1] - first[1])).atan2(last[0] - first[0]).to_degrees();
    let (raw_angle, width, height) = fold_line_angle(direction, blob.length_px, thickness);
    let center = [
        blob.centroid[0] + jitter(rng, noise) - wx0,
        blob.centroid[1] + jitter(rng, noise) - wy0,
    ];
    Observation {
        markers,
        line: LineBoxObservation {
            center,
            width,
            height,
            raw_angle,
            visible_fraction: (resolution * blob.length_px / crop).min(1.0),
            front_center: [xc, yc],
            visible: true,
        },
    }
}

/// Heading of the vehicle in the image from the green (rear) marker to the
/// orange (front) marker, degrees in `[0, 360)`.
pub fn compute_robot_angle(green: [f64; 2], orange: [f64; 2]) -> Result<f64, PerceptionError> {
    let [gx, gy] = green;
    let [ox, oy] = orange;
    if gx == ox && gy == oy {
        return Err(PerceptionError::DegenerateMarkers);
    }
    let ang = if gx - ox == 0.0 {
        if gy > oy {
            90.0
        } else {
            270.0
        }
    } else {
        let mut a = ((oy - gy) / (ox - gx)).atan().to_degrees();
        if gx > ox {
            a += 180.0;
        } else if a < 0.0 {
            a += 360.0;
        }
        360.0 - a
    };
    Ok(if ang >= 360.0 { ang - 360.0 } else { ang })
}

/// Maps the `[-90, 0]` rectangle angle to a line direction using the box
/// aspect and the vehicle heading.
#[allow(clippy::manual_range_contains)]
pub fn disambiguate_line_angle(width: f64, height: f64, raw_angle: f64, vehicle_angle: f64) -> f64 {
    if width > height {
        if vehicle_angle > 135.0 {
            180.0 - raw_angle
        } else {
            -raw_angle
        }
    } else if vehicle_angle > 270.0 || vehicle_angle < 45.0 {
        270.0 - raw_angle
    } else {
        90.0 - raw_angle
    }
}

/// Difference between line direction and heading, folded toward `[-90, 90]`.
pub fn direction_fix(line_angle: f64, vehicle_angle: f64) -> f64 {
    let mut d = line_angle - vehicle_angle;
    if d < -300.0 {
        d += 360.0;
    } else if d > 300.0 {
        d -= 360.0;
    }
    if d < -90.0 {
        d += 180.0;
    } else if d > 90.0 {
        d -= 180.0;
    }
    d
}

/// Angle between the heading and the ray from the vehicle front to the line
/// center, folded into `[-90, 90]`. Points are in image coordinates.
pub fn position_fix(front_center: [f64; 2], line_center: [f64; 2], vehicle_angle: f64) -> f64 {
    let [fx, fy] = front_center;
    let [lx, ly] = line_center;
    if fx == lx && fy == ly {
        return 0.0;
    }
    let mut p = if lx - fx == 0.0 {
        if vehicle_angle < 180.0 {
            90.0 - vehicle_angle
        } else {
            270.0 - vehicle_angle
        }
    } else {
        let mut offset = ((fy - ly) / (lx - fx)).atan().to_degrees();
        if offset < 0.0 {
            if vehicle_angle > 225.0 {
                offset += 360.0;
            } else {
                offset += 180.0;
            }
        } else if vehicle_angle > 135.0 && vehicle_angle < 315.0 {
            offset += 180.0;
        }
        offset - vehicle_angle
    };
    if p > 180.0 {
        p -= 360.0;
    } else if p < -180.0 {
        p += 360.0;
    }
    if p < -90.0 {
        p += 180.0;
    } else if p > 90.0 {
        p -= 180.0;
    }
    p
}

/// On-vehicle lateral offset of the line center from the image midline.
pub fn onboard_offset(x_min: f64) -> f64 {
    0.333 * (160.0 - x_min)
}

/// Area-based confidence: 100 at a full view of the line.
pub fn confidence_from_visibility(fraction: f64, _kind: CameraKind) -> f64 {
    (100.0 * fraction.clamp(0.0, 1.0)).round()
}

/// Heading as the infrastructure pipeline derives it, normalized.
pub fn heading_from_markers(markers: &MarkerObservation) -> Option<f64> {
    if !markers.visible {
        return None;
    }
    compute_robot_angle(markers.green_center, markers.orange_center)
        .ok()
        .map(normalize_deg)
}
