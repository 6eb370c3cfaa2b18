//! Independent reference implementations of the geometry and fusion rules. They
//! deliberately keep a literal branch layout instead of calling into the
//! library.
#![allow(dead_code, clippy::assign_op_pattern, clippy::manual_range_contains)]

use horus_core::wire::SteeringCommand;

/// ComputeRobotAngle as listed, without any output normalization.
pub fn robot_angle_oracle(gx: f64, gy: f64, ox: f64, oy: f64) -> f64 {
    let mut ang;
    if (gx - ox) == 0.0 {
        if gy > oy {
            ang = 90.0;
        } else {
            ang = 270.0;
        }
    } else {
        ang = 180.0 / std::f64::consts::PI * ((oy - gy) / (ox - gx)).atan();
        if gx > ox {
            ang = 180.0 + ang;
        } else if ang < 0.0 {
            ang = 360.0 + ang;
        }
        ang = 360.0 - ang;
    }
    ang
}

/// Line-angle branch on box aspect and heading.
pub fn line_angle_oracle(w: f64, h: f64, lineang: f64, ang: f64) -> f64 {
    if w > h {
        if ang > 135.0 {
            180.0 - lineang
        } else {
            -lineang
        }
    } else if ang > 270.0 || ang < 45.0 {
        270.0 - lineang
    } else {
        90.0 - lineang
    }
}

pub fn d_fix_oracle(lineang: f64, ang: f64) -> f64 {
    let mut d = lineang - ang;
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

/// P_fix with the crop-center x used for the vertical test. Returns `None`
/// for coincident points, which the reference rule leaves undefined.
pub fn p_fix_oracle(xcrop: f64, ycrop: f64, x_min: f64, y_min: f64, ang: f64) -> Option<f64> {
    if x_min == xcrop && y_min == ycrop {
        return None;
    }
    let mut p;
    if (x_min - xcrop) == 0.0 {
        if ang < 180.0 {
            p = 90.0 - ang;
        } else {
            p = 270.0 - ang;
        }
    } else {
        let mut temp = 180.0 / std::f64::consts::PI * ((ycrop - y_min) / (x_min - xcrop)).atan();
        if temp < 0.0 {
            if ang > 225.0 {
                temp += 360.0;
            } else {
                temp += 180.0;
            }
        } else if 135.0 < ang && ang < 315.0 {
            temp += 180.0;
        }
        p = temp - ang;
    }
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
    Some(p)
}

/// Brute-force confidence-weighted average over stored (scaled) commands.
pub fn weighted_oracle(cmds: &[SteeringCommand]) -> Option<(f64, f64)> {
    let total: f64 = cmds.iter().map(|c| c.confidence).sum();
    if total == 0.0 {
        return None;
    }
    let l: f64 = cmds.iter().map(|c| c.confidence * c.left).sum::<f64>() / total;
    let r: f64 = cmds.iter().map(|c| c.confidence * c.right).sum::<f64>() / total;
    Some((l, r))
}

/// Plain mean over active sources.
pub fn active_mean_oracle(cmds: &[SteeringCommand]) -> Option<(f64, f64)> {
    let active: Vec<_> = cmds.iter().filter(|c| c.left > 0.0 || c.right > 0.0).collect();
    if active.is_empty() {
        return None;
    }
    let n = active.len() as f64;
    Some((
        active.iter().map(|c| c.left).sum::<f64>() / n,
        active.iter().map(|c| c.right).sum::<f64>() / n,
    ))
}

/// Latest index holding the maximum positive confidence.
pub fn max_source_oracle(confidences: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &c) in confidences.iter().enumerate() {
        if c > 0.0 && best.is_none_or(|b| c >= confidences[b]) {
            best = Some(i);
        }
    }
    best
}

/// Closed form of the decayed integral under a constant error.
pub fn geometric_integral(error: f64, decay: f64, steps: i32) -> f64 {
    error * (1.0 - decay.powi(steps)) / (1.0 - decay)
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}
