//! Per-sensor PID with an exponentially decayed integral, and the
//! observation-to-command step each sensor runs per frame.

use crate::perception::{
    compute_robot_angle, confidence_from_visibility, direction_fix, disambiguate_line_angle, onboard_offset,
    position_fix, CameraKind, Observation,
};
use crate::wire::SteeringCommand;
use serde::{Deserialize, Serialize};

/// Integral decay applied before each new error is added.
pub const DEFAULT_DECAY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    /// Gains of the on-vehicle camera controller.
    pub const ONBOARD: PidGains = PidGains {
        kp: 1.5,
        ki: 0.15,
        kd: 4.5,
    };
    /// Gains of the infrastructure camera controller.
    pub const INFRASTRUCTURE: PidGains = PidGains {
        kp: 1.0,
        ki: 0.02,
        kd: 0.5,
    };

    pub fn for_kind(kind: CameraKind) -> Self {
        match kind {
            CameraKind::Onboard => Self::ONBOARD,
            CameraKind::Infrastructure => Self::INFRASTRUCTURE,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub last_error: f64,
    pub decay: f64,
}

impl Default for PidState {
    fn default() -> Self {
        PidState::with_decay(DEFAULT_DECAY)
    }
}

impl PidState {
    pub fn with_decay(decay: f64) -> Self {
        assert!((0.0..1.0).contains(&decay), "decay must be in [0, 1)");
        PidState {
            integral: 0.0,
            last_error: 0.0,
            decay,
        }
    }
}

/// Result of one controller step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidOutput {
    pub correction: f64,
    pub integral: f64,
    pub derivative: f64,
}

/// One discrete PID step. The integral is updated before it is used; the
/// derivative is the error difference unless an externally measured one is
/// supplied.
pub fn pid_update(
    state: &PidState,
    gains: &PidGains,
    error: f64,
    external_derivative: Option<f64>,
) -> (PidState, PidOutput) {
    let integral = error + state.decay * state.integral;
    let derivative = external_derivative.unwrap_or(error - state.last_error);
    let correction = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    (
        PidState {
            integral,
            last_error: error,
            decay: state.decay,
        },
        PidOutput {
            correction,
            integral,
            derivative,
        },
    )
}

/// `(trunc(100 - c), trunc(100 + c))`.
pub fn commands_from_correction(correction: f64) -> (f64, f64) {
    ((100.0 - correction).trunc(), (100.0 + correction).trunc())
}

/// Turns one camera observation into a steering command, advancing the PID
/// state. A frame without a usable view produces a zero-report and leaves
/// the state untouched.
pub fn sensor_tick(
    kind: CameraKind,
    observation: &Observation,
    state: &PidState,
    gains: &PidGains,
) -> (PidState, SteeringCommand) {
    let line = &observation.line;
    if !line.visible {
        return (*state, SteeringCommand::ZERO);
    }
    let (error, external) = match kind {
        CameraKind::Onboard => (onboard_offset(line.center[0]), None),
        CameraKind::Infrastructure => {
            let m = &observation.markers;
            if !m.visible {
                return (*state, SteeringCommand::ZERO);
            }
            let Ok(ang) = compute_robot_angle(m.green_center, m.orange_center) else {
                return (*state, SteeringCommand::ZERO);
            };
            let line_angle = disambiguate_line_angle(line.width, line.height, line.raw_angle, ang);
            let d_fix = direction_fix(line_angle, ang);
            let p_fix = position_fix(line.front_center, line.center, ang);
            (p_fix, Some(d_fix))
        }
    };
    let (next, out) = pid_update(state, gains, error, external);
    let (left, right) = commands_from_correction(out.correction);
    (
        next,
        SteeringCommand {
            left,
            right,
            confidence: confidence_from_visibility(line.visible_fraction, kind),
            p: error,
            i: out.integral,
            d: out.derivative,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{LineBoxObservation, MarkerObservation};
    use approx::assert_abs_diff_eq;

    #[test]
    fn proportional_only() {
        let gains = PidGains {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
        };
        let (_, out) = pid_update(&PidState::default(), &gains, 7.0, None);
        assert_eq!(out.correction, 7.0);
    }

    #[test]
    fn onboard_gains_first_step() {
        let (state, out) = pid_update(&PidState::default(), &PidGains::ONBOARD, 10.0, None);
        assert_eq!(out.integral, 10.0);
        assert_eq!(out.derivative, 10.0);
        assert_abs_diff_eq!(out.correction, 61.5, epsilon = 1e-12);
        assert_eq!(state.last_error, 10.0);
    }

    #[test]
    fn integral_converges_to_geometric_limit() {
        let gains = PidGains {
            kp: 0.0,
            ki: 1.0,
            kd: 0.0,
        };
        let mut state = PidState::default();
        let mut last = 0.0;
        for n in 1..=220 {
            let (s, out) = pid_update(&state, &gains, 1.0, None);
            state = s;
            last = out.correction;
            if n == 200 {
                assert_abs_diff_eq!(last, 10.0 * (1.0 - 0.9f64.powi(200)), epsilon = 1e-9);
            }
        }
        // 10·0.9^n drops below 1e-9 only from n = 219 on
        assert_abs_diff_eq!(last, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn correction_to_commands() {
        assert_eq!(commands_from_correction(0.0), (100.0, 100.0));
        assert_eq!(commands_from_correction(61.5), (38.0, 161.0));
        assert_eq!(commands_from_correction(-25.0), (125.0, 75.0));
    }

    fn visible_line(center: [f64; 2]) -> LineBoxObservation {
        LineBoxObservation {
            center,
            width: 80.0,
            height: 32.0,
            raw_angle: 0.0,
            visible_fraction: 1.0,
            front_center: [160.0, 80.0],
            visible: true,
        }
    }

    #[test]
    fn invisible_frame_is_zero_report_and_keeps_state() {
        let state = PidState {
            integral: 4.0,
            last_error: 2.0,
            decay: 0.9,
        };
        let obs = Observation {
            markers: MarkerObservation {
                green_center: [0.0; 2],
                orange_center: [0.0; 2],
                visible: false,
            },
            line: LineBoxObservation {
                visible: false,
                ..visible_line([0.0, 0.0])
            },
        };
        let (next, cmd) = sensor_tick(CameraKind::Onboard, &obs, &state, &PidGains::ONBOARD);
        assert!(cmd.is_zero_report());
        assert_eq!(next, state);
    }

    #[test]
    fn onboard_centered_line() {
        let obs = Observation {
            markers: MarkerObservation {
                green_center: [0.0; 2],
                orange_center: [0.0; 2],
                visible: false,
            },
            line: visible_line([160.0, 40.0]),
        };
        let (_, cmd) = sensor_tick(CameraKind::Onboard, &obs, &PidState::default(), &PidGains::ONBOARD);
        assert_eq!(cmd, SteeringCommand::from_fields([100.0, 100.0, 100.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn infrastructure_gains_with_external_derivative() {
        let (_, out) = pid_update(&PidState::default(), &PidGains::INFRASTRUCTURE, 10.0, Some(4.0));
        assert_abs_diff_eq!(out.correction, 12.2, epsilon = 1e-12);
        assert_eq!(commands_from_correction(out.correction), (87.0, 112.0));
    }
}
