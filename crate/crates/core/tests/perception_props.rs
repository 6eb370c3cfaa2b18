mod common;

use common::{d_fix_oracle, line_angle_oracle, p_fix_oracle, robot_angle_oracle};
use horus_core::perception::{
    compute_robot_angle, direction_fix, disambiguate_line_angle, fold_line_angle, position_fix, PerceptionError,
};
use proptest::prelude::*;

fn wrap_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn congruent(a: f64, b: f64, modulus: f64) -> bool {
    let r = (a - b).rem_euclid(modulus);
    r < 1e-9 || modulus - r < 1e-9
}

#[test]
fn axis_aligned_headings() {
    // image y grows downward, so the orange marker above the green one is 90
    assert_eq!(compute_robot_angle([10.0, 10.0], [20.0, 10.0]).unwrap(), 0.0);
    assert_eq!(compute_robot_angle([10.0, 20.0], [10.0, 10.0]).unwrap(), 90.0);
    assert_eq!(compute_robot_angle([20.0, 10.0], [10.0, 10.0]).unwrap(), 180.0);
    assert_eq!(compute_robot_angle([10.0, 10.0], [10.0, 20.0]).unwrap(), 270.0);
    assert_eq!(
        compute_robot_angle([5.0, 5.0], [5.0, 5.0]),
        Err(PerceptionError::DegenerateMarkers)
    );
}

#[test]
fn direction_fix_leaves_ninety_for_some_boxes() {
    // a tall box seen at heading 0 yields line angle 300; the rule only
    // folds past +-300 and +-90 once, so the result is 120
    let line = disambiguate_line_angle(10.0, 40.0, -30.0, 0.0);
    assert_eq!(line, 300.0);
    assert_eq!(direction_fix(line, 0.0), 120.0);
    assert_eq!(d_fix_oracle(line, 0.0), 120.0);
}

#[test]
fn coincident_points_give_zero_position_fix() {
    assert_eq!(position_fix([160.0, 80.0], [160.0, 80.0], 37.0), 0.0);
    assert_eq!(p_fix_oracle(160.0, 80.0, 160.0, 80.0, 37.0), None);
}

proptest! {
    #[test]
    fn robot_angle_matches_oracle(gx in 0.0..320.0f64, gy in 0.0..240.0f64, ox in 0.0..320.0f64, oy in 0.0..240.0f64) {
        prop_assume!((gx, gy) != (ox, oy));
        let got = compute_robot_angle([gx, gy], [ox, oy]).unwrap();
        prop_assert!(wrap_diff(got, robot_angle_oracle(gx, gy, ox, oy)) <= 1e-9);
    }

    #[test]
    fn robot_angle_in_range_and_reverses_by_180(gx in -500i32..500, gy in -500i32..500, ox in -500i32..500, oy in -500i32..500) {
        let (g, o) = ([gx as f64, gy as f64], [ox as f64, oy as f64]);
        prop_assume!(g != o);
        let fwd = compute_robot_angle(g, o).unwrap();
        let back = compute_robot_angle(o, g).unwrap();
        prop_assert!((0.0..360.0).contains(&fwd));
        prop_assert!((wrap_diff(fwd, back) - 180.0).abs() < 1e-9);
    }

    #[test]
    fn position_fix_stays_within_ninety(fx in 0.0..320.0f64, fy in 0.0..240.0f64, lx in 0.0..320.0f64, ly in 0.0..240.0f64, ang in 0.0..360.0f64) {
        let p = position_fix([fx, fy], [lx, ly], ang);
        prop_assert!((-90.0..=90.0).contains(&p), "{p}");
        if let Some(want) = p_fix_oracle(fx, fy, lx, ly, ang) {
            prop_assert!((p - want).abs() <= 1e-9);
        }
    }

    #[test]
    fn folded_line_recovers_direction_mod_180(dir in -720.0..720.0f64, len in 20.0..200.0f64, ratio in 0.05..0.9f64, ang in 0.0..360.0f64) {
        let (raw, w, h) = fold_line_angle(dir, len, len * ratio);
        prop_assert!((-90.0..=0.0).contains(&raw));
        let line = disambiguate_line_angle(w, h, raw, ang);
        prop_assert_eq!(line, line_angle_oracle(w, h, raw, ang));
        prop_assert!(congruent(line, dir, 180.0), "{line} vs {dir}");
    }

    #[test]
    fn direction_fix_is_congruent_and_bounded(line in -90.0..360.0f64, ang in 0.0..360.0f64) {
        let d = direction_fix(line, ang);
        prop_assert!(congruent(d, line - ang, 180.0));
        prop_assert!(d.abs() <= 180.0);
        prop_assert_eq!(d, d_fix_oracle(line, ang));
    }
}
