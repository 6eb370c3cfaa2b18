//! Real-socket transport. These tests pace to the wall clock, so they live
//! in their own binary and take a lock to avoid running concurrently.

mod common;

use common::scenario_path;
use horus_core::harness::{load_scenario, run_udp, run_with_seed, Scenario, UdpOptions};
use std::sync::Mutex;

static WALL_CLOCK: Mutex<()> = Mutex::new(());

fn short(name: &str, seconds: f64) -> Scenario {
    let mut s = load_scenario(&scenario_path(name)).unwrap();
    s.duration = seconds;
    s
}

#[test]
fn udp_transport_drives_the_vehicle() {
    let _guard = WALL_CLOCK.lock().unwrap_or_else(|e| e.into_inner());
    let s = short("baseline_onboard.toml", 3.0);
    let r = run_udp(
        &s,
        1,
        UdpOptions {
            time_scale: 4.0,
            fixed_ports: false,
        },
    )
    .expect("loopback sockets");
    assert!(r.counters.datagrams_delivered > 10, "{:?}", r.counters);
    assert!(r.completed());
}

#[test]
fn udp_and_simulated_summaries_agree() {
    let _guard = WALL_CLOCK.lock().unwrap_or_else(|e| e.into_inner());
    let s = short("baseline_onboard.toml", 40.0);
    let sim = run_with_seed(&s, 1);
    let udp = run_udp(
        &s,
        1,
        UdpOptions {
            time_scale: 8.0,
            fixed_ports: false,
        },
    )
    .expect("loopback sockets");
    assert!(sim.completed() && udp.completed());
    let (a, b) = (
        sim.correction_summary().unwrap().mean_abs,
        udp.correction_summary().unwrap().mean_abs,
    );
    assert!((a - b).abs() / a < 0.05, "mean |correction| sim {a} udp {b}");
}
