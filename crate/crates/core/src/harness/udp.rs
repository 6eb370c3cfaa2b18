//! Real-socket transport: one thread per sensor plus the vehicle node,
//! paced to the wall clock.
//!
//! Physics still advance in fixed ticks on the vehicle thread; sensors read
//! the latest published pose when their frame is due. Channel loss and delay
//! models do not apply here, the loopback network is the channel.

use super::runner::{collect_outages, Recorder, RunResult, SensorRuntime};
use super::scenario::Scenario;
use crate::wire::{SteeringCommand, UdpReceiver, UdpSender, SENSOR_BASE_PORT, VEHICLE_PORT};
use crate::world::{lateral_deviation, step_vehicle, Pose};
use std::collections::{HashMap, VecDeque};
use std::io;
use std::net::{Ipv4Addr, SocketAddr};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UdpOptions {
    /// Simulated seconds per wall-clock second.
    pub time_scale: f64,
    /// Use the fixed ports (vehicle 5000, sensor i at 4000 + i) instead of
    /// ephemeral ones.
    pub fixed_ports: bool,
}

impl Default for UdpOptions {
    fn default() -> Self {
        UdpOptions {
            time_scale: 1.0,
            fixed_ports: false,
        }
    }
}

fn sleep_until(deadline: Instant) {
    let now = Instant::now();
    if deadline > now {
        thread::sleep(deadline - now);
    }
}

pub fn run_udp(scenario: &Scenario, seed: u64, opts: UdpOptions) -> io::Result<RunResult> {
    if !(opts.time_scale.is_finite() && opts.time_scale > 0.0) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "time_scale must be positive",
        ));
    }
    let track = Arc::new(
        scenario
            .build_track()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?,
    );
    let dt = scenario.timestep;
    let localhost = |port: u16| SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    let mut receiver = UdpReceiver::bind(localhost(if opts.fixed_ports { VEHICLE_PORT } else { 0 }))?;
    receiver.set_nonblocking(true)?;
    let vehicle_addr = receiver.local_addr()?;

    let sensors = SensorRuntime::build_all(scenario, seed);
    let mut senders = Vec::with_capacity(sensors.len());
    let mut slot_by_addr = HashMap::new();
    for (i, s) in sensors.iter().enumerate() {
        let port = if opts.fixed_ports {
            SENSOR_BASE_PORT + i as u16
        } else {
            0
        };
        let sender = UdpSender::bind(localhost(port), vehicle_addr)?;
        slot_by_addr.insert(sender.local_addr()?, s.slot);
        senders.push(sender);
    }

    let pose = Arc::new(Mutex::new(scenario.start_pose()));
    let stop = Arc::new(AtomicBool::new(false));
    let start = Instant::now() + Duration::from_millis(20);
    let wall = move |t: f64| start + Duration::from_secs_f64(t / opts.time_scale);

    let mut handles = Vec::new();
    for (mut s, sender) in sensors.into_iter().zip(senders) {
        let track = Arc::clone(&track);
        let pose = Arc::clone(&pose);
        let stop = Arc::clone(&stop);
        let vehicle = scenario.vehicle.clone();
        let duration = scenario.duration;
        handles.push(thread::spawn(move || -> (SensorRuntime, u64) {
            let send = |cmd: &SteeringCommand| {
                if let Err(e) = sender.send(cmd) {
                    log::warn!("sensor send failed: {e}");
                }
            };
            let mut frames = 0;
            // frames are pipelined: capture keeps its rate while earlier
            // commands wait out their latency
            let mut queue: VecDeque<(f64, SteeringCommand)> = VecDeque::new();
            loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let t = s.frame_tick(s.frame, dt) as f64 * dt;
                let capture_due = t < duration;
                match queue.front() {
                    Some(&(due, cmd)) if !capture_due || due <= t => {
                        sleep_until(wall(due));
                        send(&cmd);
                        queue.pop_front();
                        continue;
                    }
                    None if !capture_due => break,
                    _ => {}
                }
                sleep_until(wall(t));
                let p: Pose = *pose.lock().expect("pose lock");
                let frame = s.capture(&track, &p, &vehicle, t);
                if frame.resume_zero {
                    send(&SteeringCommand::ZERO);
                }
                if let Some(cmd) = frame.command {
                    queue.push_back((t + s.spec.latency, cmd));
                }
                frames += 1;
                s.frame += 1;
            }
            (s, frames)
        }));
    }

    let mut rec = Recorder::new(scenario);
    let mut current = scenario.start_pose();
    let total_ticks = (scenario.duration / dt - 1e-9).ceil() as u64;
    let mut end_time = scenario.duration;
    for k in 0..total_ticks {
        let now = k as f64 * dt;
        sleep_until(wall(now));
        while let Some((from, bytes)) = receiver.recv()? {
            match slot_by_addr.get(&from) {
                Some(&slot) => rec.deliver(slot, &bytes, now),
                None => log::warn!("datagram from unknown sender {from}"),
            }
        }
        let dev = lateral_deviation(&track, &current);
        if rec.end_tick(now, dev) {
            end_time = now;
            break;
        }
        let (l, r) = rec.node.applied();
        current = step_vehicle(&current, l, r, dt, &scenario.vehicle);
        *pose.lock().expect("pose lock") = current;
    }
    stop.store(true, Ordering::Relaxed);

    let mut runtimes = Vec::new();
    for h in handles {
        let (s, frames) = h.join().map_err(|_| io::Error::other("sensor thread panicked"))?;
        rec.counters.frames += frames;
        runtimes.push(s);
    }
    rec.counters.datagrams_sent = rec.counters.frames;
    Ok(RunResult {
        name: scenario.name.clone(),
        seed,
        duration: scenario.duration,
        end_time,
        crash_time: rec.crash_time,
        final_pose: current,
        drive_log: rec.log,
        deviation: rec.deviation,
        correction: rec.correction,
        position_error: rec.position_error,
        outages: collect_outages(&runtimes, end_time),
        counters: rec.counters,
        post_outage_window: scenario.post_outage_window,
    })
}
