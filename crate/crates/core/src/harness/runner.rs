//! The fixed-timestep experiment loop and its recorded artifacts.

use super::scenario::{Scenario, SensorSpec};
use crate::control::{sensor_tick, PidState};
use crate::faults::{gate, OutageReport, OutageSchedule};
use crate::fusion::{SourceRegistry, VehicleNode};
use crate::metrics::{correction_metric, post_outage_window, summarize, CrashDetector, RunSummary, SampleSeries};
use crate::perception::{observe, CameraKind};
use crate::wire::{decode_datagram, encode_command, ChannelModel, SimChannel, SteeringCommand};
use crate::world::{lateral_deviation, step_vehicle, Pose, Track};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

const TIME_EPS: f64 = 1e-9;

/// Stable seed derivation: splitmix64 over the parent seed, a tag and an index.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let mut h = mix(seed);
    for b in tag.bytes() {
        h = mix(h ^ b as u64);
    }
    mix(h ^ mix(index))
}

/// Drive-log slot of each sensor: the onboard camera is slot 0, infrastructure
/// cameras follow in scenario order.
pub fn source_slots(sensors: &[SensorSpec]) -> Vec<usize> {
    let mut next_infra = 1;
    sensors
        .iter()
        .map(|s| match s.kind {
            CameraKind::Onboard => 0,
            CameraKind::Infrastructure => {
                next_infra += 1;
                next_infra - 1
            }
        })
        .collect()
}

pub fn registry_for(sensors: &[SensorSpec]) -> SourceRegistry {
    let infra = sensors.iter().filter(|s| s.kind == CameraKind::Infrastructure).count();
    SourceRegistry::standard(infra)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RunCounters {
    pub ticks: u64,
    pub frames: u64,
    pub gated_frames: u64,
    pub datagrams_sent: u64,
    pub datagrams_dropped: u64,
    pub datagrams_delivered: u64,
    pub malformed: u64,
    pub degenerate_fusions: u64,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub name: String,
    pub seed: u64,
    pub duration: f64,
    /// Simulated time at which the run stopped.
    pub end_time: f64,
    pub crash_time: Option<f64>,
    pub final_pose: Pose,
    pub drive_log: Vec<String>,
    pub deviation: SampleSeries,
    pub correction: SampleSeries,
    /// Reported position error per source column (`pi`, `cam0`, ...).
    pub position_error: BTreeMap<String, SampleSeries>,
    /// `(sensor index, start, end)` of every outage window in the run.
    pub outages: Vec<(usize, f64, f64)>,
    pub counters: RunCounters,
    pub post_outage_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub name: String,
    pub seed: u64,
    pub duration: f64,
    pub end_time: f64,
    pub completed: bool,
    pub crash_time: Option<f64>,
    pub samples: usize,
    pub deviation: Option<RunSummary>,
    pub correction: Option<RunSummary>,
    pub post_outage_deviation: Option<RunSummary>,
    pub post_outage_correction: Option<RunSummary>,
    pub position_error: BTreeMap<String, Option<RunSummary>>,
    pub counters: RunCounters,
}

impl RunResult {
    pub fn completed(&self) -> bool {
        self.crash_time.is_none()
    }

    /// Sorted, de-duplicated outage end times within the run.
    pub fn outage_ends(&self) -> Vec<f64> {
        let mut ends: Vec<f64> = self
            .outages
            .iter()
            .map(|o| o.2)
            .filter(|&e| e <= self.end_time + TIME_EPS)
            .collect();
        ends.sort_by(f64::total_cmp);
        ends.dedup_by(|a, b| (*a - *b).abs() < TIME_EPS);
        ends
    }

    fn with_crash(mut s: RunSummary, crash: Option<f64>) -> RunSummary {
        s.crash_time = crash;
        s
    }

    pub fn deviation_summary(&self) -> Option<RunSummary> {
        summarize(&self.deviation)
            .ok()
            .map(|s| Self::with_crash(s, self.crash_time))
    }

    pub fn correction_summary(&self) -> Option<RunSummary> {
        summarize(&self.correction)
            .ok()
            .map(|s| Self::with_crash(s, self.crash_time))
    }

    pub fn post_outage_deviation(&self) -> Option<RunSummary> {
        let w = post_outage_window(&self.deviation, &self.outage_ends(), self.post_outage_window);
        summarize(&w).ok().map(|s| Self::with_crash(s, self.crash_time))
    }

    pub fn post_outage_correction(&self) -> Option<RunSummary> {
        let w = post_outage_window(&self.correction, &self.outage_ends(), self.post_outage_window);
        summarize(&w).ok().map(|s| Self::with_crash(s, self.crash_time))
    }

    pub fn report(&self) -> SummaryReport {
        SummaryReport {
            name: self.name.clone(),
            seed: self.seed,
            duration: self.duration,
            end_time: self.end_time,
            completed: self.completed(),
            crash_time: self.crash_time,
            samples: self.deviation.len(),
            deviation: self.deviation_summary(),
            correction: self.correction_summary(),
            post_outage_deviation: self.post_outage_deviation(),
            post_outage_correction: self.post_outage_correction(),
            position_error: self
                .position_error
                .iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        summarize(v).ok().map(|s| Self::with_crash(s, self.crash_time)),
                    )
                })
                .collect(),
            counters: self.counters,
        }
    }

    pub fn drive_log_csv(&self) -> String {
        let mut s = String::new();
        for line in &self.drive_log {
            s.push_str(line);
            s.push('\n');
        }
        s
    }

    pub fn outages_csv(&self) -> String {
        let mut s = String::from("sensor,start,end\n");
        for (i, a, b) in &self.outages {
            let _ = writeln!(s, "{i},{a:.4},{b:.4}");
        }
        s
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report()).expect("summary serializes");
        s.push('\n');
        s
    }

    /// Writes the CSV series and `summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("drive_log.csv"), self.drive_log_csv())?;
        std::fs::write(dir.join("deviation.csv"), self.deviation.to_csv("deviation_m"))?;
        std::fs::write(dir.join("correction.csv"), self.correction.to_csv("correction"))?;
        for (name, series) in &self.position_error {
            std::fs::write(dir.join(format!("position_error_{name}.csv")), series.to_csv("p"))?;
        }
        std::fs::write(dir.join("outages.csv"), self.outages_csv())?;
        std::fs::write(dir.join("summary.json"), self.summary_json())?;
        Ok(())
    }
}

/// Vehicle-side bookkeeping shared by the simulated and UDP transports.
pub(crate) struct Recorder {
    pub node: VehicleNode,
    pub log: Vec<String>,
    pub deviation: SampleSeries,
    pub correction: SampleSeries,
    pub position_error: BTreeMap<String, SampleSeries>,
    pub crash: Option<CrashDetector>,
    pub crash_time: Option<f64>,
    pub counters: RunCounters,
    drove_this_tick: bool,
}

impl Recorder {
    pub fn new(scenario: &Scenario) -> Self {
        let node = VehicleNode::new(registry_for(&scenario.sensors), scenario.fusion).with_ttl(scenario.ttl);
        let log = vec![node.header()];
        let mut position_error = BTreeMap::new();
        let slots = source_slots(&scenario.sensors);
        for &slot in &slots {
            let name = node.registry().slots()[slot].name.clone();
            position_error.insert(name, SampleSeries::new());
        }
        Recorder {
            node,
            log,
            deviation: SampleSeries::new(),
            correction: SampleSeries::new(),
            position_error,
            crash: scenario
                .crash
                .enabled
                .then(|| CrashDetector::new(scenario.crash.threshold, scenario.crash.hold)),
            crash_time: None,
            counters: RunCounters::default(),
            drove_this_tick: false,
        }
    }

    pub fn deliver(&mut self, slot: usize, bytes: &[u8], now: f64) {
        self.counters.datagrams_delivered += 1;
        match decode_datagram(bytes) {
            Ok(cmd) => {
                if !self.node.ingest(slot, &cmd, now) {
                    return;
                }
                if !cmd.is_zero_report() {
                    let name = &self.node.registry().slots()[slot].name;
                    if let Some(series) = self.position_error.get_mut(name) {
                        if series.times.last().is_none_or(|&t| now > t) {
                            let _ = series.push(now, cmd.p);
                        }
                    }
                }
                let out = self.node.drive_tick(now);
                if out.degenerate {
                    self.counters.degenerate_fusions += 1;
                }
                self.log.push(out.row);
                self.drove_this_tick = true;
            }
            Err(e) => {
                log::debug!("malformed datagram from slot {slot}: {e}");
                self.counters.malformed += 1;
                self.log.push(self.node.malformed_row(now));
            }
        }
    }

    /// Closes a tick: samples metrics if the node acted, runs crash detection.
    /// Returns `true` once the run should stop.
    pub fn end_tick(&mut self, now: f64, deviation: f64) -> bool {
        self.counters.ticks += 1;
        if self.drove_this_tick {
            let (l, r) = self.node.applied();
            let _ = self.deviation.push(now, deviation);
            let _ = self.correction.push(now, correction_metric(l, r));
            self.drove_this_tick = false;
        }
        if let Some(det) = &mut self.crash {
            if let Some(t) = det.update(now, deviation) {
                self.crash_time = Some(t);
                return true;
            }
        }
        false
    }
}

/// What one camera frame produces.
pub(crate) struct Frame {
    /// Send a zero-report right away, ahead of `command`: the sensor is
    /// coming back from a silent outage.
    pub resume_zero: bool,
    /// Command to transmit after the processing latency; `None` while silent.
    pub command: Option<SteeringCommand>,
    pub gated: bool,
}

/// Per-sensor runtime state.
pub(crate) struct SensorRuntime {
    pub spec: SensorSpec,
    pub slot: usize,
    pub pid: PidState,
    pub noise_rng: ChaCha8Rng,
    pub outage: OutageSchedule,
    pub phase: f64,
    pub frame: u64,
    silenced: bool,
}

impl SensorRuntime {
    pub fn build_all(scenario: &Scenario, seed: u64) -> Vec<SensorRuntime> {
        let slots = source_slots(&scenario.sensors);
        scenario
            .sensors
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let mut phase_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "phase", i as u64));
                let period = 1.0 / spec.rate;
                let phase = spec.phase.unwrap_or_else(|| phase_rng.gen_range(0.0..period));
                let outage_phase = spec
                    .outage_phase
                    .unwrap_or_else(|| spec.outage.cycle().map_or(0.0, |c| phase_rng.gen_range(0.0..c)));
                // snap the outage phase to the tick grid so duty cycles are exact
                let outage_phase = (outage_phase / scenario.timestep).round() * scenario.timestep;
                SensorRuntime {
                    spec: spec.clone(),
                    slot: slots[i],
                    pid: PidState::with_decay(spec.decay),
                    noise_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, "noise", i as u64)),
                    outage: OutageSchedule::new(
                        spec.outage,
                        outage_phase,
                        ChaCha8Rng::seed_from_u64(derive_seed(seed, "outage", i as u64)),
                    ),
                    phase,
                    frame: 0,
                    silenced: false,
                }
            })
            .collect()
    }

    /// Tick index at which frame `n` is captured.
    pub fn frame_tick(&self, n: u64, dt: f64) -> u64 {
        let t = self.phase + n as f64 / self.spec.rate;
        (t / dt - TIME_EPS).ceil().max(0.0) as u64
    }

    /// Runs one camera frame: observe, PID, outage gate.
    pub fn capture(&mut self, track: &Track, pose: &Pose, vehicle: &crate::world::VehicleParams, now: f64) -> Frame {
        let active = self.outage.active(now);
        if active && self.spec.outage_report == OutageReport::Silent {
            self.silenced = true;
            return Frame {
                resume_zero: false,
                command: None,
                gated: true,
            };
        }
        let resume_zero = std::mem::take(&mut self.silenced);
        log::trace!("capture t={now} pose={pose:?}");
        let obs = observe(&self.spec.camera, track, pose, vehicle, &mut self.noise_rng);
        let (next, cmd) = sensor_tick(self.spec.kind, &obs, &self.pid, &self.spec.gains);
        self.pid = next;
        Frame {
            resume_zero,
            command: Some(gate(cmd, active)),
            gated: active,
        }
    }

    pub fn channel_model(&self, seed: u64, index: usize) -> ChannelModel {
        ChannelModel {
            seed: derive_seed(seed, "channel", index as u64) ^ self.spec.channel.seed,
            ..self.spec.channel
        }
    }
}

pub(crate) fn collect_outages(sensors: &[SensorRuntime], end_time: f64) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for (i, s) in sensors.iter().enumerate() {
        for (a, b) in s.outage.windows(end_time) {
            out.push((i, a, b));
        }
    }
    out.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    out
}

/// Runs the scenario with its own seed.
pub fn run(scenario: &Scenario) -> RunResult {
    run_with_seed(scenario, scenario.seed)
}

/// Deterministic simulated-network run.
pub fn run_with_seed(scenario: &Scenario, seed: u64) -> RunResult {
    let track = scenario.build_track().expect("scenario was validated");
    let dt = scenario.timestep;
    let mut sensors = SensorRuntime::build_all(scenario, seed);
    let mut channels: Vec<SimChannel> = sensors
        .iter()
        .enumerate()
        .map(|(i, s)| SimChannel::new(s.channel_model(seed, i)))
        .collect();
    let mut next_tick: Vec<u64> = sensors.iter().map(|s| s.frame_tick(0, dt)).collect();
    let latency_ticks: Vec<u64> = sensors.iter().map(|s| (s.spec.latency / dt).round() as u64).collect();
    let mut pending: Vec<VecDeque<(u64, String)>> = vec![VecDeque::new(); sensors.len()];
    let mut rec = Recorder::new(scenario);
    let mut pose = scenario.start_pose();
    let total_ticks = (scenario.duration / dt - TIME_EPS).ceil() as u64;
    let mut end_time = scenario.duration;

    for k in 0..total_ticks {
        let now = k as f64 * dt;
        for (i, s) in sensors.iter_mut().enumerate() {
            if next_tick[i] != k {
                continue;
            }
            let frame = s.capture(&track, &pose, &scenario.vehicle, now);
            rec.counters.frames += 1;
            if frame.gated {
                rec.counters.gated_frames += 1;
            }
            if frame.resume_zero {
                let at = pending[i].partition_point(|(due, _)| *due <= k);
                pending[i].insert(at, (k, encode_command(&SteeringCommand::ZERO)));
            }
            if let Some(cmd) = frame.command {
                pending[i].push_back((k + latency_ticks[i], encode_command(&cmd)));
            }
            s.frame += 1;
            next_tick[i] = s.frame_tick(s.frame, dt);
        }
        for (i, queue) in pending.iter_mut().enumerate() {
            while queue.front().is_some_and(|(due, _)| *due <= k) {
                let (_, datagram) = queue.pop_front().unwrap();
                channels[i].send(sensors[i].slot, datagram, now);
            }
        }
        let mut arrivals: Vec<(f64, usize, usize, String)> = Vec::new();
        for (i, ch) in channels.iter_mut().enumerate() {
            for (at, slot, datagram) in ch.poll_timed(now) {
                arrivals.push((at, i, slot, datagram));
            }
        }
        arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, _, slot, datagram) in arrivals {
            rec.deliver(slot, datagram.as_bytes(), now);
        }
        let dev = lateral_deviation(&track, &pose);
        if rec.end_tick(now, dev) {
            end_time = now;
            break;
        }
        let (l, r) = rec.node.applied();
        pose = step_vehicle(&pose, l, r, dt, &scenario.vehicle);
    }

    for ch in &channels {
        rec.counters.datagrams_sent += ch.sent();
        rec.counters.datagrams_dropped += ch.dropped();
    }
    RunResult {
        name: scenario.name.clone(),
        seed,
        duration: scenario.duration,
        end_time,
        crash_time: rec.crash_time,
        final_pose: pose,
        drive_log: rec.log,
        deviation: rec.deviation,
        correction: rec.correction,
        position_error: rec.position_error,
        outages: collect_outages(&sensors, end_time),
        counters: rec.counters,
        post_outage_window: scenario.post_outage_window,
    }
}
