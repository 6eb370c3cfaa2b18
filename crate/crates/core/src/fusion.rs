//! Vehicle-control node: latest command per source, the three fusion
//! policies, motor application and the drive log.

use crate::wire::{format_number, SteeringCommand};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Received left/right/confidence are divided by this before use, capping
/// the motors at roughly a third of full power.
pub const POWER_SCALE: f64 = 3.0;
pub const MOTOR_MAX: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionPolicy {
    MaximumConfidence,
    SimpleAverage,
    ConfidenceWeighted,
}

impl FusionPolicy {
    pub const ALL: [FusionPolicy; 3] = [
        FusionPolicy::MaximumConfidence,
        FusionPolicy::SimpleAverage,
        FusionPolicy::ConfidenceWeighted,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FusionPolicy::MaximumConfidence => "maximum_confidence",
            FusionPolicy::SimpleAverage => "simple_average",
            FusionPolicy::ConfidenceWeighted => "confidence_weighted",
        }
    }
}

impl fmt::Display for FusionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FusionPolicy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown fusion policy {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSlot {
    /// Column prefix in the drive log (`pi`, `cam0`, ...).
    pub name: String,
    /// Scaled command used for fusion; all zero while inactive.
    pub command: SteeringCommand,
    /// Last scaled message as received, zero-reports included.
    pub last_message: SteeringCommand,
    pub active: bool,
    pub last_update: Option<f64>,
}

/// Fixed-order table of the latest command from each source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceRegistry {
    slots: Vec<SourceSlot>,
}

impl SourceRegistry {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        SourceRegistry {
            slots: names
                .into_iter()
                .map(|name| SourceSlot {
                    name: name.into(),
                    command: SteeringCommand::ZERO,
                    last_message: SteeringCommand::ZERO,
                    active: false,
                    last_update: None,
                })
                .collect(),
        }
    }

    /// Onboard slot first, then `infra_count` cameras; at least the three
    /// columns the drive log always carries.
    pub fn standard(infra_count: usize) -> Self {
        let n = infra_count.max(2);
        Self::new(std::iter::once("pi".to_string()).chain((0..n).map(|i| format!("cam{i}"))))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[SourceSlot] {
        &self.slots
    }

    pub fn slot(&self, source: usize) -> Option<&SourceSlot> {
        self.slots.get(source)
    }

    /// Stores a received command after power scaling. Returns `false` (and
    /// leaves the registry unchanged) for an unknown source.
    pub fn ingest(&mut self, source: usize, cmd: &SteeringCommand, now: f64) -> bool {
        let Some(slot) = self.slots.get_mut(source) else {
            log::warn!("ignoring command from unknown source {source}");
            return false;
        };
        let scaled = SteeringCommand {
            left: cmd.left / POWER_SCALE,
            right: cmd.right / POWER_SCALE,
            confidence: cmd.confidence / POWER_SCALE,
            ..*cmd
        };
        slot.last_message = scaled;
        slot.last_update = Some(now);
        if scaled.left > 0.0 || scaled.right > 0.0 {
            slot.command = scaled;
            slot.active = true;
        } else {
            slot.command = SteeringCommand::ZERO;
            slot.active = false;
        }
        true
    }

    /// Deactivates sources whose last report is older than `ttl`.
    pub fn expire(&mut self, now: f64, ttl: f64) {
        for slot in &mut self.slots {
            if slot.active && slot.last_update.is_some_and(|t| now - t > ttl) {
                slot.active = false;
                slot.command = SteeringCommand::ZERO;
            }
        }
    }

    /// Builds a registry directly from scaled commands (tests and FFI).
    pub fn from_scaled(commands: &[SteeringCommand]) -> Self {
        let mut reg = Self::new((0..commands.len()).map(|i| format!("s{i}")));
        for (slot, cmd) in reg.slots.iter_mut().zip(commands) {
            slot.last_message = *cmd;
            if cmd.left > 0.0 || cmd.right > 0.0 {
                slot.command = *cmd;
                slot.active = true;
            }
        }
        reg
    }
}

/// Index of the source the maximum-confidence policy follows: the highest
/// confidence, later sources winning ties. `None` when every confidence is 0.
pub fn max_confidence_source(registry: &SourceRegistry) -> Option<usize> {
    let chosen = registry
        .slots
        .iter()
        .map(|s| s.command.confidence)
        .fold(f64::NEG_INFINITY, f64::max);
    if chosen.is_nan() || chosen <= 0.0 {
        return None;
    }
    registry.slots.iter().rposition(|s| s.command.confidence == chosen)
}

pub fn fuse_max(registry: &SourceRegistry) -> Option<(f64, f64)> {
    let idx = max_confidence_source(registry)?;
    let c = &registry.slots[idx].command;
    Some((c.left, c.right))
}

/// Sum of every stored command divided by the number of sources with
/// nonzero confidence.
pub fn fuse_simple_avg(registry: &SourceRegistry) -> Option<(f64, f64)> {
    let count = registry.slots.iter().filter(|s| s.command.confidence != 0.0).count();
    if count == 0 {
        return None;
    }
    let (l, r) = registry
        .slots
        .iter()
        .fold((0.0, 0.0), |(l, r), s| (l + s.command.left, r + s.command.right));
    Some((l / count as f64, r / count as f64))
}

pub fn fuse_weighted(registry: &SourceRegistry) -> Option<(f64, f64)> {
    let (mut wl, mut wr, mut total) = (0.0, 0.0, 0.0);
    for s in &registry.slots {
        let c = s.command.confidence;
        wl += c * s.command.left;
        wr += c * s.command.right;
        total += c;
    }
    if total == 0.0 {
        return None;
    }
    Some((wl / total, wr / total))
}

pub fn fuse(policy: FusionPolicy, registry: &SourceRegistry) -> Option<(f64, f64)> {
    match policy {
        FusionPolicy::MaximumConfidence => fuse_max(registry),
        FusionPolicy::SimpleAverage => fuse_simple_avg(registry),
        FusionPolicy::ConfidenceWeighted => fuse_weighted(registry),
    }
}

/// Header of the drive log for the standard three sources.
pub const DRIVE_LOG_HEADER: &str = "time,left,right,piLeft,piRight,piConf,piP,piI,piD,cam0Left,cam0Right,cam0Conf,cam0P,cam0I,cam0D,cam1Left,cam1Right,cam1Conf,cam1P,cam1I,cam1D";

pub fn drive_log_header(registry: &SourceRegistry) -> String {
    let mut h = String::from("time,left,right");
    for slot in &registry.slots {
        for field in ["Left", "Right", "Conf", "P", "I", "D"] {
            h.push(',');
            h.push_str(&slot.name);
            h.push_str(field);
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveOutcome {
    pub left: f64,
    pub right: f64,
    pub degenerate: bool,
    pub row: String,
}

/// The vehicle-control node: owns the registry and the applied powers.
#[derive(Debug, Clone)]
pub struct VehicleNode {
    registry: SourceRegistry,
    policy: FusionPolicy,
    applied: (f64, f64),
    ttl: Option<f64>,
}

impl VehicleNode {
    pub fn new(registry: SourceRegistry, policy: FusionPolicy) -> Self {
        VehicleNode {
            registry,
            policy,
            applied: (0.0, 0.0),
            ttl: None,
        }
    }

    pub fn with_ttl(mut self, ttl: Option<f64>) -> Self {
        self.ttl = ttl;
        self
    }

    pub fn registry(&self) -> &SourceRegistry {
        &self.registry
    }

    pub fn policy(&self) -> FusionPolicy {
        self.policy
    }

    pub fn applied(&self) -> (f64, f64) {
        self.applied
    }

    pub fn header(&self) -> String {
        drive_log_header(&self.registry)
    }

    pub fn ingest(&mut self, source: usize, cmd: &SteeringCommand, now: f64) -> bool {
        self.registry.ingest(source, cmd, now)
    }

    /// Fuses, truncates and clamps the motor powers; on a degenerate fusion
    /// the previous powers are held and the row is marked with `-1`.
    pub fn drive_tick(&mut self, now: f64) -> DriveOutcome {
        if let Some(ttl) = self.ttl {
            self.registry.expire(now, ttl);
        }
        let fused = fuse(self.policy, &self.registry);
        if let Some((l, r)) = fused {
            self.applied = (l.trunc().clamp(0.0, MOTOR_MAX), r.trunc().clamp(0.0, MOTOR_MAX));
        }
        let row = self.format_row(now, fused.is_none());
        DriveOutcome {
            left: self.applied.0,
            right: self.applied.1,
            degenerate: fused.is_none(),
            row,
        }
    }

    /// Row for a datagram that could not be decoded: powers held, `-1` marker.
    pub fn malformed_row(&self, now: f64) -> String {
        self.format_row(now, true)
    }

    fn format_row(&self, now: f64, degenerate: bool) -> String {
        let mut row = format!(
            "{:.4},{},{}",
            now,
            format_number(self.applied.0),
            format_number(self.applied.1)
        );
        for slot in &self.registry.slots {
            for v in slot.last_message.fields() {
                row.push(',');
                row.push_str(&format_number(v));
            }
        }
        if degenerate {
            row.push_str(",-1");
        }
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scaled(left: f64, right: f64, conf: f64) -> SteeringCommand {
        SteeringCommand {
            left,
            right,
            confidence: conf,
            ..SteeringCommand::ZERO
        }
    }

    #[test]
    fn ingest_scales_by_three() {
        let mut reg = SourceRegistry::standard(2);
        reg.ingest(
            0,
            &SteeringCommand::from_fields([100.0, 100.0, 100.0, 1.0, 2.0, 3.0]),
            0.0,
        );
        let s = &reg.slots()[0];
        assert!(s.active);
        assert_abs_diff_eq!(s.command.left, 33.333333333333336, epsilon = 1e-12);
        assert_abs_diff_eq!(s.command.confidence, 100.0 / 3.0, epsilon = 1e-12);
        assert_eq!(s.command.p, 1.0);

        reg.ingest(
            1,
            &SteeringCommand::from_fields([90.0, 110.0, 60.0, 0.0, 0.0, 0.0]),
            0.0,
        );
        let s = &reg.slots()[1];
        assert_abs_diff_eq!(s.command.left, 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.command.right, 110.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.command.confidence, 20.0, epsilon = 1e-12);

        reg.ingest(0, &SteeringCommand::ZERO, 0.1);
        assert!(!reg.slots()[0].active);
        assert_eq!(reg.slots()[0].command, SteeringCommand::ZERO);
        assert!(!reg.ingest(9, &SteeringCommand::ZERO, 0.1));
    }

    #[test]
    fn max_picks_unique_and_latest_tie() {
        let reg =
            SourceRegistry::from_scaled(&[scaled(1.0, 1.0, 10.0), scaled(2.0, 2.0, 20.0), scaled(3.0, 3.0, 30.0)]);
        assert_eq!(fuse_max(&reg), Some((3.0, 3.0)));
        let reg = SourceRegistry::from_scaled(&[scaled(1.0, 1.0, 20.0), scaled(2.0, 2.0, 20.0), scaled(3.0, 3.0, 5.0)]);
        assert_eq!(fuse_max(&reg), Some((2.0, 2.0)));
        let reg = SourceRegistry::from_scaled(&[scaled(0.0, 0.0, 0.0), scaled(7.0, 8.0, 4.0), scaled(0.0, 0.0, 0.0)]);
        assert_eq!(fuse_max(&reg), Some((7.0, 8.0)));
        let reg = SourceRegistry::from_scaled(&[SteeringCommand::ZERO; 3]);
        assert_eq!(fuse_max(&reg), None);
    }

    #[test]
    fn simple_average_counts_confident_sources() {
        let reg =
            SourceRegistry::from_scaled(&[scaled(30.0, 30.0, 10.0), SteeringCommand::ZERO, scaled(90.0, 90.0, 5.0)]);
        assert_eq!(fuse_simple_avg(&reg), Some((60.0, 60.0)));
        let reg = SourceRegistry::from_scaled(&[scaled(40.0, 40.0, 1.0); 3]);
        assert_eq!(fuse_simple_avg(&reg), Some((40.0, 40.0)));
        let reg = SourceRegistry::from_scaled(&[scaled(25.0, 25.0, 3.0)]);
        assert_eq!(fuse_simple_avg(&reg), Some((25.0, 25.0)));
        assert_eq!(fuse_simple_avg(&SourceRegistry::standard(2)), None);
    }

    #[test]
    fn weighted_average_examples() {
        let reg = SourceRegistry::from_scaled(&[
            scaled(90.0, 10.0, 50.0),
            scaled(60.0, 40.0, 25.0),
            SteeringCommand::ZERO,
        ]);
        let (l, r) = fuse_weighted(&reg).unwrap();
        assert_abs_diff_eq!(l, 80.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 20.0, epsilon = 1e-12);
        let eq = SourceRegistry::from_scaled(&[scaled(30.0, 31.0, 9.0), scaled(36.0, 20.0, 9.0)]);
        assert_eq!(fuse_weighted(&eq), fuse_simple_avg(&eq));
        assert_eq!(fuse_weighted(&SourceRegistry::standard(2)), None);
    }

    #[test]
    fn fresh_node_idles_and_holds_on_degenerate() {
        let mut node = VehicleNode::new(SourceRegistry::standard(2), FusionPolicy::ConfidenceWeighted);
        let out = node.drive_tick(0.0);
        assert_eq!((out.left, out.right), (0.0, 0.0));
        assert!(out.degenerate);
        assert!(out.row.ends_with(",-1"));

        node.ingest(
            0,
            &SteeringCommand::from_fields([90.0, 110.0, 60.0, 1.0, 1.0, 0.0]),
            0.1,
        );
        let out = node.drive_tick(0.1);
        assert_eq!((out.left, out.right), (30.0, 36.0));
        assert!(!out.degenerate);

        node.ingest(0, &SteeringCommand::ZERO, 0.2);
        let out = node.drive_tick(0.2);
        assert_eq!((out.left, out.right), (30.0, 36.0));
        assert!(out.degenerate);
        assert_eq!(out.row, "0.2000,30,36,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,-1");
    }

    #[test]
    fn header_matches_standard_log() {
        let node = VehicleNode::new(SourceRegistry::standard(2), FusionPolicy::SimpleAverage);
        assert_eq!(node.header(), DRIVE_LOG_HEADER);
    }

    #[test]
    fn ttl_expires_stale_sources() {
        let mut node =
            VehicleNode::new(SourceRegistry::standard(2), FusionPolicy::MaximumConfidence).with_ttl(Some(0.5));
        node.ingest(1, &SteeringCommand::from_fields([90.0, 90.0, 90.0, 0.0, 0.0, 0.0]), 0.0);
        assert!(!node.drive_tick(0.4).degenerate);
        assert!(node.drive_tick(0.6).degenerate);
    }

    #[test]
    fn policy_names_roundtrip() {
        for p in FusionPolicy::ALL {
            assert_eq!(p.name().parse::<FusionPolicy>().unwrap(), p);
        }
    }
}
