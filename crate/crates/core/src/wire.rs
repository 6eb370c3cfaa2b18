//! Sensor-to-vehicle datagrams: the `left;right;conf;P;I;D` text codec, a
//! seeded lossy channel for simulation, and thin UDP endpoints.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io;
use std::net::{SocketAddr, UdpSocket};
use thiserror::Error;

/// Largest datagram the vehicle node reads.
pub const MAX_DATAGRAM: usize = 1500;
/// Vehicle node port; sensors bind `SENSOR_BASE_PORT + id`.
pub const VEHICLE_PORT: u16 = 5000;
pub const SENSOR_BASE_PORT: u16 = 4000;

/// One sensor report. The third field travels under the name "error" on the
/// wire but is used as the confidence by the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SteeringCommand {
    pub left: f64,
    pub right: f64,
    pub confidence: f64,
    pub p: f64,
    pub i: f64,
    pub d: f64,
}

impl SteeringCommand {
    pub const ZERO: SteeringCommand = SteeringCommand {
        left: 0.0,
        right: 0.0,
        confidence: 0.0,
        p: 0.0,
        i: 0.0,
        d: 0.0,
    };

    pub fn is_zero_report(&self) -> bool {
        self.fields().iter().all(|&v| v == 0.0)
    }

    pub fn fields(&self) -> [f64; 6] {
        [self.left, self.right, self.confidence, self.p, self.i, self.d]
    }

    pub fn from_fields(f: [f64; 6]) -> Self {
        SteeringCommand {
            left: f[0],
            right: f[1],
            confidence: f[2],
            p: f[3],
            i: f[4],
            d: f[5],
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("malformed datagram: expected 6 fields, got {0}")]
    FieldCount(usize),
    #[error("malformed datagram: field {index} is not a finite number: {text:?}")]
    BadField { index: usize, text: String },
    #[error("malformed datagram: not UTF-8")]
    NotUtf8,
}

/// Shortest round-trip decimal; integral values print without a decimal point.
pub fn format_number(v: f64) -> String {
    // -0 would print as "-0"
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v}")
}

pub fn encode_command(cmd: &SteeringCommand) -> String {
    cmd.fields()
        .iter()
        .map(|&v| format_number(v))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn decode_command(text: &str) -> Result<SteeringCommand, WireError> {
    let parts: Vec<&str> = text.split(';').collect();
    if parts.len() != 6 {
        return Err(WireError::FieldCount(parts.len()));
    }
    let mut fields = [0.0; 6];
    for (index, part) in parts.iter().enumerate() {
        let trimmed = part.trim();
        match trimmed.parse::<f64>() {
            Ok(v) if v.is_finite() => fields[index] = v,
            _ => {
                return Err(WireError::BadField {
                    index,
                    text: trimmed.to_string(),
                })
            }
        }
    }
    Ok(SteeringCommand::from_fields(fields))
}

pub fn decode_datagram(bytes: &[u8]) -> Result<SteeringCommand, WireError> {
    let text = std::str::from_utf8(bytes).map_err(|_| WireError::NotUtf8)?;
    decode_command(text)
}

/// Per-datagram delay of a simulated link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Delay {
    Fixed { seconds: f64 },
    Uniform { min: f64, max: f64 },
}

impl Default for Delay {
    fn default() -> Self {
        Delay::Fixed { seconds: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModel {
    pub loss_probability: f64,
    pub delay: Delay,
    pub seed: u64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            loss_probability: 0.0,
            delay: Delay::default(),
            seed: 0,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.loss_probability) {
            return Err(format!("loss_probability {} outside [0, 1]", self.loss_probability));
        }
        match self.delay {
            Delay::Fixed { seconds } if !(seconds.is_finite() && seconds >= 0.0) => {
                Err(format!("delay {seconds} must be non-negative"))
            }
            Delay::Uniform { min, max } if !(min.is_finite() && max.is_finite() && 0.0 <= min && min <= max) => {
                Err(format!("uniform delay range [{min}, {max}] is invalid"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct InFlight {
    deliver_at: f64,
    source: usize,
    datagram: String,
}

/// Deterministic lossy link. Datagrams are independently dropped with the
/// model's loss probability and delivered after the model's delay, never
/// overtaking an earlier datagram.
#[derive(Debug, Clone)]
pub struct SimChannel {
    model: ChannelModel,
    rng: ChaCha8Rng,
    queue: VecDeque<InFlight>,
    last_now: f64,
    sent: u64,
    dropped: u64,
}

/// Slack when comparing a delivery time against the current clock.
const TIME_EPS: f64 = 1e-9;

impl SimChannel {
    pub fn new(model: ChannelModel) -> Self {
        SimChannel {
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            model,
            queue: VecDeque::new(),
            last_now: f64::NEG_INFINITY,
            sent: 0,
            dropped: 0,
        }
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn send(&mut self, source: usize, datagram: String, now: f64) {
        debug_assert!(now + TIME_EPS >= self.last_now, "channel clock went backwards");
        self.last_now = self.last_now.max(now);
        self.sent += 1;
        // always draw, so the loss stream does not depend on the delay model
        let u: f64 = self.rng.gen();
        if u < self.model.loss_probability {
            self.dropped += 1;
            return;
        }
        let delay = match self.model.delay {
            Delay::Fixed { seconds } => seconds,
            Delay::Uniform { min, max } if max > min => self.rng.gen_range(min..max),
            Delay::Uniform { min, .. } => min,
        };
        let earliest = self.queue.back().map_or(f64::NEG_INFINITY, |f| f.deliver_at);
        self.queue.push_back(InFlight {
            deliver_at: (now + delay).max(earliest),
            source,
            datagram,
        });
    }

    /// Removes and returns everything due at or before `now`, in send order.
    pub fn poll(&mut self, now: f64) -> Vec<(usize, String)> {
        debug_assert!(now + TIME_EPS >= self.last_now, "channel clock went backwards");
        self.last_now = self.last_now.max(now);
        let mut out = Vec::new();
        while let Some(front) = self.queue.front() {
            if front.deliver_at <= now + TIME_EPS {
                let f = self.queue.pop_front().unwrap();
                out.push((f.source, f.datagram));
            } else {
                break;
            }
        }
        out
    }

    /// Like [`poll`](Self::poll) but also reports each delivery time.
    pub fn poll_timed(&mut self, now: f64) -> Vec<(f64, usize, String)> {
        self.last_now = self.last_now.max(now);
        let mut out = Vec::new();
        while let Some(front) = self.queue.front() {
            if front.deliver_at <= now + TIME_EPS {
                let f = self.queue.pop_front().unwrap();
                out.push((f.deliver_at, f.source, f.datagram));
            } else {
                break;
            }
        }
        out
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }
}

/// Sensor side of the real UDP binding.
pub struct UdpSender {
    socket: UdpSocket,
    target: SocketAddr,
}

impl UdpSender {
    /// Binds `local` (port 0 picks an ephemeral port) and targets the vehicle node.
    pub fn bind(local: SocketAddr, target: SocketAddr) -> io::Result<Self> {
        let socket = UdpSocket::bind(local)?;
        Ok(UdpSender { socket, target })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn send(&self, cmd: &SteeringCommand) -> io::Result<()> {
        let text = encode_command(cmd);
        match self.socket.send_to(text.as_bytes(), self.target) {
            Ok(_) => Ok(()),
            Err(e) => {
                // one retry, as a flaky link would get
                log::warn!("send failed ({e}), retrying");
                self.socket.send_to(text.as_bytes(), self.target).map(|_| ())
            }
        }
    }
}

/// Vehicle-node side of the real UDP binding.
pub struct UdpReceiver {
    socket: UdpSocket,
    buf: Vec<u8>,
}

impl UdpReceiver {
    pub fn bind(local: SocketAddr) -> io::Result<Self> {
        let socket = UdpSocket::bind(local)?;
        Ok(UdpReceiver {
            socket,
            buf: vec![0; MAX_DATAGRAM],
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn set_read_timeout(&self, timeout: Option<std::time::Duration>) -> io::Result<()> {
        self.socket.set_read_timeout(timeout)
    }

    pub fn set_nonblocking(&self, nonblocking: bool) -> io::Result<()> {
        self.socket.set_nonblocking(nonblocking)
    }

    /// Receives one datagram. Returns `Ok(None)` on timeout.
    pub fn recv(&mut self) -> io::Result<Option<(SocketAddr, Vec<u8>)>> {
        match self.socket.recv_from(&mut self.buf) {
            Ok((n, from)) => Ok(Some((from, self.buf[..n].to_vec()))),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => Ok(None),
            Err(e) => Err(e),
        }
    }
}
