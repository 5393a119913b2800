//! Deterministic discrete-event models of the two network modes: multi-tag
//! surface inventory with slot/mask anti-collision, and time-division
//! ring ↔ wristband sessions with duty cycling.
//!
//! Randomness enters only through tag uids, drawn from a seeded ChaCha8
//! generator ([`seeded_rng`]). Collision resolution itself is deterministic.

mod inventory;
mod log;
mod session;

pub use inventory::{
    inventory_round, powered_tags, read_tag, run_inventory, InventoryResult, Mask, ReaderDevice,
    RoundOutcome, SlotCount, TagDevice, TagState, INVENTORY_REQUEST_BITS, RESPONSE_BITS,
};
pub use log::{Event, EventKind, EventLog, EventQueue, SimTime};
pub use session::{
    duty_cycle, picoring_session, Frame, Gesture, ModeSchedule, SessionOutcome, SessionSchedule,
    WearableDevice, RING_ACTIVE_POWER_W, RING_SLEEP_POWER_W, WRISTBAND_ACTIVE_POWER_W,
    WRISTBAND_SLEEP_POWER_W,
};

/// The ring in a picoRing session.
pub type RingDevice = WearableDevice;
/// The wristband in a picoRing session.
pub type WristbandDevice = WearableDevice;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("no link budget supplied for tag {0}")]
    MissingLink(String),
    #[error("duplicate tag uid {0:016x}")]
    DuplicateUid(u64),
    #[error("tag {0:016x} is not singulated")]
    NotSingulated(u64),
    #[error("frame {frame} needs {airtime} s of airtime but the period is {period} s")]
    Unschedulable {
        frame: usize,
        airtime: SimTime,
        period: SimTime,
    },
    #[error("invalid time {0} s")]
    InvalidTime(f64),
    #[error("invalid timing: {0}")]
    InvalidTiming(String),
    #[error("invalid duty cycle: active window {active_s} s, period {period_s} s")]
    InvalidDutyCycle { active_s: f64, period_s: f64 },
    #[error("invalid device {name}: {reason}")]
    InvalidDevice { name: String, reason: String },
    #[error("event at {at} s precedes log tail at {tail} s")]
    OutOfOrder { at: SimTime, tail: SimTime },
    #[error("event log parse error: {0}")]
    Parse(String),
}

/// Air-interface timing shared by reader and wearable links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkTiming {
    pub data_rate_bps: f64,
    /// Fixed cost of every exchange (SOF/EOF, CRC, turnaround).
    pub frame_overhead_s: f64,
}

impl Default for LinkTiming {
    /// High-rate vicinity-card timing: 26,480 bit/s and 300 µs per exchange.
    fn default() -> Self {
        LinkTiming {
            data_rate_bps: 26_480.0,
            frame_overhead_s: 300e-6,
        }
    }
}

impl LinkTiming {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(self.data_rate_bps.is_finite() && self.data_rate_bps > 0.0) {
            return Err(ProtocolError::InvalidTiming(format!(
                "data rate {} bit/s must be positive",
                self.data_rate_bps
            )));
        }
        if !(self.frame_overhead_s.is_finite() && self.frame_overhead_s >= 0.0) {
            return Err(ProtocolError::InvalidTiming(format!(
                "frame overhead {} s must be non-negative",
                self.frame_overhead_s
            )));
        }
        Ok(())
    }

    pub fn overhead(&self) -> SimTime {
        SimTime((self.frame_overhead_s * 1e9).round() as u64)
    }

    /// Time on air for `bits` payload bits, without overhead.
    pub fn bits(&self, bits: u64) -> SimTime {
        SimTime((bits as f64 * 1e9 / self.data_rate_bps).round() as u64)
    }

    /// One exchange carrying `bits`, overhead included.
    pub fn exchange(&self, bits: u64) -> SimTime {
        self.overhead() + self.bits(bits)
    }
}

/// The simulator's only randomness source.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` distinct random 64-bit uids.
pub fn random_uids(rng: &mut impl Rng, n: usize) -> Vec<u64> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let uid: u64 = rng.random();
        if seen.insert(uid) {
            out.push(uid);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_arithmetic() {
        let t = LinkTiming::default();
        assert_eq!(t.overhead(), SimTime::from_micros(300));
        // 256 bytes at 26,480 bit/s.
        let d = t.bits(256 * 8).as_secs_f64();
        assert!((d - 0.077_341).abs() < 1e-6);
        assert!(LinkTiming { data_rate_bps: 0.0, ..t }.validate().is_err());
    }

    #[test]
    fn uids_are_reproducible_and_distinct() {
        let a = random_uids(&mut seeded_rng(7), 100);
        let b = random_uids(&mut seeded_rng(7), 100);
        assert_eq!(a, b);
        let set: std::collections::BTreeSet<_> = a.iter().collect();
        assert_eq!(set.len(), 100);
        assert_ne!(a, random_uids(&mut seeded_rng(8), 100));
    }
}
