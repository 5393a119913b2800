//! Energy accounting over event logs.
//!
//! Each device is in one of two modes, switched by `wake` and `sleep`
//! events. Transitions are instantaneous and free. Durations are integer
//! nanoseconds, so time-in-mode sums exactly to the simulated span.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{EventKind, EventLog, SimTime};

/// Assumed ring battery: 40 mAh at 1.8 V.
pub const DEFAULT_RING_BATTERY_J: f64 = 0.040 * 3600.0 * 1.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("device {0:?} appears in the log but has no power profile")]
    UnknownDevice(String),
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("invalid power profile for {device}: {reason}")]
    InvalidProfile { device: String, reason: String },
    #[error("integration window ends at {end} s before it starts at {start} s")]
    InvalidWindow { start: SimTime, end: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub active_w: f64,
    pub sleep_w: f64,
    pub battery_capacity_j: Option<f64>,
}

impl PowerProfile {
    fn validate(&self, device: &str) -> Result<(), EnergyError> {
        let ok = self.active_w.is_finite() && self.sleep_w.is_finite() && self.sleep_w >= 0.0 && self.active_w >= self.sleep_w;
        if !ok {
            return Err(EnergyError::InvalidProfile {
                device: device.to_owned(),
                reason: format!("active {} W, sleep {} W", self.active_w, self.sleep_w),
            });
        }
        Ok(())
    }
}

pub type PowerTable = BTreeMap<String, PowerProfile>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceEnergy {
    pub device: String,
    pub energy_j: f64,
    pub average_power_w: f64,
    pub active_s: f64,
    pub sleep_s: f64,
    pub battery_capacity_j: Option<f64>,
    pub battery_life_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub start: SimTime,
    pub end: SimTime,
    /// Sorted by device name.
    pub devices: Vec<DeviceEnergy>,
}

impl EnergyReport {
    pub fn device(&self, name: &str) -> Option<&DeviceEnergy> {
        self.devices.iter().find(|d| d.device == name)
    }

    pub fn duration_s(&self) -> f64 {
        (self.end - self.start).as_secs_f64()
    }

    /// One labeled block per device.
    pub fn to_text(&self) -> String {
        let mut out = format!("# window_s = {} .. {}\n", self.start, self.end);
        for d in &self.devices {
            let _ = writeln!(out, "\n[{}]", d.device);
            let _ = writeln!(out, "energy_j = {:.9e}", d.energy_j);
            let _ = writeln!(out, "average_power_w = {:.9e}", d.average_power_w);
            let _ = writeln!(out, "active_s = {:.9}", d.active_s);
            let _ = writeln!(out, "sleep_s = {:.9}", d.sleep_s);
            if let Some(c) = d.battery_capacity_j {
                let _ = writeln!(out, "battery_capacity_j = {c} # assumption");
            }
            if let Some(life) = d.battery_life_s {
                let _ = writeln!(out, "battery_life_s = {life:.6e}");
                let _ = writeln!(out, "battery_life_h = {:.3}", life / 3600.0);
            }
        }
        out
    }
}

/// Integrates every profiled device over `[start, end]`. Devices start
/// asleep; `wake`/`sleep` events before `start` still set the mode.
/// Any device in the log without a profile is an error.
pub fn integrate(log: &EventLog, table: &PowerTable, start: SimTime, end: SimTime) -> Result<EnergyReport, EnergyError> {
    if end < start {
        return Err(EnergyError::InvalidWindow { start, end });
    }
    for (name, p) in table {
        p.validate(name)?;
    }
    if let Some(e) = log.events().iter().find(|e| !table.contains_key(&e.device)) {
        return Err(EnergyError::UnknownDevice(e.device.clone()));
    }
    // (active, since) per device; active ns accumulated inside the window.
    let mut state: BTreeMap<&str, (bool, SimTime)> = table.keys().map(|k| (k.as_str(), (false, start))).collect();
    let mut active_ns: BTreeMap<&str, u64> = table.keys().map(|k| (k.as_str(), 0)).collect();
    let clamp = |t: SimTime| t.max(start).min(end);
    for e in log.events() {
        let to_active = match e.kind {
            EventKind::Wake => true,
            EventKind::Sleep => false,
            _ => continue,
        };
        let (active, since) = state.get_mut(e.device.as_str()).expect("checked above");
        let now = clamp(e.time);
        if *active {
            *active_ns.get_mut(e.device.as_str()).expect("same keys") += (now - *since).as_nanos();
        }
        *active = to_active;
        *since = now;
    }
    let span = (end - start).as_nanos();
    let devices = table
        .iter()
        .map(|(name, p)| {
            let (active, since) = state[name.as_str()];
            let mut a = active_ns[name.as_str()];
            if active {
                a += (end - since).as_nanos();
            }
            let active_s = a as f64 * 1e-9;
            let sleep_s = (span - a) as f64 * 1e-9;
            let energy_j = active_s * p.active_w + sleep_s * p.sleep_w;
            let average_power_w = if span == 0 { 0.0 } else { energy_j / (span as f64 * 1e-9) };
            let battery_life_s = match p.battery_capacity_j {
                Some(c) if average_power_w > 0.0 => Some(c / average_power_w),
                _ => None,
            };
            DeviceEnergy {
                device: name.clone(),
                energy_j,
                average_power_w,
                active_s,
                sleep_s,
                battery_capacity_j: p.battery_capacity_j,
                battery_life_s,
            }
        })
        .collect();
    Ok(EnergyReport { start, end, devices })
}

/// Runtime of a battery at a constant average draw, s.
pub fn battery_life(capacity_j: f64, avg_power_w: f64) -> Result<f64, EnergyError> {
    if !(capacity_j.is_finite() && capacity_j > 0.0) {
        return Err(EnergyError::NonPositive {
            what: "battery capacity",
            value: capacity_j,
        });
    }
    if !(avg_power_w.is_finite() && avg_power_w > 0.0) {
        return Err(EnergyError::NonPositive {
            what: "average power",
            value: avg_power_w,
        });
    }
    Ok(capacity_j / avg_power_w)
}
