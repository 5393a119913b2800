//! Resonant inductive link budgets between a driven reader coil and a tag.
//!
//! Both coils are series-tuned to the carrier. Power transfer uses the
//! optimal-load efficiency of two coupled resonators; load modulation is
//! the change in impedance the tag reflects into the reader loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::magnetics::CoilElectrical;

/// Minimum detectable load-modulation depth.
pub const DEFAULT_DETECTION_THRESHOLD: f64 = 1e-3;
/// Power the reader board puts into its coil, W.
pub const DEFAULT_DRIVE_POWER_W: f64 = 0.2;
/// Reader board supply, 5.0 V × 103 mA.
pub const READER_SUPPLY_POWER_W: f64 = 0.515;
/// Sensor tag consumption, 3.3 V × 250 µA; used as its activation threshold.
pub const TAG_ACTIVATION_POWER_W: f64 = 845e-6;
/// Assumed Q of the commercial sensor tag coil.
pub const DEFAULT_TAG_Q: f64 = 30.0;
/// Modulating load as a fraction of the matched load when not configured.
pub const DEFAULT_MODULATING_LOAD_FRACTION: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("coupling coefficient {0} is not below 1 in magnitude")]
    CouplingOutOfRange(f64),
    #[error("inductance {0} H must be positive")]
    InvalidInductance(f64),
    #[error("Q factor {0} must be positive")]
    InvalidQ(f64),
    #[error("efficiency {0} must lie in (0, 1)")]
    EfficiencyOutOfRange(f64),
    #[error("tag load states are identical ({0} Ω)")]
    IdenticalLoadStates(f64),
    #[error("load {0} Ω must be positive")]
    InvalidLoad(f64),
    #[error("drive power {drive_w} W must be positive and at most the supply {supply_w} W")]
    InvalidDrive { drive_w: f64, supply_w: f64 },
    #[error("activation threshold {0} W must be positive")]
    InvalidThreshold(f64),
}

/// `k = m / sqrt(l1 l2)`, signed like `m`.
pub fn coupling_coefficient(m: f64, l1: f64, l2: f64) -> Result<f64, CircuitError> {
    for l in [l1, l2] {
        if !(l.is_finite() && l > 0.0) {
            return Err(CircuitError::InvalidInductance(l));
        }
    }
    let k = m / (l1 * l2).sqrt();
    if !(k.abs() < 1.0) {
        return Err(CircuitError::CouplingOutOfRange(k));
    }
    Ok(k)
}

/// Optimal-load efficiency `x / (1 + sqrt(1 + x))²` with `x = k² q1 q2`.
pub fn transfer_efficiency(k: f64, q1: f64, q2: f64) -> f64 {
    let x = k * k * q1 * q2;
    // Rewritten as 1 - 2/(1 + sqrt(1+x)) it loses precision for small x.
    x / (1.0 + (1.0 + x).sqrt()).powi(2)
}

/// Inverse of [`transfer_efficiency`]: the non-negative `k` reaching `eta`.
///
/// With `s = sqrt(1 + x)`, `eta = (s - 1)/(s + 1)`, so `s = (1 + eta)/(1 - eta)`
/// and `x = 4 eta / (1 - eta)²`.
pub fn calibrate_k_from_eta(eta: f64, q1: f64, q2: f64) -> Result<f64, CircuitError> {
    if !(eta.is_finite() && (0.0..1.0).contains(&eta)) {
        return Err(CircuitError::EfficiencyOutOfRange(eta));
    }
    for q in [q1, q2] {
        if !(q.is_finite() && q > 0.0) {
            return Err(CircuitError::InvalidQ(q));
        }
    }
    let x = 4.0 * eta / ((1.0 - eta) * (1.0 - eta));
    Ok((x / (q1 * q2)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivenReader {
    pub coil: CoilElectrical,
    pub drive_power_w: f64,
    pub supply_power_w: f64,
}

impl DrivenReader {
    pub fn new(coil: CoilElectrical, drive_power_w: f64, supply_power_w: f64) -> Result<Self, CircuitError> {
        if !(drive_power_w.is_finite() && drive_power_w > 0.0 && drive_power_w <= supply_power_w) {
            return Err(CircuitError::InvalidDrive {
                drive_w: drive_power_w,
                supply_w: supply_power_w,
            });
        }
        Ok(DrivenReader {
            coil,
            drive_power_w,
            supply_power_w,
        })
    }

    /// RMS coil current at the drive power, A.
    pub fn coil_current(&self) -> f64 {
        (self.drive_power_w / self.coil.ac_resistance_ohm).sqrt()
    }
}

/// Tag coil plus the chip's two series load states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagLoad {
    pub coil: CoilElectrical,
    pub matched_load_ohm: f64,
    pub modulating_load_ohm: f64,
    pub activation_threshold_w: f64,
}

impl TagLoad {
    pub fn new(
        coil: CoilElectrical,
        matched_load_ohm: f64,
        modulating_load_ohm: f64,
        activation_threshold_w: f64,
    ) -> Result<Self, CircuitError> {
        for r in [matched_load_ohm, modulating_load_ohm] {
            if !(r.is_finite() && r > 0.0) {
                return Err(CircuitError::InvalidLoad(r));
            }
        }
        if matched_load_ohm == modulating_load_ohm {
            return Err(CircuitError::IdenticalLoadStates(matched_load_ohm));
        }
        if !(activation_threshold_w.is_finite() && activation_threshold_w > 0.0) {
            return Err(CircuitError::InvalidThreshold(activation_threshold_w));
        }
        Ok(TagLoad {
            coil,
            matched_load_ohm,
            modulating_load_ohm,
            activation_threshold_w,
        })
    }

    /// Matched load equal to the coil resistance, modulating load a tenth of it.
    pub fn with_default_loads(coil: CoilElectrical, activation_threshold_w: f64) -> Result<Self, CircuitError> {
        let r = coil.ac_resistance_ohm;
        Self::new(coil, r, r * DEFAULT_MODULATING_LOAD_FRACTION, activation_threshold_w)
    }
}

/// Power reaching the tag load, W.
pub fn delivered_power(reader: &DrivenReader, tag: &TagLoad, k: f64) -> f64 {
    reader.drive_power_w * transfer_efficiency(k, reader.coil.q_factor, tag.coil.q_factor)
}

/// Resistance reflected into the reader loop by a resonant tag loop of total
/// series resistance `z_tag`, Ω.
pub fn reflected_impedance(m: f64, frequency_hz: f64, z_tag: f64) -> f64 {
    let wm = 2.0 * std::f64::consts::PI * frequency_hz * m;
    wm * wm / z_tag
}

/// Change in reflected resistance between the two tag states, normalized by
/// the reader loop resistance in the higher-loading state. Lies in [0, 1).
pub fn modulation_depth(k: f64, reader: &DrivenReader, tag: &TagLoad) -> Result<f64, CircuitError> {
    if !(k.abs() < 1.0) {
        return Err(CircuitError::CouplingOutOfRange(k));
    }
    if tag.matched_load_ohm == tag.modulating_load_ohm {
        return Err(CircuitError::IdenticalLoadStates(tag.matched_load_ohm));
    }
    let m = k * (reader.coil.inductance_h * tag.coil.inductance_h).sqrt();
    let f = reader.coil.frequency_hz;
    let r_tag = tag.coil.ac_resistance_ohm;
    let z1 = reflected_impedance(m, f, r_tag + tag.matched_load_ohm);
    let z2 = reflected_impedance(m, f, r_tag + tag.modulating_load_ohm);
    Ok((z1 - z2).abs() / (reader.coil.ac_resistance_ohm + z1.max(z2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Signed mutual inductance, H.
    pub m_h: f64,
    /// Coupling magnitude.
    pub k: f64,
    pub eta: f64,
    pub delivered_power_w: f64,
    /// RMS EMF induced in the tag coil, V.
    pub induced_voltage_v: f64,
    pub modulation_depth: f64,
    pub activation_threshold_w: f64,
    pub detection_threshold: f64,
}

impl LinkBudget {
    pub fn powered(&self) -> bool {
        self.delivered_power_w >= self.activation_threshold_w
    }

    pub fn detectable(&self) -> bool {
        self.modulation_depth >= self.detection_threshold
    }

    /// Powered and its load modulation detectable.
    pub fn readable(&self) -> bool {
        self.powered() && self.detectable()
    }
}

/// Full budget for one reader–tag pair with mutual inductance `m`.
pub fn link_budget(
    m: f64,
    reader: &DrivenReader,
    tag: &TagLoad,
    detection_threshold: f64,
) -> Result<LinkBudget, CircuitError> {
    let k = coupling_coefficient(m, reader.coil.inductance_h, tag.coil.inductance_h)?.abs();
    let eta = transfer_efficiency(k, reader.coil.q_factor, tag.coil.q_factor);
    Ok(LinkBudget {
        m_h: m,
        k,
        eta,
        delivered_power_w: reader.drive_power_w * eta,
        induced_voltage_v: reader.coil.omega() * m.abs() * reader.coil_current(),
        modulation_depth: modulation_depth(k, reader, tag)?,
        activation_threshold_w: tag.activation_threshold_w,
        detection_threshold,
    })
}

/// Fixed-width text table, one row per named link.
pub fn link_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str, &'a LinkBudget)>) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:<16} {:>12} {:>11} {:>11} {:>14} {:>11} {:>6}",
        "reader", "tag", "m_H", "k", "eta", "delivered_uW", "depth", "active"
    );
    for (reader, tag, l) in rows {
        let _ = writeln!(
            out,
            "{:<16} {:<16} {:>12.4e} {:>11.4e} {:>11.4e} {:>14.3} {:>11.4e} {:>6}",
            reader,
            tag,
            l.m_h,
            l.k,
            l.eta,
            l.delivered_power_w * 1e6,
            l.modulation_depth,
            if l.readable() { "yes" } else { "no" }
        );
    }
    out
}
