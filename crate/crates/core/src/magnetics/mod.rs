//! Magnetoquasistatic fields and lumped coil parameters computed from
//! centerline polylines.

mod decay;
mod field;
mod inductance;

pub use decay::{fit_decay, fit_log_linear, DecayFit, LateralWindow, MAX_LOG_RESIDUAL};
pub use field::{b_field, field_map, field_map_csv, FieldSample, Grid3, SINGULARITY_GUARD_M};
pub use inductance::{
    ac_resistance, coil_electrical, gmd_radius, mutual_inductance,
    mutual_inductance_with_max_segment, self_inductance, self_inductance_with_max_segment,
    skin_depth, CoilElectrical,
};

use thiserror::Error;

use crate::geometry::GeometryError;

/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
/// μ₀/4π, H/m.
pub const MU0_OVER_4PI: f64 = 1.0e-7;
/// NFC carrier, Hz.
pub const CARRIER_FREQUENCY_HZ: f64 = 13.56e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MagneticsError {
    #[error("field point {point:?} lies {distance_m:.3e} m from segment {segment}")]
    Singular {
        segment: usize,
        point: [f64; 3],
        distance_m: f64,
    },
    #[error("paths touch: segments {segment_a} and {segment_b} are {distance_m:.3e} m apart")]
    TouchingPaths {
        segment_a: usize,
        segment_b: usize,
        distance_m: f64,
    },
    #[error("invalid frequency {0} Hz")]
    InvalidFrequency(f64),
    #[error("inconsistent coil electricals: {0}")]
    Inconsistent(String),
    #[error("decay fit: {0}")]
    FitInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
