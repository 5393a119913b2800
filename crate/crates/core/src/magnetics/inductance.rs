//! Neumann-integral inductances, skin-effect resistance and resonant coil
//! parameters.
//!
//! Segment pairs far apart use the midpoint rule. Pairs within
//! [`NEAR_FACTOR`] segment lengths integrate the inner line integral in closed
//! form and the outer one with 8-point Gauss–Legendre, symmetrized over both
//! orderings so that `M(a, b) == M(b, a)` to rounding.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{MagneticsError, CARRIER_FREQUENCY_HZ, MU0, MU0_OVER_4PI};
use crate::geometry::{
    discretize, segment_segment_distance, Conductor, Point3, WirePath, DEFAULT_MAX_SEGMENT_M,
};

/// Closest approach allowed between two distinct conductors.
const TOUCH_GUARD_M: f64 = 1e-6;

/// Pairs whose midpoints are closer than this many segment lengths get the
/// accurate treatment.
const NEAR_FACTOR: f64 = 8.0;

/// Geometric-mean-distance coefficient of a thin rectangular cross-section.
const GMD_RECT_COEFF: f64 = 0.2235;

const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

#[derive(Debug, Clone, Copy)]
struct Seg {
    a: Point3,
    b: Point3,
    u: Point3,
    len: f64,
    mid: Point3,
}

fn prepare(path: &WirePath) -> Vec<Seg> {
    path.segments()
        .map(|(a, b)| {
            let d = b - a;
            let len = d.norm();
            Seg {
                a,
                b,
                u: d * (1.0 / len),
                len,
                mid: a + d * 0.5,
            }
        })
        .collect()
}

/// `∫ dt / sqrt(t² + d2)` from `t1` to `t2`, written to avoid cancellation on
/// either side of the foot point.
#[inline]
fn log_kernel(t1: f64, t2: f64, d2: f64) -> f64 {
    let s1 = (t1 * t1 + d2).sqrt();
    let s2 = (t2 * t2 + d2).sqrt();
    if t1 >= 0.0 {
        ((t2 + s2) / (t1 + s1)).ln()
    } else if t2 <= 0.0 {
        ((s1 - t1) / (s2 - t2)).ln()
    } else {
        ((t2 + s2) * (s1 - t1) / d2).ln()
    }
}

/// `∫ ds / sqrt(|p - x(s)|² + c2)` along segment `seg`.
#[inline]
fn line_integral(p: Point3, seg: &Seg, c2: f64) -> f64 {
    let r = p - seg.a;
    let along = r.dot(seg.u);
    let d2 = (r.norm_sq() - along * along).max(0.0) + c2;
    log_kernel(-along, seg.len - along, d2)
}

/// `∫∫ ds ds' / sqrt(|x - x'|² + c2)` over two segments, without the
/// direction factor.
fn near_pair(si: &Seg, sj: &Seg, c2: f64) -> f64 {
    let outer = |s: &Seg, other: &Seg| -> f64 {
        let half = 0.5 * s.len;
        GL8_NODES
            .iter()
            .zip(GL8_WEIGHTS)
            .map(|(&x, w)| w * line_integral(s.a + s.u * (half * (x + 1.0)), other, c2))
            .sum::<f64>()
            * half
    };
    0.5 * (outer(si, sj) + outer(sj, si))
}

/// Same double integral over one segment with itself, regularized by `c`.
fn self_pair(len: f64, c: f64) -> f64 {
    let h = (len * len + c * c).sqrt();
    2.0 * (len * (len / c).asinh() - h + c)
}

/// Mutual inductance between two paths, H. Each path is subdivided to
/// `max_segment` first; closed paths include their closing segment.
pub fn mutual_inductance_with_max_segment(
    a: &WirePath,
    b: &WirePath,
    max_segment: f64,
) -> Result<f64, MagneticsError> {
    let sa = prepare(&discretize(a, max_segment)?);
    let sb = prepare(&discretize(b, max_segment)?);
    let mut total = 0.0;
    for (i, si) in sa.iter().enumerate() {
        let mut row = 0.0;
        for (j, sj) in sb.iter().enumerate() {
            let dot = si.u.dot(sj.u);
            let dist2 = (si.mid - sj.mid).norm_sq();
            let reach = NEAR_FACTOR * si.len.max(sj.len);
            if dist2 < reach * reach {
                let contact = 0.5 * (si.len + sj.len) + TOUCH_GUARD_M;
                if dist2 <= contact * contact {
                    let d = segment_segment_distance(si.a, si.b, sj.a, sj.b);
                    if d < TOUCH_GUARD_M {
                        return Err(MagneticsError::TouchingPaths {
                            segment_a: i,
                            segment_b: j,
                            distance_m: d,
                        });
                    }
                }
                if dot != 0.0 {
                    row += dot * near_pair(si, sj, 0.0);
                }
            } else if dot != 0.0 {
                row += dot * si.len * sj.len / dist2.sqrt();
            }
        }
        total += row;
    }
    Ok(MU0_OVER_4PI * total)
}

/// Neumann mutual inductance at the default 1 mm discretization.
pub fn mutual_inductance(a: &WirePath, b: &WirePath) -> Result<f64, MagneticsError> {
    mutual_inductance_with_max_segment(a, b, DEFAULT_MAX_SEGMENT_M)
}

/// GMD radius of the conductor cross-section.
pub fn gmd_radius(c: &Conductor) -> f64 {
    GMD_RECT_COEFF * (c.trace_width_m + c.foil_thickness_m)
}

/// Self-inductance of the circuit loop formed by `path`, H.
///
/// The Neumann kernel is regularized to `1/sqrt(r² + r_g²)` with `r_g` the
/// cross-section GMD radius, which makes each segment's self term the partial
/// inductance of a straight conductor and keeps coincident return paths finite.
pub fn self_inductance_with_max_segment(
    path: &WirePath,
    c: &Conductor,
    max_segment: f64,
) -> Result<f64, MagneticsError> {
    c.validate()?;
    let circuit = discretize(&path.to_circuit_loop()?, max_segment)?;
    let segs = prepare(&circuit);
    let rg = gmd_radius(c);
    let c2 = rg * rg;
    let mut diagonal = 0.0;
    let mut off = 0.0;
    for (i, si) in segs.iter().enumerate() {
        diagonal += self_pair(si.len, rg);
        let mut row = 0.0;
        for sj in &segs[i + 1..] {
            let dot = si.u.dot(sj.u);
            if dot == 0.0 {
                continue;
            }
            let dist2 = (si.mid - sj.mid).norm_sq();
            let reach = NEAR_FACTOR * si.len.max(sj.len);
            if dist2 < reach * reach {
                row += dot * near_pair(si, sj, c2);
            } else {
                row += dot * si.len * sj.len / (dist2 + c2).sqrt();
            }
        }
        off += row;
    }
    Ok(MU0_OVER_4PI * (diagonal + 2.0 * off))
}

/// Self-inductance at the default 1 mm discretization.
pub fn self_inductance(path: &WirePath, c: &Conductor) -> Result<f64, MagneticsError> {
    self_inductance_with_max_segment(path, c, DEFAULT_MAX_SEGMENT_M)
}

/// Skin depth in the conductor at `f`, m. Infinite at DC.
pub fn skin_depth(c: &Conductor, f: f64) -> f64 {
    if f == 0.0 {
        return f64::INFINITY;
    }
    (c.resistivity_ohm_m / (PI * f * MU0 * c.relative_permeability)).sqrt()
}

/// AC resistance of the path's conductor, Ω, with the thin-foil
/// single-exponential skin model `t_eff = δ(1 - e^(-t/δ))`. No proximity effect.
pub fn ac_resistance(path: &WirePath, c: &Conductor, f: f64) -> Result<f64, MagneticsError> {
    c.validate()?;
    if !(f.is_finite() && f >= 0.0) {
        return Err(MagneticsError::InvalidFrequency(f));
    }
    let delta = skin_depth(c, f);
    let t_eff = if delta.is_infinite() {
        c.foil_thickness_m
    } else {
        -delta * (-c.foil_thickness_m / delta).exp_m1()
    };
    Ok(c.resistivity_ohm_m * path.arc_length() / (c.trace_width_m * t_eff))
}

/// Lumped series-tuned coil at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoilElectrical {
    pub inductance_h: f64,
    pub ac_resistance_ohm: f64,
    pub q_factor: f64,
    pub tuning_capacitance_f: f64,
    pub frequency_hz: f64,
}

impl CoilElectrical {
    const CONSISTENCY_REL_TOL: f64 = 1e-9;

    pub fn new(inductance_h: f64, ac_resistance_ohm: f64, frequency_hz: f64) -> Result<Self, MagneticsError> {
        if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
            return Err(MagneticsError::InvalidFrequency(frequency_hz));
        }
        if !(inductance_h.is_finite() && inductance_h > 0.0) {
            return Err(MagneticsError::Inconsistent(format!("inductance {inductance_h} H must be positive")));
        }
        if !(ac_resistance_ohm.is_finite() && ac_resistance_ohm > 0.0) {
            return Err(MagneticsError::Inconsistent(format!(
                "resistance {ac_resistance_ohm} Ω must be positive"
            )));
        }
        let omega = 2.0 * PI * frequency_hz;
        Ok(CoilElectrical {
            inductance_h,
            ac_resistance_ohm,
            q_factor: omega * inductance_h / ac_resistance_ohm,
            tuning_capacitance_f: 1.0 / (omega * omega * inductance_h),
            frequency_hz,
        })
    }

    /// Coil with a given Q; the series resistance follows as `2πfL/Q`.
    pub fn with_q(inductance_h: f64, q_factor: f64, frequency_hz: f64) -> Result<Self, MagneticsError> {
        if !(q_factor.is_finite() && q_factor > 0.0) {
            return Err(MagneticsError::Inconsistent(format!("Q {q_factor} must be positive")));
        }
        let r = 2.0 * PI * frequency_hz * inductance_h / q_factor;
        Self::new(inductance_h, r, frequency_hz)
    }

    /// Validates externally supplied parameters against `Q = 2πfL/R` and
    /// `C = 1/((2πf)²L)`.
    pub fn from_parts(
        inductance_h: f64,
        ac_resistance_ohm: f64,
        q_factor: f64,
        tuning_capacitance_f: f64,
        frequency_hz: f64,
    ) -> Result<Self, MagneticsError> {
        let derived = Self::new(inductance_h, ac_resistance_ohm, frequency_hz)?;
        let off = |given: f64, want: f64| ((given - want) / want).abs() > Self::CONSISTENCY_REL_TOL;
        if off(q_factor, derived.q_factor) {
            return Err(MagneticsError::Inconsistent(format!(
                "Q {q_factor} disagrees with 2πfL/R = {}",
                derived.q_factor
            )));
        }
        if off(tuning_capacitance_f, derived.tuning_capacitance_f) {
            return Err(MagneticsError::Inconsistent(format!(
                "C {tuning_capacitance_f} F disagrees with resonance at {frequency_hz} Hz"
            )));
        }
        Ok(derived)
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency_hz
    }

    /// Same inductance at a different Q (resistance rederived).
    pub fn with_q_factor(&self, q_factor: f64) -> Result<Self, MagneticsError> {
        Self::with_q(self.inductance_h, q_factor, self.frequency_hz)
    }
}

/// Inductance from the circuit loop, resistance from the path's own conductor length.
pub fn coil_electrical(path: &WirePath, c: &Conductor, f: f64) -> Result<CoilElectrical, MagneticsError> {
    let l = self_inductance(path, c)?;
    let r = ac_resistance(path, c, f)?;
    CoilElectrical::new(l, r, f)
}

impl Default for CoilElectrical {
    /// 1 µH, Q = 30 at the NFC carrier.
    fn default() -> Self {
        CoilElectrical::with_q(1e-6, 30.0, CARRIER_FREQUENCY_HZ).expect("valid constants")
    }
}
