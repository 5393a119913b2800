//! Independent reference implementations for the integration and acceptance
//! tests. Nothing here calls into the crate's solvers.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use bodynfc::circuit::LinkBudget;
use bodynfc::geometry::{Point3, WirePath};

pub const MU0: f64 = 4.0e-7 * PI;

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Closed polygon approximating a circle of `radius` at height `z`, with
/// sides no longer than `max_side`.
pub fn circle(radius: f64, z: f64, max_side: f64) -> WirePath {
    let n = (2.0 * PI * radius / max_side).ceil() as usize;
    let pts = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            Point3::new(radius * t.cos(), radius * t.sin(), z)
        })
        .collect();
    WirePath::new(pts, true).unwrap()
}

/// Complete elliptic integrals K(m) and E(m), parameter m = k², by the
/// arithmetic-geometric mean.
pub fn elliptic_ke(m: f64) -> (f64, f64) {
    let mut a = 1.0;
    let mut g = (1.0 - m).sqrt();
    let mut c = m.sqrt();
    let mut sum = 0.5 * c * c;
    let mut pow = 0.5;
    for _ in 0..40 {
        let an = 0.5 * (a + g);
        c = 0.5 * (a - g);
        g = (a * g).sqrt();
        a = an;
        pow *= 2.0;
        sum += pow * c * c;
        if c.abs() < 1e-17 {
            break;
        }
    }
    let k = PI / (2.0 * a);
    (k, k * (1.0 - sum))
}

/// Maxwell's mutual inductance of coaxial circular filaments of radii `a`,
/// `b` at axial separation `d`.
pub fn coaxial_mutual(a: f64, b: f64, d: f64) -> f64 {
    let m = 4.0 * a * b / ((a + b).powi(2) + d * d);
    let k = m.sqrt();
    let (kk, ee) = elliptic_ke(m);
    MU0 * (a * b).sqrt() * ((2.0 / k - k) * kk - 2.0 / k * ee)
}

/// Far-field mutual inductance of coaxial loops seen as dipoles.
pub fn dipole_mutual(a: f64, b: f64, d: f64) -> f64 {
    MU0 * PI * a * a * b * b / (2.0 * d.powi(3))
}

/// Field magnitude per ampere at distance `rho` from an infinite wire.
pub fn infinite_wire_field(rho: f64) -> f64 {
    MU0 / (2.0 * PI * rho)
}

/// Field per ampere at the center of a circular loop.
pub fn loop_center_field(radius: f64) -> f64 {
    MU0 / (2.0 * radius)
}

/// Thin round-wire loop inductance with geometric mean radius `r_g`.
pub fn loop_self_inductance(radius: f64, r_g: f64) -> f64 {
    MU0 * radius * ((8.0 * radius / r_g).ln() - 2.0)
}

/// `η = x / (1 + sqrt(1 + x))²`, `x = k² Q1 Q2`.
pub fn eta(k: f64, q1: f64, q2: f64) -> f64 {
    let x = k * k * q1 * q2;
    x / (1.0 + (1.0 + x).sqrt()).powi(2)
}

/// Rounds a depth-first mask descent needs to singulate `uids`, counted
/// straight from the tree: every node is one round, and a slot holding two
/// or more uids spawns a child node one slot-width deeper.
pub fn brute_force_rounds(uids: &[u64], slot_bits: u32) -> usize {
    fn node(uids: &[u64], depth: u32, bits: u32) -> usize {
        let mut slots: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &u in uids {
            let key = if depth >= 64 { 0 } else { (u >> depth) & ((1u64 << bits) - 1) };
            slots.entry(key).or_default().push(u);
        }
        1 + slots
            .values()
            .filter(|v| v.len() > 1)
            .map(|v| node(v, depth + bits, bits))
            .sum::<usize>()
    }
    node(uids, 0, slot_bits)
}

/// Rounds for the single-slot reader: every command is answered in one slot
/// and a collision splits on the next uid bit, visiting both halves.
pub fn brute_force_rounds_binary(uids: &[u64]) -> usize {
    fn node(uids: &[u64], depth: u32) -> usize {
        if uids.len() < 2 {
            return 1;
        }
        let (ones, zeros): (Vec<u64>, Vec<u64>) = uids.iter().partition(|&&u| (u >> depth) & 1 == 1);
        1 + node(&zeros, depth + 1) + node(&ones, depth + 1)
    }
    node(uids, 0)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Expected rounds for `n` uniformly random uids in a `slots`-ary descent:
/// `E(n) = 1 + slots · Σ_{k≥2} C(n,k) p^k (1-p)^(n-k) E(k)` with `p = 1/slots`,
/// solved for the `k = n` term.
pub fn expected_rounds(n: usize, slots: usize) -> f64 {
    let p = 1.0 / slots as f64;
    let mut e = vec![1.0; n + 1];
    for m in 2..=n {
        let term = |k: usize| slots as f64 * binomial(m, k) * p.powi(k as i32) * (1.0 - p).powi((m - k) as i32);
        let known: f64 = (2..m).map(|k| term(k) * e[k]).sum();
        e[m] = (1.0 + known) / (1.0 - term(m));
    }
    e[n]
}

/// A link budget that passes both power and detection thresholds.
pub fn readable_link() -> LinkBudget {
    LinkBudget {
        m_h: 5e-8,
        k: 0.03,
        eta: 0.3,
        delivered_power_w: 0.06,
        induced_voltage_v: 1.0,
        modulation_depth: 0.3,
        activation_threshold_w: 845e-6,
        detection_threshold: 1e-3,
    }
}

/// Ring 10% duty average, written out from the two mode powers.
pub fn ring_ten_percent_average() -> f64 {
    0.1 * 2.02e-3 + 0.9 * 371e-6
}
