use serde::{Deserialize, Serialize};

use super::{b_field, MagneticsError};
use crate::geometry::{Point3, WirePath};

/// RMS log-space residual above which a fit is flagged as non-exponential.
pub const MAX_LOG_RESIDUAL: f64 = 0.5;

/// Rectangle of lateral sample points parallel to the coil plane. Heights are
/// added to `center.z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LateralWindow {
    pub center: Point3,
    pub half_extent_x_m: f64,
    pub half_extent_y_m: f64,
    pub nx: usize,
    pub ny: usize,
}

impl LateralWindow {
    /// Window covering one full period (two traces) of a meander with pitch
    /// `pitch_m` around `center`, 8×16 samples.
    pub fn meander_period(center: Point3, pitch_m: f64) -> Self {
        LateralWindow {
            center,
            half_extent_x_m: pitch_m,
            half_extent_y_m: pitch_m,
            nx: 8,
            ny: 16,
        }
    }

    fn offsets(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        // Cell centers, so a period-wide window samples the period evenly.
        let cell = |i: usize, n: usize, half: f64| -half + (2.0 * i as f64 + 1.0) * half / n as f64;
        (0..self.ny).flat_map(move |j| {
            (0..self.nx).map(move |i| {
                (
                    cell(i, self.nx, self.half_extent_x_m),
                    cell(j, self.ny, self.half_extent_y_m),
                )
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Infinite when the profile does not decrease.
    pub decay_length_m: f64,
    /// Extrapolated RMS |B| at height zero, T/A.
    pub amplitude: f64,
    /// RMS residual of ln|B|.
    pub residual: f64,
    /// Profile not strictly decreasing, or residual above [`MAX_LOG_RESIDUAL`].
    pub flagged: bool,
}

/// Least-squares fit of `ln(values) = ln(B0) − z/λ`.
pub fn fit_log_linear(heights: &[f64], values: &[f64]) -> Result<DecayFit, MagneticsError> {
    if heights.len() != values.len() {
        return Err(MagneticsError::FitInput(format!(
            "{} heights but {} values",
            heights.len(),
            values.len()
        )));
    }
    if heights.len() < 2 {
        return Err(MagneticsError::FitInput("need at least two samples".into()));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(MagneticsError::FitInput(format!("non-positive field magnitude {v}")));
    }
    let n = heights.len() as f64;
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = heights.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = heights.iter().map(|z| (z - mx) * (z - mx)).sum();
    if sxx == 0.0 {
        return Err(MagneticsError::FitInput("heights must not all be equal".into()));
    }
    let sxy: f64 = heights.iter().zip(&ys).map(|(z, y)| (z - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (heights
        .iter()
        .zip(&ys)
        .map(|(z, y)| (y - intercept - slope * z).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let mut order: Vec<usize> = (0..heights.len()).collect();
    order.sort_by(|&a, &b| heights[a].total_cmp(&heights[b]));
    let decreasing = order.windows(2).all(|w| values[w[1]] < values[w[0]]);
    Ok(DecayFit {
        decay_length_m: if slope < 0.0 { -1.0 / slope } else { f64::INFINITY },
        amplitude: intercept.exp(),
        residual,
        flagged: !decreasing || residual > MAX_LOG_RESIDUAL,
    })
}

/// Fits the exponential decay of RMS |B| over `window` against height above
/// the window plane.
pub fn fit_decay(
    path: &WirePath,
    heights: &[f64],
    window: &LateralWindow,
) -> Result<DecayFit, MagneticsError> {
    if heights.len() < 4 {
        return Err(MagneticsError::FitInput(format!(
            "need at least 4 heights, got {}",
            heights.len()
        )));
    }
    if let Some(h) = heights.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
        return Err(MagneticsError::FitInput(format!("height {h} m must be positive")));
    }
    if window.nx == 0 || window.ny == 0 {
        return Err(MagneticsError::FitInput("empty lateral window".into()));
    }
    let count = (window.nx * window.ny) as f64;
    let mut rms = Vec::with_capacity(heights.len());
    for &h in heights {
        let mut sum = 0.0;
        for (dx, dy) in window.offsets() {
            let p = window.center + Point3::new(dx, dy, h);
            sum += b_field(path, p)?.norm_sq();
        }
        rms.push((sum / count).sqrt());
    }
    fit_log_linear(heights, &rms)
}
