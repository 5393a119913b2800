use std::fmt::Write as _;

use super::{MagneticsError, MU0_OVER_4PI};
use crate::geometry::{Point3, WirePath};

/// Field points closer than this to a conductor segment are rejected.
pub const SINGULARITY_GUARD_M: f64 = 1e-6;

/// Flux density per ampere of drive current at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub point: Point3,
    /// Tesla per ampere.
    pub b: Point3,
}

/// Exact field of one straight filament from `a` to `b` carrying 1 A.
///
/// Returns `None` when `p` is within the singularity guard of the segment.
#[inline]
fn segment_field(p: Point3, a: Point3, b: Point3) -> Option<Point3> {
    let r1 = p - a;
    let r2 = p - b;
    let n1 = r1.norm();
    let n2 = r2.norm();
    if n1 < SINGULARITY_GUARD_M || n2 < SINGULARITY_GUARD_M {
        return None;
    }
    let c = r1.cross(r2);
    let ab = b - a;
    let ab_sq = ab.norm_sq();
    let along = r1.dot(ab);
    if c.norm_sq() < SINGULARITY_GUARD_M * SINGULARITY_GUARD_M * ab_sq
        && along > 0.0
        && along < ab_sq
    {
        return None;
    }
    let denom = n1 * n2 * (n1 * n2 + r1.dot(r2));
    if denom == 0.0 {
        // Collinear and outside the segment: no field.
        return Some(Point3::ZERO);
    }
    Some(c * (MU0_OVER_4PI * (n1 + n2) / denom))
}

/// Biot–Savart field of `path` at `p`, T/A, summed segment by segment with
/// the closed-form straight-filament expression.
pub fn b_field(path: &WirePath, p: Point3) -> Result<Point3, MagneticsError> {
    let mut total = Point3::ZERO;
    for (i, (a, b)) in path.segments().enumerate() {
        match segment_field(p, a, b) {
            Some(field) => total += field,
            None => {
                let (_, distance_m) = path.nearest_segment(p);
                return Err(MagneticsError::Singular {
                    segment: i,
                    point: p.into(),
                    distance_m,
                });
            }
        }
    }
    Ok(total)
}

/// Regular lattice of points, x varying fastest, then y, then z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3 {
    pub origin: Point3,
    pub spacing: [f64; 3],
    pub counts: [usize; 3],
}

impl Grid3 {
    /// Lattice spanning `lo..=hi` with `counts` points per axis; an axis with
    /// one point sits at `lo`.
    pub fn spanning(lo: Point3, hi: Point3, counts: [usize; 3]) -> Self {
        let step = |lo: f64, hi: f64, n: usize| {
            if n > 1 {
                (hi - lo) / (n - 1) as f64
            } else {
                0.0
            }
        };
        Grid3 {
            origin: lo,
            spacing: [
                step(lo.x, hi.x, counts[0]),
                step(lo.y, hi.y, counts[1]),
                step(lo.z, hi.z, counts[2]),
            ],
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> impl Iterator<Item = Point3> + '_ {
        let [nx, ny, nz] = self.counts;
        (0..nz).flat_map(move |k| {
            (0..ny).flat_map(move |j| {
                (0..nx).map(move |i| {
                    self.origin
                        + Point3::new(
                            i as f64 * self.spacing[0],
                            j as f64 * self.spacing[1],
                            k as f64 * self.spacing[2],
                        )
                })
            })
        })
    }
}

/// [`b_field`] at every point, in input order.
pub fn field_map(
    path: &WirePath,
    points: impl IntoIterator<Item = Point3>,
) -> Result<Vec<FieldSample>, MagneticsError> {
    points
        .into_iter()
        .map(|point| b_field(path, point).map(|b| FieldSample { point, b }))
        .collect()
}

/// `x,y,z,bx,by,bz` with a header row, SI units.
pub fn field_map_csv(samples: &[FieldSample]) -> String {
    let mut out = String::with_capacity(64 * (samples.len() + 1));
    out.push_str("x,y,z,bx,by,bz\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.point.x, s.point.y, s.point.z, s.b.x, s.b.y, s.b.z
        );
    }
    out
}
