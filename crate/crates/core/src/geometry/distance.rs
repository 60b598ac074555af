//! Hausdorff distance between polylines and the area-to-distance bound.

use crate::error::{invalid, Result};
use crate::geometry::level_set::LevelPolyline;

fn point_segment(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut ab2 = 0.0;
    let mut dot = 0.0;
    for k in 0..p.len().min(a.len()) {
        let ab = b[k] - a[k];
        ab2 += ab * ab;
        dot += (p[k] - a[k]) * ab;
    }
    let s = if ab2 > 0.0 { (dot / ab2).clamp(0.0, 1.0) } else { 0.0 };
    (0..p.len().min(a.len()))
        .map(|k| (p[k] - a[k] - s * (b[k] - a[k])).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Largest distance from a vertex of `a` to the polyline `b`.
pub fn directed_hausdorff(a: &LevelPolyline, b: &LevelPolyline) -> f64 {
    a.vertices
        .iter()
        .map(|p| {
            if b.vertices.len() == 1 {
                return super::level_set::dist(p, &b.vertices[0]);
            }
            b.segments()
                .map(|(s, e)| point_segment(p, s, e))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance: vertices of each polyline projected onto the
/// segments of the other.
pub fn hausdorff_distance(a: &LevelPolyline, b: &LevelPolyline) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("hausdorff distance needs non-empty polylines"));
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

/// Calibrated constant in the area-to-distance bound.
pub const AREA_DISTANCE_CONSTANT: f64 = 3.0;

/// Bound on the boundary distance between a ball of radius `r` and a convex
/// subset missing area at most `eps`: `C eps^{2/3} r^{-1/3}`.
pub fn area_to_distance_bound(r: f64, eps: f64) -> Result<f64> {
    if !(r > 0.0 && eps > 0.0) || !r.is_finite() || !eps.is_finite() {
        return Err(invalid(format!("radius {r} and area {eps} must be positive")));
    }
    Ok(AREA_DISTANCE_CONSTANT * eps.powf(2.0 / 3.0) * r.powf(-1.0 / 3.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle(r: f64, n: usize) -> LevelPolyline {
        LevelPolyline::from_curve(n, 0.0, |s| {
            let a = 2.0 * PI * s;
            [r * a.cos(), r * a.sin()]
        })
    }

    #[test]
    fn identical_is_zero() {
        let c = circle(1.0, 100);
        assert_eq!(hausdorff_distance(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn concentric_circles() {
        let d = hausdorff_distance(&circle(1.0, 400), &circle(1.1, 400)).unwrap();
        assert!((d - 0.1).abs() < 1e-3);
    }

    #[test]
    fn bound_scaling() {
        let a = area_to_distance_bound(1.0, 0.1).unwrap();
        let b = area_to_distance_bound(8.0, 0.1).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        assert!(area_to_distance_bound(1.0, 1e-30).unwrap() < 1e-18);
        assert!(area_to_distance_bound(0.0, 1.0).is_err());
        assert!(area_to_distance_bound(1.0, -1.0).is_err());
    }
}
