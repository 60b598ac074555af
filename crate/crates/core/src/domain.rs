//! Convex domains and the grids that cover them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{CartesianGrid, MAX_DIM};

/// `{ |x'|^2 / r^2 + x_n^2 / t^2 < 1 }` with `x'` the first `n - 1` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidDomain {
    dim: usize,
    r: f64,
    t: f64,
}

impl EllipsoidDomain {
    pub fn new(dim: usize, r: f64, t: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(invalid(format!("dimension {dim} not supported")));
        }
        if !(r > 0.0 && t > 0.0) || !r.is_finite() || !t.is_finite() {
            return Err(Error::DegenerateDomain(format!("radii r={r}, t={t} must be positive")));
        }
        Ok(Self { dim, r, t })
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, radius, radius)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Transverse radius.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Axial radius.
    pub fn t(&self) -> f64 {
        self.t
    }

    fn axis_radius(&self, axis: usize) -> f64 {
        if axis + 1 == self.dim {
            self.t
        } else {
            self.r
        }
    }

    /// `sum x_i^2 / a_i^2`; the domain is where this is below one.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        (0..self.dim).map(|a| (x[a] / self.axis_radius(a)).powi(2)).sum()
    }

    pub fn volume(&self) -> f64 {
        match self.dim {
            2 => std::f64::consts::PI * self.r * self.t,
            _ => 4.0 / 3.0 * std::f64::consts::PI * self.r * self.r * self.t,
        }
    }
}

/// Axis-aligned open box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || !(2..=MAX_DIM).contains(&lo.len()) {
            return Err(invalid("box corners must have equal length 2 or 3"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(Error::DegenerateDomain("box has an empty side".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Ellipsoid(EllipsoidDomain),
    Box(BoxDomain),
}

impl From<EllipsoidDomain> for Domain {
    fn from(e: EllipsoidDomain) -> Self {
        Domain::Ellipsoid(e)
    }
}

impl From<BoxDomain> for Domain {
    fn from(b: BoxDomain) -> Self {
        Domain::Box(b)
    }
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Ellipsoid(e) => e.dim,
            Domain::Box(b) => b.lo.len(),
        }
    }

    /// Strict membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Ellipsoid(e) => e.quadratic(x) < 1.0,
            Domain::Box(b) => (0..b.lo.len()).all(|a| x[a] > b.lo[a] && x[a] < b.hi[a]),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            Domain::Ellipsoid(e) => vec![0.0; e.dim],
            Domain::Box(b) => b.lo.iter().zip(&b.hi).map(|(l, h)| 0.5 * (l + h)).collect(),
        }
    }

    pub fn half_widths(&self) -> Vec<f64> {
        match self {
            Domain::Ellipsoid(e) => (0..e.dim).map(|a| e.axis_radius(a)).collect(),
            Domain::Box(b) => b.lo.iter().zip(&b.hi).map(|(l, h)| 0.5 * (h - l)).collect(),
        }
    }

    /// Distance from an interior point `x` to the boundary along `axis` in
    /// direction `sign` (±1).
    pub fn boundary_distance(&self, x: &[f64], axis: usize, sign: f64) -> f64 {
        match self {
            Domain::Ellipsoid(e) => {
                // c s^2 + 2 sign c x_a s + (q - 1) = 0, positive root.
                let c = 1.0 / e.axis_radius(axis).powi(2);
                let q = e.quadratic(x);
                let b = sign * c * x[axis];
                let disc = (b * b - c * (q - 1.0)).max(0.0);
                // Root written to avoid cancellation when b > 0.
                let s = if b >= 0.0 {
                    (1.0 - q) / (b + disc.sqrt())
                } else {
                    (-b + disc.sqrt()) / c
                };
                s.max(0.0)
            }
            Domain::Box(b) => {
                if sign > 0.0 {
                    b.hi[axis] - x[axis]
                } else {
                    x[axis] - b.lo[axis]
                }
            }
        }
    }

    /// Point on the boundary reached from `x` along `axis`.
    pub fn boundary_point(&self, x: &[f64], axis: usize, sign: f64) -> Vec<f64> {
        let s = self.boundary_distance(x, axis, sign);
        let mut p = x[..self.dim()].to_vec();
        p[axis] += sign * s;
        p
    }
}

/// Nodes closer than this fraction of the spacing to the boundary are not
/// unknowns.
pub const NODE_SLIVER: f64 = 1e-3;

/// Builds a grid over the domain's bounding box with one spacing of margin.
///
/// `resolution` is the node count along the longest axis (rounded up to an
/// odd count so that the domain center is a node). The mask marks nodes
/// strictly inside the domain.
pub fn build_grid(domain: &Domain, resolution: usize) -> Result<(CartesianGrid, Vec<bool>)> {
    if resolution < 3 {
        return Err(invalid(format!("resolution {resolution} below 3")));
    }
    let half = domain.half_widths();
    let longest = half.iter().cloned().fold(0.0, f64::max);
    let spacing = if resolution > 3 {
        2.0 * longest / (resolution - 3) as f64
    } else {
        longest
    };
    build_grid_with_spacing(domain, spacing)
}

pub fn build_grid_with_spacing(domain: &Domain, spacing: f64) -> Result<(CartesianGrid, Vec<bool>)> {
    let grid = CartesianGrid::centered(&domain.center(), &domain.half_widths(), spacing)?;
    let dim = grid.dim();
    // Nodes within a sliver of the boundary are left to the boundary data;
    // a nearly vanishing arm makes the one-sided stencils ill-conditioned.
    let sliver = NODE_SLIVER * spacing;
    let mask = (0..grid.len())
        .map(|i| {
            let x = &grid.coord(i)[..dim];
            domain.contains(x)
                && (0..dim).all(|a| {
                    domain.boundary_distance(x, a, 1.0) > sliver && domain.boundary_distance(x, a, -1.0) > sliver
                })
        })
        .collect();
    Ok((grid, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_disk_resolution_five() {
        let d: Domain = EllipsoidDomain::ball(2, 1.0).unwrap().into();
        let (g, mask) = build_grid(&d, 5).unwrap();
        assert_eq!(g.counts(), &[5, 5]);
        let c = g.nearest(&[0.0, 0.0]).unwrap();
        assert!(mask[c]);
    }

    #[test]
    fn ellipse_node_count_matches_area() {
        let e = EllipsoidDomain::new(2, 2.0, 1.0).unwrap();
        let (g, mask) = build_grid(&e.into(), 33).unwrap();
        let count = mask.iter().filter(|&&m| m).count() as f64;
        let expected = PI * 2.0 * 1.0 / g.spacing().powi(2);
        assert!((count - expected).abs() / expected < 0.02, "{count} vs {expected}");
    }

    #[test]
    fn degenerate_axis_is_rejected() {
        assert!(matches!(
            EllipsoidDomain::new(2, 1.0, 0.0),
            Err(Error::DegenerateDomain(_))
        ));
        assert!(BoxDomain::new(vec![0.0, 0.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn boundary_distance_on_ellipse() {
        let d: Domain = EllipsoidDomain::new(2, 2.0, 1.0).unwrap().into();
        assert!((d.boundary_distance(&[0.0, 0.0], 0, 1.0) - 2.0).abs() < 1e-14);
        assert!((d.boundary_distance(&[1.0, 0.0], 0, -1.0) - 3.0).abs() < 1e-14);
        let s = d.boundary_distance(&[1.0, 0.2], 1, 1.0);
        let y = 0.2 + s;
        assert!((0.25 + y * y - 1.0).abs() < 1e-14);
    }
}
