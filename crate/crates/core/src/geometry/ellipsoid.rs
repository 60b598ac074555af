//! Minimum-volume enclosing ellipsoids.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `{x : (x - c)^T A (x - c) <= 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumEllipsoid {
    pub center: Vec<f64>,
    /// Row-major shape matrix `A`.
    pub shape: Vec<Vec<f64>>,
    /// Semi-axis lengths, longest first.
    pub semi_axes: Vec<f64>,
    /// Unit axis directions matching `semi_axes`.
    pub axes: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl MinimumEllipsoid {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `(x - c)^T A (x - c)`.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let mut s = 0.0;
        for i in 0..d.len() {
            for j in 0..d.len() {
                s += d[i] * self.shape[i][j] * d[j];
            }
        }
        s
    }

    /// Longest over shortest semi-axis.
    pub fn axis_ratio(&self) -> f64 {
        self.semi_axes[0] / self.semi_axes[self.semi_axes.len() - 1]
    }

    pub fn volume(&self) -> f64 {
        let unit = match self.dim() {
            2 => std::f64::consts::PI,
            3 => 4.0 / 3.0 * std::f64::consts::PI,
            d => unit_ball_volume(d),
        };
        unit * self.semi_axes.iter().product::<f64>()
    }
}

fn unit_ball_volume(d: usize) -> f64 {
    let mut v = [1.0, 2.0];
    let mut out = if d % 2 == 0 { v[0] } else { v[1] };
    for k in 2..=d {
        let next = 2.0 * std::f64::consts::PI / k as f64 * v[k % 2];
        v[k % 2] = next;
        out = next;
    }
    out
}

/// Relative volume tolerance of the iteration.
pub const ELLIPSOID_TOLERANCE: f64 = 1e-6;

/// Minimum enclosing ellipsoid by Khachiyan's iteration with away steps.
pub fn minimum_ellipsoid(points: &[Vec<f64>]) -> Result<MinimumEllipsoid> {
    minimum_ellipsoid_with_tolerance(points, ELLIPSOID_TOLERANCE)
}

pub fn minimum_ellipsoid_with_tolerance(points: &[Vec<f64>], tol: f64) -> Result<MinimumEllipsoid> {
    let m = points.len();
    let d = points.first().map(|p| p.len()).unwrap_or(0);
    if d == 0 {
        return Err(Error::DegenerateInput("no points".into()));
    }
    if points.iter().any(|p| p.len() != d || p.iter().any(|c| !c.is_finite())) {
        return Err(invalid("points must share a dimension and be finite"));
    }
    if m < d + 1 {
        return Err(Error::DegenerateInput(format!("{m} points cannot span dimension {d}")));
    }
    // Rank check on centered points.
    let mean: Vec<f64> = (0..d)
        .map(|a| points.iter().map(|p| p[a]).sum::<f64>() / m as f64)
        .collect();
    let centered = DMatrix::from_fn(d, m, |a, i| points[i][a] - mean[a]);
    let scale = centered.abs().max().max(f64::MIN_POSITIVE);
    let sv = (centered.clone() / scale).singular_values();
    if sv.iter().any(|&s| s < 1e-10 * (m as f64).sqrt()) {
        return Err(Error::DegenerateInput("points are affinely dependent".into()));
    }

    // Work in centered, scaled coordinates for conditioning.
    let p = centered / scale;
    let q = DMatrix::from_fn(d + 1, m, |a, i| if a < d { p[(a, i)] } else { 1.0 });
    let mut u = DVector::from_element(m, 1.0 / m as f64);
    let dd = (d + 1) as f64;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut x = DMatrix::zeros(d + 1, d + 1);
        for i in 0..m {
            let c = q.column(i);
            x += u[i] * c * c.transpose();
        }
        let xi = x
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("ellipsoid moment matrix singular".into()))?
            .inverse();
        let mvals: Vec<f64> = (0..m)
            .map(|i| {
                let c = q.column(i);
                (c.transpose() * &xi * c)[(0, 0)]
            })
            .collect();
        let (jp, mp) = mvals
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let (jm, mm) = mvals
            .iter()
            .enumerate()
            .filter(|(i, _)| u[*i] > 0.0)
            .fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
        let eps_plus = mp / dd - 1.0;
        let eps_minus = 1.0 - mm / dd;
        if eps_plus.max(eps_minus) <= tol || iterations > 200_000 {
            break;
        }
        if eps_plus > eps_minus {
            let beta = (mp - dd) / (dd * (mp - 1.0));
            u *= 1.0 - beta;
            u[jp] += beta;
        } else {
            let beta = ((dd - mm) / (dd * (mm - 1.0))).min(u[jm] / (1.0 - u[jm]));
            u *= 1.0 + beta;
            u[jm] -= beta;
            if u[jm] < 0.0 {
                u[jm] = 0.0;
            }
        }
    }

    let c = &p * &u;
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..m {
        let col = p.column(i);
        cov += u[i] * col * col.transpose();
    }
    cov -= &c * c.transpose();
    let mut a = cov
        .cholesky()
        .ok_or_else(|| Error::Numerical("ellipsoid covariance singular".into()))?
        .inverse()
        / d as f64;
    // Rescale so every input lies inside exactly.
    let worst = (0..m)
        .map(|i| {
            let v = p.column(i) - &c;
            (v.transpose() * &a * &v)[(0, 0)]
        })
        .fold(0.0, f64::max);
    if worst > 1.0 {
        a /= worst;
    }
    let a = a / (scale * scale);
    let center: Vec<f64> = (0..d).map(|k| c[k] * scale + mean[k]).collect();

    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    // Smallest eigenvalue of A is the longest axis.
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let semi_axes = order.iter().map(|&i| 1.0 / eig.eigenvalues[i].sqrt()).collect();
    let axes = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    let shape = (0..d).map(|i| (0..d).map(|j| a[(i, j)]).collect()).collect();
    Ok(MinimumEllipsoid {
        center,
        shape,
        semi_axes,
        axes,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gives_circle() {
        let pts = vec![
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
        ];
        let e = minimum_ellipsoid(&pts).unwrap();
        assert!(e.center.iter().all(|c| c.abs() < 1e-9));
        for s in &e.semi_axes {
            assert!((s - 2f64.sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn ellipse_points_recover_axes() {
        let pts: Vec<Vec<f64>> = (0..64)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
                vec![2.0 * a.cos() + 0.3, a.sin() - 0.1]
            })
            .collect();
        let e = minimum_ellipsoid(&pts).unwrap();
        assert!((e.semi_axes[0] - 2.0).abs() < 1e-4);
        assert!((e.semi_axes[1] - 1.0).abs() < 1e-4);
        assert!((e.center[0] - 0.3).abs() < 1e-6);
        assert!(e.axes[0][0].abs() > 0.999_999);
    }

    #[test]
    fn collinear_points_rejected() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(matches!(minimum_ellipsoid(&pts), Err(Error::DegenerateInput(_))));
        assert!(minimum_ellipsoid(&pts[..2]).is_err());
    }

    #[test]
    fn tetrahedron_in_three_dimensions() {
        let pts = vec![
            vec![1.0, 1.0, 1.0],
            vec![1.0, -1.0, -1.0],
            vec![-1.0, 1.0, -1.0],
            vec![-1.0, -1.0, 1.0],
        ];
        let e = minimum_ellipsoid(&pts).unwrap();
        for s in &e.semi_axes {
            assert!((s - 3f64.sqrt()).abs() < 1e-5);
        }
        assert!((e.volume() - 4.0 / 3.0 * std::f64::consts::PI * 3f64.powf(1.5)).abs() < 1e-4);
    }
}
