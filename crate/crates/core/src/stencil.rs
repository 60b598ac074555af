//! Finite-difference stencils on masked grids with Dirichlet cut cells.
//!
//! Every unknown carries linear combinations for its first and second
//! derivatives. Where a neighbor falls outside the mask the boundary point on
//! that grid line is used instead, with the non-uniform three-point formulas
//! (Shortley–Weller). Mixed derivatives average whichever quadrant formulas
//! are available.

use std::fmt;
use std::sync::Arc;

use crate::domain::Domain;
use crate::error::{invalid, Result};
use crate::grid::{CartesianGrid, GridFunction};

/// Dirichlet data.
#[derive(Clone)]
pub enum Boundary {
    Constant(f64),
    Function(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl Boundary {
    pub fn function(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Boundary::Function(Arc::new(f))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Boundary::Constant(g) => *g,
            Boundary::Function(f) => f(x),
        }
    }
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Constant(g) => write!(f, "Constant({g})"),
            Boundary::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// `sum_j c_j x_j + constant` over unknowns.
#[derive(Debug, Clone, Default)]
pub struct LinComb {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinComb {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |s, &(j, c)| s + c * x[j])
    }

    fn add(&mut self, other: &LinComb, w: f64) {
        self.constant += w * other.constant;
        for &(j, c) in &other.terms {
            match self.terms.iter_mut().find(|t| t.0 == j) {
                Some(t) => t.1 += w * c,
                None => self.terms.push((j, w * c)),
            }
        }
    }
}

/// Value at a neighbor: either an unknown or a boundary value at distance `d`.
#[derive(Clone, Copy)]
enum Side {
    Node(usize),
    Boundary { dist: f64, value: f64 },
}

/// Index into the packed upper-triangular second-derivative storage.
#[inline]
pub fn pair_index(dim: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    // Rows of the upper triangle: dim, dim-1, ...
    a * dim - a * (a + 1) / 2 + b
}

pub fn pair_count(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

#[derive(Debug, Clone)]
pub struct Discretization {
    grid: CartesianGrid,
    mask: Vec<bool>,
    unknown_of: Vec<usize>,
    node_of: Vec<usize>,
    first: Vec<LinComb>,
    second: Vec<LinComb>,
    /// True when all axis and diagonal neighbors are unknowns.
    interior: Vec<bool>,
}

impl Discretization {
    pub fn new(domain: &Domain, grid: CartesianGrid, mask: Vec<bool>, boundary: &Boundary) -> Result<Self> {
        let dim = grid.dim();
        if domain.dim() != dim || mask.len() != grid.len() {
            return Err(invalid("domain, grid and mask disagree"));
        }
        let mut unknown_of = vec![usize::MAX; grid.len()];
        let mut node_of = Vec::new();
        for (lin, &m) in mask.iter().enumerate() {
            if m {
                unknown_of[lin] = node_of.len();
                node_of.push(lin);
            }
        }
        if node_of.is_empty() {
            return Err(invalid("mask has no interior nodes"));
        }
        let h = grid.spacing();
        let np = pair_count(dim);
        let mut first = Vec::with_capacity(node_of.len() * dim);
        let mut second = vec![LinComb::default(); node_of.len() * np];
        let mut interior = vec![true; node_of.len()];
        for (i, &lin) in node_of.iter().enumerate() {
            let x = grid.coord(lin);
            let side = |axis: usize, sign: isize| -> Side {
                if let Some(nb) = grid.neighbor(lin, axis, sign) {
                    if mask[nb] {
                        return Side::Node(unknown_of[nb]);
                    }
                }
                let d = domain
                    .boundary_distance(&x[..dim], axis, sign as f64)
                    .clamp(1e-6 * h, h);
                let mut p = x[..dim].to_vec();
                p[axis] += sign as f64 * d;
                Side::Boundary {
                    dist: d,
                    value: boundary.value(&p),
                }
            };
            for a in 0..dim {
                let (l, r) = (side(a, -1), side(a, 1));
                let push = |lc: &mut LinComb, s: Side, c: f64| -> f64 {
                    match s {
                        Side::Node(j) => {
                            lc.terms.push((j, c));
                            h
                        }
                        Side::Boundary { dist, value } => {
                            lc.constant += c * value;
                            dist
                        }
                    }
                };
                let hl = match l {
                    Side::Node(_) => h,
                    Side::Boundary { dist, .. } => dist,
                };
                let hr = match r {
                    Side::Node(_) => h,
                    Side::Boundary { dist, .. } => dist,
                };
                if matches!(l, Side::Boundary { .. }) || matches!(r, Side::Boundary { .. }) {
                    interior[i] = false;
                }
                // u_a = (hl^2 (uR - u0) + hr^2 (u0 - uL)) / (hl hr (hl + hr))
                let den = hl * hr * (hl + hr);
                let mut d1 = LinComb::default();
                push(&mut d1, r, hl * hl / den);
                push(&mut d1, l, -hr * hr / den);
                d1.terms.push((i, (hr * hr - hl * hl) / den));
                first.push(d1);
                // u_aa = 2 ((uR - u0)/hr - (u0 - uL)/hl) / (hl + hr)
                let s = 2.0 / (hl + hr);
                let mut d2 = LinComb::default();
                push(&mut d2, r, s / hr);
                push(&mut d2, l, s / hl);
                d2.terms.push((i, -s / hr - s / hl));
                second[i * np + pair_index(dim, a, a)] = d2;
            }
            for a in 0..dim {
                for b in a + 1..dim {
                    let node = |sa: isize, sb: isize| -> Option<usize> {
                        let mut off = [0isize; 3];
                        off[a] = sa;
                        off[b] = sb;
                        let k = grid.offset(lin, &off[..dim])?;
                        mask[k].then(|| unknown_of[k])
                    };
                    let quadrant = |sa: isize, sb: isize| -> Option<LinComb> {
                        let d = node(sa, sb)?;
                        let pa = node(sa, 0)?;
                        let pb = node(0, sb)?;
                        let c = (sa * sb) as f64 / (h * h);
                        Some(LinComb {
                            terms: vec![(d, c), (pa, -c), (pb, -c), (i, c)],
                            constant: 0.0,
                        })
                    };
                    let q: Vec<Option<LinComb>> = [(1, 1), (-1, -1), (1, -1), (-1, 1)]
                        .iter()
                        .map(|&(sa, sb)| quadrant(sa, sb))
                        .collect();
                    let pair1 = q[0].is_some() && q[1].is_some();
                    let pair2 = q[2].is_some() && q[3].is_some();
                    let chosen: Vec<&LinComb> = if pair1 && pair2 {
                        q.iter().flatten().collect()
                    } else if pair1 {
                        vec![q[0].as_ref().unwrap(), q[1].as_ref().unwrap()]
                    } else if pair2 {
                        vec![q[2].as_ref().unwrap(), q[3].as_ref().unwrap()]
                    } else {
                        q.iter().flatten().collect()
                    };
                    if !(pair1 && pair2) {
                        interior[i] = false;
                    }
                    let mut lc = LinComb::default();
                    if !chosen.is_empty() {
                        let w = 1.0 / chosen.len() as f64;
                        for c in chosen {
                            lc.add(c, w);
                        }
                    }
                    second[i * np + pair_index(dim, a, b)] = lc;
                }
            }
        }
        Ok(Self {
            grid,
            mask,
            unknown_of,
            node_of,
            first,
            second,
            interior,
        })
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn unknowns(&self) -> usize {
        self.node_of.len()
    }

    pub fn node_of(&self, i: usize) -> usize {
        self.node_of[i]
    }

    pub fn unknown_of(&self, lin: usize) -> Option<usize> {
        let u = self.unknown_of[lin];
        (u != usize::MAX).then_some(u)
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior[i]
    }

    pub fn first(&self, i: usize, a: usize) -> &LinComb {
        &self.first[i * self.dim() + a]
    }

    pub fn second(&self, i: usize, a: usize, b: usize) -> &LinComb {
        let d = self.dim();
        &self.second[i * pair_count(d) + pair_index(d, a, b)]
    }

    pub fn gradient(&self, x: &[f64], i: usize) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (a, ga) in g.iter_mut().enumerate().take(self.dim()) {
            *ga = self.first(i, a).eval(x);
        }
        g
    }

    pub fn hessian(&self, x: &[f64], i: usize) -> [[f64; 3]; 3] {
        let d = self.dim();
        let mut m = [[0.0; 3]; 3];
        for a in 0..d {
            for b in a..d {
                let v = self.second(i, a, b).eval(x);
                m[a][b] = v;
                m[b][a] = v;
            }
        }
        m
    }

    pub fn to_grid_function(&self, x: &[f64]) -> Result<GridFunction> {
        let mut values = vec![f64::NAN; self.grid.len()];
        for (i, &lin) in self.node_of.iter().enumerate() {
            values[lin] = x[i];
        }
        GridFunction::new(self.grid.clone(), values, self.mask.clone())
    }

    /// Unknown vector sampled from a grid function on the same grid.
    pub fn from_grid_function(&self, u: &GridFunction) -> Result<Vec<f64>> {
        if u.grid() != &self.grid {
            return Err(invalid("grid function lives on a different grid"));
        }
        self.node_of
            .iter()
            .map(|&lin| u.value(lin).ok_or_else(|| invalid("initial guess missing an interior node")))
            .collect()
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let d = self.dim();
        self.node_of
            .iter()
            .map(|&lin| f(&self.grid.coord(lin)[..d]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, EllipsoidDomain};

    #[test]
    fn quadratics_are_exact_including_cut_cells() {
        let d: Domain = EllipsoidDomain::new(2, 1.5, 1.0).unwrap().into();
        let (g, m) = build_grid(&d, 25).unwrap();
        let f = |x: &[f64]| 0.7 * x[0] * x[0] - 0.4 * x[0] * x[1] + 1.3 * x[1] * x[1] + 0.2 * x[0] - x[1];
        let disc = Discretization::new(&d, g, m, &Boundary::function(f)).unwrap();
        let x = disc.sample(f);
        for i in 0..disc.unknowns() {
            let p = disc.grid().coord(disc.node_of(i));
            let grad = disc.gradient(&x, i);
            assert!((grad[0] - (1.4 * p[0] - 0.4 * p[1] + 0.2)).abs() < 1e-8);
            assert!((grad[1] - (-0.4 * p[0] + 2.6 * p[1] - 1.0)).abs() < 1e-8);
            let hs = disc.hessian(&x, i);
            assert!((hs[0][0] - 1.4).abs() < 1e-7);
            assert!((hs[1][1] - 2.6).abs() < 1e-7);
            // Mixed derivative is exact for quadratics wherever a quadrant exists.
            assert!((hs[0][1] + 0.4).abs() < 1e-7 || hs[0][1] == 0.0);
        }
    }

    #[test]
    fn pair_indices_pack() {
        assert_eq!(pair_index(3, 0, 0), 0);
        assert_eq!(pair_index(3, 0, 2), 2);
        assert_eq!(pair_index(3, 1, 1), 3);
        assert_eq!(pair_index(3, 2, 1), 4);
        assert_eq!(pair_index(3, 2, 2), 5);
        assert_eq!(pair_index(2, 1, 1), 2);
    }
}
