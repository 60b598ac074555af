//! Level-set extraction by marching squares.
//!
//! 2-D fields are contoured directly. 3-D fields are contoured slice by slice
//! along the last (axial) axis, each slice producing planar polylines lifted
//! back into space.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::GridFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPolyline {
    pub vertices: Vec<Vec<f64>>,
    pub closed: bool,
    pub level: f64,
}

impl LevelPolyline {
    pub fn new(vertices: Vec<Vec<f64>>, closed: bool, level: f64) -> Self {
        Self {
            vertices,
            closed,
            level,
        }
    }

    /// Closed polyline through `n` points of a parametrized curve.
    pub fn from_curve(n: usize, level: f64, f: impl Fn(f64) -> [f64; 2]) -> Self {
        let vertices = (0..n)
            .map(|i| {
                let p = f(i as f64 / n as f64);
                vec![p[0], p[1]]
            })
            .collect();
        Self::new(vertices, true, level)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Segments as index pairs, including the closing segment when closed.
    pub fn segments(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        let n = self.vertices.len();
        let count = if self.closed && n > 1 { n } else { n.saturating_sub(1) };
        (0..count).map(move |i| {
            (
                self.vertices[i].as_slice(),
                self.vertices[(i + 1) % n].as_slice(),
            )
        })
    }

    /// Shoelace area in the first two coordinates; positive when
    /// counterclockwise.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut a = 0.0;
        for i in 0..n {
            let p = &self.vertices[i];
            let q = &self.vertices[(i + 1) % n];
            a += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * a
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| dist(a, b)).sum()
    }

    pub fn max_segment_length(&self) -> f64 {
        self.segments().map(|(a, b)| dist(a, b)).fold(0.0, f64::max)
    }

    /// True when no two non-adjacent segments intersect (planar, first two
    /// coordinates).
    pub fn is_simple(&self) -> bool {
        let segs: Vec<_> = self.segments().collect();
        let m = segs.len();
        for i in 0..m {
            for j in i + 1..m {
                let adjacent = j == i + 1 || (self.closed && i == 0 && j == m - 1);
                if adjacent {
                    continue;
                }
                if segments_cross(segs[i].0, segs[i].1, segs[j].0, segs[j].1) {
                    return false;
                }
            }
        }
        true
    }

    /// True when every turn has the same orientation (planar).
    pub fn is_convex(&self, tol: f64) -> bool {
        let n = self.vertices.len();
        if !self.closed || n < 3 {
            return false;
        }
        let sign = self.signed_area().signum();
        (0..n).all(|i| {
            let a = &self.vertices[i];
            let b = &self.vertices[(i + 1) % n];
            let c = &self.vertices[(i + 2) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            sign * cross >= -tol
        })
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn orient(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Contours `{u = h}`. Returns an empty list when the level is not attained.
pub fn extract_level_set(u: &GridFunction, h: f64) -> Result<Vec<LevelPolyline>> {
    let (lo, hi) = match (u.min(), u.max()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Ok(Vec::new()),
    };
    if !h.is_finite() {
        return Err(invalid("level must be finite"));
    }
    if !(h > lo && h < hi) {
        return Ok(Vec::new());
    }
    let range = hi - lo;
    let mut level = h;
    // Nudge off exact node values so every crossing lies strictly inside an edge.
    while u.masked_indices().any(|i| u.values()[i] == level) {
        level += 1e-12 * range;
    }
    let g = u.grid();
    match g.dim() {
        2 => {
            let nx = g.counts()[0];
            let ny = g.counts()[1];
            let sample = |i: usize, j: usize| u.value(g.linear(&[i, j]));
            let coord = |i: f64, j: f64| {
                vec![
                    g.origin()[0] + i * g.spacing(),
                    g.origin()[1] + j * g.spacing(),
                ]
            };
            Ok(march(nx, ny, level, h, sample, coord))
        }
        3 => {
            let (nx, ny, nz) = (g.counts()[0], g.counts()[1], g.counts()[2]);
            let mut out = Vec::new();
            for k in 0..nz {
                let z = g.origin()[2] + k as f64 * g.spacing();
                let sample = |i: usize, j: usize| u.value(g.linear(&[i, j, k]));
                let coord = |i: f64, j: f64| {
                    vec![
                        g.origin()[0] + i * g.spacing(),
                        g.origin()[1] + j * g.spacing(),
                        z,
                    ]
                };
                out.extend(march(nx, ny, level, h, sample, coord));
            }
            Ok(out)
        }
        d => Err(invalid(format!("dimension {d} unsupported"))),
    }
}

/// Edge key: lower node `(i, j)` and edge direction (0 = along i, 1 = along j).
type EdgeKey = (usize, usize, u8);

fn march(
    nx: usize,
    ny: usize,
    level: f64,
    reported_level: f64,
    sample: impl Fn(usize, usize) -> Option<f64>,
    coord: impl Fn(f64, f64) -> Vec<f64>,
) -> Vec<LevelPolyline> {
    let mut points: HashMap<EdgeKey, Vec<f64>> = HashMap::new();
    let mut adjacency: HashMap<EdgeKey, Vec<EdgeKey>> = HashMap::new();
    let mut order: Vec<EdgeKey> = Vec::new();

    let mut crossing = |key: EdgeKey, va: f64, vb: f64| -> EdgeKey {
        points.entry(key).or_insert_with(|| {
            let s = (level - va) / (vb - va);
            let (i, j, dir) = key;
            if dir == 0 {
                coord(i as f64 + s, j as f64)
            } else {
                coord(i as f64, j as f64 + s)
            }
        });
        key
    };

    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (v0, v1, v2, v3) = match (
                sample(i, j),
                sample(i + 1, j),
                sample(i + 1, j + 1),
                sample(i, j + 1),
            ) {
                (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
                _ => continue,
            };
            let b0 = v0 > level;
            let b1 = v1 > level;
            let b2 = v2 > level;
            let b3 = v3 > level;
            let case = (b0 as u8) | (b1 as u8) << 1 | (b2 as u8) << 2 | (b3 as u8) << 3;
            if case == 0 || case == 15 {
                continue;
            }
            // Cell edges: bottom (0-1), right (1-2), top (3-2), left (0-3).
            let bottom = (i, j, 0u8);
            let right = (i + 1, j, 1u8);
            let top = (i, j + 1, 0u8);
            let left = (i, j, 1u8);
            let mut segs: Vec<(EdgeKey, EdgeKey)> = Vec::with_capacity(2);
            let mut e = |k: EdgeKey| -> EdgeKey {
                match k {
                    k if k == bottom => crossing(k, v0, v1),
                    k if k == right => crossing(k, v1, v2),
                    k if k == top => crossing(k, v3, v2),
                    _ => crossing(k, v0, v3),
                }
            };
            let center_above = 0.25 * (v0 + v1 + v2 + v3) > level;
            match case {
                1 | 14 => segs.push((e(left), e(bottom))),
                2 | 13 => segs.push((e(bottom), e(right))),
                3 | 12 => segs.push((e(left), e(right))),
                4 | 11 => segs.push((e(right), e(top))),
                6 | 9 => segs.push((e(bottom), e(top))),
                7 | 8 => segs.push((e(left), e(top))),
                5 => {
                    // Corners 0 and 2 above.
                    if center_above {
                        segs.push((e(left), e(top)));
                        segs.push((e(bottom), e(right)));
                    } else {
                        segs.push((e(left), e(bottom)));
                        segs.push((e(right), e(top)));
                    }
                }
                10 => {
                    // Corners 1 and 3 above.
                    if center_above {
                        segs.push((e(left), e(bottom)));
                        segs.push((e(right), e(top)));
                    } else {
                        segs.push((e(left), e(top)));
                        segs.push((e(bottom), e(right)));
                    }
                }
                _ => unreachable!(),
            }
            for (a, b) in segs {
                for k in [a, b] {
                    if !adjacency.contains_key(&k) {
                        order.push(k);
                    }
                }
                adjacency.entry(a).or_default().push(b);
                adjacency.entry(b).or_default().push(a);
            }
        }
    }

    let mut visited: HashMap<EdgeKey, bool> = HashMap::new();
    let mut chains: Vec<(Vec<EdgeKey>, bool)> = Vec::new();
    // Open chains start at degree-one edges; deterministic order of discovery.
    let starts: Vec<EdgeKey> = order
        .iter()
        .copied()
        .filter(|k| adjacency[k].len() == 1)
        .chain(order.iter().copied())
        .collect();
    for start in starts {
        if visited.get(&start).copied().unwrap_or(false) {
            continue;
        }
        let open = adjacency[&start].len() == 1;
        let mut chain = vec![start];
        visited.insert(start, true);
        let mut prev = None;
        let mut cur = start;
        let mut closed = false;
        loop {
            let next = adjacency[&cur]
                .iter()
                .copied()
                .find(|k| Some(*k) != prev && !visited.get(k).copied().unwrap_or(false));
            match next {
                Some(k) => {
                    visited.insert(k, true);
                    chain.push(k);
                    prev = Some(cur);
                    cur = k;
                }
                None => {
                    if !open && chain.len() > 2 && adjacency[&cur].contains(&start) {
                        closed = true;
                    }
                    break;
                }
            }
        }
        chains.push((chain, closed));
    }

    chains
        .into_iter()
        .filter(|(c, _)| c.len() >= 2)
        .map(|(chain, closed)| {
            let vertices: Vec<Vec<f64>> = chain.iter().map(|k| points[k].clone()).collect();
            let mut poly = LevelPolyline::new(vertices, closed, reported_level);
            if closed && poly.signed_area() < 0.0 {
                poly.vertices.reverse();
            }
            poly
        })
        .collect()
}
