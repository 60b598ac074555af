//! Uniform Cartesian grids and masked scalar fields sampled on them.
//!
//! Nodes are stored in row-major order: the last axis varies fastest. A
//! [`GridFunction`] carries a boolean mask marking the nodes that belong to the
//! function's domain; values at unmasked nodes are always `NaN`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

/// Point type used internally; unused trailing coordinates are zero.
pub type Point = [f64; MAX_DIM];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartesianGrid {
    dim: usize,
    origin: Vec<f64>,
    spacing: f64,
    counts: Vec<usize>,
}

impl CartesianGrid {
    pub fn new(origin: Vec<f64>, spacing: f64, counts: Vec<usize>) -> Result<Self> {
        let dim = origin.len();
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(invalid(format!("grid dimension {dim} not in 2..=3")));
        }
        if counts.len() != dim {
            return Err(invalid("origin and counts lengths differ"));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(invalid(format!("spacing {spacing} must be positive")));
        }
        if counts.iter().any(|&c| c < 3) {
            return Err(invalid("every axis needs at least 3 nodes"));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(invalid("origin must be finite"));
        }
        Ok(Self {
            dim,
            origin,
            spacing,
            counts,
        })
    }

    /// Grid with odd node counts centered on `center`, covering `half_widths`
    /// plus at least one spacing of margin on every side.
    pub fn centered(center: &[f64], half_widths: &[f64], spacing: f64) -> Result<Self> {
        let mut origin = Vec::with_capacity(center.len());
        let mut counts = Vec::with_capacity(center.len());
        for (&c, &hw) in center.iter().zip(half_widths) {
            let m = (hw / spacing - 1e-9).ceil().max(0.0) as usize + 1;
            origin.push(c - m as f64 * spacing);
            counts.push(2 * m + 1);
        }
        Self::new(origin, spacing, counts)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear stride of each axis.
    pub fn strides(&self) -> [usize; MAX_DIM] {
        let mut s = [0; MAX_DIM];
        let mut acc = 1;
        for a in (0..self.dim).rev() {
            s[a] = acc;
            acc *= self.counts[a];
        }
        s
    }

    pub fn linear(&self, idx: &[usize]) -> usize {
        let mut k = 0;
        for a in 0..self.dim {
            k = k * self.counts[a] + idx[a];
        }
        k
    }

    pub fn multi(&self, mut lin: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for a in (0..self.dim).rev() {
            idx[a] = lin % self.counts[a];
            lin /= self.counts[a];
        }
        idx
    }

    pub fn coord(&self, lin: usize) -> Point {
        let idx = self.multi(lin);
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.dim {
            p[a] = self.origin[a] + idx[a] as f64 * self.spacing;
        }
        p
    }

    /// Neighbor `step` nodes away along `axis`, if it exists.
    pub fn neighbor(&self, lin: usize, axis: usize, step: isize) -> Option<usize> {
        let idx = self.multi(lin);
        let j = idx[axis] as isize + step;
        if j < 0 || j >= self.counts[axis] as isize {
            return None;
        }
        let stride = self.strides()[axis] as isize;
        Some((lin as isize + step * stride) as usize)
    }

    /// Node offset by a vector of steps, if it exists.
    pub fn offset(&self, lin: usize, steps: &[isize]) -> Option<usize> {
        let idx = self.multi(lin);
        let strides = self.strides();
        let mut out = lin as isize;
        for a in 0..self.dim {
            let j = idx[a] as isize + steps[a];
            if j < 0 || j >= self.counts[a] as isize {
                return None;
            }
            out += steps[a] * strides[a] as isize;
        }
        Some(out as usize)
    }

    /// Upper corner of the grid box.
    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|a| self.origin[a] + (self.counts[a] - 1) as f64 * self.spacing)
            .collect()
    }

    /// Index of the nearest node to `x`, if `x` lies within the grid box.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        let mut idx = [0usize; MAX_DIM];
        for a in 0..self.dim {
            let s = ((x[a] - self.origin[a]) / self.spacing).round();
            if s < 0.0 || s > (self.counts[a] - 1) as f64 {
                return None;
            }
            idx[a] = s as usize;
        }
        Some(self.linear(&idx[..self.dim]))
    }
}

/// Scalar field on a grid with a domain mask.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: CartesianGrid,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl PartialEq for GridFunction {
    /// Bitwise equality of masked values; unmasked nodes carry no data.
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.mask == other.mask
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.mask)
                .all(|((a, b), &m)| !m || a.to_bits() == b.to_bits())
    }
}

impl GridFunction {
    pub fn new(grid: CartesianGrid, mut values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        let n = grid.len();
        if values.len() != n || mask.len() != n {
            return Err(invalid(format!(
                "expected {n} values and mask entries, got {} and {}",
                values.len(),
                mask.len()
            )));
        }
        for (v, &m) in values.iter_mut().zip(&mask) {
            if m {
                if !v.is_finite() {
                    return Err(invalid("non-finite value at a masked node"));
                }
            } else {
                *v = f64::NAN;
            }
        }
        Ok(Self { grid, values, mask })
    }

    /// Samples `f` on the masked nodes.
    pub fn from_fn(grid: CartesianGrid, mask: Vec<bool>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                if mask[i] {
                    f(&grid.coord(i)[..dim])
                } else {
                    f64::NAN
                }
            })
            .collect();
        Self::new(grid, values, mask)
    }

    /// Samples `f` on every node of the grid.
    pub fn full(grid: CartesianGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mask = vec![true; grid.len()];
        Self::from_fn(grid, mask, f)
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn value(&self, lin: usize) -> Option<f64> {
        self.mask[lin].then(|| self.values[lin])
    }

    pub fn is_masked(&self, lin: usize) -> bool {
        self.mask[lin]
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn masked_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    /// Replaces masked values; the mask is kept.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values, self.mask.clone())
    }

    /// Applies `f` to every masked value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::new(self.grid.clone(), values, self.mask.clone())
    }

    /// Node index and value of the smallest masked value.
    pub fn argmin(&self) -> Option<(usize, f64)> {
        self.masked_indices()
            .map(|i| (i, self.values[i]))
            .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
                Some((_, best)) if best <= v => acc,
                _ => Some((i, v)),
            })
    }

    pub fn min(&self) -> Option<f64> {
        self.argmin().map(|(_, v)| v)
    }

    pub fn max(&self) -> Option<f64> {
        self.masked_indices().map(|i| self.values[i]).reduce(f64::max)
    }

    /// Multilinear interpolation; `None` unless every corner of the containing
    /// cell is masked.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let g = &self.grid;
        let dim = g.dim();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for a in 0..dim {
            let s = (x[a] - g.origin()[a]) / g.spacing();
            let last = (g.counts()[a] - 1) as f64;
            if !(s >= -1e-12 && s <= last + 1e-12) {
                return None;
            }
            let s = s.clamp(0.0, last);
            let i = (s.floor() as usize).min(g.counts()[a] - 2);
            base[a] = i;
            frac[a] = s - i as f64;
        }
        let strides = g.strides();
        let b = g.linear(&base[..dim]);
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut k = b;
            for a in 0..dim {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    k += strides[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w == 0.0 {
                continue;
            }
            if !self.mask[k] {
                return None;
            }
            acc += w * self.values[k];
        }
        Some(acc)
    }

    /// True when every axis-parallel grid segment between two masked nodes is
    /// masked.
    pub fn mask_is_discretely_convex(&self) -> bool {
        let g = &self.grid;
        for axis in 0..g.dim() {
            for lin in 0..g.len() {
                // Start of each grid line along `axis`.
                if g.multi(lin)[axis] != 0 {
                    continue;
                }
                let mut seen_in = false;
                let mut left = false;
                let mut k = Some(lin);
                while let Some(i) = k {
                    if self.mask[i] {
                        if left {
                            return false;
                        }
                        seen_in = true;
                    } else if seen_in {
                        left = true;
                    }
                    k = g.neighbor(i, axis, 1);
                }
            }
        }
        true
    }

    /// Writes the field: a JSON header line followed by one value per node in
    /// row-major order, `_` for exterior nodes.
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        let header = GridHeader {
            dim: self.grid.dim,
            origin: self.grid.origin.clone(),
            spacing: self.grid.spacing,
            counts: self.grid.counts.clone(),
        };
        let mut buf = serde_json::to_string(&header)?;
        buf.push('\n');
        for (v, &m) in self.values.iter().zip(&self.mask) {
            if m {
                let _ = writeln!(buf, "{v:e}");
            } else {
                buf.push_str("_\n");
            }
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn read_from(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header".into()))??;
        let header: GridHeader = serde_json::from_str(&header_line)?;
        if header.dim != header.origin.len() {
            return Err(Error::Parse("header dim does not match origin".into()));
        }
        let grid = CartesianGrid::new(header.origin, header.spacing, header.counts)?;
        let n = grid.len();
        let mut values = Vec::with_capacity(n);
        let mut mask = Vec::with_capacity(n);
        for line in lines {
            let line = line?;
            let tok = line.trim();
            if tok.is_empty() {
                continue;
            }
            if tok == "_" {
                values.push(f64::NAN);
                mask.push(false);
            } else {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad value token {tok:?}")))?;
                values.push(v);
                mask.push(true);
            }
        }
        if values.len() != n {
            return Err(Error::Parse(format!("expected {n} node lines, got {}", values.len())));
        }
        Self::new(grid, values, mask)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GridHeader {
    dim: usize,
    origin: Vec<f64>,
    spacing: f64,
    counts: Vec<usize>,
}

/// Anything that can be evaluated pointwise: grid functions (by
/// interpolation) and closed-form profiles.
pub trait ScalarField {
    fn dim(&self) -> usize;
    /// Value at `x`, or `None` outside the field's domain.
    fn eval(&self, x: &[f64]) -> Option<f64>;
}

impl ScalarField for GridFunction {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn eval(&self, x: &[f64]) -> Option<f64> {
        self.interpolate(x)
    }
}

/// Adapter turning a closure into a [`ScalarField`].
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> Option<f64>> ScalarField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Option<f64> {
        (self.f)(x)
    }
}

impl<T: ScalarField + ?Sized> ScalarField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &[f64]) -> Option<f64> {
        (**self).eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CartesianGrid {
        CartesianGrid::new(vec![-1.0, -1.0], 0.5, vec![5, 5]).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(CartesianGrid::new(vec![0.0, 0.0], 0.0, vec![3, 3]).is_err());
        assert!(CartesianGrid::new(vec![0.0, 0.0], 1.0, vec![2, 3]).is_err());
        assert!(CartesianGrid::new(vec![0.0], 1.0, vec![3]).is_err());
        assert!(CartesianGrid::new(vec![0.0, 0.0], 1.0, vec![3]).is_err());
    }

    #[test]
    fn row_major_indexing() {
        let g = small();
        assert_eq!(g.linear(&[1, 2]), 7);
        assert_eq!(g.multi(7)[..2], [1, 2]);
        assert_eq!(g.coord(7)[..2], [-0.5, 0.0]);
        assert_eq!(g.neighbor(7, 1, 1), Some(8));
        assert_eq!(g.neighbor(7, 0, -1), Some(2));
        assert_eq!(g.neighbor(4, 1, 1), None);
    }

    #[test]
    fn interpolation_is_exact_for_bilinear() {
        let f = GridFunction::full(small(), |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]).unwrap();
        let v = f.interpolate(&[0.3, -0.7]).unwrap();
        assert!((v - (1.0 + 0.6 + 0.7 - 0.105)).abs() < 1e-12);
        assert!(f.interpolate(&[1.2, 0.0]).is_none());
    }

    #[test]
    fn unmasked_values_are_nan_and_skipped() {
        let g = small();
        let mask: Vec<bool> = (0..g.len()).map(|i| i % 2 == 0).collect();
        let f = GridFunction::from_fn(g, mask, |x| x[0]).unwrap();
        assert!(f.values()[1].is_nan());
        assert_eq!(f.value(1), None);
        assert_eq!(f.min(), Some(-1.0));
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let g = CartesianGrid::new(vec![-0.3, 0.1, 2.0], 0.1 / 3.0, vec![3, 4, 3]).unwrap();
        let mask: Vec<bool> = (0..g.len()).map(|i| i % 5 != 3).collect();
        let f = GridFunction::from_fn(g, mask, |x| (x[0] * 7.1).sin() / 3.0 + x[1].exp() * 1e-300 - x[2]).unwrap();
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let back = GridFunction::read_from(buf.as_slice()).unwrap();
        assert_eq!(f, back);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(4).unwrap() == "_");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let f = GridFunction::full(small(), |x| x[0]).unwrap();
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(GridFunction::read_from(cut.as_bytes()).is_err());
    }
}
