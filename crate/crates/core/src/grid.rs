//! Uniform rectangular grids centred at the origin and nodal fields on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Box `prod_i [-L_i, L_i]` sampled with `n_i` nodes per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    extent: Vec<f64>,
    points: Vec<usize>,
}

impl Grid {
    pub fn new(extent: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        let n = extent.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::UnsupportedDimension(n));
        }
        if points.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: points.len() });
        }
        if points.iter().any(|&p| p < 3) {
            return Err(Error::InvalidParameter("every axis needs at least 3 nodes".into()));
        }
        if extent.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter("half-widths must be positive".into()));
        }
        Ok(Self { extent, points })
    }

    /// Same half-width and node count on every axis.
    pub fn cube(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::new(vec![half_width; dim], vec![points; dim])
    }

    pub fn dim(&self) -> usize {
        self.extent.len()
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.extent[axis] / (self.points[axis] - 1) as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.spacing(i)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).product()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node counts padded with trailing ones to three axes.
    pub fn shape3(&self) -> [usize; 3] {
        let mut s = [1; 3];
        s[..self.dim()].copy_from_slice(&self.points);
        s
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.points[axis + 1..].iter().product()
    }

    pub fn coord(&self, axis: usize, j: usize) -> f64 {
        // symmetric about zero to the last bit: node j and n-1-j are exact negatives
        let n = self.points[axis];
        let h = self.spacing(axis);
        if 2 * j + 1 == n {
            0.0
        } else if 2 * j < n {
            -(self.extent[axis] - j as f64 * h)
        } else {
            self.extent[axis] - (n - 1 - j) as f64 * h
        }
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis]).map(|j| self.coord(axis, j)).collect()
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.points[axis];
            flat /= self.points[axis];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.points).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn node_coords(&self, flat: usize, out: &mut [f64]) {
        let idx = self.multi_index(flat);
        for axis in 0..self.dim() {
            out[axis] = self.coord(axis, idx[axis]);
        }
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        (0..self.dim()).any(|a| idx[a] == 0 || idx[a] + 1 == self.points[a])
    }

    /// Distance in cells from the nearest face.
    pub fn cells_from_boundary(&self, flat: usize) -> usize {
        let idx = self.multi_index(flat);
        (0..self.dim()).map(|a| idx[a].min(self.points[a] - 1 - idx[a])).min().unwrap_or(0)
    }

    /// Uniform refinement halving every spacing.
    pub fn refined(&self) -> Grid {
        Grid {
            extent: self.extent.clone(),
            points: self.points.iter().map(|n| 2 * n - 1).collect(),
        }
    }

    /// Grid with every axis stretched by the given factors.
    pub fn stretched(&self, factors: &[f64]) -> Result<Grid> {
        Grid::new(
            self.extent.iter().zip(factors).map(|(l, f)| l * f).collect(),
            self.points.clone(),
        )
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.points == other.points
            && self
                .extent
                .iter()
                .zip(&other.extent)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()))
    }
}

/// Nonnegative nodal values on a [`Grid`] at a given time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n], time: 0.0 }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let mut x = [0.0; MAX_DIM];
        let values = (0..grid.len())
            .map(|k| {
                grid.node_coords(k, &mut x);
                f(&x[..dim])
            })
            .collect();
        Self { grid, values, time: 0.0 }
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_shape(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?}/{:?} vs {:?}/{:?}",
                self.grid.points(),
                self.grid.extent(),
                other.grid.points(),
                other.grid.extent()
            )))
        }
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        let vol = self.grid.cell_volume();
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * vol).powf(1.0 / p)
    }

    pub fn l1_distance(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn linf_distance(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `int (self - other)_+`.
    pub fn positive_part_integral(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).max(0.0)).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// Multilinear interpolation; zero outside the box.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        let dim = self.grid.dim();
        let mut base = [0usize; MAX_DIM];
        let mut w = [0.0; MAX_DIM];
        for a in 0..dim {
            let n = self.grid.points()[a];
            let s = (x[a] + self.grid.extent()[a]) / self.grid.spacing(a);
            let last = (n - 1) as f64;
            if !(s >= -1e-9 && s <= last + 1e-9) {
                return 0.0;
            }
            let s = s.clamp(0.0, last);
            let k = (s.floor() as usize).min(n - 2);
            base[a] = k;
            w[a] = s - k as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut weight = 1.0;
            let mut flat = 0;
            for a in 0..dim {
                let bit = (corner >> a) & 1;
                weight *= if bit == 1 { w[a] } else { 1.0 - w[a] };
                flat = flat * self.grid.points()[a] + base[a] + bit;
            }
            if weight != 0.0 {
                acc += weight * self.values[flat];
            }
        }
        acc
    }

    /// Sample onto `target`: each target node `y` reads `self` at `map(y)`.
    pub fn resample(&self, target: &Grid, mut map: impl FnMut(&mut [f64])) -> Field {
        let dim = target.dim();
        let mut x = [0.0; MAX_DIM];
        let values = (0..target.len())
            .map(|k| {
                target.node_coords(k, &mut x);
                map(&mut x[..dim]);
                self.value_at(&x[..dim])
            })
            .collect();
        Field { grid: target.clone(), values, time: self.time }
    }

    /// Values along the line through the grid centre parallel to `axis`.
    /// Requires an odd node count on every other axis.
    pub fn axis_line(&self, axis: usize) -> Vec<f64> {
        let pts = self.grid.points();
        let mut idx = [0usize; MAX_DIM];
        for a in 0..self.grid.dim() {
            idx[a] = pts[a] / 2;
        }
        (0..pts[axis])
            .map(|j| {
                idx[axis] = j;
                self.values[self.grid.flat_index(&idx[..self.grid.dim()])]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coordinates_are_symmetric() {
        let g = Grid::new(vec![3.0, 2.0], vec![7, 6]).unwrap();
        for a in 0..2 {
            let c = g.axis_coords(a);
            for j in 0..c.len() {
                assert_eq!(c[j], -c[c.len() - 1 - j]);
            }
        }
        assert_eq!(g.coord(0, 3), 0.0);
        assert_relative_eq!(g.spacing(0), 1.0);
    }

    #[test]
    fn flat_and_multi_index_agree() {
        let g = Grid::new(vec![1.0, 1.0, 1.0], vec![3, 4, 5]).unwrap();
        for k in 0..g.len() {
            let idx = g.multi_index(k);
            assert_eq!(g.flat_index(&idx), k);
        }
        assert_eq!(g.stride(0), 20);
        assert_eq!(g.stride(2), 1);
    }

    #[test]
    fn interpolation_is_exact_for_bilinear_data() {
        let g = Grid::cube(2, 2.0, 9).unwrap();
        let f = Field::from_fn(g, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]);
        let p = [0.3, -1.13];
        assert_relative_eq!(f.value_at(&p), 1.0 + 0.6 + 1.13 - 0.5 * 0.3 * 1.13, epsilon = 1e-12);
        assert_eq!(f.value_at(&[2.5, 0.0]), 0.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(vec![1.0], vec![2]).is_err());
        assert!(Grid::new(vec![1.0; 4], vec![5; 4]).is_err());
        assert!(Grid::new(vec![1.0, -1.0], vec![5, 5]).is_err());
        assert!(Grid::new(vec![1.0, 1.0], vec![5]).is_err());
    }

    #[test]
    fn refinement_halves_spacing() {
        let g = Grid::new(vec![4.0, 2.0], vec![9, 5]).unwrap();
        let r = g.refined();
        assert_relative_eq!(r.spacing(0), g.spacing(0) / 2.0);
        assert_relative_eq!(r.spacing(1), g.spacing(1) / 2.0);
    }
}
