//! Uniform periodic grids and the sampled fields that live on them.
//!
//! Coordinates are centered: along an axis of length `L` with `n` points the
//! samples sit at `x_i = -L/2 + i dx`. Fields are stored row-major, the last
//! axis varying fastest.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Smallest admissible number of points per axis.
pub const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite() && mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "constants must be positive and finite (hbar = {hbar}, m = {mass})"
            )));
        }
        Ok(Self { hbar, mass })
    }

    pub fn is_natural(&self) -> bool {
        self.hbar == 1.0 && self.mass == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dims: usize,
    n: [usize; 2],
    len: [f64; 2],
}

impl Grid {
    /// Builds a 1D or 2D grid with the same `n` and `L` on every axis.
    pub fn new(dims: usize, n: usize, len: f64) -> Result<Self> {
        match dims {
            1 => Self::with_axes(&[n], &[len]),
            2 => Self::with_axes(&[n, n], &[len, len]),
            _ => Err(Error::InvalidGrid(format!("dims must be 1 or 2, got {dims}"))),
        }
    }

    pub fn with_axes(n: &[usize], len: &[f64]) -> Result<Self> {
        if n.is_empty() || n.len() > 2 || n.len() != len.len() {
            return Err(Error::InvalidGrid(
                "need one or two axes with matching n and L".into(),
            ));
        }
        for (&na, &la) in n.iter().zip(len) {
            if na < MIN_POINTS {
                return Err(Error::InvalidGrid(format!(
                    "n = {na} is below the minimum of {MIN_POINTS}"
                )));
            }
            if !na.is_power_of_two() {
                return Err(Error::InvalidGrid(format!("n = {na} is not a power of two")));
            }
            if !(la > 0.0 && la.is_finite()) {
                return Err(Error::InvalidGrid(format!("box length {la} must be positive")));
            }
        }
        let dims = n.len();
        let mut g = Grid {
            dims,
            n: [1, 1],
            len: [1.0, 1.0],
        };
        for a in 0..dims {
            g.n[a] = n[a];
            g.len[a] = len[a];
        }
        Ok(g)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn len(&self, axis: usize) -> f64 {
        self.len[axis]
    }

    pub fn dx(&self, axis: usize) -> f64 {
        self.len[axis] / self.n[axis] as f64
    }

    /// Volume element of the rectangle rule.
    pub fn dv(&self) -> f64 {
        (0..self.dims).map(|a| self.dx(a)).product()
    }

    pub fn size(&self) -> usize {
        self.n[0] * self.n[1]
    }

    /// Stride between neighbours along `axis` in the flat layout.
    pub fn stride(&self, axis: usize) -> usize {
        if axis == 0 && self.dims == 2 {
            self.n[1]
        } else {
            1
        }
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        -0.5 * self.len[axis] + i as f64 * self.dx(axis)
    }

    /// Coordinates of the samples along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis]).map(|i| self.coord(axis, i)).collect()
    }

    /// Per-axis indices of a flat index.
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dims == 2 {
            [idx / self.n[1], idx % self.n[1]]
        } else {
            [idx, 0]
        }
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.unflatten(idx);
        let y = if self.dims == 2 { self.coord(1, j) } else { 0.0 };
        [self.coord(0, i), y]
    }

    /// Angular wavenumber of FFT bin `i` along `axis`.
    pub fn wavenumber(&self, axis: usize, i: usize) -> f64 {
        let n = self.n[axis];
        let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        TAU * m / self.len[axis]
    }

    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis]).map(|i| self.wavenumber(axis, i)).collect()
    }

    /// Largest resolved wavenumber along `axis`.
    pub fn k_max(&self, axis: usize) -> f64 {
        std::f64::consts::PI / self.dx(axis)
    }

    pub fn fundamental_k(&self, axis: usize) -> f64 {
        TAU / self.len[axis]
    }

    /// Flat indices of points lying on the outer rim of the box.
    pub fn rim_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for idx in 0..self.size() {
            let [i, j] = self.unflatten(idx);
            let on_x = i == 0 || i + 1 == self.n[0];
            let on_y = self.dims == 2 && (j == 0 || j + 1 == self.n[1]);
            if on_x || on_y {
                out.push(idx);
            }
        }
        out
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dims == other.dims && self.n == other.n && self.len == other.len
    }
}

/// Complex samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub data: Vec<Complex64>,
}

/// Real samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.size()],
        }
    }

    pub fn from_vec(grid: Grid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.size() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} points",
                data.len(),
                grid.size()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let data = (0..grid.size()).map(|i| f(grid.point(i))).collect();
        Self { grid, data }
    }

    pub fn density(&self) -> RealField {
        RealField {
            grid: self.grid,
            data: self.data.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    /// Rectangle-rule integral of |psi|^2.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dv()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Outer product of two 1D fields, placed on the 2D grid spanned by them.
    pub fn tensor(a: &ComplexField, b: &ComplexField) -> Result<ComplexField> {
        if a.grid.dims() != 1 || b.grid.dims() != 1 {
            return Err(Error::GridMismatch("tensor product needs two 1D fields".into()));
        }
        let grid = Grid::with_axes(&[a.grid.n(0), b.grid.n(0)], &[a.grid.len(0), b.grid.len(0)])?;
        let mut data = Vec::with_capacity(grid.size());
        for za in &a.data {
            for zb in &b.data {
                data.push(za * zb);
            }
        }
        Ok(ComplexField { grid, data })
    }
}

impl RealField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.size()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let data = (0..grid.size()).map(|i| f(grid.point(i))).collect();
        Self { grid, data }
    }

    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.dv()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &RealField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    /// Sum of two 1D potentials on the 2D product grid.
    pub fn outer_sum(a: &RealField, b: &RealField) -> Result<RealField> {
        if a.grid.dims() != 1 || b.grid.dims() != 1 {
            return Err(Error::GridMismatch("outer sum needs two 1D fields".into()));
        }
        let grid = Grid::with_axes(&[a.grid.n(0), b.grid.n(0)], &[a.grid.len(0), b.grid.len(0)])?;
        let mut data = Vec::with_capacity(grid.size());
        for va in &a.data {
            for vb in &b.data {
                data.push(va + vb);
            }
        }
        Ok(RealField { grid, data })
    }
}

/// Vector field stored as one real field per axis.
pub type VectorField = Vec<RealField>;
