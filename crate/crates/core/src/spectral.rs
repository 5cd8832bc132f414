//! Fourier-collocation differentiation on periodic grids.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Applies a 1D transform along `axis` of a flat row-major buffer.
fn transform_axis(grid: &Grid, data: &mut [Complex64], axis: usize, inverse: bool) {
    let n = grid.n(axis);
    let fft = plan(n, inverse);
    if grid.dims() == 1 || axis == 1 {
        // contiguous lines
        for line in data.chunks_exact_mut(n) {
            fft.process(line);
        }
    } else {
        let stride = grid.stride(0);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..stride {
            for i in 0..n {
                line[i] = data[i * stride + j];
            }
            fft.process(&mut line);
            for i in 0..n {
                data[i * stride + j] = line[i];
            }
        }
    }
}

/// Forward transform over all axes (unnormalized).
pub fn forward(grid: &Grid, data: &mut [Complex64]) {
    for axis in 0..grid.dims() {
        transform_axis(grid, data, axis, false);
    }
}

/// Inverse transform over all axes, normalized so that `inverse(forward(f)) = f`.
pub fn inverse(grid: &Grid, data: &mut [Complex64]) {
    for axis in 0..grid.dims() {
        transform_axis(grid, data, axis, true);
    }
    let s = 1.0 / grid.size() as f64;
    for z in data.iter_mut() {
        *z *= s;
    }
}

/// Spectrum of a field, cached so that several derivatives can share one
/// forward transform.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub grid: Grid,
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn of(field: &ComplexField) -> Self {
        let mut coeffs = field.data.clone();
        forward(&field.grid, &mut coeffs);
        Self {
            grid: field.grid,
            coeffs,
        }
    }

    pub fn of_real(field: &RealField) -> Self {
        Self::of(&field.to_complex())
    }

    /// Mixed partial derivative with per-axis orders, `orders[a]` along axis `a`.
    pub fn partial(&self, orders: [usize; 2]) -> ComplexField {
        let g = self.grid;
        let kx = multiplier(&g, 0, orders[0]);
        let ky = if g.dims() == 2 {
            multiplier(&g, 1, orders[1])
        } else {
            vec![Complex64::new(1.0, 0.0)]
        };
        let mut data = self.coeffs.clone();
        for (idx, z) in data.iter_mut().enumerate() {
            let [i, j] = g.unflatten(idx);
            *z *= kx[i] * ky[j.min(ky.len() - 1)];
        }
        inverse(&g, &mut data);
        ComplexField { grid: g, data }
    }
}

/// Fourier multipliers `(i k)^order` along one axis. Odd orders drop the
/// Nyquist bin, which has no well-defined sign.
fn multiplier(grid: &Grid, axis: usize, order: usize) -> Vec<Complex64> {
    let n = grid.n(axis);
    (0..n)
        .map(|i| {
            if order == 0 {
                return Complex64::new(1.0, 0.0);
            }
            if order % 2 == 1 && i == n / 2 {
                return Complex64::new(0.0, 0.0);
            }
            let k = grid.wavenumber(axis, i);
            Complex64::new(0.0, k).powu(order as u32)
        })
        .collect()
}

fn check_order(order: usize, axis: usize, grid: &Grid) -> Result<()> {
    if !(1..=4).contains(&order) {
        return Err(Error::InvalidConfig(format!(
            "derivative order must be 1..=4, got {order}"
        )));
    }
    if axis >= grid.dims() {
        return Err(Error::InvalidConfig(format!(
            "axis {axis} out of range for a {}D grid",
            grid.dims()
        )));
    }
    Ok(())
}

/// Derivative of a complex field of order 1 to 4 along `axis`.
pub fn derivative(field: &ComplexField, order: usize, axis: usize) -> Result<ComplexField> {
    check_order(order, axis, &field.grid)?;
    let mut orders = [0, 0];
    orders[axis] = order;
    Ok(Spectrum::of(field).partial(orders))
}

/// Derivative of a real field; the imaginary round-off is discarded.
pub fn derivative_real(field: &RealField, order: usize, axis: usize) -> Result<RealField> {
    let d = derivative(&field.to_complex(), order, axis)?;
    Ok(RealField {
        grid: field.grid,
        data: d.data.iter().map(|z| z.re).collect(),
    })
}

/// First derivative of a real field, used internally where order checks are moot.
pub(crate) fn d1_real(field: &RealField, axis: usize) -> RealField {
    let mut orders = [0, 0];
    orders[axis] = 1;
    let d = Spectrum::of_real(field).partial(orders);
    RealField {
        grid: field.grid,
        data: d.data.iter().map(|z| z.re).collect(),
    }
}

/// Spectral divergence of a real vector field.
pub fn divergence(components: &[RealField]) -> RealField {
    let grid = components[0].grid;
    let mut out = RealField::zeros(grid);
    for (axis, c) in components.iter().enumerate() {
        let d = d1_real(c, axis);
        for (o, v) in out.data.iter_mut().zip(&d.data) {
            *o += v;
        }
    }
    out
}

/// Spectral gradient of a real field.
pub fn gradient(field: &RealField) -> Vec<RealField> {
    (0..field.grid.dims()).map(|a| d1_real(field, a)).collect()
}

/// Spectral Laplacian of a complex field.
pub fn laplacian(field: &ComplexField) -> ComplexField {
    let spec = Spectrum::of(field);
    let g = field.grid;
    let mut out = spec.partial([2, 0]);
    if g.dims() == 2 {
        let yy = spec.partial([0, 2]);
        for (o, v) in out.data.iter_mut().zip(&yy.data) {
            *o += v;
        }
    }
    out
}

/// Translates a field by `shift` (per axis) using the Fourier shift theorem:
/// the result `g` satisfies `g(x) = f(x - shift)`.
pub fn translate(field: &ComplexField, shift: [f64; 2]) -> ComplexField {
    let g = field.grid;
    let mut data = field.data.clone();
    forward(&g, &mut data);
    for (idx, z) in data.iter_mut().enumerate() {
        let [i, j] = g.unflatten(idx);
        // the Nyquist bin is shared between +k and -k, so it only picks up cos
        let mut factor = Complex64::new(1.0, 0.0);
        for (axis, bin) in [(0, i), (1, j)].into_iter().take(g.dims()) {
            let k = g.wavenumber(axis, bin);
            if bin == g.n(axis) / 2 {
                factor *= (k * shift[axis]).cos();
            } else {
                factor *= Complex64::from_polar(1.0, -k * shift[axis]);
            }
        }
        *z *= factor;
    }
    inverse(&g, &mut data);
    ComplexField { grid: g, data }
}

/// Evaluates the trigonometric interpolant of a 1D real field at `x`.
pub fn interpolate_1d(spec: &Spectrum, x: f64) -> f64 {
    let g = spec.grid;
    let n = g.n(0);
    let x0 = g.coord(0, 0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, c) in spec.coeffs.iter().enumerate() {
        let k = g.wavenumber(0, i);
        let w = if i == n / 2 {
            // split the Nyquist bin evenly between +k and -k
            Complex64::new((k * (x - x0)).cos(), 0.0)
        } else {
            Complex64::from_polar(1.0, k * (x - x0))
        };
        acc += c * w;
    }
    acc.re / n as f64
}
