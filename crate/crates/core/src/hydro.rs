//! Hydrodynamic decomposition `psi = sqrt(rho) exp(iS)`.
//!
//! The phase is never unwrapped. Every derivative of `S` and of `ln rho` is
//! read off the logarithmic derivatives of `psi`: with `u_a = d^a psi / psi`
//! and `L = ln psi`, the partials of `L` follow from
//!
//! ```text
//! L_{a+e_i} = u_{a+e_i} - sum_{0 < b <= a} C(a, b) u_b L_{a-b+e_i}
//! ```
//!
//! and `d^a S = Im L_a`, `d^a ln rho = 2 Re L_a`. Only `psi` itself is
//! differentiated spectrally, so phase profiles that are not periodic (the
//! quadratic phase of a spreading packet, say) are handled exactly.

use num_complex::Complex64;
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField, VectorField};
use crate::spectral::Spectrum;

/// Default density floor relative to the peak density.
pub const DEFAULT_REL_FLOOR: f64 = 1e-12;
/// Largest admissible fraction of interior (non-tail) masked points.
pub const MAX_NODE_FRACTION: f64 = 0.25;
const MAX_ORDER: usize = 4;

/// Partial derivatives up to fourth order of one real scalar, indexed by
/// multi-index `[ax, ay]`.
#[derive(Debug, Clone)]
pub struct Jet {
    dims: usize,
    slots: Vec<Option<Vec<f64>>>,
}

fn slot(alpha: [usize; 2]) -> usize {
    alpha[0] * (MAX_ORDER + 1) + alpha[1]
}

impl Jet {
    fn empty(dims: usize) -> Self {
        Self {
            dims,
            slots: vec![None; (MAX_ORDER + 1) * (MAX_ORDER + 1)],
        }
    }

    pub fn partial(&self, alpha: [usize; 2]) -> &[f64] {
        self.slots[slot(alpha)]
            .as_deref()
            .expect("jet holds all partials up to fourth order")
    }

    fn unit(&self, axis: usize) -> [usize; 2] {
        let mut a = [0, 0];
        a[axis] = 1;
        a
    }

    fn add(a: [usize; 2], b: [usize; 2]) -> [usize; 2] {
        [a[0] + b[0], a[1] + b[1]]
    }

    /// Gradient component along `axis`.
    pub fn d(&self, axis: usize) -> &[f64] {
        self.partial(self.unit(axis))
    }

    pub fn dd(&self, i: usize, j: usize) -> &[f64] {
        self.partial(Self::add(self.unit(i), self.unit(j)))
    }

    pub fn lap(&self) -> Vec<f64> {
        let mut out = self.dd(0, 0).to_vec();
        if self.dims == 2 {
            for (o, v) in out.iter_mut().zip(self.dd(1, 1)) {
                *o += v;
            }
        }
        out
    }

    /// Component `axis` of grad(lap f).
    pub fn grad_lap(&self, axis: usize) -> Vec<f64> {
        let e = self.unit(axis);
        let mut out = self.partial(Self::add(e, [2, 0])).to_vec();
        if self.dims == 2 {
            for (o, v) in out.iter_mut().zip(self.partial(Self::add(e, [0, 2]))) {
                *o += v;
            }
        }
        out
    }

    /// lap(lap f).
    pub fn bilap(&self) -> Vec<f64> {
        let mut out = self.partial([4, 0]).to_vec();
        if self.dims == 2 {
            let xxyy = self.partial([2, 2]);
            let yyyy = self.partial([0, 4]);
            for ((o, a), b) in out.iter_mut().zip(xxyy).zip(yyyy) {
                *o += 2.0 * a + b;
            }
        }
        out
    }
}

/// Hydrodynamic fields derived from a wavefunction.
#[derive(Debug, Clone)]
pub struct HydroView {
    pub grid: Grid,
    pub rho: RealField,
    pub grad_s: VectorField,
    pub grad_log_rho: VectorField,
    pub lap_s: RealField,
    pub lap_rho_over_rho: RealField,
    /// `true` where `rho < eps_rho`; derived fields are zero there.
    pub node_mask: Vec<bool>,
    pub eps_rho: f64,
    /// Partials of the phase `S`.
    pub s: Jet,
    /// Partials of `ln rho`.
    pub log_rho: Jet,
}

fn multi_indices(dims: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    for order in 1..=MAX_ORDER {
        if dims == 1 {
            out.push([order, 0]);
        } else {
            for ax in (0..=order).rev() {
                out.push([ax, order - ax]);
            }
        }
    }
    out
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Decomposes `psi` into hydrodynamic fields. `eps_rho` is an absolute
/// density floor; `None` selects `1e-12 * max(rho)`.
pub fn hydro_decompose(psi: &ComplexField, eps_rho: Option<f64>) -> Result<HydroView> {
    if !psi.is_finite() {
        return Err(Error::NonFinite("hydro_decompose input"));
    }
    let grid = psi.grid;
    let dims = grid.dims();
    let rho = psi.density();
    let rho_max = rho.max_abs();
    let eps = eps_rho.unwrap_or(DEFAULT_REL_FLOOR * rho_max);
    let node_mask: Vec<bool> = rho.data.iter().map(|&r| !(r >= eps) || r == 0.0).collect();
    check_nodes(&grid, &node_mask)?;

    let spec = Spectrum::of(psi);
    let alphas = multi_indices(dims);
    let mut u: Vec<Option<Vec<Complex64>>> = vec![None; (MAX_ORDER + 1) * (MAX_ORDER + 1)];
    for &a in &alphas {
        let d = spec.partial(a);
        let ua = d
            .data
            .iter()
            .zip(&psi.data)
            .zip(&node_mask)
            .map(|((dz, z), &m)| if m { Complex64::new(0.0, 0.0) } else { dz / z })
            .collect();
        u[slot(a)] = Some(ua);
    }

    let mut logd: Vec<Option<Vec<Complex64>>> = vec![None; (MAX_ORDER + 1) * (MAX_ORDER + 1)];
    for &a in &alphas {
        let axis = if a[0] > 0 { 0 } else { 1 };
        let mut base = a;
        base[axis] -= 1;
        let mut la = u[slot(a)].clone().unwrap();
        for b0 in 0..=base[0] {
            for b1 in 0..=base[1] {
                if b0 == 0 && b1 == 0 {
                    continue;
                }
                let c = binom(base[0], b0) * binom(base[1], b1);
                let mut rest = [base[0] - b0, base[1] - b1];
                rest[axis] += 1;
                let ub = u[slot([b0, b1])].as_ref().unwrap();
                let lr = logd[slot(rest)].as_ref().unwrap();
                for ((o, x), y) in la.iter_mut().zip(ub).zip(lr) {
                    *o -= c * x * y;
                }
            }
        }
        logd[slot(a)] = Some(la);
    }

    let mut s = Jet::empty(dims);
    let mut log_rho = Jet::empty(dims);
    for &a in &alphas {
        let la = logd[slot(a)].as_ref().unwrap();
        s.slots[slot(a)] = Some(la.iter().map(|z| z.im).collect());
        log_rho.slots[slot(a)] = Some(la.iter().map(|z| 2.0 * z.re).collect());
    }

    let grad_s = (0..dims)
        .map(|ax| RealField {
            grid,
            data: s.d(ax).to_vec(),
        })
        .collect();
    let grad_log_rho: VectorField = (0..dims)
        .map(|ax| RealField {
            grid,
            data: log_rho.d(ax).to_vec(),
        })
        .collect();
    let lap_s = RealField {
        grid,
        data: s.lap(),
    };
    let mut lrr = log_rho.lap();
    for ax in 0..dims {
        for (o, p) in lrr.iter_mut().zip(log_rho.d(ax)) {
            *o += p * p;
        }
    }
    let view = HydroView {
        grid,
        rho,
        grad_s,
        grad_log_rho,
        lap_s,
        lap_rho_over_rho: RealField { grid, data: lrr },
        node_mask,
        eps_rho: eps,
        s,
        log_rho,
    };
    Ok(view)
}

/// Masked points reachable from the box rim through masked points are
/// decayed tails of a localized state; anything else counts as a node.
fn check_nodes(grid: &Grid, mask: &[bool]) -> Result<()> {
    let total = mask.len();
    let masked = mask.iter().filter(|&&m| m).count();
    if (masked as f64) <= MAX_NODE_FRACTION * total as f64 {
        return Ok(());
    }
    let mut tail = vec![false; total];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for idx in grid.rim_indices() {
        if mask[idx] && !tail[idx] {
            tail[idx] = true;
            queue.push_back(idx);
        }
    }
    while let Some(idx) = queue.pop_front() {
        let [i, j] = grid.unflatten(idx);
        let mut nbrs = Vec::with_capacity(4);
        if i > 0 {
            nbrs.push(idx - grid.stride(0));
        }
        if i + 1 < grid.n(0) {
            nbrs.push(idx + grid.stride(0));
        }
        if grid.dims() == 2 {
            if j > 0 {
                nbrs.push(idx - 1);
            }
            if j + 1 < grid.n(1) {
                nbrs.push(idx + 1);
            }
        }
        for nb in nbrs {
            if mask[nb] && !tail[nb] {
                tail[nb] = true;
                queue.push_back(nb);
            }
        }
    }
    let nodes = masked - tail.iter().filter(|&&t| t).count();
    let unmasked = total - masked;
    if (nodes as f64) > MAX_NODE_FRACTION * total as f64 || unmasked == 0 {
        return Err(Error::TooManyNodes { masked, total });
    }
    Ok(())
}

impl HydroView {
    pub fn dims(&self) -> usize {
        self.grid.dims()
    }

    pub fn is_masked(&self, idx: usize) -> bool {
        self.node_mask[idx]
    }

    /// Sets masked entries of a derived field to zero.
    pub fn apply_mask(&self, data: &mut [f64]) {
        for (v, &m) in data.iter_mut().zip(&self.node_mask) {
            if m {
                *v = 0.0;
            }
        }
    }

    /// Rectangle-rule integral over unmasked points.
    pub fn integrate(&self, data: &[f64]) -> f64 {
        data.iter()
            .zip(&self.node_mask)
            .filter(|(_, &m)| !m)
            .map(|(v, _)| v)
            .sum::<f64>()
            * self.grid.dv()
    }

    fn jet(&self, which: Scalar) -> &Jet {
        match which {
            Scalar::Phase => &self.s,
            Scalar::LogRho => &self.log_rho,
        }
    }

    /// `grad f . grad g`.
    pub fn dot(&self, f: Scalar, g: Scalar) -> Vec<f64> {
        let (jf, jg) = (self.jet(f), self.jet(g));
        let mut out = vec![0.0; self.grid.size()];
        for ax in 0..self.dims() {
            for ((o, a), b) in out.iter_mut().zip(jf.d(ax)).zip(jg.d(ax)) {
                *o += a * b;
            }
        }
        out
    }

    /// Component `k` of `grad(grad f . grad g)`.
    pub fn grad_dot(&self, f: Scalar, g: Scalar, k: usize) -> Vec<f64> {
        let (jf, jg) = (self.jet(f), self.jet(g));
        let mut out = vec![0.0; self.grid.size()];
        for i in 0..self.dims() {
            let (fik, gi, fi, gik) = (jf.dd(i, k), jg.d(i), jf.d(i), jg.dd(i, k));
            for p in 0..out.len() {
                out[p] += fik[p] * gi[p] + fi[p] * gik[p];
            }
        }
        out
    }

    /// `lap(grad f . grad g)`.
    pub fn lap_dot(&self, f: Scalar, g: Scalar) -> Vec<f64> {
        let (jf, jg) = (self.jet(f), self.jet(g));
        let mut out = vec![0.0; self.grid.size()];
        for i in 0..self.dims() {
            let (glf, gi) = (jf.grad_lap(i), jg.d(i));
            let (fi, glg) = (jf.d(i), jg.grad_lap(i));
            for p in 0..out.len() {
                out[p] += glf[p] * gi[p] + fi[p] * glg[p];
            }
            for j in 0..self.dims() {
                let (fij, gij) = (jf.dd(i, j), jg.dd(i, j));
                for p in 0..out.len() {
                    out[p] += 2.0 * fij[p] * gij[p];
                }
            }
        }
        out
    }

    /// Component `k` of `grad(lap f)`.
    pub fn grad_lap(&self, f: Scalar, k: usize) -> Vec<f64> {
        self.jet(f).grad_lap(k)
    }

    pub fn bilap(&self, f: Scalar) -> Vec<f64> {
        self.jet(f).bilap()
    }

    /// Component `k` of `grad(lap rho / rho)`.
    pub fn grad_lap_rho_over_rho(&self, k: usize) -> Vec<f64> {
        let mut out = self.log_rho.grad_lap(k);
        for (o, v) in out
            .iter_mut()
            .zip(self.grad_dot(Scalar::LogRho, Scalar::LogRho, k))
        {
            *o += v;
        }
        out
    }

    /// `lap(lap rho / rho)`.
    pub fn lap_lap_rho_over_rho(&self) -> Vec<f64> {
        let mut out = self.log_rho.bilap();
        for (o, v) in out
            .iter_mut()
            .zip(self.lap_dot(Scalar::LogRho, Scalar::LogRho))
        {
            *o += v;
        }
        out
    }

    /// `P . V` with `P = grad rho / rho` and a vector field `V`.
    pub fn p_dot(&self, v: &[Vec<f64>]) -> Vec<f64> {
        self.vec_dot(Scalar::LogRho, v)
    }

    /// `grad f . V` for a vector field `V`.
    pub fn vec_dot(&self, f: Scalar, v: &[Vec<f64>]) -> Vec<f64> {
        let jf = self.jet(f);
        let mut out = vec![0.0; self.grid.size()];
        for (ax, comp) in v.iter().enumerate() {
            for ((o, a), b) in out.iter_mut().zip(jf.d(ax)).zip(comp) {
                *o += a * b;
            }
        }
        out
    }

    /// Fraction of masked points.
    pub fn masked_fraction(&self) -> f64 {
        self.node_mask.iter().filter(|&&m| m).count() as f64 / self.node_mask.len() as f64
    }
}

/// Which hydrodynamic scalar a jet query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scalar {
    Phase,
    LogRho,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral;
    use std::f64::consts::TAU;

    #[test]
    fn plane_wave_fields() {
        let g = Grid::new(1, 128, TAU).unwrap();
        let k = 3.0;
        let psi = ComplexField::from_fn(g, |p| Complex64::from_polar(1.0, k * p[0]));
        let h = hydro_decompose(&psi, None).unwrap();
        for i in 0..g.size() {
            assert!((h.rho.data[i] - 1.0).abs() < 1e-14);
            assert!((h.grad_s[0].data[i] - k).abs() < 1e-12);
            assert!(h.grad_log_rho[0].data[i].abs() < 1e-12);
            assert!(h.lap_s.data[i].abs() < 1e-11);
        }
    }

    #[test]
    fn real_gaussian_fields() {
        let g = Grid::new(1, 256, 30.0).unwrap();
        let psi = ComplexField::from_fn(g, |p| Complex64::new((-p[0] * p[0] / 2.0).exp(), 0.0));
        let h = hydro_decompose(&psi, None).unwrap();
        for i in 0..g.size() {
            let x = g.coord(0, i);
            if x.abs() < 3.0 {
                assert!(h.grad_s[0].data[i].abs() < 1e-12);
                assert!((h.grad_log_rho[0].data[i] + 2.0 * x).abs() < 1e-10);
                assert!((h.lap_rho_over_rho.data[i] - (4.0 * x * x - 2.0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn too_many_interior_nodes_rejected() {
        let g = Grid::new(1, 64, TAU).unwrap();
        // |psi| is largest at the rim and falls below the floor over a third of the box
        let psi = ComplexField::from_fn(g, |p| {
            Complex64::new((-20.0 * (0.5 * p[0]).cos().powi(2)).exp(), 0.0)
        });
        assert!(matches!(
            hydro_decompose(&psi, None),
            Err(Error::TooManyNodes { .. })
        ));
    }

    #[test]
    fn decayed_tails_are_not_nodes() {
        let g = Grid::new(1, 128, 60.0).unwrap();
        let psi = ComplexField::from_fn(g, |p| Complex64::new((-p[0] * p[0] / 4.0).exp(), 0.0));
        let h = hydro_decompose(&psi, None).unwrap();
        assert!(h.masked_fraction() > 0.25);
    }

    #[test]
    fn mixed_partials_in_2d() {
        // psi = exp(i (x^2 y / 10 + sin x cos y)) * exp(-(x^2+y^2)/8): check S_xy
        let g = Grid::new(2, 128, 2.0 * TAU).unwrap();
        let psi = ComplexField::from_fn(g, |p| {
            let (x, y) = (p[0], p[1]);
            let s = x.sin() * y.cos() + (2.0 * y).sin();
            Complex64::from_polar(1.0 + 0.3 * (x + y).cos(), s)
        });
        let h = hydro_decompose(&psi, None).unwrap();
        let sxy = h.s.dd(0, 1);
        let sxxyy = h.s.partial([2, 2]);
        for idx in 0..g.size() {
            let [x, y] = g.point(idx);
            assert!((sxy[idx] + x.cos() * y.sin()).abs() < 1e-10, "{} at {x} {y}", sxy[idx] + x.cos() * y.sin());
            assert!((sxxyy[idx] - x.sin() * y.cos()).abs() < 1e-8);
        }
        // round trip: rho * grad ln rho against the spectral gradient of rho
        let grad = spectral::gradient(&h.rho);
        for ax in 0..2 {
            for idx in 0..g.size() {
                let rebuilt = h.rho.data[idx] * h.grad_log_rho[ax].data[idx];
                assert!((rebuilt - grad[ax].data[idx]).abs() < 1e-10);
            }
        }
    }
}
