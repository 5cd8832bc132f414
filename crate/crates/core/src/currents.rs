//! Probability currents of the divergence-form family and the continuity
//! residual.
//!
//! With the pairing `a1 = a6, ..., a5 = a10, a11 = a12 = a13 = 0` the
//! imaginary half of the fourth-order functional satisfies
//! `rho F_a = sum_i a_i div(rho grad G_i)` where
//! `G = (lap S, lap rho / rho, P . P, P . grad S, grad S . grad S)`.
//! The DG analogue with `a1 = a2`, `a4 = a5 = 0` gives a drift current
//! `D a1 rho grad S` and a diffusion current `D a3 grad rho`.

use crate::error::{Error, Result};
use crate::functionals::{eval_functional, CoeffSet, Variant};
use crate::grid::{ComplexField, PhysicalConstants, RealField, VectorField};
use crate::hydro::{hydro_decompose, HydroView, Scalar};
use crate::spectral;

/// Linear current plus the five extra currents `j_i = D_i rho grad G_i`.
#[derive(Debug, Clone)]
pub struct CurrentSet {
    pub j_linear: VectorField,
    pub j: [VectorField; 5],
    pub couplings: [f64; 5],
}

impl CurrentSet {
    /// Sum of all currents.
    pub fn total(&self) -> VectorField {
        let mut out = self.j_linear.clone();
        for ji in &self.j {
            add_into(&mut out, ji);
        }
        out
    }
}

fn add_into(acc: &mut VectorField, v: &VectorField) {
    for (a, b) in acc.iter_mut().zip(v) {
        for (x, y) in a.data.iter_mut().zip(&b.data) {
            *x += y;
        }
    }
}

fn weighted(h: &HydroView, scale: f64, comp: impl Fn(usize) -> Vec<f64>) -> VectorField {
    (0..h.dims())
        .map(|k| {
            let mut data: Vec<f64> = comp(k)
                .iter()
                .zip(&h.rho.data)
                .map(|(g, r)| scale * r * g)
                .collect();
            h.apply_mask(&mut data);
            RealField { grid: h.grid, data }
        })
        .collect()
}

/// `hbar rho grad S / m`.
pub fn linear_current(h: &HydroView, c: PhysicalConstants) -> VectorField {
    weighted(h, c.hbar / c.mass, |k| h.s.d(k).to_vec())
}

/// Currents of the extended continuity equation for couplings `D_1..D_5`.
pub fn currents(h: &HydroView, couplings: [f64; 5], c: PhysicalConstants) -> CurrentSet {
    use Scalar::{LogRho as L, Phase as S};
    let [d1, d2, d3, d4, d5] = couplings;
    let j = [
        weighted(h, d1, |k| h.grad_lap(S, k)),
        weighted(h, d2, |k| h.grad_lap_rho_over_rho(k)),
        weighted(h, d3, |k| h.grad_dot(L, L, k)),
        weighted(h, d4, |k| h.grad_dot(L, S, k)),
        weighted(h, d5, |k| h.grad_dot(S, S, k)),
    ];
    CurrentSet {
        j_linear: linear_current(h, c),
        j,
        couplings,
    }
}

/// Extra current written as `D rho grad F^DG[rho, S]`, with the five
/// couplings mapped onto the DG term order
/// (`lap S`, `grad S . P`, `lap rho / rho`, `P . P`, `grad S . grad S`).
/// `F^DG` is formed first and then differentiated spectrally.
pub fn current_from_dg_functional(h: &HydroView, couplings: [f64; 5]) -> Result<VectorField> {
    let [d1, d2, d3, d4, d5] = couplings;
    let x = [d1, d4, d2, d3, d5];
    let f = eval_functional(&x, Variant::Dg, h)?;
    let grad = spectral::gradient(&f);
    Ok(grad
        .into_iter()
        .map(|g| {
            let mut data: Vec<f64> = g.data.iter().zip(&h.rho.data).map(|(a, r)| a * r).collect();
            h.apply_mask(&mut data);
            RealField { grid: h.grid, data }
        })
        .collect())
}

/// Drift `D a1 rho grad S` and diffusion `D a3 grad rho` currents of the DG
/// divergence form.
pub fn dg_currents(h: &HydroView, drift: f64, diffusion: f64) -> (VectorField, VectorField) {
    let drift_j = weighted(h, drift, |k| h.s.d(k).to_vec());
    let diff_j = weighted(h, diffusion, |k| h.log_rho.d(k).to_vec());
    (drift_j, diff_j)
}

/// Total current for a divergence-form coefficient set.
pub fn total_current(h: &HydroView, coeffs: &CoeffSet, c: PhysicalConstants) -> Result<VectorField> {
    let couplings = coeffs.divergence_couplings().ok_or_else(|| {
        Error::InvalidCoeffs(format!(
            "{} coefficients are not in divergence form; no current exists",
            coeffs.variant
        ))
    })?;
    match coeffs.variant {
        Variant::Ext => Ok(currents(h, couplings, c).total()),
        Variant::Dg => {
            let mut out = linear_current(h, c);
            let (drift, diff) = dg_currents(h, couplings[0], couplings[1]);
            add_into(&mut out, &drift);
            add_into(&mut out, &diff);
            Ok(out)
        }
    }
}

/// `div j` for a divergence-form set. Other sets have no current; for them
/// the source `D rho F_a` stands in for the extra divergence.
pub fn flux_divergence(h: &HydroView, coeffs: &CoeffSet, c: PhysicalConstants) -> Result<RealField> {
    if coeffs.divergence_couplings().is_some() {
        return Ok(spectral::divergence(&total_current(h, coeffs, c)?));
    }
    let mut div = spectral::divergence(&linear_current(h, c));
    let fa = eval_functional(&coeffs.a, coeffs.variant, h)?;
    for ((o, f), r) in div.data.iter_mut().zip(&fa.data).zip(&h.rho.data) {
        *o += coeffs.d * r * f;
    }
    Ok(div)
}

/// Pointwise continuity residual and its summaries.
#[derive(Debug, Clone)]
pub struct ContinuityResidual {
    /// `|d rho / dt + div j|` at every grid point.
    pub pointwise: RealField,
    pub max: f64,
    /// Rectangle-rule integral of the pointwise residual.
    pub integral: f64,
    /// Largest `|d rho / dt|` and `|div j|` seen, for scale.
    pub max_drho_dt: f64,
    pub max_div_j: f64,
}

/// Residual of the continuity equation between two snapshots a time `dt`
/// apart. The time derivative is the difference quotient and the divergence
/// is averaged over both ends, so the residual is centered at the midpoint.
pub fn continuity_residual(
    psi0: &ComplexField,
    psi1: &ComplexField,
    dt: f64,
    coeffs: &CoeffSet,
    c: PhysicalConstants,
) -> Result<ContinuityResidual> {
    if !psi0.grid.same_shape(&psi1.grid) {
        return Err(Error::GridMismatch("snapshots live on different grids".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    let h0 = hydro_decompose(psi0, None)?;
    let h1 = hydro_decompose(psi1, None)?;
    let div0 = flux_divergence(&h0, coeffs, c)?;
    let div1 = flux_divergence(&h1, coeffs, c)?;
    let grid = psi0.grid;
    let mut data = Vec::with_capacity(grid.size());
    let (mut max_drho, mut max_div) = (0.0f64, 0.0f64);
    for i in 0..grid.size() {
        let drho = (h1.rho.data[i] - h0.rho.data[i]) / dt;
        let div = 0.5 * (div0.data[i] + div1.data[i]);
        max_drho = max_drho.max(drho.abs());
        max_div = max_div.max(div.abs());
        data.push((drho + div).abs());
    }
    let pointwise = RealField { grid, data };
    Ok(ContinuityResidual {
        max: pointwise.max_abs(),
        integral: pointwise.integral(),
        pointwise,
        max_drho_dt: max_drho,
        max_div_j: max_div,
    })
}

/// `m* = m / beta` with `beta = 1 + D m / hbar`.
pub fn effective_mass(m: f64, d: f64, hbar: f64) -> Result<(f64, f64)> {
    let beta = 1.0 + d * m / hbar;
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::SingularMass);
    }
    Ok((m / beta, beta))
}
