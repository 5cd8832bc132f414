//! Energies, Ehrenfest corrections and the weak-separability harness.

use serde::Serialize;

use crate::currents::continuity_residual;
use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolutionConfig, Model};
use crate::functionals::{eval_functional, forbidden_term, MeParams};
use crate::grid::{ComplexField, Grid, PhysicalConstants, RealField};
use crate::hydro::{hydro_decompose, HydroView, Scalar};
use crate::spectral::{self, Spectrum};
use crate::states::check_tails;

/// Largest product grid the separability harness will build.
pub const MAX_PRODUCT_POINTS: usize = 128 * 128;

/// One row of the observables table. Vector quantities carry one entry per
/// axis; the second entry is zero in 1D.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservablesSample {
    pub t: f64,
    pub norm: f64,
    pub e_l: f64,
    pub e_me: f64,
    pub x_mean: [f64; 2],
    pub p_mean: [f64; 2],
    pub i1: [f64; 2],
    pub i2: [f64; 2],
    /// `<grad V>`, kept for the Ehrenfest balance.
    pub grad_v_mean: [f64; 2],
    /// Integral of the pointwise continuity residual over the step ending
    /// at `t` (over the first step for `t = 0`).
    pub cont_residual: f64,
}

/// `(E_L, E_ME)`. `E_L = int hbar^2/2m |grad psi|^2 + V rho`. For sets of
/// minimal-extension shape `E_ME = E_L + hbar (b1 - b6) int rho lap lap S`;
/// otherwise `E_ME = E_L + hbar D int rho F_b`.
pub fn energy(
    psi: &ComplexField,
    v: Option<&RealField>,
    model: &Model,
    c: PhysicalConstants,
) -> Result<(f64, f64)> {
    let e_l = linear_energy(psi, v, c);
    if model.is_linear() {
        return Ok((e_l, e_l));
    }
    let h = hydro_decompose(psi, None)?;
    Ok((e_l, e_l + nonlinear_energy(&h, model, c)?))
}

fn linear_energy(psi: &ComplexField, v: Option<&RealField>, c: PhysicalConstants) -> f64 {
    let g = psi.grid;
    let spec = Spectrum::of(psi);
    let mut kin = 0.0;
    for axis in 0..g.dims() {
        let mut o = [0, 0];
        o[axis] = 1;
        kin += spec.partial(o).data.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    let pot = v.map_or(0.0, |v| {
        v.data.iter().zip(&psi.data).map(|(v, z)| v * z.norm_sqr()).sum::<f64>()
    });
    (c.hbar * c.hbar / (2.0 * c.mass) * kin + pot) * g.dv()
}

fn nonlinear_energy(h: &HydroView, model: &Model, c: PhysicalConstants) -> Result<f64> {
    if model.forbidden == 0.0 {
        if let Some(p) = MeParams::from_coeffs(&model.coeffs) {
            let integrand: Vec<f64> = h
                .bilap(Scalar::Phase)
                .iter()
                .zip(&h.rho.data)
                .map(|(b, r)| r * b)
                .collect();
            return Ok(c.hbar * (p.b1 - p.b6) * h.integrate(&integrand));
        }
    }
    let cs = &model.coeffs;
    let mut fb = eval_functional(&cs.b, cs.variant, h)?;
    let extra = forbidden_term(h, model.forbidden);
    let integrand: Vec<f64> = fb
        .data
        .iter_mut()
        .zip(&extra.data)
        .zip(&h.rho.data)
        .map(|((b, e), r)| r * (*b + e))
        .collect();
    Ok(c.hbar * cs.d * h.integrate(&integrand))
}

/// `<x>` and `<p>` per axis.
pub fn moments(psi: &ComplexField, c: PhysicalConstants) -> ([f64; 2], [f64; 2]) {
    let g = psi.grid;
    let spec = Spectrum::of(psi);
    let (mut x, mut p) = ([0.0; 2], [0.0; 2]);
    for axis in 0..g.dims() {
        let mut o = [0, 0];
        o[axis] = 1;
        let d = spec.partial(o);
        let mut sx = 0.0;
        let mut sp = 0.0;
        for (idx, z) in psi.data.iter().enumerate() {
            sx += g.point(idx)[axis] * z.norm_sqr();
            sp += (z.conj() * d.data[idx]).im;
        }
        x[axis] = sx * g.dv();
        p[axis] = c.hbar * sp * g.dv();
    }
    (x, p)
}

fn corrections(h: &HydroView, model: &Model, c: PhysicalConstants) -> Result<([f64; 2], [f64; 2])> {
    let (mut i1, mut i2) = ([0.0; 2], [0.0; 2]);
    if model.is_linear() {
        return Ok((i1, i2));
    }
    let cs = &model.coeffs;
    let fa = eval_functional(&cs.a, cs.variant, h)?;
    let mut fb = eval_functional(&cs.b, cs.variant, h)?;
    let extra = forbidden_term(h, model.forbidden);
    for (b, e) in fb.data.iter_mut().zip(&extra.data) {
        *b += e;
    }
    let g = h.grid;
    for axis in 0..g.dims() {
        let (mut s1, mut s2) = (0.0, 0.0);
        let (ds, dl) = (h.s.d(axis), h.log_rho.d(axis));
        for idx in 0..g.size() {
            if h.is_masked(idx) {
                continue;
            }
            let r = h.rho.data[idx];
            s1 += g.point(idx)[axis] * r * fa.data[idx];
            // rho grad H_R integrates to -H_R grad rho
            s2 += r * (fb.data[idx] * dl[idx] - fa.data[idx] * ds[idx]);
        }
        i1[axis] = -c.mass * cs.d * s1 * g.dv();
        i2[axis] = c.hbar * cs.d * s2 * g.dv();
    }
    Ok((i1, i2))
}

/// Nonlinear corrections to the Ehrenfest relations,
/// `I1 = (2m / hbar) int x rho H_I` and `I2 = int rho (2 H_I grad S - grad H_R)`,
/// with `H_I = -(hbar D / 2) F_a` and `H_R = hbar D F_b`. For the minimal
/// extension `I1 = -m D1 int x div(rho grad lap S)`. The state must have
/// decayed on the box rim.
pub fn ehrenfest_corrections(
    psi: &ComplexField,
    model: &Model,
    c: PhysicalConstants,
) -> Result<([f64; 2], [f64; 2])> {
    check_tails(psi)?;
    if model.is_linear() {
        return Ok(([0.0; 2], [0.0; 2]));
    }
    let h = hydro_decompose(psi, None)?;
    corrections(&h, model, c)
}

fn grad_v_mean(psi: &ComplexField, v: Option<&RealField>) -> [f64; 2] {
    let mut out = [0.0; 2];
    if let Some(v) = v {
        let g = psi.grid;
        for (axis, gv) in spectral::gradient(v).iter().enumerate() {
            out[axis] = gv
                .data
                .iter()
                .zip(&psi.data)
                .map(|(a, z)| a * z.norm_sqr())
                .sum::<f64>()
                * g.dv();
        }
    }
    out
}

/// Integral of the continuity residual between two consecutive states.
pub fn residual_integral(
    prev: &ComplexField,
    next: &ComplexField,
    dt: f64,
    model: &Model,
    c: PhysicalConstants,
) -> Result<f64> {
    Ok(continuity_residual(prev, next, dt, &model.coeffs, c)?.integral)
}

/// Builds one observables row. `prev` is the state one step of `dt` earlier;
/// without it the residual is left at zero. `I1` and `I2` are evaluated
/// without the tail check so that periodic states still get a row.
pub fn sample_observables(
    t: f64,
    psi: &ComplexField,
    prev: Option<&ComplexField>,
    dt: f64,
    v: Option<&RealField>,
    model: &Model,
    c: PhysicalConstants,
) -> Result<ObservablesSample> {
    let (x_mean, p_mean) = moments(psi, c);
    let e_l = linear_energy(psi, v, c);
    let (e_me, i1, i2) = if model.is_linear() {
        (e_l, [0.0; 2], [0.0; 2])
    } else {
        let h = hydro_decompose(psi, None)?;
        let (i1, i2) = corrections(&h, model, c)?;
        (e_l + nonlinear_energy(&h, model, c)?, i1, i2)
    };
    let cont_residual = match prev {
        Some(p) => residual_integral(p, psi, dt, model, c)?,
        None => 0.0,
    };
    Ok(ObservablesSample {
        t,
        norm: psi.norm(),
        e_l,
        e_me,
        x_mean,
        p_mean,
        i1,
        i2,
        grad_v_mean: grad_v_mean(psi, v),
        cont_residual,
    })
}

/// Residuals of `m d<x>/dt = <p> + I1` and `d<p>/dt = -<grad V> + I2` at
/// interior sample times, along axis 0, with time derivatives from centered
/// differences of the samples.
#[derive(Debug, Clone, Serialize)]
pub struct EhrenfestReport {
    pub times: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    /// `r1` recomputed with `I1` dropped.
    pub r1_without_i1: Vec<f64>,
    /// `r2` recomputed with `I2` dropped.
    pub r2_without_i2: Vec<f64>,
    pub max_abs_p: f64,
    pub max_abs_i1: f64,
}

impl EhrenfestReport {
    pub fn max_r1(&self) -> f64 {
        max_abs(&self.r1)
    }

    pub fn max_r2(&self) -> f64 {
        max_abs(&self.r2)
    }

    pub fn max_r1_without_i1(&self) -> f64 {
        max_abs(&self.r1_without_i1)
    }

    pub fn max_r2_without_i2(&self) -> f64 {
        max_abs(&self.r2_without_i2)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn ehrenfest_consistency(samples: &[ObservablesSample], c: PhysicalConstants) -> Result<EhrenfestReport> {
    if samples.len() < 3 {
        return Err(Error::InvalidConfig(
            "need at least three samples for centered differences".into(),
        ));
    }
    let mut rep = EhrenfestReport {
        times: Vec::new(),
        r1: Vec::new(),
        r2: Vec::new(),
        r1_without_i1: Vec::new(),
        r2_without_i2: Vec::new(),
        max_abs_p: samples.iter().map(|s| s.p_mean[0].abs()).fold(0.0, f64::max),
        max_abs_i1: samples.iter().map(|s| s.i1[0].abs()).fold(0.0, f64::max),
    };
    for w in samples.windows(3) {
        let (a, s, b) = (&w[0], &w[1], &w[2]);
        let span = b.t - a.t;
        let dx = (b.x_mean[0] - a.x_mean[0]) / span;
        let dp = (b.p_mean[0] - a.p_mean[0]) / span;
        let base1 = c.mass * dx - s.p_mean[0];
        let base2 = dp + s.grad_v_mean[0];
        rep.times.push(s.t);
        rep.r1.push(base1 - s.i1[0]);
        rep.r2.push(base2 - s.i2[0]);
        rep.r1_without_i1.push(base1);
        rep.r2_without_i2.push(base2);
    }
    Ok(rep)
}

/// Result of the two-subsystem comparison.
#[derive(Debug, Clone, Serialize)]
pub struct SeparabilityReport {
    pub times: Vec<f64>,
    /// `max |psi_2d - psi_1 (x) psi_2|` at each compared time.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

/// Evolves `psi1 (x) psi2` on the product grid with `V1 + V2` and compares
/// it with the product of the separately evolved factors at every stored
/// snapshot. `cfg` supplies the model, step, end time, snapshot stride and
/// integrator; its potential is ignored.
pub fn separability_test(
    psi1: &ComplexField,
    psi2: &ComplexField,
    v1: Option<&RealField>,
    v2: Option<&RealField>,
    cfg: &EvolutionConfig,
) -> Result<SeparabilityReport> {
    if psi1.grid.dims() != 1 || psi2.grid.dims() != 1 {
        return Err(Error::GridMismatch("separability factors must be 1D".into()));
    }
    let points = psi1.grid.size() * psi2.grid.size();
    if points > MAX_PRODUCT_POINTS {
        return Err(Error::MemoryBound(points));
    }
    let zero = |g: Grid| RealField::zeros(g);
    let v1f = v1.cloned().unwrap_or_else(|| zero(psi1.grid));
    let v2f = v2.cloned().unwrap_or_else(|| zero(psi2.grid));
    let v12 = RealField::outer_sum(&v1f, &v2f)?;
    let psi12 = ComplexField::tensor(psi1, psi2)?;

    let run = |psi: &ComplexField, v: RealField| -> Result<Vec<(f64, ComplexField)>> {
        let mut c = cfg.clone();
        c.potential = Some(v);
        c.observables = false;
        Ok(evolve(psi, &c)?.snapshots)
    };
    let s1 = run(psi1, v1f)?;
    let s2 = run(psi2, v2f)?;
    let s12 = run(&psi12, v12)?;
    let mut rep = SeparabilityReport {
        times: Vec::new(),
        deviations: Vec::new(),
        max_deviation: 0.0,
    };
    for ((a, b), (t, joint)) in s1.iter().zip(&s2).zip(&s12) {
        let prod = ComplexField::tensor(&a.1, &b.1)?;
        let dev = joint.max_abs_diff(&prod);
        rep.times.push(*t);
        rep.deviations.push(dev);
        rep.max_deviation = rep.max_deviation.max(dev);
    }
    Ok(rep)
}

/// Largest `|H_NL psi|` relative to `max |psi|`.
pub fn nonlinear_residual(psi: &ComplexField, model: &Model, c: PhysicalConstants) -> Result<f64> {
    let nl = crate::evolution::nonlinear_action(psi, model, c)?;
    let peak = psi.max_abs();
    Ok(nl.max_abs() / if peak > 0.0 { peak } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::MeParams;
    use crate::states::{make_state, StateSpec};
    use std::f64::consts::TAU;

    fn nat() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn plane_wave_energy() {
        let g = Grid::new(1, 64, TAU).unwrap();
        let psi = make_state(&StateSpec::PlaneWave { k: 3.0, ky: 0.0 }, g, nat()).unwrap();
        let (el, eme) = energy(&psi, None, &Model::me(MeParams::default()), nat()).unwrap();
        assert!((el - 9.0 * TAU / 2.0).abs() < 1e-10);
        assert!((eme - el).abs() < 1e-10);
    }

    #[test]
    fn equal_b_cancels_in_the_energy() {
        let g = Grid::new(1, 256, 48.0).unwrap();
        let spec = StateSpec::PhaseModulated {
            amplitude: 0.4,
            k: 1.5,
            sigma: 2.5,
            phi: 0.3,
            x0: 0.0,
        };
        let psi = make_state(&spec, g, nat()).unwrap();
        let (el, eme) = energy(&psi, None, &Model::me(MeParams::new(0.1, 0.07, 0.07)), nat()).unwrap();
        assert!((el - eme).abs() < 1e-12);
        let (_, e1) = energy(&psi, None, &Model::me(MeParams::new(0.1, 0.05, 0.02)), nat()).unwrap();
        let (_, e2) = energy(&psi, None, &Model::me(MeParams::new(0.1, 0.10, 0.07)), nat()).unwrap();
        assert!((e1 - e2).abs() < 1e-12);
        assert!((e1 - el).abs() > 1e-6);
    }

    #[test]
    fn packet_has_no_corrections() {
        let g = Grid::new(1, 256, 40.0).unwrap();
        let psi = make_state(
            &StateSpec::GaussianPacket {
                t: 0.5,
                t0: 1.0,
                x0: 0.0,
                p0: 0.0,
            },
            g,
            nat(),
        )
        .unwrap();
        let (i1, i2) = ehrenfest_corrections(&psi, &Model::me(MeParams::default()), nat()).unwrap();
        assert!(i1[0].abs() < 1e-10 && i2[0].abs() < 1e-10);
        let (l1, l2) = ehrenfest_corrections(&psi, &Model::me(MeParams::new(0.0, 0.0, 0.0)), nat()).unwrap();
        assert_eq!((l1[0], l2[0]), (0.0, 0.0));
    }

    #[test]
    fn plane_wave_fails_the_tail_check() {
        let g = Grid::new(1, 64, TAU).unwrap();
        let psi = make_state(&StateSpec::PlaneWave { k: 1.0, ky: 0.0 }, g, nat()).unwrap();
        assert!(matches!(
            ehrenfest_corrections(&psi, &Model::me(MeParams::default()), nat()),
            Err(Error::TailsNotDecayed(_))
        ));
    }

    #[test]
    fn oversized_product_grid_is_rejected() {
        let g = Grid::new(1, 256, 40.0).unwrap();
        let psi = make_state(&StateSpec::HoEigenstate { n: 0, omega: 1.0 }, g, nat()).unwrap();
        let cfg = EvolutionConfig::new(Model::linear(), 1e-3, 1e-3);
        assert!(matches!(
            separability_test(&psi, &psi, None, None, &cfg),
            Err(Error::MemoryBound(_))
        ));
    }
}
