//! Time stepping of
//!
//! ```text
//! i hbar dpsi/dt = (-hbar^2 lap / 2m + V) psi - (i hbar D / 2) F_a psi + hbar D F_b psi
//! ```
//!
//! The default integrator is the Lawson integrating-factor RK4: the free
//! propagator `exp(-i hbar k^2 t / 2m)` is applied exactly in Fourier space
//! and the potential plus the nonlinear terms are stepped with RK4. Nonlinear
//! terms are recomputed from the current stage state, never lagged.
//!
//! For `D_1 > 0` the minimal extension is ill-posed at short wavelengths: a
//! uniform state is unstable for wavenumbers above `1 / sqrt(D_1)`. Grids
//! that resolve such modes amplify round-off there, so long runs need
//! `k_max` below that threshold or a short time window.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{sample_observables, ObservablesSample};
use crate::error::{Error, Result};
use crate::functionals::{eval_functional, forbidden_term, CoeffSet, MeParams, Variant};
use crate::grid::{ComplexField, Grid, PhysicalConstants, RealField};
use crate::hydro::{hydro_decompose, Scalar};
use crate::spectral;

/// Coefficients plus the optional separability-breaking term
/// `x14 (lap S)^2`, which is added to the real half.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub coeffs: CoeffSet,
    pub forbidden: f64,
}

impl Model {
    pub fn new(coeffs: CoeffSet) -> Self {
        Self {
            coeffs,
            forbidden: 0.0,
        }
    }

    pub fn linear() -> Self {
        Self::new(CoeffSet::linear())
    }

    pub fn me(p: MeParams) -> Self {
        Self::new(p.to_coeffs())
    }

    pub fn with_forbidden(mut self, x14: f64) -> Self {
        self.forbidden = x14;
        self
    }

    pub fn is_linear(&self) -> bool {
        self.coeffs.is_linear() && self.forbidden == 0.0
    }
}

/// `H_NL psi = [-(i hbar D / 2) F_a + hbar D F_b] psi`, zero on masked points.
pub fn nonlinear_action(psi: &ComplexField, model: &Model, c: PhysicalConstants) -> Result<ComplexField> {
    let mut out = ComplexField::zeros(psi.grid);
    if model.is_linear() {
        return Ok(out);
    }
    let h = hydro_decompose(psi, None)?;
    let cs = &model.coeffs;
    let fa = eval_functional(&cs.a, cs.variant, &h)?;
    let mut fb = eval_functional(&cs.b, cs.variant, &h)?;
    if model.forbidden != 0.0 {
        let extra = forbidden_term(&h, model.forbidden);
        for (b, e) in fb.data.iter_mut().zip(&extra.data) {
            *b += e;
        }
    }
    let hd = c.hbar * cs.d;
    for (i, o) in out.data.iter_mut().enumerate() {
        let h_nl = Complex64::new(hd * fb.data[i], -0.5 * hd * fa.data[i]);
        *o = h_nl * psi.data[i];
    }
    Ok(out)
}

/// Applies the free propagator `exp(-i hbar k^2 tau / 2m)`.
pub fn free_propagate(psi: &ComplexField, tau: f64, c: PhysicalConstants) -> ComplexField {
    if tau == 0.0 {
        return psi.clone();
    }
    let g = psi.grid;
    let mut data = psi.data.clone();
    spectral::forward(&g, &mut data);
    let phases = free_phases(&g, tau, c);
    for (z, p) in data.iter_mut().zip(&phases) {
        *z *= p;
    }
    spectral::inverse(&g, &mut data);
    ComplexField { grid: g, data }
}

fn free_phases(g: &Grid, tau: f64, c: PhysicalConstants) -> Vec<Complex64> {
    let kx = g.wavenumbers(0);
    let ky = if g.dims() == 2 { g.wavenumbers(1) } else { vec![0.0] };
    (0..g.size())
        .map(|idx| {
            let [i, j] = g.unflatten(idx);
            let k2 = kx[i] * kx[i] + ky[j.min(ky.len() - 1)].powi(2);
            Complex64::from_polar(1.0, -c.hbar * k2 * tau / (2.0 * c.mass))
        })
        .collect()
}

/// Everything except the free kinetic term: `-(i/hbar) V psi + H_NL psi / (i hbar)`.
fn stiff_free_rhs(
    psi: &ComplexField,
    v: Option<&RealField>,
    model: &Model,
    c: PhysicalConstants,
) -> Result<ComplexField> {
    let mut out = nonlinear_action(psi, model, c)?;
    let inv = Complex64::new(0.0, -1.0 / c.hbar);
    for (i, o) in out.data.iter_mut().enumerate() {
        let vpsi = v.map_or(Complex64::new(0.0, 0.0), |v| v.data[i] * psi.data[i]);
        *o = inv * (*o + vpsi);
    }
    Ok(out)
}

/// Full right-hand side `dpsi/dt`.
pub fn nonlinear_rhs(
    psi: &ComplexField,
    v: Option<&RealField>,
    model: &Model,
    c: PhysicalConstants,
) -> Result<ComplexField> {
    let mut out = stiff_free_rhs(psi, v, model, c)?;
    let lap = spectral::laplacian(psi);
    let kin = Complex64::new(0.0, c.hbar / (2.0 * c.mass));
    for (o, l) in out.data.iter_mut().zip(&lap.data) {
        *o += kin * l;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    IfRk4,
    Rk4,
}

#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    /// Observables are sampled every `sample_stride` steps.
    pub sample_stride: usize,
    /// Snapshots are stored every `snapshot_stride` steps; 0 keeps only the
    /// initial and final states.
    pub snapshot_stride: usize,
    pub potential: Option<RealField>,
    pub model: Model,
    pub constants: PhysicalConstants,
    /// Largest admissible relative norm drift before aborting.
    pub norm_tol: f64,
    /// Whether to compute the observables at all.
    pub observables: bool,
}

impl EvolutionConfig {
    pub fn new(model: Model, dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            integrator: Integrator::IfRk4,
            sample_stride: 1,
            snapshot_stride: 0,
            potential: None,
            model,
            constants: PhysicalConstants::default(),
            norm_tol: 1e-6,
            observables: true,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidConfig(format!("t_end = {} must be >= 0", self.t_end)));
        }
        let n = self.t_end / self.dt;
        if (n - n.round()).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "t_end = {} is not a whole number of steps of {}",
                self.t_end, self.dt
            )));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidConfig("sample_stride must be >= 1".into()));
        }
        if let Some(v) = &self.potential {
            if !v.grid.same_shape(grid) {
                return Err(Error::GridMismatch("potential and state grids differ".into()));
            }
        }
        let bound = stability_bound(grid, &self.model, self.potential.as_ref(), self.integrator, self.constants);
        if self.dt > bound {
            return Err(Error::InvalidConfig(format!(
                "dt = {} exceeds the explicit stability bound {bound:e}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Largest stable step: RK4 keeps `|lambda dt| <= 2.5` for the fastest
/// explicit rate. The rate estimate sums `|D| max|x_i| k_max^p` (`p = 2` for
/// DG, `4` for EXT), `max|V| / hbar` and, for plain RK4, the free rate
/// `hbar k_max^2 / 2m`.
pub fn stability_bound(
    grid: &Grid,
    model: &Model,
    v: Option<&RealField>,
    integrator: Integrator,
    c: PhysicalConstants,
) -> f64 {
    let kmax = (0..grid.dims()).map(|a| grid.k_max(a)).fold(0.0, f64::max);
    let cs = &model.coeffs;
    let order = match cs.variant {
        Variant::Dg => 2,
        Variant::Ext => 4,
    };
    let xmax = cs
        .a
        .iter()
        .chain(&cs.b)
        .map(|v| v.abs())
        .fold(model.forbidden.abs(), f64::max);
    let mut rate = (cs.d * xmax).abs() * kmax.powi(order);
    rate += v.map_or(0.0, |v| v.max_abs()) / c.hbar;
    if integrator == Integrator::Rk4 {
        rate += c.hbar * kmax * kmax / (2.0 * c.mass);
    }
    if rate == 0.0 {
        f64::INFINITY
    } else {
        2.5 / rate
    }
}

/// Default step: a fifth of the stability bound, capped at `1e-3`.
pub fn default_dt(grid: &Grid, model: &Model, v: Option<&RealField>, integrator: Integrator, c: PhysicalConstants) -> f64 {
    (0.2 * stability_bound(grid, model, v, integrator, c)).min(1e-3)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, ComplexField)>,
    pub observables: Vec<ObservablesSample>,
    pub dt: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &ComplexField {
        &self.snapshots.last().expect("trajectory holds the initial state").1
    }
}

/// One step of the chosen integrator.
pub fn step(psi: &ComplexField, cfg: &EvolutionConfig) -> Result<ComplexField> {
    let (v, m, c, h) = (cfg.potential.as_ref(), &cfg.model, cfg.constants, cfg.dt);
    let axpy = |a: &ComplexField, s: f64, b: &ComplexField| ComplexField {
        grid: a.grid,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x + s * y).collect(),
    };
    match cfg.integrator {
        Integrator::Rk4 => {
            let f = |u: &ComplexField| nonlinear_rhs(u, v, m, c);
            let k1 = f(psi)?;
            let k2 = f(&axpy(psi, 0.5 * h, &k1))?;
            let k3 = f(&axpy(psi, 0.5 * h, &k2))?;
            let k4 = f(&axpy(psi, h, &k3))?;
            let mut out = psi.clone();
            for i in 0..out.data.len() {
                out.data[i] += h / 6.0 * (k1.data[i] + 2.0 * k2.data[i] + 2.0 * k3.data[i] + k4.data[i]);
            }
            Ok(out)
        }
        Integrator::IfRk4 => {
            let f = |u: &ComplexField| stiff_free_rhs(u, v, m, c);
            let e = |u: &ComplexField| free_propagate(u, 0.5 * h, c);
            let k1 = f(psi)?;
            let k2 = f(&e(&axpy(psi, 0.5 * h, &k1)))?;
            let e_psi = e(psi);
            let k3 = f(&axpy(&e_psi, 0.5 * h, &k2))?;
            let e2_psi = e(&e_psi);
            let k4 = f(&axpy(&e2_psi, h, &e(&k3)))?;
            let e2_k1 = e(&e(&k1));
            let mid = e(&ComplexField {
                grid: psi.grid,
                data: k2.data.iter().zip(&k3.data).map(|(a, b)| a + b).collect(),
            });
            let mut out = e2_psi;
            for i in 0..out.data.len() {
                out.data[i] += h / 6.0 * (e2_k1.data[i] + 2.0 * mid.data[i] + k4.data[i]);
            }
            Ok(out)
        }
    }
}

/// Integrates from `psi0` to `t_end`. Aborts with the last good time if the
/// state turns non-finite or the norm drifts beyond `norm_tol`.
pub fn evolve(psi0: &ComplexField, cfg: &EvolutionConfig) -> Result<Trajectory> {
    cfg.validate(&psi0.grid)?;
    if !psi0.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let steps = cfg.steps();
    let norm0 = psi0.norm();
    let c = cfg.constants;
    let v = cfg.potential.as_ref();
    let mut traj = Trajectory {
        snapshots: vec![(0.0, psi0.clone())],
        observables: Vec::new(),
        dt: cfg.dt,
        steps,
    };
    let mut pending: Option<ObservablesSample> = None;
    if cfg.observables {
        pending = Some(sample_observables(0.0, psi0, None, cfg.dt, v, &cfg.model, c)?);
    }
    let mut psi = psi0.clone();
    for n in 1..=steps {
        let t_prev = (n - 1) as f64 * cfg.dt;
        let t = n as f64 * cfg.dt;
        let next = step(&psi, cfg).map_err(|e| match e {
            Error::TooManyNodes { .. } | Error::NonFinite(_) => Error::Unstable {
                last_good_t: t_prev,
                reason: e.to_string(),
            },
            other => other,
        })?;
        if !next.is_finite() {
            return Err(Error::Unstable {
                last_good_t: t_prev,
                reason: "non-finite samples".into(),
            });
        }
        let drift = (next.norm() - norm0).abs() / norm0;
        if drift > cfg.norm_tol {
            return Err(Error::Unstable {
                last_good_t: t_prev,
                reason: format!("norm drift {drift:e} exceeds {:e}", cfg.norm_tol),
            });
        }
        if let Some(mut s) = pending.take() {
            // the first sample's residual needs the step that follows it
            s.cont_residual = crate::diagnostics::residual_integral(&psi, &next, cfg.dt, &cfg.model, c)?;
            traj.observables.push(s);
        }
        if cfg.observables && n % cfg.sample_stride == 0 {
            traj.observables
                .push(sample_observables(t, &next, Some(&psi), cfg.dt, v, &cfg.model, c)?);
        }
        if cfg.snapshot_stride > 0 && n % cfg.snapshot_stride == 0 && n != steps {
            traj.snapshots.push((t, next.clone()));
        }
        psi = next;
    }
    if let Some(s) = pending.take() {
        traj.observables.push(s);
    }
    if steps > 0 {
        traj.snapshots.push((steps as f64 * cfg.dt, psi));
    }
    Ok(traj)
}

/// Galilean boost by velocity `v` at time `t`:
/// `psi'(x) = psi(x - v t) exp(i (m' v . x - m' v^2 t / 2) / hbar)` with
/// `m' = m / beta`. The plane-wave factor must fit the periodic box.
pub fn galilean_boost(
    psi: &ComplexField,
    v: &[f64],
    t: f64,
    c: PhysicalConstants,
    beta: f64,
) -> Result<ComplexField> {
    let g = psi.grid;
    if v.len() != g.dims() {
        return Err(Error::InvalidConfig(format!(
            "boost has {} components for a {}D grid",
            v.len(),
            g.dims()
        )));
    }
    if !(beta != 0.0 && beta.is_finite()) {
        return Err(Error::SingularMass);
    }
    let m = c.mass / beta;
    for (axis, &va) in v.iter().enumerate() {
        let cycles = m * va * g.len(axis) / c.hbar;
        let turns = cycles / std::f64::consts::TAU;
        if (turns - turns.round()).abs() > 1e-9 {
            return Err(Error::IncommensurateBoost(cycles));
        }
    }
    let mut shift = [0.0; 2];
    for (axis, &va) in v.iter().enumerate() {
        shift[axis] = va * t;
    }
    let v2: f64 = v.iter().map(|x| x * x).sum();
    let moved = spectral::translate(psi, shift);
    let mut out = moved;
    for (idx, z) in out.data.iter_mut().enumerate() {
        let p = g.point(idx);
        let vx: f64 = v.iter().enumerate().map(|(a, va)| va * p[a]).sum();
        *z *= Complex64::from_polar(1.0, (m * vx - 0.5 * m * v2 * t) / c.hbar);
    }
    Ok(out)
}

/// Outcome of comparing the vector-potential form with the Hamiltonian form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeFormReport {
    /// Largest pointwise difference of the two right-hand sides.
    pub deviation: f64,
    /// Same, relative to the largest nonlinear contribution.
    pub relative: f64,
    /// Ratio of the `b6` contribution in the vector-potential form to the
    /// `b6` contribution of the Hamiltonian, fitted by least squares; `None`
    /// when `b6 = 0` or the term vanishes on the state.
    pub b6_factor: Option<f64>,
}

/// Evaluates `i dpsi/dt` two ways in natural units:
///
/// ```text
/// -(1/2)(grad - iA)^2 psi - (1/2) A^2 psi + (c1/2)(div A) psi
///     + (1/2)[c2 Re(A . grad psi / psi) + 2 Im(A . grad psi / psi)] psi
/// ```
///
/// with `A = a grad lap S`, `a = -D1`, `c1 = 2 b1 / a`, `c2 = 2 b6 / a`,
/// against `(-lap / 2 + H_NL) psi` from the minimal-extension Hamiltonian.
/// `Re` and `Im` act on the logarithmic derivative so that the extra terms
/// multiply `psi`.
pub fn gauge_form_residual(psi: &ComplexField, p: MeParams, c: PhysicalConstants) -> Result<GaugeFormReport> {
    if !c.is_natural() {
        return Err(Error::InvalidConfig(
            "the vector-potential form is only defined in natural units".into(),
        ));
    }
    let a = -p.d1;
    if a == 0.0 {
        if p.b1 != 0.0 || p.b6 != 0.0 {
            return Err(Error::InvalidCoeffs("a = -D1 = 0 leaves c1, c2 undefined".into()));
        }
        return Ok(GaugeFormReport {
            deviation: 0.0,
            relative: 0.0,
            b6_factor: None,
        });
    }
    let (c1, c2) = (2.0 * p.b1 / a, 2.0 * p.b6 / a);
    let g = psi.grid;
    let h = hydro_decompose(psi, None)?;
    let dims = g.dims();
    let avec: Vec<RealField> = (0..dims)
        .map(|k| {
            let mut data: Vec<f64> = h.grad_lap(Scalar::Phase, k).iter().map(|v| a * v).collect();
            h.apply_mask(&mut data);
            RealField { grid: g, data }
        })
        .collect();
    let div_a = spectral::divergence(&avec);
    let spec = spectral::Spectrum::of(psi);
    let grads: Vec<ComplexField> = (0..dims)
        .map(|k| {
            let mut o = [0, 0];
            o[k] = 1;
            spec.partial(o)
        })
        .collect();
    let lap = spectral::laplacian(psi);

    let n = g.size();
    let mut gauge = vec![Complex64::new(0.0, 0.0); n];
    let mut ham = vec![Complex64::new(0.0, 0.0); n];
    let mut b6_gauge = vec![0.0; n];
    let mut b6_ham = vec![0.0; n];
    let i1 = Complex64::new(0.0, 1.0);
    let coeffs = p.to_coeffs();
    let fa = eval_functional(&coeffs.a, Variant::Ext, &h)?;
    let fb = eval_functional(&coeffs.b, Variant::Ext, &h)?;
    let p_dot_grad_lap_s = h.p_dot(&(0..dims).map(|k| h.grad_lap(Scalar::Phase, k)).collect::<Vec<_>>());
    let mut scale = 0.0f64;
    for idx in 0..n {
        if h.is_masked(idx) {
            continue;
        }
        let z = psi.data[idx];
        let a2: f64 = avec.iter().map(|v| v.data[idx].powi(2)).sum();
        let a_dot_grad: Complex64 = (0..dims).map(|k| avec[k].data[idx] * grads[k].data[idx]).sum();
        // (grad - iA)^2 psi = lap psi - i (div A) psi - 2i A . grad psi - A^2 psi
        let cov = lap.data[idx] - i1 * div_a.data[idx] * z - 2.0 * i1 * a_dot_grad - a2 * z;
        let log_d = a_dot_grad / z;
        let extra = 0.5 * c1 * div_a.data[idx] * z + 0.5 * (c2 * log_d.re + 2.0 * log_d.im) * z;
        gauge[idx] = -0.5 * cov - 0.5 * a2 * z + extra;
        b6_gauge[idx] = 0.5 * c2 * log_d.re;

        let h_nl = Complex64::new(fb.data[idx], -0.5 * fa.data[idx]);
        ham[idx] = -0.5 * lap.data[idx] + h_nl * z;
        b6_ham[idx] = p.b6 * p_dot_grad_lap_s[idx];
        scale = scale.max((h_nl * z).norm());
    }
    let deviation = gauge
        .iter()
        .zip(&ham)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let den: f64 = b6_ham.iter().map(|v| v * v).sum();
    let b6_factor = (p.b6 != 0.0 && den > 0.0)
        .then(|| b6_gauge.iter().zip(&b6_ham).map(|(x, y)| x * y).sum::<f64>() / den);
    Ok(GaugeFormReport {
        deviation,
        relative: if scale > 0.0 { deviation / scale } else { deviation },
        b6_factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{harmonic_potential, ho_energy, make_state, StateSpec};
    use std::f64::consts::TAU;

    fn nat() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn ho_ground_state_is_an_eigenvector_of_the_linear_rhs() {
        let g = Grid::new(1, 128, 20.0).unwrap();
        let psi = make_state(&StateSpec::HoEigenstate { n: 0, omega: 1.0 }, g, nat()).unwrap();
        let v = harmonic_potential(g, 1.0, nat());
        let rhs = nonlinear_rhs(&psi, Some(&v), &Model::linear(), nat()).unwrap();
        let e0 = ho_energy(0, 1.0, nat());
        for (r, z) in rhs.data.iter().zip(&psi.data) {
            assert!((r - Complex64::new(0.0, -e0) * z).norm() < 1e-8);
        }
    }

    #[test]
    fn me_annihilates_plane_waves() {
        let g = Grid::new(1, 64, TAU).unwrap();
        let psi = make_state(&StateSpec::PlaneWave { k: 4.0, ky: 0.0 }, g, nat()).unwrap();
        let nl = nonlinear_action(&psi, &Model::me(MeParams::default()), nat()).unwrap();
        assert!(nl.max_abs() < 1e-10);
    }

    #[test]
    fn free_propagator_matches_plane_wave_phase() {
        let g = Grid::new(1, 64, TAU).unwrap();
        let psi = make_state(&StateSpec::PlaneWave { k: 3.0, ky: 0.0 }, g, nat()).unwrap();
        let out = free_propagate(&psi, 0.7, nat());
        let want = psi.scale(Complex64::from_polar(1.0, -4.5 * 0.7));
        assert!(out.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn integrators_agree_on_a_linear_oscillator_run() {
        let g = Grid::new(1, 64, 24.0).unwrap();
        let psi = make_state(
            &StateSpec::Coherent {
                x0: 1.0,
                p0: 0.0,
                omega: 1.0,
            },
            g,
            nat(),
        )
        .unwrap();
        let v = harmonic_potential(g, 1.0, nat());
        let mut cfg = EvolutionConfig::new(Model::linear(), 1e-3, 0.2);
        cfg.potential = Some(v);
        cfg.observables = false;
        let a = evolve(&psi, &cfg).unwrap();
        cfg.integrator = Integrator::Rk4;
        let b = evolve(&psi, &cfg).unwrap();
        assert!(a.final_state().max_abs_diff(b.final_state()) < 1e-8);
    }

    #[test]
    fn zero_boost_is_identity() {
        let g = Grid::new(1, 64, 20.0).unwrap();
        let psi = make_state(&StateSpec::HoEigenstate { n: 1, omega: 1.0 }, g, nat()).unwrap();
        let b = galilean_boost(&psi, &[0.0], 0.3, nat(), 1.0).unwrap();
        assert!(b.max_abs_diff(&psi) < 1e-14);
    }

    #[test]
    fn boost_shifts_plane_wave_momentum() {
        let g = Grid::new(1, 64, TAU).unwrap();
        let psi = make_state(&StateSpec::PlaneWave { k: 2.0, ky: 0.0 }, g, nat()).unwrap();
        let t = 0.4;
        let b = galilean_boost(&psi, &[3.0], t, nat(), 1.0).unwrap();
        let want = ComplexField::from_fn(g, |p| {
            Complex64::from_polar(1.0, 2.0 * (p[0] - 3.0 * t) + 3.0 * p[0] - 4.5 * t)
        });
        assert!(b.max_abs_diff(&want) < 1e-12);
        assert!(matches!(
            galilean_boost(&psi, &[0.5], t, nat(), 1.0),
            Err(Error::IncommensurateBoost(_))
        ));
    }

    #[test]
    fn gauge_form_vanishing_cases() {
        // round-off in third derivatives grows like k_max^3, so keep the grid coarse
        let g = Grid::new(1, 32, TAU).unwrap();
        let pw = make_state(&StateSpec::PlaneWave { k: 2.0, ky: 0.0 }, g, nat()).unwrap();
        let r = gauge_form_residual(&pw, MeParams::new(0.2, 0.05, 0.03), nat()).unwrap();
        assert!(r.deviation < 1e-12, "{}", r.deviation);
        let r0 = gauge_form_residual(&pw, MeParams::new(0.0, 0.0, 0.0), nat()).unwrap();
        assert_eq!(r0.deviation, 0.0);
        assert!(gauge_form_residual(&pw, MeParams::new(0.0, 0.1, 0.0), nat()).is_err());
    }

    #[test]
    fn stability_bound_rejects_large_steps() {
        let g = Grid::new(1, 128, TAU).unwrap();
        let m = Model::me(MeParams::default());
        let bound = stability_bound(&g, &m, None, Integrator::IfRk4, nat());
        let cfg = EvolutionConfig::new(m, 2.0 * bound, 10.0 * bound);
        let psi = make_state(&StateSpec::PlaneWave { k: 1.0, ky: 0.0 }, g, nat()).unwrap();
        assert!(matches!(evolve(&psi, &cfg), Err(Error::InvalidConfig(_))));
    }
}
