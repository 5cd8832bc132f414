//! Reference states: plane waves, free Gaussian packets, oscillator
//! eigenstates, coherent states and seeded random fields.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, PhysicalConstants, RealField};
use crate::spectral;

/// Localized states must fall below this fraction of their peak amplitude on
/// the box rim.
pub const TAIL_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// `exp(i k x)` with unit density; `k` must be a multiple of `2 pi / L`.
    PlaneWave {
        k: f64,
        #[serde(default)]
        ky: f64,
    },
    /// Free packet at time `t` whose phase is
    /// `m t x^2 / (2 hbar (t^2 + t0^2)) - atan(t0 / t) / 2`, centered at `x0`
    /// and carrying momentum `p0`.
    GaussianPacket {
        t: f64,
        t0: f64,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        p0: f64,
    },
    /// Harmonic-oscillator eigenstate of quantum number `n`.
    HoEigenstate { n: usize, omega: f64 },
    /// Displaced oscillator ground state with momentum `p0`; its phase is
    /// linear, so `lap S = 0`.
    Coherent { x0: f64, p0: f64, omega: f64 },
    /// Gaussian envelope of width `sigma` with phase gradient
    /// `amplitude * cos(k x + phi)`.
    PhaseModulated {
        amplitude: f64,
        k: f64,
        sigma: f64,
        #[serde(default)]
        phi: f64,
        #[serde(default)]
        x0: f64,
    },
    /// Gaussian of width `sigma` times `1 + amplitude * r(x)` with `r` a
    /// seeded band-limited random field of unit peak modulus.
    PerturbedGaussian {
        sigma: f64,
        seed: u64,
        amplitude: f64,
        cutoff: usize,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        p0: f64,
    },
    /// Seeded random field with Fourier modes up to `cutoff` (default n/8),
    /// scaled to peak modulus `amplitude` and offset by `background`.
    Random {
        seed: u64,
        #[serde(default)]
        cutoff: Option<usize>,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        background: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Builds the state described by `spec`. All kinds except `plane_wave` are
/// normalized to unit norm.
pub fn make_state(spec: &StateSpec, grid: Grid, c: PhysicalConstants) -> Result<ComplexField> {
    let (hbar, m) = (c.hbar, c.mass);
    let needs_1d = !matches!(spec, StateSpec::PlaneWave { .. } | StateSpec::Random { .. });
    if needs_1d && grid.dims() != 1 {
        return Err(Error::InvalidState(
            "localized states are built on 1D grids; use a tensor product for 2D".into(),
        ));
    }
    let psi = match *spec {
        StateSpec::PlaneWave { k, ky } => {
            check_commensurate(k, grid.len(0))?;
            if grid.dims() == 2 {
                check_commensurate(ky, grid.len(1))?;
            }
            return Ok(ComplexField::from_fn(grid, |p| {
                Complex64::from_polar(1.0, k * p[0] + ky * p[1])
            }));
        }
        StateSpec::GaussianPacket { t, t0, x0, p0 } => {
            if !(t0 > 0.0) {
                return Err(Error::InvalidState(format!("packet width t0 = {t0} must be > 0")));
            }
            ComplexField::from_fn(grid, |p| {
                let x = p[0] - x0;
                let (r, s) = packet_amp_phase(x, t, t0, c);
                Complex64::from_polar(r, s + p0 * x / hbar)
            })
        }
        StateSpec::HoEigenstate { n, omega } => {
            check_positive("omega", omega)?;
            let xi_scale = (m * omega / hbar).sqrt();
            ComplexField::from_fn(grid, |p| {
                Complex64::new(hermite_function(n, xi_scale * p[0]) * xi_scale.sqrt(), 0.0)
            })
        }
        StateSpec::Coherent { x0, p0, omega } => {
            check_positive("omega", omega)?;
            let xi_scale = (m * omega / hbar).sqrt();
            ComplexField::from_fn(grid, |p| {
                let r = hermite_function(0, xi_scale * (p[0] - x0)) * xi_scale.sqrt();
                Complex64::from_polar(r, p0 * p[0] / hbar)
            })
        }
        StateSpec::PhaseModulated {
            amplitude,
            k,
            sigma,
            phi,
            x0,
        } => {
            check_positive("sigma", sigma)?;
            check_positive("k", k)?;
            ComplexField::from_fn(grid, |p| {
                let x = p[0] - x0;
                let r = (-x * x / (2.0 * sigma * sigma)).exp();
                Complex64::from_polar(r, amplitude / k * (k * p[0] + phi).sin())
            })
        }
        StateSpec::PerturbedGaussian {
            sigma,
            seed,
            amplitude,
            cutoff,
            x0,
            p0,
        } => {
            check_positive("sigma", sigma)?;
            let noise = random_field(grid, seed, cutoff)?;
            let mut psi = ComplexField::from_fn(grid, |p| {
                let x = p[0] - x0;
                Complex64::from_polar((-x * x / (2.0 * sigma * sigma)).exp(), p0 * p[0] / hbar)
            });
            for (z, r) in psi.data.iter_mut().zip(&noise.data) {
                *z *= 1.0 + amplitude * r;
            }
            psi
        }
        StateSpec::Random {
            seed,
            cutoff,
            amplitude,
            background,
        } => {
            let cutoff = cutoff.unwrap_or(grid.n(0) / 8);
            let mut f = random_field(grid, seed, cutoff)?;
            for z in f.data.iter_mut() {
                *z = *z * amplitude + background;
            }
            return normalize(f);
        }
    };
    check_tails(&psi)?;
    normalize(psi)
}

/// Amplitude (unnormalized) and phase of the free packet at `x` relative to
/// its center.
pub fn packet_amp_phase(x: f64, t: f64, t0: f64, c: PhysicalConstants) -> (f64, f64) {
    let (hbar, m) = (c.hbar, c.mass);
    let denom = t * t + t0 * t0;
    let r = (-x * x * m * t0 / (2.0 * hbar * denom)).exp();
    let gouy = if t == 0.0 { PI / 2.0 } else { (t0 / t).atan() };
    let s = m * t * x * x / (2.0 * hbar * denom) - 0.5 * gouy;
    (r, s)
}

/// Normalized Hermite function `psi_n(xi)` of the dimensionless coordinate.
pub fn hermite_function(n: usize, xi: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    for k in 0..n {
        let next = (2.0 / (k + 1) as f64).sqrt() * xi * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `V = m omega^2 |x|^2 / 2`.
pub fn harmonic_potential(grid: Grid, omega: f64, c: PhysicalConstants) -> RealField {
    RealField::from_fn(grid, |p| 0.5 * c.mass * omega * omega * (p[0] * p[0] + p[1] * p[1]))
}

/// Oscillator eigenvalue `hbar omega (n + 1/2)`.
pub fn ho_energy(n: usize, omega: f64, c: PhysicalConstants) -> f64 {
    c.hbar * omega * (n as f64 + 0.5)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidState(format!("{name} = {v} must be positive")))
    }
}

fn check_commensurate(k: f64, len: f64) -> Result<()> {
    let m = k * len / TAU;
    if (m - m.round()).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "k = {k} is not a multiple of 2 pi / L (k L / 2 pi = {m})"
        )));
    }
    Ok(())
}

/// Checks that a localized state has decayed on the box rim.
pub fn check_tails(psi: &ComplexField) -> Result<()> {
    let peak = psi.max_abs();
    let rim = psi
        .grid
        .rim_indices()
        .into_iter()
        .map(|i| psi.data[i].norm())
        .fold(0.0, f64::max);
    let rel = if peak > 0.0 { rim / peak } else { 0.0 };
    if rel > TAIL_TOLERANCE {
        return Err(Error::TailsNotDecayed(rel));
    }
    Ok(())
}

fn normalize(mut psi: ComplexField) -> Result<ComplexField> {
    let norm = psi.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidState("state has zero or non-finite norm".into()));
    }
    let s = norm.sqrt().recip();
    for z in psi.data.iter_mut() {
        *z *= s;
    }
    Ok(psi)
}

/// Band-limited complex random field with peak modulus one.
pub fn random_field(grid: Grid, seed: u64, cutoff: usize) -> Result<ComplexField> {
    if cutoff == 0 || cutoff >= grid.n(0) / 2 {
        return Err(Error::InvalidState(format!(
            "random cutoff {cutoff} must lie in 1..n/2"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.size()];
    for (idx, z) in coeffs.iter_mut().enumerate() {
        let [i, j] = grid.unflatten(idx);
        let mi = signed_mode(i, grid.n(0));
        let mj = if grid.dims() == 2 { signed_mode(j, grid.n(1)) } else { 0 };
        // draw for every bin so the stream does not depend on the cutoff
        let re: f64 = rng.random_range(-1.0..1.0);
        let im: f64 = rng.random_range(-1.0..1.0);
        if mi.unsigned_abs() as usize <= cutoff && mj.unsigned_abs() as usize <= cutoff {
            *z = Complex64::new(re, im);
        }
    }
    spectral::inverse(&grid, &mut coeffs);
    let field = ComplexField { grid, data: coeffs };
    let peak = field.max_abs();
    Ok(field.scale(Complex64::new(1.0 / peak, 0.0)))
}

fn signed_mode(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro::hydro_decompose;

    fn nat() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn plane_wave_density_and_momentum() {
        let g = Grid::new(1, 64, 10.0).unwrap();
        let k = TAU / 10.0 * 3.0;
        let psi = make_state(&StateSpec::PlaneWave { k, ky: 0.0 }, g, nat()).unwrap();
        assert!(psi.data.iter().all(|z| (z.norm_sqr() - 1.0).abs() < 1e-14));
        let d = spectral::derivative(&psi, 1, 0).unwrap();
        let p: Complex64 = psi
            .data
            .iter()
            .zip(&d.data)
            .map(|(z, dz)| z.conj() * dz * Complex64::new(0.0, -1.0))
            .sum::<Complex64>()
            * g.dv()
            / psi.norm();
        assert!((p.re - k).abs() < 1e-12);
        assert!(make_state(&StateSpec::PlaneWave { k: 1.0, ky: 0.0 }, g, nat()).is_err());
    }

    #[test]
    fn packet_at_t0_has_constant_phase() {
        let g = Grid::new(1, 256, 40.0).unwrap();
        let psi = make_state(
            &StateSpec::GaussianPacket {
                t: 0.0,
                t0: 1.0,
                x0: 0.0,
                p0: 0.0,
            },
            g,
            nat(),
        )
        .unwrap();
        for z in &psi.data {
            if z.norm() > 1e-8 {
                assert!((z.arg() + PI / 4.0).abs() < 1e-12);
            }
        }
        assert!((psi.norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn packet_phase_gradient() {
        let g = Grid::new(1, 256, 60.0).unwrap();
        let (t, t0) = (0.7, 1.3);
        let psi = make_state(&StateSpec::GaussianPacket { t, t0, x0: 0.0, p0: 0.0 }, g, nat()).unwrap();
        let h = hydro_decompose(&psi, None).unwrap();
        for i in 0..g.size() {
            let x = g.coord(0, i);
            if x.abs() < 4.0 {
                let exact = t * x / (t * t + t0 * t0);
                assert!((h.grad_s[0].data[i] - exact).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn small_box_rejected() {
        let g = Grid::new(1, 64, 6.0).unwrap();
        let r = make_state(&StateSpec::GaussianPacket { t: 0.0, t0: 1.0, x0: 0.0, p0: 0.0 }, g, nat());
        assert!(matches!(r, Err(Error::TailsNotDecayed(_))));
        let r = make_state(&StateSpec::GaussianPacket { t: 0.0, t0: 0.0, x0: 0.0, p0: 0.0 }, g, nat());
        assert!(matches!(r, Err(Error::InvalidState(_))));
    }

    #[test]
    fn random_is_deterministic() {
        let g = Grid::new(1, 128, 10.0).unwrap();
        let spec = StateSpec::Random {
            seed: 7,
            cutoff: Some(16),
            amplitude: 1.0,
            background: 0.0,
        };
        let a = make_state(&spec, g, nat()).unwrap();
        let b = make_state(&spec, g, nat()).unwrap();
        assert_eq!(a, b);
        let other = make_state(
            &StateSpec::Random {
                seed: 8,
                cutoff: Some(16),
                amplitude: 1.0,
                background: 0.0,
            },
            g,
            nat(),
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn oscillator_states_are_orthonormal() {
        let g = Grid::new(1, 128, 24.0).unwrap();
        let states: Vec<_> = (0..4)
            .map(|n| make_state(&StateSpec::HoEigenstate { n, omega: 1.0 }, g, nat()).unwrap())
            .collect();
        for a in 0..4 {
            for b in 0..4 {
                let ip: Complex64 = states[a]
                    .data
                    .iter()
                    .zip(&states[b].data)
                    .map(|(x, y)| x.conj() * y)
                    .sum::<Complex64>()
                    * g.dv();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip.re - want).abs() < 1e-12);
            }
        }
    }
}
