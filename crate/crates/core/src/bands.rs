//! Stationary states of the minimal extension: the harmonic phase mode,
//! its reduction of the density equation to a Hill equation, and Floquet
//! analysis of `y'' + Q(z) y = 0`.
//!
//! With `V = 0`, `hbar dS/dt = -E`, `b6 = 0` and `S' = A cos(sqrt(w) x)`,
//! the amplitude `y = sqrt(rho)` in the scaled coordinate `z = sqrt(w) x`
//! obeys a Hill equation with
//!
//! ```text
//! Q(z) = (2mE/hbar^2 - A^2/2) / w  -  A^2/(2w) cos 2z  -  (m b1 A sqrt(w) / hbar) sin z
//! ```
//!
//! Harmonics are stored as `2 q_k cos(k z + phi_k)`, so the `cos 2z` term has
//! `q_2 = -A^2/(4w)` and the `sin z` term has `q_1 = -m b1 A sqrt(w)/(2 hbar)`,
//! `phi_1 = -pi/2`. For `b1 = 0` this is Mathieu's equation
//! `y'' + (a - 2q cos 2z) y = 0` with `a = q_0`, `q = A^2/(4w)`.
//!
//! The spectral parameter of a Floquet chart replaces `q_0`.

use std::f64::consts::{PI, TAU};

use nalgebra::SMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::MeParams;
use crate::grid::{Grid, PhysicalConstants, RealField};
use crate::spectral::{self, Spectrum};

/// `S'(x) = A cos(sqrt(w) x + phi) + C` with `w = hbar / (D1 m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseMode {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub drift: f64,
}

impl PhaseMode {
    pub fn new(me: MeParams, c: PhysicalConstants, amplitude: f64, phase: f64) -> Result<Self> {
        let omega = require_positive_d1(me, c)?;
        Ok(Self {
            amplitude,
            omega,
            phase,
            drift: 0.0,
        })
    }

    pub fn with_drift(mut self, drift: f64) -> Self {
        self.drift = drift;
        self
    }

    pub fn wavenumber(&self) -> f64 {
        self.omega.sqrt()
    }

    pub fn period(&self) -> f64 {
        TAU / self.wavenumber()
    }

    pub fn grad_s_at(&self, x: f64) -> f64 {
        self.amplitude * (self.wavenumber() * x + self.phase).cos() + self.drift
    }

    /// Samples `S'` on a 1D grid whose length holds a whole number of periods.
    pub fn grad_s(&self, grid: Grid) -> Result<RealField> {
        if grid.dims() != 1 {
            return Err(Error::GridMismatch("phase mode needs a 1D grid".into()));
        }
        let periods = grid.len(0) / self.period();
        if (periods - periods.round()).abs() > 1e-9 * periods.max(1.0) || periods.round() < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "box length {} is not a multiple of the mode period {}",
                grid.len(0),
                self.period()
            )));
        }
        Ok(RealField::from_fn(grid, |p| self.grad_s_at(p[0])))
    }

    /// Period of the sampled mode measured from up-crossings of `S' - C`
    /// on the trigonometric interpolant.
    pub fn measured_period(&self, grid: Grid) -> Result<f64> {
        let mut f = self.grad_s(grid)?;
        for v in &mut f.data {
            *v -= self.drift;
        }
        let spec = Spectrum::of_real(&f);
        let eval = |x: f64| spectral::interpolate_1d(&spec, x);
        let xs = grid.axis_coords(0);
        let n = xs.len();
        let mut crossings = Vec::new();
        for i in 0..n {
            let (a, b) = (xs[i], if i + 1 < n { xs[i + 1] } else { xs[0] + grid.len(0) });
            let (fa, fb) = (f.data[i], f.data[(i + 1) % n]);
            if fa < 0.0 && fb >= 0.0 {
                crossings.push(bisect(eval, a, b, fa, 1e-15));
            }
        }
        if crossings.len() < 2 {
            return Err(Error::InvalidState("fewer than two up-crossings on the grid".into()));
        }
        Ok((crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
    }
}

fn require_positive_d1(me: MeParams, c: PhysicalConstants) -> Result<f64> {
    if !(me.d1 > 0.0) {
        return Err(Error::InvalidHill(format!("D1 must be positive, got {}", me.d1)));
    }
    Ok(me.omega(c).expect("d1 > 0"))
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64, tol: f64) -> f64 {
    let sa = fa.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= tol * m.abs().max(1.0) {
            break;
        }
        if f(m).signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `max |div[rho (grad lap S + w grad S)]|` for a phase profile given by its
/// gradient. Zero for the phase mode with `C = 0`, whatever `rho` is.
pub fn stationary_flux_residual(
    rho: &RealField,
    grad_s: &[RealField],
    me: MeParams,
    c: PhysicalConstants,
) -> Result<f64> {
    let omega = require_positive_d1(me, c)?;
    if grad_s.len() != rho.grid.dims() || grad_s.iter().any(|g| !g.grid.same_shape(&rho.grid)) {
        return Err(Error::GridMismatch("rho and grad S must share a grid".into()));
    }
    let flux: Vec<RealField> = grad_s
        .iter()
        .map(|g| {
            let mut lap = vec![0.0; g.data.len()];
            for axis in 0..g.grid.dims() {
                let d2 = spectral::derivative_real(g, 2, axis)?;
                for (l, v) in lap.iter_mut().zip(&d2.data) {
                    *l += v;
                }
            }
            let data = lap
                .iter()
                .zip(&g.data)
                .zip(&rho.data)
                .map(|((l, s), r)| r * (l + omega * s))
                .collect();
            Ok(RealField { grid: g.grid, data })
        })
        .collect::<Result<_>>()?;
    Ok(spectral::divergence(&flux).max_abs())
}

/// One term `2 q cos(k z + phase)` of a Hill potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Harmonic {
    pub k: u32,
    pub q: f64,
    pub phase: f64,
}

/// Where a Hill equation came from when built from a stationary state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HillProvenance {
    pub amplitude: f64,
    pub energy: f64,
    pub params: MeParams,
    pub omega: f64,
    pub constants: (f64, f64),
}

/// `y'' + Q(z) y = 0` with `Q(z) = q0 + sum_k 2 q_k cos(k z + phi_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HillEquation {
    pub period: f64,
    pub q0: f64,
    pub harmonics: Vec<Harmonic>,
    pub provenance: Option<HillProvenance>,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl HillEquation {
    /// Zero coefficients are dropped. The period is `2 pi / gcd(k)`, or `pi`
    /// without harmonics so that constant potentials share Mathieu's period.
    pub fn new(q0: f64, harmonics: Vec<Harmonic>) -> Result<Self> {
        if !q0.is_finite() {
            return Err(Error::InvalidHill("q0 is not finite".into()));
        }
        let mut kept = Vec::new();
        for h in harmonics {
            if h.k == 0 || !h.q.is_finite() || !h.phase.is_finite() {
                return Err(Error::InvalidHill(format!("bad harmonic {h:?}")));
            }
            if h.q != 0.0 {
                kept.push(h);
            }
        }
        kept.sort_by_key(|h| h.k);
        let g = kept.iter().fold(0, |g, h| gcd(g, h.k));
        let period = if g == 0 { PI } else { TAU / g as f64 };
        Ok(Self {
            period,
            q0,
            harmonics: kept,
            provenance: None,
        })
    }

    /// `y'' + (a - 2q cos 2z) y = 0`.
    pub fn mathieu(a: f64, q: f64) -> Result<Self> {
        Self::new(
            a,
            vec![Harmonic {
                k: 2,
                q: -q,
                phase: 0.0,
            }],
        )
    }

    pub fn constant(a: f64) -> Result<Self> {
        Self::new(a, Vec::new())
    }

    /// `Q(z)` with the constant part replaced by `lambda`.
    pub fn q_at(&self, z: f64, lambda: f64) -> f64 {
        self.harmonics
            .iter()
            .fold(lambda, |acc, h| acc + 2.0 * h.q * (h.k as f64 * z + h.phase).cos())
    }

    /// Bound on `|Q - lambda|`.
    pub fn modulation_bound(&self) -> f64 {
        self.harmonics.iter().map(|h| 2.0 * h.q.abs()).sum()
    }

    /// True iff the only harmonic is a `k = 2` cosine.
    pub fn is_mathieu(&self) -> bool {
        match self.harmonics.as_slice() {
            [] => true,
            [h] => h.k == 2 && (h.phase / PI - (h.phase / PI).round()).abs() < 1e-15,
            _ => false,
        }
    }

    /// `(a, q)` in Mathieu's convention when [`Self::is_mathieu`] holds.
    pub fn mathieu_params(&self) -> Option<(f64, f64)> {
        if !self.is_mathieu() {
            return None;
        }
        let q = self
            .harmonics
            .first()
            .map_or(0.0, |h| -h.q * (h.phase).cos().signum());
        Some((self.q0, q))
    }

    /// Energy of the stationary state whose Hill constant part is `lambda`.
    pub fn energy_for(&self, lambda: f64) -> Option<f64> {
        self.provenance.map(|p| {
            let (hbar, m) = p.constants;
            hbar * hbar / (2.0 * m) * (p.omega * lambda + 0.5 * p.amplitude * p.amplitude)
        })
    }
}

/// Hill equation of the density amplitude for the phase mode of amplitude
/// `amplitude` at energy `energy` (`V = 0`, `b6 = 0`).
pub fn hill_from_stationary(
    me: MeParams,
    amplitude: f64,
    energy: f64,
    c: PhysicalConstants,
) -> Result<HillEquation> {
    let omega = require_positive_d1(me, c)?;
    if me.b6 != 0.0 {
        return Err(Error::InvalidHill(format!("b6 must vanish, got {}", me.b6)));
    }
    let (hbar, m) = (c.hbar, c.mass);
    let a2 = amplitude * amplitude;
    let q0 = (2.0 * m * energy / (hbar * hbar) - 0.5 * a2) / omega;
    let harmonics = vec![
        Harmonic {
            k: 1,
            q: -m * me.b1 * amplitude * omega.sqrt() / (2.0 * hbar),
            phase: -0.5 * PI,
        },
        Harmonic {
            k: 2,
            q: -a2 / (4.0 * omega),
            phase: 0.0,
        },
    ];
    let mut hill = HillEquation::new(q0, harmonics)?;
    hill.provenance = Some(HillProvenance {
        amplitude,
        energy,
        params: me,
        omega,
        constants: (hbar, m),
    });
    Ok(hill)
}

/// Integration controls for the monodromy computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetOptions {
    /// Accept when doubling the step count changes `M` by at most
    /// `tol * max(1, |M|)`.
    pub tol: f64,
    pub max_steps: usize,
    /// Skip the doubling loop and use exactly this many steps.
    pub fixed_steps: Option<usize>,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_steps: 1 << 17,
            fixed_steps: None,
        }
    }
}

/// Monodromy data at one value of the spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FloquetResult {
    pub lambda: f64,
    pub trace: f64,
    /// `d tr(M) / d lambda` from the variational equations.
    pub trace_derivative: f64,
    pub det: f64,
    pub stable: bool,
    pub nu_real: f64,
    pub nu_imag: f64,
    pub steps: usize,
    /// Last step-doubling difference (zero for fixed steps).
    pub error_estimate: f64,
    pub monodromy: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    /// `tr M = 2`.
    Periodic,
    /// `tr M = -2`.
    Antiperiodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandEdge {
    pub lambda: f64,
    pub kind: EdgeKind,
    /// Touching rather than crossing `|tr M| = 2` (a closed gap).
    pub tangent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloquetChart {
    pub samples: Vec<FloquetResult>,
    pub edges: Vec<BandEdge>,
    pub tolerance: f64,
}

const EDGE_TOL: f64 = 1e-12;
const TANGENT_TOL: f64 = 1e-9;
// gaps narrower than this around a touching extremum are reported closed
const MERGE_RADIUS: f64 = 1e-4;

// Three-stage Gauss-Legendre: order 6, symplectic, so det M = 1 holds to
// round-off.
struct Gauss3 {
    c: [f64; 3],
    a: [[f64; 3]; 3],
    b: [f64; 3],
}

fn gauss3() -> Gauss3 {
    let s = 15f64.sqrt();
    Gauss3 {
        c: [0.5 - s / 10.0, 0.5, 0.5 + s / 10.0],
        a: [
            [5.0 / 36.0, 2.0 / 9.0 - s / 15.0, 5.0 / 36.0 - s / 30.0],
            [5.0 / 36.0 + s / 24.0, 2.0 / 9.0, 5.0 / 36.0 - s / 24.0],
            [5.0 / 36.0 + s / 30.0, 2.0 / 9.0 + s / 15.0, 5.0 / 36.0],
        ],
        b: [5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0],
    }
}

type State = SMatrix<f64, 4, 2>;

// u = (y, y', w, w') with w = dy/dlambda: y'' = -Q y, w'' = -Q w - y.
fn system(q: f64) -> SMatrix<f64, 4, 4> {
    SMatrix::<f64, 4, 4>::new(
        0.0, 1.0, 0.0, 0.0, //
        -q, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        -1.0, 0.0, -q, 0.0,
    )
}

struct Sweep {
    m: [[f64; 2]; 2],
    dm: [[f64; 2]; 2],
    // (y1, y1', y2, y2') at every step point
    path: Vec<[f64; 4]>,
}

fn sweep(hill: &HillEquation, lambda: f64, steps: usize) -> Result<Sweep> {
    let gl = gauss3();
    let h = hill.period / steps as f64;
    let mut u = State::zeros();
    u[(0, 0)] = 1.0;
    u[(1, 1)] = 1.0;
    let mut path = Vec::with_capacity(steps + 1);
    path.push([1.0, 0.0, 0.0, 1.0]);
    for n in 0..steps {
        let z = n as f64 * h;
        let bs: [SMatrix<f64, 4, 4>; 3] =
            std::array::from_fn(|i| system(hill.q_at(z + gl.c[i] * h, lambda)));
        let mut lhs = SMatrix::<f64, 12, 12>::identity();
        let mut rhs = SMatrix::<f64, 12, 2>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let blk = -h * gl.a[i][j] * bs[i];
                let mut view = lhs.fixed_view_mut::<4, 4>(4 * i, 4 * j);
                view += blk;
            }
            rhs.fixed_view_mut::<4, 2>(4 * i, 0).copy_from(&(bs[i] * u));
        }
        let k = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidHill("singular stage system".into()))?;
        for i in 0..3 {
            u += h * gl.b[i] * k.fixed_view::<4, 2>(4 * i, 0);
        }
        path.push([u[(0, 0)], u[(1, 0)], u[(0, 1)], u[(1, 1)]]);
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("monodromy integration"));
    }
    Ok(Sweep {
        m: [[u[(0, 0)], u[(0, 1)]], [u[(1, 0)], u[(1, 1)]]],
        dm: [[u[(2, 0)], u[(2, 1)]], [u[(3, 0)], u[(3, 1)]]],
        path,
    })
}

fn initial_steps(hill: &HillEquation, lambda: f64) -> usize {
    let qmax = lambda.abs() + hill.modulation_bound();
    64usize.max((4.0 * hill.period * (qmax + 1.0).sqrt()).ceil() as usize)
}

fn mat_norm(m: &[[f64; 2]; 2]) -> f64 {
    m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn converged_sweep(hill: &HillEquation, lambda: f64, opts: &FloquetOptions) -> Result<(Sweep, usize, f64)> {
    if let Some(n) = opts.fixed_steps {
        return Ok((sweep(hill, lambda, n.max(1))?, n.max(1), 0.0));
    }
    let mut n = initial_steps(hill, lambda);
    let mut prev = sweep(hill, lambda, n)?;
    loop {
        let next_n = 2 * n;
        if next_n > opts.max_steps {
            let cur = sweep(hill, lambda, n)?;
            let err = diff_norm(&cur.m, &prev.m);
            return Err(Error::OdeTolerance { steps: n, err });
        }
        let cur = sweep(hill, lambda, next_n)?;
        let err = diff_norm(&cur.m, &prev.m);
        if err <= opts.tol * mat_norm(&cur.m).max(1.0) {
            return Ok((cur, next_n, err));
        }
        prev = cur;
        n = next_n;
    }
}

fn diff_norm(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            d = d.max((a[i][j] - b[i][j]).abs());
        }
    }
    d
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

// Characteristic exponent from the winding of a Floquet solution over one
// period: arg of the complex eigen-solution when stable, scaled Pruefer angle
// of the real eigen-solution otherwise.
fn exponent(hill: &HillEquation, lambda: f64, sw: &Sweep) -> (f64, f64) {
    let m = sw.m;
    let tr = m[0][0] + m[1][1];
    let t = hill.period;
    let disc = 1.0 - 0.25 * tr * tr;
    if disc >= 0.0 {
        let theta = (0.5 * tr).clamp(-1.0, 1.0).acos();
        let (vr, vi) = if disc > 1e-12 {
            let (lr, li) = (0.5 * tr, disc.sqrt());
            if m[0][1].abs() >= m[1][0].abs() {
                ([m[0][1], lr - m[0][0]], [0.0, li])
            } else {
                ([lr - m[1][1], m[1][0]], [li, 0.0])
            }
        } else {
            ([1.0, 0.0], [0.0, 1.0])
        };
        // phi = v1 y1 + v2 y2, W = Im(conj(phi) phi') fixes the winding sense
        let w = vr[0] * vi[1] - vi[0] * vr[1];
        let phi = |p: &[f64; 4]| (vr[0] * p[0] + vr[1] * p[2], vi[0] * p[0] + vi[1] * p[2]);
        let mut total = 0.0;
        let mut last = phi(&sw.path[0]);
        for p in &sw.path[1..] {
            let cur = phi(p);
            let mut d = wrap(cur.1.atan2(cur.0) - last.1.atan2(last.0));
            if w > 0.0 && d < 0.0 {
                d += TAU;
            } else if w < 0.0 && d > 0.0 {
                d -= TAU;
            }
            total += d;
            last = cur;
        }
        let wind = total.abs();
        let j = (wind / TAU).round();
        let snapped = [
            TAU * j + theta,
            TAU * j - theta,
            TAU * (j + 1.0) - theta,
            TAU * (j - 1.0) + theta,
        ]
        .into_iter()
        .filter(|v| *v >= 0.0)
        .min_by(|a, b| (a - wind).abs().total_cmp(&(b - wind).abs()))
        .unwrap_or(theta);
        (snapped / t, 0.0)
    } else {
        let mu = 0.5 * tr + tr.signum() * (-disc).sqrt();
        let v = if m[0][1].abs() >= m[1][0].abs() {
            [m[0][1], mu - m[0][0]]
        } else {
            [mu - m[1][1], m[1][0]]
        };
        let s = (lambda.abs() + hill.modulation_bound()).max(1.0).sqrt();
        let angle = |p: &[f64; 4]| {
            let y = v[0] * p[0] + v[1] * p[2];
            let dy = v[0] * p[1] + v[1] * p[3];
            (s * y).atan2(dy)
        };
        let mut total = 0.0;
        let mut last = angle(&sw.path[0]);
        for p in &sw.path[1..] {
            let cur = angle(p);
            total += wrap(cur - last);
            last = cur;
        }
        let k = (total.abs() / PI).round();
        (k * PI / t, (0.5 * tr.abs()).acosh() / t)
    }
}

/// Monodromy, discriminant and characteristic exponent at one value of the
/// spectral parameter.
pub fn floquet_at(hill: &HillEquation, lambda: f64, opts: &FloquetOptions) -> Result<FloquetResult> {
    if !lambda.is_finite() {
        return Err(Error::InvalidHill("spectral parameter is not finite".into()));
    }
    let (sw, steps, err) = converged_sweep(hill, lambda, opts)?;
    let (nu_real, nu_imag) = exponent(hill, lambda, &sw);
    let m = sw.m;
    let trace = m[0][0] + m[1][1];
    Ok(FloquetResult {
        lambda,
        trace,
        trace_derivative: sw.dm[0][0] + sw.dm[1][1],
        det: m[0][0] * m[1][1] - m[0][1] * m[1][0],
        stable: trace.abs() <= 2.0,
        nu_real,
        nu_imag,
        steps,
        error_estimate: err,
        monodromy: m,
    })
}

fn trace_fixed(hill: &HillEquation, lambda: f64, steps: usize) -> Result<(f64, f64)> {
    let sw = sweep(hill, lambda, steps)?;
    Ok((sw.m[0][0] + sw.m[1][1], sw.dm[0][0] + sw.dm[1][1]))
}

/// Samples the discriminant on `samples` evenly spaced values of the spectral
/// parameter in `range` and locates the band edges between them.
pub fn floquet_analyze(
    hill: &HillEquation,
    range: (f64, f64),
    samples: usize,
    opts: &FloquetOptions,
) -> Result<FloquetChart> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidHill(format!("bad range [{lo}, {hi}]")));
    }
    if samples < 2 {
        return Err(Error::InvalidHill("need at least two samples".into()));
    }
    let lambdas: Vec<f64> = (0..samples)
        .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
        .collect();
    let results = par_map(&lambdas, |&l| floquet_at(hill, l, opts))?;
    let edges = locate_edges(hill, &results)?;
    Ok(FloquetChart {
        samples: results,
        edges,
        tolerance: opts.tol,
    })
}

// Order-preserving parallel map over contiguous chunks.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len()).max(1);
    let chunk = items.len().div_ceil(threads);
    let parts: Vec<Result<Vec<R>>> = std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| {
                let f = &f;
                s.spawn(move || c.iter().map(f).collect::<Result<Vec<R>>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[derive(Clone, Copy)]
struct Node {
    lambda: f64,
    trace: f64,
    extremum: bool,
}

fn locate_edges(hill: &HillEquation, results: &[FloquetResult]) -> Result<Vec<BandEdge>> {
    // Split each sample interval at the extrema of tr(M) so every piece is
    // monotone, then bisect |tr M| = 2 on each piece.
    let mut nodes = Vec::new();
    for (i, r) in results.iter().enumerate() {
        nodes.push(Node {
            lambda: r.lambda,
            trace: r.trace,
            extremum: r.trace_derivative == 0.0,
        });
        let Some(next) = results.get(i + 1) else { break };
        let steps = r.steps.max(next.steps);
        let (da, db) = (r.trace_derivative, next.trace_derivative);
        if da * db < 0.0 {
            let (mut a, mut b) = (r.lambda, next.lambda);
            let mut best = (0.5 * (a + b), r.trace);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let (t, d) = trace_fixed(hill, m, steps)?;
                best = (m, t);
                if b - a <= EDGE_TOL * m.abs().max(1.0) || d == 0.0 {
                    break;
                }
                if d.signum() == da.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            nodes.push(Node {
                lambda: best.0,
                trace: best.1,
                extremum: true,
            });
        }
    }

    let mut edges = Vec::new();
    let tangent_at = |n: &Node| n.extremum && (n.trace.abs() - 2.0).abs() <= TANGENT_TOL;
    for n in &nodes {
        if tangent_at(n) {
            edges.push(BandEdge {
                lambda: n.lambda,
                kind: kind_of(n.trace.signum() * 2.0),
                tangent: true,
            });
        }
    }
    for w in nodes.windows(2) {
        let (p, q) = (w[0], w[1]);
        let steps = results
            .iter()
            .filter(|r| r.lambda >= p.lambda - 1e-300 && r.lambda <= q.lambda + 1e-300)
            .map(|r| r.steps)
            .chain(nearest_steps(results, p.lambda))
            .max()
            .unwrap_or(64);
        for target in [2.0, -2.0] {
            let (fa, fb) = (p.trace - target, q.trace - target);
            if fa == 0.0 && !p.extremum {
                push_unique(&mut edges, p.lambda, target);
            }
            if fa * fb < 0.0 {
                let (mut a, mut b) = (p.lambda, q.lambda);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if b - a <= EDGE_TOL * m.abs().max(1.0) {
                        break;
                    }
                    let (t, _) = trace_fixed(hill, m, steps)?;
                    if (t - target).signum() == fa.signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                push_unique(&mut edges, 0.5 * (a + b), target);
            }
        }
    }
    if let Some(last) = nodes.last() {
        for target in [2.0, -2.0] {
            if last.trace == target && !last.extremum {
                push_unique(&mut edges, last.lambda, target);
            }
        }
    }
    // a touching extremum that overshoots by round-off also produces a pair
    // of crossings right next to it; they belong to the tangent edge
    let tangents: Vec<BandEdge> = edges.iter().filter(|e| e.tangent).copied().collect();
    edges.retain(|e| {
        e.tangent
            || !tangents
                .iter()
                .any(|t| t.kind == e.kind && (t.lambda - e.lambda).abs() <= MERGE_RADIUS * t.lambda.abs().max(1.0))
    });
    edges.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(edges)
}

fn nearest_steps(results: &[FloquetResult], lambda: f64) -> Option<usize> {
    results
        .iter()
        .min_by(|a, b| (a.lambda - lambda).abs().total_cmp(&(b.lambda - lambda).abs()))
        .map(|r| r.steps)
}

fn kind_of(target: f64) -> EdgeKind {
    if target > 0.0 {
        EdgeKind::Periodic
    } else {
        EdgeKind::Antiperiodic
    }
}

fn push_unique(edges: &mut Vec<BandEdge>, lambda: f64, target: f64) {
    let kind = kind_of(target);
    if !edges
        .iter()
        .any(|e| e.kind == kind && (e.lambda - lambda).abs() <= 10.0 * EDGE_TOL * lambda.abs().max(1.0))
    {
        edges.push(BandEdge {
            lambda,
            kind,
            tangent: false,
        });
    }
}

/// Real Floquet solution (eigenvalue of `M` with `|mu| >= 1`, or `+-1` at a
/// band edge) sampled at `z_j = j T / points`, scaled to unit maximum.
/// Errors inside a band, where no real Floquet solution exists.
pub fn floquet_solution(
    hill: &HillEquation,
    lambda: f64,
    points: usize,
    opts: &FloquetOptions,
) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::InvalidHill("need at least one sample point".into()));
    }
    let (_, steps, _) = converged_sweep(hill, lambda, opts)?;
    let per = steps.div_ceil(points).max(1);
    let sw = sweep(hill, lambda, per * points)?;
    let m = sw.m;
    let tr = m[0][0] + m[1][1];
    let disc = 0.25 * tr * tr - 1.0;
    if disc < -1e-8 {
        return Err(Error::InvalidHill(format!(
            "tr M = {tr} lies inside a band; no real Floquet solution"
        )));
    }
    let mu = 0.5 * tr + tr.signum() * disc.max(0.0).sqrt();
    let cand1 = [m[0][1], mu - m[0][0]];
    let cand2 = [mu - m[1][1], m[1][0]];
    let n1 = cand1[0].hypot(cand1[1]);
    let n2 = cand2[0].hypot(cand2[1]);
    let v = if n1.max(n2) < 1e-10 {
        // M = +-I: both solutions are Floquet solutions, take the even one
        [1.0, 0.0]
    } else if n1 >= n2 {
        cand1
    } else {
        cand2
    };
    let y: Vec<f64> = (0..points)
        .map(|j| {
            let p = sw.path[j * per];
            v[0] * p[0] + v[1] * p[2]
        })
        .collect();
    let scale = y.iter().fold(0.0f64, |a, v| if v.abs() > a.abs() { *v } else { a });
    Ok(y.into_iter().map(|v| v / scale).collect())
}

/// Floquet chart of Mathieu's equation over `a` at fixed `q`.
pub fn mathieu_chart(q: f64, range: (f64, f64), samples: usize) -> Result<FloquetChart> {
    floquet_analyze(&HillEquation::mathieu(0.0, q)?, range, samples, &FloquetOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn natural() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn constant_potential_exponent_is_sqrt_a() {
        let opts = FloquetOptions::default();
        for a in [0.3, 1.7, 5.0, 12.25] {
            let r = floquet_at(&HillEquation::constant(a).unwrap(), a, &opts).unwrap();
            assert!(r.stable);
            assert!((r.nu_real - a.sqrt()).abs() < 1e-10, "a={a}: {}", r.nu_real);
            assert!((r.trace - 2.0 * (a.sqrt() * PI).cos()).abs() < 1e-11);
        }
        let r = floquet_at(&HillEquation::constant(-2.0).unwrap(), -2.0, &opts).unwrap();
        assert!(!r.stable);
        assert!((r.nu_imag - 2f64.sqrt()).abs() < 1e-10);
        assert_eq!(r.nu_real, 0.0);
    }

    #[test]
    fn unmodulated_edges_at_squares() {
        let chart = mathieu_chart(0.0, (-0.5, 9.5), 41).unwrap();
        let got: Vec<f64> = chart.edges.iter().map(|e| e.lambda).collect();
        assert_eq!(got.len(), 4, "{:?}", chart.edges);
        for (n, e) in got.iter().enumerate() {
            assert!((e - (n * n) as f64).abs() < 1e-8, "edge {n}: {e}");
        }
        assert!(!chart.edges[0].tangent);
        assert!(chart.edges[1..].iter().all(|e| e.tangent));
    }

    #[test]
    fn mathieu_a0_at_q1() {
        let chart = mathieu_chart(1.0, (-1.0, 0.0), 11).unwrap();
        let a0 = chart.edges[0];
        assert_eq!(a0.kind, EdgeKind::Periodic);
        assert!((a0.lambda + 0.455_138_604_1).abs() < 1e-8, "{}", a0.lambda);
    }

    #[test]
    fn liouville() {
        let hill = HillEquation::new(
            0.0,
            vec![
                Harmonic { k: 1, q: 0.4, phase: 0.3 },
                Harmonic { k: 3, q: -0.7, phase: 0.0 },
            ],
        )
        .unwrap();
        assert!((hill.period - TAU).abs() < 1e-15);
        let chart = floquet_analyze(&hill, (-3.0, 6.0), 30, &FloquetOptions::default()).unwrap();
        for r in &chart.samples {
            assert!((r.det - 1.0).abs() < 1e-10 * mat_norm(&r.monodromy).max(1.0));
        }
    }

    #[test]
    fn trace_derivative_matches_difference() {
        let hill = HillEquation::mathieu(0.0, 0.8).unwrap();
        let opts = FloquetOptions::default();
        let l = 2.3;
        let h = 1e-5;
        let r = floquet_at(&hill, l, &opts).unwrap();
        let p = floquet_at(&hill, l + h, &opts).unwrap().trace;
        let m = floquet_at(&hill, l - h, &opts).unwrap().trace;
        assert!(((p - m) / (2.0 * h) - r.trace_derivative).abs() < 1e-6);
    }

    #[test]
    fn stationary_hill_shapes() {
        let c = natural();
        let me = MeParams::new(0.5, 0.0, 0.0);
        let h = hill_from_stationary(me, 0.8, 1.0, c).unwrap();
        assert!(h.is_mathieu());
        let (a, q) = h.mathieu_params().unwrap();
        let w = 2.0;
        assert!((q - 0.64 / (4.0 * w)).abs() < 1e-15);
        assert!((a - (2.0 - 0.32) / w).abs() < 1e-15);

        let h = hill_from_stationary(MeParams::new(0.5, 0.1, 0.0), 0.8, 1.0, c).unwrap();
        assert!(!h.is_mathieu());
        assert_eq!(h.harmonics.iter().map(|x| x.k).collect::<Vec<_>>(), vec![1, 2]);
        assert!((h.energy_for(h.q0).unwrap() - 1.0).abs() < 1e-14);

        let h = hill_from_stationary(MeParams::new(0.5, 0.1, 0.0), 0.0, 1.0, c).unwrap();
        assert!(h.harmonics.is_empty());
        assert!((h.q0 * 2.0 - 2.0).abs() < 1e-15);

        assert!(hill_from_stationary(MeParams::new(0.0, 0.1, 0.0), 0.8, 1.0, c).is_err());
        assert!(hill_from_stationary(MeParams::new(0.5, 0.1, 0.2), 0.8, 1.0, c).is_err());
    }

    #[test]
    fn phase_mode_flux_vanishes() {
        let c = natural();
        let me = MeParams::new(0.25, 0.0, 0.0);
        let mode = PhaseMode::new(me, c, 0.7, 0.4).unwrap();
        let grid = Grid::new(1, 16, 2.0 * mode.period()).unwrap();
        let gs = mode.grad_s(grid).unwrap();
        let rho = RealField::from_fn(grid, |p| 1.0 + 0.5 * (TAU * p[0] / grid.len(0)).sin().powi(3));
        let r = stationary_flux_residual(&rho, &[gs], me, c).unwrap();
        assert!(r < 1e-12, "{r}");
        assert!((mode.measured_period(grid).unwrap() - PI).abs() < 1e-10);
    }

    #[test]
    fn flux_for_off_resonant_cosine() {
        let c = natural();
        let me = MeParams::new(0.25, 0.0, 0.0);
        let grid = Grid::new(1, 64, TAU).unwrap();
        let (amp, k) = (0.3, 3.0);
        let gs = RealField::from_fn(grid, |p| amp * (k * p[0]).cos());
        let rho = RealField::from_fn(grid, |_| 1.0);
        let r = stationary_flux_residual(&rho, &[gs], me, c).unwrap();
        let expect = amp * k * (4.0 - k * k).abs();
        assert!((r - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn incommensurate_mode_grid_rejected() {
        let mode = PhaseMode::new(MeParams::new(0.25, 0.0, 0.0), natural(), 1.0, 0.0).unwrap();
        assert!(mode.grad_s(Grid::new(1, 32, 5.0).unwrap()).is_err());
    }
}
