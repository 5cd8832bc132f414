//! Degree-zero homogeneous functionals of `(rho, S)`.
//!
//! Term order is fixed; coefficient `x[i]` multiplies term `i + 1` below.
//! `P = grad rho / rho`.
//!
//! | # | DG (5 terms)      | EXT (13 terms)               |
//! |---|-------------------|------------------------------|
//! | 1 | `lap S`           | `lap lap S`                  |
//! | 2 | `grad S . P`      | `lap(lap rho / rho)`         |
//! | 3 | `lap rho / rho`   | `lap(P . P)`                 |
//! | 4 | `P . P`           | `lap(P . grad S)`            |
//! | 5 | `grad S . grad S` | `lap(grad S . grad S)`       |
//! | 6 |                   | `P . grad(lap S)`            |
//! | 7 |                   | `P . grad(lap rho / rho)`    |
//! | 8 |                   | `P . grad(P . P)`            |
//! | 9 |                   | `P . grad(P . grad S)`       |
//! |10 |                   | `P . grad(grad S . grad S)`  |
//! |11 |                   | `grad S . grad(lap S)`       |
//! |12 |                   | `grad S . grad(P . P)`       |
//! |13 |                   | `grad S . grad(lap rho / rho)` |

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, PhysicalConstants, RealField};
use crate::hydro::{hydro_decompose, HydroView, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dg,
    Ext,
}

impl Variant {
    pub fn len(self) -> usize {
        match self {
            Variant::Dg => 5,
            Variant::Ext => 13,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dg => "DG",
            Variant::Ext => "EXT",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Coefficients of the imaginary (`a`) and real (`b`) halves plus coupling `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffSet {
    pub variant: Variant,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d: f64,
}

impl CoeffSet {
    pub fn new(variant: Variant, a: Vec<f64>, b: Vec<f64>, d: f64) -> Result<Self> {
        for arr in [&a, &b] {
            if arr.len() != variant.len() {
                return Err(Error::CoeffLength {
                    variant: variant.name(),
                    expected: variant.len(),
                    got: arr.len(),
                });
            }
        }
        if !a.iter().chain(&b).chain([&d]).all(|v| v.is_finite()) {
            return Err(Error::InvalidCoeffs("non-finite coefficient".into()));
        }
        Ok(Self { variant, a, b, d })
    }

    /// All-zero set: the linear Schrodinger equation.
    pub fn linear() -> Self {
        Self {
            variant: Variant::Dg,
            a: vec![0.0; 5],
            b: vec![0.0; 5],
            d: 0.0,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.d == 0.0 || self.a.iter().chain(&self.b).all(|&v| v == 0.0)
    }

    /// Couplings `D_i = a_i D` of the divergence-form family, or `None` when
    /// the `a` half is not of that form. For EXT this requires the pairing
    /// `a1 = a6, ..., a5 = a10, a11 = a12 = a13 = 0`; the result is
    /// `[D1, ..., D5]`. For DG it requires `a1 = a2, a4 = a5 = 0` and returns
    /// `[D a1, D a3, 0, 0, 0]` (drift and diffusion couplings).
    pub fn divergence_couplings(&self) -> Option<[f64; 5]> {
        let a = &self.a;
        match self.variant {
            Variant::Ext => {
                let paired = (0..5).all(|i| a[i] == a[i + 5]);
                let tail = a[10..].iter().all(|&v| v == 0.0);
                (paired && tail).then(|| {
                    let mut out = [0.0; 5];
                    for i in 0..5 {
                        out[i] = a[i] * self.d;
                    }
                    out
                })
            }
            Variant::Dg => {
                (a[0] == a[1] && a[3] == 0.0 && a[4] == 0.0)
                    .then(|| [a[0] * self.d, a[2] * self.d, 0.0, 0.0, 0.0])
            }
        }
    }
}

/// Parameters of the minimal extension: the constrained EXT subset with
/// couplings `D1`, `b1`, `b6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeParams {
    pub d1: f64,
    pub b1: f64,
    pub b6: f64,
}

impl MeParams {
    pub fn new(d1: f64, b1: f64, b6: f64) -> Self {
        Self { d1, b1, b6 }
    }

    /// EXT set with `D = 1`, `a1 = a6 = D1`, `b1`, `b6`, everything else zero.
    pub fn to_coeffs(&self) -> CoeffSet {
        let mut a = vec![0.0; 13];
        let mut b = vec![0.0; 13];
        a[0] = self.d1;
        a[5] = self.d1;
        b[0] = self.b1;
        b[5] = self.b6;
        CoeffSet {
            variant: Variant::Ext,
            a,
            b,
            d: 1.0,
        }
    }

    /// Recognizes an EXT set of minimal-extension shape, folding `D` into
    /// the parameters.
    pub fn from_coeffs(cs: &CoeffSet) -> Option<Self> {
        if cs.variant != Variant::Ext || cs.a[0] != cs.a[5] {
            return None;
        }
        let others_zero = |v: &[f64]| v.iter().enumerate().all(|(i, &x)| i == 0 || i == 5 || x == 0.0);
        (others_zero(&cs.a) && others_zero(&cs.b))
            .then(|| Self::new(cs.a[0] * cs.d, cs.b[0] * cs.d, cs.b[5] * cs.d))
    }

    /// `omega = hbar / (D1 m)`.
    pub fn omega(&self, c: PhysicalConstants) -> Option<f64> {
        (self.d1 != 0.0).then(|| c.hbar / (self.d1 * c.mass))
    }
}

impl Default for MeParams {
    fn default() -> Self {
        Self::new(0.1, 0.05, 0.02)
    }
}

/// Pointwise value of term `index` (0-based) of `variant`, zero on masked points.
pub fn eval_term(variant: Variant, index: usize, h: &HydroView) -> Vec<f64> {
    use Scalar::{LogRho as L, Phase as S};
    let dims = h.dims();
    let vec_of = |f: &dyn Fn(usize) -> Vec<f64>| -> Vec<Vec<f64>> { (0..dims).map(f).collect() };
    let mut out = match (variant, index) {
        (Variant::Dg, 0) => h.lap_s.data.clone(),
        (Variant::Dg, 1) => h.dot(S, L),
        (Variant::Dg, 2) => h.lap_rho_over_rho.data.clone(),
        (Variant::Dg, 3) => h.dot(L, L),
        (Variant::Dg, 4) => h.dot(S, S),
        (Variant::Ext, 0) => h.bilap(S),
        (Variant::Ext, 1) => h.lap_lap_rho_over_rho(),
        (Variant::Ext, 2) => h.lap_dot(L, L),
        (Variant::Ext, 3) => h.lap_dot(L, S),
        (Variant::Ext, 4) => h.lap_dot(S, S),
        (Variant::Ext, 5) => h.vec_dot(L, &vec_of(&|k| h.grad_lap(S, k))),
        (Variant::Ext, 6) => h.vec_dot(L, &vec_of(&|k| h.grad_lap_rho_over_rho(k))),
        (Variant::Ext, 7) => h.vec_dot(L, &vec_of(&|k| h.grad_dot(L, L, k))),
        (Variant::Ext, 8) => h.vec_dot(L, &vec_of(&|k| h.grad_dot(L, S, k))),
        (Variant::Ext, 9) => h.vec_dot(L, &vec_of(&|k| h.grad_dot(S, S, k))),
        (Variant::Ext, 10) => h.vec_dot(S, &vec_of(&|k| h.grad_lap(S, k))),
        (Variant::Ext, 11) => h.vec_dot(S, &vec_of(&|k| h.grad_dot(L, L, k))),
        (Variant::Ext, 12) => h.vec_dot(S, &vec_of(&|k| h.grad_lap_rho_over_rho(k))),
        _ => panic!("term index {index} out of range for {variant}"),
    };
    h.apply_mask(&mut out);
    out
}

/// `sum_i x_i F_i` evaluated pointwise.
pub fn eval_functional(x: &[f64], variant: Variant, h: &HydroView) -> Result<RealField> {
    if x.len() != variant.len() {
        return Err(Error::CoeffLength {
            variant: variant.name(),
            expected: variant.len(),
            got: x.len(),
        });
    }
    let mut out = vec![0.0; h.grid.size()];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(eval_term(variant, i, h)) {
            *o += xi * v;
        }
    }
    Ok(RealField {
        grid: h.grid,
        data: out,
    })
}

/// `x14 (lap S)^2`: homogeneous but breaks weak separability.
pub fn forbidden_term(h: &HydroView, x14: f64) -> RealField {
    let mut data: Vec<f64> = h.lap_s.data.iter().map(|v| x14 * v * v).collect();
    h.apply_mask(&mut data);
    RealField {
        grid: h.grid,
        data,
    }
}

/// Largest deviation `|F[lambda psi] - F[psi]|` over points unmasked in both.
pub fn homogeneity_check(
    variant: Variant,
    x: &[f64],
    psi: &ComplexField,
    lambda: num_complex::Complex64,
) -> Result<f64> {
    let h0 = hydro_decompose(psi, None)?;
    let h1 = hydro_decompose(&psi.scale(lambda), None)?;
    let f0 = eval_functional(x, variant, &h0)?;
    let f1 = eval_functional(x, variant, &h1)?;
    Ok(f0
        .data
        .iter()
        .zip(&f1.data)
        .enumerate()
        .filter(|(i, _)| !h0.node_mask[*i] && !h1.node_mask[*i])
        .map(|(_, (a, b))| (a - b).abs())
        .fold(0.0, f64::max))
}

/// DG coefficients reproducing the free equation minimally coupled to
/// `A = d1 grad S + d2 grad rho / rho`. The coupling is `D = hbar / m`.
pub fn dg_coeffs_from_gauge(d1: f64, d2: f64, c: PhysicalConstants) -> CoeffSet {
    let a = vec![-d1, -d1, -d2, 0.0, 0.0];
    let b = vec![
        0.0,
        -d2 * (1.0 - d1),
        0.0,
        0.5 * d2 * d2,
        -0.5 * d1 * (2.0 - d1),
    ];
    CoeffSet {
        variant: Variant::Dg,
        a,
        b,
        d: c.hbar / c.mass,
    }
}

/// Named coefficient presets.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Linear,
    Dg,
    DgLinearizable { d1: f64, d2: f64 },
    Ext,
    Me(MeParams),
}

impl Preset {
    /// Parses `linear`, `dg`, `dg-linearizable(d1,d2)`, `ext`, `me` or
    /// `me(D1,b1,b6)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                if !s.ends_with(')') {
                    return Err(Error::InvalidCoeffs(format!("unbalanced preset `{s}`")));
                }
                let args = s[open + 1..s.len() - 1]
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidCoeffs(format!("bad number `{v}` in `{s}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                (&s[..open], Some(args))
            }
            None => (s, None),
        };
        let arity = |n: usize| -> Result<Vec<f64>> {
            match &args {
                Some(a) if a.len() == n => Ok(a.clone()),
                _ => Err(Error::InvalidCoeffs(format!("preset `{s}` needs {n} arguments"))),
            }
        };
        match name {
            "linear" if args.is_none() => Ok(Preset::Linear),
            "dg" if args.is_none() => Ok(Preset::Dg),
            "ext" if args.is_none() => Ok(Preset::Ext),
            "dg-linearizable" => {
                let v = arity(2)?;
                Ok(Preset::DgLinearizable { d1: v[0], d2: v[1] })
            }
            "me" => match args {
                None => Ok(Preset::Me(MeParams::default())),
                Some(_) => {
                    let v = arity(3)?;
                    Ok(Preset::Me(MeParams::new(v[0], v[1], v[2])))
                }
            },
            _ => Err(Error::InvalidCoeffs(format!("unknown preset `{s}`"))),
        }
    }

    pub fn coeffs(&self, c: PhysicalConstants) -> CoeffSet {
        match self {
            Preset::Linear => CoeffSet::linear(),
            // divergence form a1 = a2, a4 = a5 = 0; Galilean b2 = b5 = 0
            Preset::Dg => CoeffSet {
                variant: Variant::Dg,
                a: vec![1.0, 1.0, 0.0, 0.0, 0.0],
                b: vec![0.2, 0.0, 0.1, -0.05, 0.0],
                d: 0.05,
            },
            Preset::DgLinearizable { d1, d2 } => dg_coeffs_from_gauge(*d1, *d2, c),
            // divergence pairing with D4 = D5 = 0 and Galilean-invariant b
            Preset::Ext => CoeffSet {
                variant: Variant::Ext,
                a: vec![1.0, 0.1, 0.1, 0.0, 0.0, 1.0, 0.1, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0],
                b: vec![0.05, 0.01, 0.01, 0.0, 0.0, 0.02, 0.01, 0.01, 0.0, 0.0, 0.0, 0.0, 0.0],
                d: 0.01,
            },
            Preset::Me(p) => p.to_coeffs(),
        }
    }
}
