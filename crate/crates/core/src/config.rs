//! Run configuration: a TOML document with a mandatory `version` and no
//! unknown keys. The full schema is documented in `docs/config-schema.md`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bands::{hill_from_stationary, Harmonic, HillEquation};
use crate::error::{Error, Result};
use crate::evolution::{default_dt, EvolutionConfig, Integrator, Model};
use crate::functionals::{CoeffSet, MeParams, Preset, Variant};
use crate::grid::{Grid, PhysicalConstants, RealField};
use crate::states::{harmonic_potential, StateSpec};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Evolve,
    Bands,
    Check,
    Ehrenfest,
    Separability,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Bands => "bands",
            Command::Check => "check",
            Command::Ehrenfest => "ehrenfest",
            Command::Separability => "separability",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// When present it must match the subcommand being run.
    #[serde(default)]
    pub command: Option<Command>,
    /// Replaces the seed of seeded states; `--seed` takes precedence.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub constants: ConstantsSpec,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub state: Option<StateSpec>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub evolution: EvolutionSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub bands: Option<BandsSpec>,
    #[serde(default)]
    pub ehrenfest: Option<EhrenfestSpec>,
    #[serde(default)]
    pub separability: Option<SeparabilitySpec>,
    #[serde(default)]
    pub check: CheckSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

impl Default for ConstantsSpec {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

fn one() -> f64 {
    1.0
}

/// A scalar applied to every axis or one value per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAxis<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Copy> PerAxis<T> {
    fn expand(&self, dims: usize, what: &str) -> Result<Vec<T>> {
        match self {
            PerAxis::One(v) => Ok(vec![*v; dims]),
            PerAxis::Many(v) if v.len() == dims => Ok(v.clone()),
            PerAxis::Many(v) => Err(Error::InvalidConfig(format!(
                "grid.{what} has {} entries for {dims} dimensions",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "one_usize")]
    pub dims: usize,
    pub n: PerAxis<usize>,
    pub length: PerAxis<f64>,
}

fn one_usize() -> usize {
    1
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        if !(1..=2).contains(&self.dims) {
            return Err(Error::InvalidGrid(format!("dims = {} (expected 1 or 2)", self.dims)));
        }
        Grid::with_axes(&self.n.expand(self.dims, "n")?, &self.length.expand(self.dims, "length")?)
    }
}

/// Either a named preset or an explicit coefficient set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub variant: Option<Variant>,
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub d: Option<f64>,
    /// Coupling of the separability-breaking `(lap S)^2` term.
    #[serde(default)]
    pub forbidden: f64,
}

impl ModelSpec {
    pub fn build(&self, c: PhysicalConstants) -> Result<Model> {
        let explicit = self.variant.is_some() || self.a.is_some() || self.b.is_some() || self.d.is_some();
        let coeffs = match (&self.preset, explicit) {
            (Some(_), true) => {
                return Err(Error::InvalidConfig(
                    "model takes either `preset` or explicit `variant`/`a`/`b`/`d`, not both".into(),
                ))
            }
            (Some(p), false) => Preset::parse(p)?.coeffs(c),
            (None, false) => CoeffSet::linear(),
            (None, true) => {
                let variant = self
                    .variant
                    .ok_or_else(|| Error::InvalidConfig("explicit model needs `variant`".into()))?;
                let zeros = vec![0.0; variant.len()];
                CoeffSet::new(
                    variant,
                    self.a.clone().unwrap_or_else(|| zeros.clone()),
                    self.b.clone().unwrap_or(zeros),
                    self.d.unwrap_or(1.0),
                )?
            }
        };
        if !self.forbidden.is_finite() {
            return Err(Error::InvalidConfig("model.forbidden is not finite".into()));
        }
        Ok(Model::new(coeffs).with_forbidden(self.forbidden))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    None,
    /// `m omega^2 x^2 / 2` about the box center.
    Harmonic { omega: f64 },
    /// `amplitude cos(k x)`; `k` must fit the box.
    Cosine { amplitude: f64, k: f64 },
}

impl PotentialSpec {
    pub fn build(&self, grid: Grid, c: PhysicalConstants) -> Result<Option<RealField>> {
        match *self {
            PotentialSpec::None => Ok(None),
            PotentialSpec::Harmonic { omega } => {
                if !(omega > 0.0 && omega.is_finite()) {
                    return Err(Error::InvalidConfig(format!("harmonic omega = {omega}")));
                }
                Ok(Some(harmonic_potential(grid, omega, c)))
            }
            PotentialSpec::Cosine { amplitude, k } => {
                let turns = k * grid.len(0) / std::f64::consts::TAU;
                if (turns - turns.round()).abs() > 1e-9 || !amplitude.is_finite() {
                    return Err(Error::InvalidConfig(format!("cosine potential k = {k} does not fit the box")));
                }
                Ok(Some(RealField::from_fn(grid, |p| amplitude * (k * p[0]).cos())))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    /// Defaults to a fifth of the stability bound, capped at `1e-3`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default = "one_usize")]
    pub sample_stride: usize,
    #[serde(default)]
    pub snapshot_stride: usize,
    #[serde(default = "default_norm_tol")]
    pub norm_tol: f64,
}

fn default_integrator() -> Integrator {
    Integrator::IfRk4
}

fn default_norm_tol() -> f64 {
    1e-6
}

impl Default for EvolutionSpec {
    fn default() -> Self {
        Self {
            dt: None,
            t_end: None,
            integrator: default_integrator(),
            sample_stride: 1,
            snapshot_stride: 0,
            norm_tol: default_norm_tol(),
        }
    }
}

impl EvolutionSpec {
    pub fn build(
        &self,
        grid: &Grid,
        model: &Model,
        potential: Option<RealField>,
        c: PhysicalConstants,
        t_end_fallback: Option<f64>,
    ) -> Result<EvolutionConfig> {
        let t_end = self
            .t_end
            .or(t_end_fallback)
            .ok_or_else(|| Error::InvalidConfig("evolution.t_end is required".into()))?;
        let dt = match self.dt {
            Some(dt) => dt,
            None => {
                let dt = default_dt(grid, model, potential.as_ref(), self.integrator, c);
                // round down onto a whole number of steps
                t_end / (t_end / dt).ceil().max(1.0)
            }
        };
        let mut cfg = EvolutionConfig::new(model.clone(), dt, t_end);
        cfg.integrator = self.integrator;
        cfg.sample_stride = self.sample_stride;
        cfg.snapshot_stride = self.snapshot_stride;
        cfg.potential = potential;
        cfg.constants = c;
        cfg.norm_tol = self.norm_tol;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// `--out` takes precedence.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Write binary field snapshots.
    #[serde(default)]
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsSpec {
    pub hill: HillSpec,
    pub range: [f64; 2],
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_ode_tol")]
    pub tol: f64,
    /// Largest admissible `|det M - 1|`.
    #[serde(default = "default_det_tol")]
    pub det_tol: f64,
}

fn default_samples() -> usize {
    200
}

fn default_ode_tol() -> f64 {
    1e-12
}

fn default_det_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HillSpec {
    /// `y'' + (a - 2q cos 2z) y = 0`, charted over `a`.
    Mathieu { q: f64 },
    /// Reduction of the stationary phase mode under `model`, which must be
    /// of minimal-extension shape with `b6 = 0`. Charted over `q0`.
    Stationary { amplitude: f64, energy: f64 },
    General {
        #[serde(default)]
        q0: f64,
        harmonics: Vec<HarmonicSpec>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicSpec {
    pub k: u32,
    pub q: f64,
    #[serde(default)]
    pub phase: f64,
}

impl HillSpec {
    pub fn build(&self, model: &Model, c: PhysicalConstants) -> Result<HillEquation> {
        match self {
            HillSpec::Mathieu { q } => HillEquation::mathieu(0.0, *q),
            HillSpec::Stationary { amplitude, energy } => {
                let me = MeParams::from_coeffs(&model.coeffs).ok_or_else(|| {
                    Error::InvalidConfig("stationary Hill reduction needs a minimal-extension model".into())
                })?;
                hill_from_stationary(me, *amplitude, *energy, c)
            }
            HillSpec::General { q0, harmonics } => HillEquation::new(
                *q0,
                harmonics
                    .iter()
                    .map(|h| Harmonic {
                        k: h.k,
                        q: h.q,
                        phase: h.phase,
                    })
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EhrenfestSpec {
    /// Residuals must stay below `tol * max(|<p>|, 1)`.
    #[serde(default = "default_ehrenfest_tol")]
    pub tol: f64,
}

fn default_ehrenfest_tol() -> f64 {
    1e-4
}

impl Default for EhrenfestSpec {
    fn default() -> Self {
        Self {
            tol: default_ehrenfest_tol(),
        }
    }
}

/// Second factor of the product state; the first factor is the main
/// `grid`/`state`/`potential`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparabilitySpec {
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub state: StateSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default = "default_sep_tol")]
    pub tol: f64,
}

fn default_sep_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Norm drift bound for the short evolution in the check suite.
    #[serde(default = "default_check_norm_tol")]
    pub norm_tol: f64,
    /// Steps of that evolution when `evolution.t_end` is not given.
    #[serde(default = "default_check_steps")]
    pub steps: usize,
}

fn default_check_norm_tol() -> f64 {
    1e-8
}

fn default_check_steps() -> usize {
    100
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self {
            norm_tol: default_check_norm_tol(),
            steps: default_check_steps(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn constants(&self) -> Result<PhysicalConstants> {
        PhysicalConstants::new(self.constants.hbar, self.constants.mass)
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing [grid]".into()))?
            .build()
    }

    pub fn state(&self) -> Result<StateSpec> {
        self.state
            .clone()
            .ok_or_else(|| Error::InvalidConfig("missing [state]".into()))
    }

    /// Applies a seed to every seeded state.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        if let Some(s) = &mut self.state {
            reseed(s, seed);
        }
        if let Some(sep) = &mut self.separability {
            // keep the two factors distinct
            reseed(&mut sep.state, seed.wrapping_add(1));
        }
    }
}

fn reseed(s: &mut StateSpec, seed: u64) {
    match s {
        StateSpec::PerturbedGaussian { seed: v, .. } | StateSpec::Random { seed: v, .. } => *v = seed,
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
[grid]
n = 64
length = 20.0
[state]
kind = "gaussian_packet"
t = 0.0
t0 = 1.0
[model]
preset = "me"
[evolution]
t_end = 0.1
"#;

    #[test]
    fn parses_minimal() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let g = cfg.grid().unwrap();
        assert_eq!(g.n(0), 64);
        let c = cfg.constants().unwrap();
        let model = cfg.model.build(c).unwrap();
        assert!(!model.is_linear());
        let ev = cfg.evolution.build(&g, &model, None, c, None).unwrap();
        assert_eq!(ev.steps() as f64 * ev.dt, 0.1);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(RunConfig::parse(&MINIMAL.replace("t0 = 1.0", "t0 = 1.0\nwidth = 2")).is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}\n[extra]\nx = 1")).is_err());
        assert!(RunConfig::parse(&MINIMAL.replace("version = 1", "version = 2")).is_err());
        assert!(RunConfig::parse(&MINIMAL.replace("version = 1", "")).is_err());
    }

    #[test]
    fn preset_and_explicit_are_exclusive() {
        let m = ModelSpec {
            preset: Some("me".into()),
            variant: Some(Variant::Dg),
            ..Default::default()
        };
        assert!(m.build(PhysicalConstants::default()).is_err());
    }
}
