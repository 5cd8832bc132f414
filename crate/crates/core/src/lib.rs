//! Spectral simulation of a fourth-order homogeneous nonlinear Schrodinger
//! equation: functionals, currents, time evolution, stationary band
//! structure and diagnostics.

pub mod bands;
pub mod cli;
pub mod config;
pub mod currents;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod functionals;
pub mod grid;
pub mod hydro;
pub mod io;
pub mod spectral;
pub mod states;

pub use bands::{floquet_analyze, hill_from_stationary, FloquetChart, FloquetResult, HillEquation, PhaseMode};
pub use error::{Error, Result};
pub use evolution::{evolve, EvolutionConfig, Integrator, Model, Trajectory};
pub use functionals::{CoeffSet, MeParams, Preset, Variant};
pub use grid::{ComplexField, Grid, PhysicalConstants, RealField};
pub use hydro::{hydro_decompose, HydroView};
pub use states::{make_state, StateSpec};
