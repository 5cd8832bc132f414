//! Orchestration behind the `hosch` binary.
//!
//! Exit codes: 0 all checks passed, 1 some check failed (report still
//! written), 2 configuration or I/O error (nothing written), 3 numerical
//! abort (report written with `status = "aborted"`).

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::bands::{floquet_analyze, mathieu_chart, stationary_flux_residual, FloquetOptions, PhaseMode};
use crate::config::{BandsSpec, Command, EhrenfestSpec, RunConfig};
use crate::currents::continuity_residual;
use crate::diagnostics::{
    ehrenfest_consistency, ehrenfest_corrections, energy, nonlinear_residual, separability_test,
};
use crate::error::{Error, Result};
use crate::evolution::{evolve, galilean_boost, gauge_form_residual, EvolutionConfig, Model};
use crate::functionals::{homogeneity_check, MeParams};
use crate::grid::{ComplexField, Grid, PhysicalConstants, RealField};
use crate::hydro::hydro_decompose;
use crate::io::{self, CheckRecord, Status, Summary};
use crate::spectral;
use crate::states::{make_state, random_field, StateSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Default)]
pub struct CliOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

/// Outcome of one invocation.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: Option<Summary>,
    pub message: Option<String>,
}

impl Outcome {
    fn config_error(e: impl std::fmt::Display) -> Self {
        Self {
            exit_code: EXIT_CONFIG,
            summary: None,
            message: Some(format!("configuration error: {e}")),
        }
    }
}

/// Loads the config at `opts.config` and runs `cmd`.
pub fn run(cmd: Command, opts: &CliOptions) -> Outcome {
    let text = match std::fs::read_to_string(&opts.config) {
        Ok(t) => t,
        Err(e) => return Outcome::config_error(format!("{}: {e}", opts.config.display())),
    };
    match RunConfig::parse(&text) {
        Ok(cfg) => run_config(cmd, cfg, opts),
        Err(e) => Outcome::config_error(e),
    }
}

/// Runs `cmd` on an already parsed config.
pub fn run_config(cmd: Command, mut cfg: RunConfig, opts: &CliOptions) -> Outcome {
    if let Some(c) = cfg.command {
        if c != cmd {
            return Outcome::config_error(format!(
                "config is for `{}` but `{}` was requested",
                c.name(),
                cmd.name()
            ));
        }
    }
    if let Some(seed) = opts.seed.or(cfg.seed) {
        cfg.apply_seed(seed);
    }
    let job = match Job::prepare(cmd, &cfg) {
        Ok(j) => j,
        Err(e) => return Outcome::config_error(e),
    };
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = std::fs::create_dir_all(&out) {
        return Outcome::config_error(format!("{}: {e}", out.display()));
    }
    let mut summary = Summary::new(cmd.name());
    let result = job.execute(&out, &mut summary, cfg.output.snapshots);
    let (code, message) = match result {
        Ok(()) => {
            summary.finalize();
            let code = if summary.all_passed() { EXIT_OK } else { EXIT_CHECK_FAILED };
            (code, None)
        }
        Err(Error::Io(m)) => return Outcome::config_error(m),
        Err(e) => {
            summary.status = Status::Aborted;
            summary.error = Some(e.to_string());
            (EXIT_NUMERICAL, Some(format!("numerical abort: {e}")))
        }
    };
    summary.artifacts.push("summary.json".into());
    if let Err(e) = summary.write(&out.join("summary.json")) {
        return Outcome::config_error(e);
    }
    if !opts.quiet {
        for c in &summary.checks {
            println!(
                "{} {} = {:e} ({} {:e})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                match c.relation {
                    io::Relation::AtMost => "<=",
                    io::Relation::AtLeast => ">=",
                },
                c.tolerance
            );
        }
    }
    Outcome {
        exit_code: code,
        summary: Some(summary),
        message,
    }
}

struct Setup {
    c: PhysicalConstants,
    psi: ComplexField,
    model: Model,
    potential: Option<RealField>,
}

enum Job {
    Evolve(Setup, EvolutionConfig),
    Ehrenfest(Setup, EvolutionConfig, EhrenfestSpec),
    Separability {
        setup: Setup,
        evo: EvolutionConfig,
        second: ComplexField,
        second_potential: Option<RealField>,
        tol: f64,
    },
    Bands(crate::bands::HillEquation, BandsSpec),
    Check(Setup, EvolutionConfig, crate::config::CheckSpec),
}

fn setup(cfg: &RunConfig) -> Result<Setup> {
    let c = cfg.constants()?;
    let grid = cfg.grid()?;
    let psi = make_state(&cfg.state()?, grid, c)?;
    let model = cfg.model.build(c)?;
    let potential = cfg.potential.build(grid, c)?;
    Ok(Setup {
        c,
        psi,
        model,
        potential,
    })
}

impl Job {
    fn prepare(cmd: Command, cfg: &RunConfig) -> Result<Self> {
        match cmd {
            Command::Evolve | Command::Ehrenfest => {
                let s = setup(cfg)?;
                let evo = cfg
                    .evolution
                    .build(&s.psi.grid, &s.model, s.potential.clone(), s.c, None)?;
                check_steps(&evo)?;
                Ok(if cmd == Command::Evolve {
                    Job::Evolve(s, evo)
                } else {
                    Job::Ehrenfest(s, evo, cfg.ehrenfest.unwrap_or_default())
                })
            }
            Command::Separability => {
                let s = setup(cfg)?;
                let sep = cfg
                    .separability
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("missing [separability]".into()))?;
                let g2 = match &sep.grid {
                    Some(g) => g.build()?,
                    None => s.psi.grid,
                };
                let second = make_state(&sep.state, g2, s.c)?;
                let second_potential = sep.potential.build(g2, s.c)?;
                let points = s.psi.grid.size() * g2.size();
                if points > crate::diagnostics::MAX_PRODUCT_POINTS {
                    return Err(Error::MemoryBound(points));
                }
                let mut evo = cfg.evolution.build(&s.psi.grid, &s.model, None, s.c, None)?;
                // the step must also be stable on the product grid
                let g12 = Grid::with_axes(&[s.psi.grid.n(0), g2.n(0)], &[s.psi.grid.len(0), g2.len(0)])?;
                let bound = crate::evolution::stability_bound(&g12, &s.model, None, evo.integrator, s.c);
                if cfg.evolution.dt.is_none() && evo.dt > 0.2 * bound {
                    evo = cfg.evolution.build(&g12, &s.model, None, s.c, None)?;
                }
                check_steps(&evo)?;
                Ok(Job::Separability {
                    setup: s,
                    evo,
                    second,
                    second_potential,
                    tol: sep.tol,
                })
            }
            Command::Bands => {
                let spec = cfg
                    .bands
                    .clone()
                    .ok_or_else(|| Error::InvalidConfig("missing [bands]".into()))?;
                let c = cfg.constants()?;
                let model = cfg.model.build(c)?;
                let hill = spec.hill.build(&model, c)?;
                if !(spec.range[0] < spec.range[1]) || spec.samples < 2 {
                    return Err(Error::InvalidConfig("bands needs range[0] < range[1] and samples >= 2".into()));
                }
                Ok(Job::Bands(hill, spec))
            }
            Command::Check => {
                let s = setup(cfg)?;
                let fallback = {
                    let dt = crate::evolution::default_dt(
                        &s.psi.grid,
                        &s.model,
                        s.potential.as_ref(),
                        cfg.evolution.integrator,
                        s.c,
                    );
                    let dt = cfg.evolution.dt.unwrap_or(dt);
                    dt * cfg.check.steps as f64
                };
                let mut evo = cfg
                    .evolution
                    .build(&s.psi.grid, &s.model, s.potential.clone(), s.c, Some(fallback))?;
                evo.norm_tol = evo.norm_tol.max(cfg.check.norm_tol * 10.0);
                check_steps(&evo)?;
                Ok(Job::Check(s, evo, cfg.check))
            }
        }
    }

    fn execute(self, out: &Path, summary: &mut Summary, snapshots: bool) -> Result<()> {
        match self {
            Job::Evolve(s, evo) => {
                let traj = evolve(&s.psi, &evo)?;
                io::write_observables_csv(&out.join("observables.csv"), &traj.observables, s.psi.grid.dims())?;
                summary.artifacts.push("observables.csv".into());
                if snapshots {
                    write_snapshots(out, &traj.snapshots, summary)?;
                }
                let drift = norm_drift(&traj.observables);
                summary.push(CheckRecord::at_most("evolution.norm_drift", drift, evo.norm_tol));
                summary.value("steps", traj.steps as f64);
                summary.value("dt", traj.dt);
                summary.value(
                    "max_abs_I1",
                    traj.observables.iter().map(|o| o.i1[0].abs().max(o.i1[1].abs())).fold(0.0, f64::max),
                );
                summary.value(
                    "max_abs_I2",
                    traj.observables.iter().map(|o| o.i2[0].abs().max(o.i2[1].abs())).fold(0.0, f64::max),
                );
                summary.value(
                    "max_cont_residual",
                    traj.observables.iter().map(|o| o.cont_residual.abs()).fold(0.0, f64::max),
                );
                Ok(())
            }
            Job::Ehrenfest(s, evo, spec) => {
                crate::states::check_tails(&s.psi)?;
                let traj = evolve(&s.psi, &evo)?;
                io::write_observables_csv(&out.join("observables.csv"), &traj.observables, s.psi.grid.dims())?;
                summary.artifacts.push("observables.csv".into());
                let rep = ehrenfest_consistency(&traj.observables, s.c)?;
                io::write_ehrenfest_csv(&out.join("ehrenfest.csv"), &rep)?;
                summary.artifacts.push("ehrenfest.csv".into());
                let scale = rep.max_abs_p.max(1.0);
                summary.push(CheckRecord::at_most("ehrenfest.r1", rep.max_r1(), spec.tol * scale));
                summary.push(CheckRecord::at_most("ehrenfest.r2", rep.max_r2(), spec.tol * scale));
                summary.value("r1_without_I1", rep.max_r1_without_i1());
                summary.value("r2_without_I2", rep.max_r2_without_i2());
                summary.value("max_abs_I1", rep.max_abs_i1);
                summary.value("max_abs_p", rep.max_abs_p);
                Ok(())
            }
            Job::Separability {
                setup: s,
                evo,
                second,
                second_potential,
                tol,
            } => {
                let rep = separability_test(&s.psi, &second, s.potential.as_ref(), second_potential.as_ref(), &evo)?;
                io::write_separability_csv(&out.join("separability.csv"), &rep)?;
                summary.artifacts.push("separability.csv".into());
                summary.push(CheckRecord::at_most("separability.max_deviation", rep.max_deviation, tol));
                Ok(())
            }
            Job::Bands(hill, spec) => {
                let opts = FloquetOptions {
                    tol: spec.tol,
                    ..Default::default()
                };
                let chart = floquet_analyze(&hill, (spec.range[0], spec.range[1]), spec.samples, &opts)?;
                io::write_bands_csv(&out.join("bands.csv"), &chart)?;
                io::write_edges_csv(&out.join("edges.csv"), &chart.edges)?;
                summary.artifacts.extend(["bands.csv".into(), "edges.csv".into()]);
                let det = chart.samples.iter().map(|r| (r.det - 1.0).abs()).fold(0.0, f64::max);
                summary.push(CheckRecord::at_most("bands.det_monodromy", det, spec.det_tol));
                summary.value("period", hill.period);
                for (i, e) in chart.edges.iter().enumerate() {
                    summary.value(format!("edge[{i}]"), e.lambda);
                    if let Some(en) = hill.energy_for(e.lambda) {
                        summary.value(format!("edge_energy[{i}]"), en);
                    }
                }
                if hill.is_mathieu() {
                    summary.notes.push("pure Mathieu form".into());
                }
                Ok(())
            }
            Job::Check(s, evo, spec) => check_suite(&s, &evo, spec, out, summary),
        }
    }
}

fn check_steps(evo: &EvolutionConfig) -> Result<()> {
    if evo.steps() == 0 {
        return Err(Error::InvalidConfig("evolution has zero steps".into()));
    }
    Ok(())
}

fn norm_drift(obs: &[crate::diagnostics::ObservablesSample]) -> f64 {
    let Some(first) = obs.first() else { return 0.0 };
    obs.iter()
        .map(|o| (o.norm - first.norm).abs() / first.norm)
        .fold(0.0, f64::max)
}

fn write_snapshots(out: &Path, snaps: &[(f64, ComplexField)], summary: &mut Summary) -> Result<()> {
    for (i, (t, psi)) in snaps.iter().enumerate() {
        let name = format!("snapshot_{i:06}.bin");
        io::write_snapshot(&out.join(&name), *t, psi)?;
        summary.artifacts.push(name);
    }
    Ok(())
}

fn rel(dev: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        dev / scale
    } else {
        dev
    }
}

/// Runs the invariant suite: checks on the configured state and model plus
/// fixed reference cases for the parts that need special states.
fn check_suite(
    s: &Setup,
    evo: &EvolutionConfig,
    spec: crate::config::CheckSpec,
    out: &Path,
    summary: &mut Summary,
) -> Result<()> {
    let c = s.c;
    let grid = s.psi.grid;

    // spectral differentiation
    let g = Grid::new(1, 32, TAU)?;
    let sin = ComplexField::from_fn(g, |p| Complex64::new(p[0].sin(), 0.0));
    let d = spectral::derivative(&sin, 1, 0)?;
    let err = d
        .data
        .iter()
        .enumerate()
        .map(|(i, z)| (z - g.coord(0, i).cos()).norm())
        .fold(0.0, f64::max);
    summary.push(CheckRecord::at_most("spectral.derivative_sin", err, 1e-12));

    let r = random_field(grid, 11, grid.n(0) / 8)?;
    let mut comp = 0.0f64;
    for axis in 0..grid.dims() {
        let twice = spectral::derivative(&spectral::derivative(&r, 1, axis)?, 1, axis)?;
        let direct = spectral::derivative(&r, 2, axis)?;
        comp = comp.max(rel(twice.max_abs_diff(&direct), direct.max_abs()));
    }
    summary.push(CheckRecord::at_most("spectral.composition_relative", comp, 1e-10));

    // hydrodynamic fields of a nodeless state are invariant under constant
    // rescaling
    let lam = Complex64::from_polar(2.0, PI / 3.0);
    let nodeless = make_state(
        &StateSpec::Random {
            seed: 17,
            cutoff: None,
            amplitude: 0.5,
            background: 1.5,
        },
        grid,
        c,
    )?;
    let h0 = hydro_decompose(&nodeless, None)?;
    let h1 = hydro_decompose(&nodeless.scale(lam), None)?;
    let mut hdev = 0.0f64;
    for axis in 0..grid.dims() {
        let pairs = [
            (h0.grad_s[axis].data.as_slice(), h1.grad_s[axis].data.as_slice()),
            (h0.grad_log_rho[axis].data.as_slice(), h1.grad_log_rho[axis].data.as_slice()),
        ];
        for (a, b) in pairs {
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            let dev = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            hdev = hdev.max(dev / scale);
        }
    }
    summary.push(CheckRecord::at_most("hydro.scale_invariance", hdev, 1e-12));

    // degree-zero homogeneity of the configured functional
    let cs = &s.model.coeffs;
    let f = crate::functionals::eval_functional(&cs.a, cs.variant, &h0)?;
    let fb = crate::functionals::eval_functional(&cs.b, cs.variant, &h0)?;
    let fnorm = f.max_abs().max(fb.max_abs()).max(f64::MIN_POSITIVE);
    let mut hom = 0.0f64;
    for l in [Complex64::new(2.0, 0.0), Complex64::from_polar(1.0, PI / 3.0)] {
        hom = hom.max(homogeneity_check(cs.variant, &cs.a, &nodeless, l)?);
        hom = hom.max(homogeneity_check(cs.variant, &cs.b, &nodeless, l)?);
    }
    summary.push(CheckRecord::at_most("functional.homogeneity_relative", hom / fnorm, 1e-12));

    // weak nonlinearity on the reference states
    let me = MeParams::from_coeffs(cs).unwrap_or_default();
    let me_model = Model::me(me);
    let g1 = Grid::new(1, 128, 40.0)?;
    let pw = make_state(&StateSpec::PlaneWave { k: g1.fundamental_k(0) * 3.0, ky: 0.0 }, g1, c)?;
    let packet = make_state(
        &StateSpec::GaussianPacket {
            t: 0.7,
            t0: 1.5,
            x0: 0.0,
            p0: 0.0,
        },
        g1,
        c,
    )?;
    let coherent = make_state(
        &StateSpec::Coherent {
            x0: 1.0,
            p0: 2.0 * TAU / 40.0,
            omega: 0.5,
        },
        g1,
        c,
    )?;
    for (name, st) in [("plane_wave", &pw), ("gaussian_packet", &packet), ("coherent", &coherent)] {
        let r = nonlinear_residual(st, &me_model, c)?;
        summary.push(CheckRecord::at_most(format!("weak_nonlinearity.{name}"), r, 1e-10));
    }
    let (i1, i2) = ehrenfest_corrections(&packet, &me_model, c)?;
    summary.push(CheckRecord::at_most(
        "ehrenfest.gaussian_corrections",
        i1[0].abs().max(i2[0].abs()),
        1e-10,
    ));

    // energy identity: E_ME = E_L when b1 = b6
    let eq = Model::me(MeParams::new(me.d1, 0.03, 0.03));
    let (el, eme) = energy(&s.psi, s.potential.as_ref(), &eq, c)?;
    summary.push(CheckRecord::at_most("energy.equal_b1_b6", (eme - el).abs() / el.abs().max(1.0), 1e-12));

    // continuity over one small step of the configured model
    let mut one = evo.clone();
    one.dt = evo.dt.min(1e-4);
    one.t_end = one.dt;
    one.observables = false;
    let next = evolve(&s.psi, &one)?;
    let cr = continuity_residual(&s.psi, next.final_state(), one.dt, cs, c)?;
    summary.push(CheckRecord::at_most(
        "continuity.relative_residual",
        rel(cr.max, cr.max_drho_dt.max(cr.max_div_j)),
        1e-4,
    ));

    // norm conservation over the configured run
    let traj = evolve(&s.psi, evo)?;
    io::write_observables_csv(&out.join("observables.csv"), &traj.observables, grid.dims())?;
    summary.artifacts.push("observables.csv".into());
    summary.push(CheckRecord::at_most("evolution.norm_drift", norm_drift(&traj.observables), spec.norm_tol));

    // Galilean covariance of the minimal extension on a commensurate boost
    let gb = Grid::new(1, 64, 64.0)?;
    let st = make_state(
        &StateSpec::PhaseModulated {
            amplitude: 0.3,
            k: gb.fundamental_k(0) * 4.0,
            sigma: 3.0,
            phi: 0.0,
            x0: 0.0,
        },
        gb,
        c,
    )?;
    let v = gb.fundamental_k(0) * c.hbar / c.mass;
    let bevo = {
        let mut e = EvolutionConfig::new(me_model.clone(), 0.01, 0.5);
        e.constants = c;
        e.observables = false;
        e
    };
    let a = evolve(&galilean_boost(&st, &[v], 0.0, c, 1.0)?, &bevo)?;
    let b = galilean_boost(evolve(&st, &bevo)?.final_state(), &[v], 0.5, c, 1.0)?;
    summary.push(CheckRecord::at_most(
        "galilean.boost_commutes",
        a.final_state().max_abs_diff(&b),
        1e-6,
    ));

    // stationary phase mode
    if me.d1 > 0.0 {
        let mode = PhaseMode::new(me, c, 0.5, 0.0)?;
        let gm = Grid::new(1, 16, 2.0 * mode.period())?;
        let rho = RealField::from_fn(gm, |p| 1.2 + (p[0] * TAU / gm.len(0)).cos() * 0.5);
        let res = stationary_flux_residual(&rho, &[mode.grad_s(gm)?], me, c)?;
        summary.push(CheckRecord::at_most("phase_mode.flux_residual", res, 1e-12));
        let per = mode.measured_period(gm)?;
        summary.push(CheckRecord::at_most(
            "phase_mode.period",
            (per - mode.period()).abs(),
            1e-10,
        ));
    }

    // band structure reference cases
    let q0 = mathieu_chart(0.0, (-0.5, 9.5), 41)?;
    let mut edge_err = 0.0f64;
    for n in 0..=3usize {
        let want = (n * n) as f64;
        let best = q0
            .edges
            .iter()
            .map(|e| (e.lambda - want).abs())
            .fold(f64::INFINITY, f64::min);
        edge_err = edge_err.max(best);
    }
    summary.push(CheckRecord::at_most("bands.mathieu_q0_edges", edge_err, 1e-8));
    let q1 = mathieu_chart(1.0, (-2.0, 10.0), 50)?;
    let det = q1.samples.iter().map(|r| (r.det - 1.0).abs()).fold(0.0, f64::max);
    summary.push(CheckRecord::at_most("bands.det_monodromy", det, 1e-10));

    // vector-potential form of the minimal extension
    if c.is_natural() && me.d1 != 0.0 {
        // log and quotients of the state are not band-limited; resolve them
        let gg = Grid::new(1, 64, TAU)?;
        let mut st = random_field(gg, 5, 2)?;
        for z in &mut st.data {
            *z = Complex64::new(1.5, 0.0) + *z * 0.4;
        }
        let rep = gauge_form_residual(&st, MeParams::new(me.d1, me.b1, 0.0), c)?;
        summary.push(CheckRecord::at_most("gauge_form.b1_deviation", rep.deviation, 1e-8));
        if me.b6 != 0.0 {
            let rep6 = gauge_form_residual(&st, me, c)?;
            summary.value("gauge_form.full_deviation", rep6.deviation);
            if let Some(f) = rep6.b6_factor {
                summary.value("gauge_form.b6_factor", f);
                summary
                    .notes
                    .push("the b6 term of the vector-potential form carries a constant factor relative to the Hamiltonian form; see gauge_form.b6_factor".into());
            }
        }
    }
    Ok(())
}
