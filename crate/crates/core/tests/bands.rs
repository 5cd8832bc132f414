//! Hill equations, Floquet charts and the stationary phase mode.

use std::f64::consts::PI;

use hosch::bands::{
    floquet_at, floquet_solution, hill_from_stationary, mathieu_chart, EdgeKind, FloquetOptions, Harmonic,
    HillEquation, PhaseMode,
};
use hosch::{evolve, floquet_analyze, ComplexField, EvolutionConfig, Grid, MeParams, Model, PhysicalConstants};
use num_complex::Complex64;
use proptest::prelude::*;

/// Characteristic values at `q = 1` from standard Mathieu tables, in
/// increasing order: `a0, b1, a1, b2, a2, b3, a3`.
const TABLE_Q1: [f64; 7] = [
    -0.455_138_604_1,
    -0.110_248_817_0,
    1.859_108_072_5,
    3.917_024_773_0,
    4.371_300_982_7,
    9.047_739_259_8,
    9.078_368_847_2,
];

#[test]
fn mathieu_edges_match_tables() {
    let chart = mathieu_chart(1.0, (-2.0, 10.0), 200).unwrap();
    assert_eq!(chart.edges.len(), TABLE_Q1.len());
    for (e, want) in chart.edges.iter().zip(TABLE_Q1) {
        assert!((e.lambda - want).abs() <= 1e-9, "{} vs {want}", e.lambda);
    }
    // a_n edges are periodic for even n, antiperiodic for odd n (period pi)
    let kinds: Vec<_> = chart.edges.iter().map(|e| e.kind).collect();
    use EdgeKind::{Antiperiodic as A, Periodic as P};
    assert_eq!(kinds, vec![P, A, A, P, P, A, A]);
}

#[test]
fn edges_move_continuously_away_from_zero_modulation() {
    let q = 1e-3;
    let chart = mathieu_chart(q, (-0.5, 9.5), 80).unwrap();
    // a0 ~ -q^2/2 and a1/b1 ~ 1 +- q; the gaps at 4 and 9 are O(q^2) and
    // O(q^3) wide, below the merge radius, so each shows up as one closed edge
    let want = [-0.5 * q * q, 1.0 - q, 1.0 + q, 4.0, 9.0];
    assert_eq!(chart.edges.len(), want.len());
    for (e, w) in chart.edges.iter().zip(want) {
        assert!((e.lambda - w).abs() <= 2.0 * q * q, "{} vs {w}", e.lambda);
    }
}

fn me_general() -> (MeParams, PhysicalConstants) {
    (MeParams::new(0.3, 0.17, 0.0), PhysicalConstants::new(0.7, 1.3).unwrap())
}

/// `omega Q(sqrt(omega) x) = (2m / hbar^2) [E - hbar^2 S'^2 / 2m - hbar b1 S'''' / 2]`
/// with `S' = A cos(sqrt(omega) x)`.
#[test]
fn stationary_mapping_matches_the_pointwise_equation() {
    let (me, c) = me_general();
    let (amp, e) = (0.45, 0.8);
    let hill = hill_from_stationary(me, amp, e, c).unwrap();
    let omega = c.hbar / (me.d1 * c.mass);
    let k = omega.sqrt();
    let mode = PhaseMode::new(me, c, amp, 0.0).unwrap();
    for i in 0..50 {
        let x = -3.0 + 0.137 * i as f64;
        let s1 = amp * (k * x).cos();
        let s4 = amp * k.powi(3) * (k * x).sin();
        let want = 2.0 * c.mass / (c.hbar * c.hbar)
            * (e - c.hbar * c.hbar / (2.0 * c.mass) * s1 * s1 - 0.5 * c.hbar * me.b1 * s4);
        let got = omega * hill.q_at(k * x, hill.q0);
        assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{got} vs {want}");
        assert!((mode.grad_s_at(x) - s1).abs() <= 1e-14);
    }
    assert!((hill.energy_for(hill.q0).unwrap() - e).abs() <= 1e-12);
    assert!(hill_from_stationary(MeParams::new(0.3, 0.17, 0.01), amp, e, c).is_err());
    assert!(hill_from_stationary(MeParams::new(0.0, 0.17, 0.0), amp, e, c).is_err());
}

/// The lowest periodic edge of the stationary Hill equation gives a
/// nodeless amplitude; together with the phase mode it is a stationary
/// state of the full evolution.
#[test]
fn band_edge_state_is_stationary() {
    let c = PhysicalConstants::default();
    let me = MeParams::new(1.0, 0.2, 0.0);
    let amp = 0.3;
    let hill = hill_from_stationary(me, amp, 0.0, c).unwrap();
    assert!((hill.period - 2.0 * PI).abs() < 1e-15);
    let opts = FloquetOptions::default();
    let chart = floquet_analyze(&hill, (-0.5, 0.5), 40, &opts).unwrap();
    let edge = chart
        .edges
        .iter()
        .find(|e| e.kind == EdgeKind::Periodic)
        .expect("lowest periodic edge");
    let n = 16;
    let y = floquet_solution(&hill, edge.lambda, n, &opts).unwrap();
    assert!(y.iter().all(|v| *v > 0.0), "ground edge amplitude must be nodeless");

    // omega = 1, so z = x and the grid x_i = -pi + i dx is z_{i + n/2}
    let g = Grid::new(1, n, 2.0 * PI).unwrap();
    let with_phase = |a: f64| {
        ComplexField::from_vec(
            g,
            (0..n)
                .map(|i| Complex64::from_polar(y[(i + n / 2) % n], a * g.coord(0, i).sin()))
                .collect(),
        )
        .unwrap()
    };
    // every harmonic above the mode's own wavenumber is in the ill-posed
    // band here, so the window stays short
    let mut cfg = EvolutionConfig::new(Model::me(me), 1e-4, 0.02);
    cfg.observables = false;
    let drift_of = |psi: &ComplexField| {
        let end = evolve(psi, &cfg).unwrap();
        psi.density().max_abs_diff(&end.final_state().density()) / psi.density().max_abs()
    };
    let drift = drift_of(&with_phase(amp));
    let control = drift_of(&with_phase(0.6 * amp));
    assert!(drift <= 1e-5, "density drift {drift}");
    assert!(control >= 10.0 * drift, "control {control} vs {drift}");
}

#[test]
fn mode_period_scales_with_the_coupling() {
    let c = PhysicalConstants::new(1.1, 0.9).unwrap();
    for d1 in [0.05, 0.2, 0.8] {
        let mode = PhaseMode::new(MeParams::new(d1, 0.0, 0.0), c, 0.5, 0.1).unwrap();
        let omega = c.hbar / (d1 * c.mass);
        assert!((mode.period() - 2.0 * PI / omega.sqrt()).abs() <= 1e-12);
    }
}

#[test]
fn exponent_is_zero_at_periodic_edges_and_half_at_antiperiodic() {
    let chart = mathieu_chart(1.0, (-1.0, 2.5), 60).unwrap();
    let opts = FloquetOptions::default();
    for e in &chart.edges {
        let r = floquet_at(&HillEquation::mathieu(0.0, 1.0).unwrap(), e.lambda, &opts).unwrap();
        // nu T mod 2 pi is 0 at periodic and pi at antiperiodic edges
        let phase = (r.nu_real * PI).rem_euclid(2.0 * PI);
        let want = match e.kind {
            EdgeKind::Periodic => 0.0,
            EdgeKind::Antiperiodic => PI,
        };
        let d = (phase - want).abs().min(2.0 * PI - (phase - want).abs());
        assert!(d <= 1e-5, "edge {} phase {phase}", e.lambda);
        assert!(r.nu_imag <= 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trace_ignores_translation_and_reflection(
        q1 in -0.5f64..0.5,
        q2 in -0.5f64..0.5,
        p1 in -3.0f64..3.0,
        p2 in -3.0f64..3.0,
        shift in -3.0f64..3.0,
        lambda in -1.0f64..5.0,
    ) {
        let make = |a: f64, b: f64| {
            HillEquation::new(
                0.0,
                vec![Harmonic { k: 1, q: q1, phase: a }, Harmonic { k: 2, q: q2, phase: b }],
            )
            .unwrap()
        };
        let opts = FloquetOptions::default();
        let base = floquet_at(&make(p1, p2), lambda, &opts).unwrap();
        let moved = floquet_at(&make(p1 + shift, p2 + 2.0 * shift), lambda, &opts).unwrap();
        let mirrored = floquet_at(&make(-p1, -p2), lambda, &opts).unwrap();
        let scale = base.trace.abs().max(1.0);
        prop_assert!((base.trace - moved.trace).abs() <= 1e-9 * scale);
        prop_assert!((base.trace - mirrored.trace).abs() <= 1e-9 * scale);
        prop_assert!((base.det - 1.0).abs() <= 1e-10 * scale);
    }
}
