//! Unit-fidelity yield programs against frozen single-photon bounds from an
//! external LP solver (HiGHS via scipy), on Poisson statistics and the
//! default fiber channel.

use mfqkd::channel::{point_observation, reference_yield, ChannelParams};
use mfqkd::lp::{build_yield_lp, DecoyCoinInputs};
use mfqkd::validation::textbook_decoy_y1;

const CASES: [(f64, [f64; 3], f64); 6] = [
    (25.0, [0.5, 0.1, 1e-4], 0.30945362165093676),
    (25.0, [0.8, 0.2, 0.01], 0.29021983343218266),
    (50.0, [0.5, 0.1, 1e-4], 0.0972508164662706),
    (50.0, [0.8, 0.2, 0.01], 0.08929271170554687),
    (100.0, [0.5, 0.1, 1e-4], 0.009696751669631671),
    (100.0, [0.8, 0.2, 0.01], 0.008792332482605573),
];

fn poisson(mu: f64) -> Vec<f64> {
    (0..5u32).map(|n| (-mu).exp() * mu.powi(n as i32) / (1..=n).map(f64::from).product::<f64>()).collect()
}

fn inputs(distance_km: f64, mus: [f64; 3]) -> DecoyCoinInputs {
    let ch = ChannelParams::at_distance(distance_km);
    let eta = ch.transmittance();
    let yields: Vec<f64> = (0..5).map(|n| reference_yield(n, eta, ch.p_dark)).collect();
    DecoyCoinInputs {
        label: "Z".into(),
        observed: mus.map(|m| point_observation(eta * m, 0.0, ch.p_dark).gain),
        p_n: mus.map(poisson),
        fidelity: vec![[[1.0; 3]; 3]; 5],
        reference: [yields.clone(), yields.clone(), yields],
    }
}

#[test]
fn yield_program_matches_external_solver() {
    for (d, mus, expected) in CASES {
        let y1 = build_yield_lp(&inputs(d, mus)).unwrap().solve().unwrap().optimum("Y1").unwrap();
        assert!((y1 - expected).abs() < 1e-6, "{d} km {mus:?}: {y1} vs {expected}");
    }
}

#[test]
fn vertex_solver_matches_external_solver() {
    for (d, mus, expected) in CASES {
        let inp = inputs(d, mus);
        let y1 = textbook_decoy_y1(&inp.p_n, inp.observed).unwrap();
        assert!((y1 - expected).abs() < 1e-6, "{d} km {mus:?}: {y1} vs {expected}");
    }
}

#[test]
fn bound_never_exceeds_true_single_photon_yield() {
    for (d, mus, _) in CASES {
        let ch = ChannelParams::at_distance(d);
        let y1 = build_yield_lp(&inputs(d, mus)).unwrap().solve().unwrap().optimum("Y1").unwrap();
        assert!(y1 <= reference_yield(1, ch.transmittance(), ch.p_dark) + 1e-9);
    }
}
