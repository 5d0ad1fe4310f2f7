use mfqkd::bounds::{g_bound, lcs_tangent_shifted, Side};
use mfqkd::linalg::{fidelity, HermitianMatrix, C64};
use mfqkd::lp::solve_by_vertex_enumeration;
use mfqkd::passive::{invert_phases, target_from_phases, wrap_pi, BranchSigns};
use mfqkd::validation::random_program;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

fn density(entries: &[(f64, f64)], dim: usize) -> HermitianMatrix {
    let v: Vec<C64> = entries.iter().take(dim).map(|&(a, b)| C64::new(a, b)).collect();
    let w: Vec<C64> = entries.iter().skip(dim).take(dim).map(|&(a, b)| C64::new(b, a)).collect();
    let mut m = HermitianMatrix::outer(&v, 0.7);
    m.add_scaled(&HermitianMatrix::outer(&w, 0.3), 1.0);
    let t = m.trace();
    m.scaled(1.0 / t)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, max_global_rejects: 1_000_000, ..ProptestConfig::default() })]

    #[test]
    fn coin_envelopes_bracket_the_known_yield(y in 0.0f64..=1.0, z in 0.0f64..=1.0) {
        let lo = g_bound(y, z, Side::L).unwrap();
        let hi = g_bound(y, z, Side::U).unwrap();
        prop_assert!(lo <= y + 1e-12 && y <= hi + 1e-12);
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
    }

    #[test]
    fn tangents_stay_on_the_safe_side(z in 0.0f64..=1.0, y_ref in 0.0f64..=1.0) {
        for side in [Side::L, Side::U] {
            prop_assert!(lcs_tangent_shifted(z, y_ref, side).unwrap().max_violation(200) <= 1e-12);
        }
    }

    #[test]
    fn phase_inversion_roundtrips(ph in prop::array::uniform4(0.0f64..TAU), mu_max in 0.05f64..2.0) {
        let p = target_from_phases(ph, mu_max);
        let sign = |x: f64| if wrap_pi(x) >= 0.0 { 1i8 } else { -1 };
        let s = BranchSigns { s_e: sign(ph[0] - ph[1]), s_l: sign(ph[2] - ph[3]) };
        let back = invert_phases(&p, p.phi_e, s, mu_max).unwrap();
        for k in 0..4 {
            prop_assert!(wrap_pi(back[k] - ph[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(
        a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
        b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
    ) {
        prop_assume!(a.iter().chain(&b).map(|p| p.0.abs() + p.1.abs()).sum::<f64>() > 0.5);
        let (r, s) = (density(&a, 4), density(&b, 4));
        let f = fidelity(&r, &s).unwrap();
        prop_assert!((f - fidelity(&s, &r).unwrap()).abs() < 1e-9);
        prop_assert!((-1e-12..=1.0 + 1e-9).contains(&f));
        prop_assert!((fidelity(&r, &r).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn simplex_agrees_with_vertex_enumeration(seed in any::<u64>()) {
        let lp = random_program(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assume!(lp.vars.len() <= 6);
        let a = lp.solve().unwrap();
        let b = solve_by_vertex_enumeration(&lp).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert!((a.objective - b.objective).abs() <= 1e-7 * (1.0 + b.objective.abs()));
    }
}
