//! Pairings against a winding oracle computed from the probe's phases, and
//! the single-precision instantiation end to end.

use kkglue::homotopy::{verify_eq9, Eq9Options};
use kkglue::models::{
    circle_function, circle_toeplitz, discrete_winding, local_index_pairings,
    random_exact_scenario, CircleOptions, ExactParams,
};
use kkglue::surgery::{build_glued_module, AgreementSpec};
use kkglue::{Element, Scenario32};
use proptest::prelude::*;

/// `exp(i(k t + a sin t + b cos 2t))`: winding `k` with a smooth perturbation.
fn perturbed_probe(algebra: &kkglue::algebra::SiteAlgebra, k: i32, a: f64, b: f64) -> Element {
    circle_function(algebra, |t| {
        let phase = k as f64 * t + a * t.sin() + b * (2.0 * t).cos();
        (phase.cos(), phase.sin())
    })
}

#[test]
fn oracle_sees_the_nominal_winding() {
    let s = circle_toeplitz::<f64>(64, 0, 0, &CircleOptions::default()).unwrap();
    for k in -3..=3 {
        let u = perturbed_probe(&s.algebra, k, 0.7, -0.4);
        assert!((discrete_winding(&u) - k as f64).abs() <= 1e-9);
    }
    // A phase that turns back before completing a loop has winding zero.
    let u = circle_function::<f64>(&s.algebra, |t| {
        ((2.5 * t.sin()).cos(), (2.5 * t.sin()).sin())
    });
    assert!(discrete_winding(&u).abs() <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn pairing_is_minus_the_oracle_winding(k in -2i32..=2, m in -2i32..=2, a in -0.8f64..0.8, b in -0.5f64..0.5) {
        let s = circle_toeplitz::<f64>(128, m, 0, &CircleOptions::default()).unwrap();
        let (w, wt) = s.window.as_ref().unwrap();
        let u = perturbed_probe(&s.algebra, k, a, b);
        let oracle = -discrete_winding(&u);
        for (x, window) in [(&s.x, w), (&s.x_tilde, wt)] {
            let p = local_index_pairings(x, &[&u], window).unwrap()[0];
            prop_assert!((p - oracle).abs() <= 0.05, "pairing {p} vs oracle {oracle}");
        }
    }
}

#[test]
fn single_precision_exact_scenarios_glue() {
    for seed in 0..5 {
        let s: Scenario32 = random_exact_scenario(seed, &ExactParams::default()).unwrap();
        let spec = AgreementSpec {
            generators: s.j_gens.clone(),
            eps: 1e-4,
        };
        let gm = build_glued_module(&s.x, &s.x_tilde, &s.witness, &s.pu, &spec).unwrap();
        let r = gm.quotient_report();
        assert_eq!(r.kernel_dim, r.dim_h0, "seed {seed}");
        assert!(
            r.iota1_isometry <= 1e-4 && r.iota2_isometry <= 1e-4,
            "seed {seed}: {r:?}"
        );
    }
}

#[test]
fn single_precision_toeplitz_pairings_round_to_the_oracle() {
    let s: Scenario32 = circle_toeplitz(64, 1, -1, &CircleOptions::default()).unwrap();
    let (w, _) = s.window.as_ref().unwrap();
    let probes: Vec<_> = s.probes.iter().map(|p| &p.u).collect();
    let pairings = local_index_pairings(&s.x, &probes, w).unwrap();
    for (p, probe) in pairings.iter().zip(&s.probes) {
        assert_eq!(p.round() as i32, -probe.winding.unwrap(), "{p}");
    }
}

#[test]
fn single_precision_eq9_on_an_exact_scenario() {
    let mut s: Scenario32 = random_exact_scenario(2, &ExactParams::default()).unwrap();
    for key in ["eq2", "eq4", "eq10", "path"] {
        s.budgets.set(key, 1e-4).unwrap();
    }
    let v = verify_eq9(&s, &Eq9Options { samples: 11 }).unwrap();
    assert!(v.unitary_defect <= 1e-5, "{v:?}");
    assert!(v.eq10_norm <= 1e-4, "{v:?}");
    assert!(v.endpoint_exact);
    assert_eq!(v.modj_residual, 0.0);
}
