//! Quantile-regression solver against independent references: exhaustive
//! basic-solution enumeration on small instances, and subgradient optimality
//! on random ones.

mod common;

use common::{exhaustive_tick_min, random_qr_instance, subgradient_optimal, total_tick_loss};
use faqar::qar::fit_quantile_design;
use faqar::rng::Streams;

#[test]
fn solver_matches_exhaustive_vertex_search_on_small_instances() {
    let streams = Streams::new(914);
    let mut checked = 0;
    for index in 0..40u64 {
        let t_eff = 4 + (index as usize % 9); // 4..=12
        let d = 1 + (index as usize % 2); // 1..=2
        let inst = random_qr_instance(&streams, index, t_eff, d);
        let fit = fit_quantile_design(inst.design.view(), &inst.response, inst.tau)
            .expect("solver");
        let attained = total_tick_loss(
            &inst.response,
            inst.design.view(),
            inst.tau,
            &fit.coefficients,
        );
        let best = exhaustive_tick_min(&inst.response, inst.design.view(), inst.tau);
        assert!(
            (attained - best).abs() <= 1e-9 * (1.0 + best.abs()),
            "instance {index}: solver loss {attained} vs exhaustive {best}"
        );
        checked += 1;
    }
    assert_eq!(checked, 40);
}

#[test]
fn solver_satisfies_subgradient_optimality_on_random_instances() {
    let streams = Streams::new(915);
    for index in 0..200u64 {
        let t_eff = 15 + (index as usize % 40);
        let d = 1 + (index as usize % 4);
        let inst = random_qr_instance(&streams, index, t_eff, d);
        let fit = fit_quantile_design(inst.design.view(), &inst.response, inst.tau)
            .expect("solver");
        assert!(
            subgradient_optimal(
                &inst.response,
                inst.design.view(),
                inst.tau,
                &fit.coefficients,
                1e-7,
                1e-7,
            ),
            "instance {index} (t_eff {t_eff}, d {d}, tau {}) fails optimality",
            inst.tau
        );
    }
}

#[test]
fn extreme_quantile_levels_stay_optimal() {
    let streams = Streams::new(916);
    for (index, &tau) in [0.01, 0.05, 0.95, 0.99].iter().enumerate() {
        let inst = random_qr_instance(&streams, index as u64, 60, 3);
        let fit = fit_quantile_design(inst.design.view(), &inst.response, tau).expect("solver");
        assert!(
            subgradient_optimal(
                &inst.response,
                inst.design.view(),
                tau,
                &fit.coefficients,
                1e-7,
                1e-7
            ),
            "tau {tau} fails optimality"
        );
    }
}
