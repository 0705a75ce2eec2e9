//! Simulation outcomes of the reference systems at horizons long enough for
//! the slowest agreeing mode to settle. The slow rates are 0.293 (system 3,
//! λ = 1), 0.438 (system 4, λ = 1) and 0.245 (system 5, λ = 1).

mod common;

use common::{example, Example};
use swarm_core::simulate::{
    assemble, empirical_clusters, integrate, limit_dynamics_check, pair_agreement, pairwise_gap,
    seeded_initial_state, IntegrateOptions, TrajectoryRecord, DEFAULT_DT, DEFAULT_REL_TOL,
    DEFAULT_WINDOW_FRACTION,
};
use swarm_core::spectral::spectral_report;
use swarm_core::VertexSet;

fn vs(ids: &[usize]) -> VertexSet {
    VertexSet::new(ids.iter().copied()).unwrap()
}

fn run(ex: &Example, t_end: f64) -> TrajectoryRecord {
    let sys = assemble(&ex.a, &ex.f, &ex.graph.laplacian()).unwrap();
    let x0 = seeded_initial_state(ex.graph.n(), 2, 42);
    let t = integrate(&sys, &x0, DEFAULT_DT, t_end, IntegrateOptions::default()).unwrap();
    assert!(!t.truncated);
    t
}

/// Slowest decay rate among the Hurwitz nonzero-λ pencils.
fn slowest_agreeing_rate(ex: &Example) -> f64 {
    let r = spectral_report(&ex.a, &ex.f, &ex.graph.laplacian()).unwrap();
    r.nonzero_entries()
        .map(|e| e.verdict.max_real_part)
        .filter(|&m| m < 0.0)
        .map(|m| -m)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn slow_rates_explain_the_short_horizon_gaps() {
    for (k, rate) in [(3, 0.2929), (4, 0.4384), (5, 0.2450)] {
        assert!((slowest_agreeing_rate(&example(k)) - rate).abs() < 1e-3);
    }
    // gap decay e^{-rate·t} at the short horizons stays far above 1e-2
    let ex = example(3);
    let t = run(&ex, ex.t_end);
    let g = pairwise_gap(&t, 3, 5).unwrap();
    let ratio = g.last().unwrap() / g[0];
    assert!(ratio > 0.5 * (-0.2929f64 * ex.t_end).exp() && ratio > 1e-2);
}

#[test]
fn stable_split_system_settles_by_t30() {
    let ex = example(3);
    let t = run(&ex, 30.0);
    for (i, j) in [(3, 5), (4, 6)] {
        let g = pairwise_gap(&t, i, j).unwrap();
        assert!(g.last().unwrap() < &(1e-2 * g[0]), "pair ({i},{j})");
    }
    for id in [3, 5] {
        assert!(t.agent_state(t.len() - 1, id).amax() < 0.05);
    }
    let p = pair_agreement(&t, 2, 4, DEFAULT_REL_TOL, DEFAULT_WINDOW_FRACTION).unwrap();
    assert!(!p.agrees);
    let r = limit_dynamics_check(&t, &vs(&[3, 5]), &ex.a).unwrap();
    let peak = r.iter().copied().fold(0.0, f64::max);
    assert!(r.last().unwrap() < &(1e-2 * peak));
}

#[test]
fn unstable_split_system_clusters_by_t16() {
    let ex = example(4);
    let t = run(&ex, 16.0);
    let p = empirical_clusters(&t, DEFAULT_REL_TOL, DEFAULT_WINDOW_FRACTION).unwrap();
    assert!(p.contains(&vs(&[2, 4, 6])), "{p:?}");
    assert!(t.agent_state(t.len() - 1, 2).norm() > t.agent_state(0, 2).norm());
    let r = limit_dynamics_check(&t, &vs(&[2, 4, 6]), &ex.a).unwrap();
    let peak = r.iter().copied().fold(0.0, f64::max);
    assert!(r.last().unwrap() < &(1e-2 * peak));
}

#[test]
fn class3_system_splits_into_groups_by_t40() {
    let ex = example(5);
    let t = run(&ex, 40.0);
    let p = empirical_clusters(&t, DEFAULT_REL_TOL, DEFAULT_WINDOW_FRACTION).unwrap();
    assert_eq!(p, vec![vs(&[1]), vs(&[2, 4, 6]), vs(&[3, 5])]);
}
