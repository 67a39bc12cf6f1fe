use uos_core::bounds::theorem2_bound;
use uos_core::experiments::{
    estimate_width_ub, generate_signal, run_phase, PhaseConfig, ScenarioKind, ScenarioSpec,
};
use uos_core::solver::{Method, SolverConfig};

fn phase(kind: ScenarioKind, overlap: usize, n: usize, trials: usize) -> PhaseConfig {
    PhaseConfig {
        scenario: ScenarioSpec::new(kind, 40, 6, 4).with_overlap(overlap),
        n_values: vec![n],
        trials,
        methods: vec![Method::Glasso],
        seed: 8,
        solver: SolverConfig::default(),
        record_timing: false,
    }
}

#[test]
fn bound_is_sufficient_for_all_three_scenarios() {
    let n = theorem2_bound(40, 4, 6).unwrap().ceil() as usize;
    for (kind, overlap) in [
        (ScenarioKind::NoOverlap, 0),
        (ScenarioKind::PartialOverlap, 2),
        (ScenarioKind::RandomOverlap, 0),
    ] {
        let d = run_phase(&phase(kind, overlap, n, 20)).unwrap();
        let rate = d.cells[0].success_rate;
        assert!(rate >= 0.9, "{} at n = {n}: {rate}", kind.as_str());
    }
}

#[test]
fn csv_is_reproducible() {
    let cfg = phase(ScenarioKind::PartialOverlap, 3, 60, 4);
    let a = run_phase(&cfg).unwrap().to_csv_string().unwrap();
    let b = run_phase(&cfg).unwrap().to_csv_string().unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("trial,seed,n,method,scenario,rel_err,success,iters,runtime_ms"));
    assert_eq!(a.lines().count(), 5);
}

#[test]
fn width_sandwich_small() {
    let (sig, groups) = generate_signal(&ScenarioSpec::new(ScenarioKind::NoOverlap, 40, 6, 4).with_seed(1)).unwrap();
    let w = estimate_width_ub(&sig.vector(), &groups, 2000, 3).unwrap();
    let bound = theorem2_bound(40, 4, 6).unwrap();
    assert!(w.mean_dist_sq <= w.construction_mean);
    assert!(w.construction_mean <= bound + 3.0 * w.construction_stderr);
}

#[test]
fn success_rates_are_probabilities() {
    let d = run_phase(&PhaseConfig {
        n_values: vec![20, 80],
        methods: vec![Method::Glasso, Method::Lasso],
        ..phase(ScenarioKind::NoOverlap, 0, 0, 3)
    })
    .unwrap();
    assert_eq!(d.cells.len(), 4);
    for c in &d.cells {
        assert!((0.0..=1.0).contains(&c.success_rate) && c.trials == 3);
    }
}
