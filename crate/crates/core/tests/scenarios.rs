//! End-to-end scenarios on the bundled maps.

use qloc_core::classical::{mcl_localize, MclConfig};
use qloc_core::gridmap::{perceive_at, GridMap};
use qloc_core::grover2d::{
    build_circuit, ideal_success_probability, plan, run_localization, Mode, RunOptions,
    SearchProblem,
};
use qloc_core::statevec::StateVector;

fn bundled(name: &str) -> GridMap {
    let path = format!("{}/../../maps/{name}", env!("CARGO_MANIFEST_DIR"));
    GridMap::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn search_distribution(problem: &SearchProblem, mode: Mode) -> Vec<f64> {
    let p = plan(problem, mode).unwrap();
    let mut state = StateVector::new(p.width(), 26).unwrap();
    state
        .apply_circuit_with_errors(&build_circuit(&p, problem), &[])
        .unwrap();
    state.marginal(&p.measured())
}

#[test]
fn folded_and_faithful_runs_share_a_distribution() {
    for name in ["fig21_1x2.txt", "fig21_2x2.txt", "fig21_3x3.txt"] {
        let problem = SearchProblem::obstacle_search(&bundled(name));
        let a = search_distribution(&problem, Mode::Folded);
        let b = search_distribution(&problem, Mode::Faithful);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "{name}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn fig17_particles_settle_on_the_robot() {
    let map = bundled("fig17_4x5.txt");
    let robot = map.robot().unwrap();
    let result = mcl_localize(&map, robot, &MclConfig::default(), 0).unwrap();
    assert_eq!(result.estimate, result.true_cell);
    // the first snapshot is spread out, the last one concentrated
    let share = |k: usize| {
        let snap = &result.history[k];
        snap.particles
            .particles()
            .iter()
            .filter(|p| p.cell == snap.robot)
            .map(|p| p.weight)
            .sum::<f64>()
    };
    assert!(share(result.history.len() - 1) >= share(0));
}

#[test]
fn unique_map_signatures_are_distinct() {
    for name in ["unique_4x5.txt", "compare_6x6.txt"] {
        let map = bundled(name);
        let mut seen = std::collections::HashSet::new();
        for cell in map.free_cells() {
            assert!(
                seen.insert(perceive_at(&map, cell).unwrap()),
                "{name}: {cell}"
            );
        }
    }
}

#[test]
fn unique_map_localizes_every_start() {
    let map = bundled("unique_4x5.txt");
    for cell in map.free_cells() {
        let problem = SearchProblem::from_map(&map.with_robot(Some(cell)).unwrap()).unwrap();
        let options = RunOptions {
            shots: 256,
            seed: 3,
            ..RunOptions::default()
        };
        let report = run_localization(&problem, Mode::Folded, &options).unwrap();
        assert_eq!(report.confirmed.map(|a| a.pose), Some(cell));
    }
}

#[test]
fn compare_map_grover_probability() {
    let map = bundled("compare_6x6.txt");
    let problem = SearchProblem::from_map(&map).unwrap();
    let options = RunOptions {
        shots: 10_000,
        seed: 9,
        ..RunOptions::default()
    };
    let report = run_localization(&problem, Mode::Folded, &options).unwrap();
    assert_eq!(report.plan.n, 16);
    let p = ideal_success_probability(16, 1, report.plan.repetitions as u64);
    let sigma = (p * (1.0 - p) / 10_000.0).sqrt();
    assert!((report.confirmed_frequency - p).abs() <= 3.0 * sigma);
    assert_eq!(report.decoded.map(|a| a.pose), map.robot());
}

#[test]
fn six_positions_use_the_padded_register() {
    // N = 6 sits in a 3-qubit register, so the law is evaluated on 8 states
    let map = GridMap::parse("rows=2 cols=3 q=1 range=1\n...\n..#\n").unwrap();
    let problem = SearchProblem::obstacle_search(&map);
    let options = RunOptions {
        shots: 10_000,
        seed: 6,
        ..RunOptions::default()
    };
    let report = run_localization(&problem, Mode::Folded, &options).unwrap();
    let padded = ideal_success_probability(8, 1, 2);
    assert_eq!(report.ideal_success_probability, Some(padded));
    assert!((report.confirmed_frequency - padded).abs() < 0.02);
    // the six-state closed form differs
    assert!((ideal_success_probability(6, 1, 2) - 0.743).abs() < 5e-4);
}
