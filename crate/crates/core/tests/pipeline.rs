use std::collections::{BTreeMap, BTreeSet};

use gridsafe::dtmc::{export_explicit, import_explicit, Dtmc, Edge, COLLISION_STATE, GRID_CHAIN_STATES};
use gridsafe::harness::{run_experiment, verify_pipeline, ExperimentConfig, DEFAULT_PROPERTIES};
use gridsafe::learners::AdversaryKind;
use gridsafe::pctl::{check, parse};

fn gamblers_ruin(n: usize, start: usize, p: f64) -> Dtmc {
    let mut edges = vec![];
    for s in 1..n {
        edges.push(Edge { src: s, dst: s + 1, prob: p });
        edges.push(Edge { src: s, dst: s - 1, prob: 1.0 - p });
    }
    let labels = BTreeMap::from([
        ("init".to_string(), BTreeSet::from([start])),
        ("goal".to_string(), BTreeSet::from([n])),
    ]);
    Dtmc::new(n + 1, start, edges, labels).unwrap()
}

#[test]
fn ruin_probability_matches_closed_form() {
    let (n, start, p) = (6, 3, 0.4);
    let d = gamblers_ruin(n, start, p);
    let r = (1.0 - p) / p;
    let expected = (1.0 - r.powi(start as i32)) / (1.0 - r.powi(n as i32));
    let res = check(&d, &parse("P=? [ F goal ]").unwrap()).unwrap();
    assert!((res.initial_probability().unwrap() - expected).abs() < 1e-8);

    let bounded = check(&d, &parse("P=? [ F<=3 goal ]").unwrap()).unwrap();
    assert!((bounded.initial_probability().unwrap() - p.powi(3)).abs() < 1e-12);
}

#[test]
fn patrol_pipeline_end_to_end() {
    let config = ExperimentConfig {
        runs: 2,
        episodes: 300,
        adversary: AdversaryKind::Patrol5,
        agent_observations: true,
        jobs: 2,
        ..ExperimentConfig::default()
    };
    let (exp, report) = verify_pipeline(&config, &DEFAULT_PROPERTIES).unwrap();
    assert_eq!(report.outcomes.len(), 2);

    let dir = tempfile::tempdir().unwrap();
    exp.write_artifacts(dir.path()).unwrap();
    for r in &exp.results {
        let d = r.dtmc.as_ref().unwrap();
        assert_eq!(d.n_states(), GRID_CHAIN_STATES);
        assert!(d.label("collision").unwrap().contains(&COLLISION_STATE));

        let back = import_explicit(&dir.path().join(format!("chains/run_{:03}", r.run_index))).unwrap();
        for p in DEFAULT_PROPERTIES {
            let f = parse(p).unwrap();
            let (a, b) = (check(d, &f).unwrap(), check(&back, &f).unwrap());
            assert_eq!(a.initial_holds(), b.initial_holds());
            let (pa, pb) = (a.initial_probability(), b.initial_probability());
            assert!(pa.zip(pb).is_none_or(|(x, y)| (x - y).abs() < 1e-9));
        }
    }
}

#[test]
fn master_seed_changes_results() {
    let base = ExperimentConfig {
        runs: 1,
        episodes: 50,
        ..ExperimentConfig::default()
    };
    let a = run_experiment(&base, false).unwrap();
    let b = run_experiment(&base, false).unwrap();
    let c = run_experiment(&ExperimentConfig { master_seed: 9, ..base }, false).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_ne!(a.results[0].world.agent.q, c.results[0].world.agent.q);
}

#[test]
fn exported_chain_reimports_exactly() {
    let d = gamblers_ruin(4, 2, 0.25);
    let dir = tempfile::tempdir().unwrap();
    export_explicit(&d, &dir.path().join("ruin")).unwrap();
    assert_eq!(import_explicit(&dir.path().join("ruin")).unwrap(), d);
}
