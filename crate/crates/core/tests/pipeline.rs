use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use confcause::dataset::{load_dataset, Role};
use confcause::effects::diagnose;
use confcause::model::{learn, update_model, LearnConfig};
use confcause::synth::{evaluate_prediction, generate_scm, Fault, Prediction, ScmConfig};

fn sample(seed: u64, n: usize) -> confcause::dataset::Dataset {
    let mut cfg = ScmConfig::new(5, 4, 2, 0.3, 1.0, seed);
    cfg.boolean_objectives = true;
    generate_scm(&cfg).unwrap().sample_with_seed(n, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn learned_models_are_complete_and_respect_roles(seed in 0u64..10_000) {
        let ds = sample(seed, 1500);
        let model = learn(&ds, &LearnConfig::default()).unwrap();
        let g = &model.admg;
        prop_assert!(g.is_acyclic());
        prop_assert_eq!(g.directed().len() + g.bidirected().len(), model.pag.edge_count());
        prop_assert_eq!(g.skeleton(), model.pag.skeleton());
        for &(u, v) in g.directed() {
            prop_assert!(g.role(v) != Role::ManipulableOption, "edge into option {}", g.name(v));
            prop_assert!(g.role(u) != Role::PerformanceObjective, "edge out of objective {}", g.name(u));
        }
        for &(u, v) in g.skeleton().iter() {
            prop_assert!(!(g.role(u) == Role::ManipulableOption && g.role(v) == Role::ManipulableOption));
        }
    }

    #[test]
    fn evaluation_counts_partition_the_universe(
        predicted in proptest::collection::btree_set(0usize..12, 0..6),
        truth in proptest::collection::btree_set(0usize..12, 0..6),
        effect in -3.0f64..3.0,
    ) {
        let universe: Vec<String> = (0..12).map(|i| format!("o{i}")).collect();
        let fault = Fault {
            objective: "y".into(),
            fault_rows: vec![],
            true_root_causes: truth.iter().map(|&i| universe[i].clone()).collect(),
            true_effects: truth.iter().map(|&i| (universe[i].clone(), 1.0)).collect(),
        };
        let pred = Prediction {
            objective: "y".into(),
            root_causes: predicted.iter().map(|&i| universe[i].clone()).collect(),
            effects: predicted.iter().map(|&i| (universe[i].clone(), effect)).collect(),
        };
        let r = evaluate_prediction(&pred, &fault, &universe).unwrap();
        prop_assert_eq!(r.tp + r.fp + r.tn + r.fn_, universe.len());
        prop_assert_eq!(r.tp, predicted.intersection(&truth).count());
        for m in [r.accuracy, r.precision, r.recall, r.f1] {
            prop_assert!((0.0..=1.0).contains(&m));
        }
        prop_assert!(r.rmse >= 0.0);
    }
}

#[test]
fn table_round_trips_through_text() {
    let ds = sample(5, 300);
    let mut table = Vec::new();
    ds.write_table(&mut table).unwrap();
    let roles = serde_json::to_vec(&ds.roles_json()).unwrap();
    let back = load_dataset(table.as_slice(), roles.as_slice()).unwrap();
    assert_eq!(back.names(), ds.names());
    for i in 0..ds.n_vars() {
        assert_eq!(back.column(i), ds.column(i));
        assert_eq!(back.meta(i).role, ds.meta(i).role);
    }
}

#[test]
fn diagnosis_ranks_option_rooted_paths() {
    let ds = sample(7, 3000);
    let model = learn(&ds, &LearnConfig::default()).unwrap();
    let d = diagnose(&ds, &model.admg, "y0", 5).unwrap();
    assert!(!d.ranked_paths.is_empty() && d.ranked_paths.len() <= 5);
    for w in d.ranked_paths.windows(2) {
        assert!(w[0].path_ace >= w[1].path_ace);
    }
    let mut seen = BTreeSet::new();
    let mut origins = Vec::new();
    for p in &d.ranked_paths {
        let first = model.admg.require(&p.vertices[0]).unwrap();
        assert_eq!(model.admg.role(first), Role::ManipulableOption);
        assert_eq!(p.vertices.last().unwrap(), "y0");
        assert_eq!(p.edge_aces.len(), p.vertices.len() - 1);
        if seen.insert(p.vertices[0].clone()) {
            origins.push(p.vertices[0].clone());
        }
    }
    assert_eq!(d.root_causes, origins);
    let effects: BTreeSet<&String> = d.root_cause_effects.keys().collect();
    assert_eq!(effects, d.root_causes.iter().collect());
}

#[test]
fn empty_update_keeps_the_model() {
    let ds = sample(9, 1000);
    let cfg = LearnConfig::default();
    let model = learn(&ds, &cfg).unwrap();
    let empty = ds.select_rows(&[]);
    let same = update_model(&model, &ds, &empty, &cfg).unwrap();
    assert_eq!(same.admg.directed(), model.admg.directed());
    assert_eq!(same.admg.bidirected(), model.admg.bidirected());
}

#[test]
fn learning_is_deterministic() {
    let ds = sample(11, 2000);
    let a = learn(&ds, &LearnConfig::default()).unwrap();
    let b = learn(&ds, &LearnConfig::default()).unwrap();
    assert_eq!(serde_json::to_string(&a.admg).unwrap(), serde_json::to_string(&b.admg).unwrap());
    let decisions: BTreeMap<_, _> = a.decisions.iter().map(|d| ((d.u.clone(), d.v.clone()), d.emitted.clone())).collect();
    assert_eq!(decisions.len(), a.pag.edge_count());
}
