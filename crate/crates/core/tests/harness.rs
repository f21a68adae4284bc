//! Experiment plans, sweeps and their CSV output.

use std::collections::HashSet;

use robust_sbm::harness::{
    attack_graph, graph_instance, run_replicate, run_sweep, spearman, Attack, ExperimentPlan, CSV_HEADER,
    SCHEMA_VERSION,
};
use robust_sbm::instance::{NodeAttack, Z2Attack};
use robust_sbm::pipeline::{Mode, Preset};

fn tiny_plan() -> ExperimentPlan {
    ExperimentPlan {
        schema_version: SCHEMA_VERSION,
        mode: Mode::Sbm2,
        n: 120,
        k: 2,
        alpha: 1.0,
        ab_pairs: vec![(40.0, 5.0)],
        lambdas: Vec::new(),
        eps_grid: vec![0.0],
        attack: Attack::Node(NodeAttack::RewireOpposite),
        monotone: None,
        preset: Preset::Desk,
        replicates: 1,
        master_seed: 21,
        csv_path: None,
        trace_dir: None,
    }
}

#[test]
fn single_cell_sweep_writes_one_data_row_and_one_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let plan = ExperimentPlan {
        trace_dir: Some(dir.path().join("traces")),
        ..tiny_plan()
    };
    let result = run_sweep(&plan).unwrap();
    assert_eq!(result.rows.len(), 2);
    assert_eq!(result.failures(), 0);
    let (data, agg) = (&result.rows[0], &result.rows[1]);
    assert_eq!(data.replicate, "0");
    assert_eq!(agg.replicate, "agg");
    assert_eq!(agg.error, data.error);
    assert_eq!(agg.error_iqr, Some(0.0));
    let trace = data.trace_path.as_ref().expect("trace written");
    let rounds: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(trace).unwrap()).unwrap();
    assert!(rounds.is_array());

    let mut buf = Vec::new();
    result.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 2);
}

#[test]
fn rows_are_regenerable_from_their_seed() {
    let plan = tiny_plan();
    let result = run_sweep(&plan).unwrap();
    let row = &result.rows[0];
    let cell = plan.cells()[0];
    let again = run_replicate(&plan, &cell, row.seed).unwrap();
    assert_eq!(again.final_error, row.error);
    assert_eq!(again.rounds.len(), row.rounds_used.unwrap());
}

#[test]
fn plan_json_round_trips() {
    let plan = ExperimentPlan {
        ab_pairs: vec![(40.0, 5.0), (30.0, 10.0)],
        eps_grid: vec![0.0, 0.05],
        ..tiny_plan()
    };
    let text = serde_json::to_string(&plan).unwrap();
    let back: ExperimentPlan = serde_json::from_str(&text).unwrap();
    assert_eq!(plan, back);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.json");
    std::fs::write(&path, &text).unwrap();
    assert_eq!(ExperimentPlan::load(&path).unwrap(), plan);
}

#[test]
fn replicate_seeds_are_distinct() {
    let plan = ExperimentPlan {
        ab_pairs: vec![(40.0, 5.0), (30.0, 10.0), (25.0, 10.0)],
        eps_grid: vec![0.0, 0.02, 0.05],
        replicates: 20,
        ..tiny_plan()
    };
    let cells = plan.cells().len();
    assert_eq!(cells, 9);
    let seeds: HashSet<u64> = (0..cells)
        .flat_map(|c| (0..20).map(move |r| (c, r)))
        .map(|(c, r)| plan.replicate_seed(c, r))
        .collect();
    assert_eq!(seeds.len(), cells * 20);
}

#[test]
fn invalid_plans_are_rejected() {
    let bad = [
        ExperimentPlan {
            schema_version: 99,
            ..tiny_plan()
        },
        ExperimentPlan {
            attack: Attack::Z2(Z2Attack::Zero),
            ..tiny_plan()
        },
        ExperimentPlan {
            ab_pairs: vec![(5.0, 40.0)],
            ..tiny_plan()
        },
        ExperimentPlan {
            eps_grid: vec![1.5],
            ..tiny_plan()
        },
        ExperimentPlan {
            replicates: 0,
            ..tiny_plan()
        },
        ExperimentPlan {
            mode: Mode::Sbmk,
            ..tiny_plan()
        },
        ExperimentPlan {
            mode: Mode::Z2,
            attack: Attack::Z2(Z2Attack::FlipSign),
            ..tiny_plan()
        },
    ];
    for plan in bad {
        assert!(plan.validate().is_err(), "{plan:?}");
        assert!(run_sweep(&plan).is_err());
    }
    let mut value = serde_json::to_value(tiny_plan()).unwrap();
    value["surprise"] = serde_json::json!(1);
    assert!(serde_json::from_value::<ExperimentPlan>(value).is_err());
}

#[test]
fn attack_names_parse_back() {
    for name in ["rewire_opposite", "erase", "random_flip", "clique_plant_corrupt", "flip_sign", "zero", "noise"] {
        let a: Attack = name.parse().unwrap();
        assert_eq!(a.name(), name);
    }
    assert!("bogus".parse::<Attack>().is_err());
}

#[test]
fn instances_are_reproducible_from_seed() {
    let (g1, mut t1) = graph_instance(150, 2, 20.0, 4.0, 1.0, 8).unwrap();
    let (g2, mut t2) = graph_instance(150, 2, 20.0, 4.0, 1.0, 8).unwrap();
    assert_eq!(g1, g2);
    let h1 = attack_graph(&g1, &mut t1, NodeAttack::RewireOpposite, 0.05, None, 8).unwrap();
    let h2 = attack_graph(&g2, &mut t2, NodeAttack::RewireOpposite, 0.05, None, 8).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(t1, t2);
}

#[test]
fn spearman_handles_monotone_and_degenerate_data() {
    let x = [1.0, 2.0, 3.0, 4.0];
    assert!((spearman(&x, &[1.0, 4.0, 9.0, 16.0]) - 1.0).abs() < 1e-12);
    assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    assert_eq!(spearman(&x, &[2.0; 4]), 0.0);
    assert_eq!(spearman(&[1.0], &[1.0]), 0.0);
}
