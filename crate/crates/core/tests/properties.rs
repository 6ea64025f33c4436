use std::collections::BTreeMap;
use std::path::Path;

use proptest::prelude::*;

use uql::experiment::results::read_aggregate_csv;
use uql::experiment::{read_seed_csv, run_experiment, RunConfig, RunOptions};
use uql::oracle::value_iteration;
use uql::{build_gridworld, Gridworld, GridworldSpec};

fn configs_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn bundled_configs_load_validate_and_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() == "gridworld_env.cfg" {
            assert!(uql::experiment::EnvConfig::load(&path).is_ok());
            continue;
        }
        let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg, "{}", path.display());
        for (_, v) in cfg.expand_variants().unwrap() {
            v.validate().unwrap();
        }
        seen += 1;
    }
    assert!(seen >= 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn config_round_trip(
        updates in 0u64..1_000_000,
        seeds in proptest::collection::vec(0u64..1000, 1..5),
        k in 2usize..30,
        kappa in prop_oneof![Just(f64::INFINITY), 0.01f64..10.0],
        alpha in 0.001f64..1.0,
        slip in 0.0f64..1.0,
        algo in prop_oneof![Just("uql"), Just("q-learning"), Just("double-q"), Just("ensemble-mean"), Just("sql-fixed-beta")],
    ) {
        let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
        let text = format!(
            "algorithm = \"{algo}\"\nnum_updates = {updates}\nseeds = [{}]\n\
             [environment]\nkind = \"gridworld\"\nslip_prob = {slip:?}\n\
             [agent]\nensemble_size = {k}\nlearning_rate = {{ kind = \"constant\", alpha = {alpha:?} }}\n\
             [agent.solver]\nkappa = {}\n",
            seeds.join(", "),
            if kappa.is_infinite() { "inf".to_string() } else { format!("{kappa:?}") },
        );
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        prop_assert_eq!(again, cfg);
    }
}

#[test]
fn aggregates_match_recomputation_from_seed_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml_str(
        "num_updates = 500\nseeds = [3, 4, 5]\nrecord_interval = 100\nprobe_cells = [[0, 2], [3, 3]]\n\
         [agent]\nensemble_size = 4\ninit = { kind = \"uniform\", low = 0.0, high = 1.0 }\n",
    )
    .unwrap();
    run_experiment(&cfg, &RunOptions { output_dir: Some(tmp.path().into()), ..Default::default() }).unwrap();
    let mut groups: BTreeMap<(u64, String), Vec<f64>> = BTreeMap::new();
    for seed in [3, 4, 5] {
        for r in read_seed_csv(&tmp.path().join(format!("seed_{seed}.csv"))).unwrap() {
            groups.entry((r.step, r.metric)).or_default().push(r.value);
        }
    }
    let agg = read_aggregate_csv(&tmp.path().join("aggregate.csv")).unwrap();
    assert_eq!(agg.len(), groups.len());
    for row in agg {
        let xs = &groups[&(row.step, row.metric.clone())];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert_eq!(row.count, xs.len());
        assert!((row.mean - mean).abs() <= 1e-12, "{}", row.metric);
        assert!((row.std - std).abs() <= 1e-12, "{}", row.metric);
    }
}

#[test]
fn same_config_and_seed_give_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = RunConfig::load(&configs_dir().join("online.cfg")).unwrap();
    let mut cfg = cfg;
    cfg.num_updates = 2000;
    cfg.seeds = vec![1];
    for d in [&a, &b] {
        run_experiment(&cfg, &RunOptions { output_dir: Some(d.path().into()), ..Default::default() }).unwrap();
    }
    for f in ["seed_1.csv", "aggregate.csv", "final_q.csv", "manifest.toml"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn optimal_values_climb_toward_the_goal() {
    let world = Gridworld::build(&GridworldSpec::default()).unwrap();
    let truth = value_iteration(&world.mdp, 1e-12);
    // Neighbor structure from the slip-free version of the same map.
    let det = build_gridworld(&GridworldSpec { slip_prob: 0.0, ..GridworldSpec::default() }).unwrap();
    let goal = world.layout.goal;
    for start in det.non_terminal_states().iter().copied() {
        let mut s = start;
        let mut steps = 0;
        while s != goal {
            let neighbors: Vec<usize> =
                (0..det.num_actions()).flat_map(|a| det.successors(s, a).map(|(n, _)| n).collect::<Vec<_>>()).collect();
            // The goal is terminal with value zero, so step into it when adjacent.
            let next = if neighbors.contains(&goal) {
                goal
            } else {
                neighbors.into_iter().max_by(|x, y| truth.v_star[*x].total_cmp(&truth.v_star[*y])).unwrap()
            };
            assert!(next == goal || truth.v_star[next] > truth.v_star[s], "no ascent from {s}");
            s = next;
            steps += 1;
            assert!(steps <= det.num_states());
        }
    }
}
