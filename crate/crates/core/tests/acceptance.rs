//! Acceptance criteria A1-A10. Runs as a plain binary so that every
//! criterion prints one PASS/FAIL line; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use uql::agent::{run_uniform_update_phase, AgentConfig, InitValue, Learner, UqlAgent};
use uql::baselines::{BaselineKind, BaselineLearner};
use uql::experiment::results::{early_mean_per_seed, final_per_seed, read_seed_csv, ResultRow};
use uql::experiment::{run_experiment, run_seed, sweep, RunConfig, RunOptions, RunSummary};
use uql::mdp::random_mdp;
use uql::oracle::{soft_bellman_backup, value_iteration};
use uql::qtable::{spread, QTable};
use uql::soft::{discrepancy, mellowmax, solve_beta_detailed, BetaSolverConfig, PriorPolicy};
use uql::{build_gridworld, GridworldSpec};

const EARLY: u64 = 2000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn config(name: &str) -> RunConfig {
    RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)).expect("bundled config")
}

fn opts(dir: &Path) -> RunOptions {
    RunOptions { output_dir: Some(dir.to_path_buf()), ..Default::default() }
}

fn rows(summary: &RunSummary, variant: &str) -> Vec<ResultRow> {
    let v = summary.variant(variant).unwrap_or_else(|| panic!("variant {variant}"));
    v.seeds
        .iter()
        .flat_map(|s| read_seed_csv(&v.dir.join(s.file.as_ref().expect("seed ran"))).expect("seed csv"))
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

fn values(m: &BTreeMap<u64, f64>) -> Vec<f64> {
    m.values().copied().collect()
}

/// Two-sided paired t-test p-value.
fn paired_p(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let t = mean(&d) / (sample_std(&d) / (d.len() as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, d.len() as f64 - 1.0).expect("df > 0");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

fn fig2_pair(tmp: &Path) -> (RunSummary, Duration) {
    let mut cfg = config("gridworld_fig2.cfg");
    cfg.variants.retain(|v| v.name == "q-learning" || v.name == "uql-kappa0.5");
    let start = Instant::now();
    let summary = run_experiment(&cfg, &opts(tmp)).expect("fig2 run");
    (summary, start.elapsed())
}

fn a1(summary: &RunSummary, elapsed: Duration) -> Outcome {
    let q = early_mean_per_seed(&rows(summary, "q-learning"), "bias_mean", EARLY);
    let u = early_mean_per_seed(&rows(summary, "uql-kappa0.5"), "bias_mean", EARLY);
    assert_eq!(q.keys().collect::<Vec<_>>(), u.keys().collect::<Vec<_>>());
    let (q, u) = (values(&q), values(&u));
    let p = paired_p(&q, &u);
    let passed = q.len() == 10 && mean(&q) > 0.0 && mean(&q) > mean(&u) && p < 0.05 && elapsed.as_secs() <= 120;
    outcome(
        passed,
        format!(
            "early bias Q-learning {:+.4}, UQL(0.5) {:+.4}, paired p = {p:.2e}, {:.1}s",
            mean(&q),
            mean(&u),
            elapsed.as_secs_f64()
        ),
    )
}

fn a3(summary: &RunSummary) -> Outcome {
    let q = mean(&values(&final_per_seed(&rows(summary, "q-learning"), "policy_agreement")));
    let u = mean(&values(&final_per_seed(&rows(summary, "uql-kappa0.5"), "policy_agreement")));
    outcome(u >= q, format!("agreement at 1e4 updates: UQL(0.5) {u:.3}, Q-learning {q:.3}"))
}

fn a2(tmp: &Path) -> Outcome {
    let values_k = ["0.1", "0.5", "1", "2", "inf"];
    let s = sweep(&config("kappa_sweep.cfg"), "agent.solver.kappa", &values_k.map(String::from), &opts(tmp))
        .expect("kappa sweep");
    let stats: Vec<(f64, f64)> = s
        .points
        .iter()
        .map(|(_, run)| {
            let e = values(&early_mean_per_seed(&rows(run, ""), "bias_mean", EARLY));
            (mean(&e), sample_std(&e))
        })
        .collect();
    let mut inversions = 0;
    let mut within = true;
    for w in stats.windows(2) {
        if w[1].0 < w[0].0 {
            inversions += 1;
            within &= w[0].0 - w[1].0 <= w[0].1.max(w[1].1);
        }
    }
    let line: Vec<String> = values_k.iter().zip(&stats).map(|(k, (m, sd))| format!("{k}:{m:+.4}(sd {sd:.3})")).collect();
    outcome(inversions == 0 || (inversions == 1 && within), format!("{} inversions={inversions}", line.join(" ")))
}

fn a4() -> Outcome {
    let cfg = config("convergence.cfg");
    let env = cfg.environment.build().expect("random mdp");
    let truth = value_iteration(&env.mdp, 1e-12);
    let probes = cfg.probe_ids(&env).expect("probes");
    let last = |c: &RunConfig, seed: u64| {
        let run = run_seed(c, &env.mdp, &truth, &probes, seed, 0).expect("seed run");
        let r = run.records.last().expect("records").clone();
        (r.max_member_error, r.ensemble_spread)
    };
    // Pilot on a seed outside the evaluation set: double until the targets hold.
    let mut pilot = cfg.clone();
    pilot.num_updates = 125_000;
    loop {
        pilot.record_interval = pilot.num_updates;
        let (err, eps) = last(&pilot, 1000);
        if (err <= 1e-2 && eps <= 1e-3) || pilot.num_updates >= 8_000_000 {
            break;
        }
        pilot.num_updates *= 2;
    }
    let mut eval = cfg.clone();
    eval.num_updates = 2 * pilot.num_updates;
    eval.record_interval = eval.num_updates;
    let results: Vec<(f64, f64)> = (0..10).map(|s| last(&eval, s)).collect();
    let ok = results.iter().filter(|(e, s)| *e <= 1e-2 && *s <= 1e-3).count();
    let worst_err = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_eps = results.iter().map(|r| r.1).fold(0.0, f64::max);
    outcome(
        ok == 10,
        format!(
            "pilot budget {}, eval budget {}: {ok}/10 seeds, worst error {worst_err:.2e}, worst spread {worst_eps:.2e}",
            pilot.num_updates, eval.num_updates
        ),
    )
}

fn a5(tmp: &Path) -> Outcome {
    let ops = ["mellowmax", "softmax-expectation", "hardmax"];
    let s = sweep(&config("operators.cfg"), "agent.solver.operator", &ops.map(String::from), &opts(tmp))
        .expect("operator sweep");
    let early: Vec<f64> =
        s.points.iter().map(|(_, run)| mean(&values(&early_mean_per_seed(&rows(run, ""), "bias_mean", EARLY)))).collect();
    let files = s.points.iter().all(|(_, run)| run.variants[0].dir.join("aggregate.csv").exists())
        && s.root.join("comparison.csv").exists();
    outcome(
        files && early[1] <= early[2],
        format!("early bias mellowmax {:+.4}, softmax-expectation {:+.4}, hardmax {:+.4}", early[0], early[1], early[2]),
    )
}

fn random_prior(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| 0.02 + rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn a6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut fails = 0;
    for _ in 0..1000 {
        let mut spec = uql::mdp::RandomMdpSpec::new(rng.random_range(2..=8), rng.random_range(1..=5));
        spec.discount = rng.random_range(0.0..0.999);
        spec.branching = rng.random_range(1..=spec.num_states);
        let mdp = random_mdp(&spec, &mut rng).expect("random mdp");
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let prior = PriorPolicy::from_rows((0..ns).map(|_| random_prior(na, &mut rng)).collect()).expect("prior");
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let qi = QTable::random_uniform(ns, na, -scale, scale, &mut rng);
        let qj = QTable::random_uniform(ns, na, -scale, scale, &mut rng);
        let w = match rng.random_range(0..5) {
            0 => 0.0,
            1 => f64::INFINITY,
            _ => 10f64.powf(rng.random_range(-4.0..4.0)),
        };
        let lhs = soft_bellman_backup(&mdp, &qi, &prior, w).sup_distance(&soft_bellman_backup(&mdp, &qj, &prior, w));
        let rhs = mdp.discount() * qi.sup_distance(&qj);
        worst = worst.max(lhs - rhs);
        fails += usize::from(lhs > rhs + 1e-10);
    }
    let elapsed = start.elapsed();
    outcome(
        fails == 0 && elapsed.as_secs_f64() <= 10.0,
        format!("{}/1000 trials hold, max lhs - rhs {worst:.2e}, {:.2}s", 1000 - fails, elapsed.as_secs_f64()),
    )
}

/// Reference `w log sum p exp(v / w)` with a max shift.
fn reference_mellowmax(v: &[f64], p: &[f64], w: f64) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + w * v.iter().zip(p).map(|(x, q)| q * ((x - m) / w).exp()).sum::<f64>().ln()
}

fn a7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tol = 1e-10;
    let mut fails = 0;
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=10);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let v: Vec<f64> = (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let p = random_prior(n, &mut rng);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let avg: f64 = v.iter().zip(&p).map(|(a, b)| a * b).sum();
        let mm = |vals: &[f64], w: f64| mellowmax(vals, &p, w).expect("mellowmax");
        let unit = scale.max(1.0);
        let mut err = ((mm(&v, 0.0) - max).abs() / unit).max((mm(&v, f64::INFINITY) - avg).abs() / unit);
        err = err.max((mm(&v, 1e-13 * scale) - max).abs() / unit - 1e-11);
        err = err.max((mm(&v, 1e13 * scale) - avg).abs() / unit - 1e-11);
        let mut ws: Vec<f64> = (0..10).map(|_| scale * 10f64.powf(rng.random_range(-3.0..3.0))).collect();
        ws.sort_by(f64::total_cmp);
        let c = scale * rng.random_range(-5.0..5.0);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let mut prev = f64::INFINITY;
        for &w in &ws {
            let m = mm(&v, w);
            err = err.max((m - reference_mellowmax(&v, &p, w)).abs() / unit);
            err = err.max((m - prev) / unit);
            err = err.max((avg - m) / unit).max((m - max) / unit);
            err = err.max((mm(&shifted, w) - m - c).abs() / (unit + c.abs()));
            prev = m;
        }
        worst = worst.max(err);
        fails += usize::from(err > tol);
    }
    outcome(fails == 0, format!("{}/10000 vectors, worst violation {worst:.2e}", 10_000 - fails))
}

fn a8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = BetaSolverConfig::default();
    let mut fails = 0;
    let mut worst = f64::NEG_INFINITY;
    for eps in [1e-2, 1e-3, 1e-4] {
        for _ in 0..100 {
            let n = rng.random_range(2..=6);
            let k = rng.random_range(2..=10);
            // Small-spread regime: the top action leads by far more than eps.
            let base = loop {
                let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let mut s = b.clone();
                s.sort_by(|x, y| y.total_cmp(x));
                if s[0] - s[1] >= 0.1 {
                    break b;
                }
            };
            let rows: Vec<Vec<f64>> =
                (0..k).map(|_| base.iter().map(|x| x + eps * (rng.random::<f64>() - 0.5)).collect()).collect();
            let tables: Vec<QTable> = rows.iter().map(|r| QTable::from_values(1, n, r.clone()).expect("row")).collect();
            let measured = spread(&tables);
            assert!(measured > 0.0 && measured <= eps);
            let prior = random_prior(n, &mut rng);
            let min_p = prior.iter().copied().fold(f64::INFINITY, f64::min);
            let bound = 2.0 * measured / -(1.0 - min_p).ln() + 1e-6;
            let w_star = 1.0 / solve_beta_detailed(&rows, &prior, &cfg).expect("solve").beta;
            worst = worst.max(w_star - bound);
            fails += usize::from(w_star > bound);
        }
    }
    outcome(fails == 0, format!("{}/300 ensembles, max w* - bound {worst:.2e}", 300 - fails))
}

fn a9() -> Outcome {
    let cfg = BetaSolverConfig::default();
    assert_eq!((cfg.beta_min, cfg.beta_max, cfg.max_iterations), (1e-20, 2e6, 35));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut done, mut fails, mut worst) = (0, 0, 0.0f64);
    while done < 10_000 {
        let n = rng.random_range(2..=8);
        let k = rng.random_range(2..=20);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()).collect();
        let prior = random_prior(n, &mut rng);
        let f = |b: f64| discrepancy(&rows, &prior, b).expect("discrepancy");
        if !(f(cfg.beta_min) < 0.0 && f(cfg.beta_max) > 0.0) {
            continue;
        }
        done += 1;
        let r = f(solve_beta_detailed(&rows, &prior, &cfg).expect("solve").beta).abs();
        worst = worst.max(r);
        fails += usize::from(r > 1e-6);
    }
    outcome(fails == 0, format!("{}/10000 instances, max |f(beta*)| {worst:.2e}", 10_000 - fails))
}

fn a10() -> Outcome {
    let mdp = build_gridworld(&GridworldSpec::default()).expect("default map");
    let cfg = AgentConfig {
        ensemble_size: 1,
        init: InitValue::Uniform { low: 0.0, high: 1.0 },
        solver: BetaSolverConfig::default().with_kappa(f64::INFINITY),
        ..Default::default()
    };
    let mut r1 = ChaCha8Rng::seed_from_u64(10);
    let mut r2 = ChaCha8Rng::seed_from_u64(10);
    let mut agent = UqlAgent::for_mdp(&mdp, cfg.clone(), &mut r1).expect("agent");
    let mut q = BaselineLearner::for_mdp(BaselineKind::QLearning, &mdp, cfg, &mut r2).expect("q-learning");
    run_uniform_update_phase(&mdp, &mut agent, 10_000, None, &mut r1).expect("uql run");
    run_uniform_update_phase(&mdp, &mut q, 10_000, None, &mut r2).expect("q run");
    let (a, b) = (&agent.tables()[0], &q.tables()[0]);
    let diff = a.values().iter().zip(b.values()).filter(|(x, y)| x.to_bits() != y.to_bits()).count();
    let moved = a.values().iter().filter(|v| **v != 0.0).count();
    outcome(diff == 0 && moved > 0, format!("{diff} of {} cells differ in bits", a.values().len()))
}

fn main() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let sub = |name: &str| -> PathBuf { tmp.path().join(name) };
    let (fig2, elapsed) = fig2_pair(&sub("fig2"));
    let results = [
        ("A1", a1(&fig2, elapsed)),
        ("A2", a2(&sub("kappa"))),
        ("A3", a3(&fig2)),
        ("A4", a4()),
        ("A5", a5(&sub("operators"))),
        ("A6", a6()),
        ("A7", a7()),
        ("A8", a8()),
        ("A9", a9()),
        ("A10", a10()),
    ];
    let mut failed = 0;
    for (id, o) in &results {
        println!("{id} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
