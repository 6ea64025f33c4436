//! Running a bundled config, sweeping kappa, and rendering plots from
//! library code. Results land in a temporary directory.
//!
//! ```text
//! cargo run --release --example run_config [config] [output-dir]
//! ```

use std::path::{Path, PathBuf};

use uql::experiment::{render_plot, run_experiment, sweep, PlotKind, RunConfig, RunOptions};

fn main() -> uql::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg_path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/gridworld_fig2.cfg"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("uql-run-config"));

    let mut cfg = RunConfig::load(&cfg_path)?;
    cfg.seeds.truncate(3);
    let summary = run_experiment(&cfg, &RunOptions { output_dir: Some(out.join("run")), ..Default::default() })?;
    for v in &summary.variants {
        let bias = v.aggregate.iter().rfind(|r| r.metric == "bias_mean").map(|r| r.mean);
        println!("{:<16} final mean bias {:+.4}", v.name, bias.unwrap_or(f64::NAN));
    }
    for kind in [PlotKind::BiasCurve, PlotKind::ValueCurve] {
        println!("wrote {}", render_plot(&summary.root, kind, None)?.display());
    }
    for v in &summary.variants {
        println!("wrote {}", render_plot(&v.dir, PlotKind::PolicyMap, None)?.display());
    }

    let mut base = cfg.clone();
    base.variants.clear();
    let values: Vec<String> = ["0.5", "1", "inf"].map(String::from).into();
    let s = sweep(&base, "agent.solver.kappa", &values, &RunOptions { output_dir: Some(out.join("sweep")), ..Default::default() })?;
    println!("sweep comparison: {}", s.root.join("comparison.csv").display());
    Ok(())
}
