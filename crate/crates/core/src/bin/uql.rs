use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uql::experiment::{
    dump_oracle, output_root, render_plot, run_experiment, sweep, EnvConfig, PlotKind, RunConfig, RunOptions,
};
use uql::selftest;
use uql::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "uql", version, about = "Tabular ensemble soft Q-learning experiments",
    after_help = "Results go below $UQL_OUTPUT_ROOT (default ./results) unless --output-dir is given.")]
struct Cli {
    /// Added to every configured seed before stream derivation.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
    /// Output directory; defaults to a directory below the output root.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every variant and seed of a config.
    Run { config: PathBuf },
    /// Run a config once per value of a dotted parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated; `inf` is accepted.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Dump Q*, V* and the optimal actions of an environment.
    Oracle { env_config: PathBuf },
    /// Render an SVG from a results directory.
    Plot {
        results: PathBuf,
        /// value-curve, bias-curve, policy-map or value-map.
        #[arg(long)]
        kind: String,
    },
    /// Run the randomized property suites.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<u8> {
    let opts = RunOptions { output_dir: cli.output_dir.clone(), seed_offset: cli.seed_offset, jobs: cli.jobs };
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config).map_err(unreadable)?;
            let summary = run_experiment(&cfg, &opts)?;
            for v in &summary.variants {
                let ok = v.seeds.iter().filter(|s| s.status == "ok").count();
                println!("{}: {ok}/{} seeds ok -> {}", label(&v.name), v.seeds.len(), v.dir.display());
            }
            Ok(failed(summary.failed_seeds()))
        }
        Command::Sweep { config, param, values } => {
            let cfg = RunConfig::load(&config).map_err(unreadable)?;
            let summary = sweep(&cfg, &param, &values, &opts)?;
            let mut failures = 0;
            for (value, run) in &summary.points {
                failures += run.failed_seeds();
                println!("{param}={value}: {} -> {}", status(run.failed_seeds()), run.root.display());
            }
            println!("comparison: {}", summary.root.join("comparison.csv").display());
            Ok(failed(failures))
        }
        Command::Oracle { env_config } => {
            let env = EnvConfig::load(&env_config).map_err(unreadable)?;
            let dir = cli.output_dir.unwrap_or_else(|| output_root().join("oracle"));
            let dump = dump_oracle(&env, &dir)?;
            let built = env.build()?;
            for &s in built.mdp.start_states() {
                println!("V*({s}) = {}", dump.truth.v_star[s]);
            }
            println!("wrote {}", dump.dir.display());
            Ok(0)
        }
        Command::Plot { results, kind } => {
            let kind: PlotKind = kind.parse()?;
            let path = render_plot(&results, kind, cli.output_dir.as_deref())?;
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Selftest { seed } => {
            let checks = selftest::run_all(seed);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) { 0 } else { 2 })
        }
    }
}

fn label(name: &str) -> &str {
    if name.is_empty() {
        "run"
    } else {
        name
    }
}

fn status(failed_seeds: usize) -> String {
    if failed_seeds == 0 {
        "ok".into()
    } else {
        format!("{failed_seeds} seeds failed")
    }
}

fn failed(n: usize) -> u8 {
    if n == 0 {
        0
    } else {
        eprintln!("error: {}", Error::Numeric(format!("{n} seed runs failed; see manifest.toml")));
        2
    }
}

/// A config file that cannot be read is a config error, not a run failure.
fn unreadable(e: Error) -> Error {
    match e {
        Error::Io { path, source } => Error::Config { field: path, message: source.to_string() },
        other => other,
    }
}
