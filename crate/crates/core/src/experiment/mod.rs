//! Config-driven experiments: seeding, result files, sweeps and plots.

pub mod config;
pub mod plot;
pub mod results;
pub mod runner;
pub mod seeds;

pub use config::{Algorithm, BaselineParams, EnvConfig, Environment, Phase, RunConfig, Variant};
pub use plot::{render_plot, PlotKind};
pub use results::{aggregate, read_aggregate_csv, read_seed_csv, AggregateRow, ResultRow};
pub use runner::{
    dump_oracle, output_root, resolve_output_dir, run_experiment, run_seed, sweep, AnyLearner, OracleDump, RunOptions, RunSummary, SeedRun,
    SweepSummary, OUTPUT_ROOT_ENV,
};
pub use seeds::{derive_seed, seed_rng, splitmix64};
