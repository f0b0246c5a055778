//! Command-line front end: run configuration, dataset manifests, the
//! synthetic gland generator and the subcommands.

pub mod commands;
pub mod config;
pub mod gradcheck;
pub mod manifest;
pub mod synth;

pub use commands::{
    cmd_augment, cmd_eval, cmd_gradcheck, cmd_infer, cmd_prep, cmd_rank, cmd_synth, cmd_train,
    configure_threads, grid_from_reports, initial_weights, weights_path, RankInput, Summary,
    TransformRecord, THREADS_ENV,
};
pub use config::RunConfig;
pub use gradcheck::{edge_gradients, edge_params, gradcheck_suite, GradCheckCase};
pub use manifest::{LoadedRecord, Manifest, Record};
pub use synth::{generate, generate_set, SynthConfig, SynthImage};
