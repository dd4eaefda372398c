//! One module per subcommand; each exposes its clap `Args` struct and a
//! `run` function returning the shared `CliResult`.

pub mod augment;
pub mod candidates;
pub mod compare;
pub mod embed;
pub mod evaluate;
pub mod ingest;
pub mod pipeline;
pub mod retrieve;
pub mod review;
pub mod train;
