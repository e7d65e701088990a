//! File formats, synthetic corpora, the experiment pipeline and the
//! `variata` command line on top of `variata-core`.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod experiment;
pub mod gencorpus;
pub mod modelio;
pub mod planio;

pub use error::CliError;
