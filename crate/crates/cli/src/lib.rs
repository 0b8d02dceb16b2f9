//! Library surface of the batch front-end (also used by the acceptance
//! suite, which drives every criterion from its checked-in config file).

pub mod config;
pub mod run;

pub use config::{parse_config, RunConfig};
pub use run::{run_to, RunArtifacts};
