pub mod error;
pub mod family;
pub mod harness;
pub mod baselines;
pub mod engine;
pub mod measurement;
pub mod oracle;
pub mod quantum;

pub use error::{Error, Result};
