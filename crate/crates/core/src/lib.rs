pub mod bits;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod model;
pub mod numeric;
pub mod partition;
pub mod priors;
pub mod sampler;
pub mod simbench;
pub mod summaries;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
