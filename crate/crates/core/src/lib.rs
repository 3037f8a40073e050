pub mod bounds;
pub mod error;
pub mod fmt;
pub mod harness;
pub mod kernel;
pub mod pathstats;
pub mod quad;
pub mod sampler;

pub use error::{FbmError, Result};
