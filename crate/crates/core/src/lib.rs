pub mod dist;
pub mod error;
pub mod benchmarks;
pub mod cli;
pub mod coase;
pub mod numeric;
pub mod nature;
pub mod robust;
pub mod sim;

pub use error::{Error, Result};
