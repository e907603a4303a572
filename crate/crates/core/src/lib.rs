pub mod classifier;
pub mod data;
pub mod ddr;
pub mod density_ratio;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod labels;

pub use error::{Error, Result};
