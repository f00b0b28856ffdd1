pub mod actionspace;
pub mod bench;
pub mod classifiers;
pub mod data;
pub mod error;
pub mod formulations;
pub mod stats;

pub use error::{Error, Result};
