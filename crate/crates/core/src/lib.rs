pub mod config;
pub mod error;
pub mod exact;
pub mod fixtures;
pub mod instance;
pub mod lagrangian;
pub mod loader;
pub mod network;
pub mod phases;
pub mod ptgraph;
pub mod report;

pub use error::{Error, Issue, Result};
pub use instance::Instance;
