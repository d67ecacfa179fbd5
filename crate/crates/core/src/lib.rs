pub mod indices;
pub mod network;
pub mod sampler;
pub mod seed;
pub mod stats;
pub mod diagnostics;
pub mod conformal;
pub mod config;
pub mod error;
pub mod io;
pub mod map;
pub mod pipeline;
pub mod synthetic;

pub use error::Error;
