pub mod analysis;
pub mod data;
pub mod error;
pub mod kernel;
pub mod machines;
pub mod numerics;
pub mod nystrom;
pub mod persist;
pub mod rng;
pub mod sampling;
pub mod synth;

pub use error::{Error, Result};
