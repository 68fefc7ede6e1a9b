pub mod bench;
pub mod circuit;
pub mod cost;
pub mod error;
pub mod lattice;
pub mod optimize;
pub mod par;
pub mod statekit;
pub mod upscale;

pub use error::{Error, Result};
