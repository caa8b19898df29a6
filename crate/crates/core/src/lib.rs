pub mod bench;
pub mod cli;
pub mod decomp;
pub mod dist;
pub mod error;
pub mod factors;
pub mod linalg;
pub mod io;
pub mod model;
pub mod sampler;
pub mod series;
pub mod tensor;

pub use error::{Error, Result};
