pub mod distill;
pub mod domaingen;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod numeric;
pub mod ranker;
pub mod rng;

pub use error::{Error, Result};
