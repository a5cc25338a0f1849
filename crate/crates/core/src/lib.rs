pub mod autodiff;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod fbm;
pub mod networks;
pub mod problems;
pub mod random;
pub mod solver;

pub use error::{Error, Result};
