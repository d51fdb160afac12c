pub mod cli;
pub mod concentration;
pub mod counterfactuals;
pub mod decomposition;
pub mod error;
pub mod markups;
pub mod microdata;
pub mod numeric;
pub mod synthcensus;

pub use error::{Error, Result};
