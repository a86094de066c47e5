pub mod ensembles;
pub mod error;
pub mod gge;
pub mod harness;
pub mod meanforce;
pub mod metrology;
pub mod opalgebra;
pub mod quadrature;

pub use error::{Error, Result};
