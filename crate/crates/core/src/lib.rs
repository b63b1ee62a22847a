pub mod cli;
pub mod dataset;
pub mod error;
pub mod inverse;
pub mod lattice;
pub mod linalg;
pub mod report;
pub mod scenario;
pub mod sturm;
pub mod vertex;

pub use error::{Error, Result};
