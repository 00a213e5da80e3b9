pub mod builders;
pub mod chaos;
pub mod cli;
pub mod config;
pub mod covariance;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod quadrature;
pub mod restriction;
pub mod rkhs;

pub use builders::{build_diagonal, build_heat_spectral, build_paper_2x2, SequenceRule};
pub use config::Tolerances;
pub use error::{OuError, Result};
pub use model::OuModel;
