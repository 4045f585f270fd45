//! Discrete experiments on the square-root domains of one-dimensional non-self-adjoint
//! Sturm-Liouville operators `-(p y')' + r y' - (s y)' + q y`.

pub mod assembly;
pub mod bessel;
pub mod cli;
pub mod config;
pub mod domain;
pub mod formbounds;
pub mod io;
pub mod kato;
pub mod krein;
pub mod linalg;
pub mod matfun;
pub mod mesh;
pub mod sectorial;
