pub mod error;
pub mod expr;
pub mod extremal;
pub mod grid;
pub mod inequalities;
pub mod operators;
pub mod psi;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod weighted;

pub use error::{Error, Result};
