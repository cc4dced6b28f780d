pub mod config;
pub mod constitutive;
pub mod energy;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod output;
pub mod quadrature;
pub mod solver;
