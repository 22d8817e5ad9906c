//! MB4 energy-preserving time integration of the periodic 2D discrete
//! nonlinear Schrodinger equation, with RK4, Gauss and AVF reference
//! integrators and a harness for conservation, convergence and timing runs.

pub mod error;
pub mod harness;
pub mod jacobian;
pub mod lattice;
pub mod linear;
pub mod mb4;
pub mod methods;
pub mod quadrature;
pub mod scheme;

pub use error::{Mb4Error, Result};
