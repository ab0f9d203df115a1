//! Numerical calculus with respect to a left-continuous nondecreasing
//! derivator `g`: Stieltjes integrals, g-derivatives, g-monomials, g-power
//! series, the g-exponential and constant-coefficient linear g-ODEs.

pub mod corpus;
pub mod derivator;
pub mod error;
pub mod exponential;
pub mod fixtures;
pub mod integral;
pub mod monomials;
pub mod ode;
pub mod scalar;
pub mod series;
pub mod verify;

pub use derivator::{Derivator, DerivatorConfig, PointClass};
pub use error::{Error, Result};
pub use integral::{g_derivative, integrate, measure_interval, DerivativeOptions, Quadrature};
pub use scalar::Scalar;
