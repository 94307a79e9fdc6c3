//! Max-Ent projections of quantum states, the scalar-product geometries
//! that induce them, and restricted dynamics on the resulting manifolds.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod models;
pub mod ode;
pub mod operator;
pub mod projection;
pub mod random;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
