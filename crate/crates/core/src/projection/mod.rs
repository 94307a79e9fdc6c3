//! Linear orthogonal projectors, the nonlinear Max-Ent projection and the
//! product-state mean-field projector.

mod basis;
mod maxent;
mod mean_field;
pub mod pinv;
mod projector;

pub use basis::OperatorBasis;
pub use maxent::{maxent_project, MaxEntSolution};
pub use mean_field::{mf_project, partial_traces, pauli_local_bases, PRODUCT_TOL};
pub use projector::{build_projector, Projector, DEFAULT_RCOND};
