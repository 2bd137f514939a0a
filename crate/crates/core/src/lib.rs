//! Geometric measure of entanglement, under every definition worth
//! comparing: the pure-state product overlap with its linear and logarithmic
//! measures, the trace inner-product, fidelity and trace-distance extensions
//! to mixed states, convex roofs with certified decompositions, closed forms
//! and classifiers for the isotropic / maximally correlated / two-qubit
//! families, and stabilizer graph-state machinery with the universal
//! closest-separable-state construction.
//!
//! All numerics are generic over the real scalar (`f32`/`f64`) through
//! [`Real`]; the crate root re-exports `f64` aliases, which the CLI uses.
//!
//! Optimizer outputs follow a one-sided error discipline: maximizers return
//! certified lower bounds (the achieving product state is part of the
//! result), minimizers certified upper bounds, and convex-roof values are
//! upper bounds recomputable from the returned decomposition.

pub mod appendix;
pub mod distance;
pub mod error;
pub mod families;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod mixed;
pub mod optimize;
pub mod pure;
pub mod roof;
pub mod scalar;
pub mod space;

pub use error::{Error, Result};
pub use optimize::OptimizerOptions;
pub use scalar::{r, Real, C};

/// Concrete `f64` aliases; the CLI and the verification suites use these.
pub type PureState = space::PureState<f64>;
pub type DensityMatrix = space::DensityMatrix<f64>;
pub type ProductState = space::ProductState<f64>;
pub type CpsResult = pure::CpsResult<f64>;
pub type Lambda2mResult = mixed::Lambda2mResult<f64>;
pub type GtResult = mixed::GtResult<f64>;
pub type TraceEntBracket = mixed::TraceEntBracket<f64>;
pub type Decomposition = roof::Decomposition<f64>;
pub type RoofResult = roof::RoofResult<f64>;
pub use space::MultipartiteSpace;
