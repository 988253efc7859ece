//! Discrete Muckenhoupt weights, maximal operators and extrapolation checks
//! on `{1, ..., N}`.

pub mod corpus;
pub mod error;
pub mod extrapolation;
pub mod falsifier;
pub mod generators;
pub mod norm_est;
pub mod numeric;
pub mod operators;
pub mod rdf;
pub mod report;
pub mod weights;

pub use error::{Error, Result};
pub use norm_est::{estimate_operator_norm, OperatorNormEstimate, SearchStrategy};
pub use operators::{OperatorKind, Sequence};
pub use rdf::{rdf_dual_iterate, rdf_iterate, RdfConfig, RdfResult};
pub use weights::{Exponent, NormKind, NormReport, Weight};
