//! Model and query types, validation, and the index bookkeeping used by
//! interventions.

mod boolean;
mod linear;
mod moments;
mod query;
mod variable;

pub use boolean::{BoolExpr, BooleanScm};
pub(crate) use linear::analyze;
pub use linear::{
    partition, prune, validate_linear, validate_linear_with, LinearScm, Partition, Tolerances,
    ValidationReport,
};
pub use moments::GaussianMoments;
pub use query::{Assignment, Consequent, Query};
#[cfg(test)]
pub(crate) use variable::ids;
pub use variable::VariableId;
