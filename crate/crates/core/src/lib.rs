//! Conditional, interventional and counterfactual inference over structural
//! causal models.
//!
//! Two model families are supported:
//!
//! - **Linear-Gaussian** models `x = Bx + ε` with `ε ~ N(μ_ε, Σ_εε)`. `B` need
//!   not be triangular, so cyclic (nonrecursive) systems are handled as long as
//!   `I - B` is nonsingular. All queries are answered in closed form by
//!   [`gaussian`].
//! - **Boolean** models whose non-root variables are AND/OR/NOT functions of
//!   other variables, with designated abnormality roots. Queries are answered
//!   by [`boolean`] through exhaustive enumeration of root worlds, keeping the
//!   worlds with the fewest abnormalities.
//!
//! Counterfactual queries `a → c | o` follow the same three steps in both
//! families: update the belief over exogenous terms from the observations,
//! replace the equations of the forced variables with constants, then predict
//! the consequent under the modified equations.
//!
//! [`oracle`] holds sampling and enumeration engines that share no formulas
//! with the analytic paths and are used to cross-check them. [`dsl`] reads and
//! writes the `.scm.txt` text format; [`cli`] is the command-line front end.

pub mod boolean;
pub mod cli;
pub mod dsl;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod model;
pub mod oracle;

pub use error::{Error, ParseError, Result};
pub use model::{
    validate_linear, Assignment, BoolExpr, BooleanScm, Consequent, GaussianMoments, LinearScm,
    Partition, Query, Tolerances, ValidationReport, VariableId,
};
