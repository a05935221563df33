//! Constraint learning, validation and resolution.

mod correlation;
mod map;
mod resolve;
mod validate;

pub use correlation::{abs_correlation_matrix, pearson, rank_categories, suggest_primary, PrimaryScore};
pub use map::{constraint_counts, constraint_report, learn_constraints, ConstraintCounts, ConstraintMap};
pub use resolve::{resolve, Branch, Resolution};
pub use validate::{validate, Violation, ViolationKind};
