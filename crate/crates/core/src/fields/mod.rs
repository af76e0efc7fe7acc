//! Higher-order fluctuation fields built from the duality polynomials.

pub mod evaluator;
pub mod martingale;
pub mod product_tree;
pub mod test_function;
pub mod tracker;

pub use evaluator::{field_eval, field_eval_mixed, FieldEvaluator, FieldScalar, FieldSetup};
pub use martingale::{dynkin_martingale, MartingaleRow, MartingaleSample};
pub use product_tree::ProductTree;
pub use test_function::{SiteFunction, TestFunction, TrigTerm};
pub use tracker::FieldTracker;

#[cfg(test)]
mod tests;
