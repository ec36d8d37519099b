//! Eventually-defined homeomorphisms of the line.
//!
//! The crate models germs at +infinity of orientation-preserving
//! homeomorphisms of the real line, together with the coarse geometry
//! used to compare them: displacement growth, quasi-isometry constants,
//! bounded-distance equivalence, left-invariant orders on families of
//! such maps, and induced actions on the line built from chart
//! embeddings. Everything is driven by a small closed expression type
//! ([`expr::MapExpr`]) so the same map can be evaluated in `f64` or in
//! arbitrary precision, sampled, composed, inverted numerically, and
//! printed back as text.

pub mod actions;
pub mod config;
pub mod error;
pub mod eval;
pub mod expr;
pub mod generators;
pub mod metrics;
pub mod ordering;
pub mod parse;
pub mod pl;
pub mod scalar;

pub use config::EvalConfig;
pub use error::{Error, Result};
