use thiserror::Error;

/// Errors shared by every layer of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Rejected constructor or operation argument.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// Syntax error in the map DSL, with a byte offset into the input.
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    /// Evaluation requested left of the germ threshold.
    #[error("x = {x} is below the germ threshold {threshold}")]
    BelowDomain { x: f64, threshold: f64 },

    /// Operation needs a map defined on the whole line.
    #[error("map is not defined on the full line: {0}")]
    NotFullLine(String),

    /// Inverse evaluation could not bracket or converge on a preimage.
    #[error("inverse evaluation failed: {0}")]
    Inverse(String),

    /// A sampling grid does not fit inside the map's domain.
    #[error("grid starts at {x0} but the germ threshold is {threshold}")]
    GridBelowDomain { x0: f64, threshold: f64 },

    /// Too few samples for the requested estimate.
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    /// No grid point carries displacement past the witness threshold.
    #[error("no witness: max |f(x)-x| over the grid is {max_disp:.6e} (threshold {threshold:.1e})")]
    NoWitness { max_disp: f64, threshold: f64 },

    /// Sign assignment aborted; the offending map and sequence are reported.
    #[error("sign assignment aborted: {0}")]
    SignAssignment(String),

    /// Word enumeration would exceed the combinatorial budget.
    #[error("word budget exceeded: {count} words > {budget}")]
    WordBudget { count: u64, budget: u64 },

    /// An orbit stalled at an (approximate) fixed point.
    #[error("orbit hit a fixed point near x = {x} at step {step}")]
    FixedPoint { x: f64, step: u32 },

    /// Generators that were required to commute do not.
    #[error("maps do not commute: |g(h(x)) - h(g(x))| = {defect:.3e} at x = {x}")]
    NonCommuting { x: f64, defect: f64 },

    /// Two distinct words landed on the same orbit point.
    #[error("orbit collision between words {w1} and {w2} near x = {x}")]
    OrbitCollision { w1: String, w2: String, x: f64 },

    /// The input is degenerate for the requested check.
    #[error("vacuous input: {0}")]
    Vacuous(String),

    /// A stated precondition failed.
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
