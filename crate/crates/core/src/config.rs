/// Numeric knobs for evaluation, inversion, and precision escalation.
///
/// A single config threads through everything so tolerances cannot drift
/// between a computation and the test that checks it.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Relative tolerance for bisection-based inversion.
    pub rel_tol: f64,
    /// Optional absolute floor for bisection termination; used for very
    /// large arguments where a relative tolerance would force thousands
    /// of high-precision iterations for accuracy nobody consumes.
    pub inverse_abs_floor: Option<f64>,
    /// Hard cap on bisection iterations per inverse evaluation.
    pub max_bisect_iters: u32,
    /// Multiplier used when growing a bracket around an inverse seed.
    pub bracket_growth: f64,
    /// Bits of mantissa for the high-precision scalar backend.
    pub precision_bits: u32,
    /// |x| beyond this switches displacement/difference computations to
    /// the high-precision backend (0 forces it everywhere).
    pub hp_cutoff: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            rel_tol: 1e-12,
            inverse_abs_floor: None,
            max_bisect_iters: 4096,
            bracket_growth: 2.0,
            precision_bits: 128,
            hp_cutoff: 1e8,
        }
    }
}

impl EvalConfig {
    /// Config with a given mantissa width, other knobs default.
    pub fn with_bits(precision_bits: u32) -> Self {
        EvalConfig {
            precision_bits,
            ..EvalConfig::default()
        }
    }
}
