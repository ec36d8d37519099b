//! Group actions on the line: translation numbers, additivity of the
//! drift homomorphism on commuting families, semi-conjugacies onto
//! translation groups, chart-diagonal embeddings, and an obstruction
//! scan for candidate actions of the scaling-shift product group.

use crate::config::EvalConfig;
use crate::error::{Error, Result};
use crate::eval::{eval_f64, germ_domain};
use crate::expr::MapExpr;
use crate::metrics::SampleGrid;
use crate::scalar::Scalar;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

/// Anything that can be applied to a point of the line under a config.
///
/// Implemented by expression maps, chart-embedded homeomorphisms, and
/// ad-hoc closures, so orbit routines work uniformly over all three.
pub trait Evaluable {
    fn eval_at(&self, x: f64, cfg: &EvalConfig) -> Result<f64>;
}

impl Evaluable for MapExpr {
    fn eval_at(&self, x: f64, cfg: &EvalConfig) -> Result<f64> {
        eval_f64(self, x, cfg)
    }
}

/// Wraps a closure as an evaluable map.
pub struct FnMap<F>(pub F);

impl<F: Fn(f64, &EvalConfig) -> Result<f64>> Evaluable for FnMap<F> {
    fn eval_at(&self, x: f64, cfg: &EvalConfig) -> Result<f64> {
        (self.0)(x, cfg)
    }
}

/// Increasing homeomorphism from ℝ onto a bounded open interval,
/// realized as x ↦ a + (b−a)·σ(x) for the fixed logistic reference
/// σ(x) = 1/(1+e^{−x}). Two parameters (the interval ends), closed-form
/// inverse.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Chart {
    a: f64,
    b: f64,
}

impl Chart {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Invalid(format!(
                "chart interval must be finite with a < b, got ({a}, {b})"
            )));
        }
        Ok(Chart { a, b })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a < x && x < self.b
    }

    /// Chart coordinate → interval point. Both logistic branches are
    /// computed without cancellation.
    pub fn apply(&self, y: f64) -> f64 {
        let u = if y >= 0.0 {
            1.0 / (1.0 + (-y).exp())
        } else {
            let e = y.exp();
            e / (1.0 + e)
        };
        self.a + (self.b - self.a) * u
    }

    /// Interval point → chart coordinate. Errors outside the open
    /// interval, and also when the point sits within rounding error of
    /// a boundary: the logistic saturates near ±37 and the coordinate
    /// is no longer representable.
    pub fn invert(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Precondition(format!(
                "{x} is not inside the chart interval ({}, {})",
                self.a, self.b
            )));
        }
        let u = (x - self.a) / (self.b - self.a);
        if u <= 0.0 || u >= 1.0 {
            return Err(Error::Precondition(format!(
                "{x} is within rounding error of the chart boundary"
            )));
        }
        Ok((u / (1.0 - u)).ln())
    }
}

fn check_disjoint(charts: &[Chart]) -> Result<()> {
    let mut order: Vec<usize> = (0..charts.len()).collect();
    order.sort_by(|&i, &j| charts[i].a.partial_cmp(&charts[j].a).expect("finite ends"));
    for w in order.windows(2) {
        let (lo, hi) = (&charts[w[0]], &charts[w[1]]);
        if hi.a < lo.b {
            return Err(Error::Invalid(format!(
                "intervals overlap: ({}, {}) and ({}, {})",
                lo.a, lo.b, hi.a, hi.b
            )));
        }
    }
    Ok(())
}

/// A homeomorphism of the line that orbit routines can apply and
/// invert: either an expression map, or an expression conjugated into a
/// family of disjoint charts (acting chart-wise inside, identically
/// outside).
#[derive(Debug, Clone)]
pub enum LineHomeo {
    Expr(MapExpr),
    Diagonal { charts: Vec<Chart>, inner: MapExpr },
}

impl From<MapExpr> for LineHomeo {
    fn from(e: MapExpr) -> Self {
        LineHomeo::Expr(e)
    }
}

impl LineHomeo {
    /// The inverse homeomorphism. Chart conjugation commutes with
    /// inversion, so the diagonal variant just inverts its inner map.
    pub fn inverse(&self) -> LineHomeo {
        match self {
            LineHomeo::Expr(e) => LineHomeo::Expr(MapExpr::inverse(e.clone())),
            LineHomeo::Diagonal { charts, inner } => LineHomeo::Diagonal {
                charts: charts.clone(),
                inner: MapExpr::inverse(inner.clone()),
            },
        }
    }

    fn check_full_line(&self) -> Result<()> {
        let inner = match self {
            LineHomeo::Expr(e) => e,
            LineHomeo::Diagonal { charts, inner } => {
                check_disjoint(charts)?;
                inner
            }
        };
        if !germ_domain(inner)?.full_line {
            return Err(Error::NotFullLine(format!("{inner}")));
        }
        if inner.orientation() <= 0 {
            return Err(Error::Invalid(format!("{inner} is not increasing")));
        }
        Ok(())
    }
}

impl Evaluable for LineHomeo {
    fn eval_at(&self, x: f64, cfg: &EvalConfig) -> Result<f64> {
        match self {
            LineHomeo::Expr(e) => eval_f64(e, x, cfg),
            LineHomeo::Diagonal { charts, inner } => {
                for c in charts {
                    if c.contains(x) {
                        let y = eval_f64(inner, c.invert(x)?, cfg)?;
                        return Ok(c.apply(y));
                    }
                }
                // Identity outside the charts: this is the continuous
                // extension of the chart-wise action.
                Ok(x)
            }
        }
    }
}

/// Signed power application: e < 0 applies the inverse |e| times.
fn apply_power(h: &LineHomeo, e: i64, x: f64, cfg: &EvalConfig) -> Result<f64> {
    if e == 0 {
        return Ok(x);
    }
    let inv;
    let m = if e > 0 {
        h
    } else {
        inv = h.inverse();
        &inv
    };
    let mut v = x;
    for _ in 0..e.unsigned_abs() {
        v = m.eval_at(v, cfg)?;
    }
    Ok(v)
}

/// A group word over named generators: (generator index, exponent)
/// pairs, applied rightmost letter first.
pub type Word = Vec<(usize, i64)>;

/// A finitely generated group acting on the line by named increasing
/// homeomorphisms, together with the word pairs whose equality the
/// action is expected to satisfy.
#[derive(Debug, Clone)]
pub struct ActionSpec {
    generators: Vec<(String, LineHomeo)>,
    relations_to_check: Vec<(Word, Word)>,
}

impl ActionSpec {
    pub fn new(
        generators: Vec<(String, LineHomeo)>,
        relations_to_check: Vec<(Word, Word)>,
    ) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::Invalid("action needs at least one generator".into()));
        }
        for (name, h) in &generators {
            h.check_full_line()
                .map_err(|e| Error::Invalid(format!("generator {name}: {e}")))?;
        }
        for (w1, w2) in &relations_to_check {
            for (i, _) in w1.iter().chain(w2.iter()) {
                if *i >= generators.len() {
                    return Err(Error::Invalid(format!(
                        "relation references generator {i}, but only {} exist",
                        generators.len()
                    )));
                }
            }
        }
        Ok(ActionSpec {
            generators,
            relations_to_check,
        })
    }

    pub fn generators(&self) -> &[(String, LineHomeo)] {
        &self.generators
    }

    pub fn relations_to_check(&self) -> &[(Word, Word)] {
        &self.relations_to_check
    }

    /// Applies a word to a point, rightmost letter first.
    pub fn eval_word(&self, word: &[(usize, i64)], x: f64, cfg: &EvalConfig) -> Result<f64> {
        let mut v = x;
        for (i, e) in word.iter().rev() {
            let (_, h) = self
                .generators
                .get(*i)
                .ok_or_else(|| Error::Invalid(format!("word references generator {i}")))?;
            v = apply_power(h, *e, v, cfg)?;
        }
        Ok(v)
    }

    /// Sup over the probe points of |w₁(x) − w₂(x)| for each declared
    /// relation, in declaration order.
    pub fn relation_residuals(&self, probe: &[f64], cfg: &EvalConfig) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.relations_to_check.len());
        for (w1, w2) in &self.relations_to_check {
            let mut sup = 0.0f64;
            for &x in probe {
                let d = (self.eval_word(w1, x, cfg)? - self.eval_word(w2, x, cfg)?).abs();
                sup = sup.max(d);
            }
            out.push(sup);
        }
        Ok(out)
    }
}

/// Cesàro drift of an orbit: the average displacement per step.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TranslationNumber {
    pub value: f64,
    pub iterations: u32,
    /// |(f^{2n}(x₀)−x₀)/2n − (f^{n}(x₀)−x₀)/n| for the reported n.
    pub error_estimate: f64,
}

/// Estimates the translation number of `f` from the orbit of `x0`:
/// value = (f^{n}(x₀) − x₀)/n, with the n-vs-2n discrepancy as the
/// error estimate.
///
/// The orbit must be strictly monotone. A step smaller than the
/// config's relative tolerance (or a displacement sign flip, which for
/// an increasing map can only come from rounding at a fixed point)
/// reports the fixed-point location instead.
pub fn translation_number<F: Evaluable + ?Sized>(
    f: &F,
    x0: f64,
    n: u32,
    cfg: &EvalConfig,
) -> Result<TranslationNumber> {
    if n == 0 || n > u32::MAX / 2 {
        return Err(Error::Invalid(format!("iteration count {n} out of range")));
    }
    if !x0.is_finite() {
        return Err(Error::Invalid(format!("starting point {x0} is not finite")));
    }
    let mut x = x0;
    let mut mid = x0;
    let mut dir = 0.0f64;
    for step in 1..=2 * u64::from(n) {
        let next = f.eval_at(x, cfg)?;
        if !next.is_finite() {
            return Err(Error::Invalid(format!(
                "orbit left the floating-point range at step {step}"
            )));
        }
        let delta = next - x;
        if delta.abs() <= cfg.rel_tol * x.abs().max(1.0) || (dir != 0.0 && delta * dir < 0.0) {
            return Err(Error::FixedPoint {
                x: next,
                step: step as u32,
            });
        }
        if dir == 0.0 {
            dir = delta.signum();
        }
        x = next;
        if step == u64::from(n) {
            mid = x;
        }
    }
    let value = (mid - x0) / f64::from(n);
    let twice = (x - x0) / f64::from(2 * u64::from(n) as u32);
    Ok(TranslationNumber {
        value,
        iterations: n,
        error_estimate: (twice - value).abs(),
    })
}

/// Rejects a pair that fails to commute on a probe near x0. The
/// tolerance is 100× the relative config tolerance: compositions of
/// bracketed inverses carry a few ulps of slack each.
fn require_commuting<G: Evaluable + ?Sized, H: Evaluable + ?Sized>(
    g: &G,
    h: &H,
    x0: f64,
    cfg: &EvalConfig,
) -> Result<()> {
    for j in -4i32..=4 {
        let x = x0 + 1.37 * f64::from(j);
        let gh = g.eval_at(h.eval_at(x, cfg)?, cfg)?;
        let hg = h.eval_at(g.eval_at(x, cfg)?, cfg)?;
        let defect = (gh - hg).abs();
        if defect > 100.0 * cfg.rel_tol * x.abs().max(1.0) {
            return Err(Error::NonCommuting { x, defect });
        }
    }
    Ok(())
}

/// Result of the drift-additivity check on a commuting pair.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HolderAdditivity {
    pub tau_g: f64,
    pub tau_h: f64,
    pub tau_composition: f64,
    pub residual: f64,
    pub additive: bool,
}

/// Checks that the translation number is additive on a commuting,
/// fixed-point-free pair: residual = |τ(g∘h) − τ(g) − τ(h)|, additive
/// iff the residual is at most 1e−3.
pub fn holder_homomorphism_check<G: Evaluable + ?Sized, H: Evaluable + ?Sized>(
    g: &G,
    h: &H,
    x0: f64,
    n: u32,
    cfg: &EvalConfig,
) -> Result<HolderAdditivity> {
    require_commuting(g, h, x0, cfg)?;
    let tau_g = translation_number(g, x0, n, cfg)?.value;
    let tau_h = translation_number(h, x0, n, cfg)?.value;
    let composed = FnMap(|x: f64, c: &EvalConfig| g.eval_at(h.eval_at(x, c)?, c));
    let tau_composition = translation_number(&composed, x0, n, cfg)?.value;
    let residual = (tau_composition - tau_g - tau_h).abs();
    Ok(HolderAdditivity {
        tau_g,
        tau_h,
        tau_composition,
        residual,
        additive: residual <= 1e-3,
    })
}

/// Monotone map from orbit points to drift coordinates: φ(w(x₀)) is the
/// drift of the word w, so φ intertwines the action with translations.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SemiConjugacy {
    /// Translation number of each generator, in declaration order.
    pub taus: Vec<f64>,
    /// (x, φ(x)) pairs sorted by x; φ values non-decreasing.
    pub grid_points: Vec<(f64, f64)>,
    /// max over sampled (generator h, point x) of |φ(h(x)) − φ(x) − τ(h)|.
    pub residual: f64,
}

fn exponent_vectors(k: usize, budget: i64) -> Vec<Vec<i64>> {
    fn rec(i: usize, left: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for e in -left..=left {
            cur[i] = e;
            rec(i + 1, left - e.abs(), cur, out);
        }
        cur[i] = 0;
    }
    let mut out = Vec::new();
    rec(0, budget, &mut vec![0i64; k], &mut out);
    out
}

fn word_label(names: &[&str], exps: &[i64]) -> String {
    let parts: Vec<String> = names
        .iter()
        .zip(exps)
        .filter(|(_, &e)| e != 0)
        .map(|(n, &e)| if e == 1 { (*n).to_string() } else { format!("{n}^{e}") })
        .collect();
    if parts.is_empty() {
        "e".into()
    } else {
        parts.join("*")
    }
}

struct MonotonePhi {
    xs: Vec<f64>,
    phis: Vec<f64>,
}

impl MonotonePhi {
    /// Piecewise-linear interpolation; None outside the node hull.
    fn interp(&self, y: f64) -> Option<f64> {
        let (first, last) = (self.xs[0], *self.xs.last().expect("nonempty"));
        if y < first || y > last {
            return None;
        }
        match self.xs.binary_search_by(|v| v.partial_cmp(&y).expect("finite nodes")) {
            Ok(i) => Some(self.phis[i]),
            Err(i) => {
                let t = (y - self.xs[i - 1]) / (self.xs[i] - self.xs[i - 1]);
                Some(self.phis[i - 1] + t * (self.phis[i] - self.phis[i - 1]))
            }
        }
    }
}

const ORBIT_WORD_CAP: usize = 20_000;
const TAU_ITERS: u32 = 10_000;

/// Builds the monotone map intertwining a commuting fixed-point-free
/// action with the translation group: φ(w(x₀)) = Σ eᵢ·τ(gᵢ) over all
/// words w with total exponent size at most `orbit_depth`, extended
/// between orbit points by linear interpolation.
///
/// Generator drifts are estimated with 10⁴ iterations. Orbit points
/// closer than the relative config tolerance are reported as a
/// collision (the action is not free there); φ values that fail to be
/// monotone along the sorted orbit are rejected.
pub fn build_semi_conjugacy(
    act: &ActionSpec,
    x0: f64,
    orbit_depth: u32,
    cfg: &EvalConfig,
) -> Result<SemiConjugacy> {
    if !x0.is_finite() {
        return Err(Error::Invalid(format!("starting point {x0} is not finite")));
    }
    let gens = act.generators();
    for i in 0..gens.len() {
        for j in i + 1..gens.len() {
            require_commuting(&gens[i].1, &gens[j].1, x0, cfg)?;
        }
    }
    let taus: Vec<f64> = gens
        .iter()
        .map(|(_, g)| translation_number(g, x0, TAU_ITERS, cfg).map(|t| t.value))
        .collect::<Result<_>>()?;
    let names: Vec<&str> = gens.iter().map(|(n, _)| n.as_str()).collect();

    let vecs = exponent_vectors(gens.len(), i64::from(orbit_depth));
    if vecs.len() > ORBIT_WORD_CAP {
        return Err(Error::Precondition(format!(
            "orbit of depth {orbit_depth} over {} generators needs {} words (cap {ORBIT_WORD_CAP})",
            gens.len(),
            vecs.len()
        )));
    }
    let mut nodes: Vec<(f64, f64, String)> = Vec::with_capacity(vecs.len());
    for v in &vecs {
        let mut x = x0;
        for (i, &e) in v.iter().enumerate() {
            x = apply_power(&gens[i].1, e, x, cfg)?;
        }
        if !x.is_finite() {
            return Err(Error::Invalid("orbit left the floating-point range".into()));
        }
        let phi: f64 = v.iter().zip(&taus).map(|(&e, t)| e as f64 * t).sum();
        nodes.push((x, phi, word_label(&names, v)));
    }
    nodes.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite orbit"));
    for w in nodes.windows(2) {
        if (w[1].0 - w[0].0).abs() <= cfg.rel_tol * w[0].0.abs().max(1.0) {
            return Err(Error::OrbitCollision {
                w1: w[0].2.clone(),
                w2: w[1].2.clone(),
                x: w[0].0,
            });
        }
        if w[1].1 < w[0].1 {
            return Err(Error::Invalid(format!(
                "drift coordinates are not monotone along the orbit near x = {}",
                w[0].0
            )));
        }
    }

    let phi = MonotonePhi {
        xs: nodes.iter().map(|n| n.0).collect(),
        phis: nodes.iter().map(|n| n.1).collect(),
    };
    // Sample nodes and segment midpoints; points that a generator maps
    // outside the hull are skipped rather than extrapolated.
    let mut samples = phi.xs.clone();
    samples.extend(phi.xs.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let mut residual = 0.0f64;
    for (j, (_, g)) in gens.iter().enumerate() {
        for &x in &samples {
            let y = g.eval_at(x, cfg)?;
            if let (Some(py), Some(px)) = (phi.interp(y), phi.interp(x)) {
                residual = residual.max((py - px - taus[j]).abs());
            }
        }
    }
    Ok(SemiConjugacy {
        taus,
        grid_points: phi.xs.iter().copied().zip(phi.phis.iter().copied()).collect(),
        residual,
    })
}

/// Result of checking a sampled homomorphism ℚ → ℝ for linearity.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LinearityReport {
    pub linear: bool,
    pub slope: f64,
    pub worst_deviation: f64,
}

/// Tests whether sampled values of a map on rationals are ℝ-linear:
/// slope = value at q = 1, linear iff every sample satisfies
/// |φ(q) − q·slope| ≤ tol. Requires at least 10 samples including q = 1.
pub fn linearity_test(samples: &[(BigRational, f64)], tol: f64) -> Result<LinearityReport> {
    if samples.len() < 10 {
        return Err(Error::Precondition(format!(
            "need at least 10 samples, got {}",
            samples.len()
        )));
    }
    let slope = samples
        .iter()
        .find(|(q, _)| q.is_one())
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Precondition("samples must include q = 1".into()))?;
    let mut worst = 0.0f64;
    for (q, v) in samples {
        let qf = f64::from_rational(q, 64);
        worst = worst.max((v - qf * slope).abs());
    }
    Ok(LinearityReport {
        linear: worst <= tol,
        slope,
        worst_deviation: worst,
    })
}

/// Unit vector in the kernel of (s, t) ↦ slope1·s + slope2·t, the word
/// exponents a faithful ℝ-linear drift map cannot kill: returns
/// (slope2, −slope1) normalized, with |slope1·s + slope2·t| ≤ 1e−12.
pub fn injectivity_obstruction(slope1: f64, slope2: f64) -> Result<(f64, f64)> {
    if !slope1.is_finite() || !slope2.is_finite() || slope1 == 0.0 || slope2 == 0.0 {
        return Err(Error::Invalid(format!(
            "slopes must be nonzero and finite, got ({slope1}, {slope2})"
        )));
    }
    let h = slope1.hypot(slope2);
    Ok((slope2 / h, -slope1 / h))
}

/// Sup over the grid of |Ainv(x+2) − Ainv(x) − 1| for a full-line
/// increasing candidate. Exact piecewise-linear inputs are evaluated in
/// rational arithmetic, so the translation dichotomy (residual exactly
/// 1 versus exactly 0) is decided without rounding.
pub fn affine_functional_equation_residual(
    ainv: &MapExpr,
    grid: &SampleGrid,
    cfg: &EvalConfig,
) -> Result<f64> {
    if !germ_domain(ainv)?.full_line {
        return Err(Error::NotFullLine(format!("{ainv}")));
    }
    if ainv.orientation() <= 0 {
        return Err(Error::Invalid(format!("{ainv} is not increasing")));
    }
    if !grid.top().is_finite() {
        return Err(Error::Precondition("grid exceeds the floating-point range".into()));
    }
    if let Some(pl) = ainv.as_pl() {
        let two = BigRational::from_integer(2.into());
        let one = BigRational::one();
        let mut worst = BigRational::zero();
        for x in grid.points() {
            let q = BigRational::from_float(x)
                .ok_or_else(|| Error::Invalid(format!("grid point {x} is not finite")))?;
            let r = (pl.eval_rational(&(q.clone() + &two)) - pl.eval_rational(&q) - &one).abs();
            if r > worst {
                worst = r;
            }
        }
        return Ok(f64::from_rational(&worst, 64));
    }
    let mut worst = 0.0f64;
    for x in grid.points() {
        let r = (eval_f64(ainv, x + 2.0, cfg)? - eval_f64(ainv, x, cfg)? - 1.0).abs();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Iterates x ← g(x) to a fixed point, for candidates that satisfy the
/// residual-zero functional equation g(x+2) = g(x) + 1 (such a map
/// halves displacements, so the iteration contracts). Converges to
/// |g(x⁎) − x⁎| ≤ 1e−9 in at most 200 steps or reports the violated
/// precondition.
pub fn contraction_fixed_point(g: &MapExpr, x0: f64, cfg: &EvalConfig) -> Result<f64> {
    let res = affine_functional_equation_residual(g, &SampleGrid::default(), cfg)?;
    if res > 1e-9 {
        return Err(Error::Precondition(format!(
            "functional-equation residual {res:.3e} exceeds 1e-9: not a contraction candidate"
        )));
    }
    let mut x = x0;
    for _ in 0..200 {
        let next = eval_f64(g, x, cfg)?;
        if !next.is_finite() {
            return Err(Error::Invalid("iteration left the floating-point range".into()));
        }
        // |g(next) − next| ≤ L·|next − x| with contraction factor L < 1.
        if (next - x).abs() <= 1e-9 {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Precondition(
        "iteration did not converge within 200 steps; not a contraction from this start".into(),
    ))
}

/// Disjoint open intervals with a chart onto each: the data of a
/// chart-diagonal embedding of a line action.
#[derive(Debug, Clone)]
pub struct DiagonalEmbedding {
    charts: Vec<Chart>,
}

impl DiagonalEmbedding {
    pub fn new(intervals: &[(f64, f64)]) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Invalid("embedding needs at least one interval".into()));
        }
        let charts: Vec<Chart> = intervals
            .iter()
            .map(|&(a, b)| Chart::new(a, b))
            .collect::<Result<_>>()?;
        check_disjoint(&charts)?;
        Ok(DiagonalEmbedding { charts })
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }
}

/// Transports an action into the charts: each generator acts by chart
/// conjugation inside every interval and identically outside. Generator
/// count and declared relations carry over unchanged.
pub fn diagonal_embed(act: &ActionSpec, emb: &DiagonalEmbedding) -> Result<ActionSpec> {
    let generators = act
        .generators()
        .iter()
        .map(|(name, h)| match h {
            LineHomeo::Expr(e) => Ok((
                name.clone(),
                LineHomeo::Diagonal {
                    charts: emb.charts().to_vec(),
                    inner: e.clone(),
                },
            )),
            LineHomeo::Diagonal { .. } => Err(Error::Precondition(format!(
                "generator {name} is already chart-embedded"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    ActionSpec::new(generators, act.relations_to_check().to_vec())
}

/// A parametrized candidate action of the scaling-shift product group:
/// a scaling generator family t ↦ a(t) and two shift summand families
/// s ↦ bⱼ(s) with distinct exponents i1 ≠ i2.
pub struct CandidateAction {
    pub i1: f64,
    pub i2: f64,
    pub a: Box<dyn Fn(f64) -> Result<LineHomeo>>,
    pub b1: Box<dyn Fn(f64) -> Result<LineHomeo>>,
    pub b2: Box<dyn Fn(f64) -> Result<LineHomeo>>,
}

/// Measured obstructions for one parameter point of a candidate family.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ObstructionReport {
    pub params: [f64; 3],
    /// Named residuals: the product-group relations, drift slopes of
    /// the shift summands, and the kernel-word measurements.
    pub residuals: Vec<(String, f64)>,
    /// A point a shift summand fixes, when drift estimation stalls.
    pub fixed_point_witness: Option<f64>,
    /// True when some obstruction disqualifies this parameter point.
    pub rejected: bool,
    pub conclusion: String,
}

struct ScanProbe {
    all: Vec<f64>,
    window: Vec<f64>,
}

fn scan_probe(grid: &SampleGrid) -> Result<ScanProbe> {
    if !grid.top().is_finite() {
        return Err(Error::Precondition("grid exceeds the floating-point range".into()));
    }
    let pts = grid.points();
    let mut all = pts.clone();
    all.extend(pts.iter().map(|x| -x));
    // Uniform window around the origin, where chart intervals live.
    let w = grid.x0.max(4.0);
    let window: Vec<f64> = (0..=128).map(|j| -w + f64::from(j) * (w / 64.0)).collect();
    all.extend(&window);
    Ok(ScanProbe { all, window })
}

fn chain_eval(maps: &[LineHomeo], x: f64, cfg: &EvalConfig) -> Result<f64> {
    maps.iter().rev().try_fold(x, |v, m| m.eval_at(v, cfg))
}

fn pair_residual(
    lhs: &[LineHomeo],
    rhs: &[LineHomeo],
    probe: &[f64],
    cfg: &EvalConfig,
) -> Result<f64> {
    let mut sup = 0.0f64;
    for &x in probe {
        let d = (chain_eval(lhs, x, cfg)? - chain_eval(rhs, x, cfg)?).abs();
        sup = sup.max(d);
    }
    Ok(sup)
}

enum Drift {
    Slope(f64),
    Fixed(f64),
}

/// Drift of a unit-parameter shift candidate, in chart coordinates for
/// diagonal maps and on the line otherwise.
fn chart_drift(h: &LineHomeo, cfg: &EvalConfig) -> Result<Drift> {
    let (expr, chart) = match h {
        LineHomeo::Expr(e) => (e, None),
        LineHomeo::Diagonal { charts, inner } => (inner, charts.first()),
    };
    match translation_number(expr, 0.0, 1024, cfg) {
        Ok(t) => Ok(Drift::Slope(t.value)),
        Err(Error::FixedPoint { x, .. }) => {
            Ok(Drift::Fixed(chart.map_or(x, |c| c.apply(x))))
        }
        Err(e) => Err(e),
    }
}

fn scan_point(
    cand: &CandidateAction,
    params: [f64; 3],
    probe: &ScanProbe,
    cfg: &EvalConfig,
) -> Result<ObstructionReport> {
    if !(cand.i1 >= 1.0 && cand.i2 >= 1.0) || cand.i1 == cand.i2 {
        return Err(Error::Invalid(format!(
            "candidate family needs two distinct shift exponents >= 1, got ({}, {})",
            cand.i1, cand.i2
        )));
    }
    let a2 = (cand.a)(2.0)?;
    let a4 = (cand.a)(4.0)?;
    let b1u = (cand.b1)(1.0)?;
    let b2u = (cand.b2)(1.0)?;
    let b1d = (cand.b1)(2.0)?;
    let b2d = (cand.b2)(2.0)?;
    let conj1 = (cand.b1)(2f64.powf(cand.i1 / (cand.i1 + 1.0)))?;
    let conj2 = (cand.b2)(2f64.powf(cand.i2 / (cand.i2 + 1.0)))?;

    let mut residuals: Vec<(String, f64)> = Vec::new();
    let push = |r: &mut Vec<(String, f64)>, name: &str, v: f64| r.push((name.into(), v));
    push(&mut residuals, "multA", pair_residual(&[a2.clone(), a2.clone()], &[a4], &probe.all, cfg)?);
    push(&mut residuals, "addB1", pair_residual(&[b1u.clone(), b1u.clone()], &[b1d], &probe.all, cfg)?);
    push(&mut residuals, "addB2", pair_residual(&[b2u.clone(), b2u.clone()], &[b2d], &probe.all, cfg)?);
    push(
        &mut residuals,
        "commB",
        pair_residual(&[b1u.clone(), b2u.clone()], &[b2u.clone(), b1u.clone()], &probe.all, cfg)?,
    );
    push(
        &mut residuals,
        "conjB1",
        pair_residual(&[a2.clone(), b1u.clone(), a2.inverse()], &[conj1], &probe.all, cfg)?,
    );
    push(
        &mut residuals,
        "conjB2",
        pair_residual(&[a2.clone(), b2u.clone(), a2.inverse()], &[conj2], &probe.all, cfg)?,
    );
    let worst_relation = residuals
        .iter()
        .map(|(_, v)| *v)
        .fold(0.0f64, f64::max);
    let worst_name = residuals
        .iter()
        .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite residuals"))
        .map(|(n, _)| n.clone())
        .expect("nonempty");

    let d1 = chart_drift(&b1u, cfg)?;
    let d2 = chart_drift(&b2u, cfg)?;
    let mut fixed_point_witness = None;
    let mut kernel_displacement = None;
    match (&d1, &d2) {
        (Drift::Slope(c1), Drift::Slope(c2)) if c1.abs() > 1e-9 && c2.abs() > 1e-9 => {
            push(&mut residuals, "tauSlope1", *c1);
            push(&mut residuals, "tauSlope2", *c2);
            let (s, t) = injectivity_obstruction(*c1, *c2)?;
            push(&mut residuals, "kernelResidual", (c1 * s + c2 * t).abs());
            let u1 = (cand.b1)(s)?;
            let u2 = (cand.b2)(t)?;
            let kd = pair_residual(&[u1, u2], &[], &probe.window, cfg)?;
            push(&mut residuals, "kernelWordDisplacement", kd);
            kernel_displacement = Some(kd);
        }
        _ => {
            for d in [&d1, &d2] {
                if let Drift::Fixed(x) = d {
                    fixed_point_witness = Some(*x);
                    break;
                }
            }
        }
    }

    let mut rejected = true;
    let conclusion = if let Some(kd) = kernel_displacement.filter(|kd| *kd <= 1e-3) {
        format!(
            "nontrivial kernel word acts within {kd:.3e} of the identity: injectivity fails"
        )
    } else if worst_relation >= 1e-2 {
        format!("relation {worst_name} violated with residual {worst_relation:.3e}")
    } else if fixed_point_witness.is_some() {
        "a shift summand has degenerate drift: injectivity fails".into()
    } else {
        rejected = false;
        "passes all scanned obstructions".into()
    };
    Ok(ObstructionReport {
        params,
        residuals,
        fixed_point_witness,
        rejected,
        conclusion,
    })
}

/// Scans a candidate family over a parameter grid, measuring the
/// product-group relation residuals and the kernel-word obstruction at
/// each point. Empty parameter grids yield empty reports.
pub fn relation_violation_scan(
    family: &dyn Fn([f64; 3]) -> Result<CandidateAction>,
    params: &[[f64; 3]],
    grid: &SampleGrid,
    cfg: &EvalConfig,
) -> Result<Vec<ObstructionReport>> {
    let probe = scan_probe(grid)?;
    params
        .iter()
        .map(|&p| scan_point(&family(p)?, p, &probe, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{realize, realize_glued, GeneratorSpec};
    use crate::pl::{rat, RationalPL};

    fn cfg() -> EvalConfig {
        EvalConfig::default()
    }

    fn translation(c: f64) -> MapExpr {
        MapExpr::affine(1.0, c).unwrap()
    }

    fn glued_b11() -> MapExpr {
        realize_glued(&GeneratorSpec::B { i: 1.0, s: 1.0 }).unwrap()
    }

    fn conjugated(k: &MapExpr, f: MapExpr) -> MapExpr {
        MapExpr::compose_chain(vec![k.clone(), f, MapExpr::inverse(k.clone())]).unwrap()
    }

    #[test]
    fn tau_of_unit_translation_is_one() {
        let t = translation_number(&translation(1.0), 0.0, 10_000, &cfg()).unwrap();
        assert!((t.value - 1.0).abs() <= 1e-9, "value {}", t.value);
        assert_eq!(t.iterations, 10_000);
        assert!(t.error_estimate <= 1e-12);
    }

    #[test]
    fn tau_of_log_scaling_matches_formula() {
        let a = realize(&GeneratorSpec::LogA { t: 2.0 }).unwrap();
        let t = translation_number(&a, 0.0, 10_000, &cfg()).unwrap();
        assert!(
            (t.value - std::f64::consts::LN_2).abs() <= 1e-3,
            "value {} vs ln 2",
            t.value
        );
    }

    #[test]
    fn tau_is_conjugation_invariant_numerically() {
        let k = glued_b11();
        let f = conjugated(&k, translation(1.0));
        let t = translation_number(&f, 1e6, 100_000, &cfg()).unwrap();
        assert!((t.value - 1.0).abs() <= 1e-3, "value {}", t.value);
        assert!(t.error_estimate <= 1e-3);
    }

    #[test]
    fn tau_reports_fixed_points_and_blowups() {
        let half = MapExpr::affine(0.5, 0.0).unwrap();
        match translation_number(&half, 10.0, 10_000, &cfg()) {
            Err(Error::FixedPoint { x, .. }) => assert!(x.abs() < 1e-6, "stall at {x}"),
            other => panic!("expected a fixed-point report, got {other:?}"),
        }
        let double = MapExpr::affine(2.0, 0.0).unwrap();
        match translation_number(&double, 1.0, 10_000, &cfg()) {
            Err(Error::Invalid(msg)) => assert!(msg.contains("floating-point range"), "{msg}"),
            other => panic!("expected a range error, got {other:?}"),
        }
    }

    #[test]
    fn holder_translations_are_additive() {
        let g = translation(1.0);
        let h = translation(std::f64::consts::SQRT_2);
        let r = holder_homomorphism_check(&g, &h, 0.0, 10_000, &cfg()).unwrap();
        assert!(r.additive);
        assert!(r.residual <= 1e-9, "residual {}", r.residual);
        assert!((r.tau_g - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn holder_square_doubles_the_drift() {
        let g = translation(1.0);
        let r = holder_homomorphism_check(&g, &g.clone(), 0.0, 10_000, &cfg()).unwrap();
        assert!((r.tau_composition - 2.0).abs() <= 1e-9);
    }

    #[test]
    fn holder_rejects_non_commuting_pairs() {
        let g = translation(1.0);
        let h = MapExpr::affine(2.0, 0.0).unwrap();
        match holder_homomorphism_check(&g, &h, 0.0, 100, &cfg()) {
            Err(Error::NonCommuting { defect, .. }) => assert!(defect > 0.5),
            other => panic!("expected a commutation error, got {other:?}"),
        }
    }

    #[test]
    fn holder_survives_glue_conjugation() {
        let k = glued_b11();
        let g = conjugated(&k, translation(1.0));
        let h = conjugated(&k, translation(std::f64::consts::SQRT_2));
        let r = holder_homomorphism_check(&g, &h, 1e6, 100_000, &cfg()).unwrap();
        assert!(r.additive, "residual {}", r.residual);
        assert!(r.residual <= 1e-3);
    }

    fn simple_action(cs: &[(&str, f64)]) -> ActionSpec {
        let gens = cs
            .iter()
            .map(|&(n, c)| (n.to_string(), LineHomeo::from(translation(c))))
            .collect();
        ActionSpec::new(gens, vec![]).unwrap()
    }

    #[test]
    fn semi_conjugacy_of_integer_translations_is_the_identity() {
        let act = simple_action(&[("t", 1.0)]);
        let sc = build_semi_conjugacy(&act, 0.0, 8, &cfg()).unwrap();
        assert_eq!(sc.grid_points.len(), 17);
        assert!(sc.residual <= 1e-9, "residual {}", sc.residual);
        for &(x, phi) in &sc.grid_points {
            assert!((phi - x).abs() <= 1e-9, "phi({x}) = {phi}");
        }
    }

    #[test]
    fn semi_conjugacy_of_translation_pair_is_near_identity() {
        let act = simple_action(&[("g", 1.0), ("h", std::f64::consts::SQRT_2)]);
        let sc = build_semi_conjugacy(&act, 0.0, 5, &cfg()).unwrap();
        assert!((sc.taus[0] - 1.0).abs() <= 1e-9);
        assert!((sc.taus[1] - std::f64::consts::SQRT_2).abs() <= 1e-9);
        assert!(sc.residual <= 1e-3, "residual {}", sc.residual);
        for w in sc.grid_points.windows(2) {
            assert!(w[1].1 >= w[0].1, "phi not monotone");
        }
    }

    #[test]
    fn semi_conjugacy_recovers_the_glue_chart() {
        let k = glued_b11();
        let act = ActionSpec::new(
            vec![("l".into(), LineHomeo::from(conjugated(&k, translation(1.0))))],
            vec![],
        )
        .unwrap();
        let x0 = 1e6;
        let sc = build_semi_conjugacy(&act, x0, 8, &cfg()).unwrap();
        assert!(sc.residual <= 1e-2, "residual {}", sc.residual);
        // phi agrees with the inverse glue chart up to the drift
        // estimation error, which is below 1e-2 at this depth.
        let kinv = MapExpr::inverse(k);
        let u0 = eval_f64(&kinv, x0, &cfg()).unwrap();
        assert!(sc.grid_points.len() >= 10);
        for &(x, phi) in &sc.grid_points {
            let expected = eval_f64(&kinv, x, &cfg()).unwrap() - u0;
            assert!((phi - expected).abs() <= 1e-2, "phi({x}) = {phi} vs {expected}");
        }
    }

    #[test]
    fn semi_conjugacy_detects_orbit_collisions() {
        let act = simple_action(&[("g", 1.0), ("h", 0.5)]);
        match build_semi_conjugacy(&act, 0.0, 2, &cfg()) {
            Err(Error::OrbitCollision { w1, w2, .. }) => {
                assert_ne!(w1, w2);
            }
            other => panic!("expected an orbit collision, got {other:?}"),
        }
    }

    #[test]
    fn linearity_holds_for_scaled_rationals() {
        let samples: Vec<(BigRational, f64)> = (-6..=6)
            .map(|j| {
                let q = rat(j, 3);
                let v = 3.0 * (j as f64) / 3.0;
                (q, v)
            })
            .collect();
        let r = linearity_test(&samples, 1e-9).unwrap();
        assert!(r.linear);
        assert!((r.slope - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn linearity_rejects_a_shifted_branch() {
        let samples: Vec<(BigRational, f64)> = (-6..=6)
            .map(|j| {
                let q = j as f64;
                (rat(j, 1), q + 0.5 * (q - 2.0).signum())
            })
            .collect();
        let r = linearity_test(&samples, 1e-6).unwrap();
        assert!(!r.linear, "worst deviation {}", r.worst_deviation);
    }

    #[test]
    fn linearity_requires_the_unit_sample() {
        let samples: Vec<(BigRational, f64)> = (2..14).map(|j| (rat(j, 1), j as f64)).collect();
        match linearity_test(&samples, 1e-9) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("q = 1"), "{msg}"),
            other => panic!("expected a precondition error, got {other:?}"),
        }
        match linearity_test(&samples[..5], 1e-9) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("10 samples"), "{msg}"),
            other => panic!("expected a precondition error, got {other:?}"),
        }
    }

    #[test]
    fn linearity_of_measured_translation_drifts() {
        let mut samples = Vec::new();
        for k in -5..=5i64 {
            let q = rat(k, 2);
            let c = k as f64 / 2.0;
            if c == 0.0 {
                samples.push((q, 0.0));
                continue;
            }
            let tau = translation_number(&translation(c), 0.0, 256, &cfg()).unwrap();
            samples.push((q, tau.value));
        }
        samples.push((rat(1, 1), translation_number(&translation(1.0), 0.0, 256, &cfg()).unwrap().value));
        let r = linearity_test(&samples, 1e-9).unwrap();
        assert!(r.linear);
        assert!((r.slope - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn kernel_vectors_annihilate_the_slope_pair() {
        let (s, t) = injectivity_obstruction(1.0, 1.0).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-12);
        assert!((t + std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-12);
        let (s, t) = injectivity_obstruction(2.0, 3.0).unwrap();
        let n13 = 13f64.sqrt();
        assert!((s - 3.0 / n13).abs() <= 1e-12 && (t + 2.0 / n13).abs() <= 1e-12);
        let (c1, c2) = (2f64.ln(), 3f64.ln());
        let (s, t) = injectivity_obstruction(c1, c2).unwrap();
        assert!((c1 * s + c2 * t).abs() <= 1e-12);
        assert!(matches!(injectivity_obstruction(0.0, 1.0), Err(Error::Invalid(_))));
    }

    #[test]
    fn functional_equation_separates_translations_from_halving() {
        let grid = SampleGrid::default();
        let r = affine_functional_equation_residual(&translation(-3.0), &grid, &cfg()).unwrap();
        assert!((r - 1.0).abs() <= 1e-12);
        let r = affine_functional_equation_residual(&MapExpr::affine(0.5, 0.0).unwrap(), &grid, &cfg()).unwrap();
        assert!(r <= 1e-12);
        let r = affine_functional_equation_residual(&MapExpr::affine(0.5, 7.0).unwrap(), &grid, &cfg()).unwrap();
        assert!(r <= 1e-12);
    }

    #[test]
    fn functional_equation_is_exact_on_pl_translations() {
        let pl = MapExpr::Pl(RationalPL::translation(rat(3, 1)));
        let r = affine_functional_equation_residual(&pl, &SampleGrid::default(), &cfg()).unwrap();
        assert_eq!(r, 1.0);
        let b = realize(&GeneratorSpec::B { i: 1.0, s: 1.0 }).unwrap();
        assert!(matches!(
            affine_functional_equation_residual(&b, &SampleGrid::default(), &cfg()),
            Err(Error::NotFullLine(_))
        ));
    }

    fn kinked_halving() -> MapExpr {
        // x/2 + 1/4 on x >= 0 (so on the whole sample grid), kinked on
        // [-2, 0] without breaking monotonicity; the unique fixed point
        // of the tail piece is exactly 1/2.
        MapExpr::Pl(
            RationalPL::new(
                vec![
                    (rat(-2, 1), rat(-3, 4)),
                    (rat(-1, 1), rat(0, 1)),
                    (rat(0, 1), rat(1, 4)),
                ],
                rat(1, 2),
                rat(1, 2),
            )
            .unwrap(),
        )
    }

    #[test]
    fn contraction_iteration_finds_fixed_points() {
        let fp = contraction_fixed_point(&MapExpr::affine(0.5, 0.0).unwrap(), 10.0, &cfg()).unwrap();
        assert!(fp.abs() <= 1e-8, "fp {fp}");
        let fp = contraction_fixed_point(&MapExpr::affine(0.5, 1.0).unwrap(), 10.0, &cfg()).unwrap();
        assert!((fp - 2.0).abs() <= 1e-8, "fp {fp}");
        let fp = contraction_fixed_point(&kinked_halving(), 10.0, &cfg()).unwrap();
        assert!((fp - 0.5).abs() <= 1e-8, "fp {fp} vs exact 1/2");
    }

    #[test]
    fn contraction_rejects_translations() {
        match contraction_fixed_point(&translation(1.0), 0.0, &cfg()) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("residual"), "{msg}"),
            other => panic!("expected a precondition error, got {other:?}"),
        }
    }

    #[test]
    fn charts_invert_where_representable() {
        let c = Chart::new(0.0, 1.0).unwrap();
        assert_eq!(c.apply(0.0), 0.5);
        let x = c.apply(2.0);
        assert!((c.invert(x).unwrap() - 2.0).abs() <= 1e-12);
        // Saturation: far coordinates land on the closed boundary,
        // which the open interval no longer contains.
        assert_eq!(c.apply(800.0), 1.0);
        assert!(!c.contains(c.apply(800.0)));
        assert!(matches!(Chart::new(2.0, 2.0), Err(Error::Invalid(_))));
    }

    #[test]
    fn embedding_fixes_the_complement_and_conjugates_inside() {
        let act = simple_action(&[("t", 1.0)]);
        let emb = DiagonalEmbedding::new(&[(0.0, 1.0)]).unwrap();
        let embedded = diagonal_embed(&act, &emb).unwrap();
        let g = &embedded.generators()[0].1;
        assert_eq!(g.eval_at(-3.0, &cfg()).unwrap(), -3.0);
        assert_eq!(g.eval_at(5.0, &cfg()).unwrap(), 5.0);
        let e = std::f64::consts::E;
        let v = g.eval_at(0.5, &cfg()).unwrap();
        assert!((v - e / (1.0 + e)).abs() <= 1e-12, "v {v}");
        // Increasing inside the interval.
        let mut prev = g.eval_at(0.05, &cfg()).unwrap();
        for k in 1..19 {
            let v = g.eval_at(0.05 + 0.05 * k as f64, &cfg()).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn embeddings_into_disjoint_intervals_commute() {
        let act = simple_action(&[("t", 1.0)]);
        let g1 = diagonal_embed(&act, &DiagonalEmbedding::new(&[(0.0, 1.0)]).unwrap())
            .unwrap()
            .generators()[0]
            .1
            .clone();
        let g2 = diagonal_embed(&act, &DiagonalEmbedding::new(&[(2.0, 3.0)]).unwrap())
            .unwrap()
            .generators()[0]
            .1
            .clone();
        for x in [-1.0, 0.3, 0.7, 2.2, 2.9, 4.0] {
            let a = g1.eval_at(g2.eval_at(x, &cfg()).unwrap(), &cfg()).unwrap();
            let b = g2.eval_at(g1.eval_at(x, &cfg()).unwrap(), &cfg()).unwrap();
            assert_eq!(a, b, "disjoint supports must commute exactly at {x}");
        }
    }

    #[test]
    fn embedding_preserves_declared_relations() {
        let gens = vec![
            ("g".to_string(), LineHomeo::from(translation(1.0))),
            ("h".to_string(), LineHomeo::from(translation(2.0))),
        ];
        let relations = vec![(vec![(0usize, 2i64)], vec![(1usize, 1i64)])];
        let act = ActionSpec::new(gens, relations).unwrap();
        let probe: Vec<f64> = (-8..=8).map(|j| 0.25 * f64::from(j)).collect();
        let src = act.relation_residuals(&probe, &cfg()).unwrap();
        assert!(src[0] <= 1e-12);
        let emb = DiagonalEmbedding::new(&[(0.0, 1.0), (2.0, 3.0)]).unwrap();
        let embedded = diagonal_embed(&act, &emb).unwrap();
        let dst = embedded.relation_residuals(&probe, &cfg()).unwrap();
        assert!(dst[0] <= 10.0 * 1e-12, "embedded residual {}", dst[0]);
    }

    #[test]
    fn embedded_drift_pulls_back_through_the_chart() {
        let act = simple_action(&[("t", 1.0)]);
        let emb = DiagonalEmbedding::new(&[(0.0, 1.0)]).unwrap();
        let embedded = diagonal_embed(&act, &emb).unwrap();
        let g = embedded.generators()[0].1.clone();
        let chart = emb.charts()[0];
        let pulled = FnMap(move |u: f64, c: &EvalConfig| chart.invert(g.eval_at(chart.apply(u), c)?));
        // The chart saturates near +-37, so the orbit budget is short.
        let t = translation_number(&pulled, -2.0, 16, &cfg()).unwrap();
        assert!((t.value - 1.0).abs() <= 1e-3, "value {}", t.value);
    }

    #[test]
    fn overlapping_intervals_are_rejected() {
        assert!(matches!(
            DiagonalEmbedding::new(&[(0.0, 1.0), (0.5, 1.5)]),
            Err(Error::Invalid(_))
        ));
        // Touching open intervals are disjoint.
        assert!(DiagonalEmbedding::new(&[(0.0, 1.0), (1.0, 2.0)]).is_ok());
    }

    #[test]
    fn action_spec_validates_generators_and_words() {
        let germ = realize(&GeneratorSpec::B { i: 1.0, s: 1.0 }).unwrap();
        assert!(matches!(
            ActionSpec::new(vec![("b".into(), LineHomeo::from(germ))], vec![]),
            Err(Error::Invalid(_))
        ));
        assert!(matches!(
            ActionSpec::new(vec![("r".into(), LineHomeo::from(MapExpr::Reflect))], vec![]),
            Err(Error::Invalid(_))
        ));
        let act = simple_action(&[("g", 1.0)]);
        assert!(matches!(
            ActionSpec::new(act.generators().to_vec(), vec![(vec![(3, 1)], vec![])]),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn words_apply_rightmost_letter_first() {
        let gens = vec![
            ("g".to_string(), LineHomeo::from(translation(1.0))),
            ("h".to_string(), LineHomeo::from(MapExpr::affine(2.0, 0.0).unwrap())),
        ];
        let act = ActionSpec::new(gens, vec![]).unwrap();
        let v = act.eval_word(&[(0, 1), (1, 1)], 3.0, &cfg()).unwrap();
        assert_eq!(v, 7.0);
        let v = act.eval_word(&[(1, 1), (0, 1)], 3.0, &cfg()).unwrap();
        assert_eq!(v, 8.0);
        let v = act.eval_word(&[(1, -1)], 8.0, &cfg()).unwrap();
        assert!((v - 4.0).abs() <= 1e-9);
    }

    fn base_charts() -> Vec<Chart> {
        vec![Chart::new(0.0, 1.0).unwrap(), Chart::new(2.0, 3.0).unwrap()]
    }

    fn translation_summand_family(p: [f64; 3]) -> Result<CandidateAction> {
        let charts = base_charts();
        Ok(CandidateAction {
            i1: 1.0,
            i2: 2.0,
            a: Box::new(move |t| {
                Ok(LineHomeo::Diagonal {
                    charts: charts.clone(),
                    inner: MapExpr::affine(1.0, p[0] * t.ln())?,
                })
            }),
            b1: Box::new(move |s| Ok(LineHomeo::from(MapExpr::affine(1.0, p[1] * s)?))),
            b2: Box::new(move |s| Ok(LineHomeo::from(MapExpr::affine(1.0, p[2] * s)?))),
        })
    }

    fn fixed_point_summand_family(p: [f64; 3]) -> Result<CandidateAction> {
        let charts = base_charts();
        let charts2 = base_charts();
        Ok(CandidateAction {
            i1: 1.0,
            i2: 2.0,
            a: Box::new(move |t| {
                Ok(LineHomeo::Diagonal {
                    charts: charts.clone(),
                    inner: MapExpr::affine(1.0, p[0] * t.ln())?,
                })
            }),
            b1: Box::new(move |s| {
                Ok(LineHomeo::Diagonal {
                    charts: charts2.clone(),
                    inner: MapExpr::affine(s.exp(), 0.0)?,
                })
            }),
            b2: Box::new(move |s| Ok(LineHomeo::from(MapExpr::affine(1.0, p[2] * s)?))),
        })
    }

    fn residual(report: &ObstructionReport, name: &str) -> f64 {
        report
            .residuals
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("missing residual {name}"))
    }

    #[test]
    fn scan_flags_the_translation_kernel_word() {
        let reports = relation_violation_scan(
            &translation_summand_family,
            &[[1.0, 0.7, 0.3]],
            &SampleGrid::default(),
            &cfg(),
        )
        .unwrap();
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert!(residual(r, "conjB1") >= 1e-2, "conjB1 {}", residual(r, "conjB1"));
        assert!(residual(r, "kernelResidual") <= 1e-12);
        assert!(residual(r, "kernelWordDisplacement") <= 1e-3);
        assert!(r.conclusion.contains("injectivity fails"), "{}", r.conclusion);
        assert!(r.fixed_point_witness.is_none());
    }

    #[test]
    fn scan_flags_the_fixed_point_family() {
        let reports = relation_violation_scan(
            &fixed_point_summand_family,
            &[[1.0, 0.0, 0.4]],
            &SampleGrid::default(),
            &cfg(),
        )
        .unwrap();
        let r = &reports[0];
        assert!(residual(r, "conjB1") >= 0.1, "conjB1 {}", residual(r, "conjB1"));
        let w = r.fixed_point_witness.expect("fixed point witness");
        assert!((w - 0.5).abs() <= 1e-9, "witness {w}");
        assert!(r.conclusion.contains("violated"), "{}", r.conclusion);
    }

    #[test]
    fn scan_of_an_empty_grid_is_empty() {
        let reports =
            relation_violation_scan(&translation_summand_family, &[], &SampleGrid::default(), &cfg())
                .unwrap();
        assert!(reports.is_empty());
    }
}
