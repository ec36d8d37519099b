//! Eventual-displacement order: comparison verdicts, divergence
//! witnesses, staged sign assignment, and semigroup positivity checks.
//!
//! Everything here runs over [`HighPrec`] internally because the grids
//! that resolve slowly-growing maps (a log-shift needs |ln x| > 10³,
//! i.e. x beyond 1e434) leave f64 range long before the interesting
//! displacements appear.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::config::EvalConfig;
use crate::error::{Error, Result};
use crate::eval::{difference, displacement_at, eval};
use crate::expr::MapExpr;
use crate::metrics::{divergence_decision, SampleGrid};
use crate::scalar::{HighPrec, Scalar};

/// Displacement size past which a map counts as resolved at a point.
pub const WITNESS_THRESHOLD: f64 = 1e3;

/// Word-enumeration budget for [`semigroup_word_check`].
pub const WORD_BUDGET: u64 = 100_000;

/// Outcome of comparing two maps in the eventual-displacement order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", content = "evidence")]
pub enum OrderVerdict {
    Less,
    Greater,
    Equivalent,
    /// The difference diverges but its sign flips along the top half
    /// of the grid; carries that tail of g−f for diagnosis.
    Unresolved(Vec<f64>),
}

/// Order f against g by the eventual sign of g(x) − f(x).
///
/// Exact piecewise-linear inputs compare by right slope. Everything
/// else samples g−f over the grid and applies the same divergence rule
/// as the bounded-distance scan, so order and equivalence verdicts can
/// never disagree about whether a difference escapes to infinity; the
/// direction is read off the top half of the grid.
pub fn compare(
    f: &MapExpr,
    g: &MapExpr,
    grid: &SampleGrid,
    cfg: &EvalConfig,
) -> Result<OrderVerdict> {
    if let (Some(pf), Some(pg)) = (f.as_pl(), g.as_pl()) {
        use std::cmp::Ordering;
        return Ok(match pg.right_slope().cmp(pf.right_slope()) {
            Ordering::Greater => OrderVerdict::Less,
            Ordering::Less => OrderVerdict::Greater,
            Ordering::Equal => OrderVerdict::Equivalent,
        });
    }
    if !grid.top().is_finite() {
        return Err(Error::Precondition(
            "compare samples in f64; the grid must stay inside f64 range".into(),
        ));
    }
    let xs = grid.points();
    let mut diffs = Vec::with_capacity(xs.len());
    for &x in &xs {
        diffs.push(difference(g, f, x, cfg)?);
    }
    if divergence_decision(&xs, &diffs).is_none() {
        return Ok(OrderVerdict::Equivalent);
    }
    let tail = &diffs[xs.len() / 2..];
    if tail.iter().all(|d| *d > 0.0) {
        Ok(OrderVerdict::Less)
    } else if tail.iter().all(|d| *d < 0.0) {
        Ok(OrderVerdict::Greater)
    } else {
        Ok(OrderVerdict::Unresolved(tail.to_vec()))
    }
}

/// Grid subsequence along which |f(x)−x| strictly increases, every
/// value past [`WITNESS_THRESHOLD`]. Displacements keep their signs.
#[derive(Debug, Clone)]
pub struct WitnessSequence {
    points: Vec<HighPrec>,
    displacements: Vec<HighPrec>,
}

impl WitnessSequence {
    pub fn points(&self) -> &[HighPrec] {
        &self.points
    }

    pub fn displacements(&self) -> &[HighPrec] {
        &self.displacements
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest witness point; construction guarantees at least one.
    pub fn tail_point(&self) -> &HighPrec {
        self.points.last().expect("witness sequences are nonempty")
    }
}

impl Serialize for WitnessSequence {
    // Points reach far past f64 range, so both lists serialize as
    // decimal scientific strings rather than JSON numbers.
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let render = |v: &[HighPrec]| v.iter().map(HighPrec::to_sci_string).collect::<Vec<_>>();
        let mut st = s.serialize_struct("WitnessSequence", 2)?;
        st.serialize_field("points", &render(&self.points))?;
        st.serialize_field("displacements", &render(&self.displacements))?;
        st.end()
    }
}

/// Mantissa width that keeps unit displacements visible at the top of
/// the grid: the top point occupies ~count·log₂(ratio) bits before the
/// binary point, and the evaluation needs slack behind it.
fn working_bits(grid: &SampleGrid, cfg: &EvalConfig) -> u32 {
    let span = grid.count as f64 * grid.ratio.log2() + grid.x0.log2().max(0.0);
    cfg.precision_bits.max(span.ceil() as u32 + 128)
}

/// Greedy strictly-increasing-|d| subsequence of the grid indices,
/// restricted to displacements already past the threshold: the witness
/// models the escaping tail, where quantitative bounds about f apply,
/// not the low region where a grid-estimated (K, C) says nothing.
fn witness_indices(disps: &[HighPrec]) -> Vec<usize> {
    let thr = HighPrec::from_f64(WITNESS_THRESHOLD, 32);
    let mut idx = Vec::new();
    let mut best: Option<HighPrec> = None;
    for (i, d) in disps.iter().enumerate() {
        let a = d.clone().abs();
        if a > thr && best.as_ref().is_none_or(|b| a > *b) {
            idx.push(i);
            best = Some(a);
        }
    }
    idx
}

fn pick(values: &[HighPrec], idx: &[usize]) -> Vec<HighPrec> {
    idx.iter().map(|&i| values[i].clone()).collect()
}

/// Locate a divergence witness for f on the grid.
///
/// Returns the greedy subsequence of grid points past the threshold
/// along which the absolute displacement strictly increases; when no
/// grid point clears [`WITNESS_THRESHOLD`] the map is evidence-trivial
/// on this grid and `NoWitness` reports how close it came.
pub fn find_witness(f: &MapExpr, grid: &SampleGrid, cfg: &EvalConfig) -> Result<WitnessSequence> {
    let bits = working_bits(grid, cfg);
    let points = grid.points_scalar::<HighPrec>(bits);
    let mut disps = Vec::with_capacity(points.len());
    for x in &points {
        disps.push(displacement_at(f, x, cfg)?);
    }
    let idx = witness_indices(&disps);
    if idx.is_empty() {
        let max_disp = disps
            .iter()
            .map(|d| d.clone().abs().to_f64())
            .fold(0.0, f64::max);
        return Err(Error::NoWitness {
            max_disp,
            threshold: WITNESS_THRESHOLD,
        });
    }
    Ok(WitnessSequence {
        points: pick(&points, &idx),
        displacements: pick(&disps, &idx),
    })
}

/// One stage of the sign-assignment procedure.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Stage {
    /// Indices of the maps still unclassified when the stage began.
    pub surviving: Vec<usize>,
    /// Index of the map whose witness drives this stage.
    pub chosen: usize,
    pub witness: WitnessSequence,
    /// Max sup-displacement along the witness over maps that stayed
    /// bounded this stage (0 when every survivor classified).
    pub bound_used: f64,
}

/// Signs ε ∈ {±1} per input map, plus the stages that produced them.
#[derive(Debug, Clone, Serialize)]
pub struct SignAssignment {
    pub epsilons: Vec<i8>,
    pub stages: Vec<Stage>,
}

enum TailClass {
    Diverges(i8),
    Bounded(f64),
    Oscillating,
}

/// Classify a map along a stage witness by its last ≤5 displacements
/// there: a final value past the threshold with one sign and
/// nondecreasing magnitude across the tail reads as divergence; mixed
/// signs at that size abort the procedure (sampling cannot certify the
/// subsequence extraction a genuinely oscillating map would need); the
/// rest stay bounded, reported with their sup along the whole witness.
fn classify_tail(values: &[&HighPrec]) -> TailClass {
    let zero = HighPrec::from_f64(0.0, 32);
    let tail = &values[values.len() - values.len().min(5)..];
    let final_size = (*tail.last().expect("witness tail is nonempty")).clone().abs();
    if final_size.to_f64() > WITNESS_THRESHOLD {
        let pos = tail.iter().all(|v| **v > zero);
        let neg = tail.iter().all(|v| **v < zero);
        if pos || neg {
            let nondec = tail
                .windows(2)
                .all(|w| w[1].clone().abs() >= w[0].clone().abs());
            if nondec {
                return TailClass::Diverges(if pos { 1 } else { -1 });
            }
        } else {
            return TailClass::Oscillating;
        }
    }
    let sup = values
        .iter()
        .map(|v| (*v).clone().abs().to_f64())
        .fold(0.0, f64::max);
    TailClass::Bounded(sup)
}

/// Assign a sign to every map by the staged witness procedure.
///
/// Each stage picks the surviving map with the largest grid
/// displacement, takes its witness sequence, and classifies every
/// survivor along it: diverging to +∞ gives ε=+1, to −∞ gives ε=−1,
/// and maps bounded along the witness survive to the next stage under
/// the recorded bound. The surviving set strictly decreases, so at
/// most one stage per input runs. Stages abort with diagnostics when
/// a map's sign oscillates at resolved size or when no progress is
/// possible on this grid.
pub fn assign_signs(
    fs: &[MapExpr],
    grid: &SampleGrid,
    cfg: &EvalConfig,
) -> Result<SignAssignment> {
    if fs.is_empty() {
        return Err(Error::Invalid("assign_signs needs at least one map".into()));
    }
    let bits = working_bits(grid, cfg);
    let points = grid.points_scalar::<HighPrec>(bits);
    let mut table = Vec::with_capacity(fs.len());
    for f in fs {
        let mut row = Vec::with_capacity(points.len());
        for x in &points {
            row.push(displacement_at(f, x, cfg)?);
        }
        table.push(row);
    }
    let sup: Vec<HighPrec> = table
        .iter()
        .map(|row| {
            row.iter()
                .map(|d| d.clone().abs())
                .max_by(|a, b| a.partial_cmp(b).expect("big floats are totally ordered"))
                .expect("grid is nonempty")
        })
        .collect();

    let mut epsilons = vec![0i8; fs.len()];
    let mut surviving: Vec<usize> = (0..fs.len()).collect();
    let mut stages = Vec::new();
    while !surviving.is_empty() {
        // Largest displacement first: it resolves the most maps per
        // stage; ties break to the earliest index for determinism.
        let mut chosen = surviving[0];
        for &i in &surviving[1..] {
            if sup[i] > sup[chosen] {
                chosen = i;
            }
        }
        let idx = witness_indices(&table[chosen]);
        if sup[chosen].to_f64() <= WITNESS_THRESHOLD {
            return Err(Error::NoWitness {
                max_disp: sup[chosen].to_f64(),
                threshold: WITNESS_THRESHOLD,
            });
        }
        let witness = WitnessSequence {
            points: pick(&points, &idx),
            displacements: pick(&table[chosen], &idx),
        };
        let mut next = Vec::new();
        let mut bound: f64 = 0.0;
        for &i in &surviving {
            let along: Vec<&HighPrec> = idx.iter().map(|&k| &table[i][k]).collect();
            match classify_tail(&along) {
                TailClass::Diverges(sign) => epsilons[i] = sign,
                TailClass::Bounded(m) => {
                    bound = bound.max(m);
                    next.push(i);
                }
                TailClass::Oscillating => {
                    return Err(Error::SignAssignment(format!(
                        "map {i} ({}) oscillates in sign at resolved size along the stage witness",
                        fs[i]
                    )));
                }
            }
        }
        stages.push(Stage {
            surviving: surviving.clone(),
            chosen,
            witness,
            bound_used: bound,
        });
        if next.len() == surviving.len() {
            return Err(Error::SignAssignment(format!(
                "stage {} classified nothing; {} maps stay bounded by {bound:.3e} on this grid",
                stages.len(),
                next.len()
            )));
        }
        surviving = next;
    }
    Ok(SignAssignment { epsilons, stages })
}

/// Verdict of the semigroup positivity scan.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WordCheck {
    /// True iff every word moved its stage's tail point past the
    /// threshold in the positive direction.
    pub all_positive: bool,
    /// Word with the smallest displacement, outermost letter first.
    pub worst_word: String,
    pub worst_value: f64,
    pub words_checked: u64,
}

struct WordWalk<'a> {
    letters: &'a [MapExpr],
    names: &'a [String],
    stage_masks: &'a [u64],
    cfg: &'a EvalConfig,
    max_len: u32,
    stage: usize,
    tail: &'a HighPrec,
    all_positive: bool,
    worst: Option<(f64, String)>,
    words: u64,
}

impl WordWalk<'_> {
    /// Depth-first over letter sequences; `v` is the current suffix
    /// applied to the stage tail, `mask` the set of letters used.
    /// Extending a suffix wraps a new outermost letter around it, so
    /// every node is one fresh evaluation.
    fn run(&mut self, v: &HighPrec, mask: u64, path: &mut Vec<usize>) -> Result<()> {
        if path.len() as u32 == self.max_len {
            return Ok(());
        }
        for i in 0..self.letters.len() {
            let v2 = eval(&self.letters[i], v, self.cfg)?;
            path.push(i);
            let m2 = mask | (1 << i);
            if deepest_stage(self.stage_masks, m2) == self.stage {
                self.words += 1;
                let d = (v2.clone() - self.tail.clone()).to_f64();
                if d <= WITNESS_THRESHOLD {
                    self.all_positive = false;
                }
                if self.worst.as_ref().is_none_or(|w| d < w.0) {
                    let name = path
                        .iter()
                        .rev()
                        .map(|&j| self.names[j].as_str())
                        .collect::<Vec<_>>()
                        .join("*");
                    self.worst = Some((d, name));
                }
            }
            self.run(&v2, m2, path)?;
            path.pop();
        }
        Ok(())
    }
}

/// Deepest stage whose surviving set contains every letter of `mask`;
/// stage 0 holds all letters, so this always resolves.
fn deepest_stage(stage_masks: &[u64], mask: u64) -> usize {
    stage_masks
        .iter()
        .rposition(|m| mask & !m == 0)
        .expect("stage 0 contains every letter")
}

/// Enumerate all semigroup words of length ≤ `max_len` in the signed
/// letters f_i^{ε_i} and check each diverges positively.
///
/// A word built from letters that all survive to stage t is tested at
/// stage t's witness tail (the deepest such stage): its displacement
/// there must exceed [`WITNESS_THRESHOLD`]. Inverse letters evaluate
/// with an absolute tolerance floor of at most 1e−6 so bisection stays
/// meaningful at tail points far beyond f64 range.
pub fn semigroup_word_check(
    assignment: &SignAssignment,
    fs: &[MapExpr],
    max_len: u32,
    _grid: &SampleGrid,
    cfg: &EvalConfig,
) -> Result<WordCheck> {
    if fs.len() != assignment.epsilons.len() || assignment.epsilons.contains(&0) {
        return Err(Error::Precondition(
            "the sign assignment must cover exactly the given maps".into(),
        ));
    }
    if fs.is_empty() || max_len == 0 {
        return Err(Error::Invalid("need at least one map and length ≥ 1".into()));
    }
    if fs.len() > 64 {
        return Err(Error::Invalid("letter masks hold at most 64 maps".into()));
    }
    let k = fs.len() as u128;
    let mut count: u128 = 0;
    let mut layer: u128 = 1;
    for _ in 0..max_len {
        layer = layer.saturating_mul(k);
        count = count.saturating_add(layer);
    }
    if count > WORD_BUDGET as u128 {
        return Err(Error::WordBudget {
            count: count.min(u64::MAX as u128) as u64,
            budget: WORD_BUDGET,
        });
    }

    let letters: Vec<MapExpr> = fs
        .iter()
        .zip(&assignment.epsilons)
        .map(|(f, &e)| {
            if e > 0 {
                f.clone()
            } else {
                MapExpr::inverse(f.clone())
            }
        })
        .collect();
    let names: Vec<String> = letters.iter().map(|l| l.to_string()).collect();
    let stage_masks: Vec<u64> = assignment
        .stages
        .iter()
        .map(|s| s.surviving.iter().fold(0u64, |m, &i| m | (1 << i)))
        .collect();
    // Tail points sit far out; inverses there need an absolute
    // tolerance or the default relative one dwarfs the displacement.
    let cfg = EvalConfig {
        inverse_abs_floor: Some(cfg.inverse_abs_floor.map_or(1e-6, |f| f.min(1e-6))),
        ..cfg.clone()
    };

    let mut all_positive = true;
    let mut worst: Option<(f64, String)> = None;
    let mut words = 0u64;
    for (t, stage) in assignment.stages.iter().enumerate() {
        let mut walk = WordWalk {
            letters: &letters,
            names: &names,
            stage_masks: &stage_masks,
            cfg: &cfg,
            max_len,
            stage: t,
            tail: stage.witness.tail_point(),
            all_positive: true,
            worst: None,
            words: 0,
        };
        let mut path = Vec::new();
        let start = stage.witness.tail_point().clone();
        walk.run(&start, 0, &mut path)?;
        all_positive &= walk.all_positive;
        words += walk.words;
        if let Some((d, name)) = walk.worst {
            if worst.as_ref().is_none_or(|w| d < w.0) {
                worst = Some((d, name));
            }
        }
    }
    let (worst_value, worst_word) = worst.expect("every word lands in some stage");
    Ok(WordCheck {
        all_positive,
        worst_word,
        worst_value,
        words_checked: words,
    })
}

/// Check the inverse-displacement bound f⁻¹(x) − x ≤ −((1/K)(f(x)−x) − C)
/// at every witness point, with 1e−6 slack.
///
/// The witness must be one for f itself (its displacements appear as
/// f(x)−x in the bound) and all displacements must be positive.
pub fn inverse_displacement_check(
    f: &MapExpr,
    witness: &WitnessSequence,
    k: f64,
    c: f64,
    cfg: &EvalConfig,
) -> Result<bool> {
    let zero = HighPrec::from_f64(0.0, 32);
    if witness.is_empty() {
        return Err(Error::Precondition("the witness is empty".into()));
    }
    if witness
        .displacements
        .iter()
        .any(|d| d.partial_cmp(&zero) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::Precondition(
            "the witness displacements must all be positive".into(),
        ));
    }
    if !k.is_finite() || !c.is_finite() || k < 1.0 || c < 0.0 {
        return Err(Error::Precondition("need finite K ≥ 1 and C ≥ 0".into()));
    }
    let inv = MapExpr::inverse(f.clone());
    let bits = cfg.precision_bits.max(64);
    let hk = HighPrec::from_f64(k, bits);
    let hc = HighPrec::from_f64(c, bits);
    // The 1e−6 slack only means something if the inverse is solved to
    // better than that absolutely; the default relative tolerance is
    // astronomically loose at witness points beyond f64 range.
    let cfg = EvalConfig {
        inverse_abs_floor: Some(cfg.inverse_abs_floor.map_or(1e-9, |f| f.min(1e-9))),
        ..cfg.clone()
    };
    for (x, d) in witness.points.iter().zip(&witness.displacements) {
        let lhs = eval(&inv, x, &cfg)? - x.clone();
        let rhs = -(d.clone() / hk.clone() - hc.clone());
        if (lhs - rhs).to_f64() > 1e-6 {
            return Ok(false);
        }
    }
    Ok(true)
}
