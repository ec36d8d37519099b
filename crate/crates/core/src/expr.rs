use std::fmt;

use crate::error::{Error, Result};
use crate::pl::RationalPL;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Closed expression grammar for eventually-defined maps of the line.
///
/// Every variant denotes a continuous map that is strictly monotone on
/// its germ domain; all variants except `Reflect` (and composites with
/// an odd number of reflections) are orientation-preserving. Composition
/// chains are kept left-associated as the canonical tree shape.
#[derive(Debug, Clone, PartialEq)]
pub enum MapExpr {
    Identity,
    /// x ↦ a·x + b with a > 0.
    Affine { a: f64, b: f64 },
    /// x ↦ x + s·x^{1/(i+1)} with i ≥ 1; germ at +∞ for s < 0.
    PowerShift { i: f64, s: f64 },
    /// x ↦ x + s·ln(1+x); germ at +∞ for s ≤ −1.
    LogShift { s: f64 },
    /// The fixed glue map: eˣ for x ≥ 1, −e^{−x} for x ≤ −1, e·x between.
    ExpGlue,
    /// x ↦ −x (orientation-reversing).
    Reflect,
    /// Exact piecewise-linear bijection.
    Pl(RationalPL),
    /// Integer-translation lift: x ↦ ⌊x⌋ + p(x − ⌊x⌋) for a PL map p
    /// on [0,1] with p(1) = p(0) + 1, so f(x+1) = f(x) + 1.
    PeriodicLift(RationalPL),
    /// inner(x) for x ≥ threshold, continued below by the unit-slope
    /// translation x + (inner(threshold) − threshold).
    Glue { threshold: f64, inner: Box<MapExpr> },
    /// Left map applied last: Compose(f, g) is x ↦ f(g(x)).
    Compose(Box<MapExpr>, Box<MapExpr>),
    Inverse(Box<MapExpr>),
}

impl MapExpr {
    pub fn affine(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Invalid(format!("affine slope must be positive, got {a}")));
        }
        if !b.is_finite() {
            return Err(Error::Invalid(format!("affine offset must be finite, got {b}")));
        }
        Ok(MapExpr::Affine { a, b })
    }

    pub fn power_shift(i: f64, s: f64) -> Result<Self> {
        if !(i.is_finite() && i >= 1.0) {
            return Err(Error::Invalid(format!("i must be >= 1, got {i}")));
        }
        if !s.is_finite() {
            return Err(Error::Invalid(format!("s must be finite, got {s}")));
        }
        Ok(MapExpr::PowerShift { i, s })
    }

    pub fn log_shift(s: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::Invalid(format!("s must be finite, got {s}")));
        }
        Ok(MapExpr::LogShift { s })
    }

    /// A periodic-lift generator from its [0,1] piece.
    pub fn periodic_lift(pl01: RationalPL) -> Result<Self> {
        let zero = BigRational::zero();
        let one = BigRational::one();
        for (x, _) in pl01.breakpoints() {
            if *x < zero || *x > one {
                return Err(Error::Invalid(
                    "lift breakpoints must lie inside [0,1]".into(),
                ));
            }
        }
        let wrap = pl01.eval_rational(&one) - pl01.eval_rational(&zero);
        if wrap != one {
            return Err(Error::Invalid(format!(
                "lift piece must gain exactly 1 over [0,1], gains {wrap}"
            )));
        }
        Ok(MapExpr::PeriodicLift(pl01))
    }

    pub fn glue(inner: MapExpr, threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::Invalid("glue threshold must be finite".into()));
        }
        if inner.orientation() != 1 {
            return Err(Error::Invalid(
                "glue requires an orientation-preserving inner map".into(),
            ));
        }
        Ok(MapExpr::Glue {
            threshold,
            inner: Box::new(inner),
        })
    }

    pub fn compose(f: MapExpr, g: MapExpr) -> Self {
        MapExpr::Compose(Box::new(f), Box::new(g))
    }

    pub fn inverse(f: MapExpr) -> Self {
        MapExpr::Inverse(Box::new(f))
    }

    /// Left-associated composition of a nonempty chain, first entry
    /// applied last (matching the "*" notation).
    pub fn compose_chain(mut maps: Vec<MapExpr>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::Invalid("empty composition chain".into()));
        }
        let mut acc = maps.remove(0);
        for m in maps {
            acc = MapExpr::compose(acc, m);
        }
        Ok(acc)
    }

    /// +1 for orientation-preserving, −1 for reversing.
    pub fn orientation(&self) -> i8 {
        match self {
            MapExpr::Reflect => -1,
            MapExpr::Compose(f, g) => f.orientation() * g.orientation(),
            MapExpr::Inverse(f) => f.orientation(),
            MapExpr::Glue { .. } => 1,
            _ => 1,
        }
    }

    pub fn as_pl(&self) -> Option<&RationalPL> {
        match self {
            MapExpr::Pl(pl) => Some(pl),
            _ => None,
        }
    }
}

/// Domain certificate: the map is defined and strictly monotone on
/// [x0, +∞), or on all of ℝ when `full_line` is set (x0 then reported
/// as 0 by convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GermDomain {
    pub x0: f64,
    pub full_line: bool,
}

impl GermDomain {
    pub fn full() -> Self {
        GermDomain {
            x0: 0.0,
            full_line: true,
        }
    }

    pub fn from_threshold(x0: f64) -> Self {
        GermDomain {
            x0,
            full_line: false,
        }
    }

    /// Left edge as a number: −∞ for full-line domains.
    pub fn lower_edge(&self) -> f64 {
        if self.full_line {
            f64::NEG_INFINITY
        } else {
            self.x0
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.full_line || x >= self.x0
    }
}

fn fmt_num(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    // Rust's Display for f64 is the shortest round-tripping decimal.
    write!(f, "{v}")
}

impl fmt::Display for MapExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapExpr::Identity => write!(f, "id"),
            MapExpr::Affine { a, b } => {
                write!(f, "affine(")?;
                fmt_num(*a, f)?;
                write!(f, ",")?;
                fmt_num(*b, f)?;
                write!(f, ")")
            }
            MapExpr::PowerShift { i, s } => {
                write!(f, "B(")?;
                fmt_num(*i, f)?;
                write!(f, ",")?;
                fmt_num(*s, f)?;
                write!(f, ")")
            }
            MapExpr::LogShift { s } => {
                write!(f, "logshift(")?;
                fmt_num(*s, f)?;
                write!(f, ")")
            }
            MapExpr::ExpGlue => write!(f, "h"),
            MapExpr::Reflect => write!(f, "refl"),
            MapExpr::Pl(pl) => write!(f, "pl[{pl}]"),
            MapExpr::PeriodicLift(pl) => write!(f, "lift[{pl}]"),
            MapExpr::Glue { threshold, inner } => {
                write!(f, "glue({inner},")?;
                fmt_num(*threshold, f)?;
                write!(f, ")")
            }
            MapExpr::Compose(l, r) => write!(f, "{l}*{r}"),
            MapExpr::Inverse(inner) => write!(f, "inv({inner})"),
        }
    }
}
