use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Piecewise-linear bijection of the line with rational breakpoints and
/// positive rational slopes: the exact, decidable subsystem.
///
/// Representation: a nonempty list of breakpoints with strictly
/// increasing x, a slope extending left of the first breakpoint and a
/// slope extending right of the last. Canonical form keeps only true
/// kinks; a globally affine map is anchored at (0, f(0)).
#[derive(Debug, Clone)]
pub struct RationalPL {
    breakpoints: Vec<(BigRational, BigRational)>,
    left_slope: BigRational,
    right_slope: BigRational,
}

#[cfg(test)]
pub(crate) fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(num_bigint::BigInt::from(n), num_bigint::BigInt::from(d))
}

impl RationalPL {
    pub fn new(
        breakpoints: Vec<(BigRational, BigRational)>,
        left_slope: BigRational,
        right_slope: BigRational,
    ) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::Invalid("PL map needs at least one breakpoint".into()));
        }
        if !left_slope.is_positive() || !right_slope.is_positive() {
            return Err(Error::Invalid("PL end slopes must be positive".into()));
        }
        for w in breakpoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Invalid(
                    "PL breakpoint x-coordinates must be strictly increasing".into(),
                ));
            }
            if w[1].1 <= w[0].1 {
                return Err(Error::Invalid(
                    "PL breakpoint y-coordinates must be strictly increasing".into(),
                ));
            }
        }
        let pl = RationalPL {
            breakpoints,
            left_slope,
            right_slope,
        };
        Ok(pl.canonicalized())
    }

    pub fn identity() -> Self {
        RationalPL {
            breakpoints: vec![(BigRational::zero(), BigRational::zero())],
            left_slope: BigRational::one(),
            right_slope: BigRational::one(),
        }
    }

    /// x + c as a PL map.
    pub fn translation(c: BigRational) -> Self {
        RationalPL {
            breakpoints: vec![(BigRational::zero(), c)],
            left_slope: BigRational::one(),
            right_slope: BigRational::one(),
        }
    }

    /// a·x + b as a PL map (a > 0).
    pub fn affine(a: BigRational, b: BigRational) -> Result<Self> {
        RationalPL::new(vec![(BigRational::zero(), b)], a.clone(), a)
    }

    pub fn breakpoints(&self) -> &[(BigRational, BigRational)] {
        &self.breakpoints
    }

    pub fn left_slope(&self) -> &BigRational {
        &self.left_slope
    }

    pub fn right_slope(&self) -> &BigRational {
        &self.right_slope
    }

    /// Slope of the segment between breakpoints k and k+1.
    fn segment_slope(&self, k: usize) -> BigRational {
        let (x0, y0) = &self.breakpoints[k];
        let (x1, y1) = &self.breakpoints[k + 1];
        (y1 - y0) / (x1 - x0)
    }

    /// Slopes in left-to-right order: left, interior segments, right.
    fn slope_run(&self) -> Vec<BigRational> {
        let mut run = Vec::with_capacity(self.breakpoints.len() + 1);
        run.push(self.left_slope.clone());
        for k in 0..self.breakpoints.len() - 1 {
            run.push(self.segment_slope(k));
        }
        run.push(self.right_slope.clone());
        run
    }

    /// Drop breakpoints that are not kinks; anchor a pure affine map at
    /// x = 0 so equal maps share one representation.
    fn canonicalized(&self) -> Self {
        let run = self.slope_run();
        let mut kept = Vec::new();
        for (k, bp) in self.breakpoints.iter().enumerate() {
            if run[k] != run[k + 1] {
                kept.push(bp.clone());
            }
        }
        if kept.is_empty() {
            // Globally affine: f(0) = y0 - slope * x0.
            let (x0, y0) = &self.breakpoints[0];
            let at_zero = y0 - &self.left_slope * x0;
            return RationalPL {
                breakpoints: vec![(BigRational::zero(), at_zero)],
                left_slope: self.left_slope.clone(),
                right_slope: self.right_slope.clone(),
            };
        }
        RationalPL {
            breakpoints: kept,
            left_slope: self.left_slope.clone(),
            right_slope: self.right_slope.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == RationalPL::identity()
    }

    /// Exact evaluation.
    pub fn eval_rational(&self, x: &BigRational) -> BigRational {
        let bps = &self.breakpoints;
        let (x0, y0) = &bps[0];
        if x < x0 {
            return y0 + &self.left_slope * (x - x0);
        }
        let (xn, yn) = &bps[bps.len() - 1];
        if x >= xn {
            return yn + &self.right_slope * (x - xn);
        }
        // bps[k].0 <= x < bps[k+1].0 for some interior k.
        let k = match bps.binary_search_by(|(bx, _)| bx.cmp(x)) {
            Ok(k) => return bps[k].1.clone(),
            Err(ins) => ins - 1,
        };
        let (xk, yk) = &bps[k];
        yk + self.segment_slope(k) * (x - xk)
    }

    /// Numeric evaluation in any scalar backend.
    pub fn eval_scalar<S: Scalar>(&self, x: &S, bits: u32) -> S {
        let bps = &self.breakpoints;
        let lift = |q: &BigRational| S::from_rational(q, bits);
        let x0 = lift(&bps[0].0);
        if *x < x0 {
            return lift(&bps[0].1) + lift(&self.left_slope) * (x.clone() - x0);
        }
        let xn = lift(&bps[bps.len() - 1].0);
        if *x >= xn {
            return lift(&bps[bps.len() - 1].1) + lift(&self.right_slope) * (x.clone() - xn);
        }
        let mut k = 0;
        while k + 1 < bps.len() && lift(&bps[k + 1].0) <= *x {
            k += 1;
        }
        lift(&bps[k].1) + lift(&self.segment_slope(k)) * (x.clone() - lift(&bps[k].0))
    }

    /// Exact inverse: breakpoints transposed, slopes reciprocated.
    pub fn invert(&self) -> Self {
        let breakpoints = self
            .breakpoints
            .iter()
            .map(|(x, y)| (y.clone(), x.clone()))
            .collect();
        RationalPL {
            breakpoints,
            left_slope: self.left_slope.recip(),
            right_slope: self.right_slope.recip(),
        }
        .canonicalized()
    }

    /// Exact composition self ∘ g (apply g first).
    pub fn compose(&self, g: &RationalPL) -> Self {
        // Kinks of the composite can only sit at kinks of g or at
        // preimages under g of kinks of self.
        let g_inv = g.invert();
        let mut xs: Vec<BigRational> = g.breakpoints.iter().map(|(x, _)| x.clone()).collect();
        for (xf, _) in &self.breakpoints {
            xs.push(g_inv.eval_rational(xf));
        }
        xs.sort();
        xs.dedup();
        let breakpoints = xs
            .into_iter()
            .map(|x| {
                let y = self.eval_rational(&g.eval_rational(&x));
                (x, y)
            })
            .collect();
        RationalPL {
            breakpoints,
            left_slope: &self.left_slope * &g.left_slope,
            right_slope: &self.right_slope * &g.right_slope,
        }
        .canonicalized()
    }

    /// Shift every output by the exact constant c.
    pub fn shift_output(&self, c: &BigRational) -> Self {
        RationalPL {
            breakpoints: self
                .breakpoints
                .iter()
                .map(|(x, y)| (x.clone(), y + c))
                .collect(),
            left_slope: self.left_slope.clone(),
            right_slope: self.right_slope.clone(),
        }
    }

    /// Largest breakpoint x-coordinate (inputs beyond it are affine).
    pub fn last_kink_x(&self) -> &BigRational {
        &self.breakpoints[self.breakpoints.len() - 1].0
    }

    pub fn first_kink_x(&self) -> &BigRational {
        &self.breakpoints[0].0
    }
}

impl PartialEq for RationalPL {
    fn eq(&self, other: &Self) -> bool {
        // Constructors canonicalize, so field equality is map equality.
        self.breakpoints == other.breakpoints
            && self.left_slope == other.left_slope
            && self.right_slope == other.right_slope
    }
}

impl Eq for RationalPL {}

fn fmt_rat(q: &BigRational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if q.denom().is_one() {
        write!(f, "{}", q.numer())
    } else {
        write!(f, "{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for RationalPL {
    /// The DSL body: "x:y;…;slopes(l,r)".
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (x, y) in &self.breakpoints {
            fmt_rat(x, f)?;
            write!(f, ":")?;
            fmt_rat(y, f)?;
            write!(f, ";")?;
        }
        write!(f, "slopes(")?;
        fmt_rat(&self.left_slope, f)?;
        write!(f, ",")?;
        fmt_rat(&self.right_slope, f)?;
        write!(f, ")")
    }
}
