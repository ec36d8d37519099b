use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use num_bigint::{BigInt, Sign};
use num_rational::BigRational;

/// Binary big float with banker's rounding; each value carries its own
/// working precision, so precision set at the leaves flows through
/// arithmetic (dashu propagates the max of the operand precisions).
pub type BigFloat = FBig<HalfEven, 2>;

/// Number type an evaluator can run over.
///
/// `f64` is the fast path; [`HighPrec`] evaluates the same expressions
/// with a caller-chosen mantissa width for arguments where f64 would
/// lose the displacement entirely (x beyond ~1e15 already rounds x+1
/// to x). All operations are by value and total on finite inputs.
pub trait Scalar:
    Clone
    + PartialOrd
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Inject a finite f64 at `bits` of working precision.
    fn from_f64(v: f64, bits: u32) -> Self;
    /// Inject an exact rational at `bits` of working precision.
    fn from_rational(q: &BigRational, bits: u32) -> Self;
    /// Nearest f64 (may overflow to infinity for huge values).
    fn to_f64(&self) -> f64;
    fn abs(self) -> Self;
    fn exp(self) -> Self;
    /// Natural log; caller guarantees a positive argument.
    fn ln(self) -> Self;
    /// Self^e for positive self.
    fn powf(self, e: Self) -> Self;
    fn floor(self) -> Self;
    fn is_finite(&self) -> bool;
}

impl Scalar for f64 {
    fn from_f64(v: f64, _bits: u32) -> Self {
        v
    }

    fn from_rational(q: &BigRational, _bits: u32) -> Self {
        // Convert through the big-float backend so ratios of huge
        // integers round correctly instead of overflowing part-wise.
        HighPrec::from_rational(q, 64).to_f64()
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs(self) -> Self {
        f64::abs(self)
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }

    fn powf(self, e: Self) -> Self {
        f64::powf(self, e)
    }

    fn floor(self) -> Self {
        f64::floor(self)
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

/// Arbitrary-precision scalar backed by a binary big float.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub struct HighPrec(pub BigFloat);

impl HighPrec {
    /// Decimal scientific notation, usable far past f64 range.
    ///
    /// Values that fit in f64 render with full 17-digit precision;
    /// larger ones split off the decimal exponent through the log and
    /// keep ~13 digits, which is plenty for reports (the value itself
    /// is never reconstructed from the string).
    pub fn to_sci_string(&self) -> String {
        let v = self.to_f64();
        if v.is_finite() {
            return format!("{v:.16e}");
        }
        let neg = self.0 < BigFloat::ZERO;
        let l10 = self.clone().abs().ln().to_f64() / std::f64::consts::LN_10;
        let e10 = l10.floor();
        let m = 10f64.powf(l10 - e10);
        format!("{}{m:.12}e{e10}", if neg { "-" } else { "" })
    }

    /// Exact conversion of a big integer, then rounding to `bits`.
    fn from_bigint(n: &BigInt, bits: u32) -> BigFloat {
        let (sign, digits) = n.to_u32_digits();
        // Precision 0 marks a dashu float as exact: the fold must not
        // round, or low-order digits of wide integers vanish.
        let base = BigFloat::from(1u64 << 32).with_precision(0).value();
        let mut acc = BigFloat::ZERO;
        for d in digits.iter().rev() {
            acc = acc * &base + BigFloat::from(*d).with_precision(0).value();
        }
        if sign == Sign::Minus {
            acc = -acc;
        }
        acc.with_precision(bits as usize).value()
    }
}

impl Add for HighPrec {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        HighPrec(self.0 + rhs.0)
    }
}

impl Sub for HighPrec {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        HighPrec(self.0 - rhs.0)
    }
}

impl Mul for HighPrec {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        HighPrec(self.0 * rhs.0)
    }
}

impl Div for HighPrec {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        HighPrec(self.0 / rhs.0)
    }
}

impl Neg for HighPrec {
    type Output = Self;
    fn neg(self) -> Self {
        HighPrec(-self.0)
    }
}

impl Scalar for HighPrec {
    fn from_f64(v: f64, bits: u32) -> Self {
        assert!(v.is_finite(), "cannot lift non-finite f64 {v} to HighPrec");
        HighPrec(
            BigFloat::try_from(v)
                .expect("finite f64 converts exactly")
                .with_precision(bits as usize)
                .value(),
        )
    }

    fn from_rational(q: &BigRational, bits: u32) -> Self {
        // Guard digits so the final rounding of the quotient is clean.
        let work = bits as usize + 32;
        let n = Self::from_bigint(q.numer(), work as u32);
        let d = Self::from_bigint(q.denom(), work as u32);
        HighPrec((n / d).with_precision(bits as usize).value())
    }

    fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }

    fn abs(self) -> Self {
        if self.0 < BigFloat::ZERO {
            HighPrec(-self.0)
        } else {
            self
        }
    }

    fn exp(self) -> Self {
        HighPrec(self.0.exp())
    }

    fn ln(self) -> Self {
        // The backend's ln slows to a crawl once the binary exponent is
        // astronomically large (values like e^{10⁸} from exp-conjugated
        // maps), so split off the power of two and reduce to ln on [1,2):
        // ln(x) = ln(x·2^{−m}) + m·ln 2 with m = ⌊log₂ x⌋.
        assert!(self.0 > BigFloat::ZERO, "ln needs a positive argument");
        let mag = {
            let repr = self.0.repr();
            repr.exponent() + repr.digits() as isize - 1
        };
        if mag.unsigned_abs() <= (1 << 16) {
            return HighPrec(self.0.ln());
        }
        let prec = self.0.precision().max(64);
        let two = BigFloat::from(2).with_precision(prec).value();
        let norm = self.0 / two.powi((mag as i64).into());
        let ln2 = two.ln();
        HighPrec(norm.ln() + ln2 * BigFloat::from(mag as i64).with_precision(0).value())
    }

    fn powf(self, e: Self) -> Self {
        // Via exp(e·ln x), using the exponent-splitting ln above; the
        // backend powf takes the same slow ln path internally.
        if self.0 == BigFloat::ZERO {
            return self;
        }
        HighPrec((e * self.ln()).0.exp())
    }

    fn floor(self) -> Self {
        HighPrec(self.0.floor())
    }

    fn is_finite(&self) -> bool {
        // Big floats have no infinity or NaN representation.
        true
    }
}
