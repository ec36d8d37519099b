//! Text form of `MapExpr`.
//!
//! `term := "id" | "A(" num ")" | "B(" num "," num ")" | "a(" num ")"
//!        | "b(" num "," num ")" | "logshift(" num ")"
//!        | "affine(" num "," num ")" | "h" | "refl"
//!        | "pl[" (x ":" y ";")+ "slopes(" num "," num ")" "]"
//!        | "lift[" plbody "]" | "inv(" map ")" | "glue(" map "," num ")"
//! map  := term ("*" term)*`
//!
//! "*" composes with the left factor applied last. Numbers are decimal
//! (exponent notation allowed) or rational "p/q". `A(t)` is sugar for
//! `affine(t,0)`, `a(t)` for `affine(1,ln t)`, and `b(i,s)` for the
//! glue-conjugated power shift `inv(h)*B(i,s)*h`. Printing uses the
//! desugared canonical form, so print∘parse is the identity on it.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::expr::MapExpr;
use crate::pl::RationalPL;

pub fn parse_map(src: &str) -> Result<MapExpr> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    let expr = p.map()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", b as char)))
        }
    }

    /// Consume `kw` if it is the next token (no whitespace inside).
    fn keyword(&mut self, kw: &str) -> bool {
        if self.src[self.pos..].starts_with(kw.as_bytes()) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn map(&mut self) -> Result<MapExpr> {
        let mut acc = self.term()?;
        loop {
            self.skip_ws();
            if self.peek() == Some(b'*') {
                self.pos += 1;
                let next = self.term()?;
                acc = MapExpr::compose(acc, next);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<MapExpr> {
        self.skip_ws();
        // Longest-prefix keywords first so "affine(" wins over "a(".
        if self.keyword("logshift(") {
            let s = self.number_f64()?;
            self.expect(b')')?;
            MapExpr::log_shift(s)
        } else if self.keyword("affine(") {
            let a = self.number_f64()?;
            self.expect(b',')?;
            let b = self.number_f64()?;
            self.expect(b')')?;
            MapExpr::affine(a, b)
        } else if self.keyword("lift[") {
            let pl = self.pl_body()?;
            self.expect(b']')?;
            MapExpr::periodic_lift(pl)
        } else if self.keyword("inv(") {
            let inner = self.map()?;
            self.expect(b')')?;
            Ok(MapExpr::inverse(inner))
        } else if self.keyword("glue(") {
            let inner = self.map()?;
            self.expect(b',')?;
            let threshold = self.number_f64()?;
            self.expect(b')')?;
            MapExpr::glue(inner, threshold)
        } else if self.keyword("refl") {
            Ok(MapExpr::Reflect)
        } else if self.keyword("pl[") {
            let pl = self.pl_body()?;
            self.expect(b']')?;
            Ok(MapExpr::Pl(pl))
        } else if self.keyword("id") {
            Ok(MapExpr::Identity)
        } else if self.keyword("A(") {
            let t = self.number_f64()?;
            self.expect(b')')?;
            MapExpr::affine(t, 0.0)
        } else if self.keyword("B(") {
            let i = self.number_f64()?;
            self.expect(b',')?;
            let s = self.number_f64()?;
            self.expect(b')')?;
            MapExpr::power_shift(i, s)
        } else if self.keyword("a(") {
            let t = self.number_f64()?;
            self.expect(b')')?;
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Invalid(format!("a(t) needs t > 0, got {t}")));
            }
            MapExpr::affine(1.0, t.ln())
        } else if self.keyword("b(") {
            let i = self.number_f64()?;
            self.expect(b',')?;
            let s = self.number_f64()?;
            self.expect(b')')?;
            let core = MapExpr::power_shift(i, s)?;
            Ok(MapExpr::compose(
                MapExpr::compose(MapExpr::inverse(MapExpr::ExpGlue), core),
                MapExpr::ExpGlue,
            ))
        } else if self.keyword("h") {
            Ok(MapExpr::ExpGlue)
        } else {
            Err(self.err("expected a map term"))
        }
    }

    fn pl_body(&mut self) -> Result<RationalPL> {
        let mut breakpoints = Vec::new();
        loop {
            self.skip_ws();
            if self.keyword("slopes(") {
                break;
            }
            let x = self.number_rational()?;
            self.expect(b':')?;
            let y = self.number_rational()?;
            self.expect(b';')?;
            breakpoints.push((x, y));
        }
        if breakpoints.is_empty() {
            return Err(self.err("piecewise-linear body needs at least one breakpoint"));
        }
        let left = self.number_rational()?;
        self.expect(b',')?;
        let right = self.number_rational()?;
        self.expect(b')')?;
        RationalPL::new(breakpoints, left, right)
    }

    fn number_f64(&mut self) -> Result<f64> {
        let q = self.number_rational()?;
        q.to_f64()
            .ok_or_else(|| self.err("number out of double range"))
    }

    fn number_rational(&mut self) -> Result<BigRational> {
        self.skip_ws();
        let start = self.pos;
        let mut saw_digit = false;
        let mut saw_dot = false;
        let mut saw_exp = false;
        if matches!(self.peek(), Some(b'-') | Some(b'+')) {
            self.pos += 1;
        }
        while let Some(c) = self.peek() {
            match c {
                b'0'..=b'9' => {
                    saw_digit = true;
                    self.pos += 1;
                }
                b'.' if !saw_dot && !saw_exp => {
                    saw_dot = true;
                    self.pos += 1;
                }
                b'e' | b'E' if saw_digit && !saw_exp => {
                    saw_exp = true;
                    self.pos += 1;
                    if matches!(self.peek(), Some(b'-') | Some(b'+')) {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        if !saw_digit {
            self.pos = start;
            return Err(self.err("expected a number"));
        }
        let head = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let numer = decimal_to_rational(head).ok_or_else(|| Error::Parse {
            pos: start,
            msg: format!("malformed number '{head}'"),
        })?;
        if !saw_dot && !saw_exp && self.peek() == Some(b'/') {
            self.pos += 1;
            let dstart = self.pos;
            if matches!(self.peek(), Some(b'-') | Some(b'+')) {
                self.pos += 1;
            }
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
            let dtext = std::str::from_utf8(&self.src[dstart..self.pos]).unwrap();
            let denom: BigInt = dtext.parse().map_err(|_| Error::Parse {
                pos: dstart,
                msg: "expected an integer denominator".into(),
            })?;
            if denom.is_zero() {
                return Err(Error::Parse {
                    pos: dstart,
                    msg: "zero denominator".into(),
                });
            }
            return Ok(numer / BigRational::from_integer(denom));
        }
        Ok(numer)
    }
}

/// Exact rational value of a decimal literal with optional exponent.
fn decimal_to_rational(text: &str) -> Option<BigRational> {
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(k) => (&text[..k], text[k + 1..].parse::<i64>().ok()?),
        None => (text, 0i64),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(k) => (&mantissa[..k], &mantissa[k + 1..]),
        None => (mantissa, ""),
    };
    let negative = int_part.starts_with('-');
    let digits: String = int_part
        .trim_start_matches(['-', '+'])
        .chars()
        .chain(frac_part.chars())
        .collect();
    let digits = if digits.is_empty() { "0".into() } else { digits };
    let unsigned: BigInt = digits.parse().ok()?;
    let signed = if negative { -unsigned } else { unsigned };
    let scale = frac_part.len() as i64 - exp;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(signed);
    if scale > 0 {
        value /= BigRational::from_integer(ten.pow(scale as u32));
    } else if scale < 0 {
        value *= BigRational::from_integer(ten.pow((-scale) as u32));
    }
    Some(value)
}
