//! Numeric semantics for `MapExpr`: germ domains, evaluation at any
//! scalar precision, derivative-free inversion, and the displacement
//! helpers used throughout the coarse-geometry layer.

use num_rational::BigRational;
use num_traits::Zero;

use crate::config::EvalConfig;
use crate::error::{Error, Result};
use crate::expr::{GermDomain, MapExpr};
use crate::scalar::{HighPrec, Scalar};

/// Certified domain of definition and strict monotonicity.
///
/// Thresholds are conservative: for `PowerShift` with s < 0 the critical
/// point of the derivative is doubled, for `LogShift` likewise, and
/// composite domains are pulled back through the inner map by bisection,
/// always rounding toward the safe side.
pub fn germ_domain(f: &MapExpr) -> Result<GermDomain> {
    match f {
        MapExpr::Identity
        | MapExpr::Affine { .. }
        | MapExpr::ExpGlue
        | MapExpr::Reflect
        | MapExpr::Pl(_)
        | MapExpr::PeriodicLift(_) => Ok(GermDomain::full()),
        MapExpr::PowerShift { i, s } => {
            if *s >= 0.0 {
                Ok(GermDomain::from_threshold(0.0))
            } else {
                // Derivative 1 + (s/(i+1))·x^{-i/(i+1)} vanishes at
                // x = (−s/(i+1))^{(i+1)/i}; stay a factor 2 beyond it.
                let critical = (-s / (i + 1.0)).powf((i + 1.0) / i);
                Ok(GermDomain::from_threshold(2.0 * critical))
            }
        }
        MapExpr::LogShift { s } => {
            // Derivative 1 + s/(1+x) vanishes at x = −1−s (only relevant
            // for s < −1); same safety factor 2.
            Ok(GermDomain::from_threshold(2.0 * f64::max(0.0, -1.0 - s)))
        }
        MapExpr::Glue { threshold, inner } => {
            let di = germ_domain(inner)?;
            if !di.contains(*threshold) {
                return Err(Error::Invalid(format!(
                    "glue threshold {threshold} lies below the inner domain start {}",
                    di.x0
                )));
            }
            Ok(GermDomain::full())
        }
        MapExpr::Inverse(inner) => {
            let di = germ_domain(inner)?;
            if di.full_line {
                Ok(GermDomain::full())
            } else {
                if inner.orientation() != 1 {
                    return Err(Error::Invalid(
                        "cannot invert a decreasing map on a germ domain".into(),
                    ));
                }
                let cfg = EvalConfig::default();
                let image_edge = eval_raw::<f64>(inner, di.x0, &cfg)?;
                Ok(GermDomain::from_threshold(image_edge))
            }
        }
        MapExpr::Compose(outer, inner) => {
            let df = germ_domain(outer)?;
            let dg = germ_domain(inner)?;
            if inner.orientation() == 1 {
                if df.full_line {
                    Ok(dg)
                } else if dg.full_line {
                    Ok(GermDomain::from_threshold(preimage_threshold(
                        inner, df.x0,
                    )?))
                } else {
                    let cfg = EvalConfig::default();
                    let at_edge = eval_raw::<f64>(inner, dg.x0, &cfg)?;
                    if at_edge >= df.x0 {
                        Ok(dg)
                    } else {
                        Ok(GermDomain::from_threshold(preimage_threshold(
                            inner, df.x0,
                        )?))
                    }
                }
            } else if df.full_line {
                Ok(dg)
            } else {
                Err(Error::Invalid(
                    "orientation-reversing inner map feeding a germ-only outer map".into(),
                ))
            }
        }
    }
}

/// Smallest certified x with g(x) ≥ target, for increasing g; rounds up
/// so the returned point is always on the defined side.
fn preimage_threshold(g: &MapExpr, target: f64) -> Result<f64> {
    let cfg = EvalConfig::default();
    let mut x = invert_eval::<f64>(g, target, &cfg)?;
    let mut bump = f64::max(1e-9, x.abs() * 1e-12);
    for _ in 0..64 {
        match eval_raw::<f64>(g, x, &cfg) {
            Ok(v) if v >= target => return Ok(x),
            _ => {
                x += bump;
                bump *= 2.0;
            }
        }
    }
    Err(Error::Invalid(
        "could not certify a composite germ threshold".into(),
    ))
}

/// Evaluate with the germ-domain check applied once at the root.
pub fn eval<S: Scalar>(f: &MapExpr, x: &S, cfg: &EvalConfig) -> Result<S> {
    let dom = germ_domain(f)?;
    if !dom.full_line {
        let edge = S::from_f64(dom.x0, cfg.precision_bits);
        if *x < edge {
            return Err(Error::BelowDomain {
                x: x.to_f64(),
                threshold: dom.x0,
            });
        }
    }
    eval_raw(f, x.clone(), cfg)
}

pub fn eval_f64(f: &MapExpr, x: f64, cfg: &EvalConfig) -> Result<f64> {
    eval(f, &x, cfg)
}

/// Recursive evaluation with only local definedness guards (x ≥ 0 for
/// fractional powers, 1 + x > 0 for logarithms); callers that need the
/// certified germ domain go through `eval`.
pub(crate) fn eval_raw<S: Scalar>(f: &MapExpr, x: S, cfg: &EvalConfig) -> Result<S> {
    let bits = cfg.precision_bits;
    match f {
        MapExpr::Identity => Ok(x),
        MapExpr::Affine { a, b } => Ok(S::from_f64(*a, bits) * x + S::from_f64(*b, bits)),
        MapExpr::PowerShift { i, s } => {
            let zero = S::from_f64(0.0, bits);
            if x < zero {
                return Err(Error::BelowDomain {
                    x: x.to_f64(),
                    threshold: 0.0,
                });
            }
            if x == zero {
                return Ok(zero);
            }
            let e = S::from_f64(1.0, bits) / S::from_f64(i + 1.0, bits);
            let root = x.clone().powf(e);
            Ok(x + S::from_f64(*s, bits) * root)
        }
        MapExpr::LogShift { s } => {
            let arg = S::from_f64(1.0, bits) + x.clone();
            if arg <= S::from_f64(0.0, bits) {
                return Err(Error::BelowDomain {
                    x: x.to_f64(),
                    threshold: -1.0,
                });
            }
            Ok(x + S::from_f64(*s, bits) * arg.ln())
        }
        MapExpr::ExpGlue => {
            let one = S::from_f64(1.0, bits);
            if x >= one {
                Ok(x.exp())
            } else if x <= -one.clone() {
                Ok(-((-x).exp()))
            } else {
                Ok(one.exp() * x)
            }
        }
        MapExpr::Reflect => Ok(-x),
        MapExpr::Pl(pl) => Ok(pl.eval_scalar(&x, bits)),
        MapExpr::PeriodicLift(pl) => {
            let n = x.clone().floor();
            let frac = x - n.clone();
            Ok(n + pl.eval_scalar(&frac, bits))
        }
        MapExpr::Glue { threshold, inner } => {
            let th = S::from_f64(*threshold, bits);
            if x >= th {
                eval_raw(inner, x, cfg)
            } else {
                let at = eval_raw(inner, th.clone(), cfg)?;
                Ok(x + (at - th))
            }
        }
        MapExpr::Compose(outer, inner) => {
            let y = eval_raw(inner, x, cfg)?;
            eval_raw(outer, y, cfg)
        }
        MapExpr::Inverse(inner) => invert_eval(inner, x, cfg),
    }
}

/// Solve f(t) = y.
///
/// Variants with closed-form or structurally reducible inverses are
/// handled directly; only the near-translation family (`PowerShift`,
/// `LogShift`, `PeriodicLift`) falls through to bracketed bisection.
/// Keeping exponential-scale variants out of the bisection path matters:
/// probing ExpGlue at a seed near y would compute exp(y), whose exponent
/// can overflow any float format when y is already exponentially large.
fn invert_eval<S: Scalar>(f: &MapExpr, y: S, cfg: &EvalConfig) -> Result<S> {
    let bits = cfg.precision_bits;
    match f {
        MapExpr::Identity => Ok(y),
        MapExpr::Affine { a, b } => {
            Ok((y - S::from_f64(*b, bits)) / S::from_f64(*a, bits))
        }
        MapExpr::Reflect => Ok(-y),
        MapExpr::ExpGlue => {
            let e = S::from_f64(1.0, bits).exp();
            if y >= e {
                Ok(y.ln())
            } else if y <= -e.clone() {
                Ok(-((-y).ln()))
            } else {
                Ok(y / e)
            }
        }
        MapExpr::Pl(pl) => Ok(pl.invert().eval_scalar(&y, bits)),
        MapExpr::Glue { threshold, inner } => {
            let th = S::from_f64(*threshold, bits);
            let at = eval_raw(inner, th.clone(), cfg)?;
            if y >= at {
                invert_eval(inner, y, cfg)
            } else {
                Ok(y - (at - th))
            }
        }
        MapExpr::Compose(outer, inner) => {
            let mid = invert_eval(outer, y, cfg)?;
            invert_eval(inner, mid, cfg)
        }
        MapExpr::Inverse(inner) => eval_raw(inner, y, cfg),
        _ => invert_bisect(f, y, cfg),
    }
}

/// Bracket the root of f(t) = y by geometric stepping from a seed, then
/// bisect. The seed treats f as a near-translation (t ≈ y − (f(y) − y)),
/// which collapses the search to a couple of steps for every map whose
/// displacement varies slowly.
fn invert_bisect<S: Scalar>(f: &MapExpr, y: S, cfg: &EvalConfig) -> Result<S> {
    let bits = cfg.precision_bits;
    let dom = germ_domain(f)?;
    let increasing = f.orientation() == 1;
    if !increasing && !dom.full_line {
        return Err(Error::Inverse(
            "cannot invert a decreasing map on a germ domain".into(),
        ));
    }
    let lower: Option<S> = if dom.full_line {
        None
    } else {
        Some(S::from_f64(dom.x0, bits))
    };
    let clamp = |v: S| -> S {
        match &lower {
            Some(m) if v < *m => m.clone(),
            _ => v,
        }
    };

    let mut t = clamp(y.clone());
    if increasing {
        if let Ok(ft) = eval_raw(f, t.clone(), cfg) {
            if ft.is_finite() {
                t = clamp(t.clone() + (y.clone() - ft));
            }
        }
    }

    let ft0 = eval_raw(f, t.clone(), cfg)?;
    if ft0 == y {
        return Ok(t);
    }
    // "Below" means the probe sits left of the root.
    let below = |fv: &S| -> bool {
        if increasing {
            *fv < y
        } else {
            *fv > y
        }
    };

    let one = S::from_f64(1.0, bits);
    let growth = S::from_f64(cfg.bracket_growth, bits);
    let mut step = one.clone();
    let (mut lo, mut hi);
    if below(&ft0) {
        lo = t.clone();
        hi = t + step.clone();
        let mut iters = 0u32;
        loop {
            let fhi = eval_raw(f, hi.clone(), cfg)?;
            // ±∞ sort correctly here, so overflow just ends the walk.
            if !below(&fhi) {
                break;
            }
            lo = hi.clone();
            step = step * growth.clone();
            hi = hi + step.clone();
            iters += 1;
            if iters > cfg.max_bisect_iters {
                return Err(Error::Inverse(
                    "bracketing failed to enclose the target from below".into(),
                ));
            }
        }
    } else {
        hi = t.clone();
        lo = clamp(t - step.clone());
        let mut iters = 0u32;
        loop {
            let flo = eval_raw(f, lo.clone(), cfg)?;
            if below(&flo) {
                break;
            }
            if let Some(m) = &lower {
                if lo == *m {
                    // Even the domain edge maps past y: y is outside the image.
                    return Err(Error::BelowDomain {
                        x: y.to_f64(),
                        threshold: flo.to_f64(),
                    });
                }
            }
            hi = lo.clone();
            step = step * growth.clone();
            lo = clamp(lo - step.clone());
            iters += 1;
            if iters > cfg.max_bisect_iters {
                return Err(Error::Inverse(
                    "bracketing failed to enclose the target from above".into(),
                ));
            }
        }
    }

    let two = S::from_f64(2.0, bits);
    let floor_tol: Option<S> = cfg.inverse_abs_floor.map(|v| S::from_f64(v, bits));
    let rel = S::from_f64(cfg.rel_tol, bits);
    for _ in 0..cfg.max_bisect_iters {
        let mid = lo.clone() + (hi.clone() - lo.clone()) / two.clone();
        if mid == lo || mid == hi {
            // Representable width exhausted at this precision.
            return Ok(mid);
        }
        let fm = eval_raw(f, mid.clone(), cfg)?;
        if below(&fm) {
            lo = mid;
        } else {
            hi = mid;
        }
        let width = hi.clone() - lo.clone();
        let tol = match &floor_tol {
            Some(t) => t.clone(),
            None => {
                let scale = lo.clone().abs();
                let scale = if scale < one { one.clone() } else { scale };
                rel.clone() * scale
            }
        };
        if width <= tol {
            return Ok(lo.clone() + (hi - lo) / two);
        }
    }
    Err(Error::Inverse(
        "bisection did not converge within the iteration budget".into(),
    ))
}

/// Central difference (f(x+h) − f(x−h)) / 2h.
pub fn derivative_est(f: &MapExpr, x: f64, h: f64, cfg: &EvalConfig) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Invalid(format!("step h must be positive, got {h}")));
    }
    let dom = germ_domain(f)?;
    if !dom.contains(x - h) {
        return Err(Error::BelowDomain {
            x: x - h,
            threshold: dom.x0,
        });
    }
    // Once |x| dwarfs h, double precision can no longer resolve x ± h
    // (or the cancellation in the difference), so the quotient must be
    // formed at extended precision to stay near the true derivative.
    if x.abs() <= h * 1e5 {
        let fp = eval_raw::<f64>(f, x + h, cfg)?;
        let fm = eval_raw::<f64>(f, x - h, cfg)?;
        let d = (fp - fm) / (2.0 * h);
        if d.is_finite() {
            return Ok(d);
        }
    }
    let bits = cfg.precision_bits;
    let hx = HighPrec::from_f64(x, bits);
    let hh = HighPrec::from_f64(h, bits);
    let hp = eval_raw(f, hx.clone() + hh.clone(), cfg)?;
    let hm = eval_raw(f, hx - hh, cfg)?;
    Ok((hp - hm).to_f64() / (2.0 * h))
}

/// x ↦ f(x) − f(0): the bounded-distance representative fixing 0.
pub fn normalize_origin(f: &MapExpr, cfg: &EvalConfig) -> Result<MapExpr> {
    let dom = germ_domain(f)?;
    if !dom.full_line {
        return Err(Error::NotFullLine(
            "normalize_origin needs a full-line map".into(),
        ));
    }
    match f {
        MapExpr::Identity => Ok(MapExpr::Identity),
        MapExpr::Affine { a, .. } => MapExpr::affine(*a, 0.0),
        MapExpr::Pl(pl) => {
            let y0 = pl.eval_rational(&BigRational::zero());
            Ok(MapExpr::Pl(pl.shift_output(&(-y0))))
        }
        other => {
            let f0 = eval_raw::<f64>(other, 0.0, cfg)?;
            if f0 == 0.0 {
                Ok(other.clone())
            } else {
                Ok(MapExpr::compose(MapExpr::affine(1.0, -f0)?, other.clone()))
            }
        }
    }
}

/// Conjugation by the reflection: x ↦ −f(−x).
pub fn reflect_conjugate(f: &MapExpr) -> Result<MapExpr> {
    let dom = germ_domain(f)?;
    if !dom.full_line {
        return Err(Error::NotFullLine(
            "reflect_conjugate needs a full-line map".into(),
        ));
    }
    Ok(match f {
        MapExpr::Identity => MapExpr::Identity,
        MapExpr::Reflect => MapExpr::Reflect,
        MapExpr::Affine { a, b } => MapExpr::Affine { a: *a, b: -*b },
        other => MapExpr::compose(
            MapExpr::compose(MapExpr::Reflect, other.clone()),
            MapExpr::Reflect,
        ),
    })
}

/// f(x) − x at any scalar precision (no cancellation rescue; pick S).
pub fn displacement_at<S: Scalar>(f: &MapExpr, x: &S, cfg: &EvalConfig) -> Result<S> {
    Ok(eval(f, x, cfg)? - x.clone())
}

/// f(x) − x, switching to extended precision past `hp_cutoff` so that
/// order-1 displacements survive the cancellation at large |x|, and
/// whenever double-precision intermediates overflow (e.g. exp-conjugated
/// maps, whose inner values leave f64 range long before x does).
pub fn displacement(f: &MapExpr, x: f64, cfg: &EvalConfig) -> Result<f64> {
    if x.abs() <= cfg.hp_cutoff {
        let d = displacement_at(f, &x, cfg)?;
        if d.is_finite() {
            return Ok(d);
        }
    }
    let hx = HighPrec::from_f64(x, cfg.precision_bits);
    Ok(displacement_at(f, &hx, cfg)?.to_f64())
}

/// f(x) − g(x) with the same extended-precision switch as `displacement`.
pub fn difference(f: &MapExpr, g: &MapExpr, x: f64, cfg: &EvalConfig) -> Result<f64> {
    if x.abs() <= cfg.hp_cutoff {
        let d = eval(f, &x, cfg)? - eval(g, &x, cfg)?;
        if d.is_finite() {
            return Ok(d);
        }
    }
    let hx = HighPrec::from_f64(x, cfg.precision_bits);
    let a = eval(f, &hx, cfg)?;
    let b = eval(g, &hx, cfg)?;
    Ok((a - b).to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pl::RationalPL;
    use num_bigint::BigInt;

    fn cfg() -> EvalConfig {
        EvalConfig::default()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn eval_matches_closed_forms() {
        let c = cfg();
        assert_eq!(eval_f64(&MapExpr::affine(2.0, 0.0).unwrap(), 3.0, &c).unwrap(), 6.0);
        assert_eq!(
            eval_f64(&MapExpr::power_shift(1.0, 1.0).unwrap(), 4.0, &c).unwrap(),
            6.0
        );
        let half_e = eval_f64(&MapExpr::ExpGlue, 0.5, &c).unwrap();
        assert!((half_e - 1.3591409142295225).abs() < 1e-12);
    }

    #[test]
    fn exp_glue_is_continuous_at_seams() {
        let c = cfg();
        let e = std::f64::consts::E;
        assert!((eval_f64(&MapExpr::ExpGlue, 1.0, &c).unwrap() - e).abs() < 1e-15);
        assert!((eval_f64(&MapExpr::ExpGlue, -1.0, &c).unwrap() + e).abs() < 1e-15);
        assert!((eval_f64(&MapExpr::ExpGlue, -2.0, &c).unwrap() + 2.0f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn germ_thresholds() {
        let d = germ_domain(&MapExpr::power_shift(1.0, -4.0).unwrap()).unwrap();
        assert!(!d.full_line);
        assert!((d.x0 - 8.0).abs() < 1e-12);
        let d = germ_domain(&MapExpr::power_shift(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(d.x0, 0.0);
        assert!(!d.full_line);
        let d = germ_domain(&MapExpr::Identity).unwrap();
        assert_eq!(d.x0, 0.0);
        assert!(d.full_line);
        let d = germ_domain(&MapExpr::log_shift(-3.0).unwrap()).unwrap();
        assert!((d.x0 - 4.0).abs() < 1e-12);
        assert_eq!(germ_domain(&MapExpr::log_shift(1.0).unwrap()).unwrap().x0, 0.0);
    }

    #[test]
    fn eval_rejects_points_below_domain() {
        let c = cfg();
        let f = MapExpr::power_shift(1.0, -4.0).unwrap();
        match eval_f64(&f, 5.0, &c) {
            Err(Error::BelowDomain { threshold, .. }) => assert!((threshold - 8.0).abs() < 1e-9),
            other => panic!("expected BelowDomain, got {other:?}"),
        }
        assert!(eval_f64(&f, 8.0, &c).is_ok());
    }

    #[test]
    fn inverse_of_affine() {
        let c = cfg();
        let f = MapExpr::inverse(MapExpr::affine(2.0, 0.0).unwrap());
        let v = eval_f64(&f, 6.0, &c).unwrap();
        assert!((v - 3.0).abs() < 1e-9);
    }

    #[test]
    fn inverse_round_trip_through_glue_conjugate() {
        let c = cfg();
        // inv(h) ∘ B(1,1) ∘ h at x = 3 equals ln(e^3 + e^{1.5}).
        let f = MapExpr::compose_chain(vec![
            MapExpr::inverse(MapExpr::ExpGlue),
            MapExpr::power_shift(1.0, 1.0).unwrap(),
            MapExpr::ExpGlue,
        ])
        .unwrap();
        let got = eval_f64(&f, 3.0, &c).unwrap();
        let want = (3.0f64.exp() + 1.5f64.exp()).ln();
        assert!((got - want).abs() < 1e-9, "got {got}, want {want}");
    }

    #[test]
    fn inverse_reports_targets_outside_image() {
        let c = cfg();
        // PowerShift(1,1) maps [0,∞) onto [0,∞); −0.5 has no preimage.
        let f = MapExpr::inverse(MapExpr::power_shift(1.0, 1.0).unwrap());
        assert!(matches!(
            eval_f64(&f, -0.5, &c),
            Err(Error::BelowDomain { .. })
        ));
    }

    #[test]
    fn inverse_domain_is_image_of_inner_edge() {
        let f = MapExpr::inverse(MapExpr::power_shift(1.0, -4.0).unwrap());
        let d = germ_domain(&f).unwrap();
        let want = 8.0 - 4.0 * 8.0f64.sqrt();
        assert!((d.x0 - want).abs() < 1e-9);
    }

    #[test]
    fn compose_domain_pulls_back_through_inner_map() {
        // Outer needs x ≥ 8, inner is x ↦ x − 10, so composite needs x ≥ 18.
        let f = MapExpr::compose(
            MapExpr::power_shift(1.0, -4.0).unwrap(),
            MapExpr::affine(1.0, -10.0).unwrap(),
        );
        let d = germ_domain(&f).unwrap();
        assert!(!d.full_line);
        assert!((d.x0 - 18.0).abs() < 1e-6, "x0 = {}", d.x0);
        assert!(eval_f64(&f, d.x0, &cfg()).is_ok());
    }

    #[test]
    fn reversing_inner_map_with_germ_outer_is_rejected() {
        let f = MapExpr::compose(MapExpr::power_shift(1.0, -4.0).unwrap(), MapExpr::Reflect);
        assert!(germ_domain(&f).is_err());
    }

    #[test]
    fn derivative_estimates() {
        let c = cfg();
        let d = derivative_est(&MapExpr::affine(3.0, 1.0).unwrap(), 10.0, 1e-4, &c).unwrap();
        assert!((d - 3.0).abs() < 1e-9);
        let d = derivative_est(&MapExpr::power_shift(1.0, 1.0).unwrap(), 4.0, 1e-4, &c).unwrap();
        assert!((d - 1.25).abs() < 1e-6);
        let d = derivative_est(&MapExpr::Identity, -7.0, 1e-4, &c).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalize_origin_fixes_zero() {
        let c = cfg();
        let f = normalize_origin(&MapExpr::affine(2.0, 5.0).unwrap(), &c).unwrap();
        assert_eq!(f, MapExpr::affine(2.0, 0.0).unwrap());
        let pl = RationalPL::new(
            vec![(rat(0, 1), rat(3, 1)), (rat(1, 1), rat(5, 1))],
            rat(1, 1),
            rat(2, 1),
        )
        .unwrap();
        let g = normalize_origin(&MapExpr::Pl(pl), &c).unwrap();
        assert_eq!(eval_f64(&g, 0.0, &c).unwrap(), 0.0);
        assert!(normalize_origin(&MapExpr::power_shift(1.0, 1.0).unwrap(), &c).is_err());
    }

    #[test]
    fn reflect_conjugate_flips_offsets() {
        let c = cfg();
        assert_eq!(
            reflect_conjugate(&MapExpr::affine(1.0, 5.0).unwrap()).unwrap(),
            MapExpr::affine(1.0, -5.0).unwrap()
        );
        assert_eq!(
            reflect_conjugate(&MapExpr::affine(2.0, 0.0).unwrap()).unwrap(),
            MapExpr::affine(2.0, 0.0).unwrap()
        );
        // Involution, checked pointwise on a non-affine map.
        let once = reflect_conjugate(&MapExpr::ExpGlue).unwrap();
        let twice = reflect_conjugate(&once).unwrap();
        for x in [-3.0, -0.4, 0.0, 0.7, 2.5] {
            let a = eval_f64(&twice, x, &c).unwrap();
            let b = eval_f64(&MapExpr::ExpGlue, x, &c).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_lift_commutes_with_integer_translation() {
        let c = cfg();
        let pl = RationalPL::new(
            vec![(rat(0, 1), rat(0, 1)), (rat(1, 2), rat(3, 4)), (rat(1, 1), rat(1, 1))],
            rat(1, 1),
            rat(1, 1),
        )
        .unwrap();
        let f = MapExpr::periodic_lift(pl).unwrap();
        assert!((eval_f64(&f, 0.5, &c).unwrap() - 0.75).abs() < 1e-12);
        assert!((eval_f64(&f, 2.5, &c).unwrap() - 2.75).abs() < 1e-12);
        assert!((eval_f64(&f, -0.5, &c).unwrap() + 0.25).abs() < 1e-12);
        for x in [-2.3, -0.1, 0.0, 1.7, 9.25] {
            let a = eval_f64(&f, x + 1.0, &c).unwrap();
            let b = eval_f64(&f, x, &c).unwrap() + 1.0;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn glue_extends_by_translation_below_threshold() {
        let c = cfg();
        let f = MapExpr::glue(MapExpr::power_shift(1.0, 1.0).unwrap(), 1.0).unwrap();
        assert!((eval_f64(&f, 4.0, &c).unwrap() - 6.0).abs() < 1e-12);
        // Below 1 the map is x + (B(1,1)(1) − 1) = x + 1.
        assert!((eval_f64(&f, 0.0, &c).unwrap() - 1.0).abs() < 1e-12);
        assert!((eval_f64(&f, -5.0, &c).unwrap() + 4.0).abs() < 1e-12);
        assert!(germ_domain(&f).unwrap().full_line);
        // Threshold below the inner domain is rejected.
        assert!(germ_domain(&MapExpr::glue(MapExpr::power_shift(1.0, -4.0).unwrap(), 1.0).unwrap()).is_err());
    }

    #[test]
    fn displacement_survives_large_arguments() {
        let c = cfg();
        let f = MapExpr::log_shift(1.0).unwrap();
        let d = displacement(&f, 1e12, &c).unwrap();
        let want = (1e12f64 + 1.0).ln();
        assert!((d - want).abs() < 1e-9, "d = {d}, want {want}");
    }

    #[test]
    fn displacement_recovers_from_f64_overflow() {
        let c = cfg();
        // inv(h) ∘ B(1,1) ∘ h displaces by ln(1 + e^{−x/2}) ≈ e^{−x/2};
        // at x = 800 the inner exp overflows f64 and the computation must
        // fall back to extended precision instead of reporting ∞.
        let f = MapExpr::compose_chain(vec![
            MapExpr::inverse(MapExpr::ExpGlue),
            MapExpr::power_shift(1.0, 1.0).unwrap(),
            MapExpr::ExpGlue,
        ])
        .unwrap();
        let d = displacement(&f, 800.0, &c).unwrap();
        assert!(d.is_finite());
        assert!(d.abs() < 1e-100, "d = {d}");
    }

    #[test]
    fn high_precision_eval_agrees_with_f64() {
        let c = cfg();
        let x = HighPrec::from_f64(0.5, c.precision_bits);
        let hp = eval(&MapExpr::ExpGlue, &x, &c).unwrap().to_f64();
        let lp = eval_f64(&MapExpr::ExpGlue, 0.5, &c).unwrap();
        assert!((hp - lp).abs() < 1e-15);
    }

    #[test]
    fn inverse_handles_reflection() {
        let c = cfg();
        let f = MapExpr::inverse(MapExpr::Reflect);
        assert!((eval_f64(&f, 3.0, &c).unwrap() + 3.0).abs() < 1e-9);
    }
}
