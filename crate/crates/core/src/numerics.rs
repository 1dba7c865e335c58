//! Scalar policy shared by the rest of the crate: tolerances, extended
//! exchange rates and a deterministic bracketing root finder.

use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("invalid tolerances: {0}")]
    InvalidTolerances(&'static str),
    #[error("invalid rate {0}: rates must be finite and strictly positive")]
    InvalidRate(f64),
    #[error("target {target} is not bracketed by f(lo) = {f_lo} and f(hi) = {f_hi}")]
    BracketInvalid { target: f64, f_lo: f64, f_hi: f64 },
    #[error("bisection did not converge within {0} iterations")]
    NoConvergence(usize),
}

/// Numeric tolerances used by root finds and property audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative residual tolerance for root finds.
    pub tol_root: f64,
    /// Absolute slack for property comparisons.
    pub tol_audit: f64,
    pub max_iter: usize,
}

impl Tolerances {
    pub fn new(tol_root: f64, tol_audit: f64, max_iter: usize) -> Result<Self, NumericsError> {
        let tol = Self { tol_root, tol_audit, max_iter };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.tol_root > 0.0 && self.tol_root.is_finite()) {
            return Err(NumericsError::InvalidTolerances("tol_root must be > 0"));
        }
        if !(self.tol_audit > 0.0 && self.tol_audit.is_finite()) {
            return Err(NumericsError::InvalidTolerances("tol_audit must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(NumericsError::InvalidTolerances("max_iter must be >= 1"));
        }
        Ok(())
    }

    pub fn with_tol_audit(mut self, tol_audit: f64) -> Result<Self, NumericsError> {
        self.tol_audit = tol_audit;
        self.validate()?;
        Ok(self)
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tol_root: 1e-12, tol_audit: 1e-7, max_iter: 200 }
    }
}

/// An exchange rate in units of Y per X that may be unbounded.
///
/// `Infinity` is a real variant rather than `f64::INFINITY` so that
/// individual-rationality checks against an unbounded rate never go
/// through float overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtRate {
    Finite(f64),
    Infinity,
}

impl ExtRate {
    pub fn finite(value: f64) -> Result<Self, NumericsError> {
        if value > 0.0 && value.is_finite() {
            Ok(ExtRate::Finite(value))
        } else {
            Err(NumericsError::InvalidRate(value))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtRate::Infinity)
    }

    /// The finite value, if any.
    pub fn value(&self) -> Option<f64> {
        match *self {
            ExtRate::Finite(v) => Some(v),
            ExtRate::Infinity => None,
        }
    }

    /// Orders this rate against a finite scalar.
    pub fn cmp_scalar(&self, x: f64) -> Ordering {
        match *self {
            ExtRate::Finite(v) => v.partial_cmp(&x).unwrap_or(Ordering::Equal),
            ExtRate::Infinity => Ordering::Greater,
        }
    }

    pub fn total_cmp(&self, other: &ExtRate) -> Ordering {
        match (self, other) {
            (ExtRate::Infinity, ExtRate::Infinity) => Ordering::Equal,
            (ExtRate::Infinity, _) => Ordering::Greater,
            (_, ExtRate::Infinity) => Ordering::Less,
            (ExtRate::Finite(a), ExtRate::Finite(b)) => a.total_cmp(b),
        }
    }
}

impl PartialOrd for ExtRate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtRate::Finite(a), ExtRate::Finite(b)) => a.partial_cmp(b),
            _ => Some(self.total_cmp(other)),
        }
    }
}

impl fmt::Display for ExtRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRate::Finite(v) => write!(f, "{v}"),
            ExtRate::Infinity => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtRate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match *self {
            ExtRate::Finite(v) => serializer.serialize_f64(v),
            ExtRate::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtRate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct RateVisitor;

        impl Visitor<'_> for RateVisitor {
            type Value = ExtRate;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive number or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtRate, E> {
                ExtRate::finite(v).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtRate, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtRate, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtRate, E> {
                if v == "inf" {
                    Ok(ExtRate::Infinity)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        deserializer.deserialize_any(RateVisitor)
    }
}

/// Finds `x` in `[lo, hi]` with `f(x)` equal to `target` by plain bisection.
///
/// The orientation is taken from `f(lo)` and `f(hi)`, and the sign-change
/// invariant is kept at every step, so any continuous `f` whose endpoint
/// values bracket `target` converges. Iteration stops once
/// `|f(x) - target| <= tol_root * max(1, |target|)`, or once the bracket has
/// shrunk to adjacent floats, in which case the endpoint with the smaller
/// residual is returned.
pub fn bisect_monotone<F>(
    f: F,
    lo: f64,
    hi: f64,
    target: f64,
    tol: &Tolerances,
) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    let eps = tol.tol_root * target.abs().max(1.0);

    if (f_lo - target).abs() <= eps {
        return Ok(lo);
    }
    if (f_hi - target).abs() <= eps {
        return Ok(hi);
    }

    let increasing = f_lo <= f_hi;
    let (min_f, max_f) = if increasing { (f_lo, f_hi) } else { (f_hi, f_lo) };
    if !(min_f <= target && target <= max_f) {
        return Err(NumericsError::BracketInvalid { target, f_lo, f_hi });
    }

    for _ in 0..tol.max_iter {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            // Bracket exhausted at float resolution.
            return Ok(if (f_lo - target).abs() <= (f_hi - target).abs() { lo } else { hi });
        }
        let f_mid = f(mid);
        if (f_mid - target).abs() <= eps {
            return Ok(mid);
        }
        if (f_mid < target) == increasing {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Err(NumericsError::NoConvergence(tol.max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn identity_root() {
        let x = bisect_monotone(|x| x, 0.0, 10.0, 2.0, &tol()).unwrap();
        assert!((x - 2.0).abs() <= 1e-12 * 2.0);
    }

    #[test]
    fn inverse_square_root() {
        // closed form: 100 - sqrt(10000 / 4) = 50
        let f = |x: f64| 10000.0 / ((100.0 - x) * (100.0 - x));
        let x = bisect_monotone(f, 0.0, 99.0, 4.0, &tol()).unwrap();
        assert!((x - 50.0).abs() < 1e-9, "{x}");
        assert!((f(x) - 4.0).abs() <= 1e-12 * 4.0);
    }

    #[test]
    fn hyperbola_root() {
        // closed form: 100 - 100 / 2 = 50
        let x = bisect_monotone(|x| 100.0 / (100.0 - x), 0.0, 99.0, 2.0, &tol()).unwrap();
        assert!((x - 50.0).abs() < 1e-9);
    }

    #[test]
    fn decreasing_orientation() {
        let x = bisect_monotone(|x| -x, 0.0, 10.0, -3.0, &tol()).unwrap();
        assert!((x - 3.0).abs() < 1e-11);
    }

    #[test]
    fn bracket_rejected() {
        let err = bisect_monotone(|x| x, 0.0, 10.0, 11.0, &tol()).unwrap_err();
        assert!(matches!(err, NumericsError::BracketInvalid { .. }));
    }

    #[test]
    fn iteration_cap() {
        let tight = Tolerances { max_iter: 3, ..tol() };
        let err = bisect_monotone(|x| x, 0.0, 10.0, 2.0 + 1e-3, &tight).unwrap_err();
        assert_eq!(err, NumericsError::NoConvergence(3));
    }

    #[test]
    fn bit_identical_repeat() {
        let f = |x: f64| x.powi(3) + x;
        let a = bisect_monotone(f, 0.0, 5.0, 7.3, &tol()).unwrap();
        let b = bisect_monotone(f, 0.0, 5.0, 7.3, &tol()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn rate_ordering() {
        let one = ExtRate::finite(1.0).unwrap();
        assert!(ExtRate::Infinity > one);
        assert!(ExtRate::Infinity > ExtRate::Finite(f64::MAX));
        assert_eq!(ExtRate::Infinity.cmp_scalar(1e300), Ordering::Greater);
        assert!(ExtRate::finite(0.0).is_err());
        assert!(ExtRate::finite(f64::INFINITY).is_err());
    }

    #[test]
    fn rate_json() {
        let r: ExtRate = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(r, ExtRate::Infinity);
        let r: ExtRate = serde_json::from_str("2").unwrap();
        assert_eq!(r, ExtRate::Finite(2.0));
        assert!(serde_json::from_str::<ExtRate>("-1").is_err());
        assert_eq!(serde_json::to_string(&ExtRate::Infinity).unwrap(), "\"inf\"");
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tolerances::new(0.0, 1e-7, 10).is_err());
        assert!(Tolerances::new(1e-12, 1e-7, 0).is_err());
        assert!(Tolerances::new(1e-12, 1e-7, 1).is_ok());
    }
}
