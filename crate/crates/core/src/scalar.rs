//! Arithmetic backends for length data.
//!
//! Every quantity that lives on the interval — lengths, orbit points, roof
//! heights — is generic over [`Scalar`], which has exactly two
//! implementations:
//!
//! * [`num::BigRational`] — exact rational arithmetic. Induction steps,
//!   visitation oracles, and certificate replay run in this mode so that
//!   equality tests (and in particular *tie detection*) are exact.
//! * [`rug::Float`] — MPFR multi-precision floats with a configurable
//!   mantissa (default [`DEFAULT_PREC`] bits). Long renormalization orbits
//!   (Lyapunov estimation, Veech scans at irrational parameters) run in this
//!   mode; every value in one computation carries the same precision.
//!
//! The arithmetic mode is uniform within one transformation: mixing is
//! prevented by construction because containers hold a single `S: Scalar`.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::fmt;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Default mantissa precision (bits) for float-mode computations.
pub const DEFAULT_PREC: u32 = 256;

/// A field element usable as an interval length or orbit coordinate.
///
/// The `_like` constructors take `&self` so that float values can inherit
/// the receiver's precision; rational values ignore the receiver.
pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + fmt::Display
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + for<'a> MulAssign<&'a Self>
    + for<'a> DivAssign<&'a Self>
    + 'static
{
    /// True when arithmetic is exact (rational mode).
    const EXACT: bool;

    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn from_usize_like(&self, n: usize) -> Self;
    fn from_bigint_like(&self, k: &BigInt) -> Self;

    fn is_zero_s(&self) -> bool;
    /// Strictly positive?
    fn is_positive_s(&self) -> bool;

    /// Best-effort conversion for reporting. Values in scale-normalized
    /// computations fit comfortably in `f64`.
    fn to_f64_s(&self) -> f64;

    /// Natural logarithm as `f64`; the value must be strictly positive.
    /// Implemented so that it stays finite even when the value itself
    /// overflows `f64` (relevant for rationals with huge numerators).
    fn ln_f64(&self) -> f64;

    /// Replace `self` with its fractional part in `[0, 1)`.
    fn reduce_mod1(&mut self);

    /// Signed distance to the nearest integer, in `[-1/2, 1/2]`.
    fn torus_residual(&self) -> Self;

    /// Exact rational view, available in exact mode only. Used to hand
    /// values to the certificate machinery.
    fn as_rational(&self) -> Option<BigRational>;
}

/// Natural log of a positive big integer, computed from the bit length so it
/// cannot overflow.
pub(crate) fn ln_bigint(n: &BigInt) -> f64 {
    debug_assert!(n.is_positive());
    let bits = n.bits();
    if bits <= 63 {
        let v: i64 = n.try_into().expect("fits by bit length");
        return (v as f64).ln();
    }
    // Take the top 63 bits as a mantissa and account for the shift.
    let shift = bits - 63;
    let top: BigInt = n >> shift;
    let v: i64 = (&top).try_into().expect("63 bits fit");
    (v as f64).ln() + (shift as f64) * std::f64::consts::LN_2
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero_like(&self) -> Self {
        BigRational::zero()
    }

    fn one_like(&self) -> Self {
        BigRational::one()
    }

    fn from_usize_like(&self, n: usize) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_bigint_like(&self, k: &BigInt) -> Self {
        BigRational::from_integer(k.clone())
    }

    fn is_zero_s(&self) -> bool {
        self.is_zero()
    }

    fn is_positive_s(&self) -> bool {
        self.is_positive()
    }

    fn to_f64_s(&self) -> f64 {
        num::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn ln_f64(&self) -> f64 {
        assert!(self.is_positive(), "ln of non-positive rational");
        ln_bigint(self.numer()) - ln_bigint(self.denom())
    }

    fn reduce_mod1(&mut self) {
        let fl = self.floor();
        *self -= &fl;
    }

    fn torus_residual(&self) -> Self {
        let r = self.round();
        self - r
    }

    fn as_rational(&self) -> Option<BigRational> {
        Some(self.clone())
    }
}

impl Scalar for rug::Float {
    const EXACT: bool = false;

    fn zero_like(&self) -> Self {
        rug::Float::with_val(self.prec(), 0)
    }

    fn one_like(&self) -> Self {
        rug::Float::with_val(self.prec(), 1)
    }

    fn from_usize_like(&self, n: usize) -> Self {
        rug::Float::with_val(self.prec(), n as u64)
    }

    fn from_bigint_like(&self, k: &BigInt) -> Self {
        let z = bigint_to_rug(k);
        rug::Float::with_val(self.prec(), z)
    }

    fn is_zero_s(&self) -> bool {
        self.is_zero()
    }

    fn is_positive_s(&self) -> bool {
        self.is_sign_positive() && !self.is_zero()
    }

    fn to_f64_s(&self) -> f64 {
        self.to_f64()
    }

    fn ln_f64(&self) -> f64 {
        assert!(self.is_positive_s(), "ln of non-positive float");
        self.clone().ln().to_f64()
    }

    fn reduce_mod1(&mut self) {
        let fl = self.clone().floor();
        *self -= &fl;
    }

    fn torus_residual(&self) -> Self {
        let r = self.clone().round();
        let mut out = self.clone();
        out -= &r;
        out
    }

    fn as_rational(&self) -> Option<BigRational> {
        None
    }
}

/// Convert a `num` big integer to a `rug` integer.
pub(crate) fn bigint_to_rug(k: &BigInt) -> rug::Integer {
    // Sign + little-endian u32 digits; rug parses the same layout.
    let (sign, digits) = k.to_u32_digits();
    let mut z = rug::Integer::new();
    for d in digits.iter().rev() {
        z <<= 32;
        z += *d;
    }
    if sign == num::bigint::Sign::Minus {
        -z
    } else {
        z
    }
}

/// Sum of a slice, in the slice's own arithmetic. Panics on empty input.
pub fn sum_slice<S: Scalar>(xs: &[S]) -> S {
    let mut acc = xs[0].zero_like();
    for x in xs {
        acc += x;
    }
    acc
}

/// Divide every entry by the total so entries sum to 1. Used to
/// re-projectivize length vectors after renormalization steps.
pub fn normalize_in_place<S: Scalar>(xs: &mut [S]) {
    let total = sum_slice(xs);
    for x in xs.iter_mut() {
        *x /= &total;
    }
}

/// Length data in one of the two arithmetic modes.
///
/// CLI input chooses the mode from the token syntax: any token containing
/// `/` forces exact-rational mode for the whole vector (decimal tokens are
/// then read as exact decimal fractions); otherwise tokens are parsed as
/// MPFR floats at the requested precision.
#[derive(Clone, Debug)]
pub enum Lengths {
    Exact(Vec<BigRational>),
    Float(Vec<rug::Float>),
}

/// Error from [`parse_lengths`].
#[derive(Debug, thiserror::Error)]
pub enum ParseLengthError {
    #[error("empty length vector")]
    Empty,
    #[error("invalid length token {token:?}: {reason}")]
    Invalid { token: String, reason: String },
    #[error("length token {token:?} is not strictly positive")]
    NonPositive { token: String },
}

/// Parse one token as an exact rational: `p/q`, integer, or decimal string.
pub fn parse_rational_token(tok: &str) -> Result<BigRational, ParseLengthError> {
    let bad = |reason: &str| ParseLengthError::Invalid {
        token: tok.to_string(),
        reason: reason.to_string(),
    };
    let t = tok.trim();
    if let Some((num_s, den_s)) = t.split_once('/') {
        let n: BigInt = num_s.trim().parse().map_err(|_| bad("bad numerator"))?;
        let d: BigInt = den_s.trim().parse().map_err(|_| bad("bad denominator"))?;
        if d.is_zero() {
            return Err(bad("zero denominator"));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int_s, frac_s)) = t.split_once('.') {
        if frac_s.is_empty() || !frac_s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad("bad decimal fraction"));
        }
        let int_part = if int_s.is_empty() || int_s == "-" || int_s == "+" {
            format!("{int_s}0")
        } else {
            int_s.to_string()
        };
        let whole: BigInt = int_part.parse().map_err(|_| bad("bad integer part"))?;
        let frac: BigInt = frac_s.parse().map_err(|_| bad("bad fractional part"))?;
        let den = BigInt::from(10u32).pow(frac_s.len() as u32);
        let negative = t.starts_with('-');
        let mag = whole.magnitude().clone() * den.magnitude() + frac.magnitude();
        let num = BigInt::from_biguint(
            if negative {
                num::bigint::Sign::Minus
            } else {
                num::bigint::Sign::Plus
            },
            mag,
        );
        return Ok(BigRational::new(num, den));
    }
    let n: BigInt = t.parse().map_err(|_| bad("not an integer, decimal, or fraction"))?;
    Ok(BigRational::from_integer(n))
}

/// Parse a whitespace- or comma-separated vector of positive lengths,
/// selecting the arithmetic mode from the token syntax.
pub fn parse_lengths(input: &str, prec: u32) -> Result<Lengths, ParseLengthError> {
    let tokens: Vec<&str> = input
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .collect();
    if tokens.is_empty() {
        return Err(ParseLengthError::Empty);
    }
    let exact = tokens.iter().any(|t| t.contains('/'));
    if exact {
        let mut out = Vec::with_capacity(tokens.len());
        for t in &tokens {
            let v = parse_rational_token(t)?;
            if !v.is_positive() {
                return Err(ParseLengthError::NonPositive { token: t.to_string() });
            }
            out.push(v);
        }
        Ok(Lengths::Exact(out))
    } else {
        let mut out = Vec::with_capacity(tokens.len());
        for t in &tokens {
            let parsed = rug::Float::parse(t).map_err(|e| ParseLengthError::Invalid {
                token: t.to_string(),
                reason: e.to_string(),
            })?;
            let v = rug::Float::with_val(prec, parsed);
            if !(v.is_sign_positive() && !v.is_zero()) || !v.is_finite() {
                return Err(ParseLengthError::NonPositive { token: t.to_string() });
            }
            out.push(v);
        }
        Ok(Lengths::Float(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::FromPrimitive;

    #[test]
    fn decimal_tokens_parse_exactly() {
        let r = parse_rational_token("0.55").unwrap();
        assert_eq!(r, BigRational::new(11.into(), 20.into()));
        let r = parse_rational_token("-1.25").unwrap();
        assert_eq!(r, BigRational::new((-5).into(), 4.into()));
        let r = parse_rational_token("2/6").unwrap();
        assert_eq!(r, BigRational::new(1.into(), 3.into()));
    }

    #[test]
    fn slash_forces_exact_mode() {
        match parse_lengths("1/3 0.5 2", 64).unwrap() {
            Lengths::Exact(v) => {
                assert_eq!(v[1], BigRational::new(1.into(), 2.into()));
                assert_eq!(v.len(), 3);
            }
            Lengths::Float(_) => panic!("expected exact mode"),
        }
        match parse_lengths("0.3 0.7", 256).unwrap() {
            Lengths::Float(v) => assert_eq!(v[0].prec(), 256),
            Lengths::Exact(_) => panic!("expected float mode"),
        }
    }

    #[test]
    fn torus_residual_is_nearest_integer_distance() {
        let x = BigRational::from_f64(2.4).unwrap();
        let r = x.torus_residual();
        assert!((r.to_f64_s() - 0.4).abs() < 1e-12);
        let y = rug::Float::with_val(128, -0.6);
        let r = y.torus_residual();
        assert!((r.to_f64() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn ln_of_huge_rational_stays_finite() {
        let big = BigInt::from(7u32).pow(4000);
        let r = BigRational::new(big.clone(), BigInt::one());
        let expected = 4000.0 * (7f64).ln();
        assert!((r.ln_f64() - expected).abs() < 1e-6 * expected);
        let tiny = BigRational::new(BigInt::one(), big);
        assert!((tiny.ln_f64() + expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn bigint_to_rug_roundtrip() {
        let k = BigInt::parse_bytes(b"-123456789012345678901234567890", 10).unwrap();
        let z = bigint_to_rug(&k);
        assert_eq!(z.to_string(), k.to_string());
    }

    #[test]
    fn rejects_zero_and_negative_lengths() {
        assert!(parse_lengths("1 0 2", 64).is_err());
        assert!(parse_lengths("1/2 -1/3", 64).is_err());
        assert!(parse_lengths("", 64).is_err());
    }
}
