//! Exact complex-rational scalars.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Complex, One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Complex number with exact rational real and imaginary parts. `BigRational`
/// keeps fractions reduced, so equality is structural.
pub type Scalar = Complex<BigRational>;

pub fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(p: i64) -> Scalar {
    Complex::new(rat(p, 1), BigRational::zero())
}

pub fn real(r: BigRational) -> Scalar {
    Complex::new(r, BigRational::zero())
}

pub fn frac(p: i64, q: i64) -> Scalar {
    real(rat(p, q))
}

pub fn imag_unit() -> Scalar {
    Complex::new(BigRational::zero(), BigRational::one())
}

pub fn to_c64(s: &Scalar) -> num::complex::Complex64 {
    num::complex::Complex64::new(s.re.to_f64().unwrap_or(f64::NAN), s.im.to_f64().unwrap_or(f64::NAN))
}

/// Renders a rational as `"p/q"` (or `"p"` when the denominator is one).
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::Invalid(format!("not a rational: {s:?}"));
    let s = s.trim();
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s, "1"),
    };
    let p: BigInt = p.parse().map_err(|_| bad())?;
    let q: BigInt = q.parse().map_err(|_| bad())?;
    if q.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(p, q))
}

/// Multiplicative inverse; `None` for zero.
pub fn inverse(s: &Scalar) -> Option<Scalar> {
    if s.is_zero() {
        None
    } else {
        Some(Scalar::one() / s.clone())
    }
}
