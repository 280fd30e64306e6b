use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::complex::Complex64;
use num::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial in `x_1..x_d` with complex floating coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<PolyTerm>", try_from = "PolyRepr")]
pub struct Poly {
    d: usize,
    terms: BTreeMap<Vec<u32>, Complex64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub exp: Vec<u32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PolyRepr {
    Terms(Vec<PolyTerm>),
    Dim { d: usize, terms: Vec<PolyTerm> },
}

impl From<Poly> for Vec<PolyTerm> {
    fn from(p: Poly) -> Self {
        p.terms.into_iter().map(|(exp, c)| PolyTerm { exp, re: c.re, im: c.im }).collect()
    }
}

impl TryFrom<PolyRepr> for Poly {
    type Error = Error;
    fn try_from(r: PolyRepr) -> Result<Self> {
        let (d, terms) = match r {
            PolyRepr::Terms(t) => (t.first().map_or(0, |x| x.exp.len()), t),
            PolyRepr::Dim { d, terms } => (d, terms),
        };
        let mut p = Poly::zero(d);
        for t in terms {
            if t.exp.len() != d {
                return Err(Error::DimensionMismatch(d, t.exp.len()));
            }
            p.add_term(t.exp, Complex64::new(t.re, t.im));
        }
        Ok(p)
    }
}

impl Poly {
    pub fn zero(d: usize) -> Self {
        Poly { d, terms: BTreeMap::new() }
    }

    pub fn constant(d: usize, c: Complex64) -> Self {
        let mut p = Poly::zero(d);
        p.add_term(vec![0; d], c);
        p
    }

    pub fn one(d: usize) -> Self {
        Poly::constant(d, Complex64::new(1.0, 0.0))
    }

    /// `x_i` (zero-based).
    pub fn var(d: usize, i: usize) -> Self {
        let mut e = vec![0; d];
        e[i] = 1;
        Poly::monomial(e, 1.0)
    }

    pub fn monomial(exp: Vec<u32>, c: f64) -> Self {
        let mut p = Poly::zero(exp.len());
        p.add_term(exp, Complex64::new(c, 0.0));
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Vec<u32>, Complex64)>>(d: usize, terms: I) -> Self {
        let mut p = Poly::zero(d);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, Complex64> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exp: &[u32]) -> Complex64 {
        self.terms.get(exp).copied().unwrap_or_else(Complex64::zero)
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn add_term(&mut self, exp: Vec<u32>, c: Complex64) {
        assert_eq!(exp.len(), self.d, "exponent length");
        let v = self.coeff(&exp) + c;
        if v.is_zero() {
            self.terms.remove(&exp);
        } else {
            self.terms.insert(exp, v);
        }
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        Poly::from_terms(self.d, self.terms.iter().map(|(e, v)| (e.clone(), v * c)))
    }

    /// `∂/∂x_i`.
    pub fn diff(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.d);
        for (e, v) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            out.add_term(e2, v * e[i] as f64);
        }
        out
    }

    /// Derivative along every index in `idx`, repeats allowed.
    pub fn diff_many(&self, idx: &[usize]) -> Poly {
        idx.iter().fold(self.clone(), |p, &i| p.diff(i))
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms.iter().map(|(e, v)| v * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>()).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.terms.values().all(|c| c.im == 0.0)
    }

    /// Drops coefficients with modulus at most `tol`.
    pub fn pruned(&self, tol: f64) -> Poly {
        Poly::from_terms(self.d, self.terms.iter().filter(|(_, v)| v.norm() > tol).map(|(e, v)| (e.clone(), *v)))
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, v) in &o.terms {
            out.add_term(e.clone(), *v);
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        self + &(-o)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        let mut out = Poly::zero(self.d);
        for (a, x) in &self.terms {
            for (b, y) in &o.terms {
                let e: Vec<u32> = a.iter().zip(b).map(|(p, q)| p + q).collect();
                out.add_term(e, x * y);
            }
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, v) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if v.im == 0.0 {
                write!(f, "{}", v.re)?;
            } else {
                write!(f, "({}{:+}i)", v.re, v.im)?;
            }
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{k}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

/// Parses `"2*x1^2*x2 - x3 + 0.5"`.
pub fn parse_poly(text: &str, d: usize) -> Result<Poly> {
    let mut out = Poly::zero(d);
    let s: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let skip = |pos: &mut usize| {
        while *pos < s.len() && s[*pos].is_whitespace() {
            *pos += 1;
        }
    };
    let err = |pos: usize, msg: &str| Error::Parse { pos, msg: msg.to_string() };
    let number = |pos: &mut usize| -> Option<f64> {
        let start = *pos;
        while *pos < s.len() && (s[*pos].is_ascii_digit() || s[*pos] == '.' || s[*pos] == 'e') {
            *pos += 1;
        }
        if start == *pos {
            return None;
        }
        s[start..*pos].iter().collect::<String>().parse().ok()
    };
    skip(&mut pos);
    if pos == s.len() {
        return Err(err(pos, "empty polynomial"));
    }
    let mut sign = 1.0;
    loop {
        skip(&mut pos);
        if pos < s.len() && (s[pos] == '+' || s[pos] == '-') {
            if s[pos] == '-' {
                sign = -sign;
            }
            pos += 1;
            skip(&mut pos);
        }
        let mut coeff = sign;
        let mut exp = vec![0u32; d];
        let mut factors = 0;
        loop {
            skip(&mut pos);
            if pos < s.len() && s[pos] == 'x' {
                pos += 1;
                let at = pos;
                let i = number(&mut pos).ok_or_else(|| err(at, "expected variable index"))? as usize;
                if i == 0 || i > d {
                    return Err(err(at, "variable index out of range"));
                }
                let mut k = 1;
                skip(&mut pos);
                if pos < s.len() && s[pos] == '^' {
                    pos += 1;
                    skip(&mut pos);
                    let at = pos;
                    k = number(&mut pos).ok_or_else(|| err(at, "expected exponent"))? as u32;
                }
                exp[i - 1] += k;
            } else {
                let at = pos;
                coeff *= number(&mut pos).ok_or_else(|| err(at, "expected number or variable"))?;
            }
            factors += 1;
            skip(&mut pos);
            if pos < s.len() && s[pos] == '*' {
                pos += 1;
                continue;
            }
            break;
        }
        debug_assert!(factors > 0);
        out.add_term(exp, Complex64::new(coeff, 0.0));
        skip(&mut pos);
        if pos == s.len() {
            return Ok(out);
        }
        match s[pos] {
            '+' | '-' => sign = 1.0,
            _ => return Err(err(pos, "expected + or -")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_derivatives() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = &(&x * &x) * &y;
        assert_eq!(p.diff(0), (&x * &y).scale(Complex64::new(2.0, 0.0)));
        assert!(p.diff(1).diff(1).is_zero());
        assert!((&p - &p).is_zero());
        assert_eq!(p.eval(&[2.0, 3.0]), Complex64::new(12.0, 0.0));
    }

    #[test]
    fn parsing() {
        let p = parse_poly("2*x1^2*x2 - x2 + 0.5", 2).unwrap();
        assert_eq!(p.coeff(&[2, 1]).re, 2.0);
        assert_eq!(p.coeff(&[0, 1]).re, -1.0);
        assert_eq!(p.coeff(&[0, 0]).re, 0.5);
        assert!(matches!(parse_poly("x3", 2), Err(Error::Parse { .. })));
        assert!(matches!(parse_poly("x1 x2", 2), Err(Error::Parse { pos: 3, .. })));
    }

    #[test]
    fn json_roundtrip() {
        let p = parse_poly("x1*x2 - 3", 2).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: Poly = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
