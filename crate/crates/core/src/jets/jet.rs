use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::index::{Monomial, MultiIndex};
use super::scalar::{self, Scalar};
use crate::error::{Error, Result};

/// Holomorphic or anti-holomorphic direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Holo,
    Anti,
}

/// Truncated power series in `z_1..z_n, z̄_1..z̄_n` with exact coefficients.
///
/// `max_degree` is the precision: every coefficient of total degree
/// `<= max_degree` is exact, nothing above it is stored. Differentiation
/// lowers it by one, products take the minimum of their inputs. A negative
/// precision means the jet carries no information at all.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Jet {
    n: usize,
    max_degree: i32,
    terms: BTreeMap<Monomial, Scalar>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
}

/// Checked binary arithmetic on two jets sharing `n` and truncation degree.
pub fn jet_arith(a: &Jet, b: &Jet, op: JetOp) -> Result<Jet> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch(a.n, b.n));
    }
    if a.max_degree != b.max_degree {
        return Err(Error::TruncationMismatch(format!("degree {} vs {}", a.max_degree, b.max_degree)));
    }
    Ok(match op {
        JetOp::Add => a + b,
        JetOp::Sub => a - b,
        JetOp::Mul => a * b,
    })
}

impl Jet {
    pub fn zero(n: usize, max_degree: i32) -> Self {
        Jet { n, max_degree, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, max_degree: i32, c: Scalar) -> Self {
        Self::monomial(n, max_degree, Monomial::one(n), c)
    }

    pub fn one(n: usize, max_degree: i32) -> Self {
        Self::constant(n, max_degree, Scalar::one())
    }

    pub fn monomial(n: usize, max_degree: i32, m: Monomial, c: Scalar) -> Self {
        assert_eq!(m.n(), n, "monomial arity");
        let mut j = Jet::zero(n, max_degree);
        j.add_term(m, c);
        j
    }

    /// The coordinate function `z_i` (or `z̄_i`).
    pub fn coordinate(n: usize, max_degree: i32, i: usize, kind: VarKind) -> Self {
        let m = match kind {
            VarKind::Holo => Monomial::holo_unit(n, i),
            VarKind::Anti => Monomial::anti_unit(n, i),
        };
        Self::monomial(n, max_degree, m, Scalar::one())
    }

    /// Builds a jet from `(holo, anti, coeff)` triples; terms above the
    /// truncation degree are dropped.
    pub fn from_terms<I>(n: usize, max_degree: i32, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, Scalar)>,
    {
        let mut j = Jet::zero(n, max_degree);
        for (m, c) in terms {
            j.add_term(m, c);
        }
        j
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> i32 {
        self.max_degree
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Scalar> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Zero up to its precision.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when at least the constant term is known.
    pub fn is_informative(&self) -> bool {
        self.max_degree >= 0
    }

    pub fn coeff(&self, m: &Monomial) -> Scalar {
        self.terms.get(m).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn constant_term(&self) -> Scalar {
        self.coeff(&Monomial::one(self.n))
    }

    /// Highest total degree actually present.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// Adds `c·m`, dropping it when above the precision and pruning zeros.
    pub fn add_term(&mut self, m: Monomial, c: Scalar) {
        if c.is_zero() || i64::from(m.degree()) > i64::from(self.max_degree) {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().clone() + c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    /// Lowers the precision to `deg` (never raises it).
    pub fn truncate(&self, deg: i32) -> Jet {
        let d = deg.min(self.max_degree);
        Jet {
            n: self.n,
            max_degree: d,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| i64::from(m.degree()) <= i64::from(d))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Declares a higher precision. Only valid for jets known to be exact
    /// polynomials (e.g. test monomials); no coefficients are invented.
    pub fn with_precision(&self, deg: i32) -> Jet {
        let mut j = self.truncate(deg);
        j.max_degree = deg;
        j
    }

    pub fn scale(&self, c: &Scalar) -> Jet {
        if c.is_zero() {
            return Jet::zero(self.n, self.max_degree);
        }
        Jet {
            n: self.n,
            max_degree: self.max_degree,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v.clone() * c.clone())).collect(),
        }
    }

    /// Multiplication by `c·m`; exact, keeps the precision.
    pub fn mul_monomial(&self, m: &Monomial, c: &Scalar) -> Jet {
        let mut out = Jet::zero(self.n, self.max_degree);
        if c.is_zero() {
            return out;
        }
        for (k, v) in &self.terms {
            out.add_term(k.add(m), v.clone() * c.clone());
        }
        out
    }

    /// `∂/∂z_var` or `∂/∂z̄_var`.
    pub fn diff(&self, var: usize, kind: VarKind) -> Jet {
        let d = match kind {
            VarKind::Holo => Monomial::holo_unit(self.n, var),
            VarKind::Anti => Monomial::anti_unit(self.n, var),
        };
        self.derivative(&d)
    }

    /// Mixed partial `∂_z^{d.holo} ∂_z̄^{d.anti}`.
    pub fn derivative(&self, d: &Monomial) -> Jet {
        let order = d.degree() as i32;
        let mut out = Jet::zero(self.n, self.max_degree - order);
        if order == 0 {
            return self.clone();
        }
        for (m, c) in &self.terms {
            if let Some(rest) = m.checked_sub(d) {
                let f = m.falling(d);
                out.add_term(rest, c.clone() * scalar::int(f as i64));
            }
        }
        out
    }

    /// Multiplicative inverse up to the truncation degree.
    pub fn inverse(&self) -> Result<Jet> {
        let c0 = self.constant_term();
        let inv0 = scalar::inverse(&c0).ok_or(Error::ZeroConstantTerm)?;
        // 1/(c0(1+u)) = inv0 Σ (-u)^k, u has no constant term.
        let mut u = self.scale(&inv0);
        u.add_term(Monomial::one(self.n), -Scalar::one());
        let neg_u = -&u;
        let mut acc = Jet::one(self.n, self.max_degree);
        let mut power = Jet::one(self.n, self.max_degree);
        for _ in 0..self.max_degree.max(0) {
            power = &power * &neg_u;
            if power.is_zero() {
                break;
            }
            acc = &acc + &power;
        }
        Ok(acc.scale(&inv0))
    }

    pub fn pow(&self, k: u32) -> Jet {
        let mut acc = Jet::one(self.n, self.max_degree);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Complex conjugate function: swaps `z` and `z̄` and conjugates coefficients.
    pub fn conjugate(&self) -> Jet {
        Jet {
            n: self.n,
            max_degree: self.max_degree,
            terms: self.terms.iter().map(|(m, c)| (m.conjugate(), c.conj())).collect(),
        }
    }

    /// True when every term is free of `z̄`.
    pub fn is_holomorphic(&self) -> bool {
        self.terms.keys().all(|m| m.anti.is_zero())
    }

    pub fn is_antiholomorphic(&self) -> bool {
        self.terms.keys().all(|m| m.holo.is_zero())
    }

    /// Equality on the common precision of the two jets.
    pub fn agrees_with(&self, other: &Jet) -> bool {
        (self - other).is_zero()
    }

    /// Random polynomial jet: `terms` monomials of degree `<= poly_degree`
    /// with small rational coefficients (complex unless `real_only`).
    pub fn random<R: Rng>(
        n: usize,
        max_degree: i32,
        poly_degree: u32,
        terms: usize,
        real_only: bool,
        rng: &mut R,
    ) -> Jet {
        let mut j = Jet::zero(n, max_degree);
        for _ in 0..terms {
            let d = rng.gen_range(0..=poly_degree);
            let split = rng.gen_range(0..=d);
            let holo = random_index(n, split, rng);
            let anti = random_index(n, d - split, rng);
            let re = scalar::rat(rng.gen_range(-5..=5), rng.gen_range(1..=3));
            let im = if real_only {
                num::rational::BigRational::zero()
            } else {
                scalar::rat(rng.gen_range(-5..=5), rng.gen_range(1..=3))
            };
            j.add_term(Monomial::new(holo, anti), Scalar::new(re, im));
        }
        j
    }

    fn binary(&self, other: &Jet, sign: i64) -> Jet {
        assert_eq!(self.n, other.n, "jet dimension mismatch");
        let d = self.max_degree.min(other.max_degree);
        let mut out = self.truncate(d);
        for (m, c) in &other.terms {
            let c = if sign < 0 { -c.clone() } else { c.clone() };
            out.add_term(m.clone(), c);
        }
        out
    }
}

fn random_index<R: Rng>(n: usize, d: u32, rng: &mut R) -> MultiIndex {
    let mut v = vec![0u32; n];
    for _ in 0..d {
        v[rng.gen_range(0..n)] += 1;
    }
    MultiIndex(v)
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.binary(rhs, 1)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.binary(rhs, -1)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(&-Scalar::one())
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        assert_eq!(self.n, rhs.n, "jet dimension mismatch");
        let d = self.max_degree.min(rhs.max_degree);
        let mut out = Jet::zero(self.n, d);
        for (ma, ca) in &self.terms {
            let da = i64::from(ma.degree());
            for (mb, cb) in &rhs.terms {
                if da + i64::from(mb.degree()) > i64::from(d) {
                    continue;
                }
                out.add_term(ma.add(mb), ca.clone() * cb.clone());
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0 + O({})", self.max_degree + 1);
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(
                f,
                "({}{}{}i){}",
                scalar::format_rational(&c.re),
                if c.im >= num::rational::BigRational::zero() { "+" } else { "" },
                scalar::format_rational(&c.im),
                if m.is_one() { String::new() } else { format!("·{m}") }
            )?;
        }
        write!(f, " + O({})", self.max_degree + 1)
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    dz: Vec<u32>,
    dzbar: Vec<u32>,
    re: String,
    im: String,
}

#[derive(Serialize, Deserialize)]
struct JetJson {
    n: usize,
    max_degree: i32,
    terms: Vec<TermJson>,
}

impl Serialize for Jet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        JetJson {
            n: self.n,
            max_degree: self.max_degree,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermJson {
                    dz: m.holo.0.clone(),
                    dzbar: m.anti.0.clone(),
                    re: scalar::format_rational(&c.re),
                    im: scalar::format_rational(&c.im),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Jet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = JetJson::deserialize(d)?;
        let mut j = Jet::zero(raw.n, raw.max_degree);
        for t in raw.terms {
            if t.dz.len() != raw.n || t.dzbar.len() != raw.n {
                return Err(D::Error::custom("multi-index length differs from n"));
            }
            let re = scalar::parse_rational(&t.re).map_err(D::Error::custom)?;
            let im = scalar::parse_rational(&t.im).map_err(D::Error::custom)?;
            j.add_term(Monomial::new(MultiIndex(t.dz), MultiIndex(t.dzbar)), Scalar::new(re, im));
        }
        Ok(j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::scalar::{frac, int};
    use rand::SeedableRng;

    fn z(d: i32) -> Jet {
        Jet::coordinate(1, d, 0, VarKind::Holo)
    }
    fn zb(d: i32) -> Jet {
        Jet::coordinate(1, d, 0, VarKind::Anti)
    }
    fn mono(h: u32, a: u32, d: i32, c: Scalar) -> Jet {
        Jet::monomial(1, d, Monomial::from_slices(&[h], &[a]), c)
    }

    #[test]
    fn product_expands() {
        let one = Jet::one(1, 4);
        let lhs = (&one + &z(4)) * (&one + &zb(4));
        let expect = Jet::from_terms(
            1,
            4,
            [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().map(|(h, a)| (Monomial::from_slices(&[h], &[a]), int(1))),
        );
        assert_eq!(lhs, expect);
    }

    #[test]
    fn annihilation_and_truncation() {
        let a = Jet::random(1, 5, 3, 4, false, &mut rand_chacha::ChaCha8Rng::seed_from_u64(7));
        assert!((&a * &Jet::zero(1, 5)).is_zero());
        let z2 = mono(2, 0, 2, int(1));
        assert!((&z2 * &z(2)).is_zero());
    }

    #[test]
    fn checked_arith_reports_mismatch() {
        assert_eq!(
            jet_arith(&z(3), &Jet::coordinate(2, 3, 0, VarKind::Holo), JetOp::Add),
            Err(Error::DimensionMismatch(1, 2))
        );
        assert!(matches!(jet_arith(&z(3), &z(4), JetOp::Mul), Err(Error::TruncationMismatch(_))));
        assert_eq!(jet_arith(&z(3), &zb(3), JetOp::Sub).unwrap().len(), 2);
    }

    #[test]
    fn derivatives() {
        let f = mono(2, 1, 6, int(1));
        assert_eq!(f.diff(0, VarKind::Holo), mono(1, 1, 5, int(2)));
        assert!(mono(2, 0, 6, int(1)).diff(0, VarKind::Anti).is_zero());
        assert_eq!(f.diff(0, VarKind::Holo).max_degree(), 5);
    }

    #[test]
    fn log_series_mixed_derivative() {
        // log(1+t) = Σ (-1)^{k+1} t^k / k with t = zz̄, to degree 6.
        let d = 6;
        let log = Jet::from_terms(
            1,
            d,
            (1..=3).map(|k| {
                let sign = if k % 2 == 1 { 1 } else { -1 };
                (Monomial::from_slices(&[k], &[k]), frac(sign, k as i64))
            }),
        );
        // Oracle: d/dz d/dzbar of t^k/k is k t^{k-1}.
        let expect = Jet::from_terms(
            1,
            4,
            (0..=2).map(|k| {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                (Monomial::from_slices(&[k], &[k]), int(sign * (k as i64 + 1)))
            }),
        );
        let got = log.diff(0, VarKind::Holo).diff(0, VarKind::Anti);
        assert_eq!(got, expect);
    }

    #[test]
    fn inverses() {
        let one = Jet::one(1, 6);
        assert_eq!(one.inverse().unwrap(), one);
        let t = mono(1, 1, 6, int(1));
        let inv = (&one + &t).inverse().unwrap();
        let expect = Jet::from_terms(
            1,
            6,
            (0..=3).map(|k| (Monomial::from_slices(&[k], &[k]), int(if k % 2 == 0 { 1 } else { -1 }))),
        );
        assert_eq!(inv, expect);
        let two_z = &Jet::constant(1, 3, int(2)) + &z(3);
        let inv = two_z.inverse().unwrap();
        let expect = Jet::from_terms(
            1,
            3,
            (0..=3).map(|k| {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                (Monomial::from_slices(&[k], &[0]), frac(sign, 1 << (k + 1)))
            }),
        );
        assert_eq!(inv, expect);
        assert_eq!(z(3).inverse(), Err(Error::ZeroConstantTerm));
    }

    #[test]
    fn json_roundtrip() {
        let j = Jet::random(2, 4, 3, 6, false, &mut rand_chacha::ChaCha8Rng::seed_from_u64(7));
        let s = serde_json::to_string(&j).unwrap();
        let back: Jet = serde_json::from_str(&s).unwrap();
        assert_eq!(j, back);
        assert!(s.contains("\"dzbar\""));
    }
}
