use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num::complex::Complex64;
use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `coeff · z^a z̄^b (1+zz̄)^{−c}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymTerm {
    pub coeff: Complex64,
    pub a: u32,
    pub b: u32,
    pub c: u32,
}

impl SymTerm {
    pub fn new(coeff: f64, a: u32, b: u32, c: u32) -> Self {
        SymTerm { coeff: Complex64::new(coeff, 0.0), a, b, c }
    }

    pub fn is_bounded(&self) -> bool {
        self.a + self.b <= 2 * self.c
    }

    /// Value at the sphere point with `cos θ = x`, azimuth `phi`, written so
    /// that no power of `|z|` is ever formed.
    pub fn eval_sphere(&self, x: f64, phi: f64) -> Complex64 {
        let s = (self.a + self.b) as f64 / 2.0;
        let mag = ((1.0 - x) / 2.0).powf(s) * ((1.0 + x) / 2.0).powf(self.c as f64 - s);
        self.coeff * Complex64::from_polar(mag, (self.a as f64 - self.b as f64) * phi)
    }
}

/// Observable on the sphere in the affine chart.
#[derive(Clone)]
pub enum ObservableFn {
    /// Finite sum of bounded terms, canonically ordered by `(a, b, c)`.
    Terms(Vec<SymTerm>),
    /// Opaque function of the chart coordinate; grid evaluation only.
    Callback(Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>),
}

impl fmt::Debug for ObservableFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableFn::Terms(t) => f.debug_tuple("Terms").field(t).finish(),
            ObservableFn::Callback(_) => write!(f, "Callback(..)"),
        }
    }
}

/// Signed-exponent form used while reducing: `z^a z̄^b (1+zz̄)^{−c}`.
type Key = (u32, u32, i64);

fn reduce(raw: BTreeMap<Key, Complex64>) -> BTreeMap<Key, Complex64> {
    let mut work = raw;
    let mut out: BTreeMap<Key, Complex64> = BTreeMap::new();
    while let Some((&(a, b, c), &v)) = work.iter().next_back() {
        work.remove(&(a, b, c));
        if v == Complex64::zero() {
            continue;
        }
        let push = |m: &mut BTreeMap<Key, Complex64>, k: Key, x: Complex64| {
            *m.entry(k).or_insert_with(Complex64::zero) += x;
        };
        if c < 0 {
            // (1+zz̄)^{|c|} = Σ binom · (zz̄)^j
            let e = (-c) as u32;
            for j in 0..=e {
                push(&mut work, (a + j, b + j, 0), v * crate::jets::binomial(e, j) as f64);
            }
        } else if (a + b) as i64 > 2 * c && a > 0 && b > 0 {
            // zz̄ = (1+zz̄) − 1
            push(&mut work, (a - 1, b - 1, c - 1), v);
            push(&mut work, (a - 1, b - 1, c), -v);
        } else {
            push(&mut out, (a, b, c), v);
        }
    }
    out.retain(|_, v| v.norm() > 0.0);
    out
}

fn from_map(m: BTreeMap<Key, Complex64>) -> Result<ObservableFn> {
    let mut terms = Vec::new();
    for ((a, b, c), v) in m {
        if c < 0 || (a + b) as i64 > 2 * c {
            return Err(Error::UnboundedSymbol(format!("z^{a} zbar^{b} / (1+zz)^{c}")));
        }
        terms.push(SymTerm { coeff: v, a, b, c: c as u32 });
    }
    Ok(ObservableFn::Terms(terms))
}

impl ObservableFn {
    /// Canonicalizes and checks `a + b ≤ 2c` for every term.
    pub fn from_terms(terms: Vec<SymTerm>) -> Result<Self> {
        let mut m: BTreeMap<Key, Complex64> = BTreeMap::new();
        for t in &terms {
            if !t.is_bounded() {
                return Err(Error::UnboundedSymbol(format!("z^{} zbar^{} / (1+zz)^{}", t.a, t.b, t.c)));
            }
            *m.entry((t.a, t.b, t.c as i64)).or_insert_with(Complex64::zero) += t.coeff;
        }
        m.retain(|_, v| v.norm() > 0.0);
        from_map(m)
    }

    pub fn callback<F: Fn(Complex64) -> Complex64 + Send + Sync + 'static>(f: F) -> Self {
        ObservableFn::Callback(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        ObservableFn::Terms(if c == 0.0 { vec![] } else { vec![SymTerm::new(c, 0, 0, 0)] })
    }

    /// `(1 − zz̄)/(1 + zz̄)`, the third coordinate of the unit sphere.
    pub fn height() -> Self {
        ObservableFn::Terms(vec![SymTerm::new(1.0, 0, 0, 1), SymTerm::new(-1.0, 1, 1, 1)])
    }

    /// `(z + z̄)/(1 + zz̄)`, the first coordinate of the unit sphere.
    pub fn x1() -> Self {
        ObservableFn::Terms(vec![SymTerm::new(1.0, 0, 1, 1), SymTerm::new(1.0, 1, 0, 1)])
    }

    /// `i(z̄ − z)/(1 + zz̄)`, the second coordinate of the unit sphere.
    pub fn x2() -> Self {
        ObservableFn::Terms(vec![
            SymTerm { coeff: Complex64::new(0.0, 1.0), a: 0, b: 1, c: 1 },
            SymTerm { coeff: Complex64::new(0.0, -1.0), a: 1, b: 0, c: 1 },
        ])
    }

    pub fn terms(&self) -> Option<&[SymTerm]> {
        match self {
            ObservableFn::Terms(t) => Some(t),
            ObservableFn::Callback(_) => None,
        }
    }

    fn need_terms(&self, what: &str) -> Result<&[SymTerm]> {
        self.terms().ok_or_else(|| Error::Invalid(format!("{what} needs a term-list observable")))
    }

    fn map(&self) -> Result<BTreeMap<Key, Complex64>> {
        let mut m = BTreeMap::new();
        for t in self.need_terms("symbolic arithmetic")? {
            *m.entry((t.a, t.b, t.c as i64)).or_insert_with(Complex64::zero) += t.coeff;
        }
        Ok(m)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            ObservableFn::Terms(t) => t
                .iter()
                .map(|t| t.coeff * z.powu(t.a) * z.conj().powu(t.b) / (1.0 + z.norm_sqr()).powi(t.c as i32))
                .sum(),
            ObservableFn::Callback(f) => f(z),
        }
    }

    /// Value at `cos θ = x`, azimuth `phi`, with `z = tan(θ/2) e^{iφ}`.
    pub fn eval_sphere(&self, x: f64, phi: f64) -> Complex64 {
        match self {
            ObservableFn::Terms(t) => t.iter().map(|t| t.eval_sphere(x, phi)).sum(),
            ObservableFn::Callback(f) => f(Complex64::from_polar(((1.0 - x) / (1.0 + x)).sqrt(), phi)),
        }
    }

    /// Closed under `(a, b, coeff) ↔ (b, a, conj coeff)`.
    pub fn is_real(&self) -> bool {
        match self {
            ObservableFn::Terms(t) => t.iter().all(|x| {
                t.iter().any(|y| y.a == x.b && y.b == x.a && y.c == x.c && (y.coeff - x.coeff.conj()).norm() < 1e-15)
            }),
            ObservableFn::Callback(_) => false,
        }
    }

    pub fn scale(&self, s: Complex64) -> Result<Self> {
        let m = self.map()?.into_iter().map(|(k, v)| (k, v * s)).collect();
        from_map(reduce(m))
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        let mut m = self.map()?;
        for (k, v) in o.map()? {
            *m.entry(k).or_insert_with(Complex64::zero) += v;
        }
        from_map(reduce(m))
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.scale(Complex64::new(-1.0, 0.0))?)
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        let mut m = BTreeMap::new();
        for ((a, b, c), v) in self.map()? {
            for ((p, q, r), w) in o.map()? {
                *m.entry((a + p, b + q, c + r)).or_insert_with(Complex64::zero) += v * w;
            }
        }
        from_map(reduce(m))
    }

    fn d_raw(m: &BTreeMap<Key, Complex64>, holo: bool) -> BTreeMap<Key, Complex64> {
        let mut out = BTreeMap::new();
        for (&(a, b, c), &v) in m {
            let (p, q) = if holo { (a, b) } else { (b, a) };
            let mut push = |pp: u32, qq: u32, cc: i64, x: Complex64| {
                let k = if holo { (pp, qq, cc) } else { (qq, pp, cc) };
                *out.entry(k).or_insert_with(Complex64::zero) += x;
            };
            if p > 0 {
                push(p - 1, q, c, v * p as f64);
            }
            if c != 0 {
                push(p, q + 1, c + 1, -v * c as f64);
            }
        }
        out
    }

    /// `∂f/∂z`.
    pub fn d_z(&self) -> Result<Self> {
        from_map(reduce(Self::d_raw(&self.map()?, true)))
    }

    /// `∂f/∂z̄`.
    pub fn d_zbar(&self) -> Result<Self> {
        from_map(reduce(Self::d_raw(&self.map()?, false)))
    }

    /// `(1+zz̄)^k · f` for `k ≥ 0`, reduced.
    pub fn times_weight(&self, k: u32) -> Result<Self> {
        let m = self.map()?.into_iter().map(|((a, b, c), v)| ((a, b, c - k as i64), v)).collect();
        from_map(reduce(m))
    }

    /// `Δf = (1+zz̄)² ∂∂̄f`, the Laplacian with `Δ((1−zz̄)/(1+zz̄)) = −2·(1−zz̄)/(1+zz̄)`.
    pub fn laplacian(&self) -> Result<Self> {
        let dd = Self::d_raw(&Self::d_raw(&self.map()?, false), true);
        let m = dd.into_iter().map(|((a, b, c), v)| ((a, b, c - 2), v)).collect();
        from_map(reduce(m))
    }

    /// `{f, g} = i(1+zz̄)²(∂̄f ∂g − ∂f ∂̄g)`.
    pub fn poisson(&self, g: &Self) -> Result<Self> {
        let left = self.d_zbar()?.mul(&g.d_z()?)?;
        let right = self.d_z()?.mul(&g.d_zbar()?)?;
        left.sub(&right)?.times_weight(2)?.scale(Complex64::new(0.0, 1.0))
    }

    /// Upper bound for `sup |f|` as the maximum over a fine sphere grid.
    pub fn sup_norm_sampled(&self, n: usize) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..=n {
            let x = -1.0 + 2.0 * i as f64 / n as f64;
            let x = x.clamp(-1.0 + 1e-15, 1.0);
            for j in 0..2 * n {
                let phi = PI * j as f64 / n as f64;
                best = best.max(self.eval_sphere(x, phi).norm());
            }
        }
        best
    }

    /// `∫ f Ω` exactly, `Ω = i dz∧dz̄/(1+zz̄)²`.
    pub fn integral(&self) -> Result<Complex64> {
        Ok(self
            .need_terms("exact integration")?
            .iter()
            .filter(|t| t.a == t.b)
            .map(|t| t.coeff * (2.0 * PI * beta(t.a, t.c - t.a).to_f64().unwrap()))
            .sum())
    }

    /// Parses `"c * z^a zbar^b / (1+zz)^k"` sums; `zz` stands for `z zbar`
    /// and parenthesized sums multiply out.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { s: text.chars().collect(), pos: 0 };
        let m = p.expr()?;
        p.skip();
        if p.pos != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        let m: BTreeMap<Key, Complex64> = m.into_iter().filter(|(_, v)| v.norm() > 0.0).collect();
        for &(a, b, c) in m.keys() {
            if (a + b) as i64 > 2 * c {
                return Err(Error::UnboundedSymbol(format!("z^{a} zbar^{b} / (1+zz)^{c}")));
            }
        }
        from_map(m)
    }
}

impl fmt::Display for ObservableFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ObservableFn::Terms(t) = self else { return write!(f, "<callback>") };
        if t.is_empty() {
            return write!(f, "0");
        }
        for (k, x) in t.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if x.coeff.im == 0.0 {
                write!(f, "{}", x.coeff.re)?;
            } else {
                write!(f, "({}{:+}i)", x.coeff.re, x.coeff.im)?;
            }
            if x.a > 0 {
                write!(f, " * z^{}", x.a)?;
            }
            if x.b > 0 {
                write!(f, " * zbar^{}", x.b)?;
            }
            if x.c > 0 {
                write!(f, " / (1+zz)^{}", x.c)?;
            }
        }
        Ok(())
    }
}

/// `∫_0^∞ t^p (1+t)^{−(p+q+2)} dt = B(p+1, q+1) = p! q! / (p+q+1)!`.
pub fn beta(p: u32, q: u32) -> BigRational {
    BigRational::new(fact(p) * fact(q), fact(p + q + 1))
}

pub(crate) fn fact(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

struct Parser {
    s: Vec<char>,
    pos: usize,
}

type Poly = BTreeMap<Key, Complex64>;

impl Parser {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, word: &str) -> bool {
        self.skip();
        let w: Vec<char> = word.chars().collect();
        if self.s[self.pos..].starts_with(&w) {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    fn int(&mut self) -> Result<u32> {
        self.skip();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        self.s[start..self.pos].iter().collect::<String>().parse().map_err(|_| self.err("integer too large"))
    }

    fn power(&mut self) -> Result<u32> {
        if self.eat("^") {
            self.int()
        } else {
            Ok(1)
        }
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = Poly::new();
        let mut sign = 1.0;
        if self.eat("-") {
            sign = -1.0;
        } else {
            self.eat("+");
        }
        loop {
            for (k, v) in self.term()? {
                *acc.entry(k).or_insert_with(Complex64::zero) += v * sign;
            }
            if self.eat("+") {
                sign = 1.0;
            } else if self.eat("-") {
                sign = -1.0;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc: Poly = [((0, 0, 0), Complex64::new(1.0, 0.0))].into_iter().collect();
        let mut any = false;
        loop {
            let Some(ch) = self.peek() else { break };
            if ch == '*' {
                if !any {
                    return Err(self.err("dangling '*'"));
                }
                self.pos += 1;
                continue;
            }
            if ch == '/' {
                if !any {
                    return Err(self.err("dangling '/'"));
                }
                self.pos += 1;
                let at = self.pos;
                if !(self.eat("(") && self.eat("1") && self.eat("+") && self.eat("zz") && self.eat(")")) {
                    self.pos = at;
                    return Err(self.err("denominator must be (1+zz)^k"));
                }
                let k = self.power()? as i64;
                acc = acc.into_iter().map(|((a, b, c), v)| ((a, b, c + k), v)).collect();
                continue;
            }
            let factor = self.factor()?;
            let Some(factor) = factor else { break };
            acc = multiply(&acc, &factor);
            any = true;
        }
        if !any {
            return Err(self.err("expected a term"));
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Option<Poly>> {
        let single = |k: Key, v: Complex64| -> Poly { [(k, v)].into_iter().collect() };
        let ch = match self.peek() {
            Some(c) => c,
            None => return Ok(None),
        };
        if ch == '(' {
            self.pos += 1;
            let inner = self.expr()?;
            if !self.eat(")") {
                return Err(self.err("expected ')'"));
            }
            return Ok(Some(inner));
        }
        if ch.is_ascii_digit() || ch == '.' {
            let start = self.pos;
            while self.pos < self.s.len()
                && (self.s[self.pos].is_ascii_digit()
                    || self.s[self.pos] == '.'
                    || self.s[self.pos] == 'e'
                    || (self.s[self.pos] == '-' && self.pos > start && self.s[self.pos - 1] == 'e'))
            {
                self.pos += 1;
            }
            let x: f64 = self.s[start..self.pos]
                .iter()
                .collect::<String>()
                .parse()
                .map_err(|_| Error::Parse { pos: start, msg: "bad number".into() })?;
            if self.s.get(self.pos) == Some(&'i') {
                self.pos += 1;
                return Ok(Some(single((0, 0, 0), Complex64::new(0.0, x))));
            }
            return Ok(Some(single((0, 0, 0), Complex64::new(x, 0.0))));
        }
        if self.eat("zbar") {
            let k = self.power()?;
            return Ok(Some(single((0, k, 0), Complex64::new(1.0, 0.0))));
        }
        if self.eat("zz") {
            let k = self.power()?;
            return Ok(Some(single((k, k, 0), Complex64::new(1.0, 0.0))));
        }
        if self.eat("z") {
            let k = self.power()?;
            return Ok(Some(single((k, 0, 0), Complex64::new(1.0, 0.0))));
        }
        if self.eat("i") {
            return Ok(Some(single((0, 0, 0), Complex64::new(0.0, 1.0))));
        }
        Ok(None)
    }
}

fn multiply(x: &Poly, y: &Poly) -> Poly {
    let mut out = Poly::new();
    for (&(a, b, c), &v) in x {
        for (&(p, q, r), &w) in y {
            *out.entry((a + p, b + q, c + r)).or_insert_with(Complex64::zero) += v * w;
        }
    }
    out
}
