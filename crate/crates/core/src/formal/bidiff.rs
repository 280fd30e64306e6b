use std::collections::BTreeMap;
use std::fmt;

use num::One;

use super::ops::DiffOp;
use crate::jets::{scalar, Jet, Monomial, Scalar, EXACT};

/// `Σ c(z,z̄) ∂^{a} f · ∂^{b} g`, keyed by the pair of derivative multi-indices.
#[derive(Clone, Debug, PartialEq)]
pub struct BiDiffOp {
    n: usize,
    terms: BTreeMap<(Monomial, Monomial), Jet>,
}

impl BiDiffOp {
    pub fn zero(n: usize) -> Self {
        BiDiffOp { n, terms: BTreeMap::new() }
    }

    pub fn pointwise(n: usize) -> Self {
        let mut op = BiDiffOp::zero(n);
        op.add_term(Monomial::one(n), Monomial::one(n), Jet::one(n, EXACT));
        op
    }

    pub fn from_terms<I: IntoIterator<Item = ((Monomial, Monomial), Jet)>>(n: usize, terms: I) -> Self {
        let mut op = BiDiffOp::zero(n);
        for ((a, b), c) in terms {
            op.add_term(a, b, c);
        }
        op
    }

    pub fn add_term(&mut self, a: Monomial, b: Monomial, c: Jet) {
        assert!(a.n() == self.n && b.n() == self.n, "operator dimension mismatch");
        if c.is_zero() {
            return;
        }
        let key = (a, b);
        match self.terms.remove(&key) {
            None => {
                self.terms.insert(key, c);
            }
            Some(old) => {
                let s = old + c;
                if !s.is_zero() {
                    self.terms.insert(key, s);
                }
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<(Monomial, Monomial), Jet> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_pointwise(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .all(|((a, b), c)| a.is_one() && b.is_one() && c.len() == 1 && c.constant_term().is_one())
    }

    pub fn precision(&self) -> i32 {
        self.terms.values().map(Jet::max_degree).min().unwrap_or(EXACT)
    }

    pub fn apply(&self, f: &Jet, g: &Jet) -> Jet {
        let mut acc = Jet::zero(self.n, f.max_degree().min(g.max_degree()));
        for ((a, b), c) in &self.terms {
            let fa = f.derivative(a);
            let gb = g.derivative(b);
            acc = acc + &(c * &fa) * &gb;
        }
        acc
    }

    pub fn scale(&self, c: &Scalar) -> BiDiffOp {
        BiDiffOp::from_terms(self.n, self.terms.iter().map(|(k, j)| (k.clone(), j.scale(c))))
    }

    pub fn add(&self, other: &BiDiffOp) -> BiDiffOp {
        let mut out = self.clone();
        for ((a, b), c) in &other.terms {
            out.add_term(a.clone(), b.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &BiDiffOp) -> BiDiffOp {
        self.add(&other.scale(&-Scalar::one()))
    }

    /// `(f, g) ↦ C(g, f)`.
    pub fn swapped(&self) -> BiDiffOp {
        BiDiffOp {
            n: self.n,
            terms: self.terms.iter().map(|((a, b), c)| ((b.clone(), a.clone()), c.clone())).collect(),
        }
    }

    pub fn agrees_with(&self, other: &BiDiffOp) -> bool {
        self.n == other.n && self.sub(other).is_zero()
    }

    /// `(f, g) ↦ A f · B g`.
    pub fn product(a: &DiffOp, b: &DiffOp) -> BiDiffOp {
        let mut out = BiDiffOp::zero(a.n());
        for (ma, ca) in a.terms() {
            for (mb, cb) in b.terms() {
                out.add_term(ma.clone(), mb.clone(), ca * cb);
            }
        }
        out
    }

    /// `(f, g) ↦ C(A f, B g)`.
    pub fn precompose(&self, a: &DiffOp, b: &DiffOp) -> BiDiffOp {
        if a.is_identity() && b.is_identity() {
            return self.clone();
        }
        let mut out = BiDiffOp::zero(self.n);
        for ((p, q), c) in &self.terms {
            let left = DiffOp::partial(p.clone()).compose(a);
            let right = DiffOp::partial(q.clone()).compose(b);
            for (ma, ca) in left.terms() {
                let cca = c * ca;
                for (mb, cb) in right.terms() {
                    out.add_term(ma.clone(), mb.clone(), &cca * cb);
                }
            }
        }
        out
    }

    /// `(f, g) ↦ D(C(f, g))`, via the three-factor Leibniz rule.
    pub fn postcompose(d: &DiffOp, c: &BiDiffOp) -> BiDiffOp {
        if d.is_identity() {
            return c.clone();
        }
        let mut out = BiDiffOp::zero(c.n);
        for (delta, dc) in d.terms() {
            for g1 in delta.below() {
                let r1 = delta.checked_sub(&g1).expect("g1 <= delta");
                let b1 = delta.binomial(&g1);
                for g2 in r1.below() {
                    let g3 = r1.checked_sub(&g2).expect("g2 <= r1");
                    let coef = scalar::int((b1 * r1.binomial(&g2)) as i64);
                    for ((a, b), cc) in &c.terms {
                        let dcc = cc.derivative(&g1);
                        if dcc.is_zero() {
                            continue;
                        }
                        out.add_term(a.add(&g2), b.add(&g3), (dc * &dcc).scale(&coef));
                    }
                }
            }
        }
        out
    }

    /// Largest derivative orders `(f holo, f anti, g holo, g anti)`.
    pub fn slot_orders(&self) -> (u32, u32, u32, u32) {
        self.terms.keys().fold((0, 0, 0, 0), |acc, (a, b)| {
            (
                acc.0.max(a.holo.degree()),
                acc.1.max(a.anti.degree()),
                acc.2.max(b.holo.degree()),
                acc.3.max(b.anti.degree()),
            )
        })
    }
}

impl fmt::Display for BiDiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, ((a, b), c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})·d[{a}]f·d[{b}]g")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::scalar::int;

    fn mono(h: u32, a: u32) -> Jet {
        Jet::monomial(1, EXACT, Monomial::from_slices(&[h], &[a]), int(1))
    }

    fn d(h: u32, a: u32) -> Monomial {
        Monomial::from_slices(&[h], &[a])
    }

    fn sample_bi() -> BiDiffOp {
        BiDiffOp::from_terms(
            1,
            [
                ((d(0, 1), d(1, 0)), mono(1, 0) + mono(0, 0)),
                ((d(0, 2), d(1, 0)), mono(1, 1)),
                ((d(1, 0), d(0, 0)), mono(0, 2)),
            ],
        )
    }

    fn sample_op() -> DiffOp {
        DiffOp::from_terms(1, [(d(1, 1), mono(0, 1)), (d(0, 1), mono(1, 0)), (d(0, 0), mono(2, 0))])
    }

    #[test]
    fn pointwise_multiplies() {
        let f = mono(1, 2);
        let g = mono(3, 0);
        assert_eq!(BiDiffOp::pointwise(1).apply(&f, &g), mono(4, 2));
    }

    #[test]
    fn precompose_matches_application() {
        let c = sample_bi();
        let a = sample_op();
        let b = DiffOp::from_terms(1, [(d(1, 0), mono(0, 1))]);
        let f = mono(3, 3) + mono(2, 1);
        let g = mono(2, 2) + mono(0, 3);
        assert_eq!(c.precompose(&a, &b).apply(&f, &g), c.apply(&a.apply(&f), &b.apply(&g)));
    }

    #[test]
    fn postcompose_matches_application() {
        let c = sample_bi();
        let dop = sample_op();
        let f = mono(3, 3) + mono(2, 1);
        let g = mono(2, 2) + mono(0, 3);
        assert_eq!(BiDiffOp::postcompose(&dop, &c).apply(&f, &g), dop.apply(&c.apply(&f, &g)));
    }

    #[test]
    fn swap_is_an_involution() {
        let c = sample_bi();
        assert_eq!(c.swapped().swapped(), c);
        let f = mono(2, 1);
        let g = mono(1, 2);
        assert_eq!(c.swapped().apply(&f, &g), c.apply(&g, &f));
    }
}
