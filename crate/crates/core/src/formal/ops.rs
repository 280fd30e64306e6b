use std::collections::BTreeMap;
use std::fmt;

use num::One;

use crate::error::{Error, Result};
use crate::jets::{scalar, Jet, Monomial, Scalar, EXACT};

/// `Σ c_m(z,z̄) ∂_z^{m.holo} ∂_z̄^{m.anti}` with jet coefficients on the left.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffOp {
    n: usize,
    terms: BTreeMap<Monomial, Jet>,
}

impl DiffOp {
    pub fn zero(n: usize) -> Self {
        DiffOp { n, terms: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::partial(Monomial::one(n))
    }

    pub fn partial(d: Monomial) -> Self {
        let n = d.n();
        let mut op = DiffOp::zero(n);
        op.add_term(d, Jet::one(n, EXACT));
        op
    }

    /// Multiplication by `f`.
    pub fn multiplication(f: Jet) -> Self {
        let n = f.n();
        let mut op = DiffOp::zero(n);
        op.add_term(Monomial::one(n), f);
        op
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Jet)>>(n: usize, terms: I) -> Self {
        let mut op = DiffOp::zero(n);
        for (m, c) in terms {
            op.add_term(m, c);
        }
        op
    }

    pub fn add_term(&mut self, m: Monomial, c: Jet) {
        assert_eq!(m.n(), self.n, "operator dimension mismatch");
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&m) {
            None => {
                self.terms.insert(m, c);
            }
            Some(old) => {
                let s = old + c;
                if !s.is_zero() {
                    self.terms.insert(m, s);
                }
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Jet> {
        &self.terms
    }

    pub fn coeff(&self, m: &Monomial) -> Option<&Jet> {
        self.terms.get(m)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.terms.len() == 1
            && self.terms.iter().all(|(m, c)| m.is_one() && c.len() == 1 && c.constant_term().is_one())
    }

    /// Total derivative order.
    pub fn order(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn holo_order(&self) -> u32 {
        self.terms.keys().map(|m| m.holo.degree()).max().unwrap_or(0)
    }

    pub fn anti_order(&self) -> u32 {
        self.terms.keys().map(|m| m.anti.degree()).max().unwrap_or(0)
    }

    /// Lowest precision among the coefficients.
    pub fn precision(&self) -> i32 {
        self.terms.values().map(Jet::max_degree).min().unwrap_or(EXACT)
    }

    pub fn apply(&self, f: &Jet) -> Jet {
        let mut acc = Jet::zero(self.n, f.max_degree());
        for (m, c) in &self.terms {
            acc = acc + c * &f.derivative(m);
        }
        acc
    }

    /// `self ∘ other`, expanded with the Leibniz rule.
    pub fn compose(&self, other: &DiffOp) -> DiffOp {
        assert_eq!(self.n, other.n, "operator dimension mismatch");
        if self.is_identity() {
            return other.clone();
        }
        if other.is_identity() {
            return self.clone();
        }
        let mut out = DiffOp::zero(self.n);
        for (alpha, a) in &self.terms {
            for gamma in alpha.below() {
                let rest = alpha.checked_sub(&gamma).expect("gamma <= alpha");
                let binom = scalar::int(alpha.binomial(&gamma) as i64);
                for (beta, b) in &other.terms {
                    let db = b.derivative(&gamma);
                    if db.is_zero() {
                        continue;
                    }
                    out.add_term(rest.add(beta), (a * &db).scale(&binom));
                }
            }
        }
        out
    }

    pub fn scale(&self, c: &Scalar) -> DiffOp {
        DiffOp::from_terms(self.n, self.terms.iter().map(|(m, j)| (m.clone(), j.scale(c))))
    }

    pub fn add(&self, other: &DiffOp) -> DiffOp {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &DiffOp) -> DiffOp {
        self.add(&other.scale(&-Scalar::one()))
    }

    /// Equality of coefficients at their common precision.
    pub fn agrees_with(&self, other: &DiffOp) -> bool {
        self.n == other.n && self.sub(other).is_zero()
    }
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})·d{}", m)?;
        }
        Ok(())
    }
}

/// `Σ_{k=0}^{N} ν^k A_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct NuDiffOp {
    n: usize,
    ops: Vec<DiffOp>,
}

impl NuDiffOp {
    pub fn new(n: usize, ops: Vec<DiffOp>) -> Self {
        assert!(!ops.is_empty(), "a ν-series needs at least the order-0 slot");
        assert!(ops.iter().all(|o| o.n() == n), "operator dimension mismatch");
        NuDiffOp { n, ops }
    }

    pub fn identity(n: usize, order: usize) -> Self {
        let mut ops = vec![DiffOp::zero(n); order + 1];
        ops[0] = DiffOp::identity(n);
        NuDiffOp { n, ops }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.ops.len() - 1
    }

    pub fn ops(&self) -> &[DiffOp] {
        &self.ops
    }

    pub fn get(&self, k: usize) -> &DiffOp {
        &self.ops[k]
    }

    fn check_order(&self, other: &NuDiffOp) -> Result<()> {
        if self.order() != other.order() {
            return Err(Error::TruncationMismatch(format!("ν-orders {} and {}", self.order(), other.order())));
        }
        if self.n != other.n {
            return Err(Error::DimensionMismatch(self.n, other.n));
        }
        Ok(())
    }

    /// Graded application; `f` may be shorter than `N+1` (missing orders are zero).
    pub fn apply(&self, f: &[Jet]) -> Result<Vec<Jet>> {
        let n_ord = self.order();
        if f.len() > n_ord + 1 {
            return Err(Error::TruncationMismatch(format!(
                "series of length {} against operator of order {n_ord}",
                f.len()
            )));
        }
        let base = f.iter().map(Jet::max_degree).min().unwrap_or(EXACT);
        let mut out = Vec::with_capacity(n_ord + 1);
        for k in 0..=n_ord {
            let mut acc = Jet::zero(self.n, base);
            for (b, fb) in f.iter().enumerate().take(k + 1) {
                let op = &self.ops[k - b];
                if op.order() as i32 > fb.max_degree() {
                    return Err(Error::BudgetExceeded(format!(
                        "derivative order {} exceeds jet precision {}",
                        op.order(),
                        fb.max_degree()
                    )));
                }
                acc = acc + op.apply(fb);
            }
            out.push(acc);
        }
        Ok(out)
    }

    pub fn compose(&self, other: &NuDiffOp) -> Result<NuDiffOp> {
        self.check_order(other)?;
        let ops = (0..=self.order())
            .map(|k| (0..=k).fold(DiffOp::zero(self.n), |acc, a| acc.add(&self.ops[a].compose(&other.ops[k - a]))))
            .collect();
        Ok(NuDiffOp { n: self.n, ops })
    }

    /// Formal inverse of an operator starting with the identity.
    pub fn inverse(&self) -> Result<NuDiffOp> {
        if !self.ops[0].is_identity() {
            return Err(Error::Invalid("order-0 part must be the identity".into()));
        }
        // J_0 = id, J_k = −Σ_{a=1}^{k} A_a ∘ J_{k−a}
        let mut inv = vec![DiffOp::identity(self.n)];
        for k in 1..=self.order() {
            let s = (1..=k).fold(DiffOp::zero(self.n), |acc, a| acc.add(&self.ops[a].compose(&inv[k - a])));
            inv.push(s.scale(&-Scalar::one()));
        }
        Ok(NuDiffOp { n: self.n, ops: inv })
    }

    pub fn agrees_with(&self, other: &NuDiffOp) -> bool {
        self.order() == other.order()
            && self.n == other.n
            && self.ops.iter().zip(&other.ops).all(|(a, b)| a.agrees_with(b))
    }
}

pub fn op_apply(d: &NuDiffOp, f: &[Jet]) -> Result<Vec<Jet>> {
    d.apply(f)
}

pub fn op_compose(a: &NuDiffOp, b: &NuDiffOp) -> Result<NuDiffOp> {
    a.compose(b)
}

pub fn invert_transform(i: &NuDiffOp) -> Result<NuDiffOp> {
    i.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::scalar::{frac, int};

    fn mono(h: u32, a: u32) -> Jet {
        Jet::monomial(1, EXACT, Monomial::from_slices(&[h], &[a]), int(1))
    }

    fn d(h: u32, a: u32) -> Monomial {
        Monomial::from_slices(&[h], &[a])
    }

    fn flat_laplacian() -> DiffOp {
        DiffOp::partial(d(1, 1))
    }

    #[test]
    fn identity_and_nu_derivative() {
        let f = mono(2, 1);
        let id = NuDiffOp::identity(1, 2);
        assert_eq!(id.apply(std::slice::from_ref(&f)).unwrap()[0], f);
        let op = NuDiffOp::new(1, vec![DiffOp::zero(1), DiffOp::partial(d(1, 0))]);
        let out = op.apply(&[mono(2, 0)]).unwrap();
        assert!(out[0].is_zero());
        assert!(out[1].agrees_with(&mono(1, 0).scale(&int(2))));
    }

    #[test]
    fn exponential_transform_on_quartic() {
        let lap = flat_laplacian();
        let lap2 = lap.compose(&lap).scale(&frac(1, 2));
        let op = NuDiffOp::new(1, vec![DiffOp::identity(1), lap.clone(), lap2]);
        let out = op.apply(&[mono(2, 2)]).unwrap();
        // Oracle: iterate the Laplacian directly.
        let once = lap.apply(&mono(2, 2));
        let twice = lap.apply(&once);
        assert_eq!(out[0], mono(2, 2));
        assert_eq!(out[1], once);
        assert!(out[1].agrees_with(&mono(1, 1).scale(&int(4))));
        assert_eq!(out[2], twice.scale(&frac(1, 2)));
        assert_eq!(out[2].constant_term(), int(2));
    }

    #[test]
    fn leibniz_composition() {
        let dz = DiffOp::partial(d(1, 0));
        let z = DiffOp::multiplication(mono(1, 0));
        let composed = dz.compose(&z);
        let expect = DiffOp::from_terms(1, [(d(1, 0), mono(1, 0)), (d(0, 0), mono(0, 0))]);
        assert!(composed.agrees_with(&expect));
        assert!(dz.compose(&DiffOp::identity(1)).agrees_with(&dz));

        let zb = DiffOp::multiplication(mono(0, 1));
        let comm = dz.compose(&zb).sub(&zb.compose(&dz));
        assert!(comm.is_zero());
    }

    #[test]
    fn composition_matches_sequential_application() {
        let a = DiffOp::from_terms(1, [(d(1, 1), mono(0, 1)), (d(2, 0), mono(1, 1))]);
        let b = DiffOp::from_terms(1, [(d(0, 1), mono(2, 0)), (d(1, 0), mono(0, 0))]);
        let f = mono(3, 2) + mono(1, 3);
        assert_eq!(a.compose(&b).apply(&f), a.apply(&b.apply(&f)));
    }

    #[test]
    fn neumann_inverse() {
        let lap = flat_laplacian();
        let id = NuDiffOp::identity(1, 3);
        assert!(id.inverse().unwrap().agrees_with(&id));
        let op = NuDiffOp::new(1, vec![DiffOp::identity(1), lap.clone(), DiffOp::zero(1), DiffOp::zero(1)]);
        let inv = op.inverse().unwrap();
        let lap2 = lap.compose(&lap);
        let lap3 = lap2.compose(&lap);
        assert!(inv.get(1).agrees_with(&lap.scale(&int(-1))));
        assert!(inv.get(2).agrees_with(&lap2));
        assert!(inv.get(3).agrees_with(&lap3.scale(&int(-1))));
        assert!(op.compose(&inv).unwrap().agrees_with(&id));
    }

    #[test]
    fn order_mixing_is_an_error() {
        let a = NuDiffOp::identity(1, 2);
        let b = NuDiffOp::identity(1, 3);
        assert!(matches!(a.compose(&b), Err(Error::TruncationMismatch(_))));
        assert!(a.apply(&vec![mono(0, 0); 4]).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let op = NuDiffOp::new(1, vec![DiffOp::partial(d(3, 0))]);
        let f = Jet::monomial(1, 2, d(1, 0), int(1));
        assert!(matches!(op.apply(&[f]), Err(Error::BudgetExceeded(_))));
    }
}
