use std::fmt;

use serde::{Deserialize, Serialize};

/// Exponent vector over the `n` holomorphic (or anti-holomorphic) variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn add(&self, other: &Self) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        self.0.iter().zip(&other.0).map(|(a, b)| a.checked_sub(*b)).collect::<Option<Vec<_>>>().map(MultiIndex)
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn factorial(&self) -> u64 {
        self.0.iter().map(|&e| factorial(e)).product()
    }

    /// `self! / (self - other)!`, the coefficient produced by `∂^other x^self`.
    pub fn falling(&self, other: &Self) -> u64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| if b > a { 0 } else { ((a - b + 1)..=a).map(u64::from).product() })
            .product()
    }

    /// Multi-binomial `C(self, other)`.
    pub fn binomial(&self, other: &Self) -> u64 {
        self.0.iter().zip(&other.0).map(|(&a, &b)| binomial(a, b)).product()
    }

    /// All sub-indices `β <= self`, in lexicographic order.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(Vec::with_capacity(self.len()))];
        for &e in &self.0 {
            let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
            for prefix in &out {
                for k in 0..=e {
                    let mut v = prefix.0.clone();
                    v.push(k);
                    next.push(MultiIndex(v));
                }
            }
            out = next;
        }
        out
    }

    /// All indices in `n` variables with total degree exactly `d`.
    pub fn of_degree(n: usize, d: u32) -> Vec<MultiIndex> {
        fn rec(n: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if prefix.len() + 1 == n {
                prefix.push(d);
                out.push(MultiIndex(prefix.clone()));
                prefix.pop();
                return;
            }
            for k in (0..=d).rev() {
                prefix.push(k);
                rec(n, d - k, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if n == 0 {
            if d == 0 {
                out.push(MultiIndex(vec![]));
            }
            return out;
        }
        rec(n, d, &mut Vec::with_capacity(n), &mut out);
        out
    }

    /// All indices with total degree at most `d`, ordered by degree.
    pub fn up_to_degree(n: usize, d: u32) -> Vec<MultiIndex> {
        (0..=d).flat_map(|k| Self::of_degree(n, k)).collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// A monomial `z^holo z̄^anti`, also used as a derivative index
/// `∂_z^holo ∂_z̄^anti`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub holo: MultiIndex,
    pub anti: MultiIndex,
}

impl Monomial {
    pub fn new(holo: MultiIndex, anti: MultiIndex) -> Self {
        debug_assert_eq!(holo.len(), anti.len());
        Monomial { holo, anti }
    }

    pub fn one(n: usize) -> Self {
        Monomial::new(MultiIndex::zero(n), MultiIndex::zero(n))
    }

    pub fn holo_unit(n: usize, i: usize) -> Self {
        Monomial::new(MultiIndex::unit(n, i), MultiIndex::zero(n))
    }

    pub fn anti_unit(n: usize, i: usize) -> Self {
        Monomial::new(MultiIndex::zero(n), MultiIndex::unit(n, i))
    }

    pub fn from_slices(holo: &[u32], anti: &[u32]) -> Self {
        Monomial::new(MultiIndex(holo.to_vec()), MultiIndex(anti.to_vec()))
    }

    pub fn n(&self) -> usize {
        self.holo.len()
    }

    pub fn degree(&self) -> u32 {
        self.holo.degree() + self.anti.degree()
    }

    pub fn is_one(&self) -> bool {
        self.holo.is_zero() && self.anti.is_zero()
    }

    pub fn add(&self, other: &Self) -> Self {
        Monomial::new(self.holo.add(&other.holo), self.anti.add(&other.anti))
    }

    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        Some(Monomial::new(self.holo.checked_sub(&other.holo)?, self.anti.checked_sub(&other.anti)?))
    }

    pub fn le(&self, other: &Self) -> bool {
        self.holo.le(&other.holo) && self.anti.le(&other.anti)
    }

    pub fn factorial(&self) -> u64 {
        self.holo.factorial() * self.anti.factorial()
    }

    pub fn falling(&self, other: &Self) -> u64 {
        self.holo.falling(&other.holo) * self.anti.falling(&other.anti)
    }

    pub fn binomial(&self, other: &Self) -> u64 {
        self.holo.binomial(&other.holo) * self.anti.binomial(&other.anti)
    }

    /// All `β <= self`.
    pub fn below(&self) -> Vec<Monomial> {
        let holos = self.holo.below();
        let antis = self.anti.below();
        let mut out = Vec::with_capacity(holos.len() * antis.len());
        for h in &holos {
            for a in &antis {
                out.push(Monomial::new(h.clone(), a.clone()));
            }
        }
        out
    }

    /// Swap holomorphic and anti-holomorphic exponents (complex conjugation).
    pub fn conjugate(&self) -> Self {
        Monomial::new(self.anti.clone(), self.holo.clone())
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z^{} zbar^{}", self.holo, self.anti)
    }
}

pub fn factorial(k: u32) -> u64 {
    (1..=u64::from(k)).product()
}

pub fn binomial(a: u32, b: u32) -> u64 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    let mut acc: u64 = 1;
    for i in 0..b {
        acc = acc * u64::from(a - i) / u64::from(i + 1);
    }
    acc
}
