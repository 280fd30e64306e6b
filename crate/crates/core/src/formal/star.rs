use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::bidiff::BiDiffOp;
use crate::error::{Error, Result};
use crate::jets::{Jet, Monomial, MultiIndex, EXACT};

/// Which derivative slots the coefficients `C_k`, `k ≥ 1`, may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// First argument differentiated anti-holomorphically, second holomorphically.
    KarabegovAntiWick,
    /// First argument differentiated holomorphically, second anti-holomorphically.
    Wick,
    None,
}

impl Convention {
    pub fn flipped(self) -> Self {
        match self {
            Convention::KarabegovAntiWick => Convention::Wick,
            Convention::Wick => Convention::KarabegovAntiWick,
            Convention::None => Convention::None,
        }
    }

    fn admits(self, a: &Monomial, b: &Monomial) -> bool {
        match self {
            Convention::KarabegovAntiWick => a.holo.is_zero() && b.anti.is_zero(),
            Convention::Wick => a.anti.is_zero() && b.holo.is_zero(),
            Convention::None => true,
        }
    }
}

/// `f ⋆ g = Σ_{k=0}^{N} ν^k C_k(f, g)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StarTable {
    n: usize,
    coefficients: Vec<BiDiffOp>,
    convention: Convention,
    label: String,
}

impl StarTable {
    /// Validates `C_0 = ·`, nullity on constants, and the declared convention.
    pub fn new(
        n: usize,
        coefficients: Vec<BiDiffOp>,
        convention: Convention,
        label: impl Into<String>,
    ) -> Result<Self> {
        if coefficients.is_empty() || !coefficients[0].is_pointwise() {
            return Err(Error::Invalid("C_0 must be the pointwise product".into()));
        }
        for (k, c) in coefficients.iter().enumerate().skip(1) {
            if c.n() != n {
                return Err(Error::DimensionMismatch(n, c.n()));
            }
            for (a, b) in c.terms().keys() {
                if a.is_one() || b.is_one() {
                    return Err(Error::Invalid(format!("C_{k} does not vanish on constants")));
                }
                if !convention.admits(a, b) {
                    return Err(Error::Convention(format!("C_{k} term d[{a}]f d[{b}]g violates {convention:?}")));
                }
            }
        }
        Ok(StarTable { n, coefficients, convention, label: label.into() })
    }

    /// Like [`StarTable::new`], with the convention read off the keys.
    pub fn detect(n: usize, coefficients: Vec<BiDiffOp>, label: impl Into<String>) -> Result<Self> {
        let convention = detect_convention(&coefficients);
        StarTable::new(n, coefficients, convention, label)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[BiDiffOp] {
        &self.coefficients
    }

    pub fn coefficient(&self, k: usize) -> &BiDiffOp {
        &self.coefficients[k]
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Lowest coefficient precision.
    pub fn precision(&self) -> i32 {
        self.coefficients.iter().map(BiDiffOp::precision).min().unwrap_or(EXACT)
    }

    /// Keeps `C_0..C_order`.
    pub fn truncated(&self, order: usize) -> Result<StarTable> {
        if order > self.order() {
            return Err(Error::TruncationMismatch(format!(
                "cannot extend a table of order {} to {order}",
                self.order()
            )));
        }
        let mut t = self.clone();
        t.coefficients.truncate(order + 1);
        Ok(t)
    }

    pub fn eval(&self, f: &Jet, g: &Jet) -> Vec<Jet> {
        self.coefficients.iter().map(|c| c.apply(f, g)).collect()
    }

    /// Product of two ν-series, truncated at `ν^N`.
    pub fn eval_series(&self, f: &[Jet], g: &[Jet]) -> Vec<Jet> {
        let n_ord = self.order();
        let base = f.iter().chain(g).map(Jet::max_degree).min().unwrap_or(EXACT);
        (0..=n_ord)
            .map(|k| {
                let mut acc = Jet::zero(self.n, base);
                for (a, c) in self.coefficients.iter().enumerate().take(k + 1) {
                    for (b, fb) in f.iter().enumerate().take(k - a + 1) {
                        if let Some(gc) = g.get(k - a - b) {
                            acc = acc + c.apply(fb, gc);
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// `(f⋆g)⋆h − f⋆(g⋆h)` through `ν^N`.
    pub fn assoc_defect(&self, f: &Jet, g: &Jet, h: &Jet) -> Vec<Jet> {
        let fg = self.eval(f, g);
        let gh = self.eval(g, h);
        let left = self.eval_series(&fg, std::slice::from_ref(h));
        let right = self.eval_series(std::slice::from_ref(f), &gh);
        left.iter().zip(&right).map(|(l, r)| l - r).collect()
    }

    /// `f ⋆^{op} g = g ⋆ f`.
    pub fn opposite(&self) -> StarTable {
        StarTable {
            n: self.n,
            coefficients: self.coefficients.iter().map(BiDiffOp::swapped).collect(),
            convention: self.convention.flipped(),
            label: self.label.clone(),
        }
    }

    /// Coefficientwise equality at common precision; orders must match.
    pub fn agrees_with(&self, other: &StarTable) -> bool {
        self.n == other.n
            && self.order() == other.order()
            && self.coefficients.iter().zip(&other.coefficients).all(|(a, b)| a.agrees_with(b))
    }
}

pub fn detect_convention(coefficients: &[BiDiffOp]) -> Convention {
    let keys = || coefficients.iter().skip(1).flat_map(|c| c.terms().keys());
    let anti_wick = keys().all(|(a, b)| Convention::KarabegovAntiWick.admits(a, b));
    let wick = keys().all(|(a, b)| Convention::Wick.admits(a, b));
    match (anti_wick, wick) {
        (true, false) => Convention::KarabegovAntiWick,
        (false, true) => Convention::Wick,
        _ => Convention::None,
    }
}

pub fn star_eval(t: &StarTable, f: &Jet, g: &Jet) -> Vec<Jet> {
    t.eval(f, g)
}

pub fn assoc_defect(t: &StarTable, f: &Jet, g: &Jet, h: &Jet) -> Vec<Jet> {
    t.assoc_defect(f, g, h)
}

pub fn opposite_star(t: &StarTable) -> StarTable {
    t.opposite()
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    coeff: Jet,
    f_dz: MultiIndex,
    f_dzbar: MultiIndex,
    g_dz: MultiIndex,
    g_dzbar: MultiIndex,
}

#[derive(Serialize, Deserialize)]
struct CoeffJson {
    k: usize,
    terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    n: usize,
    order: usize,
    convention: Convention,
    label: String,
    coefficients: Vec<CoeffJson>,
}

impl Serialize for StarTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableJson {
            n: self.n,
            order: self.order(),
            convention: self.convention,
            label: self.label.clone(),
            coefficients: self
                .coefficients
                .iter()
                .enumerate()
                .map(|(k, c)| CoeffJson {
                    k,
                    terms: c
                        .terms()
                        .iter()
                        .map(|((a, b), j)| TermJson {
                            coeff: j.clone(),
                            f_dz: a.holo.clone(),
                            f_dzbar: a.anti.clone(),
                            g_dz: b.holo.clone(),
                            g_dzbar: b.anti.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StarTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = TableJson::deserialize(d)?;
        if raw.coefficients.len() != raw.order + 1 {
            return Err(D::Error::custom("coefficient count does not match order"));
        }
        let mut coeffs = Vec::with_capacity(raw.coefficients.len());
        for (i, c) in raw.coefficients.into_iter().enumerate() {
            if c.k != i {
                return Err(D::Error::custom("coefficients must be listed by increasing k"));
            }
            let mut op = BiDiffOp::zero(raw.n);
            for t in c.terms {
                let dims = [t.f_dz.len(), t.f_dzbar.len(), t.g_dz.len(), t.g_dzbar.len(), t.coeff.n()];
                if dims.iter().any(|&x| x != raw.n) {
                    return Err(D::Error::custom("term dimension does not match n"));
                }
                op.add_term(Monomial::new(t.f_dz, t.f_dzbar), Monomial::new(t.g_dz, t.g_dzbar), t.coeff);
            }
            coeffs.push(op);
        }
        StarTable::new(raw.n, coeffs, raw.convention, raw.label).map_err(D::Error::custom)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::jets::factorial;
    use crate::jets::scalar::{frac, int};

    pub(crate) fn mono(h: u32, a: u32) -> Jet {
        Jet::monomial(1, EXACT, Monomial::from_slices(&[h], &[a]), int(1))
    }

    /// Flat anti-Wick table `C_k = (1/k!) ∂̄^k f ∂^k g`, built independently
    /// of the recursion.
    pub(crate) fn flat_anti_wick(order: usize) -> StarTable {
        let coeffs = (0..=order as u32)
            .map(|k| {
                BiDiffOp::from_terms(
                    1,
                    [(
                        (Monomial::from_slices(&[0], &[k]), Monomial::from_slices(&[k], &[0])),
                        Jet::constant(1, EXACT, frac(1, factorial(k) as i64)),
                    )],
                )
            })
            .collect();
        StarTable::new(1, coeffs, Convention::KarabegovAntiWick, "flat").unwrap()
    }

    fn series(parts: &[Jet]) -> Vec<Jet> {
        parts.to_vec()
    }

    #[test]
    fn flat_anti_wick_products() {
        let t = flat_anti_wick(2);
        let f = mono(2, 3) + mono(1, 0);
        let one = mono(0, 0);
        let s = star_eval(&t, &one, &f);
        assert_eq!(s[0], f);
        assert!(s[1].is_zero() && s[2].is_zero());
        assert_eq!(star_eval(&t, &f, &one)[0], f);

        let zb_z = star_eval(&t, &mono(0, 1), &mono(1, 0));
        for (a, b) in zb_z.iter().zip(series(&[mono(1, 1), mono(0, 0), Jet::zero(1, EXACT)])) {
            assert!(a.agrees_with(&b));
        }
        let z_zb = star_eval(&t, &mono(1, 0), &mono(0, 1));
        assert_eq!(z_zb[0], mono(1, 1));
        assert!(z_zb[1].is_zero() && z_zb[2].is_zero());
    }

    #[test]
    fn associativity_of_flat_table() {
        let t = flat_anti_wick(3);
        let f = mono(2, 1) + mono(0, 3).scale(&int(2));
        let g = mono(1, 2);
        for d in assoc_defect(&t, &mono(0, 0), &f, &g) {
            assert!(d.is_zero());
        }
        for d in assoc_defect(&t, &mono(0, 1), &mono(1, 0), &mono(0, 1)) {
            assert!(d.is_zero());
        }
        for d in assoc_defect(&t, &f, &g, &(mono(3, 3) + mono(1, 0))) {
            assert!(d.is_zero());
        }
    }

    #[test]
    fn corrupted_table_is_not_associative() {
        let t = flat_anti_wick(3);
        let mut coeffs = t.coefficients().to_vec();
        coeffs[2] = coeffs[2].scale(&int(3));
        let bad = StarTable::new(1, coeffs, Convention::KarabegovAntiWick, "bad").unwrap();
        let f = mono(0, 2);
        let g = mono(0, 1);
        let h = mono(2, 0);
        let defect = assoc_defect(&bad, &f, &g, &h);
        assert!(defect.iter().any(|d| !d.is_zero()));
        assert!(defect[0].is_zero() && defect[1].is_zero());
    }

    #[test]
    fn opposite_swaps_arguments() {
        let t = flat_anti_wick(2);
        let op = opposite_star(&t);
        assert_eq!(op.convention(), Convention::Wick);
        assert_eq!(op.opposite(), t);
        let a = star_eval(&op, &mono(0, 1), &mono(1, 0));
        assert_eq!(a[0], mono(1, 1));
        assert!(a[1].is_zero());
        let b = star_eval(&op, &mono(1, 0), &mono(0, 1));
        assert!(b[1].agrees_with(&mono(0, 0)));
        let c1 = t.coefficient(1);
        let c1op = op.coefficient(1);
        let (f, g) = (mono(2, 1), mono(1, 2));
        let anti = c1.apply(&f, &g) - c1.apply(&g, &f);
        let anti_op = c1op.apply(&f, &g) - c1op.apply(&g, &f);
        assert_eq!(anti_op, -&anti);
    }

    #[test]
    fn convention_is_enforced() {
        let t = flat_anti_wick(1);
        let coeffs = t.opposite().coefficients().to_vec();
        let err = StarTable::new(1, coeffs.clone(), Convention::KarabegovAntiWick, "x").unwrap_err();
        assert!(matches!(err, Error::Convention(_)));
        assert_eq!(StarTable::detect(1, coeffs, "x").unwrap().convention(), Convention::Wick);
        let mut bad = t.coefficients().to_vec();
        bad[0] = bad[0].scale(&int(2));
        assert!(StarTable::new(1, bad, Convention::None, "x").is_err());
    }

    #[test]
    fn json_roundtrip() {
        let t = flat_anti_wick(3);
        let text = serde_json::to_string(&t).unwrap();
        let back: StarTable = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["order"], 3);
        assert_eq!(v["convention"], "karabegov_anti_wick");
        assert_eq!(v["coefficients"][1]["terms"][0]["f_dzbar"], serde_json::json!([1]));
    }
}
