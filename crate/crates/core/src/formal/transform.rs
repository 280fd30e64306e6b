use std::collections::BTreeMap;

use super::bidiff::BiDiffOp;
use super::ops::{DiffOp, NuDiffOp};
use super::star::{Convention, StarTable};
use crate::error::{Error, Result};
use crate::jets::{scalar, Jet, Monomial, MultiIndex, EXACT};

/// Routes `a ∂^{i} ∂̄^{j}` to `a ∂̄^{j} f · ∂^{i} g`.
pub fn polarize(i_k: &DiffOp, k: usize) -> Result<BiDiffOp> {
    let n = i_k.n();
    let mut out = BiDiffOp::zero(n);
    for (m, c) in i_k.terms() {
        if m.holo.degree() as usize > k || m.anti.degree() as usize > k {
            return Err(Error::OrderViolation(format!("term d{m} exceeds type ({k},{k})")));
        }
        out.add_term(
            Monomial::new(MultiIndex::zero(n), m.anti.clone()),
            Monomial::new(m.holo.clone(), MultiIndex::zero(n)),
            c.clone(),
        );
    }
    Ok(out)
}

pub(crate) fn holo_monomial(i: &MultiIndex) -> Jet {
    let n = i.len();
    Jet::monomial(n, EXACT, Monomial::new(i.clone(), MultiIndex::zero(n)), scalar::int(1))
}

pub(crate) fn anti_monomial(j: &MultiIndex) -> Jet {
    let n = j.len();
    Jet::monomial(n, EXACT, Monomial::new(MultiIndex::zero(n), j.clone()), scalar::int(1))
}

/// `Σ a_{ij} ∂^i∂̄^j (z^I z̄^J)` for the already solved coefficients.
fn predicted(
    known: &BTreeMap<(MultiIndex, MultiIndex), Jet>,
    big_i: &MultiIndex,
    big_j: &MultiIndex,
    base: i32,
) -> Jet {
    let n = big_i.len();
    let mut acc = Jet::zero(n, base);
    for i in big_i.below() {
        for j in big_j.below() {
            let Some(a) = known.get(&(i.clone(), j.clone())) else { continue };
            let ff = big_i.falling(&i) * big_j.falling(&j);
            let rest = Monomial::new(big_i.checked_sub(&i).unwrap(), big_j.checked_sub(&j).unwrap());
            acc = acc + a.mul_monomial(&rest, &scalar::int(ff as i64));
        }
    }
    acc
}

/// Solves `E(I, J) = Σ_{i≤I, j≤J} a_{ij} ∂^i∂̄^j (z^I z̄^J)` for the
/// operator `Σ a_{ij} ∂^i ∂̄^j` of type `(k, k)`.
///
/// Pairs are visited by total degree, which makes the system triangular;
/// pairs one degree beyond `k` must then be reproduced exactly.
pub(crate) fn solve_type_kk<F>(n: usize, k: usize, eval: F) -> Result<DiffOp>
where
    F: Fn(&MultiIndex, &MultiIndex) -> Jet,
{
    let mut known: BTreeMap<(MultiIndex, MultiIndex), Jet> = BTreeMap::new();
    let mut pairs: Vec<(MultiIndex, MultiIndex)> = Vec::new();
    for i in MultiIndex::up_to_degree(n, k as u32) {
        for j in MultiIndex::up_to_degree(n, k as u32) {
            pairs.push((i.clone(), j));
        }
    }
    pairs.sort_by_key(|(i, j)| i.degree() + j.degree());
    let mut base = EXACT;
    for (i, j) in pairs {
        let e = eval(&i, &j);
        base = base.min(e.max_degree());
        let rest = &e - &predicted(&known, &i, &j, base);
        let denom = (i.factorial() * j.factorial()) as i64;
        known.insert((i, j), rest.scale(&scalar::frac(1, denom)));
    }
    let edge = k as u32 + 1;
    for i in MultiIndex::up_to_degree(n, edge) {
        for j in MultiIndex::up_to_degree(n, edge) {
            if i.degree() < edge && j.degree() < edge {
                continue;
            }
            let e = eval(&i, &j);
            if !(&e - &predicted(&known, &i, &j, base)).is_zero() {
                return Err(Error::SingularSystem(format!(
                    "order {k} coefficient is not of type ({k},{k}): residual at z^{i} zbar^{j}"
                )));
            }
        }
    }
    Ok(DiffOp::from_terms(n, known.into_iter().map(|((i, j), a)| (Monomial::new(i, j), a))))
}

/// Recovers `I` with `a ⋆ b = I(a·b)` for anti-holomorphic `a`, holomorphic `b`,
/// from the evaluations `C_k(z̄^J, z^I)`.
pub fn transform_from_star(t: &StarTable) -> Result<NuDiffOp> {
    if t.convention() != Convention::KarabegovAntiWick {
        return Err(Error::Convention(format!(
            "transform extraction needs an anti-Wick table, got {:?}",
            t.convention()
        )));
    }
    let n = t.n();
    let mut ops = vec![DiffOp::identity(n)];
    for k in 1..=t.order() {
        let c = t.coefficient(k);
        ops.push(solve_type_kk(n, k, |i, j| c.apply(&anti_monomial(j), &holo_monomial(i)))?);
    }
    Ok(NuDiffOp::new(n, ops))
}

/// `f ⋆′ g = B⁻¹(B f ⋆ B g)`.
pub fn conjugate_star(t: &StarTable, b: &NuDiffOp) -> Result<StarTable> {
    if t.order() != b.order() {
        return Err(Error::TruncationMismatch(format!(
            "table of order {} against transform of order {}",
            t.order(),
            b.order()
        )));
    }
    if t.n() != b.n() {
        return Err(Error::DimensionMismatch(t.n(), b.n()));
    }
    let b_inv = b.inverse()?;
    let n_ord = t.order();
    let n = t.n();
    // S_k = Σ_{p+q+r=k} C_p ∘ (B_q ⊗ B_r)
    let s: Vec<BiDiffOp> = (0..=n_ord)
        .map(|k| {
            let mut acc = BiDiffOp::zero(n);
            for p in 0..=k {
                for q in 0..=(k - p) {
                    let r = k - p - q;
                    let (bq, br) = (b.get(q), b.get(r));
                    if bq.is_zero() || br.is_zero() {
                        continue;
                    }
                    acc = acc.add(&t.coefficient(p).precompose(bq, br));
                }
            }
            acc
        })
        .collect();
    let coeffs: Vec<BiDiffOp> = (0..=n_ord)
        .map(|k| (0..=k).fold(BiDiffOp::zero(n), |acc, a| acc.add(&BiDiffOp::postcompose(b_inv.get(a), &s[k - a]))))
        .collect();
    StarTable::detect(n, coeffs, t.label())
}

/// `f ⋆̃ g = I⁻¹(I g ⋆ I f)`, with `I` the formal Berezin transform of `t`.
pub fn dual_star(t: &StarTable, i: &NuDiffOp) -> Result<StarTable> {
    Ok(conjugate_star(t, i)?.opposite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::star::tests::{flat_anti_wick, mono};
    use crate::formal::star_eval;
    use crate::jets::scalar::{frac, int};

    fn d(h: u32, a: u32) -> Monomial {
        Monomial::from_slices(&[h], &[a])
    }

    fn flat_transform(order: usize) -> NuDiffOp {
        let lap = DiffOp::partial(d(1, 1));
        let mut ops = vec![DiffOp::identity(1)];
        let mut power = DiffOp::identity(1);
        for k in 1..=order {
            power = power.compose(&lap);
            ops.push(power.scale(&frac(1, crate::jets::factorial(k as u32) as i64)));
        }
        NuDiffOp::new(1, ops)
    }

    #[test]
    fn polarize_examples() {
        let lap = DiffOp::partial(d(1, 1));
        let c1 = polarize(&lap, 1).unwrap();
        let expect = BiDiffOp::from_terms(1, [((d(0, 1), d(1, 0)), mono(0, 0))]);
        assert!(c1.agrees_with(&expect));
        assert!(polarize(&DiffOp::identity(1), 0).unwrap().is_pointwise());
        let half_lap2 = lap.compose(&lap).scale(&frac(1, 2));
        let c2 = polarize(&half_lap2, 2).unwrap();
        let (f, g) = (mono(0, 2), mono(2, 0));
        assert!(c2.apply(&f, &g).agrees_with(&mono(0, 0).scale(&int(2))));
        assert!(matches!(polarize(&half_lap2, 1), Err(Error::OrderViolation(_))));
    }

    #[test]
    fn flat_transform_is_recovered() {
        let t = flat_anti_wick(3);
        let i = transform_from_star(&t).unwrap();
        assert!(i.get(0).is_identity());
        assert!(i.agrees_with(&flat_transform(3)));
        for k in 0..=3 {
            assert!(polarize(i.get(k), k).unwrap().agrees_with(t.coefficient(k)));
        }
    }

    #[test]
    fn order_violation_is_detected() {
        let t = flat_anti_wick(2);
        let mut coeffs = t.coefficients().to_vec();
        coeffs[1] = coeffs[1].add(&BiDiffOp::from_terms(1, [((d(0, 2), d(2, 0)), mono(0, 0))]));
        let bad = StarTable::new(1, coeffs, Convention::KarabegovAntiWick, "bad").unwrap();
        assert!(matches!(transform_from_star(&bad), Err(Error::SingularSystem(_))));
        assert!(matches!(transform_from_star(&t.opposite()), Err(Error::Convention(_))));
    }

    #[test]
    fn conjugation_identities() {
        let t = flat_anti_wick(3);
        let id = NuDiffOp::identity(1, 3);
        assert!(conjugate_star(&t, &id).unwrap().agrees_with(&t));
        let i = flat_transform(3);
        let there = conjugate_star(&t, &i).unwrap();
        let back = conjugate_star(&there, &i.inverse().unwrap()).unwrap();
        assert!(back.agrees_with(&t));
        assert!(matches!(conjugate_star(&t, &flat_transform(2)), Err(Error::TruncationMismatch(_))));
    }

    #[test]
    fn flat_berezin_toeplitz_table() {
        let t = flat_anti_wick(3);
        let bt = conjugate_star(&t, &transform_from_star(&t).unwrap()).unwrap();
        assert_eq!(bt.convention(), Convention::Wick);
        // C_1 = −∂f ∂̄g
        let expect = BiDiffOp::from_terms(1, [((d(1, 0), d(0, 1)), mono(0, 0).scale(&int(-1)))]);
        assert!(bt.coefficient(1).agrees_with(&expect));
        let s = star_eval(&bt, &mono(1, 0), &mono(0, 1));
        assert_eq!(s[0], mono(1, 1));
        assert!(s[1].agrees_with(&mono(0, 0).scale(&int(-1))));
        assert!(s[2].is_zero());
        let zero = bt.assoc_defect(&(mono(2, 1) + mono(0, 2)), &mono(1, 2), &mono(2, 2));
        assert!(zero.iter().all(Jet::is_zero));
    }

    #[test]
    fn duality() {
        let t = flat_anti_wick(3);
        let i = transform_from_star(&t).unwrap();
        let dual = dual_star(&t, &i).unwrap();
        assert_eq!(dual.convention(), Convention::KarabegovAntiWick);
        let i_dual = transform_from_star(&dual).unwrap();
        assert!(i_dual.agrees_with(&i.inverse().unwrap()));
        let again = dual_star(&dual, &i_dual).unwrap();
        assert!(again.agrees_with(&t));
        let bt = conjugate_star(&t, &i).unwrap();
        assert!(dual.opposite().agrees_with(&bt));
        assert!(dual.coefficient(0).is_pointwise());
    }
}
