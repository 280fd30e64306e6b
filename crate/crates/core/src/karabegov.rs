//! Separation-of-variables star products from a formal Kähler potential.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formal::{anti_monomial, holo_monomial, solve_type_kk};
use crate::formal::{conjugate_star, polarize, transform_from_star, BiDiffOp, Convention, DiffOp, NuDiffOp, StarTable};
use crate::jets::{
    diagonal_quadratic_potential, fubini_study_potential, metric_from_potential, scalar, Jet, MetricJets, Monomial,
    MultiIndex, Scalar, VarKind,
};

/// `Φ̂ = ν⁻¹Φ₋₁ + Φ₀ + νΦ₁ + …`; missing `Φ_k` are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormalPotential {
    pub phi_minus1: Jet,
    #[serde(default)]
    pub phi: Vec<Jet>,
}

impl FormalPotential {
    pub fn new(phi_minus1: Jet, phi: Vec<Jet>) -> Result<Self> {
        let n = phi_minus1.n();
        if let Some(bad) = phi.iter().find(|p| p.n() != n) {
            return Err(Error::DimensionMismatch(n, bad.n()));
        }
        let p = FormalPotential { phi_minus1, phi };
        p.metric()?;
        Ok(p)
    }

    /// `Σ w_i z_i z̄_i`.
    pub fn flat(weights: &[Scalar], max_degree: i32) -> Self {
        FormalPotential { phi_minus1: diagonal_quadratic_potential(weights, max_degree), phi: vec![] }
    }

    /// `log(1 + |z|²)`.
    pub fn fubini_study(n: usize, max_degree: i32) -> Self {
        FormalPotential { phi_minus1: fubini_study_potential(n, max_degree), phi: vec![] }
    }

    /// The three reference potentials: flat `ℂ`, Fubini-Study on `ℂ`, and
    /// the anisotropic flat `ℂ²` with weights `(1, 2)`.
    pub fn references(max_degree: i32) -> Vec<(&'static str, FormalPotential)> {
        vec![
            ("flat", FormalPotential::flat(&[scalar::int(1)], max_degree)),
            ("fubini-study", FormalPotential::fubini_study(1, max_degree)),
            ("anisotropic", FormalPotential::flat(&[scalar::int(1), scalar::int(2)], max_degree)),
        ]
    }

    pub fn n(&self) -> usize {
        self.phi_minus1.n()
    }

    pub fn metric(&self) -> Result<MetricJets> {
        metric_from_potential(&self.phi_minus1)
    }

    /// `Φ_k`, zero when not supplied.
    pub fn phi_k(&self, k: usize) -> Jet {
        self.phi.get(k).cloned().unwrap_or_else(|| Jet::zero(self.n(), self.phi_minus1.max_degree()))
    }

    /// `(νR_l)_q` where `R_l` is right multiplication by `∂Φ̂/∂z̄_l`, for `q ≥ 1`.
    fn right_part(&self, l: usize, q: usize) -> DiffOp {
        let n = self.n();
        let mult = DiffOp::multiplication(self.phi_k(q - 1).diff(l, VarKind::Anti));
        if q == 1 {
            mult.add(&DiffOp::partial(Monomial::anti_unit(n, l)))
        } else {
            mult
        }
    }
}

/// Default recursion depth and the matching jet degree.
pub const DEFAULT_ORDER: usize = 4;

pub fn default_degree(order: usize) -> i32 {
    3 * order as i32
}

fn commutator(a: &DiffOp, b: &DiffOp) -> DiffOp {
    a.compose(b).sub(&b.compose(a))
}

/// `L_g = Σ ν^k A_k`, commuting with every `R_{∂Φ̂/∂z̄_l}` and with `L_g(1) = g`.
///
/// Each `A_k` uses holomorphic derivatives only. Multiplying the commutation
/// relation by `ν`, the order-`k` part reads
/// `[A_k, ∂Φ₋₁/∂z̄_l] = −Σ_{p<k} [A_p, (νR_l)_{k−p}]`, whose left side is
/// triangular in the derivative degree with the Hessian of `Φ₋₁` on the
/// diagonal.
pub fn left_mult_operator(g: &[Jet], p: &FormalPotential, order: usize) -> Result<NuDiffOp> {
    let n = p.n();
    if g.len() > order + 1 {
        return Err(Error::TruncationMismatch(format!("symbol series of length {} for order {order}", g.len())));
    }
    if let Some(bad) = g.iter().find(|x| x.n() != n) {
        return Err(Error::DimensionMismatch(n, bad.n()));
    }
    let metric = p.metric()?;
    let phi_bar: Vec<Jet> = (0..n).map(|l| p.phi_minus1.diff(l, VarKind::Anti)).collect();
    let mut ops: Vec<DiffOp> = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let g_k = g.get(k).cloned().unwrap_or_else(|| Jet::zero(n, p.phi_minus1.max_degree()));
        let rhs: Vec<DiffOp> = (0..n)
            .map(|l| (0..k).fold(DiffOp::zero(n), |acc, q| acc.sub(&commutator(&ops[q], &p.right_part(l, k - q)))))
            .collect();
        let a = solve_order(k, &rhs, &phi_bar, &metric)?;
        let mut op = DiffOp::multiplication(g_k);
        for (alpha, c) in a {
            op.add_term(Monomial::new(alpha, MultiIndex::zero(n)), c);
        }
        ops.push(op);
    }
    Ok(NuDiffOp::new(n, ops))
}

/// Solves `[Σ_{α≠0} a_α ∂^α, φ_l] = rhs_l` top-down in `|α|`.
fn solve_order(k: usize, rhs: &[DiffOp], phi_bar: &[Jet], metric: &MetricJets) -> Result<BTreeMap<MultiIndex, Jet>> {
    let n = phi_bar.len();
    for r in rhs {
        for m in r.terms().keys() {
            if !m.anti.is_zero() {
                return Err(Error::SingularSystem(format!(
                    "order {k}: right side has an anti-holomorphic derivative d{m}"
                )));
            }
            if m.holo.degree() as usize >= k.max(1) {
                return Err(Error::OrderViolation(format!("order {k}: right side term d{m} too high")));
            }
        }
    }
    let mut a: BTreeMap<MultiIndex, Jet> = BTreeMap::new();
    if k == 0 {
        return Ok(a);
    }
    for deg in (0..k as u32).rev() {
        for gamma in MultiIndex::of_degree(n, deg) {
            let c: Vec<Jet> = (0..n)
                .map(|l| {
                    let hol = Monomial::new(gamma.clone(), MultiIndex::zero(n));
                    let mut c = rhs[l].coeff(&hol).cloned().unwrap_or_else(|| Jet::zero(n, phi_bar[l].max_degree()));
                    for (alpha, a_alpha) in &a {
                        let Some(diff) = alpha.checked_sub(&gamma) else { continue };
                        if diff.degree() < 2 {
                            continue;
                        }
                        let coef = scalar::int(alpha.binomial(&diff) as i64);
                        let dphi = phi_bar[l].derivative(&Monomial::new(diff, MultiIndex::zero(n)));
                        c = c - (a_alpha * &dphi).scale(&coef);
                    }
                    c
                })
                .collect();
            for i in 0..n {
                let mut b = Jet::zero(n, c[0].max_degree());
                for (l, cl) in c.iter().enumerate() {
                    b = b + &metric.g_inv[i][l] * cl;
                }
                let alpha = gamma.add(&MultiIndex::unit(n, i));
                let val = b.scale(&scalar::frac(1, i64::from(gamma.0[i]) + 1));
                match a.get(&alpha) {
                    Some(prev) if !prev.agrees_with(&val) => {
                        return Err(Error::SingularSystem(format!(
                            "order {k}: inconsistent coefficient for d^{alpha}"
                        )));
                    }
                    Some(_) => {}
                    None => {
                        if !val.is_zero() {
                            a.insert(alpha, val);
                        }
                    }
                }
            }
        }
    }
    Ok(a)
}

/// `Σ_{p+q=k} [A_p, (νR_l)_q]` for every `k ≤ N` and `l`; zero for a valid `L_g`.
pub fn right_commutator_defect(lg: &NuDiffOp, p: &FormalPotential) -> Vec<DiffOp> {
    let n = p.n();
    let mut out = Vec::new();
    for l in 0..n {
        let phi = DiffOp::multiplication(p.phi_minus1.diff(l, VarKind::Anti));
        for k in 0..=lg.order() {
            let mut acc = commutator(lg.get(k), &phi);
            for q in 1..=k {
                acc = acc.add(&commutator(lg.get(k - q), &p.right_part(l, q)));
            }
            out.push(acc);
        }
    }
    out
}

/// `f ⋆ g = L_f(g)` evaluated directly from the left-multiplication operator.
pub fn left_star(f: &Jet, g: &Jet, p: &FormalPotential, order: usize) -> Result<Vec<Jet>> {
    left_mult_operator(std::slice::from_ref(f), p, order)?.apply(std::slice::from_ref(g))
}

pub const KARABEGOV_LABEL: &str = "Karabegov form (1/nu) i ddbar Phi_hat";

/// The anti-Wick star product with `L_f(L_g(1)) = f ⋆ g`.
///
/// `C_k(z̄^J, z^I) = (L_{z̄^J})_k(z^I)` fixes the type-`(k,k)` operator `I_k`,
/// and `C_k` is its polarization.
pub fn karabegov_star(p: &FormalPotential, order: usize) -> Result<StarTable> {
    let n = p.n();
    let mut left_ops: BTreeMap<MultiIndex, NuDiffOp> = BTreeMap::new();
    for j in MultiIndex::up_to_degree(n, order as u32 + 1) {
        let lop = left_mult_operator(&[anti_monomial(&j)], p, order)?;
        left_ops.insert(j, lop);
    }
    let mut coeffs = vec![BiDiffOp::pointwise(n)];
    for k in 1..=order {
        let i_k = solve_type_kk(n, k, |i, j| left_ops[j].get(k).apply(&holo_monomial(i)))?;
        coeffs.push(polarize(&i_k, k)?);
    }
    StarTable::new(n, coeffs, Convention::KarabegovAntiWick, KARABEGOV_LABEL)
}

/// Formal Berezin transform of an anti-Wick table.
pub fn berezin_transform_of_star(t: &StarTable) -> Result<NuDiffOp> {
    transform_from_star(t)
}

/// `f ⋆_BT g = I⁻¹(I f ⋆ I g)`, a Wick-type table.
pub fn bt_star_from(p: &FormalPotential, order: usize) -> Result<StarTable> {
    let t = karabegov_star(p, order)?;
    let i = transform_from_star(&t)?;
    let bt = conjugate_star(&t, &i)?;
    if bt.convention() != Convention::Wick {
        return Err(Error::Convention(format!("expected a Wick table, got {:?}", bt.convention())));
    }
    Ok(bt.with_label(format!("{KARABEGOV_LABEL}; Berezin-Toeplitz")))
}
