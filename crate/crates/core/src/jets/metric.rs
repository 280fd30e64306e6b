//! Kähler metric data derived from a potential jet.

use num::Zero;

use super::index::Monomial;
use super::jet::{Jet, VarKind};
use super::scalar::{self, Scalar};
use crate::error::{Error, Result};

/// `g[i][j] = ∂²Φ/∂z_i∂z̄_j` and its inverse.
///
/// `g_inv[i][j]` is the contravariant metric `g^{i j̄}`: it contracts a
/// holomorphic derivative in direction `i` with an anti-holomorphic one in
/// direction `j`, so that `Σ_i g[i][j]·g_inv[i][k] = δ_jk`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricJets {
    pub g: Vec<Vec<Jet>>,
    pub g_inv: Vec<Vec<Jet>>,
    pub base_valid: bool,
}

impl MetricJets {
    pub fn n(&self) -> usize {
        self.g.len()
    }

    /// Residual of the contraction identity, entry by entry.
    pub fn contraction_defect(&self) -> Vec<Vec<Jet>> {
        let n = self.n();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        let mut acc = self.g[0][j].clone() * &self.g_inv[0][k];
                        for i in 1..n {
                            acc = acc + (&self.g[i][j] * &self.g_inv[i][k]);
                        }
                        if j == k {
                            let one = Jet::one(acc.n(), acc.max_degree());
                            acc = acc - one;
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn metric_from_potential(phi: &Jet) -> Result<MetricJets> {
    let n = phi.n();
    let g: Vec<Vec<Jet>> =
        (0..n).map(|i| (0..n).map(|j| phi.diff(i, VarKind::Holo).diff(j, VarKind::Anti)).collect()).collect();
    let inv = invert_jet_matrix(&g)?;
    // g_inv[i][j] = (G^{-1})_{ji}
    let g_inv = (0..n).map(|i| (0..n).map(|j| inv[j][i].clone()).collect()).collect();
    Ok(MetricJets { g, g_inv, base_valid: true })
}

/// Gauss-Jordan elimination over jets, pivoting on constant terms.
pub fn invert_jet_matrix(a: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>> {
    let n = a.len();
    if n == 0 {
        return Ok(vec![]);
    }
    let nv = a[0][0].n();
    let deg = a.iter().flatten().map(Jet::max_degree).min().unwrap_or(0);
    let mut m: Vec<Vec<Jet>> = a.iter().map(|r| r.iter().map(|x| x.truncate(deg)).collect()).collect();
    let mut inv: Vec<Vec<Jet>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { Jet::one(nv, deg) } else { Jet::zero(nv, deg) }).collect()).collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].constant_term().is_zero()).ok_or(Error::DegenerateMetric)?;
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p_inv = m[col][col].inverse()?;
        for j in 0..n {
            m[col][j] = &m[col][j] * &p_inv;
            inv[col][j] = &inv[col][j] * &p_inv;
        }
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].clone();
            for j in 0..n {
                m[r][j] = &m[r][j] - &(&factor * &m[col][j]);
                inv[r][j] = &inv[r][j] - &(&factor * &inv[col][j]);
            }
        }
    }
    Ok(inv)
}

/// `Δf = Σ g^{ij} ∂²f/∂z_i∂z̄_j`.
pub fn laplacian(f: &Jet, m: &MetricJets) -> Jet {
    let n = f.n();
    let mut acc: Option<Jet> = None;
    for i in 0..n {
        let fi = f.diff(i, VarKind::Holo);
        for j in 0..n {
            let term = &m.g_inv[i][j] * &fi.diff(j, VarKind::Anti);
            acc = Some(match acc {
                None => term,
                Some(a) => a + term,
            });
        }
    }
    acc.unwrap_or_else(|| f.clone())
}

/// Poisson bracket with the fixed normalization
/// `{f,g} = i Σ g^{ij} (∂f/∂z̄_j ∂g/∂z_i − ∂f/∂z_i ∂g/∂z̄_j)`.
pub fn poisson_bracket(f: &Jet, g: &Jet, m: &MetricJets) -> Jet {
    let n = f.n();
    let i_unit = scalar::imag_unit();
    let mut acc = Jet::zero(n, f.max_degree().min(g.max_degree()) - 1);
    for i in 0..n {
        let f_i = f.diff(i, VarKind::Holo);
        let g_i = g.diff(i, VarKind::Holo);
        for j in 0..n {
            let f_jb = f.diff(j, VarKind::Anti);
            let g_jb = g.diff(j, VarKind::Anti);
            let inner = &(&f_jb * &g_i) - &(&f_i * &g_jb);
            acc = acc + (&m.g_inv[i][j] * &inner);
        }
    }
    acc.scale(&i_unit)
}

/// Flat potential `Σ w_i z_i z̄_i` with rational weights.
pub fn diagonal_quadratic_potential(weights: &[Scalar], max_degree: i32) -> Jet {
    let n = weights.len();
    Jet::from_terms(
        n,
        max_degree,
        weights.iter().enumerate().map(|(i, w)| {
            let mut h = vec![0; n];
            h[i] = 1;
            (Monomial::from_slices(&h, &h), w.clone())
        }),
    )
}

/// Jet of `log(1 + Σ z_i z̄_i)`, the Fubini-Study potential.
pub fn fubini_study_potential(n: usize, max_degree: i32) -> Jet {
    let t = diagonal_quadratic_potential(&vec![scalar::int(1); n], max_degree);
    let mut acc = Jet::zero(n, max_degree);
    let mut power = Jet::one(n, max_degree);
    for k in 1..=(max_degree.max(0) / 2 + 1) {
        power = &power * &t;
        if power.is_zero() {
            break;
        }
        let sign = if k % 2 == 1 { 1 } else { -1 };
        acc = acc + power.scale(&scalar::frac(sign, i64::from(k)));
    }
    acc
}
