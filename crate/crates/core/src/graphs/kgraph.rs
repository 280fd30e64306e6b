use std::fmt;

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Poly;
use crate::error::{Error, Result};

/// Target code of an edge ending at the first argument.
pub const L: i32 = -1;
/// Target code of an edge ending at the second argument.
pub const R: i32 = -2;

/// Admissible graph with `n` internal vertices `1..=n`, each emitting an
/// ordered pair of edges. Targets are vertex ids or [`L`], [`R`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "KGraphRepr")]
pub struct KGraph {
    n: usize,
    targets: Vec<[i32; 2]>,
}

#[derive(Deserialize)]
struct KGraphRepr {
    n: usize,
    targets: Vec<[i32; 2]>,
}

impl TryFrom<KGraphRepr> for KGraph {
    type Error = Error;
    fn try_from(r: KGraphRepr) -> Result<Self> {
        KGraph::new(r.n, r.targets)
    }
}

impl KGraph {
    pub fn new(n: usize, targets: Vec<[i32; 2]>) -> Result<Self> {
        if targets.len() != n {
            return Err(Error::Invalid(format!("{n} vertices but {} target pairs", targets.len())));
        }
        for (i, pair) in targets.iter().enumerate() {
            let me = i as i32 + 1;
            for &t in pair {
                if t == me || !(t == L || t == R || (1..=n as i32).contains(&t)) {
                    return Err(Error::Invalid(format!("vertex {me}: bad target {t}")));
                }
            }
            if pair[0] == pair[1] {
                return Err(Error::Invalid(format!("vertex {me}: both edges end at {}", pair[0])));
            }
        }
        Ok(KGraph { n, targets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn targets(&self) -> &[[i32; 2]] {
        &self.targets
    }

    /// Edges as `(tail, head)`, in the order `e_1^1, e_1^2, e_2^1, …`.
    pub fn edges(&self) -> Vec<(i32, i32)> {
        self.targets.iter().enumerate().flat_map(|(i, p)| [(i as i32 + 1, p[0]), (i as i32 + 1, p[1])]).collect()
    }

    /// Representative of the class under vertex relabelling and swapping
    /// the two edges of a vertex, with the sign `w(self) = sign · w(rep)`.
    pub fn canonical(&self) -> (KGraph, i32) {
        // vertices first, then L, then R
        let rank = |t: i32| if t > 0 { t } else { self.n as i32 - t };
        let mut best: Option<(Vec<[i32; 2]>, KGraph, i32)> = None;
        for perm in permutations(self.n) {
            let map = |t: i32| if t > 0 { perm[t as usize - 1] as i32 + 1 } else { t };
            let mut targets = vec![[0, 0]; self.n];
            let mut sign = 1;
            for (i, p) in self.targets.iter().enumerate() {
                let (a, b) = (map(p[0]), map(p[1]));
                targets[perm[i]] = if rank(a) <= rank(b) {
                    [a, b]
                } else {
                    sign = -sign;
                    [b, a]
                };
            }
            let key: Vec<[i32; 2]> = targets.iter().map(|p| [rank(p[0]), rank(p[1])]).collect();
            if best.as_ref().is_none_or(|(k, _, _)| key < *k) {
                best = Some((key, KGraph { n: self.n, targets }, sign));
            }
        }
        let (_, g, sign) = best.expect("at least the identity permutation");
        (g, sign)
    }

    /// Stable text key of the canonical representative.
    pub fn canonical_key(&self) -> String {
        self.canonical().0.to_string()
    }
}

impl fmt::Display for KGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |t: i32| match t {
            L => "L".to_string(),
            R => "R".to_string(),
            v => v.to_string(),
        };
        write!(f, "[")?;
        for (i, p) in self.targets.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}:({},{})", i + 1, name(p[0]), name(p[1]))?;
        }
        write!(f, "]")
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// All admissible graphs with `n` internal vertices, in lexicographic order
/// of target lists with candidates ordered `1, …, n, L, R`.
pub fn enumerate_kgraphs(n: usize) -> Result<Vec<KGraph>> {
    if n > 3 {
        return Err(Error::ResourceGuard(format!("graph enumeration limited to n <= 3, got {n}")));
    }
    let mut out = vec![Vec::new()];
    for v in 1..=n as i32 {
        let cands: Vec<i32> = (1..=n as i32).filter(|&t| t != v).chain([L, R]).collect();
        let mut next = Vec::new();
        for prefix in &out {
            for &a in &cands {
                for &b in &cands {
                    if a != b {
                        let mut p: Vec<[i32; 2]> = prefix.clone();
                        p.push([a, b]);
                        next.push(p);
                    }
                }
            }
        }
        out = next;
    }
    Ok(out.into_iter().map(|targets| KGraph { n, targets }).collect())
}

/// Bivector `α^{ij}` on `ℝ^d` with polynomial coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BivectorRepr")]
pub struct PoissonBivector {
    d: usize,
    alpha: Vec<Vec<Poly>>,
}

#[derive(Deserialize)]
struct BivectorRepr {
    d: usize,
    alpha: Vec<Vec<Poly>>,
}

impl TryFrom<BivectorRepr> for PoissonBivector {
    type Error = Error;
    fn try_from(r: BivectorRepr) -> Result<Self> {
        // Zero entries deserialize without a dimension.
        let alpha = r
            .alpha
            .into_iter()
            .map(|row| row.into_iter().map(|p| if p.is_zero() { Poly::zero(r.d) } else { p }).collect())
            .collect();
        PoissonBivector::new(r.d, alpha)
    }
}

impl PoissonBivector {
    pub fn new(d: usize, alpha: Vec<Vec<Poly>>) -> Result<Self> {
        if alpha.len() != d || alpha.iter().any(|r| r.len() != d) {
            return Err(Error::Invalid(format!("alpha must be {d}x{d}")));
        }
        for i in 0..d {
            for j in 0..d {
                if alpha[i][j].dim() != d {
                    return Err(Error::DimensionMismatch(d, alpha[i][j].dim()));
                }
                if !alpha[i][j].is_real() {
                    return Err(Error::Invalid(format!("alpha[{i}][{j}] has complex coefficients")));
                }
                if !(&alpha[i][j] + &alpha[j][i]).is_zero() {
                    return Err(Error::Invalid(format!("alpha is not antisymmetric at ({i},{j})")));
                }
            }
        }
        Ok(PoissonBivector { d, alpha })
    }

    /// Constant bivector from an antisymmetric matrix.
    pub fn constant(m: &[Vec<f64>]) -> Result<Self> {
        let d = m.len();
        let alpha =
            m.iter().map(|row| row.iter().map(|&c| Poly::constant(d, Complex64::new(c, 0.0))).collect()).collect();
        PoissonBivector::new(d, alpha)
    }

    /// `α^{ij} = Σ_k ε_{ijk} x_k` on `ℝ³`.
    pub fn su2() -> Self {
        let mut alpha = vec![vec![Poly::zero(3); 3]; 3];
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            alpha[i][j] = Poly::var(3, k);
            alpha[j][i] = -&Poly::var(3, k);
        }
        PoissonBivector { d: 3, alpha }
    }

    pub fn zero(d: usize) -> Self {
        PoissonBivector { d, alpha: vec![vec![Poly::zero(d); d]; d] }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly {
        &self.alpha[i][j]
    }

    pub fn is_constant(&self) -> bool {
        self.alpha.iter().flatten().all(|p| p.degree().unwrap_or(0) == 0)
    }

    /// `{f, g} = Σ α^{ij} ∂_i f ∂_j g`.
    pub fn bracket(&self, f: &Poly, g: &Poly) -> Poly {
        let mut out = Poly::zero(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                out = &out + &(&(&self.alpha[i][j] * &f.diff(i)) * &g.diff(j));
            }
        }
        out
    }

    /// Largest coefficient of `Σ_l (α^{il}∂_l α^{jk} + α^{jl}∂_l α^{ki} + α^{kl}∂_l α^{ij})`.
    pub fn jacobi_defect(&self) -> f64 {
        let d = self.d;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut s = Poly::zero(d);
                    for l in 0..d {
                        for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                            s = &s + &(&self.alpha[a][l] * &self.alpha[b][c].diff(l));
                        }
                    }
                    worst = worst.max(s.max_abs_coeff());
                }
            }
        }
        worst
    }
}

/// `D_Γ(f, g)`: sum over edge labellings `1..d` of the product of
/// `α^{l(e_v^1) l(e_v^2)}` at each internal vertex, differentiated along the
/// labels of incoming edges, with `f` and `g` differentiated along the labels
/// of the edges into `L` and `R`.
pub fn d_gamma(gr: &KGraph, a: &PoissonBivector, f: &Poly, g: &Poly) -> Result<Poly> {
    let d = a.dim();
    if f.dim() != d {
        return Err(Error::DimensionMismatch(d, f.dim()));
    }
    if g.dim() != d {
        return Err(Error::DimensionMismatch(d, g.dim()));
    }
    let edges = gr.edges();
    let m = edges.len();
    let mut out = Poly::zero(d);
    let mut labels = vec![0usize; m];
    let total = d.pow(m as u32);
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % d;
            c /= d;
        }
        let into = |target: i32| -> Vec<usize> {
            edges.iter().zip(&labels).filter(|((_, h), _)| *h == target).map(|(_, &l)| l).collect()
        };
        let mut term = f.diff_many(&into(L));
        if term.is_zero() {
            continue;
        }
        term = &term * &g.diff_many(&into(R));
        for v in 1..=gr.n() {
            if term.is_zero() {
                break;
            }
            let factor = a.entry(labels[2 * (v - 1)], labels[2 * (v - 1) + 1]).diff_many(&into(v as i32));
            term = &term * &factor;
        }
        out = &out + &term;
    }
    Ok(out)
}
