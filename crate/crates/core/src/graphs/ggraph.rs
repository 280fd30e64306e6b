use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formal::{BiDiffOp, Convention, StarTable};
use crate::jets::{factorial, scalar, Jet, MetricJets, Monomial, MultiIndex};
use crate::karabegov::{karabegov_star, FormalPotential};

/// Id of the source vertex, which carries the first argument.
pub const SOURCE: i32 = -1;
/// Id of the sink vertex, which carries the second argument.
pub const SINK: i32 = -2;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GVertex {
    pub id: i32,
    pub w: i32,
}

/// Weighted directed acyclic multigraph with internal vertices `1..=m`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "GGraphRepr")]
pub struct GGraph {
    vertices: Vec<GVertex>,
    edges: Vec<[i32; 2]>,
}

#[derive(Deserialize)]
struct GGraphRepr {
    vertices: Vec<GVertex>,
    edges: Vec<[i32; 2]>,
}

impl TryFrom<GGraphRepr> for GGraph {
    type Error = Error;
    fn try_from(r: GGraphRepr) -> Result<Self> {
        let mut vs = r.vertices;
        vs.sort_by_key(|v| v.id);
        if vs.iter().enumerate().any(|(k, v)| v.id != k as i32 + 1) {
            return Err(Error::Invalid("internal vertex ids must be 1..=m".into()));
        }
        GGraph::new(vs.iter().map(|v| v.w).collect(), r.edges)
    }
}

impl GGraph {
    /// Validates the structural rules; `weights[k]` belongs to vertex `k+1`.
    pub fn new(weights: Vec<i32>, mut edges: Vec<[i32; 2]>) -> Result<Self> {
        let m = weights.len() as i32;
        let known = |v: i32| v == SOURCE || v == SINK || (1..=m).contains(&v);
        for e in &edges {
            if !known(e[0]) || !known(e[1]) || e[0] == e[1] {
                return Err(Error::Invalid(format!("bad edge {e:?}")));
            }
            if e[1] == SOURCE || e[0] == SINK {
                return Err(Error::Invalid(format!("edge {e:?} enters the source or leaves the sink")));
            }
        }
        for (k, &w) in weights.iter().enumerate() {
            let v = k as i32 + 1;
            let ins = edges.iter().filter(|e| e[1] == v).count();
            let outs = edges.iter().filter(|e| e[0] == v).count();
            if w < -1 {
                return Err(Error::Invalid(format!("vertex {v} has weight {w} < -1")));
            }
            if ins == 0 || outs == 0 {
                return Err(Error::Invalid(format!("vertex {v} needs incoming and outgoing edges")));
            }
            if w == -1 && ins + outs < 3 {
                return Err(Error::Invalid(format!("vertex {v} of weight -1 has fewer than 3 edges")));
            }
        }
        edges.sort();
        let g = GGraph {
            vertices: weights.iter().enumerate().map(|(k, &w)| GVertex { id: k as i32 + 1, w }).collect(),
            edges,
        };
        if g.topological_order().is_none() {
            return Err(Error::Invalid("graph has a directed cycle".into()));
        }
        Ok(g)
    }

    pub fn vertices(&self) -> &[GVertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[[i32; 2]] {
        &self.edges
    }

    /// `W(Γ) = |E| + Σ w(v)`.
    pub fn total_weight(&self) -> i32 {
        self.edges.len() as i32 + self.vertices.iter().map(|v| v.w).sum::<i32>()
    }

    fn topological_order(&self) -> Option<Vec<i32>> {
        let mut ids: Vec<i32> = vec![SOURCE];
        ids.extend(self.vertices.iter().map(|v| v.id));
        ids.push(SINK);
        let mut order = Vec::new();
        let mut left = ids.clone();
        while !left.is_empty() {
            let pos = left.iter().position(|&v| !self.edges.iter().any(|e| e[1] == v && left.contains(&e[0])))?;
            order.push(left.remove(pos));
        }
        Some(order)
    }

    fn relabelled(&self, perm: &[usize]) -> GGraph {
        let map = |v: i32| if v > 0 { perm[v as usize - 1] as i32 + 1 } else { v };
        let mut vertices = self.vertices.clone();
        for v in &self.vertices {
            vertices[perm[v.id as usize - 1]] = GVertex { id: map(v.id), w: v.w };
        }
        let mut edges: Vec<[i32; 2]> = self.edges.iter().map(|e| [map(e[0]), map(e[1])]).collect();
        edges.sort();
        GGraph { vertices, edges }
    }

    /// Smallest relabelling of the internal vertices.
    pub fn canonical(&self) -> GGraph {
        permutations(self.vertices.len()).iter().map(|p| self.relabelled(p)).min().expect("identity permutation")
    }

    /// Automorphisms fixing source and sink, parallel edges counted as
    /// distinguishable.
    pub fn automorphisms(&self) -> u64 {
        let vertex = permutations(self.vertices.len()).iter().filter(|p| self.relabelled(p) == *self).count() as u64;
        let mut parallel = 1;
        let mut k = 0;
        while k < self.edges.len() {
            let run = self.edges[k..].iter().take_while(|e| **e == self.edges[k]).count();
            parallel *= factorial(run as u32);
            k += run;
        }
        vertex * parallel
    }
}

impl fmt::Display for GGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |v: i32| match v {
            SOURCE => "s".to_string(),
            SINK => "t".to_string(),
            v => v.to_string(),
        };
        write!(f, "{{")?;
        for (k, v) in self.vertices.iter().enumerate() {
            write!(f, "{}{}:w{}", if k > 0 { " " } else { "" }, v.id, v.w)?;
        }
        write!(f, " |")?;
        for e in &self.edges {
            write!(f, " {}>{}", name(e[0]), name(e[1]))?;
        }
        write!(f, "}}")
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

fn multisets<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, x) in items.iter().enumerate() {
        for mut rest in multisets(&items[i..], k - 1) {
            rest.insert(0, x.clone());
            out.push(rest);
        }
    }
    out
}

/// Every graph with `0 ≤ W(Γ) ≤ w_max` up to isomorphism, sorted by weight
/// and then by canonical form.
///
/// Each weight `−1` vertex has at least three edges and every other internal
/// vertex at least two, so `W ≥ m₋/2 + m₊ + 1` once there are internal
/// vertices. That caps `m` at `2(w_max − 1)` and the edge count at `w_max + m`.
pub fn enumerate_ggraphs(w_max: usize) -> Result<Vec<GGraph>> {
    if w_max > 2 {
        return Err(Error::ResourceGuard(format!("weighted graphs are enumerated for W <= 2, got {w_max}")));
    }
    let wm = w_max as i32;
    let mut found = BTreeSet::new();
    for m in 0..=2 * w_max.saturating_sub(1) {
        let mi = m as i32;
        let mut cands = Vec::new();
        for u in std::iter::once(SOURCE).chain(1..=mi) {
            for v in (1..=mi).chain(std::iter::once(SINK)) {
                if u != v {
                    cands.push([u, v]);
                }
            }
        }
        let weight_choices = multisets_ordered(m, -1, wm);
        for weights in &weight_choices {
            let sw: i32 = weights.iter().sum();
            for e in 0..=wm - sw {
                for edges in multisets(&cands, e as usize) {
                    if let Ok(g) = GGraph::new(weights.clone(), edges) {
                        if (0..=wm).contains(&g.total_weight()) {
                            found.insert((g.total_weight(), g.canonical()));
                        }
                    }
                }
            }
        }
    }
    Ok(found.into_iter().map(|(_, g)| g).collect())
}

/// All vectors of length `m` with entries in `lo..=hi`.
fn multisets_ordered(m: usize, lo: i32, hi: i32) -> Vec<Vec<i32>> {
    let mut out = vec![vec![]];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|p: Vec<i32>| {
                (lo..=hi).map(move |w| {
                    let mut q = p.clone();
                    q.push(w);
                    q
                })
            })
            .collect();
    }
    out
}

/// `D_Γ`: each edge `u → v` carries indices `(i, j)` and the factor
/// `g^{ij}`, differentiating its head by `∂_i` and its tail by `∂̄_j`;
/// internal vertices of weight `k` carry `−Φ_k`.
pub fn gammelgaard_operator(g: &GGraph, p: &FormalPotential, metric: &MetricJets) -> Result<BiDiffOp> {
    let n = p.n();
    if metric.n() != n {
        return Err(Error::DimensionMismatch(n, metric.n()));
    }
    let phis: Vec<Jet> =
        g.vertices().iter().map(|v| if v.w < 0 { -&p.phi_minus1 } else { -&p.phi_k(v.w as usize) }).collect();
    let edges = g.edges();
    let ne = edges.len();
    let mut out = BiDiffOp::zero(n);
    let total = (n * n).pow(ne as u32);
    for code in 0..total {
        let mut c = code;
        let mut idx = Vec::with_capacity(ne);
        for _ in 0..ne {
            idx.push(((c % (n * n)) / n, c % n));
            c /= n * n;
        }
        let mut coeff = Jet::one(n, crate::jets::EXACT);
        for &(i, j) in &idx {
            coeff = &coeff * &metric.g_inv[i][j];
        }
        let mut f_slot = MultiIndex::zero(n);
        let mut g_slot = MultiIndex::zero(n);
        let mut vertex_d: Vec<Monomial> = vec![Monomial::one(n); phis.len()];
        for (e, &(i, j)) in edges.iter().zip(&idx) {
            match e[0] {
                SOURCE => f_slot = f_slot.add(&MultiIndex::unit(n, j)),
                v => vertex_d[v as usize - 1] = vertex_d[v as usize - 1].add(&Monomial::anti_unit(n, j)),
            }
            match e[1] {
                SINK => g_slot = g_slot.add(&MultiIndex::unit(n, i)),
                v => vertex_d[v as usize - 1] = vertex_d[v as usize - 1].add(&Monomial::holo_unit(n, i)),
            }
        }
        for (phi, d) in phis.iter().zip(&vertex_d) {
            coeff = &coeff * &phi.derivative(d);
        }
        if coeff.is_zero() {
            continue;
        }
        out.add_term(Monomial::new(MultiIndex::zero(n), f_slot), Monomial::new(g_slot, MultiIndex::zero(n)), coeff);
    }
    Ok(out)
}

pub const GAMMELGAARD_LABEL: &str = "Gammelgaard graph expansion";

/// `C_k = Σ_{W(Γ)=k} D_Γ / |Aut(Γ)|`, cross-checked against the Karabegov
/// recursion for the same potential.
pub fn gammelgaard_star(p: &FormalPotential, metric: &MetricJets, order: usize) -> Result<StarTable> {
    let t = gammelgaard_table(p, metric, order)?;
    let reference = karabegov_star(p, order)?;
    for k in 0..=order {
        if !t.coefficient(k).agrees_with(reference.coefficient(k)) {
            return Err(Error::CrossCheckFailure(format!(
                "graph expansion differs from the Karabegov recursion at order {k}"
            )));
        }
    }
    Ok(t)
}

/// The graph sum alone, without the cross-check.
pub fn gammelgaard_table(p: &FormalPotential, metric: &MetricJets, order: usize) -> Result<StarTable> {
    let n = p.n();
    let mut coeffs = vec![BiDiffOp::zero(n); order + 1];
    for g in enumerate_ggraphs(order)? {
        let k = g.total_weight() as usize;
        let d = gammelgaard_operator(&g, p, metric)?;
        coeffs[k] = coeffs[k].add(&d.scale(&scalar::frac(1, g.automorphisms() as i64)));
    }
    StarTable::new(n, coeffs, Convention::KarabegovAntiWick, GAMMELGAARD_LABEL)
}
