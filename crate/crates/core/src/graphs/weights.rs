use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kgraph::{enumerate_kgraphs, KGraph, L, R};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Grid,
    MonteCarlo,
}

/// Integration settings for [`kontsevich_weight`].
///
/// Every coordinate runs over `(0, 1)` through the substitution
/// `x = 1/(1 + e^{−π sinh t})`, `|t| ≤ t_max`. The grid backend uses step
/// `step` in `t` and estimates its error against the grid of step
/// `2·step`; the Monte Carlo backend samples `t` uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    pub backend: Backend,
    pub step: f64,
    pub t_max: f64,
    pub samples: u64,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig { backend: Backend::Grid, step: 0.2, t_max: 3.0, samples: 1 << 20, seed: 1, tolerance: 1e-3 }
    }
}

impl WeightConfig {
    pub fn monte_carlo(samples: u64, seed: u64) -> Self {
        WeightConfig { backend: Backend::MonteCarlo, samples, seed, tolerance: 2e-2, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite() && self.t_max > self.step) {
            return Err(Error::Invalid(format!("bad quadrature step {} / t_max {}", self.step, self.t_max)));
        }
        if self.backend == Backend::MonteCarlo && self.samples < 2 {
            return Err(Error::Invalid("Monte Carlo needs at least two samples".into()));
        }
        Ok(())
    }

    fn key(&self) -> String {
        match self.backend {
            Backend::Grid => format!("grid:{}:{}", self.step, self.t_max),
            Backend::MonteCarlo => format!("mc:{}:{}:{}", self.t_max, self.samples, self.seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightResult {
    pub value: f64,
    pub error_estimate: f64,
    pub samples_or_cells: u64,
    pub seed: u64,
}

impl WeightResult {
    fn negated(&self, sign: i32) -> WeightResult {
        WeightResult { value: self.value * sign as f64, ..self.clone() }
    }
}

/// One cache record, keyed by the canonical graph and the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub graph: String,
    pub config: String,
    pub result: WeightResult,
}

type Cache = HashMap<(String, String), WeightResult>;

fn cache() -> &'static Mutex<Cache> {
    static CACHE: OnceLock<Mutex<Cache>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Snapshot of the weight cache, sorted.
pub fn export_cache() -> Vec<CacheEntry> {
    let c = cache().lock().unwrap();
    let mut v: Vec<CacheEntry> =
        c.iter().map(|((g, k), r)| CacheEntry { graph: g.clone(), config: k.clone(), result: r.clone() }).collect();
    v.sort_by(|a, b| (&a.config, &a.graph).cmp(&(&b.config, &b.graph)));
    v
}

pub fn import_cache(entries: &[CacheEntry]) {
    let mut c = cache().lock().unwrap();
    for e in entries {
        c.insert((e.graph.clone(), e.config.clone()), e.result.clone());
    }
}

pub fn clear_cache() {
    cache().lock().unwrap().clear();
}

/// `w_Γ = 1/((2π)^{2n} n!) ∫ ∧_i dφ_{e_i^1} ∧ dφ_{e_i^2}` over the
/// configurations of `n` points in the upper half-plane, with `L` at 0 and
/// `R` at 1.
///
/// All graphs with the same `n` are integrated in one pass and cached.
pub fn kontsevich_weight(g: &KGraph, cfg: &WeightConfig) -> Result<WeightResult> {
    cfg.validate()?;
    let n = g.n();
    if n > 2 {
        return Err(Error::ResourceGuard(format!("weights are integrated for n <= 2, got {n}")));
    }
    let (rep, sign) = g.canonical();
    let key = (rep.to_string(), cfg.key());
    if let Some(r) = cache().lock().unwrap().get(&key) {
        return check(g, r.negated(sign), cfg);
    }
    let all = integrate_all(n, cfg)?;
    let mut found = None;
    {
        let mut c = cache().lock().unwrap();
        for (gr, r) in all {
            let (crep, csign) = gr.canonical();
            let r = r.negated(csign);
            if crep == rep {
                found = Some(r.clone());
            }
            c.entry((crep.to_string(), cfg.key())).or_insert(r);
        }
    }
    check(g, found.expect("graph is enumerated").negated(sign), cfg)
}

/// Weights of every graph with `n` vertices, in enumeration order.
pub fn kontsevich_weights(n: usize, cfg: &WeightConfig) -> Result<Vec<(KGraph, WeightResult)>> {
    enumerate_kgraphs(n)?
        .into_iter()
        .map(|g| {
            let w = kontsevich_weight(&g, cfg)?;
            Ok((g, w))
        })
        .collect()
}

fn check(g: &KGraph, r: WeightResult, cfg: &WeightConfig) -> Result<WeightResult> {
    if r.error_estimate > cfg.tolerance {
        return Err(Error::IntegrationFailure(format!(
            "weight of {g}: error estimate {:.3e} exceeds tolerance {:.3e}",
            r.error_estimate, cfg.tolerance
        )));
    }
    Ok(r)
}

/// Raw integration of every graph in [`enumerate_kgraphs`] order; the
/// returned weights belong to the graphs as given, not their representatives.
fn integrate_all(n: usize, cfg: &WeightConfig) -> Result<Vec<(KGraph, WeightResult)>> {
    let graphs = enumerate_kgraphs(n)?;
    if n == 0 {
        let r = WeightResult { value: 1.0, error_estimate: f64::EPSILON, samples_or_cells: 1, seed: cfg.seed };
        return Ok(vec![(graphs[0].clone(), r)]);
    }
    let rows = row_plan(&graphs);
    let norm = 1.0 / ((2.0 * PI).powi(2 * n as i32) * if n == 2 { 2.0 } else { 1.0 });
    let (values, errors, count) = match cfg.backend {
        Backend::Grid => grid(n, &rows, cfg),
        Backend::MonteCarlo => monte_carlo(n, &rows, cfg),
    };
    Ok(graphs
        .into_iter()
        .enumerate()
        .map(|(k, g)| {
            let value = values[k] * norm;
            let err = (errors[k] * norm).max(f64::EPSILON * value.abs().max(1.0));
            (g, WeightResult { value, error_estimate: err, samples_or_cells: count, seed: cfg.seed })
        })
        .collect())
}

/// Edge rows are numbered per tail vertex: targets `[other, L, R]` for
/// `n = 2`, `[L, R]` for `n = 1`. Each graph becomes a list of row pairs.
fn row_plan(graphs: &[KGraph]) -> Vec<Vec<(usize, usize)>> {
    graphs
        .iter()
        .map(|g| {
            let n = g.n();
            g.targets()
                .iter()
                .enumerate()
                .map(|(v, p)| {
                    let slot = |t: i32| match t {
                        L => n - 1,
                        R => n,
                        _ => 0,
                    };
                    (slot(p[0]) + v * (n + 1), slot(p[1]) + v * (n + 1))
                })
                .collect()
        })
        .collect()
}

/// Node of the substitution on `(0, 1)`: `x`, `1 − x`, `dx/dt`.
#[derive(Clone, Copy, Debug)]
struct Node {
    x: f64,
    xc: f64,
    dx: f64,
}

fn node(t: f64) -> Node {
    let s = PI * t.sinh();
    let x = 1.0 / (1.0 + (-s).exp());
    let xc = 1.0 / (1.0 + s.exp());
    Node { x, xc, dx: PI * t.cosh() * x * xc }
}

/// Fine nodes with their fine and coarse quadrature weights.
fn grid_nodes(cfg: &WeightConfig) -> Vec<(Node, f64, f64)> {
    let k = (cfg.t_max / cfg.step).floor() as i64;
    let k = k - k % 2;
    (-k..=k)
        .map(|j| {
            let nd = node(j as f64 * cfg.step);
            let coarse = if j % 2 == 0 { 2.0 * cfg.step * nd.dx } else { 0.0 };
            (nd, cfg.step * nd.dx, coarse)
        })
        .collect()
}

/// Point of the upper half-plane from `(p, q) ∈ (0,1)²` via
/// `a = πpq = arg u`, `b = πp = arg(u − 1)`, with `∂u/∂p`, `∂u/∂q`.
fn half_plane_point(p: Node, q: Node) -> (Complex64, [Complex64; 2]) {
    let a = PI * p.x * q.x;
    let b = PI * p.x;
    let ba = PI * p.x * q.xc;
    let (sa, sb, sba, cba) = (a.sin(), b.sin(), ba.sin(), ba.cos());
    let r = sb / sba;
    let e = Complex64::from_polar(1.0, a);
    let du_da = Complex64::new(sb * cba / (sba * sba), r) * e;
    let du_db = e * (-sa / (sba * sba));
    let u = e * r;
    let du_dp = du_da * (PI * q.x) + du_db * PI;
    let du_dq = du_da * (PI * p.x);
    (u, [du_dp, du_dq])
}

/// `dφ(z, w)` along one coordinate, `φ = Arg((w − z)/(w − z̄))`.
fn dphi(z: Complex64, dz: Complex64, w: Complex64, dw: Complex64) -> f64 {
    ((dw - dz) / (w - z)).im - ((dw - dz.conj()) / (w - z.conj())).im
}

fn orientation(d: [Complex64; 2]) -> f64 {
    (d[0].conj() * d[1]).im.signum()
}

/// Integrand of every graph at one point, `n = 1`; coordinates `(p, q)`.
fn point_n1(p: Node, q: Node, rows: &[Vec<(usize, usize)>], out: &mut [f64], w: f64) {
    let (u, du) = half_plane_point(p, q);
    let zero = Complex64::new(0.0, 0.0);
    let ends = [zero, Complex64::new(1.0, 0.0)];
    let m: Vec<[f64; 2]> = ends.iter().map(|&e| [dphi(u, du[0], e, zero), dphi(u, du[1], e, zero)]).collect();
    let s = orientation(du) * w;
    for (o, g) in out.iter_mut().zip(rows) {
        let (i, j) = g[0];
        let det = m[i][0] * m[j][1] - m[i][1] * m[j][0];
        if det.is_finite() {
            *o += s * det;
        }
    }
}

/// Column pairs of a 4×4 matrix with their Laplace signs and complements.
const PAIRS: [((usize, usize), (usize, usize), f64); 6] = [
    ((0, 1), (2, 3), 1.0),
    ((0, 2), (1, 3), -1.0),
    ((0, 3), (1, 2), 1.0),
    ((1, 2), (0, 3), 1.0),
    ((1, 3), (0, 2), -1.0),
    ((2, 3), (0, 1), 1.0),
];

/// Integrand of every graph at one point, `n = 2`.
///
/// `u₂` uses the `(p, q)` chart; `u₁ = (u₂ − ζū₂)/(1 − ζ)` with
/// `ζ = ρe^{iθ}` in the unit disc. Coordinates are `(ρ, θ, p, q)`.
fn point_n2(
    u2: Complex64,
    du2: [Complex64; 2],
    rho: f64,
    theta: f64,
    rows: &[Vec<(usize, usize)>],
    out: &mut [f64],
    w: f64,
) {
    let zeta = Complex64::from_polar(rho, theta);
    let one = Complex64::new(1.0, 0.0);
    let omz = one - zeta;
    let u1 = (u2 - zeta * u2.conj()) / omz;
    let du1_dzeta = (u2 - u2.conj()) / (omz * omz);
    let zero = Complex64::new(0.0, 0.0);
    let du1 = [
        du1_dzeta * Complex64::from_polar(1.0, theta),
        du1_dzeta * zeta * Complex64::new(0.0, 1.0),
        (du2[0] - zeta * du2[0].conj()) / omz,
        (du2[1] - zeta * du2[1].conj()) / omz,
    ];
    let du2 = [zero, zero, du2[0], du2[1]];
    // rows 0..3: tail u1 → (u2, L, R); rows 3..6: tail u2 → (u1, L, R)
    let mut m = [[0.0f64; 4]; 6];
    for c in 0..4 {
        m[0][c] = dphi(u1, du1[c], u2, du2[c]);
        m[1][c] = dphi(u1, du1[c], zero, zero);
        m[2][c] = dphi(u1, du1[c], one, zero);
        m[3][c] = dphi(u2, du2[c], u1, du1[c]);
        m[4][c] = dphi(u2, du2[c], zero, zero);
        m[5][c] = dphi(u2, du2[c], one, zero);
    }
    let minor = |i: usize, j: usize, (a, b): (usize, usize)| m[i][a] * m[j][b] - m[i][b] * m[j][a];
    for (o, g) in out.iter_mut().zip(rows) {
        let (i1, j1) = g[0];
        let (i2, j2) = g[1];
        let det: f64 = PAIRS.iter().map(|&(s, c, sg)| sg * minor(i1, j1, s) * minor(i2, j2, c)).sum();
        // Nodes pressed against the real axis lose all digits; their weight is negligible.
        if det.is_finite() {
            *o += w * det;
        }
    }
}

fn theta_intervals(p: Node, q: Node) -> [(f64, f64); 3] {
    let (a2, b2) = (2.0 * PI * p.x * q.x, 2.0 * PI * p.x);
    [(0.0, a2), (a2, b2), (b2, 2.0 * PI)]
}

fn grid(n: usize, rows: &[Vec<(usize, usize)>], cfg: &WeightConfig) -> (Vec<f64>, Vec<f64>, u64) {
    let nodes = grid_nodes(cfg);
    let k = nodes.len();
    let ng = rows.len();
    let outer: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    let partial: Vec<(Vec<f64>, Vec<f64>)> = outer
        .par_iter()
        .map(|&(i, j)| {
            let (p, wpf, wpc) = nodes[i];
            let (q, wqf, wqc) = nodes[j];
            let mut fine = vec![0.0; ng];
            let mut coarse = vec![0.0; ng];
            if n == 1 {
                point_n1(p, q, rows, &mut fine, wpf * wqf);
                if wpc * wqc != 0.0 {
                    point_n1(p, q, rows, &mut coarse, wpc * wqc);
                }
                return (fine, coarse);
            }
            let (u2, du2) = half_plane_point(p, q);
            let sign = orientation(du2);
            let mut tmp = vec![0.0; ng];
            for (lo, hi) in theta_intervals(p, q) {
                for &(r, wrf, wrc) in &nodes {
                    for &(t, wtf, wtc) in &nodes {
                        tmp.iter_mut().for_each(|x| *x = 0.0);
                        point_n2(u2, du2, r.x, lo + (hi - lo) * t.x, rows, &mut tmp, 1.0);
                        let wf = sign * (hi - lo) * wpf * wqf * wrf * wtf;
                        let wc = sign * (hi - lo) * wpc * wqc * wrc * wtc;
                        for g in 0..ng {
                            fine[g] += wf * tmp[g];
                            coarse[g] += wc * tmp[g];
                        }
                    }
                }
            }
            (fine, coarse)
        })
        .collect();
    let mut fine = vec![0.0; ng];
    let mut coarse = vec![0.0; ng];
    for (f, c) in &partial {
        for g in 0..ng {
            fine[g] += f[g];
            coarse[g] += c[g];
        }
    }
    let err = fine.iter().zip(&coarse).map(|(f, c)| (f - c).abs()).collect();
    let cells = if n == 1 { k * k } else { 3 * k * k * k * k } as u64;
    (fine, err, cells)
}

const CHUNK: u64 = 4096;

fn monte_carlo(n: usize, rows: &[Vec<(usize, usize)>], cfg: &WeightConfig) -> (Vec<f64>, Vec<f64>, u64) {
    let ng = rows.len();
    let chunks = cfg.samples.div_ceil(CHUNK);
    let span = 2.0 * cfg.t_max;
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c);
            let count = CHUNK.min(cfg.samples - c * CHUNK);
            let mut sum = vec![0.0; ng];
            let mut sq = vec![0.0; ng];
            let mut tmp = vec![0.0; ng];
            let draw = |rng: &mut ChaCha8Rng| node(rng.gen_range(-cfg.t_max..cfg.t_max));
            for _ in 0..count {
                tmp.iter_mut().for_each(|x| *x = 0.0);
                let (p, q) = (draw(&mut rng), draw(&mut rng));
                if n == 1 {
                    point_n1(p, q, rows, &mut tmp, p.dx * q.dx * span * span);
                } else {
                    let (u2, du2) = half_plane_point(p, q);
                    let piece = rng.gen_range(0..3usize);
                    let (lo, hi) = theta_intervals(p, q)[piece];
                    let (r, t) = (draw(&mut rng), draw(&mut rng));
                    let w = orientation(du2) * 3.0 * (hi - lo) * p.dx * q.dx * r.dx * t.dx * span.powi(4);
                    point_n2(u2, du2, r.x, lo + (hi - lo) * t.x, rows, &mut tmp, w);
                }
                for g in 0..ng {
                    sum[g] += tmp[g];
                    sq[g] += tmp[g] * tmp[g];
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = vec![0.0; ng];
    let mut sq = vec![0.0; ng];
    for (s, q) in &partial {
        for g in 0..ng {
            sum[g] += s[g];
            sq[g] += q[g];
        }
    }
    let ns = cfg.samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / ns).collect();
    let err = mean.iter().zip(&sq).map(|(m, q)| ((q / ns - m * m).max(0.0) / (ns - 1.0)).sqrt()).collect();
    (mean, err, cfg.samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_one_weights() {
        let cfg = WeightConfig::default();
        let ws = kontsevich_weights(1, &cfg).unwrap();
        assert!((ws[0].1.value - 0.5).abs() < 1e-6, "{:?}", ws[0]);
        assert!((ws[1].1.value + 0.5).abs() < 1e-6, "{:?}", ws[1]);
        assert!(ws.iter().all(|(_, w)| w.error_estimate > 0.0));
    }

    /// Polar coordinates around the origin, finite-difference angles.
    fn oracle_n1() -> f64 {
        let phi = |u: Complex64, w: f64| {
            let w = Complex64::new(w, 0.0);
            ((w - u) / (w - u.conj())).arg()
        };
        let n = 400;
        let h = 1e-6;
        let mut total = 0.0;
        for i in 0..n {
            let s = (i as f64 + 0.5) / n as f64;
            let r = s / (1.0 - s);
            let dr = 1.0 / ((1.0 - s) * (1.0 - s));
            for j in 0..n {
                let th = PI * (j as f64 + 0.5) / n as f64;
                let u = Complex64::from_polar(r, th);
                let ux = Complex64::new(h, 0.0);
                let uy = Complex64::new(0.0, h);
                let d = |w: f64, du: Complex64| {
                    let mut x = phi(u + du, w) - phi(u - du, w);
                    if x > PI {
                        x -= 2.0 * PI;
                    } else if x < -PI {
                        x += 2.0 * PI;
                    }
                    x / (2.0 * h)
                };
                let det = d(0.0, ux) * d(1.0, uy) - d(0.0, uy) * d(1.0, ux);
                total += det * r * dr * (PI / n as f64) / n as f64;
            }
        }
        total / (4.0 * PI * PI)
    }

    #[test]
    fn order_one_against_polar_quadrature() {
        let w = kontsevich_weight(&KGraph::new(1, vec![[L, R]]).unwrap(), &WeightConfig::default()).unwrap();
        assert!((w.value - oracle_n1()).abs() < 1e-3);
    }

    #[test]
    fn factorizable_order_two() {
        let cfg = WeightConfig::default();
        for (a, b, want) in [([L, R], [L, R], 0.125), ([L, R], [R, L], -0.125), ([R, L], [R, L], 0.125)] {
            let g = KGraph::new(2, vec![a, b]).unwrap();
            let w = kontsevich_weight(&g, &cfg).unwrap();
            assert!((w.value - want).abs() < 1e-4, "{g}: {w:?}");
        }
    }

    #[test]
    fn backends_agree() {
        let grid = kontsevich_weights(1, &WeightConfig::default()).unwrap();
        let mc = kontsevich_weights(1, &WeightConfig::monte_carlo(1 << 16, 11)).unwrap();
        for ((_, a), (_, b)) in grid.iter().zip(&mc) {
            assert!((a.value - b.value).abs() < 5.0 * b.error_estimate + 1e-3, "{a:?} {b:?}");
        }
        let g = KGraph::new(2, vec![[2, L], [L, R]]).unwrap();
        let a = kontsevich_weight(&g, &WeightConfig::default()).unwrap();
        let b = kontsevich_weight(&g, &WeightConfig::monte_carlo(1 << 18, 3)).unwrap();
        assert!((a.value - b.value).abs() < 5.0 * b.error_estimate + 1e-3, "{a:?} {b:?}");
    }

    #[test]
    fn deterministic_and_cached() {
        let cfg = WeightConfig::monte_carlo(20_000, 5);
        let g = KGraph::new(1, vec![[R, L]]).unwrap();
        let a = integrate_all(1, &cfg).unwrap();
        let b = integrate_all(1, &cfg).unwrap();
        assert_eq!(a, b);
        let w = kontsevich_weight(&g, &cfg).unwrap();
        assert_eq!(w.value.to_bits(), a[1].1.value.to_bits());
        assert!(export_cache().iter().any(|e| e.config == cfg.key()));
    }

    #[test]
    fn guards() {
        let g = enumerate_kgraphs(3).unwrap().remove(0);
        assert!(matches!(kontsevich_weight(&g, &WeightConfig::default()), Err(Error::ResourceGuard(_))));
        let tight = WeightConfig { tolerance: 1e-30, ..WeightConfig::monte_carlo(1000, 1) };
        let g = KGraph::new(1, vec![[L, R]]).unwrap();
        assert!(matches!(kontsevich_weight(&g, &tight), Err(Error::IntegrationFailure(_))));
    }
}
