use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use num::complex::Complex64;
use num::{BigInt, BigRational, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::observable::{fact, ObservableFn};
use crate::error::{Error, Result};

/// Quadrature grid sizes: Gauss-Legendre nodes in `cos θ` times uniform azimuths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl QuadSpec {
    pub fn for_level(m: usize) -> Self {
        QuadSpec { n_theta: 2 * (m + 3), n_phi: 2 * (m + 3) }
    }

    pub fn refined(&self) -> Self {
        QuadSpec { n_theta: 2 * self.n_theta, n_phi: 2 * self.n_phi }
    }
}

/// Tensor-product grid on the sphere; weights already include `Ω = ½ dx dφ`.
#[derive(Clone, Debug)]
pub struct Grid {
    pub spec: QuadSpec,
    pub x: Vec<(f64, f64)>,
    pub phi: Vec<f64>,
    pub w_phi: f64,
}

impl Grid {
    pub fn new(spec: QuadSpec) -> Result<Self> {
        let n = NonZeroUsize::new(spec.n_theta).ok_or_else(|| Error::Invalid("n_theta must be positive".into()))?;
        if spec.n_phi == 0 {
            return Err(Error::Invalid("n_phi must be positive".into()));
        }
        let gl = GaussLegendre::new(n);
        let mut x: Vec<(f64, f64)> = gl.as_node_weight_pairs().to_vec();
        x.sort_by(|a, b| a.0.total_cmp(&b.0));
        let phi = (0..spec.n_phi).map(|j| 2.0 * PI * j as f64 / spec.n_phi as f64).collect();
        Ok(Grid { spec, x, phi, w_phi: PI / spec.n_phi as f64 })
    }

    /// All nodes as `(point, weight)`, ordered by `cos θ` then azimuth.
    pub fn points(&self) -> impl Iterator<Item = (SpherePoint, f64)> + '_ {
        self.x
            .iter()
            .flat_map(move |&(x, wx)| self.phi.iter().map(move |&phi| (SpherePoint::from_cos(x, phi), wx * self.w_phi)))
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `∫ g Ω` by the grid.
    pub fn integrate<F: Fn(&SpherePoint) -> Complex64 + Sync>(&self, g: F) -> Complex64 {
        let rows: Vec<Complex64> = self
            .x
            .par_iter()
            .map(|&(x, wx)| {
                self.phi.iter().map(|&phi| g(&SpherePoint::from_cos(x, phi))).sum::<Complex64>() * (wx * self.w_phi)
            })
            .collect();
        rows.into_iter().sum()
    }
}

/// Point on the sphere through `ρ = sin(θ/2)`, `κ = cos(θ/2)` and azimuth,
/// so that `z = (ρ/κ) e^{iφ}` and the south pole `z = ∞` is `κ = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpherePoint {
    pub rho: f64,
    pub kappa: f64,
    pub phi: f64,
}

impl SpherePoint {
    pub fn from_chart(z: Complex64) -> Self {
        let r = z.norm();
        let kappa = 1.0 / r.hypot(1.0);
        SpherePoint { rho: r * kappa, kappa, phi: if r == 0.0 { 0.0 } else { z.arg() } }
    }

    pub fn from_cos(x: f64, phi: f64) -> Self {
        SpherePoint { rho: ((1.0 - x) / 2.0).max(0.0).sqrt(), kappa: ((1.0 + x) / 2.0).max(0.0).sqrt(), phi }
    }

    /// `cos θ`, the height coordinate.
    pub fn cos_theta(&self) -> f64 {
        self.kappa * self.kappa - self.rho * self.rho
    }

    pub fn chart(&self) -> Complex64 {
        Complex64::from_polar(self.rho / self.kappa, self.phi)
    }
}

/// Level-`m` quantization data on the sphere.
#[derive(Clone, Debug)]
pub struct Cp1Context {
    pub m: usize,
    pub dim: usize,
    /// `‖z^k‖² = 2π·k!(m−k)!/(m+1)!`.
    pub norms: Vec<BigRational>,
    pub quad: QuadSpec,
    pub vol: f64,
    /// Callback observables must agree between the grid and its refinement to this.
    pub tolerance: f64,
    grid: Grid,
    /// `½·ln((m+1)·C(m,k)/2π)`, the log of `1/√(norm_k)`.
    log_inv_norm: Vec<f64>,
}

/// Builds the level-`m` context with the default grid.
pub fn make_context(m: usize) -> Result<Cp1Context> {
    Cp1Context::with_quad(m, QuadSpec::for_level(m))
}

impl Cp1Context {
    pub fn with_quad(m: usize, quad: QuadSpec) -> Result<Self> {
        if m < 1 {
            return Err(Error::Invalid("level m must be at least 1".into()));
        }
        let mm = m as u32;
        let norms = (0..=mm).map(|k| BigRational::new(fact(k) * fact(mm - k), fact(mm + 1))).collect();
        let mut ln_fact = vec![0.0; m + 2];
        for k in 1..m + 2 {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        let log_inv_norm =
            (0..=m).map(|k| 0.5 * (ln_fact[m + 1] - ln_fact[k] - ln_fact[m - k] - (2.0 * PI).ln())).collect();
        Ok(Cp1Context {
            m,
            dim: m + 1,
            norms,
            quad,
            vol: 2.0 * PI,
            tolerance: 1e-8,
            grid: Grid::new(quad)?,
            log_inv_norm,
        })
    }

    /// Squared norm of `z^k` as a float; `norms[k]` holds it divided by `2π`.
    pub fn norm_sq(&self, k: usize) -> f64 {
        2.0 * PI * self.norms[k].to_f64().unwrap()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Values of the orthonormal sections `ŝ_k = z^k/‖z^k‖` at `p` in the
    /// unit-norm frame with real positive phase against the chart frame.
    pub fn sections(&self, p: &SpherePoint) -> Vec<Complex64> {
        let m = self.m;
        (0..=m)
            .map(|k| {
                let mag = self.log_inv_norm[k].exp() * p.rho.powi(k as i32) * p.kappa.powi((m - k) as i32);
                Complex64::from_polar(mag, k as f64 * p.phi)
            })
            .collect()
    }

    /// `Σ_p w_p conj(ŝ_j(p)) ket_k(p)` with `ket` filling row `k` of the ket values.
    pub(crate) fn assemble<F>(&self, grid: &Grid, ket: F) -> DMatrix<Complex64>
    where
        F: Fn(&SpherePoint, &[Complex64], &mut [Complex64]) + Sync,
    {
        let d = self.dim;
        let parts: Vec<DMatrix<Complex64>> = grid
            .x
            .par_iter()
            .map(|&(x, wx)| {
                let mut acc = DMatrix::<Complex64>::zeros(d, d);
                let mut kv = vec![Complex64::zero(); d];
                for &phi in &grid.phi {
                    let p = SpherePoint::from_cos(x, phi);
                    let s = self.sections(&p);
                    ket(&p, &s, &mut kv);
                    let w = wx * grid.w_phi;
                    for j in 0..d {
                        let bra = s[j].conj() * w;
                        for k in 0..d {
                            acc[(j, k)] += bra * kv[k];
                        }
                    }
                }
                acc
            })
            .collect();
        parts.into_iter().fold(DMatrix::zeros(d, d), |a, b| a + b)
    }
}

/// `(m+1)×(m+1)` operator in the orthonormal monomial basis.
#[derive(Clone, Debug, PartialEq)]
pub struct OpMatrix {
    pub m: usize,
    pub mat: DMatrix<Complex64>,
}

impl OpMatrix {
    pub fn new(m: usize, mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != m + 1 || mat.ncols() != m + 1 {
            return Err(Error::DimensionMismatch(mat.nrows(), m + 1));
        }
        Ok(OpMatrix { m, mat })
    }

    pub fn identity(m: usize) -> Self {
        OpMatrix { m, mat: DMatrix::identity(m + 1, m + 1) }
    }

    pub fn zeros(m: usize) -> Self {
        OpMatrix { m, mat: DMatrix::zeros(m + 1, m + 1) }
    }

    pub fn adjoint(&self) -> Self {
        OpMatrix { m: self.m, mat: self.mat.adjoint() }
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    /// `‖A − A†‖` in operator norm.
    pub fn hermiticity_defect(&self) -> f64 {
        operator_norm(&OpMatrix { m: self.m, mat: &self.mat - self.mat.adjoint() })
    }
}

#[derive(Serialize, Deserialize)]
struct OpMatrixJson {
    m: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for OpMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.m + 1;
        let entries =
            (0..d).flat_map(|j| (0..d).map(move |k| (j, k))).map(|(j, k)| [self.mat[(j, k)].re, self.mat[(j, k)].im]);
        OpMatrixJson { m: self.m, entries: entries.collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for OpMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = OpMatrixJson::deserialize(d)?;
        let n = raw.m + 1;
        if raw.entries.len() != n * n {
            return Err(serde::de::Error::custom(format!("expected {} entries, got {}", n * n, raw.entries.len())));
        }
        let mat = DMatrix::from_row_iterator(n, n, raw.entries.iter().map(|e| Complex64::new(e[0], e[1])));
        Ok(OpMatrix { m: raw.m, mat })
    }
}

/// `T_f = Π(f·)`: exact Beta integrals for term lists, grid quadrature for callbacks.
pub fn toeplitz_matrix(f: &ObservableFn, ctx: &Cp1Context) -> Result<OpMatrix> {
    match f {
        ObservableFn::Terms(terms) => {
            let m = ctx.m as u32;
            let d = ctx.dim;
            let mut mat = DMatrix::<Complex64>::zeros(d, d);
            let top = (m + terms.iter().map(|t| t.c).max().unwrap_or(0) + 1) as usize;
            let facts: Vec<BigInt> = (0..=top as u32).map(fact).collect();
            for t in terms {
                if !t.is_bounded() {
                    return Err(Error::UnboundedSymbol(format!("z^{} zbar^{} / (1+zz)^{}", t.a, t.b, t.c)));
                }
                // ⟨z^j, z^a z̄^b (1+zz̄)^{-c} z^k⟩ needs p = k + a = j + b.
                for k in 0..=m {
                    let p = k + t.a;
                    if p < t.b || p - t.b > m {
                        continue;
                    }
                    let j = p - t.b;
                    let (c, pu) = (t.c as usize, p as usize);
                    let beta = BigRational::new(
                        facts[pu].clone() * &facts[c + m as usize - pu],
                        facts[c + m as usize + 1].clone(),
                    );
                    let num = &beta * &beta * BigRational::from(facts[m as usize + 1].clone() * &facts[m as usize + 1]);
                    let den = facts[j as usize].clone()
                        * &facts[(m - j) as usize]
                        * &facts[k as usize]
                        * &facts[(m - k) as usize];
                    let e = (num / BigRational::from(den)).to_f64().unwrap().sqrt();
                    mat[(j as usize, k as usize)] += t.coeff * e;
                }
            }
            Ok(OpMatrix { m: ctx.m, mat })
        }
        ObservableFn::Callback(_) => {
            let grid_matrix = |grid: &Grid| {
                ctx.assemble(grid, |p, s, out| {
                    let v = f.eval(p.chart());
                    for (o, si) in out.iter_mut().zip(s) {
                        *o = v * si;
                    }
                })
            };
            let coarse = grid_matrix(ctx.grid());
            let fine = grid_matrix(&Grid::new(ctx.quad.refined())?);
            let err = operator_norm(&OpMatrix { m: ctx.m, mat: &fine - &coarse });
            if !(err <= ctx.tolerance) {
                return Err(Error::QuadratureTolerance(format!(
                    "Toeplitz quadrature changed by {err:.3e} on refinement"
                )));
            }
            Ok(OpMatrix { m: ctx.m, mat: fine })
        }
    }
}

/// Largest singular value.
pub fn operator_norm(a: &OpMatrix) -> f64 {
    if a.mat.iter().all(|x| *x == Complex64::zero()) {
        return 0.0;
    }
    a.mat.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Coherent vector for the unit-norm fiber representative over `z0`;
/// `⟨e, s⟩ = ψ_s` with the inner product antilinear in the first slot.
pub fn coherent_vector(z0: Complex64, ctx: &Cp1Context) -> DVector<Complex64> {
    coherent_vector_at(&SpherePoint::from_chart(z0), Complex64::new(1.0, 0.0), ctx)
}

/// Coherent vector for the fiber representative `fiber · α₀`, `α₀` the unit one.
pub fn coherent_vector_at(p: &SpherePoint, fiber: Complex64, ctx: &Cp1Context) -> DVector<Complex64> {
    let scale = fiber.powu(ctx.m as u32);
    DVector::from_iterator(ctx.dim, ctx.sections(p).into_iter().map(|s| (scale * s).conj()))
}

/// `⟨e, A e⟩ / ⟨e, e⟩`.
pub fn covariant_symbol(a: &OpMatrix, z0: Complex64, ctx: &Cp1Context) -> Complex64 {
    covariant_symbol_at(a, &SpherePoint::from_chart(z0), Complex64::new(1.0, 0.0), ctx)
}

pub fn covariant_symbol_at(a: &OpMatrix, p: &SpherePoint, fiber: Complex64, ctx: &Cp1Context) -> Complex64 {
    let e = coherent_vector_at(p, fiber, ctx);
    (e.adjoint() * &a.mat * &e)[(0, 0)] / e.norm_squared()
}

/// `h(e_α, e_α)(x) / ⟨e_α, e_α⟩`, the value at `x` of the pointwise norm of the
/// coherent section over `x` divided by its global norm.
pub fn epsilon_function(z0: Complex64, ctx: &Cp1Context) -> f64 {
    epsilon_at(&SpherePoint::from_chart(z0), Complex64::new(1.0, 0.0), ctx)
}

pub fn epsilon_at(p: &SpherePoint, fiber: Complex64, ctx: &Cp1Context) -> f64 {
    let e = coherent_vector_at(p, fiber, ctx);
    // The section e evaluated at p in the frame dual to the same fiber point.
    let scale = fiber.powu(ctx.m as u32);
    let value: Complex64 = ctx.sections(p).iter().zip(e.iter()).map(|(s, c)| scale * s * c).sum();
    value.norm_sqr() / fiber.norm_sqr().powi(ctx.m as i32) / e.norm_squared()
}

/// `u_m = ⟨e, e⟩` at `z0`.
pub fn bergman_diagonal(z0: Complex64, ctx: &Cp1Context) -> f64 {
    coherent_vector(z0, ctx).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::One;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| SpherePoint::from_cos(rng.gen_range(-0.999..1.0), rng.gen_range(0.0..2.0 * PI)).chart())
            .collect()
    }

    #[test]
    fn norms() {
        let c = make_context(1).unwrap();
        assert_eq!(c.dim, 2);
        assert_eq!(c.norms, vec![BigRational::new(1.into(), 2.into()); 2]);
        assert!((c.norm_sq(0) - PI).abs() < 1e-15);
        let c = make_context(2).unwrap();
        let third = BigRational::new(1.into(), 3.into());
        let sixth = BigRational::new(1.into(), 6.into());
        assert_eq!(c.norms, vec![third.clone(), sixth, third]);
        for m in [3, 7, 40] {
            assert_eq!(make_context(m).unwrap().dim, m + 1);
        }
        assert!(make_context(0).is_err());
    }

    #[test]
    fn norms_match_quadrature() {
        let c = make_context(6).unwrap();
        for k in 0..=6 {
            // ∫ |ŝ_k|² Ω = 1
            let v = c.grid().integrate(|p| Complex64::new(c.sections(p)[k].norm_sqr(), 0.0));
            assert!((v.re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn toeplitz_examples() {
        for m in [1, 4, 9] {
            let c = make_context(m).unwrap();
            let id = toeplitz_matrix(&ObservableFn::constant(1.0), &c).unwrap();
            assert!((&id.mat - DMatrix::<Complex64>::identity(m + 1, m + 1)).norm() < 1e-14);
            let h = toeplitz_matrix(&ObservableFn::height(), &c).unwrap();
            for j in 0..=m {
                for k in 0..=m {
                    let want = if j == k { (m as f64 - 2.0 * k as f64) / (m as f64 + 2.0) } else { 0.0 };
                    assert!((h.mat[(j, k)] - want).norm() < 1e-14);
                }
            }
            assert!((operator_norm(&h) - m as f64 / (m as f64 + 2.0)).abs() < 1e-12);
        }
        assert_eq!(operator_norm(&OpMatrix::zeros(3)), 0.0);
        assert!((operator_norm(&OpMatrix::identity(3)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exact_and_quadrature_paths_agree() {
        let c = make_context(7).unwrap();
        let f = ObservableFn::parse("0.3 * z zbar^2 / (1+zz)^2 + (2 - 1i) * zbar / (1+zz) + zz/(1+zz)^3").unwrap();
        let exact = toeplitz_matrix(&f, &c).unwrap();
        let g = f.clone();
        let cb = ObservableFn::callback(move |z| g.eval(z));
        let quad = toeplitz_matrix(&cb, &c).unwrap();
        assert!((&exact.mat - &quad.mat).norm() < 1e-12);
        let bumpy =
            ObservableFn::callback(|z: Complex64| Complex64::new((1.0 / (1.0 + z.norm_sqr()) * 9.0).cos(), 0.0));
        let tight = Cp1Context::with_quad(4, QuadSpec { n_theta: 4, n_phi: 4 }).unwrap();
        assert!(matches!(toeplitz_matrix(&bumpy, &tight), Err(Error::QuadratureTolerance(_))));
    }

    #[test]
    fn hermitian_iff_real() {
        let c = make_context(8).unwrap();
        let real = ObservableFn::x1().mul(&ObservableFn::height()).unwrap().add(&ObservableFn::x2()).unwrap();
        assert!(toeplitz_matrix(&real, &c).unwrap().hermiticity_defect() < 1e-12);
        let cplx = ObservableFn::parse("z / (1+zz)").unwrap();
        assert!(toeplitz_matrix(&cplx, &c).unwrap().hermiticity_defect() > 0.1);
    }

    #[test]
    fn json_round_trip() {
        let c = make_context(2).unwrap();
        let a = toeplitz_matrix(&ObservableFn::parse("1i * z/(1+zz) + 1").unwrap(), &c).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert!(s.starts_with("{\"m\":2,\"entries\":[["));
        let b: OpMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
        assert!(serde_json::from_str::<OpMatrix>("{\"m\":1,\"entries\":[[1,0]]}").is_err());
    }

    #[test]
    fn coherent_states() {
        let m = 6;
        let c = make_context(m).unwrap();
        let e0 = coherent_vector(Complex64::zero(), &c);
        assert!(e0.iter().skip(1).all(|x| x.norm() == 0.0) && e0[0].norm() > 0.0);
        let u = (m as f64 + 1.0) / (2.0 * PI);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for z in random_points(50, 7) {
            let e = coherent_vector(z, &c);
            assert!((e.norm_squared() - u).abs() < 1e-10);
            // reproducing: ⟨e, s⟩ is s(z) in the unit frame, from the chart formula
            let s: Vec<Complex64> =
                (0..=m).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let lhs: Complex64 = e.iter().zip(&s).map(|(a, b)| a.conj() * b).sum();
            let chart: Complex64 =
                s.iter().enumerate().map(|(k, sk)| sk * z.powu(k as u32) / c.norm_sq(k).sqrt()).sum();
            let rhs = chart * (1.0 + z.norm_sqr()).powf(-(m as f64) / 2.0);
            assert!((lhs - rhs).norm() < 1e-10);
            // e_{cα} = conj(c)^m e_α
            let cc = Complex64::new(0.7, -1.3);
            let scaled = coherent_vector_at(&SpherePoint::from_chart(z), cc, &c);
            assert!((&scaled - &e * cc.conj().powu(m as u32)).norm() < 1e-10);
        }
    }

    #[test]
    fn symbols_and_epsilon() {
        let m = 5;
        let c = make_context(m).unwrap();
        let h = toeplitz_matrix(&ObservableFn::height(), &c).unwrap();
        let z0 = Complex64::zero();
        assert!((covariant_symbol(&h, z0, &c).re - m as f64 / (m as f64 + 2.0)).abs() < 1e-14);
        let t3 = toeplitz_matrix(&ObservableFn::constant(3.0), &c).unwrap();
        let eps = (m as f64 + 1.0) / (2.0 * PI);
        for z in random_points(50, 11) {
            assert!((covariant_symbol(&OpMatrix::identity(m), z, &c) - Complex64::one()).norm() < 1e-12);
            assert!((covariant_symbol(&t3, z, &c) - 3.0).norm() < 1e-12);
            assert!((epsilon_function(z, &c) - eps).abs() < 1e-10);
            let p = SpherePoint::from_chart(z);
            let phase = Complex64::from_polar(1.0, 2.1);
            assert!((covariant_symbol_at(&h, &p, phase, &c) - covariant_symbol(&h, z, &c)).norm() < 1e-12);
            assert!((epsilon_at(&p, phase, &c) - epsilon_function(z, &c)).abs() < 1e-12);
        }
        let total = c.grid().integrate(|p| Complex64::new(epsilon_at(p, Complex64::one(), &c), 0.0));
        assert!((total.re - (m as f64 + 1.0)).abs() < 1e-8);
    }
}
