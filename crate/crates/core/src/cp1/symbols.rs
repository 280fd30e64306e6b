use nalgebra::DMatrix;
use num::complex::Complex64;
use num::{One, Zero};
use serde::Serialize;

use super::context::{
    coherent_vector, coherent_vector_at, covariant_symbol, covariant_symbol_at, epsilon_at, operator_norm,
    toeplitz_matrix, Cp1Context, Grid, OpMatrix, QuadSpec, SpherePoint,
};
use super::observable::{ObservableFn, SymTerm};
use crate::error::{Error, Result};

/// Below this the overlap of two coherent vectors is treated as underflowed.
pub const OVERLAP_CUTOFF: f64 = 1e-250;

/// `I^{(m)}(f)(z0) = σ(T_f)(z0)`.
pub fn berezin_transform_num(f: &ObservableFn, z0: Complex64, ctx: &Cp1Context) -> Result<Complex64> {
    Ok(covariant_symbol(&toeplitz_matrix(f, ctx)?, z0, ctx))
}

/// `(1/u_m) ∫ |⟨e_y, e_x⟩|² f(y) Ω(y)` on the context grid.
pub fn berezin_transform_integral(f: &ObservableFn, z0: Complex64, ctx: &Cp1Context) -> Complex64 {
    let ex = coherent_vector(z0, ctx);
    let u = ex.norm_squared();
    ctx.grid().integrate(|p| {
        let ey = coherent_vector_at(p, Complex64::one(), ctx);
        ey.dotc(&ex).norm_sqr() * f.eval_sphere(p.cos_theta(), p.phi)
    }) / u
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub defect: f64,
}

/// `tr T_f` against `∫ f ε Ω`, both exact for term lists.
pub fn trace_identity(f: &ObservableFn, ctx: &Cp1Context) -> Result<TraceCheck> {
    let lhs = toeplitz_matrix(f, ctx)?.trace();
    let eps = ctx.dim as f64 / ctx.vol;
    let rhs = match f {
        ObservableFn::Terms(_) => f.integral()? * eps,
        ObservableFn::Callback(_) => ctx.grid().integrate(|p| f.eval_sphere(p.cos_theta(), p.phi)) * eps,
    };
    Ok(TraceCheck { lhs, rhs, defect: (lhs - rhs).norm() })
}

/// `|tr(A† T_f) − ∫ conj(σ(A)) f ε Ω|`, the symbol integral by quadrature.
pub fn adjointness_check(a: &OpMatrix, f: &ObservableFn, ctx: &Cp1Context) -> Result<f64> {
    if a.m != ctx.m {
        return Err(Error::DimensionMismatch(a.m, ctx.m));
    }
    let tf = toeplitz_matrix(f, ctx)?;
    let hs = (a.mat.adjoint() * &tf.mat).trace();
    let integral = ctx.grid().integrate(|p| {
        let s = covariant_symbol_at(a, p, Complex64::one(), ctx);
        s.conj() * f.eval_sphere(p.cos_theta(), p.phi) * epsilon_at(p, Complex64::one(), ctx)
    });
    Ok((hs - integral).norm())
}

/// `∫ f(x) P_x ε(x) Ω(x)` with `P_x` the coherent projector, on the given grid.
pub fn contravariant_operator(f: &ObservableFn, ctx: &Cp1Context, spec: QuadSpec) -> Result<OpMatrix> {
    let grid = Grid::new(spec)?;
    let d = ctx.dim;
    let mut acc = DMatrix::<Complex64>::zeros(d, d);
    for (p, w) in grid.points() {
        let e = coherent_vector_at(&p, Complex64::one(), ctx);
        let proj = &e * e.adjoint() / Complex64::new(e.norm_squared(), 0.0);
        let weight = f.eval_sphere(p.cos_theta(), p.phi) * epsilon_at(&p, Complex64::one(), ctx) * w;
        acc += proj * weight;
    }
    OpMatrix::new(ctx.m, acc)
}

/// `‖∫ f P_x Ω_ε − T_f‖` on the context grid.
pub fn contravariant_reconstruct(f: &ObservableFn, ctx: &Cp1Context) -> Result<f64> {
    contravariant_reconstruct_on(f, ctx, ctx.quad)
}

pub fn contravariant_reconstruct_on(f: &ObservableFn, ctx: &Cp1Context, spec: QuadSpec) -> Result<f64> {
    let c = contravariant_operator(f, ctx, spec)?;
    let t = toeplitz_matrix(f, ctx)?;
    Ok(operator_norm(&OpMatrix { m: ctx.m, mat: c.mat - t.mat }))
}

/// `R^{(m)}(f, g)(z0) = σ(T_f T_g)(z0)`.
pub fn twisted_product(f: &ObservableFn, g: &ObservableFn, z0: Complex64, ctx: &Cp1Context) -> Result<Complex64> {
    let tf = toeplitz_matrix(f, ctx)?;
    let tg = toeplitz_matrix(g, ctx)?;
    Ok(covariant_symbol(&OpMatrix { m: ctx.m, mat: tf.mat * tg.mat }, z0, ctx))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TwistedIntegral {
    pub value: Complex64,
    /// Grid nodes dropped because `|⟨e_x, e_y⟩|` fell below [`OVERLAP_CUTOFF`].
    pub skipped: usize,
}

/// `(1/u_m) ∫ ⟨e_x, T_f e_y⟩⟨e_y, T_g e_x⟩ Ω(y)`, the two-point form of the
/// twisted product, on the context grid.
pub fn twisted_product_integral(
    f: &ObservableFn,
    g: &ObservableFn,
    z0: Complex64,
    ctx: &Cp1Context,
) -> Result<TwistedIntegral> {
    let tf = toeplitz_matrix(f, ctx)?;
    let tg = toeplitz_matrix(g, ctx)?;
    let ex = coherent_vector(z0, ctx);
    let u = ex.norm_squared();
    let left = tf.mat.adjoint() * &ex;
    let right = &tg.mat * &ex;
    let mut value = Complex64::zero();
    let mut skipped = 0;
    for (p, w) in ctx.grid().points() {
        let ey = coherent_vector_at(&p, Complex64::one(), ctx);
        if ex.dotc(&ey).norm() < OVERLAP_CUTOFF {
            skipped += 1;
            continue;
        }
        value += left.dotc(&ey) * ey.dotc(&right) * w;
    }
    Ok(TwistedIntegral { value: value / u, skipped })
}

/// Largest level accepted by [`surjectivity_rank`].
pub const SURJECTIVITY_MAX_LEVEL: usize = 8;

/// Rank of the span of `T` over the symbols `z^a z̄^b (1+zz̄)^{−max(a,b)}`, `0 ≤ a, b ≤ m`.
pub fn surjectivity_rank(ctx: &Cp1Context) -> Result<usize> {
    let m = ctx.m;
    if m > SURJECTIVITY_MAX_LEVEL {
        return Err(Error::ResourceGuard(format!(
            "surjectivity rank is computed for m <= {SURJECTIVITY_MAX_LEVEL}, got {m}"
        )));
    }
    let d = ctx.dim;
    let mut cols = DMatrix::<Complex64>::zeros(d * d, d * d);
    for a in 0..=m as u32 {
        for b in 0..=m as u32 {
            let f = ObservableFn::from_terms(vec![SymTerm::new(1.0, a, b, a.max(b))])?;
            let t = toeplitz_matrix(&f, ctx)?;
            let col = a as usize * d + b as usize;
            for (i, v) in t.mat.iter().enumerate() {
                cols[(i, col)] = *v;
            }
        }
    }
    let sv = cols.singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    Ok(sv.iter().filter(|&&s| s > top * 1e-10).count())
}

/// Deterministic sample points in the chart from a seed, uniform on the sphere.
pub fn sample_points(n: usize, seed: u64) -> Vec<Complex64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: f64 = rng.gen_range(-0.999..1.0);
            SpherePoint::from_cos(x, rng.gen_range(0.0..std::f64::consts::TAU)).chart()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp1::context::make_context;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn berezin_examples() {
        for m in [2, 5, 12] {
            let c = make_context(m).unwrap();
            let one = berezin_transform_num(&ObservableFn::constant(1.0), Complex64::new(0.4, 2.0), &c).unwrap();
            assert!((one - 1.0).norm() < 1e-12);
            let h = berezin_transform_num(&ObservableFn::height(), Complex64::zero(), &c).unwrap();
            let mf = m as f64;
            assert!((h.re - mf / (mf + 2.0)).abs() < 1e-12);
            assert!((mf * (h.re - 1.0) + 2.0).abs() < 4.0 / mf);
        }
    }

    #[test]
    fn berezin_integral_path() {
        let c = make_context(6).unwrap();
        let f = ObservableFn::parse("(1-zz)/(1+zz) * (z + zbar)/(1+zz) + 0.25 i * z/(1+zz)").unwrap();
        for z in sample_points(10, 4) {
            let a = berezin_transform_num(&f, z, &c).unwrap();
            let b = berezin_transform_integral(&f, z, &c);
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn symbol_inequalities() {
        let c = make_context(9).unwrap();
        let f = ObservableFn::x1().mul(&ObservableFn::height()).unwrap().add(&ObservableFn::x2()).unwrap();
        let norm = operator_norm(&toeplitz_matrix(&f, &c).unwrap());
        let sup = f.sup_norm_sampled(200);
        assert!(norm <= sup + 1e-9);
        for z in sample_points(50, 1) {
            assert!(berezin_transform_num(&f, z, &c).unwrap().norm() <= norm + 1e-12);
        }
    }

    #[test]
    fn trace_examples() {
        for m in [1, 6, 30] {
            let c = make_context(m).unwrap();
            let t = trace_identity(&ObservableFn::constant(1.0), &c).unwrap();
            assert!((t.lhs.re - (m as f64 + 1.0)).abs() < 1e-12 && t.defect < 1e-10);
            let t = trace_identity(&ObservableFn::height(), &c).unwrap();
            assert!(t.lhs.norm() < 1e-12 && t.rhs.norm() < 1e-12);
            let f = ObservableFn::parse("1/(1+zz) + 3 * zz^2/(1+zz)^3 - 2i * z zbar/(1+zz)^2").unwrap();
            assert!(trace_identity(&f, &c).unwrap().defect < 1e-10);
        }
    }

    #[test]
    fn adjointness() {
        use rand::{Rng, SeedableRng};
        let m = 8;
        let c = make_context(m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let raw =
            DMatrix::from_fn(m + 1, m + 1, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let herm = OpMatrix::new(m, &raw + raw.adjoint()).unwrap();
        let h = ObservableFn::height();
        assert!(adjointness_check(&herm, &h, &c).unwrap() < 1e-8);
        let id = adjointness_check(&OpMatrix::identity(m), &h, &c).unwrap();
        assert!(id < 1e-10);
        let g = ObservableFn::x1();
        let tg = toeplitz_matrix(&g, &c).unwrap();
        let th = toeplitz_matrix(&h, &c).unwrap();
        let d1 = adjointness_check(&tg, &h, &c).unwrap();
        let d2 = adjointness_check(&th, &g, &c).unwrap();
        assert!(d1 < 1e-10 && d2 < 1e-10);
        assert!(((tg.mat.adjoint() * &th.mat).trace() - (th.mat.adjoint() * &tg.mat).trace()).norm() < 1e-12);
    }

    #[test]
    fn contravariant() {
        let c = make_context(4).unwrap();
        assert!(contravariant_reconstruct(&ObservableFn::constant(1.0), &c).unwrap() < 1e-8);
        assert!(contravariant_reconstruct(&ObservableFn::height(), &c).unwrap() < 1e-6);
        let f = ObservableFn::callback(|z: Complex64| Complex64::new((3.0 * z.re / (1.0 + z.norm_sqr())).exp(), 0.0));
        let ctx = Cp1Context::with_quad(4, QuadSpec { n_theta: 40, n_phi: 40 }).unwrap();
        let coarse = contravariant_operator(&f, &ctx, QuadSpec { n_theta: 6, n_phi: 6 }).unwrap();
        let mid = contravariant_operator(&f, &ctx, QuadSpec { n_theta: 10, n_phi: 10 }).unwrap();
        let t = toeplitz_matrix(&f, &ctx).unwrap();
        let e1 = (&coarse.mat - &t.mat).norm();
        let e2 = (&mid.mat - &t.mat).norm();
        assert!(e2 < e1, "{e2} !< {e1}");
    }

    #[test]
    fn twisted() {
        let m = 8;
        let c = make_context(m).unwrap();
        let h = ObservableFn::height();
        let one = ObservableFn::constant(1.0);
        let z = Complex64::new(0.3, -0.8);
        let r = twisted_product(&h, &one, z, &c).unwrap();
        assert!((r - berezin_transform_num(&h, z, &c).unwrap()).norm() < 1e-12);
        let r0 = twisted_product(&h, &h, Complex64::zero(), &c).unwrap();
        let q = m as f64 / (m as f64 + 2.0);
        assert!((r0.re - q * q).abs() < 1e-12);
        let g = ObservableFn::x1();
        for z in sample_points(5, 2) {
            let a = twisted_product(&h, &g, z, &c).unwrap();
            let b = twisted_product_integral(&h, &g, z, &c).unwrap();
            assert_eq!(b.skipped, 0);
            assert!((a - b.value).norm() < 1e-6);
        }
    }

    #[test]
    fn surjectivity() {
        assert_eq!(surjectivity_rank(&make_context(1).unwrap()).unwrap(), 4);
        assert_eq!(surjectivity_rank(&make_context(2).unwrap()).unwrap(), 9);
        for m in 3..=8 {
            let r = surjectivity_rank(&make_context(m).unwrap()).unwrap();
            assert!(r <= (m + 1) * (m + 1));
        }
        assert!(matches!(surjectivity_rank(&make_context(9).unwrap()), Err(Error::ResourceGuard(_))));
    }

    #[test]
    fn sample_points_deterministic() {
        assert_eq!(sample_points(5, 1), sample_points(5, 1));
        assert!(sample_points(100, 1).iter().all(|z| z.norm().is_finite()));
        let _ = PI;
    }

    fn real_linear() -> impl Strategy<Value = ObservableFn> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b, c, d)| {
            let s = |k: f64| Complex64::new(k, 0.0);
            ObservableFn::constant(a)
                .add(&ObservableFn::x1().scale(s(b)).unwrap())
                .unwrap()
                .add(&ObservableFn::x2().scale(s(c)).unwrap())
                .unwrap()
                .add(&ObservableFn::height().scale(s(d)).unwrap())
                .unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn positivity(f in real_linear(), m in 1usize..12) {
            let c = make_context(m).unwrap();
            let sq = f.mul(&f).unwrap();
            let t = toeplitz_matrix(&sq, &c).unwrap();
            let eig = t.mat.clone().symmetric_eigen().eigenvalues;
            prop_assert!(eig.iter().all(|&l| l >= -1e-10));
        }

        #[test]
        fn norm_bounds(f in real_linear(), g in real_linear(), m in 1usize..12) {
            let c = make_context(m).unwrap();
            let fg = f.mul(&g).unwrap();
            let t = toeplitz_matrix(&fg, &c).unwrap();
            prop_assert!(t.hermiticity_defect() < 1e-12);
            let norm = operator_norm(&t);
            prop_assert!(norm <= fg.sup_norm_sampled(120) + 1e-9);
            for z in sample_points(8, m as u64) {
                prop_assert!(covariant_symbol(&t, z, &c).norm() <= norm + 1e-12);
            }
        }

        #[test]
        fn resolution_of_identity(m in 1usize..10) {
            let c = make_context(m).unwrap();
            prop_assert!(contravariant_reconstruct(&ObservableFn::constant(1.0), &c).unwrap() < 1e-8);
        }
    }
}
