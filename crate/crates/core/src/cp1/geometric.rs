use num::complex::Complex64;

use super::context::{operator_norm, toeplitz_matrix, Cp1Context, Grid, OpMatrix};
use super::observable::ObservableFn;
use crate::error::{Error, Result};

/// `X_f^z = X_SIGN · i (1+zz̄)² ∂̄f / m`, the Hamiltonian field of `f` for `m·ω`.
pub const X_SIGN: f64 = 1.0;

/// `Q_f = Π(∇_{X_f} + i f)` on holomorphic sections, by quadrature.
pub fn geometric_quantization(f: &ObservableFn, ctx: &Cp1Context) -> Result<OpMatrix> {
    let coarse = q_on(f, ctx, ctx.grid())?;
    let fine = q_on(f, ctx, &Grid::new(ctx.quad.refined())?)?;
    let err = operator_norm(&OpMatrix { m: ctx.m, mat: &fine.mat - &coarse.mat });
    if !(err <= ctx.tolerance) {
        return Err(Error::QuadratureTolerance(format!("geometric quantization changed by {err:.3e} on refinement")));
    }
    Ok(fine)
}

fn q_on(f: &ObservableFn, ctx: &Cp1Context, grid: &Grid) -> Result<OpMatrix> {
    let dbar = f.d_zbar()?;
    let m = ctx.m;
    let mf = m as f64;
    let i = Complex64::new(0.0, 1.0);
    let inv_norm: Vec<f64> = (0..=m).map(|k| 1.0 / ctx.norm_sq(k).sqrt()).collect();
    let mat = ctx.assemble(grid, |p, s, out| {
        let z = p.chart();
        let u = z.norm_sqr();
        let fv = f.eval_sphere(p.cos_theta(), p.phi);
        // X^z ∇_z ŝ_k in the unit frame: ∇_z z^k = (k z^{k−1} + (k−m) z^k z̄)/(1+zz̄),
        // and X^z carries (1+zz̄)², so one power of (1+zz̄) survives.
        let xz = dbar.eval_sphere(p.cos_theta(), p.phi) * (X_SIGN * i / mf);
        let frame = (1.0 + u).powf(1.0 - mf / 2.0);
        for (k, o) in out.iter_mut().enumerate() {
            let kf = k as f64;
            let lower = if k == 0 { Complex64::new(0.0, 0.0) } else { z.powu(k as u32 - 1) * kf };
            let nabla = (lower + z.powu(k as u32) * z.conj() * (kf - mf)) * frame * inv_norm[k];
            *o = xz * nabla + i * fv * s[k];
        }
    });
    OpMatrix::new(m, mat)
}

/// `‖Q_f − i·T_{f − Δf/(2m)}‖` with `Δ` the Laplace-Beltrami operator of `ω`,
/// which is twice [`ObservableFn::laplacian`].
pub fn tuynman_defect(f: &ObservableFn, ctx: &Cp1Context) -> Result<f64> {
    let q = geometric_quantization(f, ctx)?;
    let shifted = f.sub(&f.laplacian()?.scale(Complex64::new(1.0 / ctx.m as f64, 0.0))?)?;
    let t = toeplitz_matrix(&shifted, ctx)?;
    Ok(operator_norm(&OpMatrix { m: ctx.m, mat: q.mat - t.mat * Complex64::new(0.0, 1.0) }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp1::context::make_context;

    #[test]
    fn constant_gives_i() {
        let c = make_context(5).unwrap();
        let q = geometric_quantization(&ObservableFn::constant(1.0), &c).unwrap();
        assert!((q.mat - OpMatrix::identity(5).mat * Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn tuynman() {
        for m in [4, 8, 16] {
            let c = make_context(m).unwrap();
            let d = tuynman_defect(&ObservableFn::height(), &c).unwrap();
            assert!(d <= 1e-8, "m={m}: {d}");
        }
        let c = make_context(6).unwrap();
        let f = ObservableFn::x1().mul(&ObservableFn::height()).unwrap().add(&ObservableFn::x2()).unwrap();
        assert!(tuynman_defect(&f, &c).unwrap() <= 1e-8);
    }

    #[test]
    fn linear_in_f() {
        let c = make_context(4).unwrap();
        let (f, g) = (ObservableFn::height(), ObservableFn::x1());
        let s = Complex64::new(2.5, 0.0);
        let lhs = geometric_quantization(&f.add(&g.scale(s).unwrap()).unwrap(), &c).unwrap();
        let qf = geometric_quantization(&f, &c).unwrap();
        let qg = geometric_quantization(&g, &c).unwrap();
        assert!((lhs.mat - qf.mat - qg.mat * s).norm() < 1e-12);
    }
}
