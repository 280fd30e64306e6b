use num::complex::Complex64;

use super::kgraph::{d_gamma, PoissonBivector};
use super::poly::Poly;
use super::weights::{kontsevich_weights, WeightConfig};
use crate::error::{Error, Result};

/// `f ⋆ g = f·g + Σ_{n=1}^{N} (iν/2)^n Σ_Γ w_Γ D_Γ(f, g)`, returned as the
/// list of `ν^k` coefficients.
pub fn kontsevich_star(a: &PoissonBivector, f: &Poly, g: &Poly, order: usize, cfg: &WeightConfig) -> Result<Vec<Poly>> {
    if order > 2 {
        return Err(Error::ResourceGuard(format!("Kontsevich products are built to order <= 2, got {order}")));
    }
    let mut out = vec![f * g];
    let half_i = Complex64::new(0.0, 0.5);
    for n in 1..=order {
        let mut acc = Poly::zero(a.dim());
        for (gr, w) in kontsevich_weights(n, cfg)? {
            if w.value == 0.0 {
                continue;
            }
            acc = &acc + &d_gamma(&gr, a, f, g)?.scale(Complex64::new(w.value, 0.0));
        }
        out.push(acc.scale(half_i.powi(n as i32)));
    }
    Ok(out)
}

/// Bilinear extension to `ν`-series, truncated at `ν^order`.
pub fn kontsevich_star_series(
    a: &PoissonBivector,
    f: &[Poly],
    g: &[Poly],
    order: usize,
    cfg: &WeightConfig,
) -> Result<Vec<Poly>> {
    let mut out = vec![Poly::zero(a.dim()); order + 1];
    for (p, fp) in f.iter().enumerate().take(order + 1) {
        for (q, gq) in g.iter().enumerate().take(order + 1 - p) {
            let s = kontsevich_star(a, fp, gq, order - p - q, cfg)?;
            for (r, c) in s.into_iter().enumerate() {
                out[p + q + r] = &out[p + q + r] + &c;
            }
        }
    }
    Ok(out)
}

/// Largest coefficient of `(f⋆g)⋆h − f⋆(g⋆h)` through `ν^order`.
pub fn kontsevich_assoc_defect(
    a: &PoissonBivector,
    f: &Poly,
    g: &Poly,
    h: &Poly,
    order: usize,
    cfg: &WeightConfig,
) -> Result<f64> {
    let fg = kontsevich_star(a, f, g, order, cfg)?;
    let gh = kontsevich_star(a, g, h, order, cfg)?;
    let left = kontsevich_star_series(a, &fg, std::slice::from_ref(h), order, cfg)?;
    let right = kontsevich_star_series(a, std::slice::from_ref(f), &gh, order, cfg)?;
    Ok(left.iter().zip(&right).map(|(x, y)| (x - y).max_abs_coeff()).fold(0.0, f64::max))
}
