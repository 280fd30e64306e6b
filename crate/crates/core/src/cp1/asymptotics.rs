use nalgebra::{DMatrix, DVector};
use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use super::context::{make_context, operator_norm, toeplitz_matrix, OpMatrix};
use super::observable::ObservableFn;
use super::symbols::{berezin_transform_num, sample_points};
use crate::error::{Error, Result};

/// Fit of `v(m) ≈ limit + C·m^slope·e^{d/m}` by least squares on `log(v − limit)`.
///
/// With three or more usable points the `d/m` term absorbs the first
/// subleading correction, so `slope` estimates the leading exponent even when
/// the values carry shifts like `1/(m+2)`. `loglog_slope` is the plain
/// two-parameter fit over the same points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymFit {
    pub limit: f64,
    pub prefactor: f64,
    pub slope: f64,
    pub correction: f64,
    pub residual: f64,
    pub loglog_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymSeries {
    pub name: String,
    pub points: Vec<(usize, f64)>,
    pub fit: AsymFit,
}

impl AsymSeries {
    pub fn new(name: &str, points: Vec<(usize, f64)>, limit: f64) -> Self {
        let fit = fit_series(&points, limit);
        AsymSeries { name: name.to_string(), points, fit }
    }

    /// Strictly decreasing values along increasing `m`.
    pub fn is_monotone_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 < w[0].1)
    }
}

fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> (DVector<f64>, f64) {
    let a = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let b = DVector::from_column_slice(rhs);
    let sol = a.clone().svd(true, true).solve(&b, 1e-14).expect("svd with both factors");
    let res = &a * &sol - b;
    (sol, (res.norm_squared() / rhs.len() as f64).sqrt())
}

/// Points with `v − limit ≤ 0` are left out of the fit; with fewer than two
/// usable points every fitted number is NaN.
pub fn fit_series(points: &[(usize, f64)], limit: f64) -> AsymFit {
    let usable: Vec<(f64, f64)> =
        points.iter().filter(|(m, v)| *m > 0 && v - limit > 0.0).map(|&(m, v)| (m as f64, (v - limit).ln())).collect();
    let nan = AsymFit {
        limit,
        prefactor: f64::NAN,
        slope: f64::NAN,
        correction: f64::NAN,
        residual: f64::NAN,
        loglog_slope: f64::NAN,
    };
    if usable.len() < 2 {
        return nan;
    }
    let rhs: Vec<f64> = usable.iter().map(|p| p.1).collect();
    let plain: Vec<Vec<f64>> = usable.iter().map(|&(m, _)| vec![1.0, m.ln()]).collect();
    let (p, plain_res) = least_squares(&plain, &rhs);
    if usable.len() < 3 {
        return AsymFit {
            limit,
            prefactor: p[0].exp(),
            slope: p[1],
            correction: 0.0,
            residual: plain_res,
            loglog_slope: p[1],
        };
    }
    let full: Vec<Vec<f64>> = usable.iter().map(|&(m, _)| vec![1.0, m.ln(), 1.0 / m]).collect();
    let (q, res) = least_squares(&full, &rhs);
    AsymFit { limit, prefactor: q[0].exp(), slope: q[1], correction: q[2], residual: res, loglog_slope: p[1] }
}

/// Sign relating `m·i[T_f, T_g]` to `T_{{f,g}}` for [`ObservableFn::poisson`].
pub const BRACKET_SIGN: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmsSuite {
    /// `|f|_∞ − ‖T_f‖`.
    pub norm: AsymSeries,
    /// `‖m i[T_f, T_g] − T_{{f,g}}‖`.
    pub commutator: AsymSeries,
    /// `‖T_f T_g − T_{fg}‖`.
    pub product: AsymSeries,
}

fn op_norm(m: usize, mat: DMatrix<Complex64>) -> f64 {
    operator_norm(&OpMatrix { m, mat })
}

/// The three norm series of the semiclassical limit over `m_list`. `sup_f`
/// is `|f|_∞`; pass `None` to use a sampled maximum.
pub fn bms_suite(f: &ObservableFn, g: &ObservableFn, m_list: &[usize], sup_f: Option<f64>) -> Result<BmsSuite> {
    if m_list.is_empty() {
        return Err(Error::Invalid("m_list is empty".into()));
    }
    let sup = sup_f.unwrap_or_else(|| f.sup_norm_sampled(400));
    let bracket = f.poisson(g)?.scale(Complex64::new(BRACKET_SIGN, 0.0))?;
    let fg = f.mul(g)?;
    let (mut a, mut b, mut c) = (vec![], vec![], vec![]);
    for &m in m_list {
        let ctx = make_context(m)?;
        let tf = toeplitz_matrix(f, &ctx)?.mat;
        let tg = toeplitz_matrix(g, &ctx)?.mat;
        let tb = toeplitz_matrix(&bracket, &ctx)?.mat;
        let tfg = toeplitz_matrix(&fg, &ctx)?.mat;
        a.push((m, sup - op_norm(m, tf.clone())));
        let comm = (&tf * &tg - &tg * &tf) * Complex64::new(0.0, m as f64);
        b.push((m, op_norm(m, comm - tb)));
        c.push((m, op_norm(m, &tf * &tg - tfg)));
    }
    Ok(BmsSuite {
        norm: AsymSeries::new("norm", a, 0.0),
        commutator: AsymSeries::new("commutator", b, 0.0),
        product: AsymSeries::new("product", c, 0.0),
    })
}

/// `max_x |m(I^{(m)}f − f) − Δf|` over `n_points` seeded sample points.
pub fn berezin_defect_series(f: &ObservableFn, m_list: &[usize], n_points: usize, seed: u64) -> Result<AsymSeries> {
    let lap = f.laplacian()?;
    let pts = sample_points(n_points, seed);
    let mut out = vec![];
    for &m in m_list {
        let ctx = make_context(m)?;
        let t = toeplitz_matrix(f, &ctx)?;
        let mut worst: f64 = 0.0;
        for &z in &pts {
            let i = super::context::covariant_symbol(&t, z, &ctx);
            worst = worst.max(((i - f.eval(z)) * m as f64 - lap.eval(z)).norm());
        }
        out.push((m, worst));
    }
    Ok(AsymSeries::new("berezin", out, 0.0))
}

/// `tr T_f / m`, whose limit is `(1/2π)∫ f Ω` here since the volume is `2π`.
pub fn trace_scaling_series(f: &ObservableFn, m_list: &[usize]) -> Result<AsymSeries> {
    let limit = f.integral()?.re / (2.0 * std::f64::consts::PI);
    let mut out = vec![];
    for &m in m_list {
        let t = toeplitz_matrix(f, &make_context(m)?)?;
        out.push((m, t.trace().re / m as f64));
    }
    Ok(AsymSeries::new("trace", out, limit))
}

/// Berezin transform at one point through the matrix path, for the CLI.
pub fn berezin_point(f: &ObservableFn, z0: Complex64, m: usize) -> Result<Complex64> {
    berezin_transform_num(f, z0, &make_context(m)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MS: [usize; 5] = [8, 16, 32, 64, 128];

    #[test]
    fn fit_recovers_power_laws() {
        let pts: Vec<(usize, f64)> = MS.iter().map(|&m| (m, 3.0 * (m as f64).powf(-1.5))).collect();
        let f = fit_series(&pts, 0.0);
        assert!((f.slope + 1.5).abs() < 1e-10 && (f.prefactor - 3.0).abs() < 1e-9 && f.residual < 1e-12);
        assert!((f.loglog_slope + 1.5).abs() < 1e-10);
        let shifted: Vec<(usize, f64)> = MS.iter().map(|&m| (m, 2.0 / (m as f64 + 2.0))).collect();
        let f = fit_series(&shifted, 0.0);
        assert!((f.slope + 1.0).abs() < 0.02, "{f:?}");
        assert!((f.loglog_slope + 0.928).abs() < 0.01);
        let lim: Vec<(usize, f64)> = MS.iter().map(|&m| (m, 0.5 + 1.0 / m as f64)).collect();
        assert!((fit_series(&lim, 0.5).slope + 1.0).abs() < 1e-10);
        assert!(fit_series(&[(4, 0.0), (8, 0.0)], 0.0).slope.is_nan());
    }

    #[test]
    fn norm_series_closed_form() {
        let s = bms_suite(&ObservableFn::height(), &ObservableFn::x1(), &MS, Some(1.0)).unwrap();
        for &(m, v) in &s.norm.points {
            assert!((v - 2.0 / (m as f64 + 2.0)).abs() < 1e-10);
        }
        assert!((s.norm.fit.slope + 1.0).abs() < 0.05);
        for series in [&s.commutator, &s.product] {
            assert!(series.is_monotone_decreasing(), "{series:?}");
            assert!((series.fit.slope + 1.0).abs() < 0.2, "{series:?}");
        }
        // commutator defect in closed form: 4m/(m+2)² for the two coordinate functions
        for &(m, v) in &s.commutator.points {
            let mf = m as f64;
            assert!((v - 4.0 * mf / ((mf + 2.0) * (mf + 2.0))).abs() < 1e-10, "m={m}: {v}");
        }
    }

    #[test]
    fn self_commutator_vanishes() {
        let f = ObservableFn::height().add(&ObservableFn::x1().scale(Complex64::new(0.3, 0.0)).unwrap()).unwrap();
        let s = bms_suite(&f, &f, &[4, 8, 16], None).unwrap();
        assert!(s.commutator.points.iter().all(|&(m, v)| v <= 1.0 / m as f64 && v < 1e-12));
    }

    #[test]
    fn berezin_series() {
        let s = berezin_defect_series(&ObservableFn::height(), &MS, 20, 5).unwrap();
        assert!((s.fit.slope + 1.0).abs() < 0.15, "{s:?}");
        for &(m, v) in &s.points {
            assert!(v <= 4.0 / (m as f64 + 2.0) + 1e-9);
        }
    }

    #[test]
    fn trace_series() {
        let f = ObservableFn::parse("1/(1+zz)").unwrap();
        let s = trace_scaling_series(&f, &MS).unwrap();
        assert_eq!(s.fit.limit, 0.5);
        let (_, last) = s.points[4];
        assert!(((last - 0.5) / 0.5).abs() <= 0.05);
        for &(m, v) in &s.points {
            assert!((v - (m as f64 + 1.0) / (2.0 * m as f64)).abs() < 1e-12);
        }
    }
}
