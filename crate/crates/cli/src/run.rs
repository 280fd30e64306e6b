use std::fs;

use kquant::cp1::{self, ObservableFn, QuadSpec};
use kquant::formal::StarTable;
use kquant::graphs::{self, Backend, PoissonBivector, WeightConfig};
use kquant::jets::scalar::format_rational;
use kquant::karabegov::{self, default_degree, FormalPotential};
use kquant::Error;
use num::complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};

/// Rows for CSV output; `header` is always written.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub inputs: std::collections::BTreeMap<String, String>,
    pub results: Value,
    #[serde(skip)]
    pub table: Table,
}

type Res<T> = Result<T, Error>;

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report values serialize")
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn run(cfg: &RunConfig) -> Res<Report> {
    let (results, table) = match cfg.command {
        Command::StarKarabegov => star(cfg, karabegov::karabegov_star)?,
        Command::StarBt => star(cfg, karabegov::bt_star_from)?,
        Command::StarGammelgaard => star(cfg, |p, n| graphs::gammelgaard_star(p, &p.metric()?, n))?,
        Command::StarKontsevich => star_kontsevich(cfg)?,
        Command::GraphsEnumerate => graphs_enumerate(cfg)?,
        Command::Weights => weights(cfg)?,
        Command::Cp1Toeplitz => cp1_toeplitz(cfg)?,
        Command::Cp1Berezin => cp1_berezin(cfg)?,
        Command::Cp1Suite => cp1_suite(cfg)?,
    };
    Ok(Report {
        tool: "kquant",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.to_string(),
        seed: cfg.seed()?,
        inputs: cfg.echo(),
        results,
        table,
    })
}

fn load_potential(cfg: &RunConfig, order: usize) -> Res<FormalPotential> {
    let name = cfg.get("star.potential");
    let deg = default_degree(order);
    if let Some((_, p)) = FormalPotential::references(deg).into_iter().find(|(n, _)| *n == name) {
        return Ok(p);
    }
    let text = fs::read_to_string(name).map_err(|e| Error::Invalid(format!("star.potential {name:?}: {e}")))?;
    let p: FormalPotential = serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("potential JSON: {e}")))?;
    FormalPotential::new(p.phi_minus1, p.phi)
}

fn star_table_rows(t: &StarTable) -> Table {
    let ix = |m: &kquant::jets::MultiIndex| m.0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(";");
    let mut rows = vec![];
    for (k, c) in t.coefficients().iter().enumerate() {
        for ((a, b), j) in c.terms() {
            let base = j.constant_term();
            rows.push(vec![
                k.to_string(),
                ix(&a.holo),
                ix(&a.anti),
                ix(&b.holo),
                ix(&b.anti),
                format_rational(&base.re),
                format_rational(&base.im),
                j.to_string(),
            ]);
        }
    }
    Table { header: vec!["k", "f_dz", "f_dzbar", "g_dz", "g_dzbar", "base_re", "base_im", "coeff"], rows }
}

fn star<F: Fn(&FormalPotential, usize) -> Res<StarTable>>(cfg: &RunConfig, build: F) -> Res<(Value, Table)> {
    let order: usize = cfg.parse("star.order")?;
    let p = load_potential(cfg, order)?;
    let t = build(&p, order)?;
    Ok((to_value(&t), star_table_rows(&t)))
}

fn weight_config(cfg: &RunConfig) -> Res<WeightConfig> {
    let seed = cfg.seed()?;
    let mut w = match cfg.get("weights.backend") {
        "grid" => WeightConfig::default(),
        "mc" | "monte-carlo" => WeightConfig::monte_carlo(cfg.parse("weights.samples")?, seed),
        other => return Err(Error::Invalid(format!("weights.backend must be grid or mc, got {other:?}"))),
    };
    w.step = cfg.parse("weights.step")?;
    w.t_max = cfg.parse("weights.t_max")?;
    w.seed = seed;
    if w.backend == Backend::MonteCarlo {
        w.samples = cfg.parse("weights.samples")?;
    }
    if let Some(t) = cfg.parse_opt("weights.tolerance")? {
        w.tolerance = t;
    }
    Ok(w)
}

fn with_cache<T>(cfg: &RunConfig, body: impl FnOnce() -> Res<T>) -> Res<T> {
    let Some(path) = cfg.opt("weights.cache") else {
        return body();
    };
    if let Ok(text) = fs::read_to_string(path) {
        let entries: Vec<graphs::CacheEntry> =
            serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("weights.cache {path:?}: {e}")))?;
        graphs::import_cache(&entries);
    }
    let out = body()?;
    let mut entries = graphs::export_cache();
    entries.sort_by(|a, b| (&a.graph, &a.config).cmp(&(&b.graph, &b.config)));
    let text = serde_json::to_string_pretty(&entries).expect("cache serializes");
    fs::write(path, text).map_err(|e| Error::Invalid(format!("weights.cache {path:?}: {e}")))?;
    Ok(out)
}

fn load_alpha(cfg: &RunConfig) -> Res<PoissonBivector> {
    match cfg.get("kontsevich.alpha") {
        "symplectic" => PoissonBivector::constant(&[vec![0.0, 1.0], vec![-1.0, 0.0]]),
        "su2" => Ok(PoissonBivector::su2()),
        path => {
            let text =
                fs::read_to_string(path).map_err(|e| Error::Invalid(format!("kontsevich.alpha {path:?}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("bivector JSON: {e}")))
        }
    }
}

fn star_kontsevich(cfg: &RunConfig) -> Res<(Value, Table)> {
    let a = load_alpha(cfg)?;
    let f = graphs::parse_poly(cfg.get("kontsevich.f"), a.dim())?;
    let g = graphs::parse_poly(cfg.get("kontsevich.g"), a.dim())?;
    let order: usize = cfg.parse("kontsevich.order")?;
    let w = weight_config(cfg)?;
    let coeffs = with_cache(cfg, || graphs::kontsevich_star(&a, &f, &g, order, &w))?;
    let mut rows = vec![];
    for (k, c) in coeffs.iter().enumerate() {
        for (exp, v) in c.terms() {
            let e = exp.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
            rows.push(vec![k.to_string(), e, num(v.re), num(v.im)]);
        }
    }
    let results = json!({
        "alpha": to_value(&a),
        "coefficients": coeffs.iter().enumerate().map(|(k, c)| json!({"k": k, "poly": c.to_string(), "terms": to_value(c)})).collect::<Vec<_>>(),
    });
    Ok((results, Table { header: vec!["k", "exp", "re", "im"], rows }))
}

fn graphs_enumerate(cfg: &RunConfig) -> Res<(Value, Table)> {
    match cfg.get("graphs.kind") {
        "kontsevich" => {
            let n: usize = cfg.parse("graphs.n")?;
            let gs = graphs::enumerate_kgraphs(n)?;
            let rows = gs
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    let (rep, sign) = g.canonical();
                    vec![i.to_string(), g.to_string(), rep.to_string(), sign.to_string()]
                })
                .collect();
            let results = json!({"kind": "kontsevich", "n": n, "count": gs.len(), "graphs": to_value(&gs)});
            Ok((results, Table { header: vec!["index", "graph", "canonical", "sign"], rows }))
        }
        "gammelgaard" => {
            let w: usize = cfg.parse("graphs.w_max")?;
            let gs = graphs::enumerate_ggraphs(w)?;
            let rows = gs
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    vec![i.to_string(), g.to_string(), g.total_weight().to_string(), g.automorphisms().to_string()]
                })
                .collect();
            let results = json!({"kind": "gammelgaard", "w_max": w, "count": gs.len(), "graphs": to_value(&gs)});
            Ok((results, Table { header: vec!["index", "graph", "weight", "automorphisms"], rows }))
        }
        other => Err(Error::Invalid(format!("graphs.kind must be kontsevich or gammelgaard, got {other:?}"))),
    }
}

fn weights(cfg: &RunConfig) -> Res<(Value, Table)> {
    let n: usize = cfg.parse("weights.n")?;
    let w = weight_config(cfg)?;
    let table = with_cache(cfg, || graphs::kontsevich_weights(n, &w))?;
    let rows = table
        .iter()
        .map(|(g, r)| {
            vec![g.to_string(), num(r.value), num(r.error_estimate), r.samples_or_cells.to_string(), r.seed.to_string()]
        })
        .collect();
    let results = json!({
        "n": n,
        "config": to_value(&w),
        "weights": table.iter().map(|(g, r)| json!({"graph": g.to_string(), "targets": to_value(g), "result": to_value(r)})).collect::<Vec<_>>(),
    });
    Ok((results, Table { header: vec!["graph", "value", "error_estimate", "samples_or_cells", "seed"], rows }))
}

fn observable(cfg: &RunConfig, key: &str) -> Res<ObservableFn> {
    ObservableFn::parse(cfg.get(key))
}

fn context(cfg: &RunConfig, m: usize) -> Res<cp1::Cp1Context> {
    let mut q = QuadSpec::for_level(m);
    if let Some(n) = cfg.parse_opt("cp1.n_theta")? {
        q.n_theta = n;
    }
    if let Some(n) = cfg.parse_opt("cp1.n_phi")? {
        q.n_phi = n;
    }
    cp1::Cp1Context::with_quad(m, q)
}

fn point(cfg: &RunConfig) -> Res<Complex64> {
    let raw = cfg.get("cp1.z");
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let bad = || Error::Invalid(format!("cp1.z must be re,im, got {raw:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    Ok(Complex64::new(parts[0].parse().map_err(|_| bad())?, parts[1].parse().map_err(|_| bad())?))
}

fn cp1_toeplitz(cfg: &RunConfig) -> Res<(Value, Table)> {
    let m: usize = cfg.parse("cp1.m")?;
    let ctx = context(cfg, m)?;
    let f = observable(cfg, "cp1.f")?;
    let t = cp1::toeplitz_matrix(&f, &ctx)?;
    let mut rows = vec![];
    for j in 0..=m {
        for k in 0..=m {
            let v = t.mat[(j, k)];
            rows.push(vec![j.to_string(), k.to_string(), num(v.re), num(v.im)]);
        }
    }
    let results = json!({
        "observable": f.to_string(),
        "matrix": to_value(&t),
        "operator_norm": cp1::operator_norm(&t),
        "hermiticity_defect": t.hermiticity_defect(),
        "trace": to_value(&cp1::trace_identity(&f, &ctx)?),
    });
    Ok((results, Table { header: vec!["row", "col", "re", "im"], rows }))
}

fn cp1_berezin(cfg: &RunConfig) -> Res<(Value, Table)> {
    let f = observable(cfg, "cp1.f")?;
    let z = point(cfg)?;
    let lap = f.laplacian()?.eval(z);
    let fz = f.eval(z);
    let mut rows = vec![];
    let mut out = vec![];
    for m in cfg.list("cp1.m_list")? {
        let ctx = context(cfg, m)?;
        let a = cp1::berezin_transform_num(&f, z, &ctx)?;
        let b = cp1::berezin_transform_integral(&f, z, &ctx);
        let scaled = (a - fz) * m as f64;
        rows.push(vec![m.to_string(), num(a.re), num(a.im), num(b.re), num(b.im), num(scaled.re), num(scaled.im)]);
        out.push(json!({"m": m, "matrix": to_value(&a), "integral": to_value(&b), "scaled_defect": to_value(&scaled)}));
    }
    let results = json!({"observable": f.to_string(), "z": to_value(&z), "f": to_value(&fz), "laplacian": to_value(&lap), "levels": out});
    Ok((
        results,
        Table {
            header: vec!["m", "re", "im", "integral_re", "integral_im", "scaled_defect_re", "scaled_defect_im"],
            rows,
        },
    ))
}

fn series_rows(series: &[&cp1::AsymSeries], rows: &mut Vec<Vec<String>>) {
    for s in series {
        for &(m, v) in &s.points {
            rows.push(vec![
                s.name.clone(),
                m.to_string(),
                num(v),
                num(s.fit.slope),
                num(s.fit.loglog_slope),
                num(s.fit.prefactor),
                num(s.fit.residual),
            ]);
        }
    }
}

const SERIES_HEADER: [&str; 7] = ["series", "m", "value", "slope", "loglog_slope", "prefactor", "residual"];

fn cp1_suite(cfg: &RunConfig) -> Res<(Value, Table)> {
    let f = observable(cfg, "cp1.f")?;
    let ms = cfg.list("cp1.m_list")?;
    let mut rows = vec![];
    let results = match cfg.get("cp1.suite") {
        "bms" => {
            let g = observable(cfg, "cp1.g")?;
            let s = cp1::bms_suite(&f, &g, &ms, cfg.parse_opt("cp1.sup")?)?;
            series_rows(&[&s.norm, &s.commutator, &s.product], &mut rows);
            to_value(&s)
        }
        "berezin" => {
            let s = cp1::berezin_defect_series(&f, &ms, cfg.parse("cp1.points")?, cfg.seed()?)?;
            series_rows(&[&s], &mut rows);
            to_value(&s)
        }
        "trace" => {
            let s = cp1::trace_scaling_series(&f, &ms)?;
            series_rows(&[&s], &mut rows);
            to_value(&s)
        }
        "symbols" => {
            let mut out = vec![];
            for &m in &ms {
                let ctx = context(cfg, m)?;
                let tr = cp1::trace_identity(&f, &ctx)?;
                let adj = cp1::adjointness_check(&cp1::toeplitz_matrix(&observable(cfg, "cp1.g")?, &ctx)?, &f, &ctx)?;
                let contra = cp1::contravariant_reconstruct(&f, &ctx)?;
                let tuyn = cp1::tuynman_defect(&f, &ctx)?;
                for (name, v) in
                    [("trace", tr.defect), ("adjointness", adj), ("contravariant", contra), ("tuynman", tuyn)]
                {
                    rows.push(vec![
                        name.to_string(),
                        m.to_string(),
                        num(v),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ]);
                }
                out.push(json!({"m": m, "trace": to_value(&tr), "adjointness": adj, "contravariant": contra, "tuynman": tuyn}));
            }
            Value::Array(out)
        }
        other => {
            return Err(Error::Invalid(format!("cp1.suite must be bms, berezin, trace or symbols, got {other:?}")))
        }
    };
    Ok((
        json!({"suite": cfg.get("cp1.suite"), "observable": f.to_string(), "results": results}),
        Table { header: SERIES_HEADER.to_vec(), rows },
    ))
}
