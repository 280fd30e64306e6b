//! Command-line front end for the `kquant` library.

mod config;
mod emit;
mod run;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kquant::Error;
use serde_json::json;

use config::{Command, RunConfig};

#[derive(Parser)]
#[command(
    name = "kquant",
    version,
    about = "Star products on Kähler charts and Berezin-Toeplitz numerics on the sphere"
)]
struct Cli {
    /// Config file with `[section]` headers and `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set cp1.m=8`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file (relative paths resolve under OUTPUT_DIR when set). Default stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// json or csv.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Karabegov star product of a formal potential.
    StarKarabegov(StarArgs),
    /// Berezin-Toeplitz star product of a formal potential.
    StarBt(StarArgs),
    /// Kontsevich product of two polynomials.
    StarKontsevich {
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        g: Option<String>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Graph-expansion star product, cross-checked against the recursion.
    StarGammelgaard(StarArgs),
    /// List Kontsevich or Gammelgaard graphs.
    GraphsEnumerate {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        w_max: Option<usize>,
    },
    /// Kontsevich weights of all graphs of one order.
    Weights {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        cache: Option<String>,
    },
    /// Toeplitz matrix of an observable.
    Cp1Toeplitz(Cp1Args),
    /// Berezin transform at a point over a list of levels.
    Cp1Berezin(Cp1Args),
    /// Asymptotic series and symbol identities.
    Cp1Suite {
        /// bms, berezin, trace or symbols.
        #[arg(long)]
        suite: Option<String>,
        #[command(flatten)]
        common: Cp1Args,
    },
}

#[derive(clap::Args)]
struct StarArgs {
    /// flat, fubini-study, anisotropic or a FormalPotential JSON file.
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    order: Option<usize>,
}

#[derive(clap::Args)]
struct Cp1Args {
    #[arg(long)]
    m: Option<usize>,
    /// Comma-separated levels.
    #[arg(long)]
    m_list: Option<String>,
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    g: Option<String>,
    /// Chart point as `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
}

fn push<T: ToString>(o: &mut Vec<(String, String)>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        o.push((key.to_string(), v.to_string()));
    }
}

fn star_overrides(a: &StarArgs, o: &mut Vec<(String, String)>) {
    push(o, "star.potential", &a.potential);
    push(o, "star.order", &a.order);
}

fn cp1_overrides(a: &Cp1Args, o: &mut Vec<(String, String)>) {
    push(o, "cp1.m", &a.m);
    push(o, "cp1.m_list", &a.m_list);
    push(o, "cp1.f", &a.f);
    push(o, "cp1.g", &a.g);
    push(o, "cp1.z", &a.z);
}

fn resolve(cli: &Cli) -> Result<RunConfig, Error> {
    let file = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Invalid(format!("config {}: {e}", p.display())))?;
            config::parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    let mut o = vec![];
    let command = match &cli.command {
        Sub::StarKarabegov(a) => {
            star_overrides(a, &mut o);
            Command::StarKarabegov
        }
        Sub::StarBt(a) => {
            star_overrides(a, &mut o);
            Command::StarBt
        }
        Sub::StarGammelgaard(a) => {
            star_overrides(a, &mut o);
            Command::StarGammelgaard
        }
        Sub::StarKontsevich { alpha, f, g, order } => {
            push(&mut o, "kontsevich.alpha", alpha);
            push(&mut o, "kontsevich.f", f);
            push(&mut o, "kontsevich.g", g);
            push(&mut o, "kontsevich.order", order);
            Command::StarKontsevich
        }
        Sub::GraphsEnumerate { kind, n, w_max } => {
            push(&mut o, "graphs.kind", kind);
            push(&mut o, "graphs.n", n);
            push(&mut o, "graphs.w_max", w_max);
            Command::GraphsEnumerate
        }
        Sub::Weights { n, backend, cache } => {
            push(&mut o, "weights.n", n);
            push(&mut o, "weights.backend", backend);
            push(&mut o, "weights.cache", cache);
            Command::Weights
        }
        Sub::Cp1Toeplitz(a) => {
            cp1_overrides(a, &mut o);
            Command::Cp1Toeplitz
        }
        Sub::Cp1Berezin(a) => {
            cp1_overrides(a, &mut o);
            Command::Cp1Berezin
        }
        Sub::Cp1Suite { suite, common } => {
            push(&mut o, "cp1.suite", suite);
            cp1_overrides(common, &mut o);
            Command::Cp1Suite
        }
    };
    for s in &cli.set {
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Invalid(format!("--set expects KEY=VALUE, got {s:?}")))?;
        o.push((k.trim().to_string(), v.trim().to_string()));
    }
    push(&mut o, "run.seed", &cli.seed);
    push(&mut o, "run.format", &cli.format);
    push(&mut o, "run.out", &cli.out.as_ref().map(|p| p.display().to_string()));
    RunConfig::resolve(command, &file, &o)
}

fn output_path(raw: &str) -> PathBuf {
    let p = PathBuf::from(raw);
    match std::env::var_os("OUTPUT_DIR") {
        Some(dir) if p.is_relative() => PathBuf::from(dir).join(p),
        _ => p,
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let cfg = resolve(cli)?;
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Invalid("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    }
    log("info", &format!("running {}", cfg.command));
    let report = run::run(&cfg)?;
    let bytes = emit::emit(&report, cfg.format()?);
    match cfg.opt("run.out") {
        Some(p) => {
            let path = output_path(p);
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::Invalid(format!("{}: {e}", dir.display())))?;
            }
            fs::write(&path, bytes).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
            log("info", &format!("wrote {}", path.display()));
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|e| Error::Invalid(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn log(level: &str, msg: &str) {
    eprintln!("{}", json!({"level": level, "message": msg}));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", json!({"level": "error", "kind": "Usage", "message": e.to_string().trim()}));
            return ExitCode::from(2);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"level": "error", "kind": e.kind(), "message": e.to_string()}));
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
