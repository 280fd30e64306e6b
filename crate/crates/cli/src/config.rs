use std::collections::BTreeMap;
use std::fmt;

use kquant::Error;

/// Every accepted `section.key` with its default, in output order.
pub const KEYS: &[(&str, &str)] = &[
    ("run.seed", "1"),
    ("run.format", "json"),
    ("run.out", ""),
    ("star.potential", "flat"),
    ("star.order", "2"),
    ("kontsevich.alpha", "symplectic"),
    ("kontsevich.f", "x1^2*x2"),
    ("kontsevich.g", "x1*x2^2"),
    ("kontsevich.order", "2"),
    ("graphs.kind", "kontsevich"),
    ("graphs.n", "2"),
    ("graphs.w_max", "2"),
    ("weights.n", "1"),
    ("weights.backend", "grid"),
    ("weights.step", "0.2"),
    ("weights.t_max", "3"),
    ("weights.samples", "1048576"),
    ("weights.tolerance", ""),
    ("weights.cache", ""),
    ("cp1.m", "4"),
    ("cp1.m_list", "8,16,32,64,128"),
    ("cp1.f", "(1 - zz)/(1+zz)"),
    ("cp1.g", "(z + zbar)/(1+zz)"),
    ("cp1.z", "0,0"),
    ("cp1.suite", "bms"),
    ("cp1.points", "20"),
    ("cp1.sup", ""),
    ("cp1.n_theta", ""),
    ("cp1.n_phi", ""),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    StarKarabegov,
    StarBt,
    StarKontsevich,
    StarGammelgaard,
    GraphsEnumerate,
    Weights,
    Cp1Toeplitz,
    Cp1Berezin,
    Cp1Suite,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::StarKarabegov => "star-karabegov",
            Command::StarBt => "star-bt",
            Command::StarKontsevich => "star-kontsevich",
            Command::StarGammelgaard => "star-gammelgaard",
            Command::GraphsEnumerate => "graphs-enumerate",
            Command::Weights => "weights",
            Command::Cp1Toeplitz => "cp1-toeplitz",
            Command::Cp1Berezin => "cp1-berezin",
            Command::Cp1Suite => "cp1-suite",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Resolved settings for one run; every key of [`KEYS`] is present.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<String, String>,
}

fn invalid(msg: String) -> Error {
    Error::Invalid(msg)
}

/// Parses the `[section]` / `key = value` format. `#` starts a comment line.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, Error> {
    let mut section = String::new();
    let mut out = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name =
                rest.strip_suffix(']').ok_or_else(|| invalid(format!("line {}: unterminated section", ln + 1)))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| invalid(format!("line {}: expected key = value", ln + 1)))?;
        if section.is_empty() {
            return Err(invalid(format!("line {}: key outside of a section", ln + 1)));
        }
        let key = format!("{section}.{}", k.trim());
        let v = v.trim().trim_matches('"').to_string();
        if out.insert(key.clone(), v).is_some() {
            return Err(invalid(format!("line {}: duplicate key {key}", ln + 1)));
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Defaults, then the config file, then command-line overrides; unknown keys fail.
    pub fn resolve(
        command: Command,
        file: &BTreeMap<String, String>,
        overrides: &[(String, String)],
    ) -> Result<Self, Error> {
        let mut values: BTreeMap<String, String> = KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (k, v) in file.iter().chain(overrides.iter().map(|(k, v)| (k, v))) {
            match values.get_mut(k) {
                Some(slot) => *slot = v.clone(),
                None => return Err(invalid(format!("unknown config key {k}"))),
            }
        }
        let cfg = RunConfig { command, values };
        cfg.format()?;
        cfg.seed()?;
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("key listed in KEYS")
    }

    pub fn opt(&self, key: &str) -> Option<&str> {
        Some(self.get(key)).filter(|s| !s.is_empty())
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, Error> {
        let v = self.get(key);
        v.parse().map_err(|_| invalid(format!("{key}: cannot parse {v:?}")))
    }

    pub fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, Error> {
        match self.opt(key) {
            None => Ok(None),
            Some(_) => self.parse(key).map(Some),
        }
    }

    pub fn list(&self, key: &str) -> Result<Vec<usize>, Error> {
        let v = self.get(key);
        if v.trim().is_empty() {
            return Ok(vec![]);
        }
        v.split(',').map(|s| s.trim().parse().map_err(|_| invalid(format!("{key}: cannot parse {v:?}")))).collect()
    }

    pub fn seed(&self) -> Result<u64, Error> {
        self.parse("run.seed")
    }

    pub fn format(&self) -> Result<Format, Error> {
        match self.get("run.format") {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(invalid(format!("run.format must be json or csv, got {other:?}"))),
        }
    }

    /// Keys that matter for the command, for the report echo.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let sections: &[&str] = match self.command {
            Command::StarKarabegov | Command::StarBt | Command::StarGammelgaard => &["run", "star"],
            Command::StarKontsevich => &["run", "kontsevich", "weights"],
            Command::GraphsEnumerate => &["run", "graphs"],
            Command::Weights => &["run", "weights"],
            Command::Cp1Toeplitz | Command::Cp1Berezin | Command::Cp1Suite => &["run", "cp1"],
        };
        self.values
            .iter()
            .filter(|(k, _)| sections.iter().any(|s| k.split('.').next() == Some(s)) && k.as_str() != "run.out")
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}
