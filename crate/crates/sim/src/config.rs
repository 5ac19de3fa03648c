//! Flat `key = value` sweep configuration.
//!
//! ```text
//! scenario_id = table1
//! K = 4
//! nt = 8
//! nr = 8
//! sigma2 = 1.0
//! B_total = 20
//! alpha.row0 = "1 0.5 0.1 0.01"
//! alpha.row1 = "0.55 1 0.45 0.1"
//! alpha.row2 = "0.1 0.45 1 0.55"
//! alpha.row3 = "0.01 0.1 0.5 1"
//! snr_db = -10:5:30
//! schemes = EAS RIMS GREEDY
//! mode = SELECT
//! trials = 0
//! seed = 1
//! mc_mode = cell
//! output = table1.csv
//! ```
//!
//! `snr_db` takes either a whitespace or comma separated list or an
//! inclusive `start:step:stop` range. `B_total` may also be a list, which adds
//! a budget axis to the grid. Lines starting with `#` are comments; values may
//! be wrapped in double quotes.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ialf_core::NetworkScenario;

use crate::mcsim::McMode;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line number, 0 when the problem is a missing key.
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config field `{}`: {}", self.field, self.message)
        } else {
            write!(f, "config line {}, field `{}`: {}", self.line, self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn new(line: usize, field: &str, message: impl Into<String>) -> Self {
        Self { line, field: field.to_owned(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Eas,
    Rims,
    Greedy,
    Joint,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Eas => "EAS",
            Self::Rims => "RIMS",
            Self::Greedy => "GREEDY",
            Self::Joint => "JOINT",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "EAS" | "EQUAL" => Ok(Self::Eas),
            "RIMS" => Ok(Self::Rims),
            "GREEDY" | "PAS" => Ok(Self::Greedy),
            "JOINT" => Ok(Self::Joint),
            _ => Err(format!("unknown scheme `{s}` (expected EAS, RIMS, GREEDY or JOINT)")),
        }
    }
}

/// Stream count per link: fixed, or chosen by mode selection at each point.
/// `JOINT` rows ignore this and report the mode the joint search settles on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSpec {
    Fixed(u32),
    Select,
}

impl FromStr for ModeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let upper = s.trim().to_ascii_uppercase();
        if upper == "SELECT" {
            return Ok(Self::Select);
        }
        let inner = upper
            .strip_prefix("FIXED")
            .map(str::trim)
            .and_then(|r| r.strip_prefix('(').and_then(|r| r.strip_suffix(')')))
            .ok_or_else(|| format!("expected FIXED(d) or SELECT, got `{s}`"))?;
        match inner.trim().parse::<u32>() {
            Ok(d) if d >= 1 => Ok(Self::Fixed(d)),
            _ => Err(format!("stream count in `{s}` must be a positive integer")),
        }
    }
}

pub fn parse_mc_mode(s: &str) -> Result<McMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "rvq" => Ok(McMode::Rvq),
        "cell" | "cell_approx" => Ok(McMode::CellApprox),
        _ => Err(format!("unknown mc_mode `{s}` (expected rvq or cell)")),
    }
}

pub fn mc_mode_name(mode: McMode) -> &'static str {
    match mode {
        McMode::Rvq => "rvq",
        McMode::CellApprox => "cell",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub scenario_id: String,
    pub links: usize,
    pub nt: usize,
    pub nr: usize,
    pub sigma2: f64,
    /// Row-major `K x K` path loss, `alpha[k * K + i]` from transmitter `i`
    /// to receiver `k`.
    pub alpha: Vec<f64>,
    /// Feedback bits per receiver; more than one value adds a grid axis.
    pub budgets: Vec<u32>,
    pub snr_grid_db: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub mode: ModeSpec,
    /// Monte Carlo trials per grid point; 0 skips the simulation.
    pub trials: usize,
    pub seed: u64,
    pub mc_mode: McMode,
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(0, "config", format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        if config.scenario_id.is_empty() {
            config.scenario_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let entries = parse_entries(text)?;
        let mut fields = Fields { entries, used: Vec::new() };

        let scenario_id = fields.optional("scenario_id", |s| Ok(s.to_owned()))?.unwrap_or_default();
        let links: usize = fields.required_parsed("K")?;
        if links == 0 {
            return Err(fields.error("K", "must be at least 1"));
        }
        let nt: usize = fields.required_parsed("nt")?;
        let nr: usize = fields.required_parsed("nr")?;
        let sigma2 = fields.optional("sigma2", parse_number::<f64>)?.unwrap_or(1.0);
        let budgets = fields.required("B_total", parse_list::<u32>)?;
        if budgets.is_empty() {
            return Err(fields.error("B_total", "needs at least one value"));
        }

        let mut alpha = Vec::with_capacity(links * links);
        for k in 0..links {
            let key = format!("alpha.row{k}");
            let row = fields.required(&key, parse_list::<f64>)?;
            if row.len() != links {
                return Err(fields.error(&key, format!("expected {links} entries, found {}", row.len())));
            }
            alpha.extend(row);
        }

        let snr_grid_db = fields.required("snr_db", parse_grid)?;
        if snr_grid_db.is_empty() {
            return Err(fields.error("snr_db", "grid is empty"));
        }
        let schemes = fields.required("schemes", parse_list::<Scheme>)?;
        if schemes.is_empty() {
            return Err(fields.error("schemes", "needs at least one scheme"));
        }
        let mode = fields.optional("mode", |s| s.parse::<ModeSpec>())?.unwrap_or(ModeSpec::Select);
        let trials = fields.optional("trials", parse_number::<usize>)?.unwrap_or(0);
        let seed = fields.optional("seed", parse_number::<u64>)?.unwrap_or(0);
        let mc_mode = fields.optional("mc_mode", parse_mc_mode)?.unwrap_or(McMode::CellApprox);
        let output = fields.optional("output", |s| Ok(PathBuf::from(s)))?;
        fields.reject_unknown()?;

        let config = Self {
            scenario_id,
            links,
            nt,
            nr,
            sigma2,
            alpha,
            budgets,
            snr_grid_db,
            schemes,
            mode,
            trials,
            seed,
            mc_mode,
            output,
        };
        // Surface bad antenna counts, noise or path loss here, with a
        // field name, rather than at the first grid point.
        config.scenario(config.budgets[0]).map_err(|e| fields.error(scenario_field(&e), e.to_string()))?;
        Ok(config)
    }

    /// The scenario at `σ² = sigma2`, `P = 1` and budget `bits`.
    pub fn scenario(&self, bits: u32) -> ialf_core::Result<NetworkScenario> {
        NetworkScenario::new(self.links, self.nt, self.nr, 1.0, self.sigma2, self.alpha.clone(), bits)
    }
}

fn scenario_field(err: &ialf_core::Error) -> &'static str {
    match err {
        ialf_core::Error::InvalidScenario(what) if what.contains("noise") => "sigma2",
        ialf_core::Error::InvalidScenario(what) if what.contains("path loss") => "alpha",
        ialf_core::Error::InvalidScenario(what) if what.contains("antenna") => "nt",
        _ => "K",
    }
}

struct Entry {
    line: usize,
    value: String,
}

fn parse_entries(text: &str) -> Result<HashMap<String, Entry>, ConfigError> {
    let mut entries = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) =
            trimmed.split_once('=').ok_or_else(|| ConfigError::new(line, trimmed, "expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::new(line, "", "empty key"));
        }
        let value = unquote(value.trim()).map_err(|m| ConfigError::new(line, key, m))?;
        if let Some(prev) = entries.insert(key.to_owned(), Entry { line, value }) {
            return Err(ConfigError::new(line, key, format!("duplicate key, first set on line {}", prev.line)));
        }
    }
    Ok(entries)
}

fn unquote(value: &str) -> Result<String, String> {
    match value.strip_prefix('"') {
        Some(rest) => rest.strip_suffix('"').map(str::to_owned).ok_or_else(|| "unterminated quote".to_owned()),
        None => Ok(value.to_owned()),
    }
}

struct Fields {
    entries: HashMap<String, Entry>,
    used: Vec<String>,
}

impl Fields {
    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::new(self.line_of(key), key, message)
    }

    fn optional<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        self.used.push(key.to_owned());
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).map_err(|m| ConfigError::new(e.line, key, m)),
        }
    }

    fn required<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        self.optional(key, parse)?.ok_or_else(|| ConfigError::new(0, key, "missing"))
    }

    fn required_parsed<T: FromStr>(&mut self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.required(key, parse_number::<T>)
    }

    fn reject_unknown(&self) -> Result<(), ConfigError> {
        let mut unknown: Vec<(&String, &Entry)> =
            self.entries.iter().filter(|(k, _)| !self.used.iter().any(|u| u == *k)).collect();
        unknown.sort_by_key(|(_, e)| e.line);
        match unknown.first() {
            Some((k, e)) => Err(ConfigError::new(e.line, k, "unknown key")),
            None => Ok(()),
        }
    }
}

fn parse_number<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| format!("`{s}`: {e}"))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    s.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).map(parse_number::<T>).collect()
}

/// A list, or an inclusive `start:step:stop` range.
fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [_] => {
            let values = parse_list::<f64>(s)?;
            match values.iter().find(|v| !v.is_finite()) {
                Some(v) => Err(format!("grid value {v} is not finite")),
                None => Ok(values),
            }
        }
        [start, step, stop] => {
            let (start, step, stop): (f64, f64, f64) = (parse_number(start)?, parse_number(step)?, parse_number(stop)?);
            if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0) {
                return Err(format!("range `{s}` needs finite bounds and a positive step"));
            }
            let count = ((stop - start) / step + 1e-9).floor();
            if count < 0.0 {
                return Err(format!("range `{s}` is empty"));
            }
            if count > 1e6 {
                return Err(format!("range `{s}` has too many points"));
            }
            // Index-based so that the grid has no accumulated drift.
            Ok((0..=count as usize).map(|j| start + j as f64 * step).collect())
        }
        _ => Err(format!("expected a list or start:step:stop, got `{s}`")),
    }
}
