//! Grid sweeps over SNR, budget and allocation scheme, with CSV output and
//! a theory-vs-simulation comparison.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use rayon::prelude::*;

use ialf_core::allocator::{joint_optimize, select_mode_detailed, AllocationScheme};
use ialf_core::rate::sum_rate;
use ialf_core::{FeedbackSplit, StreamProfile};

use crate::config::{ModeSpec, Scheme, SweepConfig};
use crate::mcsim::{estimate_avg_rate, McConfig, McError};

pub const CSV_HEADER: [&str; 10] = [
    "scenario_id",
    "snr_db",
    "scheme",
    "mode_d",
    "B_total",
    "rate_theory_bps_hz",
    "rate_mc_bps_hz",
    "ci95_halfwidth",
    "trials",
    "seed",
];

/// Default relative deviation allowed by [`CompareSummary::exceeds`].
pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario_id: String,
    pub snr_db: f64,
    pub scheme: Scheme,
    pub mode_d: u32,
    /// Feedback bits per receiver.
    pub budget: u32,
    pub rate_theory: f64,
    pub rate_mc: Option<f64>,
    pub ci95: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("snr {snr_db} dB, B = {budget}, {scheme}: {source}")]
    Point { snr_db: f64, budget: u32, scheme: Scheme, source: McError },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl SweepError {
    /// Whether the error comes from a scenario that cannot be evaluated
    /// (rather than from IO).
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Self::Point { .. })
    }
}

struct Point {
    streams: StreamProfile,
    split: FeedbackSplit,
    theory: f64,
}

fn policy(scheme: Scheme) -> AllocationScheme {
    match scheme {
        Scheme::Eas => AllocationScheme::Equal,
        Scheme::Rims => AllocationScheme::ResidualMin,
        Scheme::Greedy | Scheme::Joint => AllocationScheme::Greedy,
    }
}

fn solve_point(config: &SweepConfig, snr_db: f64, budget: u32, scheme: Scheme) -> Result<Point, McError> {
    let scenario = config.scenario(budget)?.with_snr_db(snr_db)?;
    if scheme == Scheme::Joint {
        let r = joint_optimize(&scenario)?;
        return Ok(Point { streams: r.streams, split: r.split, theory: r.sum_rate });
    }
    let policy = policy(scheme);
    match config.mode {
        ModeSpec::Fixed(d) => {
            let streams = StreamProfile::symmetric(config.links, d)?;
            streams.check(&scenario)?;
            let split = policy.allocate(&scenario, &streams)?;
            let theory = sum_rate(&scenario, &streams, &split)?.sum;
            Ok(Point { streams, split, theory })
        }
        ModeSpec::Select => {
            let evals = select_mode_detailed(&scenario, policy)?;
            // First maximum, so ties go to the smaller mode.
            let best = evals.iter().fold(&evals[0], |b, e| if e.sum_rate > b.sum_rate { e } else { b });
            Ok(Point {
                streams: StreamProfile::symmetric(config.links, best.d)?,
                split: best.split.clone(),
                theory: best.sum_rate,
            })
        }
    }
}

fn run_point(config: &SweepConfig, snr_db: f64, budget: u32, scheme: Scheme) -> Result<SweepRow, SweepError> {
    let wrap = |source| SweepError::Point { snr_db, budget, scheme, source };
    let point = solve_point(config, snr_db, budget, scheme).map_err(wrap)?;
    let (rate_mc, ci95) = if config.trials > 0 {
        let scenario = config.scenario(budget).and_then(|s| s.with_snr_db(snr_db)).map_err(|e| wrap(e.into()))?;
        let mc = McConfig::new(config.trials, config.mc_mode, config.seed);
        let report = estimate_avg_rate(&scenario, &point.streams, &point.split, &mc).map_err(wrap)?;
        (Some(report.sum), Some(report.sum_ci95))
    } else {
        (None, None)
    };
    Ok(SweepRow {
        scenario_id: config.scenario_id.clone(),
        snr_db,
        scheme,
        mode_d: point.streams.common().expect("sweeps use symmetric modes"),
        budget,
        rate_theory: point.theory,
        rate_mc,
        ci95,
        trials: config.trials,
        seed: config.seed,
    })
}

/// One row per `(snr, budget, scheme)`, in grid order: SNR outermost, then
/// budget, then scheme as listed in the config. Points run in parallel; the
/// result does not depend on scheduling. Every point uses the config seed,
/// so the simulated columns of different schemes share random numbers.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>, SweepError> {
    let grid: Vec<(f64, u32, Scheme)> = config
        .snr_grid_db
        .iter()
        .flat_map(|&snr| config.budgets.iter().flat_map(move |&b| config.schemes.iter().map(move |&s| (snr, b, s))))
        .collect();
    grid.into_par_iter().map(|(snr, b, s)| run_point(config, snr, b, s)).collect()
}

fn optional(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_csv<W: io::Write>(rows: &[SweepRow], out: W) -> Result<(), SweepError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            r.snr_db.to_string(),
            r.scheme.to_string(),
            r.mode_d.to_string(),
            r.budget.to_string(),
            r.rate_theory.to_string(),
            optional(r.rate_mc),
            optional(r.ci95),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

#[derive(Debug, thiserror::Error)]
pub enum CompareError {
    #[error("row {row}: theory key {theory:?} does not match simulation key {mc:?}")]
    KeyMismatch { row: usize, theory: Option<RowKey>, mc: Option<RowKey> },
    #[error("row {row}: column `{column}` {message}")]
    BadField { row: usize, column: &'static str, message: String },
    #[error("header does not match the sweep schema")]
    BadHeader,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Identifies a grid point across CSV files. The SNR is kept as text so
/// that keys compare exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowKey {
    pub scenario_id: String,
    pub snr_db: String,
    pub scheme: String,
    pub mode_d: String,
    pub budget: String,
}

struct CsvRow {
    key: RowKey,
    theory: f64,
    mc: Option<f64>,
}

fn parse_rate(row: usize, column: &'static str, text: &str) -> Result<Option<f64>, CompareError> {
    if text.is_empty() {
        return Ok(None);
    }
    text.parse::<f64>()
        .map(Some)
        .map_err(|e| CompareError::BadField { row, column, message: format!("`{text}`: {e}") })
}

fn read_rows<R: io::Read>(input: R) -> Result<Vec<CsvRow>, CompareError> {
    let mut reader = csv::Reader::from_reader(input);
    if reader.headers()?.iter().ne(CSV_HEADER) {
        return Err(CompareError::BadHeader);
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        let field = |j: usize| record.get(j).unwrap_or("").to_owned();
        let theory = parse_rate(row, CSV_HEADER[5], &field(5))?.ok_or(CompareError::BadField {
            row,
            column: CSV_HEADER[5],
            message: "is empty".into(),
        })?;
        rows.push(CsvRow {
            key: RowKey { scenario_id: field(0), snr_db: field(1), scheme: field(2), mode_d: field(3), budget: field(4) },
            theory,
            mc: parse_rate(row, CSV_HEADER[6], &field(6))?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub rows: usize,
    pub max: f64,
    pub mean: f64,
}

/// Relative deviation `|sim - theory| / theory` per scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareSummary {
    pub per_scheme: BTreeMap<String, Deviation>,
}

impl CompareSummary {
    pub fn max_deviation(&self) -> f64 {
        self.per_scheme.values().map(|d| d.max).fold(0.0, f64::max)
    }

    /// Whether any row deviates by more than `threshold` (a fraction).
    pub fn exceeds(&self, threshold: f64) -> bool {
        self.max_deviation() > threshold
    }

    pub fn render(&self) -> String {
        let mut out = String::from("scheme,rows,max_rel_dev,mean_rel_dev\n");
        for (scheme, d) in &self.per_scheme {
            out.push_str(&format!("{scheme},{},{:.6},{:.6}\n", d.rows, d.max, d.mean));
        }
        out
    }
}

fn relative_deviation(reference: f64, value: f64) -> f64 {
    let diff = (value - reference).abs();
    if reference != 0.0 {
        diff / reference.abs()
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Compares the theory column of `theory_csv` with the simulated column of
/// `mc_csv`, row by row. Rows of `mc_csv` without a simulated value
/// contribute their theory column instead, so two theory-only files compare
/// their theory values.
pub fn compare_report<A: io::Read, B: io::Read>(theory_csv: A, mc_csv: B) -> Result<CompareSummary, CompareError> {
    let theory = read_rows(theory_csv)?;
    let mc = read_rows(mc_csv)?;
    let mut acc: BTreeMap<String, (usize, f64, f64)> = BTreeMap::new();
    for row in 0..theory.len().max(mc.len()) {
        let (t, m) = match (theory.get(row), mc.get(row)) {
            (Some(t), Some(m)) if t.key == m.key => (t, m),
            (t, m) => {
                return Err(CompareError::KeyMismatch {
                    row: row + 1,
                    theory: t.map(|r| r.key.clone()),
                    mc: m.map(|r| r.key.clone()),
                })
            }
        };
        let dev = relative_deviation(t.theory, m.mc.unwrap_or(m.theory));
        let e = acc.entry(t.key.scheme.clone()).or_insert((0, 0.0, 0.0));
        e.0 += 1;
        e.1 = e.1.max(dev);
        e.2 += dev;
    }
    let per_scheme = acc
        .into_iter()
        .map(|(scheme, (rows, max, sum))| (scheme, Deviation { rows, max, mean: sum / rows as f64 }))
        .collect();
    Ok(CompareSummary { per_scheme })
}

pub fn compare_files(theory_csv: &Path, mc_csv: &Path) -> Result<CompareSummary, CompareError> {
    compare_report(std::fs::File::open(theory_csv)?, std::fs::File::open(mc_csv)?)
}
