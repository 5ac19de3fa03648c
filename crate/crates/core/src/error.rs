use core::fmt;

/// Errors produced by the analysis and optimization routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scenario parameter is out of range.
    InvalidScenario(&'static str),
    /// No stream mode satisfies `nt + nr - (K + 1) d >= 0` with `d >= 1`,
    /// or the requested mode violates it.
    InfeasibleNetwork { nt: usize, nr: usize, links: usize, streams: u32 },
    /// A feedback split does not match the scenario.
    SplitViolation { row: usize, sum: u64, expected: u32 },
    /// Matrix or vector shapes disagree.
    DimensionMismatch { expected: usize, found: usize },
    /// A special function was evaluated outside its domain.
    Domain { function: &'static str, value: f64 },
    /// Every Erlang component had zero shape or zero scale.
    EmptyMixture,
    /// The link sees no interference; the interference-limited formulas
    /// are undefined.
    NoInterference { link: usize },
    /// Exhaustive search would exceed the candidate cap.
    BudgetTooLarge { candidates: u128, cap: u128 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidScenario(what) => write!(f, "invalid scenario: {what}"),
            Error::InfeasibleNetwork { nt, nr, links, streams } => write!(
                f,
                "infeasible network: nt={nt}, nr={nr}, K={links} cannot carry d={streams} streams per link"
            ),
            Error::SplitViolation { row, sum, expected } => {
                write!(f, "feedback split row {row} sums to {sum}, expected {expected}")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::Domain { function, value } => {
                write!(f, "{function} evaluated outside its domain at {value}")
            }
            Error::EmptyMixture => f.write_str("Erlang mixture has no components"),
            Error::NoInterference { link } => write!(f, "link {link} has no interference terms"),
            Error::BudgetTooLarge { candidates, cap } => {
                write!(f, "exhaustive search needs {candidates} evaluations, cap is {cap}")
            }
        }
    }
}

impl core::error::Error for Error {}
