use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("{kernel}: row sum {sum} at ({location})")]
    RowSum {
        kernel: &'static str,
        sum: f64,
        location: String,
    },

    #[error("{kernel}: negative probability {value} at ({location})")]
    NegativeProbability {
        kernel: &'static str,
        value: f64,
        location: String,
    },

    #[error("{kernel}: non-finite entry at ({location})")]
    NonFinite {
        kernel: &'static str,
        location: String,
    },

    #[error("index {index} out of range for {what} of size {size}")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("discount factor {0} outside [0, 1)")]
    Gamma(f64),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("simplex grid with {count} points exceeds the limit of {limit}")]
    GridTooLarge { count: u128, limit: usize },

    #[error("Cesaro averaging did not converge within {cap} steps")]
    CesaroCap { cap: usize },

    #[error("chain is not irreducible and aperiodic: {0}")]
    StarViolation(String),

    #[error(
        "policy entry {value} at (s={s},a={a}) is closer than {margin} to the simplex boundary"
    )]
    Margin {
        s: usize,
        a: usize,
        value: f64,
        margin: f64,
    },

    #[error("horizon {horizon} leaves truncation bias {bias} above target {target}")]
    HorizonTooSmall {
        horizon: usize,
        bias: f64,
        target: f64,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed {what}: {message}")]
    Parse { what: &'static str, message: String },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    /// A numerical post-condition failed; carries a diagnostic dump.
    #[error("numerical contract violated in {what}: {detail}")]
    Contract { what: &'static str, detail: String },
}

impl Error {
    /// True for failures of internal numerical contracts, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::Contract { .. } | Error::CesaroCap { .. }
        )
    }

    pub(crate) fn dim(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            found,
        }
    }
}
