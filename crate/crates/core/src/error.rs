use thiserror::Error;

/// Errors raised by the operator laboratory.
///
/// Numerical failures that are part of an experiment's outcome (a sparse
/// family that fails validation, a divergent weight condition) are reported
/// as data, not through this type.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("hypersingular index t = {t} outside the admissible range {lower} < t < {upper}")]
    InadmissibleIndex { t: f64, lower: f64, upper: f64 },

    #[error("grid cannot resolve level-{level} boxes: {nodes} nodes inside, at least {required} required")]
    UnresolvedGrid {
        level: u32,
        nodes: usize,
        required: usize,
    },

    #[error("cube {cube} is not contained in the root cube")]
    OutsideRoot { cube: String },

    #[error("family has a single layer (rank-one operator); degree is undefined")]
    SingleLayer,

    #[error("operator `{kind}` is not supported on this grid: {reason}")]
    Unsupported { kind: String, reason: String },

    #[error("function has {values} values but the grid has {nodes} nodes")]
    LengthMismatch { values: usize, nodes: usize },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Checks `1 < t < 3/2`, the range where the disc operators are defined.
pub fn check_disc_index(t: f64) -> Result<()> {
    if t.is_finite() && t > 1.0 && t < 1.5 {
        Ok(())
    } else {
        Err(Error::InadmissibleIndex {
            t,
            lower: 1.0,
            upper: 1.5,
        })
    }
}
