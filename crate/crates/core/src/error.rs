use thiserror::Error;

use crate::refine::PartitionResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("entry {0} has original value 0 or 1 and cannot be parametrized")]
    ZeroEntry(String),
    #[error("row {0} contains more than one explicitly modified entry")]
    UnsupportedMultiEntryRow(String),
    #[error("parameter `{name}` is shared by entries with different original values")]
    InconsistentSharedParameter { name: String },
    #[error("instantiation is not well-formed: {0}")]
    NotWellFormed(String),
    #[error("parameter `{0}` has no value")]
    UnboundParameter(String),
    #[error("polynomial is not multi-affine: {0}")]
    UnsupportedDegree(String),
    #[error("variable order is not topological: {0}")]
    BadOrder(String),
    #[error("evidence has probability zero")]
    EvidenceImpossible,
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("region is outside the parameter space: {0}")]
    BadRegion(String),
    #[error("coverage {:.6} not reached before the box guard tripped", .0.coverage)]
    CoverageUnreachable(Box<PartitionResult>),
    #[error("CD distance unsupported: {0}")]
    UnsupportedForCD(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown value `{value}` for variable `{var}`")]
    UnknownValue { var: String, value: String },
    #[error("row {row} of `{var}` sums to {sum}, expected 1")]
    RowSum { var: String, row: String, sum: f64 },
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
