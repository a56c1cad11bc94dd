use thiserror::Error;

use crate::dist::Dist;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("metric axiom violated: {0}")]
    NotAMetric(String),

    #[error("triangle inequality fails at ({i}, {j}, {k}): d(i,k) = {dik} > d(i,j) + d(j,k) = {dij} + {djk}")]
    TriangleViolation {
        i: usize,
        j: usize,
        k: usize,
        dij: Dist,
        djk: Dist,
        dik: Dist,
    },

    #[error("point index {index} out of range for space {space:?} with {len} points")]
    IndexOutOfRange {
        space: String,
        index: usize,
        len: usize,
    },

    #[error("space mismatch: expected {expected:?}, found {found:?}")]
    SpaceMismatch { expected: String, found: String },

    #[error("not a cover: point {point} lies in no element")]
    NotACover { point: usize },

    #[error("empty element at index {0}")]
    EmptyElement(usize),

    #[error("families are not {r}-disjoint: points {x} and {y} at distance {d} lie in elements {a} and {b} of family {family}")]
    NotDisjoint {
        family: usize,
        a: usize,
        b: usize,
        x: usize,
        y: usize,
        d: Dist,
        r: Dist,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("claim verification failed: {0}")]
    ClaimFailed(String),

    #[error("{resource} budget of {limit} exhausted{}", lower_bound.map(|v| format!(" (lower bound {v})")).unwrap_or_default())]
    BudgetExceeded {
        resource: &'static str,
        limit: u64,
        lower_bound: Option<u64>,
    },

    #[error("certificate absent: {0}")]
    CertificateAbsent(String),

    #[error("internal invariant broken: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
