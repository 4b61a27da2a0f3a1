//! Crate-wide error type.

use thiserror::Error;

/// Failure category for a single named theorem condition or assumption.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionFailure {
    /// Condition label as used by the synthesis procedure ("I", "II", "III",
    /// "IV", "Assumption 1", ...).
    pub condition: String,
    /// Human-readable diagnostic.
    pub detail: String,
}

impl std::fmt::Display for ConditionFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.condition, self.detail)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric: asymmetry {asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },

    #[error("LAPACK backend failure: {0}")]
    Backend(String),

    #[error("no dichotomy: {count} eigenvalue(s) inside the axis band ±{band:.3e}")]
    NoDichotomy { count: usize, band: f64 },

    #[error("invariant subspace is numerically defective (residual {residual:.3e})")]
    DefectiveSubspace { residual: f64 },

    #[error("no solution on this branch: subspace basis condition number {cond:.3e}")]
    NoBranchSolution { cond: f64 },

    #[error("pole on shifted axis near omega = {omega:.6e}")]
    PoleOnShiftedAxis { omega: f64 },

    #[error("matrix does not have a single zero mode (nullity {nullity})")]
    NotSingleZeroMode { nullity: usize },

    #[error("element {index} = {value} is not rational within tolerance {tol:.3e}")]
    NotRational { index: usize, value: f64, tol: f64 },

    #[error("element {index} rationalizes to zero; nonzero rational required")]
    ZeroRational { index: usize },

    #[error("integer overflow while forming the common denominator")]
    LcmOverflow,

    #[error("degenerate output direction: component {index} of the output vector vanishes")]
    DegenerateOutputDirection { index: usize },

    #[error("{flavor} decomposition failed: {detail}")]
    Decomposition { flavor: &'static str, detail: String },

    #[error("{theorem} conditions failed: {}", failures.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "))]
    SynthesisConditions {
        theorem: &'static str,
        failures: Vec<ConditionFailure>,
    },

    #[error("search failed: {0}")]
    SearchFailed(String),

    #[error("singular parameter Jacobian (condition {cond:.3e}); nonsingularity hypothesis fails")]
    SingularJacobian { cond: f64 },

    #[error("matrix is singular to working precision (condition {cond:.3e} exceeds {limit:.3e})")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("validation: {0}")]
    Validation(String),

    #[error("simulation diverged at t = {time:.6}")]
    Diverged { time: f64 },

    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for input/validation problems,
    /// 1 for method-level failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Dimension(_) | Error::Json(_) | Error::Io(_) => 2,
            _ => 1,
        }
    }
}
