use thiserror::Error;

use crate::elliptic::SolveReport;
use crate::fields::ScalarField;

/// One failed modelling assumption, tagged with the assumption it breaks.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub tag: &'static str,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}) violated: {}", self.tag, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("argument {value} outside the potential domain {domain}")]
    DomainViolation { value: f64, domain: &'static str },
    #[error("invalid elliptic problem: {0}")]
    InvalidProblem(String),
    #[error("linear solve did not converge: {iterations} iterations, residual {residual:.3e}", iterations = .report.iterations, residual = .report.residual_norm)]
    NoConvergence {
        best: Box<ScalarField>,
        report: SolveReport,
    },
    #[error("incompatible right-hand side for the singular Neumann problem (net source {net:.3e})")]
    IncompatibleRhs { net: f64 },
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("iterate left the potential domain and could not be projected back")]
    DomainEscape,
    #[error("time step {dt:.3e} violates the CFL bound; admissible dt <= {admissible:.3e}")]
    CflViolation { dt: f64, admissible: f64 },
    #[error("Picard coupling stalled after {iterations} iterations (increment {increment:.3e})")]
    PicardStall { iterations: usize, increment: f64 },
    #[error("concave part too strong for the singular limit: theta = {theta} must be < 2")]
    ConvexityViolation { theta: f64 },
    #[error("{}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("step {step} from t = {t}: {source}")]
    StepFailed {
        step: usize,
        t: f64,
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
