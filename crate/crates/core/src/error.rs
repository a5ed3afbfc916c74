use crate::measures::EquilibriumResult;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),
    #[error("field singular at node {0}")]
    FieldSingularAtNode(crate::C64),
    #[error("singular point {0}")]
    SingularPoint(crate::C64),
    #[error("evaluation at atom {0}")]
    EvaluationAtAtom(crate::C64),
    #[error("energy unbounded: {0}")]
    EnergyUnbounded(String),
    #[error("equilibrium solver did not converge after {iterations} iterations (kkt residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64, best: Box<EquilibriumResult> },
    #[error("collapse detected: {0}")]
    CollapseDetected(String),
    #[error("variation too large: t*Lip(h) = {0:.3e} >= 1")]
    VariationTooLarge(f64),
    #[error("empty contour system")]
    EmptyContour,
    #[error("R not rational of expected degree (fit residual {0:.3e})")]
    NotRational(f64),
    #[error("trivial function: all moments vanish")]
    TrivialFunction,
    #[error("Szegő condition fails: {0}")]
    SzegoConditionFails(String),
    #[error("probe too close to support: {0}")]
    ProbeTooClose(crate::C64),
    #[error("branch tracking failed: {0}")]
    BranchTracking(String),
    #[error("newton iteration failed: {0}")]
    NewtonFailed(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
