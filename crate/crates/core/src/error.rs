use thiserror::Error;

/// Errors produced by estimators, allocation rules and the sweep harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NmcError {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("non-finite value produced at nesting level {level}")]
    NonFinite { level: usize },

    #[error("effective budget overflows u64")]
    BudgetOverflow,

    #[error("budget {budget} is infeasible: at least {minimum} required")]
    InfeasibleBudget { budget: u64, minimum: u64 },

    #[error("missing input: {0}")]
    MissingInput(&'static str),

    #[error("function is not linear in its second argument (probe at y={y}, residual {residual:e})")]
    LinearityViolation { y: f64, residual: f64 },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("unsupported problem: {0}")]
    Unsupported(String),

    #[error("integration failed at t={t}: state became non-finite")]
    Integration { t: f64 },

    #[error("{failed} of {total} replicates failed, above the 1% abort threshold")]
    TooManyFailures { failed: usize, total: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = NmcError> = std::result::Result<T, E>;
