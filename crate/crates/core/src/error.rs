use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("tail ratios unbounded: {0}")]
    Unboundable(String),
    #[error("representation error: {0}")]
    Representation(String),
    #[error("degenerate potential: {0}")]
    DegeneratePotential(String),
    #[error("dual-infeasible potential pair at x={x}, y={y} (excess {excess:e})")]
    Construction { x: f64, y: f64, excess: f64 },
    #[error("infeasible pair at x={x}, y={y} (excess {excess:e})")]
    Feasibility { x: f64, y: f64, excess: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

