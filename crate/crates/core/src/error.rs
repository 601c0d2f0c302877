//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dag: {0}")]
    InvalidDag(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid branching program: {0}")]
    InvalidProgram(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("state {state} has no edge labeled {label}; input is outside the program's supported family")]
    MissingEdge { state: usize, label: usize },

    #[error("oracle has no answer for variable {0}")]
    OracleDomain(String),

    #[error("answer {answer} for variable {var} is outside 1..={k}")]
    AnswerOutOfRange { var: String, answer: usize, k: usize },

    #[error("pebbling budget {cap} exhausted without a complete sequence")]
    BudgetExhausted { cap: usize },

    #[error("enumeration guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("thrifty violation during analysis: state {state} queries {var} but the children of node {node} have values {expected:?}")]
    ThriftyViolation { state: usize, var: String, node: usize, expected: Vec<usize> },

    #[error("advice protocol invariant broken: {0}")]
    ProtocolInvariant(String),

    #[error("computation path never queries the root's thrifty variable")]
    MissingRootQuery,

    #[error("pebbling annotation invariant broken at step {step}: {reason}")]
    AnnotationInvariant { step: usize, reason: String },

    #[error("element {0} out of range for this naming")]
    ElementOutOfRange(usize),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
