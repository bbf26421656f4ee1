use thiserror::Error;

use crate::mechanism::ValidationReport;

/// Errors produced by the analyses in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mechanism:\n{0}")]
    InvalidMechanism(ValidationReport),

    #[error("agent {agent} out of range (mechanism has {agents} agents)")]
    AgentOutOfRange { agent: usize, agents: usize },

    #[error("strategy {strategy} out of range for agent {agent}")]
    StrategyOutOfRange { agent: usize, strategy: usize },

    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid preference: {0}")]
    InvalidPreference(String),

    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("linear program failed: {message}\n{program}")]
    Lp { message: String, program: String },

    #[error("agent {agent} has no strategy that is a best response to every compatible belief")]
    EmptyIntersection { agent: usize },

    #[error("not a bilateral trade mechanism: {0}")]
    NotTradeMechanism(String),

    #[error("search budget exhausted after {examined} candidates ({found} matches so far); resume token {resume}")]
    BudgetExceeded { examined: u64, found: usize, resume: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
