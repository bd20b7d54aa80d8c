use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::Pos;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("SyntaxError at line {line}, col {col}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: u32, col: u32, message: impl Into<String>) -> Self {
        SyntaxError { line, col, message: message.into() }
    }
}

/// Which evaluation limit was breached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limit {
    Steps,
    ToolCalls,
    ValueBytes,
    CollectionLen,
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Limit::Steps => "step budget",
            Limit::ToolCalls => "tool-call budget",
            Limit::ValueBytes => "value size",
            Limit::CollectionLen => "collection length",
        })
    }
}

/// Failure categories a tool implementation may report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToolErrorKind {
    NotFound,
    IneligibleStatus,
    InvalidItem,
    InvalidArgument,
    TypeMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?}: {message}")]
pub struct ToolError {
    pub kind: ToolErrorKind,
    pub message: String,
}

impl ToolError {
    pub fn new(kind: ToolErrorKind, message: impl Into<String>) -> Self {
        ToolError { kind, message: message.into() }
    }

    pub fn not_found(what: impl fmt::Display) -> Self {
        Self::new(ToolErrorKind::NotFound, format!("{what} not found"))
    }

    pub fn type_mismatch(message: impl Into<String>) -> Self {
        Self::new(ToolErrorKind::TypeMismatch, message)
    }

    pub fn invalid_argument(message: impl Into<String>) -> Self {
        Self::new(ToolErrorKind::InvalidArgument, message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuntimeErrorKind {
    UnknownTool(String),
    TypeMismatch(String),
    KeyMissing(String),
    IndexOutOfRange { index: i64, len: usize },
    DivByZero,
    LimitExceeded(Limit),
    Overflow,
    UndefinedVariable(String),
    Tool { tool: String, error: ToolError },
}

impl RuntimeErrorKind {
    /// Short class label, e.g. `"KeyMissing"`.
    pub fn class(&self) -> &'static str {
        match self {
            RuntimeErrorKind::UnknownTool(_) => "UnknownTool",
            RuntimeErrorKind::TypeMismatch(_) => "TypeMismatch",
            RuntimeErrorKind::KeyMissing(_) => "KeyMissing",
            RuntimeErrorKind::IndexOutOfRange { .. } => "IndexOutOfRange",
            RuntimeErrorKind::DivByZero => "DivByZero",
            RuntimeErrorKind::LimitExceeded(_) => "LimitExceeded",
            RuntimeErrorKind::Overflow => "Overflow",
            RuntimeErrorKind::UndefinedVariable(_) => "UndefinedVariable",
            RuntimeErrorKind::Tool { .. } => "ToolError",
        }
    }
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuntimeErrorKind::UnknownTool(name) => write!(f, "UnknownTool: no tool named `{name}`"),
            RuntimeErrorKind::TypeMismatch(msg) => write!(f, "TypeMismatch: {msg}"),
            RuntimeErrorKind::KeyMissing(key) => write!(f, "KeyMissing: key {key:?} not present"),
            RuntimeErrorKind::IndexOutOfRange { index, len } => {
                write!(f, "IndexOutOfRange: index {index} out of range for length {len}")
            }
            RuntimeErrorKind::DivByZero => f.write_str("DivByZero: division by zero"),
            RuntimeErrorKind::LimitExceeded(limit) => write!(f, "LimitExceeded: {limit} exhausted"),
            RuntimeErrorKind::Overflow => f.write_str("Overflow: integer overflow"),
            RuntimeErrorKind::UndefinedVariable(name) => {
                write!(f, "UndefinedVariable: `{name}` is not defined")
            }
            RuntimeErrorKind::Tool { tool, error } => write!(f, "ToolError in {tool}: {error}"),
        }
    }
}

/// Evaluation failure, located at the statement that raised it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} ({pos})")]
pub struct RuntimeError {
    pub kind: RuntimeErrorKind,
    pub pos: Pos,
}

impl RuntimeError {
    pub fn new(kind: RuntimeErrorKind, pos: Pos) -> Self {
        RuntimeError { kind, pos }
    }

    /// True when the error reflects a defect in the program itself rather than
    /// the contents of the world it ran against. A missing key or a missing
    /// order is state-dependent; calling an unknown tool or comparing a string
    /// with a number is a defect regardless of state.
    pub fn is_program_defect(&self) -> bool {
        match &self.kind {
            RuntimeErrorKind::KeyMissing(_) | RuntimeErrorKind::IndexOutOfRange { .. } => false,
            RuntimeErrorKind::Tool { error, .. } => {
                matches!(error.kind, ToolErrorKind::TypeMismatch | ToolErrorKind::InvalidArgument)
            }
            _ => true,
        }
    }
}
