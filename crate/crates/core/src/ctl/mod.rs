//! The task language: a small, deterministic, sandboxed scripting language in
//! which instructions, verifiers, solutions and failure cases are written.
//!
//! Programs have no ambient I/O. Every side effect goes through a
//! [`ToolHost`], and every evaluation is bounded by [`EvalLimits`].

pub mod ast;
mod error;
mod eval;
mod lexer;
mod parser;
mod printer;
mod value;

pub use ast::{CallArgs, Expr, Pos, Program, Stmt, StmtKind};
pub use error::{Limit, RuntimeError, RuntimeErrorKind, SyntaxError, ToolError, ToolErrorKind};
pub use eval::{
    coerce_bool, evaluate, evaluate_with, values_equal, EvalLimits, EvalOutcome, InvalidLimits, NoTools, ToolCall,
    ToolFault, ToolHost,
};
pub use lexer::{tokenize, Tok, Token};
pub use parser::{parse, parse_bytes, MAX_DEPTH, MAX_SOURCE_BYTES};
pub use printer::{expr_to_string, pretty_print};
pub use value::{Value, MAX_COLLECTION_LEN};
