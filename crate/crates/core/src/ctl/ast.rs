use std::fmt;

use super::value::Value;

/// Source position (1-based). Positions are metadata and never take part in
/// AST equality, so a reparsed pretty-print compares equal to the original.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Pos { line, col }
    }
}

impl PartialEq for Pos {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, col {}", self.line, self.col)
    }
}

/// Parsed program. Equality compares statements only.
#[derive(Debug, Clone)]
pub struct Program {
    pub source: String,
    pub body: Vec<Stmt>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body
    }
}

impl Program {
    /// Names of every call expression in the program, in source order.
    pub fn called_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for stmt in &self.body {
            stmt.visit_exprs(&mut |e| {
                if let Expr::Call { name, .. } = e {
                    out.push(name.as_str());
                }
            });
        }
        out
    }

    /// Every string literal in the program, in source order.
    pub fn string_literals(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for stmt in &self.body {
            stmt.visit_exprs(&mut |e| match e {
                Expr::Literal(Value::Str(s)) => out.push(s.as_str()),
                Expr::Map(entries) => out.extend(entries.iter().map(|(k, _)| k.as_str())),
                _ => {}
            });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign { name: String, value: Expr },
    Expr(Expr),
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Option<Vec<Stmt>> },
    For { var: String, iter: Expr, body: Vec<Stmt> },
    Return(Expr),
}

impl Stmt {
    /// Pre-order walk over every expression reachable from this statement.
    pub fn visit_exprs<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        match &self.kind {
            StmtKind::Assign { value, .. } => value.visit(f),
            StmtKind::Expr(e) | StmtKind::Return(e) => e.visit(f),
            StmtKind::If { cond, then_body, else_body } => {
                cond.visit(f);
                for s in then_body {
                    s.visit_exprs(f);
                }
                for s in else_body.iter().flatten() {
                    s.visit_exprs(f);
                }
            }
            StmtKind::For { iter, body, .. } => {
                iter.visit(f);
                for s in body {
                    s.visit_exprs(f);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "or",
            BinOp::And => "and",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }
}

/// Call arguments: tools take `name=value` pairs, builtins take positional
/// arguments.
#[derive(Debug, Clone, PartialEq)]
pub enum CallArgs {
    Keyword(Vec<(String, Expr)>),
    Positional(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Scalar literal (null, bool, int, float, string).
    Literal(Value),
    Var(String),
    List(Vec<Expr>),
    Map(Vec<(String, Expr)>),
    Call {
        name: String,
        args: CallArgs,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

impl Expr {
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Literal(_) | Expr::Var(_) => {}
            Expr::List(items) => items.iter().for_each(|e| e.visit(f)),
            Expr::Map(entries) => entries.iter().for_each(|(_, e)| e.visit(f)),
            Expr::Call { args, .. } => match args {
                CallArgs::Keyword(kw) => kw.iter().for_each(|(_, e)| e.visit(f)),
                CallArgs::Positional(pos) => pos.iter().for_each(|e| e.visit(f)),
            },
            Expr::Index { base, index } => {
                base.visit(f);
                index.visit(f);
            }
            Expr::Unary { operand, .. } => operand.visit(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.visit(f);
                rhs.visit(f);
            }
        }
    }
}

/// Built-in functions. They are the only callables that take positional
/// arguments, and tools may not shadow them.
pub const BUILTINS: &[&str] = &["len", "contains", "str", "abs", "round", "min", "max"];

pub fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&name)
}

pub const KEYWORDS: &[&str] = &["if", "else", "for", "in", "return", "and", "or", "not", "true", "false", "null"];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}
