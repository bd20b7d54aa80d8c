use std::fmt::Write;

use super::ast::*;
use super::value::{format_float, write_string_literal, Value};

/// Renders a program back to source, one statement per line with four-space
/// indentation. The output reparses to an equal AST.
pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for stmt in &program.body {
        write_stmt(&mut out, stmt, 0);
    }
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn write_block(out: &mut String, body: &[Stmt], level: usize) {
    out.push_str("{\n");
    for s in body {
        write_stmt(out, s, level + 1);
    }
    indent(out, level);
    out.push('}');
}

fn write_stmt(out: &mut String, stmt: &Stmt, level: usize) {
    indent(out, level);
    match &stmt.kind {
        StmtKind::Assign { name, value } => {
            let _ = write!(out, "{name} = {}", expr_to_string(value));
        }
        StmtKind::Expr(e) => out.push_str(&expr_to_string(e)),
        StmtKind::Return(e) => {
            let _ = write!(out, "return {}", expr_to_string(e));
        }
        StmtKind::If { cond, then_body, else_body } => {
            let _ = write!(out, "if {} ", expr_to_string(cond));
            write_block(out, then_body, level);
            if let Some(else_body) = else_body {
                out.push_str(" else ");
                write_block(out, else_body, level);
            }
        }
        StmtKind::For { var, iter, body } => {
            let _ = write!(out, "for {var} in {} ", expr_to_string(iter));
            write_block(out, body, level);
        }
    }
    out.push('\n');
}

// Binding strength, loosest first.
const OR: u8 = 1;
const AND: u8 = 2;
const NOT: u8 = 3;
const CMP: u8 = 4;
const ADD: u8 = 5;
const MUL: u8 = 6;
const NEG: u8 = 7;
const POSTFIX: u8 = 8;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => match op {
            BinOp::Or => OR,
            BinOp::And => AND,
            BinOp::Add | BinOp::Sub => ADD,
            BinOp::Mul | BinOp::Div => MUL,
            _ => CMP,
        },
        Expr::Unary { op: UnaryOp::Not, .. } => NOT,
        Expr::Unary { op: UnaryOp::Neg, .. } => NEG,
        _ => POSTFIX,
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn write_operand(out: &mut String, e: &Expr, min: u8) {
    if precedence(e) < min {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_keyword(s)
}

fn write_literal(out: &mut String, v: &Value) {
    match v {
        Value::Float(x) => out.push_str(&format_float(*x)),
        Value::Str(s) => {
            let _ = write_string_literal(out, s);
        }
        other => {
            let _ = write!(out, "{other}");
        }
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Literal(v) => write_literal(out, v),
        Expr::Var(name) => out.push_str(name),
        Expr::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, item);
            }
            out.push(']');
        }
        Expr::Map(entries) => {
            out.push('{');
            for (i, (k, v)) in entries.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write_string_literal(out, k);
                out.push_str(": ");
                write_expr(out, v);
            }
            out.push('}');
        }
        Expr::Call { name, args } => {
            out.push_str(name);
            out.push('(');
            match args {
                CallArgs::Keyword(kw) => {
                    for (i, (k, v)) in kw.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        out.push_str(k);
                        out.push('=');
                        write_expr(out, v);
                    }
                }
                CallArgs::Positional(pos) => {
                    for (i, v) in pos.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        write_expr(out, v);
                    }
                }
            }
            out.push(')');
        }
        Expr::Index { base, index } => {
            write_operand(out, base, POSTFIX);
            match index.as_ref() {
                Expr::Literal(Value::Str(key)) if is_plain_ident(key) => {
                    out.push('.');
                    out.push_str(key);
                }
                other => {
                    out.push('[');
                    write_expr(out, other);
                    out.push(']');
                }
            }
        }
        Expr::Unary { op: UnaryOp::Neg, operand } => {
            out.push('-');
            write_operand(out, operand, POSTFIX);
        }
        Expr::Unary { op: UnaryOp::Not, operand } => {
            out.push_str("not ");
            write_operand(out, operand, CMP);
        }
        Expr::Binary { op, lhs, rhs } => {
            let (lmin, rmin) = match precedence(e) {
                CMP => (ADD, ADD),
                p => (p, p + 1),
            };
            write_operand(out, lhs, lmin);
            let _ = write!(out, " {} ", op.symbol());
            write_operand(out, rhs, rmin);
        }
    }
}
