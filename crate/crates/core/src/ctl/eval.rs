use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::error::{Limit, RuntimeError, RuntimeErrorKind, ToolError};
use super::value::{Value, MAX_COLLECTION_LEN};

/// Resource limits for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalLimits {
    pub max_steps: u64,
    pub max_value_bytes: usize,
    pub max_tool_calls: usize,
}

impl Default for EvalLimits {
    fn default() -> Self {
        EvalLimits { max_steps: 10_000, max_value_bytes: 1 << 20, max_tool_calls: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("all evaluation limits must be strictly positive")]
pub struct InvalidLimits;

impl EvalLimits {
    pub fn new(max_steps: u64, max_value_bytes: usize, max_tool_calls: usize) -> Result<Self, InvalidLimits> {
        let limits = EvalLimits { max_steps, max_value_bytes, max_tool_calls };
        limits.validate()?;
        Ok(limits)
    }

    pub fn validate(&self) -> Result<(), InvalidLimits> {
        if self.max_steps == 0 || self.max_value_bytes == 0 || self.max_tool_calls == 0 {
            Err(InvalidLimits)
        } else {
            Ok(())
        }
    }
}

/// Why a tool call did not produce a value.
#[derive(Debug, Clone, PartialEq)]
pub enum ToolFault {
    Unknown,
    Failed(ToolError),
}

/// The interpreter's only window onto the outside world.
pub trait ToolHost {
    fn call_tool(&mut self, name: &str, args: &BTreeMap<String, Value>) -> Result<Value, ToolFault>;
}

/// A host with no tools; every call is `UnknownTool`.
pub struct NoTools;

impl ToolHost for NoTools {
    fn call_tool(&mut self, _: &str, _: &BTreeMap<String, Value>) -> Result<Value, ToolFault> {
        Err(ToolFault::Unknown)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    pub args: BTreeMap<String, Value>,
    pub returned: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    /// Value of `return`, else of the variable `result`, else null.
    pub result: Value,
    pub tool_trace: Vec<ToolCall>,
    pub steps_used: u64,
}

pub fn evaluate(program: &Program, host: &mut dyn ToolHost, limits: EvalLimits) -> Result<EvalOutcome, RuntimeError> {
    evaluate_with(program, host, limits, Vec::new())
}

/// Like [`evaluate`], with variables pre-bound before the first statement.
pub fn evaluate_with(
    program: &Program,
    host: &mut dyn ToolHost,
    limits: EvalLimits,
    bindings: Vec<(String, Value)>,
) -> Result<EvalOutcome, RuntimeError> {
    let mut interp = Interpreter { host, limits, vars: bindings.into_iter().collect(), steps: 0, trace: Vec::new() };
    let result = match interp.exec_block(&program.body)? {
        Flow::Return(v) => v,
        Flow::Normal => interp.vars.remove("result").unwrap_or(Value::Null),
    };
    Ok(EvalOutcome { result, tool_trace: interp.trace, steps_used: interp.steps })
}

/// Strict verdict extraction: only `Bool` counts.
pub fn coerce_bool(v: &Value) -> Result<bool, RuntimeErrorKind> {
    match v {
        Value::Bool(b) => Ok(*b),
        other => Err(RuntimeErrorKind::TypeMismatch(format!("expected bool verdict, got {}", other.type_name()))),
    }
}

enum Flow {
    Normal,
    Return(Value),
}

type Res<T> = Result<T, RuntimeErrorKind>;

struct Interpreter<'h> {
    host: &'h mut dyn ToolHost,
    limits: EvalLimits,
    vars: BTreeMap<String, Value>,
    steps: u64,
    trace: Vec<ToolCall>,
}

fn mismatch(msg: impl Into<String>) -> RuntimeErrorKind {
    RuntimeErrorKind::TypeMismatch(msg.into())
}

impl Interpreter<'_> {
    fn tick(&mut self) -> Res<()> {
        if self.steps >= self.limits.max_steps {
            return Err(RuntimeErrorKind::LimitExceeded(Limit::Steps));
        }
        self.steps += 1;
        Ok(())
    }

    fn check_size(&self, v: Value) -> Res<Value> {
        if matches!(v, Value::Str(_) | Value::List(_) | Value::Map(_)) {
            if v.max_collection_len() > MAX_COLLECTION_LEN {
                return Err(RuntimeErrorKind::LimitExceeded(Limit::CollectionLen));
            }
            if v.approx_bytes() > self.limits.max_value_bytes {
                return Err(RuntimeErrorKind::LimitExceeded(Limit::ValueBytes));
            }
        }
        Ok(v)
    }

    fn exec_block(&mut self, body: &[Stmt]) -> Result<Flow, RuntimeError> {
        for stmt in body {
            if let Flow::Return(v) = self.exec(stmt)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, stmt: &Stmt) -> Result<Flow, RuntimeError> {
        let at = |kind| RuntimeError::new(kind, stmt.pos);
        self.tick().map_err(at)?;
        match &stmt.kind {
            StmtKind::Assign { name, value } => {
                let v = self.eval(value).map_err(at)?;
                self.vars.insert(name.clone(), v);
            }
            StmtKind::Expr(e) => {
                self.eval(e).map_err(at)?;
            }
            StmtKind::Return(e) => return Ok(Flow::Return(self.eval(e).map_err(at)?)),
            StmtKind::If { cond, then_body, else_body } => {
                let c = self.eval(cond).map_err(at)?;
                let c = c
                    .as_bool()
                    .ok_or_else(|| at(mismatch(format!("if condition must be bool, got {}", c.type_name()))))?;
                if c {
                    return self.exec_block(then_body);
                } else if let Some(else_body) = else_body {
                    return self.exec_block(else_body);
                }
            }
            StmtKind::For { var, iter, body } => {
                let items = match self.eval(iter).map_err(at)? {
                    Value::List(items) => items,
                    Value::Map(m) => m.into_keys().map(Value::Str).collect(),
                    Value::Str(s) => s.chars().map(|c| Value::Str(c.to_string())).collect(),
                    other => return Err(at(mismatch(format!("cannot iterate over {}", other.type_name())))),
                };
                for item in items {
                    self.tick().map_err(at)?;
                    self.vars.insert(var.clone(), item);
                    if let Flow::Return(v) = self.exec_block(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
        }
        Ok(Flow::Normal)
    }

    fn eval(&mut self, e: &Expr) -> Res<Value> {
        match e {
            Expr::Literal(v) => Ok(v.clone()),
            Expr::Var(name) => {
                self.vars.get(name).cloned().ok_or_else(|| RuntimeErrorKind::UndefinedVariable(name.clone()))
            }
            Expr::List(items) => {
                let vals = items.iter().map(|i| self.eval(i)).collect::<Res<Vec<_>>>()?;
                self.check_size(Value::List(vals))
            }
            Expr::Map(entries) => {
                let mut m = BTreeMap::new();
                for (k, v) in entries {
                    let v = self.eval(v)?;
                    m.insert(k.clone(), v);
                }
                self.check_size(Value::Map(m))
            }
            Expr::Call { name, args } => match args {
                CallArgs::Positional(args) => {
                    let vals = args.iter().map(|a| self.eval(a)).collect::<Res<Vec<_>>>()?;
                    let out = call_builtin(name, vals)?;
                    self.check_size(out)
                }
                CallArgs::Keyword(args) => {
                    let mut vals = BTreeMap::new();
                    for (k, v) in args {
                        let v = self.eval(v)?;
                        vals.insert(k.clone(), v);
                    }
                    self.call_tool(name, vals)
                }
            },
            Expr::Index { base, index } => {
                let base = self.eval(base)?;
                let index = self.eval(index)?;
                index_value(base, &index)
            }
            Expr::Unary { op: UnaryOp::Neg, operand } => match self.eval(operand)? {
                Value::Int(i) => i.checked_neg().map(Value::Int).ok_or(RuntimeErrorKind::Overflow),
                Value::Float(x) => Ok(Value::Float(-x)),
                other => Err(mismatch(format!("cannot negate {}", other.type_name()))),
            },
            Expr::Unary { op: UnaryOp::Not, operand } => match self.eval(operand)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                other => Err(mismatch(format!("`not` needs bool, got {}", other.type_name()))),
            },
            Expr::Binary { op: op @ (BinOp::And | BinOp::Or), lhs, rhs } => {
                let l = self.eval(lhs)?;
                let l = l
                    .as_bool()
                    .ok_or_else(|| mismatch(format!("`{}` needs bool operands, got {}", op.symbol(), l.type_name())))?;
                let short = if *op == BinOp::And { !l } else { l };
                if short {
                    return Ok(Value::Bool(l));
                }
                let r = self.eval(rhs)?;
                r.as_bool()
                    .map(Value::Bool)
                    .ok_or_else(|| mismatch(format!("`{}` needs bool operands, got {}", op.symbol(), r.type_name())))
            }
            Expr::Binary { op, lhs, rhs } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                let out = binary(*op, l, r)?;
                self.check_size(out)
            }
        }
    }

    fn call_tool(&mut self, name: &str, args: BTreeMap<String, Value>) -> Res<Value> {
        if self.trace.len() >= self.limits.max_tool_calls {
            return Err(RuntimeErrorKind::LimitExceeded(Limit::ToolCalls));
        }
        match self.host.call_tool(name, &args) {
            Ok(v) => {
                let v = self.check_size(v)?;
                self.trace.push(ToolCall { tool: name.to_string(), args, returned: v.clone() });
                Ok(v)
            }
            Err(ToolFault::Unknown) => Err(RuntimeErrorKind::UnknownTool(name.to_string())),
            Err(ToolFault::Failed(error)) => Err(RuntimeErrorKind::Tool { tool: name.to_string(), error }),
        }
    }
}

fn index_value(base: Value, index: &Value) -> Res<Value> {
    match (base, index) {
        (Value::List(items), Value::Int(i)) => {
            let len = items.len();
            let at = resolve_index(*i, len)?;
            Ok(items.into_iter().nth(at).unwrap_or(Value::Null))
        }
        (Value::Str(s), Value::Int(i)) => {
            let chars: Vec<char> = s.chars().collect();
            let at = resolve_index(*i, chars.len())?;
            Ok(Value::Str(chars[at].to_string()))
        }
        (Value::Map(mut m), Value::Str(k)) => {
            m.remove(k.as_str()).ok_or_else(|| RuntimeErrorKind::KeyMissing(k.clone()))
        }
        (base, index) => Err(mismatch(format!("cannot index {} with {}", base.type_name(), index.type_name()))),
    }
}

/// Negative indices count from the end.
fn resolve_index(i: i64, len: usize) -> Res<usize> {
    let resolved = if i < 0 { len as i64 + i } else { i };
    if resolved < 0 || resolved >= len as i64 {
        Err(RuntimeErrorKind::IndexOutOfRange { index: i, len })
    } else {
        Ok(resolved as usize)
    }
}

/// Exact comparison of an integer and a float (no rounding through f64).
fn cmp_int_float(i: i64, x: f64) -> Option<Ordering> {
    if x.is_nan() {
        return None;
    }
    // 2^63 is exactly representable; every i64 is below it.
    const TWO_63: f64 = 9_223_372_036_854_775_808.0;
    if x >= TWO_63 {
        return Some(Ordering::Less);
    }
    if x < -TWO_63 {
        return Some(Ordering::Greater);
    }
    let floor = x.floor();
    let whole = floor as i64;
    match i.cmp(&whole) {
        Ordering::Equal if x > floor => Some(Ordering::Less),
        ord => Some(ord),
    }
}

fn numeric_cmp(l: &Value, r: &Value) -> Option<Ordering> {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
        (Value::Float(a), Value::Float(b)) => a.partial_cmp(b),
        (Value::Int(a), Value::Float(b)) => cmp_int_float(*a, *b),
        (Value::Float(a), Value::Int(b)) => cmp_int_float(*b, *a).map(Ordering::reverse),
        _ => None,
    }
}

/// Structural equality with exact numeric comparison across int/float.
pub fn values_equal(l: &Value, r: &Value) -> bool {
    match (l, r) {
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => {
            numeric_cmp(l, r) == Some(Ordering::Equal)
        }
        (Value::List(a), Value::List(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| values_equal(x, y)),
        (Value::Map(a), Value::Map(b)) => {
            a.len() == b.len() && a.iter().zip(b).all(|((ka, va), (kb, vb))| ka == kb && values_equal(va, vb))
        }
        _ => l == r,
    }
}

/// Ordering for `<`-family operators and min/max: numbers with numbers,
/// strings with strings.
fn order(l: &Value, r: &Value) -> Res<Ordering> {
    if let (Value::Str(a), Value::Str(b)) = (l, r) {
        return Ok(a.cmp(b));
    }
    numeric_cmp(l, r).ok_or_else(|| mismatch(format!("cannot order {} and {}", l.type_name(), r.type_name())))
}

fn arith_float(op: BinOp, a: f64, b: f64) -> Res<Value> {
    let out = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return Err(RuntimeErrorKind::DivByZero);
            }
            a / b
        }
        _ => unreachable!("non-arithmetic operator"),
    };
    if out.is_finite() {
        Ok(Value::Float(out))
    } else {
        Err(RuntimeErrorKind::Overflow)
    }
}

fn binary(op: BinOp, l: Value, r: Value) -> Res<Value> {
    match op {
        BinOp::Eq => return Ok(Value::Bool(values_equal(&l, &r))),
        BinOp::Ne => return Ok(Value::Bool(!values_equal(&l, &r))),
        BinOp::Lt => return Ok(Value::Bool(order(&l, &r)? == Ordering::Less)),
        BinOp::Le => return Ok(Value::Bool(order(&l, &r)? != Ordering::Greater)),
        BinOp::Gt => return Ok(Value::Bool(order(&l, &r)? == Ordering::Greater)),
        BinOp::Ge => return Ok(Value::Bool(order(&l, &r)? != Ordering::Less)),
        _ => {}
    }
    match (op, l, r) {
        (BinOp::Div, l, r) => match (l.as_f64(), r.as_f64()) {
            (Some(a), Some(b)) if !matches!(l, Value::Str(_)) => arith_float(op, a, b),
            _ => Err(mismatch(format!("cannot divide {} by {}", l.type_name(), r.type_name()))),
        },
        (_, Value::Int(a), Value::Int(b)) => {
            let out = match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
                _ => unreachable!("handled above"),
            };
            out.map(Value::Int).ok_or(RuntimeErrorKind::Overflow)
        }
        (_, l @ (Value::Int(_) | Value::Float(_)), r @ (Value::Int(_) | Value::Float(_))) => {
            arith_float(op, l.as_f64().unwrap_or(0.0), r.as_f64().unwrap_or(0.0))
        }
        (BinOp::Add, Value::Str(a), Value::Str(b)) => Ok(Value::Str(a + &b)),
        (BinOp::Add, Value::List(mut a), Value::List(b)) => {
            if a.len() + b.len() > MAX_COLLECTION_LEN {
                return Err(RuntimeErrorKind::LimitExceeded(Limit::CollectionLen));
            }
            a.extend(b);
            Ok(Value::List(a))
        }
        (op, l, r) => Err(mismatch(format!(
            "unsupported operands for `{}`: {} and {}",
            op.symbol(),
            l.type_name(),
            r.type_name()
        ))),
    }
}

fn arity(name: &str, args: &[Value], allowed: std::ops::RangeInclusive<usize>) -> Res<()> {
    if allowed.contains(&args.len()) {
        Ok(())
    } else {
        Err(mismatch(format!("{name}() takes {allowed:?} arguments, got {}", args.len())))
    }
}

fn call_builtin(name: &str, mut args: Vec<Value>) -> Res<Value> {
    match name {
        "len" => {
            arity(name, &args, 1..=1)?;
            let n = match &args[0] {
                Value::List(items) => items.len(),
                Value::Map(m) => m.len(),
                Value::Str(s) => s.chars().count(),
                other => return Err(mismatch(format!("len() of {}", other.type_name()))),
            };
            Ok(Value::Int(n as i64))
        }
        "contains" => {
            arity(name, &args, 2..=2)?;
            let found = match (&args[0], &args[1]) {
                (Value::List(items), needle) => items.iter().any(|x| values_equal(x, needle)),
                (Value::Str(hay), Value::Str(needle)) => hay.contains(needle.as_str()),
                (Value::Map(m), Value::Str(key)) => m.contains_key(key),
                (c, n) => return Err(mismatch(format!("contains() over {} with {}", c.type_name(), n.type_name()))),
            };
            Ok(Value::Bool(found))
        }
        "str" => {
            arity(name, &args, 1..=1)?;
            Ok(Value::Str(args.pop().unwrap_or(Value::Null).answer_text_or_null()))
        }
        "abs" => {
            arity(name, &args, 1..=1)?;
            match &args[0] {
                Value::Int(i) => i.checked_abs().map(Value::Int).ok_or(RuntimeErrorKind::Overflow),
                Value::Float(x) => Ok(Value::Float(x.abs())),
                other => Err(mismatch(format!("abs() of {}", other.type_name()))),
            }
        }
        "round" => {
            arity(name, &args, 1..=2)?;
            let x = match &args[0] {
                Value::Int(i) if args.len() == 1 => return Ok(Value::Int(*i)),
                v => v.as_f64().ok_or_else(|| mismatch(format!("round() of {}", v.type_name())))?,
            };
            match args.get(1) {
                None => {
                    let r = round_to(x, 0);
                    if r.abs() < 9.2e18 {
                        Ok(Value::Int(r as i64))
                    } else {
                        Err(RuntimeErrorKind::Overflow)
                    }
                }
                Some(Value::Int(nd)) if (0..=15).contains(nd) => Ok(Value::Float(round_to(x, *nd as usize))),
                Some(other) => Err(mismatch(format!("round() ndigits must be int in 0..=15, got {other}"))),
            }
        }
        "min" | "max" => {
            arity(name, &args, 1..=1)?;
            let Value::List(items) = args.pop().unwrap_or(Value::Null) else {
                return Err(mismatch(format!("{name}() takes a list")));
            };
            let mut best: Option<Value> = None;
            for item in items {
                best = Some(match best {
                    None => item,
                    Some(cur) => {
                        let ord = order(&item, &cur)?;
                        let better = if name == "min" { ord == Ordering::Less } else { ord == Ordering::Greater };
                        if better {
                            item
                        } else {
                            cur
                        }
                    }
                });
            }
            best.ok_or(RuntimeErrorKind::IndexOutOfRange { index: 0, len: 0 })
        }
        other => Err(RuntimeErrorKind::UnknownTool(other.to_string())),
    }
}

/// Correctly rounded decimal rounding (ties-to-even on the exact binary value).
fn round_to(x: f64, digits: usize) -> f64 {
    format!("{x:.digits$}").parse().unwrap_or(x)
}

trait AnswerTextOrNull {
    fn answer_text_or_null(&self) -> String;
}

impl AnswerTextOrNull for Value {
    /// `str(null)` is "null" rather than the empty answer string.
    fn answer_text_or_null(&self) -> String {
        match self {
            Value::Null => "null".to_string(),
            other => other.answer_text(),
        }
    }
}
