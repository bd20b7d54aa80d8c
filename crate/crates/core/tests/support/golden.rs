//! Golden CTL programs: a text corpus of cases and the runner that checks them.

use std::collections::BTreeMap;

use catforge::ctl::{
    evaluate, parse, EvalLimits, Limit, NoTools, RuntimeErrorKind, ToolError, ToolErrorKind, ToolFault, ToolHost, Value,
};

pub const GOLDEN: &str = include_str!("../data/ctl_golden.txt");

#[derive(Default)]
pub struct StubTools {
    pub counter: i64,
}

impl ToolHost for StubTools {
    fn call_tool(&mut self, name: &str, args: &BTreeMap<String, Value>) -> Result<Value, ToolFault> {
        let record = |qty: i64| {
            let mut m = BTreeMap::new();
            m.insert("qty".to_string(), Value::Int(qty));
            m.insert("tags".to_string(), Value::List(vec![Value::str("x"), Value::str("y")]));
            Value::Map(m)
        };
        match name {
            "echo" => Ok(args.get("value").cloned().unwrap_or(Value::Null)),
            "get_record" => match args.get("id").and_then(Value::as_str) {
                Some("a1") => Ok(record(3)),
                Some("b2") => Ok(record(5)),
                Some(other) => Err(ToolFault::Failed(ToolError::not_found(format!("record {other}")))),
                None => Err(ToolFault::Failed(ToolError::type_mismatch("id must be a string"))),
            },
            "count" => {
                self.counter += 1;
                Ok(Value::Int(self.counter))
            }
            "reject" => {
                let kind = match args.get("kind").and_then(Value::as_str) {
                    Some("NotFound") => ToolErrorKind::NotFound,
                    Some("IneligibleStatus") => ToolErrorKind::IneligibleStatus,
                    Some("InvalidItem") => ToolErrorKind::InvalidItem,
                    Some("TypeMismatch") => ToolErrorKind::TypeMismatch,
                    _ => ToolErrorKind::InvalidArgument,
                };
                Err(ToolFault::Failed(ToolError::new(kind, "rejected")))
            }
            _ => Err(ToolFault::Unknown),
        }
    }
}

#[derive(Debug)]
pub enum Expect {
    Value(Value, Option<usize>),
    Error(String, Option<String>),
    Syntax,
}

#[derive(Debug)]
pub struct Case {
    pub name: String,
    pub source: String,
    pub limits: EvalLimits,
    pub expect: Expect,
}

fn literal(text: &str) -> Value {
    let program = parse(&format!("return {text}")).unwrap_or_else(|e| panic!("bad literal {text}: {e}"));
    evaluate(&program, &mut NoTools, EvalLimits::default()).unwrap().result
}

pub fn parse_cases() -> Vec<Case> {
    let mut cases = Vec::new();
    for block in GOLDEN.split("\n=== ").skip(1) {
        let (name, rest) = block.split_once('\n').unwrap();
        let mut limits = EvalLimits::default();
        let mut source = Vec::new();
        let mut expect = None;
        let mut lines = rest.lines();
        while let Some(line) = lines.next() {
            if let Some(spec) = line.strip_prefix("--- limits ") {
                for kv in spec.split_whitespace() {
                    let (k, v) = kv.split_once('=').unwrap();
                    let v: u64 = v.parse().unwrap();
                    match k {
                        "steps" => limits.max_steps = v,
                        "bytes" => limits.max_value_bytes = v as usize,
                        "tools" => limits.max_tool_calls = v as usize,
                        _ => panic!("unknown limit {k}"),
                    }
                }
            } else if let Some(spec) = line.strip_prefix("--- expect ") {
                let (kind, arg) = spec.split_once(' ').unwrap_or((spec, ""));
                expect = Some(match kind {
                    "value" => {
                        let tools = lines.next().and_then(|l| l.strip_prefix("tools ")).map(|n| n.parse().unwrap());
                        Expect::Value(literal(arg), tools)
                    }
                    "error" => {
                        let mut parts = arg.split_whitespace();
                        Expect::Error(parts.next().unwrap().to_string(), parts.next().map(str::to_string))
                    }
                    "syntax" => Expect::Syntax,
                    other => panic!("unknown expectation {other}"),
                });
                break;
            } else {
                source.push(line);
            }
        }
        cases.push(Case {
            name: name.trim().to_string(),
            source: source.join("\n"),
            limits,
            expect: expect.unwrap_or_else(|| panic!("case {name} has no expectation")),
        });
    }
    cases
}

fn limit_name(l: Limit) -> &'static str {
    match l {
        Limit::Steps => "steps",
        Limit::ToolCalls => "tool_calls",
        Limit::ValueBytes => "value_bytes",
        Limit::CollectionLen => "collection_len",
    }
}

/// Runs one case; Err carries a human-readable mismatch.
pub fn check(case: &Case) -> Result<(), String> {
    let parsed = parse(&case.source);
    let program = match (&case.expect, parsed) {
        (Expect::Syntax, Err(_)) => return Ok(()),
        (Expect::Syntax, Ok(_)) => return Err("parsed, expected a syntax error".into()),
        (_, Err(e)) => return Err(format!("syntax error: {e}")),
        (_, Ok(p)) => p,
    };
    let outcome = evaluate(&program, &mut StubTools::default(), case.limits);
    match (&case.expect, outcome) {
        (Expect::Value(want, tools), Ok(out)) => {
            if out.result != *want {
                return Err(format!("got {}, expected {want}", out.result));
            }
            if out.steps_used > case.limits.max_steps {
                return Err(format!("used {} steps over a budget of {}", out.steps_used, case.limits.max_steps));
            }
            match tools {
                Some(n) if out.tool_trace.len() != *n => {
                    Err(format!("made {} tool calls, expected {n}", out.tool_trace.len()))
                }
                _ => Ok(()),
            }
        }
        (Expect::Error(class, limit), Err(e)) => {
            if e.kind.class() != class {
                return Err(format!("got {}, expected {class}", e.kind));
            }
            match (limit, &e.kind) {
                (Some(want), RuntimeErrorKind::LimitExceeded(l)) if limit_name(*l) != want => {
                    Err(format!("breached {}, expected {want}", limit_name(*l)))
                }
                _ => Ok(()),
            }
        }
        (Expect::Value(..), Err(e)) => Err(format!("runtime error {e}")),
        (_, Ok(out)) => Err(format!("returned {}, expected an error", out.result)),
        (Expect::Syntax, Err(_)) => unreachable!("syntax cases return early"),
    }
}
