use serde::{Deserialize, Serialize};

use crate::ctl::{ToolError, Value};
use crate::env::{arg, arg_str, Args, EnvState, ParamType, Tool};

/// Absolute tolerance for numeric answers.
pub const NUMERIC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Numeric,
    ExactString,
}

impl MatchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchMode::Numeric => "numeric",
            MatchMode::ExactString => "exact_string",
        }
    }

    pub fn parse(s: &str) -> Option<MatchMode> {
        match s {
            "numeric" => Some(MatchMode::Numeric),
            "exact_string" => Some(MatchMode::ExactString),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerTask {
    pub expected_answer: String,
    pub match_mode: MatchMode,
}

impl AnswerTask {
    /// `None` when a numeric task's expected answer is not a number.
    pub fn new(expected_answer: impl Into<String>, match_mode: MatchMode) -> Option<AnswerTask> {
        let expected_answer = expected_answer.into();
        if match_mode == MatchMode::Numeric && parse_number(&expected_answer).is_none() {
            return None;
        }
        Some(AnswerTask { expected_answer, match_mode })
    }
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

pub fn match_answer(answer: &str, task: &AnswerTask) -> bool {
    match task.match_mode {
        MatchMode::Numeric => match (parse_number(answer), parse_number(&task.expected_answer)) {
            (Some(a), Some(e)) => (a - e).abs() <= NUMERIC_TOLERANCE,
            _ => false,
        },
        MatchMode::ExactString => {
            let answer = answer.trim();
            !answer.is_empty() && answer.to_lowercase() == task.expected_answer.trim().to_lowercase()
        }
    }
}

fn check_answer(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let expected = arg_str(args, "expected")?;
    let mode = arg_str(args, "mode")?;
    let mode =
        MatchMode::parse(mode).ok_or_else(|| ToolError::invalid_argument(format!("unknown match mode `{mode}`")))?;
    let task = AnswerTask::new(expected, mode)
        .ok_or_else(|| ToolError::invalid_argument("numeric mode needs a numeric expected answer"))?;
    let answer = match arg(args, "answer")? {
        Value::Null => return Ok(Value::Bool(false)),
        v => v.answer_text(),
    };
    Ok(Value::Bool(match_answer(&answer, &task)))
}

/// Verifier-only tool comparing the submitted answer with the reference.
pub fn check_answer_tool() -> Tool {
    Tool::read(
        "check_answer",
        "Compare a submitted answer with the expected answer under a match mode (numeric or exact_string).",
        check_answer,
    )
    .param("answer", ParamType::Any)
    .param("expected", ParamType::String)
    .param("mode", ParamType::String)
    .hidden()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching() {
        let num = AnswerTask::new("112.71", MatchMode::Numeric).unwrap();
        assert!(match_answer("112.71", &num));
        assert!(match_answer(" 112.710000 ", &num));
        assert!(!match_answer("112.710001", &num));
        assert!(!match_answer("abc", &num));
        assert!(!match_answer("", &num));
        let exact = AnswerTask::new("gtcagt", MatchMode::ExactString).unwrap();
        assert!(match_answer(" GTCAGT ", &exact));
        assert!(!match_answer("", &AnswerTask::new("", MatchMode::ExactString).unwrap()));
        assert!(AnswerTask::new("n/a", MatchMode::Numeric).is_none());
    }
}
