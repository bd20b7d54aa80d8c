use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::state::{EnvState, Event};
use super::tool::{Access, ToolContext, ToolRegistry};
use super::EnvError;
use crate::ctl::{self, EvalLimits, Value};

/// How episode success is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verification {
    /// Verify inspects the final world state.
    State,
    /// Verify inspects the submitted answer, bound to `answer`.
    Answer,
}

/// A simulated world: fixture generator plus its tools.
pub trait World: Send + Sync {
    fn name(&self) -> &'static str;
    fn generate(&self, seed: u64) -> EnvState;
    fn registry(&self) -> &ToolRegistry;
    fn verification(&self) -> Verification;
    /// Whether plain-text messages reach a simulated user.
    fn has_user(&self) -> bool {
        self.verification() == Verification::State
    }
    /// Prose shown before the tool list in the initial observation.
    fn description(&self) -> String;
    /// Strings that must not appear in any observation before the agent has
    /// read them through a tool.
    fn hidden_values(&self, state: &EnvState) -> Vec<String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Executor,
    Challenger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub max_steps: u32,
    pub seed: u64,
    pub mode: Mode,
    pub limits: EvalLimits,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig { max_steps: 15, seed: 0, mode: Mode::Executor, limits: EvalLimits::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum AgentAction {
    Code(String),
    Message(String),
    Answer(String),
    Malformed(String),
}

pub const INVALID_FORMAT: &str = "Reminder: Only output one action or answer, not both. Invalid format. \
Please include either ACTION:...END ACTION or ANSWER:...END ANSWER.";

/// Case-insensitive search for a marker that starts a word.
fn find_ci(hay: &str, needle: &str) -> Option<usize> {
    let upper = hay.to_ascii_uppercase();
    let bytes = upper.as_bytes();
    upper.match_indices(needle).map(|(i, _)| i).find(|&i| i == 0 || !bytes[i - 1].is_ascii_alphanumeric())
}

/// Removes the first `open ... close` block, returning (body, rest).
fn take_block(text: &str, open: &str, close: &str) -> Result<Option<(String, String)>, String> {
    let Some(start) = find_ci(text, open) else {
        return Ok(None);
    };
    let body_start = start + open.len();
    let Some(len) = find_ci(&text[body_start..], close) else {
        return Err(format!("`{open}` without matching `{close}`"));
    };
    let body = text[body_start..body_start + len].trim().to_string();
    let rest = format!("{}{}", &text[..start], &text[body_start + len + close.len()..]);
    Ok(Some((body, rest)))
}

impl AgentAction {
    /// Reads one policy turn. An optional THOUGHT block is discarded; then the
    /// turn must be exactly one ACTION block, exactly one ANSWER block, or
    /// plain text addressed to the user.
    pub fn parse(text: &str) -> AgentAction {
        let malformed = || AgentAction::Malformed(text.to_string());
        let rest = match take_block(text, "THOUGHT:", "END THOUGHT") {
            Ok(Some((_, rest))) => rest,
            Ok(None) => text.to_string(),
            Err(_) => return malformed(),
        };
        let action = take_block(&rest, "ACTION:", "END ACTION");
        let answer = take_block(&rest, "ANSWER:", "END ANSWER");
        match (action, answer) {
            (Err(_), _) | (_, Err(_)) | (Ok(Some(_)), Ok(Some(_))) => malformed(),
            (Ok(Some((body, left))), Ok(None)) => {
                if left.trim().is_empty() {
                    AgentAction::Code(body)
                } else {
                    malformed()
                }
            }
            (Ok(None), Ok(Some((body, left)))) => {
                if left.trim().is_empty() {
                    AgentAction::Answer(body)
                } else {
                    malformed()
                }
            }
            (Ok(None), Ok(None)) => {
                let msg = rest.trim();
                if msg.is_empty() {
                    malformed()
                } else {
                    AgentAction::Message(msg.to_string())
                }
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AgentAction::Code(_) => "code",
            AgentAction::Message(_) => "message",
            AgentAction::Answer(_) => "answer",
            AgentAction::Malformed(_) => "malformed",
        }
    }

    pub fn body(&self) -> &str {
        match self {
            AgentAction::Code(s) | AgentAction::Message(s) | AgentAction::Answer(s) | AgentAction::Malformed(s) => s,
        }
    }

    /// Canonical turn text; `parse(render(a)) == a` for well-formed actions.
    pub fn render(&self) -> String {
        match self {
            AgentAction::Code(code) => format!("ACTION:\n{code}\nEND ACTION"),
            AgentAction::Answer(ans) => format!("ANSWER:\n{ans}\nEND ANSWER"),
            AgentAction::Message(msg) | AgentAction::Malformed(msg) => msg.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    ToolResult,
    ToolError,
    UserMessage,
    Initial,
}

impl ObservationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObservationKind::ToolResult => "tool_result",
            ObservationKind::ToolError => "tool_error",
            ObservationKind::UserMessage => "user_message",
            ObservationKind::Initial => "initial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub kind: ObservationKind,
    pub text: String,
    /// Structured result of a code action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

impl Observation {
    pub fn text(kind: ObservationKind, text: impl Into<String>) -> Self {
        Observation { kind, text: text.into(), value: None }
    }
}

/// Source of replies to plain-text agent messages.
pub trait UserResponder {
    fn respond(&mut self, message: &str) -> String;
}

/// Used where no user exists (challenger exploration, answer-mode worlds).
pub struct NoUser;

impl UserResponder for NoUser {
    fn respond(&mut self, _: &str) -> String {
        INVALID_FORMAT.to_string()
    }
}

/// Renders an evaluation result as observation text. The return value is
/// shown when present; otherwise each tool result is listed.
pub fn render_outcome(outcome: &ctl::EvalOutcome) -> String {
    if outcome.result != Value::Null || outcome.tool_trace.is_empty() {
        return outcome.result.to_string();
    }
    outcome.tool_trace.iter().map(|call| call.returned.to_string()).collect::<Vec<_>>().join("\n")
}

#[derive(Clone)]
pub struct Environment {
    world: Arc<dyn World>,
    config: EpisodeConfig,
}

impl Environment {
    pub fn new(world: Arc<dyn World>, config: EpisodeConfig) -> Result<Environment, EnvError> {
        if config.max_steps == 0 {
            return Err(EnvError::InvalidConfig("max_steps must be at least 1".into()));
        }
        config.limits.validate().map_err(|e| EnvError::InvalidConfig(e.to_string()))?;
        Ok(Environment { world, config })
    }

    pub fn world(&self) -> &Arc<dyn World> {
        &self.world
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn reset(&self, seed: u64) -> EnvState {
        self.world.generate(seed)
    }

    /// o_0: world description and executor-visible tool documentation.
    pub fn initial_observation(&self) -> Observation {
        let text = format!(
            "{}\n\nAvailable tools:\n{}",
            self.world.description(),
            self.world.registry().describe(Access::Executor)
        );
        Observation::text(ObservationKind::Initial, text)
    }

    /// One transition. Tool and program failures become `tool_error`
    /// observations; only a spent step budget is an error.
    pub fn apply_action(
        &self,
        mut state: EnvState,
        action: &AgentAction,
        user: &mut dyn UserResponder,
    ) -> Result<(EnvState, Observation), EnvError> {
        if state.step_count >= self.config.max_steps {
            return Err(EnvError::EpisodeExhausted { max_steps: self.config.max_steps });
        }
        let talks_to_user = self.world.has_user() && self.config.mode == Mode::Executor;
        let obs = match action {
            AgentAction::Code(src) => match ctl::parse(src) {
                Err(e) => Observation::text(ObservationKind::ToolError, e.to_string()),
                Ok(program) => {
                    let mut ctx = ToolContext::new(self.world.registry(), &mut state, Access::Executor);
                    match ctl::evaluate(&program, &mut ctx, self.config.limits) {
                        Ok(outcome) => Observation {
                            kind: ObservationKind::ToolResult,
                            text: render_outcome(&outcome),
                            value: Some(outcome.result),
                        },
                        Err(e) => Observation::text(ObservationKind::ToolError, e.to_string()),
                    }
                }
            },
            AgentAction::Message(msg) if talks_to_user => {
                Observation::text(ObservationKind::UserMessage, user.respond(msg))
            }
            AgentAction::Answer(_) => Observation::text(ObservationKind::ToolResult, "Answer submitted."),
            AgentAction::Message(_) | AgentAction::Malformed(_) => {
                Observation::text(ObservationKind::ToolError, INVALID_FORMAT)
            }
        };
        state.step_count += 1;
        state.episode_log.push(Event {
            step: state.step_count,
            action_kind: action.kind().to_string(),
            action: action.body().to_string(),
            observation_kind: obs.kind.as_str().to_string(),
            observation: obs.text.clone(),
        });
        Ok((state, obs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_parsing() {
        assert_eq!(
            AgentAction::parse("THOUGHT:\nlook\nEND THOUGHT\nACTION:\nreturn 1\nEND ACTION"),
            AgentAction::Code("return 1".into())
        );
        assert_eq!(AgentAction::parse("ANSWER: 42 END ANSWER"), AgentAction::Answer("42".into()));
        assert_eq!(
            AgentAction::parse("Hi, what is your email?"),
            AgentAction::Message("Hi, what is your email?".into())
        );
        assert!(matches!(AgentAction::parse("ACTION: x END ACTION ANSWER: y END ANSWER"), AgentAction::Malformed(_)));
        assert!(matches!(AgentAction::parse("hello ACTION: x END ACTION"), AgentAction::Malformed(_)));
        assert!(matches!(AgentAction::parse("ACTION: x"), AgentAction::Malformed(_)));
        assert!(matches!(AgentAction::parse("  "), AgentAction::Malformed(_)));
        assert_eq!(
            AgentAction::parse("The transaction: refunded."),
            AgentAction::Message("The transaction: refunded.".into())
        );
    }

    #[test]
    fn render_round_trips() {
        for a in [
            AgentAction::Code("x = 1\nreturn x".into()),
            AgentAction::Answer("<instruction>hi</instruction>".into()),
            AgentAction::Message("Done. Is there anything else?".into()),
        ] {
            assert_eq!(AgentAction::parse(&a.render()), a);
        }
    }
}
