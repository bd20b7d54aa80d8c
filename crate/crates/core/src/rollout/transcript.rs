use serde::{Deserialize, Serialize};

use crate::ctl::Value;
use crate::env::AgentAction;
use crate::envs::EnvKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    /// Tool results and environment feedback.
    Tool,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        }
    }
}

/// One message of an episode transcript. Everything a policy may see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub content: String,
    /// Structured result of a code action, when there was one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

impl Turn {
    pub fn new(role: Role, content: impl Into<String>) -> Turn {
        Turn { role, content: content.into(), value: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminatedBy {
    AnswerSubmitted,
    StopToken,
    Exhausted,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub env_kind: EnvKind,
    pub policy: String,
    /// Policy seed. The world is always reset to the bundle's base seed.
    pub seed: u64,
    pub turns: Vec<Turn>,
    pub reward: u8,
    pub terminated_by: TerminatedBy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub final_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trajectory {
    /// Number of policy actions taken.
    pub fn steps(&self) -> usize {
        self.turns.iter().filter(|t| t.role == Role::Assistant).count()
    }

    pub fn actions(&self) -> Vec<AgentAction> {
        actions_of(&self.turns)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trajectories always serialize")
    }
}

pub fn actions_of(turns: &[Turn]) -> Vec<AgentAction> {
    turns.iter().filter(|t| t.role == Role::Assistant).map(|t| AgentAction::parse(&t.content)).collect()
}

/// Value of the most recent code result in a transcript.
pub fn last_value(turns: &[Turn]) -> Option<&Value> {
    turns.iter().rev().find_map(|t| t.value.as_ref())
}

/// Concatenated content of all turns with the given role.
pub fn text_of(turns: &[Turn], role: Role) -> String {
    turns.iter().filter(|t| t.role == role).map(|t| t.content.as_str()).collect::<Vec<_>>().join("\n")
}
