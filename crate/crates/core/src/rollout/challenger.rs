use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{Policy, PolicyError};
use super::prompts::challenger_prompt;
use super::transcript::{Role, Turn};
use crate::cat::CatBundle;
use crate::ctl::{EvalLimits, Value};
use crate::env::{AgentAction, EnvError, EnvState, Environment, EpisodeConfig, Mode, NoUser, Verification, World};
use crate::envs::{EnvKind, Scale};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChallengerConfig {
    pub max_steps: u32,
    /// Malformed turns tolerated before the episode fails.
    pub format_retries: u32,
    pub limits: EvalLimits,
}

impl Default for ChallengerConfig {
    fn default() -> Self {
        ChallengerConfig { max_steps: 15, format_retries: 2, limits: EvalLimits::default() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ChallengeError {
    #[error("malformed answer: {0}")]
    MalformedAnswer(String),
    #[error("no answer within {0} steps")]
    ExplorationExhausted(u32),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// The four parts of a task answer, still as text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskParts {
    pub instruction: String,
    pub verify: String,
    pub solution: String,
    pub failures: Vec<String>,
}

fn tag_bodies<'a>(text: &'a str, tag: &str) -> Result<Vec<&'a str>, String> {
    let (open, close) = (format!("<{tag}>"), format!("</{tag}>"));
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find(&open) {
        let body = &rest[start + open.len()..];
        let end = body.find(&close).ok_or_else(|| format!("<{tag}> is not closed"))?;
        out.push(body[..end].trim());
        rest = &body[end + close.len()..];
    }
    if rest.contains(&close) {
        return Err(format!("</{tag}> without <{tag}>"));
    }
    Ok(out)
}

fn single<'a>(text: &'a str, tags: &[&str]) -> Result<Option<&'a str>, String> {
    let mut found = Vec::new();
    for tag in tags {
        found.extend(tag_bodies(text, tag)?);
    }
    match found.len() {
        0 => Ok(None),
        1 => Ok(Some(found[0])),
        _ => Err(format!("<{}> given {} times", tags[0], found.len())),
    }
}

/// Verifier for an `<expected_output>` answer, as challenger prompts
/// for answer-checked worlds write it.
pub fn expected_output_verifier(expected: &str) -> String {
    let mode = if expected.trim().parse::<f64>().is_ok() { "numeric" } else { "exact_string" };
    format!("return check_answer(answer=answer, expected={}, mode={})", Value::str(expected.trim()), Value::str(mode))
}

/// Splits an ANSWER body into task parts. `<example_solution>` is accepted
/// for `<solution>`, and `<expected_output>` stands in for the verifier.
pub fn parse_task_answer(body: &str) -> Result<TaskParts, String> {
    let instruction = single(body, &["instruction"])?.ok_or("missing <instruction>")?;
    let solution = single(body, &["solution", "example_solution"])?.ok_or("missing <solution>")?;
    let verify = match (single(body, &["evaluation_function"])?, single(body, &["expected_output"])?) {
        (Some(v), None) => v.to_string(),
        (None, Some(expected)) => expected_output_verifier(expected),
        (Some(_), Some(_)) => return Err("both <evaluation_function> and <expected_output> given".into()),
        (None, None) => return Err("missing <evaluation_function>".into()),
    };
    let failures = tag_bodies(body, "failure_case")?.into_iter().map(str::to_string).collect();
    Ok(TaskParts { instruction: instruction.to_string(), verify, solution: solution.to_string(), failures })
}

/// Renders task parts in the answer format `parse_task_answer` reads.
pub fn render_task_answer(parts: &TaskParts) -> String {
    let mut out = format!(
        "<instruction>\n{}\n</instruction>\n<evaluation_function>\n{}\n</evaluation_function>\n<solution>\n{}\n</solution>\n",
        parts.instruction, parts.verify, parts.solution
    );
    for f in &parts.failures {
        out.push_str(&format!("<failure_case>\n{f}\n</failure_case>\n"));
    }
    out
}

/// The user a state-verified challenger is asked to build a task around.
pub fn target_user(state: &EnvState, seed: u64) -> Option<String> {
    let users = state.table("users")?;
    if users.is_empty() {
        return None;
    }
    let idx = ChaCha8Rng::seed_from_u64(seed ^ 0x7573_6572).random_range(0..users.len());
    users.keys().nth(idx).cloned()
}

pub struct ChallengeOutcome {
    pub bundle: CatBundle,
    pub turns: Vec<Turn>,
}

/// Runs a challenger episode on world `seed` and assembles its answer into a
/// bundle whose base seed is that same world seed.
pub fn run_challenger_episode(
    kind: EnvKind,
    scale: Scale,
    world: &Arc<dyn World>,
    policy: &mut dyn Policy,
    seed: u64,
    config: &ChallengerConfig,
) -> Result<ChallengeOutcome, ChallengeError> {
    let env = Environment::new(
        world.clone(),
        EpisodeConfig { max_steps: config.max_steps, seed, mode: Mode::Challenger, limits: config.limits },
    )?;
    let mut state = env.reset(seed);
    let hint = match world.verification() {
        Verification::State => target_user(&state, seed).map(|u| format!("the user with user id {u}")),
        Verification::Answer => None,
    };
    let mut turns = vec![Turn::new(Role::System, challenger_prompt(world.as_ref(), hint.as_deref()))];
    let mut bad_turns = 0;
    while state.step_count < config.max_steps {
        let text = policy.next_action(&turns)?;
        let action = AgentAction::parse(&text);
        turns.push(Turn::new(Role::Assistant, text));
        match &action {
            AgentAction::Answer(body) => {
                let parts = parse_task_answer(body).map_err(ChallengeError::MalformedAnswer)?;
                let mut metadata: BTreeMap<String, serde_json::Value> = BTreeMap::new();
                metadata.insert("scale".into(), scale.to_string().into());
                metadata.insert("challenger".into(), policy.name().into());
                metadata.extend(policy.annotations());
                let bundle = CatBundle {
                    instruction: parts.instruction,
                    verify: parts.verify,
                    solution: parts.solution,
                    failures: parts.failures,
                    env_kind: kind,
                    base_seed: seed,
                    metadata,
                };
                return Ok(ChallengeOutcome { bundle, turns });
            }
            AgentAction::Malformed(_) | AgentAction::Message(_) => {
                bad_turns += 1;
                if bad_turns > config.format_retries {
                    return Err(ChallengeError::MalformedAnswer(format!(
                        "{bad_turns} turns without a valid ACTION or ANSWER block"
                    )));
                }
            }
            AgentAction::Code(_) => {}
        }
        let (next, obs) = env.apply_action(state, &action, &mut NoUser)?;
        state = next;
        turns.push(Turn { role: Role::Tool, content: obs.text, value: obs.value });
    }
    Err(ChallengeError::ExplorationExhausted(config.max_steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        let parts = TaskParts {
            instruction: "Do it.".into(),
            verify: "return x < 3".into(),
            solution: "x = 1".into(),
            failures: vec!["x = 4".into(), "x = 5".into(), "x = 6".into()],
        };
        assert_eq!(parse_task_answer(&render_task_answer(&parts)).unwrap(), parts);
    }

    #[test]
    fn missing_or_duplicate_tags() {
        let no_solution = "<instruction>a</instruction><evaluation_function>return true</evaluation_function>";
        assert!(parse_task_answer(no_solution).unwrap_err().contains("solution"));
        let twice = "<instruction>a</instruction><instruction>b</instruction><solution>x=1</solution>\
<evaluation_function>return true</evaluation_function>";
        assert!(parse_task_answer(twice).is_err());
        let unclosed = "<instruction>a<solution>x=1</solution>";
        assert!(parse_task_answer(unclosed).is_err());
    }

    #[test]
    fn expected_output_becomes_check_answer() {
        let body = "<instruction>q</instruction><expected_output>\n112.71\n</expected_output>\
<example_solution>result = 112.71</example_solution>";
        let parts = parse_task_answer(body).unwrap();
        assert_eq!(parts.verify, "return check_answer(answer=answer, expected=\"112.71\", mode=\"numeric\")");
        assert_eq!(parts.solution, "result = 112.71");
    }
}
