use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::policy::Policy;
use super::prompts::executor_prompt;
use super::transcript::{Role, TerminatedBy, Trajectory, Turn};
use super::user::UserSimScript;
use crate::cat::{answer_value, classify_verify, CatBundle, VerifyResult};
use crate::ctl::{self, EvalLimits, Program, SyntaxError, Value};
use crate::env::{
    run_verifier, AgentAction, EnvError, EnvState, Environment, EpisodeConfig, Mode, NoUser, ObservationKind,
    UserResponder, Verification, World,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutorConfig {
    pub max_steps: u32,
    pub limits: EvalLimits,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig { max_steps: 15, limits: EvalLimits::default() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RolloutError {
    #[error("bundle verify does not parse: {0}")]
    Unparsable(#[from] SyntaxError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

pub struct EpisodeResult {
    pub trajectory: Trajectory,
    pub final_state: EnvState,
}

/// Value bound to `answer` when scoring an episode.
pub fn bound_answer(world: &dyn World, answer: Option<&str>) -> Value {
    match world.verification() {
        Verification::Answer => answer_value(answer.unwrap_or("")),
        Verification::State => Value::Null,
    }
}

/// 0/1 reward of `verify` on a final state.
pub fn score(world: &dyn World, verify: &Program, state: &EnvState, answer: Option<&str>, limits: EvalLimits) -> u8 {
    let run = run_verifier(world.registry(), state, verify, limits, bound_answer(world, answer));
    u8::from(classify_verify(&run) == VerifyResult::Pass)
}

enum Responder {
    User(UserSimScript),
    None(NoUser),
}

impl Responder {
    fn as_dyn(&mut self) -> &mut dyn UserResponder {
        match self {
            Responder::User(u) => u,
            Responder::None(n) => n,
        }
    }

    fn stopped(&self) -> bool {
        matches!(self, Responder::User(u) if u.stopped)
    }
}

/// Runs one executor episode from a fresh reset of the bundle's world and
/// scores it with the bundle's verifier after termination.
pub fn run_executor_episode(
    bundle: &CatBundle,
    world: &Arc<dyn World>,
    policy: &mut dyn Policy,
    seed: u64,
    config: &ExecutorConfig,
) -> Result<EpisodeResult, RolloutError> {
    let verify = ctl::parse(&bundle.verify)?;
    let env = Environment::new(
        world.clone(),
        EpisodeConfig {
            max_steps: config.max_steps,
            seed: bundle.base_seed,
            mode: Mode::Executor,
            limits: config.limits,
        },
    )?;
    let mut state = env.reset(bundle.base_seed);
    let mut turns = vec![Turn::new(Role::System, executor_prompt(&env.initial_observation().text))];
    let mut responder = if world.has_user() {
        let script = UserSimScript::from_instruction(&bundle.instruction);
        turns.push(Turn::new(Role::User, script.opening.clone()));
        Responder::User(script)
    } else {
        turns.push(Turn::new(Role::User, bundle.instruction.clone()));
        Responder::None(NoUser)
    };

    let mut terminated_by = TerminatedBy::Exhausted;
    let mut answer = None;
    let mut error = None;
    while state.step_count < config.max_steps {
        let text = match policy.next_action(&turns) {
            Ok(t) => t,
            Err(e) => {
                terminated_by = TerminatedBy::Error;
                error = Some(e.to_string());
                break;
            }
        };
        let action = AgentAction::parse(&text);
        turns.push(Turn::new(Role::Assistant, text));
        let (next, obs) = env.apply_action(state, &action, responder.as_dyn())?;
        state = next;
        let role = if obs.kind == ObservationKind::UserMessage { Role::User } else { Role::Tool };
        turns.push(Turn { role, content: obs.text, value: obs.value });
        if let AgentAction::Answer(a) = &action {
            answer = Some(a.clone());
            terminated_by = TerminatedBy::AnswerSubmitted;
            break;
        }
        if responder.stopped() {
            terminated_by = TerminatedBy::StopToken;
            break;
        }
    }

    let reward = if terminated_by == TerminatedBy::Error {
        0
    } else {
        score(world.as_ref(), &verify, &state, answer.as_deref(), config.limits)
    };
    let trajectory = Trajectory {
        task_id: bundle.task_id(),
        env_kind: bundle.env_kind,
        policy: policy.name(),
        seed,
        turns,
        reward,
        terminated_by,
        answer,
        final_digest: state.digest(),
        error,
    };
    Ok(EpisodeResult { trajectory, final_state: state })
}
