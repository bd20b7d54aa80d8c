//! Challenger and executor episodes over the environments, the policies that
//! drive them, and the scripted challengers used to build task corpora.

mod challenger;
mod executor;
mod generate;
mod policy;
mod prompts;
mod remote;
mod templates;
mod transcript;
mod user;

pub use challenger::{
    expected_output_verifier, parse_task_answer, render_task_answer, run_challenger_episode, target_user,
    ChallengeError, ChallengeOutcome, ChallengerConfig, TaskParts,
};
pub use executor::{bound_answer, run_executor_episode, score, EpisodeResult, ExecutorConfig, RolloutError};
pub use generate::{generate_bundles, mix_seed, planted_flaw, ChallengerKind, GenerateConfig, GenerateReport};
pub use policy::{ImmediateAnswer, OracleReplay, Policy, PolicyError, RandomTool, ScriptedGreedy};
pub use prompts::{challenger_prompt, executor_prompt, ACTION_FORMAT, CTL_REFERENCE};
pub use remote::{RemoteChat, RemoteConfig, API_KEY_VAR};
pub use templates::{plan_flaws, Flaw, FlawRates, TemplateChallenger, MISSING_ORDER, MISSING_RESERVATION};
pub use transcript::{Role, TerminatedBy, Trajectory, Turn};
pub use user::{UserSimScript, REFUSAL, STOP_TOKEN};
