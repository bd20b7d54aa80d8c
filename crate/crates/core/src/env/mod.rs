//! Environment core: world state, tool registries and the step loop.

mod episode;
mod state;
mod tool;

pub use episode::{
    render_outcome, AgentAction, Environment, EpisodeConfig, Mode, NoUser, Observation, ObservationKind, UserResponder,
    Verification, World, INVALID_FORMAT,
};
pub use state::{EnvState, Event, Table, SNAPSHOT_HEADER};
pub use tool::{
    arg, arg_f64, arg_int, arg_list, arg_str, arg_str_list, Access, Args, DuplicateTool, ParamSpec, ParamType, ReadFn,
    Tool, ToolContext, ToolImpl, ToolRegistry, ToolSpec, WriteFn,
};

use crate::ctl::{self, EvalLimits, EvalOutcome, Program, RuntimeError, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("episode exhausted: step budget of {max_steps} spent")]
    EpisodeExhausted { max_steps: u32 },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
}

/// Runs a program against `state` in place, with `answer` pre-bound.
pub fn run_program(
    registry: &ToolRegistry,
    state: &mut EnvState,
    program: &Program,
    access: Access,
    limits: EvalLimits,
    answer: Value,
) -> Result<EvalOutcome, RuntimeError> {
    let mut ctx = ToolContext::new(registry, state, access);
    ctl::evaluate_with(program, &mut ctx, limits, vec![("answer".to_string(), answer)])
}

/// Runs a verifier on a scratch copy, so the caller's state never changes
/// whatever the verifier calls.
pub fn run_verifier(
    registry: &ToolRegistry,
    state: &EnvState,
    program: &Program,
    limits: EvalLimits,
    answer: Value,
) -> Result<EvalOutcome, RuntimeError> {
    let mut scratch = state.clone();
    run_program(registry, &mut scratch, program, Access::Full, limits, answer)
}
