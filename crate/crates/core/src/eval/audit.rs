use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::passk::EvalError;
use crate::cat::{classify_verify, CatBundle, VerifyResult};
use crate::ctl::{self, EvalLimits};
use crate::env::{run_verifier, EnvState, World};
use crate::envs::WorldSet;
use crate::rollout::{
    bound_answer, planted_flaw, run_executor_episode, ExecutorConfig, Flaw, ImmediateAnswer, OracleReplay, Policy,
    RolloutError,
};

/// Ground truth for one episode. An infeasible task counts as positive: the
/// verifier should have been satisfiable and was not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleVerdict {
    Success,
    Failure,
    Infeasible,
}

impl OracleVerdict {
    pub fn positive(self) -> bool {
        self != OracleVerdict::Failure
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AuditLabel {
    TP,
    TN,
    FP,
    FN,
}

/// Crosses the bundle verifier's reward with the oracle verdict.
pub fn audit(task_id: &str, verify_reward: u8, oracle: Option<OracleVerdict>) -> Result<AuditLabel, EvalError> {
    let oracle = oracle.ok_or_else(|| EvalError::MissingOracle(task_id.to_string()))?;
    Ok(match (verify_reward == 1, oracle.positive()) {
        (true, true) => AuditLabel::TP,
        (false, false) => AuditLabel::TN,
        (true, false) => AuditLabel::FP,
        (false, true) => AuditLabel::FN,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, label: AuditLabel) {
        match label {
            AuditLabel::TP => self.tp += 1,
            AuditLabel::TN => self.tn += 1,
            AuditLabel::FP => self.fp += 1,
            AuditLabel::FN => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn merge(mut self, other: &Confusion) -> Confusion {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self
    }
}

impl FromIterator<AuditLabel> for Confusion {
    fn from_iter<I: IntoIterator<Item = AuditLabel>>(iter: I) -> Confusion {
        let mut c = Confusion::default();
        iter.into_iter().for_each(|l| c.add(l));
        c
    }
}

/// Oracle verdict from the known-correct verifier a template challenger
/// stored in the bundle metadata. None when the bundle carries no oracle.
pub fn oracle_verdict(
    bundle: &CatBundle,
    world: &dyn World,
    final_state: &EnvState,
    answer: Option<&str>,
    limits: EvalLimits,
) -> Option<OracleVerdict> {
    if planted_flaw(bundle) == Some(Flaw::InfeasibleSolution) {
        return Some(OracleVerdict::Infeasible);
    }
    let source = bundle.metadata.get("oracle_verify")?.as_str()?;
    let program = ctl::parse(source).ok()?;
    let run = run_verifier(world.registry(), final_state, &program, limits, bound_answer(world, answer));
    Some(if classify_verify(&run) == VerifyResult::Pass { OracleVerdict::Success } else { OracleVerdict::Failure })
}

/// Scripted agents whose behaviour on a template task is known in advance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedAgent {
    /// Replays the bundle's solution.
    Solution,
    /// Answers at once without acting.
    Noop,
}

impl ScriptedAgent {
    fn policy(self, bundle: &CatBundle) -> Box<dyn Policy> {
        match self {
            ScriptedAgent::Solution => Box::new(OracleReplay::new(bundle.solution.clone())),
            ScriptedAgent::Noop => Box::new(ImmediateAnswer),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTask {
    pub bundle: CatBundle,
    pub agent: ScriptedAgent,
}

/// Pairs each bundle with an agent. Lenient verifiers meet the no-op agent
/// and flawed-but-strict tasks meet the solution agent, so every flaw shows up
/// in the audit; clean tasks alternate between the two.
pub fn build_oracle_tasks(bundles: Vec<CatBundle>) -> Vec<OracleTask> {
    let mut clean = 0usize;
    bundles
        .into_iter()
        .map(|bundle| {
            let agent = match planted_flaw(&bundle) {
                Some(Flaw::LenientVerifier) => ScriptedAgent::Noop,
                Some(_) => ScriptedAgent::Solution,
                None => {
                    clean += 1;
                    if clean % 2 == 1 {
                        ScriptedAgent::Solution
                    } else {
                        ScriptedAgent::Noop
                    }
                }
            };
            OracleTask { bundle, agent }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub task_id: String,
    pub agent: ScriptedAgent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_flaw: Option<Flaw>,
    pub reward: u8,
    pub oracle: OracleVerdict,
    pub label: AuditLabel,
}

/// Runs each oracle task's agent once and labels the episode.
pub fn audit_tasks(
    worlds: &WorldSet,
    tasks: &[OracleTask],
    config: &ExecutorConfig,
) -> Result<(Confusion, Vec<AuditRecord>), AuditError> {
    let records: Vec<Result<AuditRecord, AuditError>> = tasks
        .par_iter()
        .map(|t| {
            let b = &t.bundle;
            let world = worlds.get(b.env_kind, b.scale());
            let mut policy = t.agent.policy(b);
            let ep = run_executor_episode(b, world, policy.as_mut(), b.base_seed, config)?;
            let answer = ep.trajectory.answer.as_deref();
            let task_id = b.task_id();
            let oracle = oracle_verdict(b, world.as_ref(), &ep.final_state, answer, config.limits)
                .ok_or_else(|| EvalError::MissingOracle(task_id.clone()))?;
            let label = audit(&task_id, ep.trajectory.reward, Some(oracle))?;
            Ok(AuditRecord {
                task_id,
                agent: t.agent,
                planted_flaw: planted_flaw(b),
                reward: ep.trajectory.reward,
                oracle,
                label,
            })
        })
        .collect();
    let records = records.into_iter().collect::<Result<Vec<_>, _>>()?;
    let confusion = records.iter().map(|r| r.label).collect();
    Ok((confusion, records))
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
}
