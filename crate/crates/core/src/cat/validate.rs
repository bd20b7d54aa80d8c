use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bundle::{answer_value, CatBundle, ParsedBundle, MIN_FAILURES};
use crate::ctl::{coerce_bool, EvalLimits, EvalOutcome, Program, RuntimeError, Value};
use crate::env::{run_program, run_verifier, Access, Verification, World};
use crate::envs::WorldSet;

/// Why a bundle was rejected. Declaration order is check order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectClass {
    Unparsable,
    VerifyUnrunnable,
    NoopPasses,
    SolutionFails,
    FailurePasses,
    VerifyMutates,
}

impl RejectClass {
    pub const ALL: [RejectClass; 6] = [
        RejectClass::Unparsable,
        RejectClass::VerifyUnrunnable,
        RejectClass::NoopPasses,
        RejectClass::SolutionFails,
        RejectClass::FailurePasses,
        RejectClass::VerifyMutates,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectClass::Unparsable => "unparsable",
            RejectClass::VerifyUnrunnable => "verify_unrunnable",
            RejectClass::NoopPasses => "noop_passes",
            RejectClass::SolutionFails => "solution_fails",
            RejectClass::FailurePasses => "failure_passes",
            RejectClass::VerifyMutates => "verify_mutates",
        }
    }
}

impl fmt::Display for RejectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Filter strictness. Each variant runs a superset of the previous one's
/// checks, so acceptance can only shrink along VerifyOnly, VerifySolution, Full.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Parse, no-op check and verifier purity.
    VerifyOnly,
    /// Adds the solution check.
    VerifySolution,
    /// Adds the failure-case checks.
    #[default]
    Full,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::VerifyOnly, Variant::VerifySolution, Variant::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::VerifyOnly => "verify_only",
            Variant::VerifySolution => "verify_solution",
            Variant::Full => "full",
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (expected verify_only, verify_solution or full)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Accepted,
    Rejected,
}

/// Summary of one program run during validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: String,
    pub outcome: String,
    pub tool_calls: usize,
    pub steps: u64,
}

impl CheckSummary {
    fn new(check: impl Into<String>, run: &Result<EvalOutcome, RuntimeError>) -> Self {
        let (outcome, tool_calls, steps) = match run {
            Ok(o) => (format!("ok {}", o.result), o.tool_trace.len(), o.steps_used),
            Err(e) => (format!("error {e}"), 0, 0),
        };
        CheckSummary { check: check.into(), outcome, tool_calls, steps }
    }

    fn note(check: impl Into<String>, outcome: impl Into<String>) -> Self {
        CheckSummary { check: check.into(), outcome: outcome.into(), tool_calls: 0, steps: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub reject_class: Option<RejectClass>,
    pub diagnostics: Vec<CheckSummary>,
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        self.status == Status::Accepted
    }
}

/// Outcome of evaluating a verifier as a reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyResult {
    Pass,
    Fail,
    /// Error caused by the state (missing key, missing record).
    StateError,
    /// Non-bool verdict or an error intrinsic to the program.
    Defect,
}

pub fn classify_verify(run: &Result<EvalOutcome, RuntimeError>) -> VerifyResult {
    match run {
        Ok(o) => match coerce_bool(&o.result) {
            Ok(true) => VerifyResult::Pass,
            Ok(false) => VerifyResult::Fail,
            Err(_) => VerifyResult::Defect,
        },
        Err(e) if e.is_program_defect() => VerifyResult::Defect,
        Err(_) => VerifyResult::StateError,
    }
}

/// Validates bundles against freshly reset worlds.
#[derive(Clone)]
pub struct Validator {
    worlds: WorldSet,
    limits: EvalLimits,
}

impl Default for Validator {
    fn default() -> Self {
        Validator::new(WorldSet::new(), EvalLimits::default())
    }
}

impl Validator {
    pub fn new(worlds: WorldSet, limits: EvalLimits) -> Validator {
        Validator { worlds, limits }
    }

    pub fn worlds(&self) -> &WorldSet {
        &self.worlds
    }

    pub fn limits(&self) -> EvalLimits {
        self.limits
    }

    /// Runs `program` as an executor from a fresh reset, then the verifier.
    /// Returns the program run, the verifier run, and the answer bound.
    pub fn replay(
        &self,
        world: &dyn World,
        seed: u64,
        verify: &Program,
        program: Option<&Program>,
    ) -> (Option<Result<EvalOutcome, RuntimeError>>, Result<EvalOutcome, RuntimeError>) {
        let mut state = world.generate(seed);
        let run =
            program.map(|p| run_program(world.registry(), &mut state, p, Access::Executor, self.limits, Value::Null));
        let answer = match (&run, world.verification()) {
            (Some(Ok(o)), Verification::Answer) => answer_value(&o.result.answer_text()),
            _ => Value::Null,
        };
        let check = run_verifier(world.registry(), &state, verify, self.limits, answer);
        (run, check)
    }

    pub fn validate(&self, bundle: &CatBundle, variant: Variant) -> Verdict {
        let mut diagnostics = Vec::new();
        let reject = self.check(bundle, variant, &mut diagnostics);
        Verdict {
            status: if reject.is_some() { Status::Rejected } else { Status::Accepted },
            reject_class: reject,
            diagnostics,
        }
    }

    fn check(&self, bundle: &CatBundle, variant: Variant, diag: &mut Vec<CheckSummary>) -> Option<RejectClass> {
        // 1. parse
        if bundle.instruction.trim().is_empty() {
            diag.push(CheckSummary::note("parse", "empty instruction"));
            return Some(RejectClass::Unparsable);
        }
        if bundle.failures.len() < MIN_FAILURES {
            diag.push(CheckSummary::note(
                "parse",
                format!("{} failure cases, need at least {MIN_FAILURES}", bundle.failures.len()),
            ));
            return Some(RejectClass::Unparsable);
        }
        let ParsedBundle { verify, solution, failures } = match bundle.parse_programs() {
            Ok(p) => p,
            Err((which, e)) => {
                diag.push(CheckSummary::note("parse", format!("{which}: {e}")));
                return Some(RejectClass::Unparsable);
            }
        };
        let world = self.worlds.get(bundle.env_kind, bundle.scale()).as_ref();

        // 2. no-op: the untouched world must not satisfy the verifier.
        let (_, noop) = self.replay(world, bundle.base_seed, &verify, None);
        diag.push(CheckSummary::new("noop", &noop));
        match classify_verify(&noop) {
            VerifyResult::Pass => return Some(RejectClass::NoopPasses),
            VerifyResult::Defect => return Some(RejectClass::VerifyUnrunnable),
            VerifyResult::Fail | VerifyResult::StateError => {}
        }

        // 3. solution
        if variant != Variant::VerifyOnly {
            let (run, check) = self.replay(world, bundle.base_seed, &verify, Some(&solution));
            let run = run.expect("program supplied");
            diag.push(CheckSummary::new("solution", &run));
            if run.is_err() {
                return Some(RejectClass::SolutionFails);
            }
            diag.push(CheckSummary::new("verify(solution)", &check));
            match classify_verify(&check) {
                VerifyResult::Pass => {}
                VerifyResult::Defect => return Some(RejectClass::VerifyUnrunnable),
                VerifyResult::Fail | VerifyResult::StateError => return Some(RejectClass::SolutionFails),
            }
        }

        // 4. failures
        if variant == Variant::Full {
            for (i, failure) in failures.iter().enumerate() {
                let (_, check) = self.replay(world, bundle.base_seed, &verify, Some(failure));
                diag.push(CheckSummary::new(format!("verify(failure[{i}])"), &check));
                if classify_verify(&check) == VerifyResult::Pass {
                    return Some(RejectClass::FailurePasses);
                }
            }
        }

        // 5. verifier purity
        if let Some(tool) = verify.called_names().into_iter().find(|n| world.registry().mutates(n)) {
            diag.push(CheckSummary::note("purity", format!("verify calls mutating tool {tool}")));
            return Some(RejectClass::VerifyMutates);
        }
        None
    }
}
