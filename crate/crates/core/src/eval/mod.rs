//! Pass@k over trial matrices, verifier audits against oracle tasks, and the
//! evaluation report.

mod audit;
mod passk;
mod report;
mod trials;

pub use audit::{
    audit, audit_tasks, build_oracle_tasks, oracle_verdict, AuditError, AuditLabel, AuditRecord, Confusion, OracleTask,
    OracleVerdict, ScriptedAgent,
};
pub use passk::{cell_seed, pass_at, ratio_to_f64, row_pass_at, EvalError, TrialMatrix};
pub use report::{report, EnvResults, EnvRow, EvalReport, REPORT_VERSION};
pub use trials::{run_trials, PolicyFactory};
