use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::audit::Confusion;
use super::passk::{pass_at, ratio_to_f64, EvalError, TrialMatrix};
use crate::cat::{render_histogram, FilterStats};
use crate::envs::EnvKind;

pub const REPORT_VERSION: u32 = 1;

/// Everything measured on one environment. Each part is optional.
#[derive(Debug, Clone, Default)]
pub struct EnvResults {
    pub env: Option<EnvKind>,
    /// Executor policy the trials ran with.
    pub policy: Option<String>,
    pub matrix: Option<TrialMatrix>,
    pub filter_stats: Option<FilterStats>,
    pub confusion: Option<Confusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvRow {
    pub env: EnvKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    pub tasks: usize,
    pub trials: usize,
    /// Keyed by k: "1" and the trial count.
    pub pass_at: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_stats: Option<FilterStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Confusion>,
    /// Accepted solution length -> count.
    pub histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub rows: Vec<EnvRow>,
}

/// One row per environment that has results, in the order given.
pub fn report(results: &[EnvResults]) -> Result<EvalReport, EvalError> {
    let mut rows = Vec::new();
    for r in results {
        let Some(env) = r.env else { continue };
        let mut pass = BTreeMap::new();
        let (mut tasks, mut trials) = (0, 0);
        if let Some(m) = r.matrix.as_ref().filter(|m| m.rows() > 0 && m.trials() > 0) {
            tasks = m.rows();
            trials = m.trials();
            pass.insert("1".to_string(), ratio_to_f64(pass_at(m, 1)?));
            pass.insert(trials.to_string(), ratio_to_f64(pass_at(m, trials)?));
        }
        rows.push(EnvRow {
            env,
            policy: r.policy.clone(),
            tasks,
            trials,
            pass_at: pass,
            histogram: r.filter_stats.as_ref().map(|s| s.difficulty_histogram.clone()).unwrap_or_default(),
            filter_stats: r.filter_stats.clone(),
            confusion: r.confusion,
        });
    }
    Ok(EvalReport { version: REPORT_VERSION, rows })
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{:.1}", 100.0 * v))
}

impl EvalReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize") + "\n"
    }

    /// Plain-text table: one row per environment and an average row, pass
    /// rates in percent.
    pub fn render_text(&self) -> String {
        if self.is_empty() {
            return "no data\n".to_string();
        }
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:<10} {:>6} {:>6} {:>8} {:>8} {:>9} {:>5} {:>5} {:>5} {:>5}",
            "env", "policy", "tasks", "trials", "pass@1", "pass@k", "accepted", "TP", "TN", "FP", "FN"
        );
        let mut p1 = Vec::new();
        let mut pk = Vec::new();
        for row in &self.rows {
            let first = row.pass_at.get("1").copied();
            let last = row.pass_at.get(&row.trials.to_string()).copied();
            p1.extend(first);
            pk.extend(last);
            let accepted =
                row.filter_stats.as_ref().map_or_else(|| "-".to_string(), |s| format!("{}/{}", s.accepted, s.total));
            let c = |f: fn(&Confusion) -> usize| {
                row.confusion.as_ref().map_or_else(|| "-".to_string(), |c| f(c).to_string())
            };
            let _ = writeln!(
                out,
                "{:<8} {:<10} {:>6} {:>6} {:>8} {:>8} {:>9} {:>5} {:>5} {:>5} {:>5}",
                row.env.as_str(),
                row.policy.as_deref().unwrap_or("-"),
                row.tasks,
                row.trials,
                pct(first),
                pct(last),
                accepted,
                c(|c| c.tp),
                c(|c| c.tn),
                c(|c| c.fp),
                c(|c| c.fn_)
            );
        }
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let _ =
            writeln!(out, "{:<8} {:<10} {:>6} {:>6} {:>8} {:>8}", "avg", "", "", "", pct(mean(&p1)), pct(mean(&pk)));
        // Rows of one env share its filter statistics; print each histogram once.
        let mut shown = Vec::new();
        for row in self.rows.iter().filter(|r| !r.histogram.is_empty()) {
            if shown.contains(&row.env) {
                continue;
            }
            shown.push(row.env);
            let _ = writeln!(out, "\n{} difficulty\n{}", row.env.as_str(), render_histogram(&row.histogram).trim_end());
        }
        out
    }
}
