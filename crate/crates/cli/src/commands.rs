use std::collections::BTreeMap;

use catforge::cat::{filter_batch, missing_ids, render_histogram, CatBundle, FilterStats, Validator, Variant};
use catforge::env::Access;
use catforge::envs::{EnvKind, WorldSet};
use catforge::eval::{
    audit_tasks, build_oracle_tasks, pass_at, ratio_to_f64, report, run_trials, AuditRecord, Confusion, EnvResults,
    PolicyFactory, TrialMatrix,
};
use catforge::export::{export_distill, export_dpo, export_rft, ExportOptions, DEFAULT_MAX_PAIRS, DEFAULT_MAX_TOKENS};
use catforge::rollout::{
    generate_bundles, ChallengerConfig, ChallengerKind, ExecutorConfig, GenerateConfig, ImmediateAnswer, OracleReplay,
    Policy, PolicyError, RandomTool, RemoteChat, ScriptedGreedy, Trajectory, Turn,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{read_json, read_jsonl, write_atomic, write_json, write_jsonl};
use crate::{AuditArgs, ChallengeArgs, EvalArgs, ExportArgs, GenEnvArgs, LintArgs, RolloutArgs, ValidateArgs};

pub const AUDIT_VERSION: u32 = 1;
const DEFAULT_CHALLENGE_N: usize = 100;
const DEFAULT_ATTEMPTS: u32 = 4;
const DEFAULT_TRIALS: usize = 4;
const DEFAULT_AUDIT_N: usize = 40;

fn warn_unused_remote(config: &RunConfig, uses_remote: bool) {
    if config.remote.is_some() && !uses_remote {
        log::warn!("[remote] settings are ignored: no remote challenger or policy is selected");
    }
}

pub fn gen_env(config: &RunConfig, a: GenEnvArgs) -> CliResult<()> {
    let kind = config.env(a.env)?;
    let seed = config.seed(a.seed)?;
    let scale = config.scale(a.scale);
    let worlds = WorldSet::new();
    let world = worlds.get(kind, scale);
    if a.dump_schema {
        let tools: Vec<_> = world.registry().visible(Access::Executor).map(|t| &t.spec).collect();
        let doc = serde_json::json!({"env": kind, "scale": scale, "tools": tools});
        let path = config.out_path(a.out, &format!("{kind}-tools.json"));
        write_json(&path, &doc)?;
        println!("{}: {} tools", path.display(), tools.len());
        return Ok(());
    }
    let state = world.generate(seed);
    let path = config.out_path(a.out, &format!("{kind}-{seed}.snapshot"));
    write_atomic(&path, &state.snapshot())?;
    println!("{}: {}", path.display(), state.digest());
    Ok(())
}

fn challenger_kind(config: &RunConfig, name: &str) -> CliResult<ChallengerKind> {
    match name {
        "template" => Ok(ChallengerKind::Template),
        "noisy" => Ok(ChallengerKind::Noisy(config.challenge.flaw_rates.unwrap_or_default())),
        "remote" => Ok(ChallengerKind::Remote(config.remote()?)),
        other => Err(CliError::Config(format!("unknown challenger `{other}` (expected template, noisy or remote)"))),
    }
}

pub fn challenge(config: &RunConfig, a: ChallengeArgs) -> CliResult<()> {
    let kind = config.env(a.env)?;
    let seed = config.seed(a.seed)?;
    let name = a.challenger.or_else(|| config.challenge.challenger.clone()).unwrap_or_else(|| "template".into());
    let challenger = challenger_kind(config, &name)?;
    warn_unused_remote(config, matches!(challenger, ChallengerKind::Remote(_)));
    let defaults = ChallengerConfig::default();
    let gen = GenerateConfig {
        kind,
        scale: config.scale(a.scale),
        count: a.n.or(config.challenge.n).unwrap_or(DEFAULT_CHALLENGE_N),
        base_seed: seed,
        challenger,
        attempts: a.attempts.or(config.challenge.attempts).unwrap_or(DEFAULT_ATTEMPTS),
        episode: ChallengerConfig {
            max_steps: config.challenge.max_steps.unwrap_or(defaults.max_steps),
            format_retries: config.challenge.format_retries.unwrap_or(defaults.format_retries),
            limits: config.limits()?,
        },
    };
    let out = generate_bundles(&WorldSet::new(), &gen);
    for (slot, err) in &out.failed {
        log::warn!("slot {slot}: {err}");
    }
    let path = config.out_path(a.out, "bundles.jsonl");
    write_jsonl(&path, &out.bundles)?;
    println!("{}: {} of {} bundles", path.display(), out.bundles.len(), gen.count);
    if out.transport_failures > 0 {
        return Err(CliError::Remote(format!("{} slots lost to endpoint failures", out.transport_failures)));
    }
    Ok(())
}

pub fn validate(config: &RunConfig, a: ValidateArgs) -> CliResult<()> {
    let variant = match (a.variant, &config.validate.variant) {
        (Some(v), _) => v,
        (None, Some(s)) => s.parse().map_err(CliError::Config)?,
        (None, None) => Variant::Full,
    };
    let mut bundles: Vec<CatBundle> = Vec::new();
    for path in &a.input {
        bundles.extend(read_jsonl::<CatBundle>(path)?);
    }
    let validator = Validator::new(WorldSet::new(), config.limits()?);
    let out = filter_batch(&validator, &bundles, variant);

    let mut stats: BTreeMap<String, FilterStats> = BTreeMap::new();
    for (b, v) in bundles.iter().zip(&out.verdicts) {
        stats.entry(b.env_kind.to_string()).or_insert_with(|| FilterStats::empty(variant)).record(b, v);
    }
    stats.insert("all".into(), out.stats.clone());

    let accepted_path = config.out_path(a.out, "accepted.jsonl");
    write_jsonl(&accepted_path, &out.accepted)?;
    write_json(&config.out_path(a.stats, "filter_stats.json"), &stats)?;
    if let Some(path) = a.verdicts {
        write_jsonl(&path, &out.verdicts)?;
    }

    let s = &out.stats;
    println!(
        "{}: {} of {} accepted ({:.1}%, {})",
        accepted_path.display(),
        s.accepted,
        s.total,
        100.0 * s.pass_rate,
        variant.as_str()
    );
    for (class, n) in s.counts.iter().filter(|(_, n)| **n > 0) {
        println!("  {:<20} {n}", class.as_str());
    }
    print!("{}", render_histogram(&s.difficulty_histogram));
    if out.accepted.is_empty() {
        return Err(CliError::Empty(format!("none of {} bundles survived validation", bundles.len())));
    }
    Ok(())
}

/// Stands in for a policy that could not be constructed, so the failure is
/// recorded per episode like any other policy error.
struct Broken(PolicyError);

impl Policy for Broken {
    fn name(&self) -> String {
        "remote".into()
    }

    fn next_action(&mut self, _: &[Turn]) -> Result<String, PolicyError> {
        Err(self.0.clone())
    }
}

fn policy_factory<'a>(name: &str, worlds: &'a WorldSet, config: &RunConfig) -> CliResult<Box<PolicyFactory<'a>>> {
    Ok(match name {
        "oracle" => Box::new(|b: &CatBundle, _| Box::new(OracleReplay::new(b.solution.clone())) as Box<dyn Policy>),
        "immediate" => Box::new(|_: &CatBundle, _| Box::new(ImmediateAnswer) as Box<dyn Policy>),
        "greedy" => Box::new(|b: &CatBundle, _| Box::new(ScriptedGreedy::new(b.env_kind)) as Box<dyn Policy>),
        "random" => Box::new(move |b: &CatBundle, seed| {
            let world = worlds.get(b.env_kind, b.scale());
            let tools = world.registry().visible(Access::Executor).map(|t| t.spec.clone()).collect();
            Box::new(RandomTool::new(seed, tools)) as Box<dyn Policy>
        }),
        "remote" => {
            let remote = config.remote()?;
            Box::new(move |_: &CatBundle, _| match RemoteChat::new(remote.clone()) {
                Ok(chat) => Box::new(chat) as Box<dyn Policy>,
                Err(e) => Box::new(Broken(e)),
            })
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown policy `{other}` (expected oracle, random, greedy, immediate or remote)"
            )))
        }
    })
}

fn is_transport_failure(t: &Trajectory) -> bool {
    let probe = PolicyError::Transport(String::new()).to_string();
    t.error.as_deref().is_some_and(|e| e.starts_with(&probe))
}

pub fn rollout(config: &RunConfig, a: RolloutArgs) -> CliResult<()> {
    let seed = config.seed(a.seed)?;
    let policies = a.policy.or_else(|| config.rollout.policies.clone()).unwrap_or_else(|| vec!["oracle".into()]);
    let trials = a.trials.or(config.rollout.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 || policies.is_empty() {
        return Err(CliError::Config("need at least one policy and one trial".into()));
    }
    warn_unused_remote(config, policies.iter().any(|p| p == "remote"));
    let exec = ExecutorConfig {
        max_steps: a.max_steps.or(config.rollout.max_steps).unwrap_or(ExecutorConfig::default().max_steps),
        limits: config.limits()?,
    };
    let bundles: Vec<CatBundle> = read_jsonl(&a.input)?;
    let worlds = WorldSet::new();
    let mut all = Vec::new();
    for name in &policies {
        let factory = policy_factory(name.trim(), &worlds, config)?;
        let (_, trajectories) = run_trials(&worlds, &bundles, trials, seed, factory.as_ref(), &exec)
            .map_err(|e| CliError::Data(e.to_string()))?;
        all.extend(trajectories);
    }
    let path = config.out_path(a.out, "trajectories.jsonl");
    write_jsonl(&path, &all)?;
    println!("{}: {} trajectories", path.display(), all.len());
    for ((env, policy), m) in group_matrices(&all)? {
        let p1 = ratio_to_f64(pass_at(&m, 1).map_err(|e| CliError::Data(e.to_string()))?);
        let pk = ratio_to_f64(pass_at(&m, m.trials()).map_err(|e| CliError::Data(e.to_string()))?);
        println!("  {:<8} {policy:<10} pass@1 {:.3}  pass@{} {:.3}", env.as_str(), p1, m.trials(), pk);
    }
    let lost = all.iter().filter(|t| is_transport_failure(t)).count();
    if lost > 0 {
        return Err(CliError::Remote(format!("{lost} episodes lost to endpoint failures")));
    }
    Ok(())
}

/// One trial matrix per (env, policy). Tasks keep their first-seen order and
/// trials their file order.
fn group_matrices(trajectories: &[Trajectory]) -> CliResult<BTreeMap<(EnvKind, String), TrialMatrix>> {
    let mut groups: BTreeMap<(EnvKind, String), TrialMatrix> = BTreeMap::new();
    for t in trajectories {
        let m = groups.entry((t.env_kind, t.policy.clone())).or_insert_with(|| TrialMatrix {
            tasks: Vec::new(),
            cells: Vec::new(),
            seeds: Vec::new(),
        });
        let row = match m.tasks.iter().position(|id| *id == t.task_id) {
            Some(i) => i,
            None => {
                m.tasks.push(t.task_id.clone());
                m.cells.push(Vec::new());
                m.seeds.push(Vec::new());
                m.tasks.len() - 1
            }
        };
        m.cells[row].push(t.reward);
        m.seeds[row].push(t.seed);
    }
    for ((env, policy), m) in &groups {
        m.check().map_err(|e| CliError::Data(format!("{env}/{policy}: {e}")))?;
    }
    Ok(groups)
}

pub fn export(config: &RunConfig, a: ExportArgs) -> CliResult<()> {
    let mode = a.mode.or_else(|| config.export.mode.clone()).unwrap_or_else(|| "rft".into());
    let opts = ExportOptions { max_tokens: a.max_tokens.or(config.export.max_tokens).unwrap_or(DEFAULT_MAX_TOKENS) };
    let only_success = a.only_success || config.export.only_success.unwrap_or(false);
    let path = config.out_path(a.out, &format!("{mode}.jsonl"));
    let pool: Vec<Trajectory> = match mode.as_str() {
        "rft" | "distill" | "dpo" => read_jsonl(&a.input)?,
        other => return Err(CliError::Config(format!("unknown export mode `{other}` (expected rft, distill or dpo)"))),
    };
    let written = match mode.as_str() {
        "dpo" => {
            let seed = config.seed(a.seed)?;
            let max_pairs = a.max_pairs.or(config.export.max_pairs).unwrap_or(DEFAULT_MAX_PAIRS);
            let out = export_dpo(&pool, max_pairs, seed, &opts);
            write_jsonl(&path, &out.pairs)?;
            eprintln!("{}", serde_json::to_string(&out.counts).unwrap_or_default());
            out.pairs.len()
        }
        m => {
            let out = if m == "rft" { export_rft(&pool, &opts) } else { export_distill(&pool, only_success, &opts) };
            write_jsonl(&path, &out.samples)?;
            eprintln!("{}", serde_json::to_string(&out.counts).unwrap_or_default());
            out.samples.len()
        }
    };
    println!("{}: {written} records", path.display());
    if written == 0 {
        return Err(CliError::Empty(format!("{mode} export of {} is empty", a.input.display())));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditEnv {
    pub confusion: Confusion,
    pub records: Vec<AuditRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditFile {
    pub version: u32,
    pub envs: BTreeMap<EnvKind, AuditEnv>,
}

pub fn audit(config: &RunConfig, a: AuditArgs) -> CliResult<()> {
    let seed = config.seed(a.seed)?;
    let kinds: Vec<EnvKind> = match a.env.or(config.env) {
        Some(k) => vec![k],
        None => EnvKind::ALL.to_vec(),
    };
    let n = a.n.or(config.audit.n).unwrap_or(DEFAULT_AUDIT_N);
    let limits = config.limits()?;
    let worlds = WorldSet::new();
    let exec = ExecutorConfig { limits, ..ExecutorConfig::default() };
    let mut envs = BTreeMap::new();
    for kind in kinds {
        let gen = GenerateConfig {
            kind,
            scale: config.scale(a.scale),
            count: n,
            base_seed: seed,
            challenger: ChallengerKind::Noisy(config.challenge.flaw_rates.unwrap_or_default()),
            attempts: DEFAULT_ATTEMPTS,
            episode: ChallengerConfig { limits, ..ChallengerConfig::default() },
        };
        let out = generate_bundles(&worlds, &gen);
        for (slot, err) in &out.failed {
            log::warn!("{kind} slot {slot}: {err}");
        }
        let tasks = build_oracle_tasks(out.bundles);
        let (confusion, records) = audit_tasks(&worlds, &tasks, &exec).map_err(|e| CliError::Data(e.to_string()))?;
        println!(
            "{:<8} tasks {:>4}  TP {:>4}  TN {:>4}  FP {:>4}  FN {:>4}",
            kind.as_str(),
            confusion.total(),
            confusion.tp,
            confusion.tn,
            confusion.fp,
            confusion.fn_
        );
        envs.insert(kind, AuditEnv { confusion, records });
    }
    write_json(&config.out_path(a.out, "audit.json"), &AuditFile { version: AUDIT_VERSION, envs })
}

pub fn eval(config: &RunConfig, a: EvalArgs) -> CliResult<()> {
    let matrices = match &a.input {
        Some(path) => group_matrices(&read_jsonl::<Trajectory>(path)?)?,
        None => BTreeMap::new(),
    };
    let stats: BTreeMap<String, FilterStats> = a.stats.as_deref().map(read_json).transpose()?.unwrap_or_default();
    let audit: Option<AuditFile> = a.audit.as_deref().map(read_json::<AuditFile>).transpose()?;
    if let Some(f) = &audit {
        if f.version != AUDIT_VERSION {
            return Err(CliError::Data(format!("audit file version {} is not {AUDIT_VERSION}", f.version)));
        }
    }

    let mut results = Vec::new();
    for kind in EnvKind::ALL {
        let filter_stats = stats.get(kind.as_str()).cloned();
        let confusion = audit.as_ref().and_then(|f| f.envs.get(&kind)).map(|e| e.confusion);
        let mut any = false;
        for ((_, policy), m) in matrices.range((kind, String::new())..).take_while(|((k, _), _)| *k == kind) {
            any = true;
            results.push(EnvResults {
                env: Some(kind),
                policy: Some(policy.clone()),
                matrix: Some(m.clone()),
                filter_stats: filter_stats.clone(),
                confusion,
            });
        }
        if !any && (filter_stats.is_some() || confusion.is_some()) {
            results.push(EnvResults { env: Some(kind), policy: None, matrix: None, filter_stats, confusion });
        }
    }
    let rep = report(&results).map_err(|e| CliError::Data(e.to_string()))?;
    let path = config.out_path(a.out, "report.json");
    write_atomic(&path, rep.to_json().as_bytes())?;
    print!("{}", rep.render_text());
    if rep.is_empty() {
        return Err(CliError::Empty("nothing to evaluate: pass --in, --stats or --audit".into()));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct LintFinding {
    task_id: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    missing: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn lint(a: LintArgs) -> CliResult<()> {
    let bundles: Vec<CatBundle> = read_jsonl(&a.input)?;
    let findings: Vec<LintFinding> = bundles
        .iter()
        .filter_map(|b| match missing_ids(b) {
            Ok(m) if m.is_empty() => None,
            Ok(missing) => Some(LintFinding { task_id: b.task_id(), missing, error: None }),
            Err(e) => Some(LintFinding { task_id: b.task_id(), missing: Vec::new(), error: Some(e.to_string()) }),
        })
        .collect();
    let doc = serde_json::json!({"bundles": bundles.len(), "flagged": findings.len(), "findings": findings});
    match &a.out {
        Some(path) => {
            write_json(path, &doc)?;
            println!("{}: {} of {} bundles flagged", path.display(), findings.len(), bundles.len());
        }
        None => println!("{}", serde_json::to_string_pretty(&doc).unwrap_or_default()),
    }
    Ok(())
}
