//! Acceptance criteria. Each test prints one PASS or FAIL line to stderr,
//! bypassing the test harness capture, then asserts.

#[path = "../../core/tests/support/golden.rs"]
mod golden;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use catforge::cat::{
    classify_verify, difficulty, filter_batch, CatBundle, FilterStats, RejectClass, Validator, Variant, VerifyResult,
};
use catforge::ctl::{self, evaluate, EvalLimits, Limit, RuntimeErrorKind};
use catforge::env::run_verifier;
use catforge::envs::{EnvKind, Scale, WorldSet};
use catforge::eval::{audit_tasks, build_oracle_tasks, pass_at, Confusion, TrialMatrix};
use catforge::export::{export_rft, ExportOptions};
use catforge::rollout::{
    bound_answer, generate_bundles, planted_flaw, run_executor_episode, ChallengerConfig, ChallengerKind,
    ExecutorConfig, Flaw, FlawRates, GenerateConfig, ImmediateAnswer, OracleReplay, Role, TerminatedBy, Trajectory,
    Turn,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn verdict(n: u32, name: &str, outcome: Outcome) {
    let line = match &outcome {
        Ok(detail) => format!("acceptance {n:>2} PASS  {name}: {detail}\n"),
        Err(why) => format!("acceptance {n:>2} FAIL  {name}: {why}\n"),
    };
    let _ = std::io::stderr().write_all(line.as_bytes());
    if let Err(why) = outcome {
        panic!("criterion {n} ({name}) failed: {why}");
    }
}

fn gen(kind: EnvKind, count: usize, seed: u64, challenger: ChallengerKind) -> GenerateConfig {
    GenerateConfig {
        kind,
        scale: Scale::Small,
        count,
        base_seed: seed,
        challenger,
        attempts: 4,
        episode: ChallengerConfig::default(),
    }
}

fn generate(worlds: &WorldSet, config: &GenerateConfig) -> Result<Vec<CatBundle>, String> {
    let report = generate_bundles(worlds, config);
    ensure!(report.failed.is_empty(), "{} generation failed: {:?}", config.kind, report.failed);
    Ok(report.bundles)
}

/// Reward of replaying `program` as the executor on the bundle's world.
fn replay(worlds: &WorldSet, b: &CatBundle, program: &str) -> Result<u8, String> {
    let world = worlds.get(b.env_kind, b.scale());
    run_executor_episode(b, world, &mut OracleReplay::new(program), 0, &ExecutorConfig::default())
        .map(|ep| ep.trajectory.reward)
        .map_err(|e| format!("{}: {e}", b.task_id()))
}

/// True when the verifier already passes on the untouched world.
fn passes_fresh(worlds: &WorldSet, b: &CatBundle) -> Result<bool, String> {
    let world = worlds.get(b.env_kind, b.scale());
    let verify = ctl::parse(&b.verify).map_err(|e| format!("{}: {e}", b.task_id()))?;
    let run = run_verifier(
        world.registry(),
        &world.generate(b.base_seed),
        &verify,
        EvalLimits::default(),
        bound_answer(world.as_ref(), None),
    );
    Ok(classify_verify(&run) == VerifyResult::Pass)
}

fn planted(bundles: &[CatBundle]) -> BTreeMap<&str, usize> {
    let mut counts = BTreeMap::new();
    for b in bundles {
        *counts.entry(b.planted_flaw().unwrap_or("none")).or_default() += 1;
    }
    counts
}

#[test]
fn criterion_01_filter_soundness_round_trip() {
    let run = || -> Outcome {
        let start = Instant::now();
        let worlds = WorldSet::new();
        let validator = Validator::default();
        let (mut generated, mut accepted, mut replays) = (0, 0, 0);
        for kind in EnvKind::ALL {
            let bundles = generate(&worlds, &gen(kind, 260, 101, ChallengerKind::Template))?;
            generated += bundles.len();
            let out = filter_batch(&validator, &bundles, Variant::Full);
            accepted += out.accepted.len();
            let problems: Vec<String> = out
                .accepted
                .par_iter()
                .flat_map_iter(|b| {
                    let mut bad = Vec::new();
                    match replay(&worlds, b, &b.solution) {
                        Ok(1) => {}
                        Ok(r) => bad.push(format!("{} solution earned {r}", b.task_id())),
                        Err(e) => bad.push(e),
                    }
                    for (i, f) in b.failures.iter().enumerate() {
                        match replay(&worlds, b, f) {
                            Ok(0) => {}
                            Ok(r) => bad.push(format!("{} failure {i} earned {r}", b.task_id())),
                            Err(e) => bad.push(e),
                        }
                    }
                    bad
                })
                .collect();
            ensure!(problems.is_empty(), "{kind}: {} bad replays, first: {}", problems.len(), problems[0]);
            replays += out.accepted.iter().map(|b| 1 + b.failures.len()).sum::<usize>();
        }
        let elapsed = start.elapsed();
        ensure!(generated >= 1000, "only {generated} bundles generated");
        ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
        Ok(format!(
            "{generated} generated, {accepted} accepted, {replays} replays exact in {:.1}s",
            elapsed.as_secs_f64()
        ))
    };
    verdict(1, "filter soundness round-trip", run());
}

#[test]
fn criterion_02_noop_exclusion() {
    let run = || -> Outcome {
        let worlds = WorldSet::new();
        let validator = Validator::default();
        let mut accepted = 0;
        for kind in EnvKind::ALL {
            let bundles = generate(&worlds, &gen(kind, 100, 202, ChallengerKind::Template))?;
            for b in filter_batch(&validator, &bundles, Variant::Full).accepted {
                accepted += 1;
                ensure!(!passes_fresh(&worlds, &b)?, "{} passes on the fresh state", b.task_id());
                let world = worlds.get(b.env_kind, b.scale());
                let ep = run_executor_episode(&b, world, &mut ImmediateAnswer, 0, &ExecutorConfig::default())
                    .map_err(|e| e.to_string())?;
                ensure!(ep.trajectory.reward == 0, "{} rewards doing nothing", b.task_id());
            }
        }
        let rates =
            FlawRates { unrunnable: 0.0, infeasible_solution: 0.0, lenient_verifier: 1.0, ambiguous_instruction: 0.0 };
        let planted_batch = generate(&worlds, &gen(EnvKind::Airline, 40, 203, ChallengerKind::Noisy(rates)))?;
        for b in &planted_batch {
            ensure!(passes_fresh(&worlds, b)?, "planted {} does not pass on the fresh state", b.task_id());
        }
        let out = filter_batch(&validator, &planted_batch, Variant::Full);
        let caught = out.stats.count(RejectClass::NoopPasses);
        ensure!(caught == planted_batch.len(), "{caught} of {} planted no-op bundles rejected", planted_batch.len());
        Ok(format!(
            "0 of {accepted} accepted pass untouched; {caught}/{} planted airline rejected as noop_passes",
            planted_batch.len()
        ))
    };
    verdict(2, "no-op exclusion", run());
}

#[test]
fn criterion_03_planted_flaw_precision() {
    let run = || -> Outcome {
        let worlds = WorldSet::new();
        let validator = Validator::default();
        let n = 50;
        let mut totals = [0usize; 3];
        for kind in EnvKind::ALL {
            let bundles = generate(&worlds, &gen(kind, n, 303, ChallengerKind::Noisy(FlawRates::default())))?;
            let counts = planted(&bundles);
            let stats = filter_batch(&validator, &bundles, Variant::Full).stats;
            for (i, (flaw, rate, class)) in [
                ("unrunnable", 0.2, RejectClass::VerifyUnrunnable),
                ("infeasible_solution", 0.2, RejectClass::SolutionFails),
                ("lenient_verifier", 0.2, RejectClass::NoopPasses),
            ]
            .into_iter()
            .enumerate()
            {
                let want = (rate * n as f64).round() as usize;
                let got_planted = counts.get(flaw).copied().unwrap_or(0);
                ensure!(got_planted == want, "{kind}: planted {got_planted} {flaw}, expected {want}");
                ensure!(
                    stats.count(class) == got_planted,
                    "{kind}: {} {} rejects for {got_planted} planted {flaw}",
                    stats.count(class),
                    class.as_str()
                );
                totals[i] += got_planted;
            }
            let rejected = stats.total - stats.accepted;
            ensure!(rejected == 3 * (n / 5), "{kind}: {rejected} rejected overall");
        }
        Ok(format!(
            "unrunnable {0}={0}, infeasible {1}={1}, lenient {2}={2} over 4 x {n} bundles",
            totals[0], totals[1], totals[2]
        ))
    };
    verdict(3, "planted-flaw precision", run());
}

#[test]
fn criterion_04_variant_monotonicity() {
    let run = || -> Outcome {
        let worlds = WorldSet::new();
        let validator = Validator::default();
        let mut batch = Vec::new();
        for kind in EnvKind::ALL {
            let bundles = generate(&worlds, &gen(kind, 40, 404, ChallengerKind::Noisy(FlawRates::default())))?;
            // Clean copies whose first failure is the solution: only the full filter catches them.
            let mutants: Vec<CatBundle> = bundles
                .iter()
                .filter(|b| b.planted_flaw() == Some("none"))
                .take(5)
                .map(|b| {
                    let mut m = b.clone();
                    m.failures[0] = m.solution.clone();
                    m.metadata.insert("task_id".into(), format!("{}-mutant", b.task_id()).into());
                    m
                })
                .collect();
            batch.extend(bundles);
            batch.extend(mutants);
        }
        let mut sets: Vec<BTreeSet<String>> = Vec::new();
        let mut rates = Vec::new();
        for variant in Variant::ALL {
            let out = filter_batch(&validator, &batch, variant);
            let stats: FilterStats =
                serde_json::from_str(&serde_json::to_string(&out.stats).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
            ensure!(stats.total == batch.len(), "{} saw {} bundles", variant.as_str(), stats.total);
            ensure!(
                stats.pass_rate == stats.accepted as f64 / stats.total as f64,
                "{} pass rate {} inconsistent",
                variant.as_str(),
                stats.pass_rate
            );
            rates.push(format!("{} {:.1}%", variant.as_str(), 100.0 * stats.pass_rate));
            sets.push(out.accepted.iter().map(CatBundle::task_id).collect());
        }
        ensure!(sets[2].is_subset(&sets[1]), "full accepts a bundle verify_solution rejects");
        ensure!(sets[1].is_subset(&sets[0]), "verify_solution accepts a bundle verify_only rejects");
        ensure!(sets[2].len() < sets[1].len() && sets[1].len() < sets[0].len(), "ladder is not strict on this batch");
        Ok(format!("{} bundles: {}", batch.len(), rates.join(" >= ")))
    };
    verdict(4, "variant monotonicity", run());
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn criterion_05_pass_at_k_closed_form() {
    let run = || -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        let trials = 4usize;
        for case in 0..100 {
            let rows = rng.random_range(1..=12);
            let cells: Vec<Vec<u8>> = (0..rows)
                .map(|_| {
                    let p: f64 = rng.random();
                    (0..trials).map(|_| u8::from(rng.random_bool(p))).collect()
                })
                .collect();
            let m = TrialMatrix::from_cells(cells.clone()).map_err(|e| e.to_string())?;
            let mut previous = None;
            for k in 1..=trials {
                // Enumerate every k-subset of trial indices as a bitmask.
                let subsets: Vec<u32> = (0u32..1 << trials).filter(|s| s.count_ones() as usize == k).collect();
                let good: u128 = cells
                    .iter()
                    .map(|row| {
                        subsets.iter().filter(|s| (0..trials).any(|j| *s & (1 << j) != 0 && row[j] == 1)).count()
                            as u128
                    })
                    .sum();
                let den = subsets.len() as u128 * rows as u128;
                ensure!(den == binomial(trials as u128, k as u128) * rows as u128, "subset count");
                let closed = pass_at(&m, k).map_err(|e| e.to_string())?;
                ensure!(
                    *closed.numer() * den == good * *closed.denom(),
                    "case {case} k={k}: closed form {closed} vs brute force {good}/{den}"
                );
                if let Some(prev) = previous {
                    ensure!(closed >= prev, "case {case}: pass@{k} below pass@{}", k - 1);
                }
                previous = Some(closed);
            }
        }
        Ok("100 random 4-trial matrices, k = 1..4 exact; pass@k non-decreasing".into())
    };
    verdict(5, "pass@k correctness", run());
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_catforge")
}

fn catforge(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin()).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "catforge {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn fixture_pool(n: usize, seed: u64) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let policies = ["oracle", "random", "greedy", "remote:m"];
    (0..n)
        .map(|i| {
            let task = i % 900;
            let mut turns =
                vec![Turn::new(Role::System, "tools and rules"), Turn::new(Role::User, format!("request {task}"))];
            for step in 0..rng.random_range(0..4) {
                turns.push(Turn::new(Role::Assistant, format!("CODE:\nlookup(id=\"{i}-{step}\")\nEND CODE")));
                turns.push(Turn::new(Role::Tool, format!("observation {step}")));
            }
            turns.push(Turn::new(Role::Assistant, format!("ANSWER:\n{i}\nEND ANSWER")));
            turns.push(Turn::new(Role::Tool, "Answer submitted."));
            Trajectory {
                task_id: format!("task-{task}"),
                env_kind: EnvKind::ALL[task % 4],
                policy: policies[i % policies.len()].into(),
                seed: rng.random(),
                turns,
                reward: u8::from(rng.random_bool(0.37)),
                terminated_by: TerminatedBy::AnswerSubmitted,
                answer: Some(i.to_string()),
                final_digest: String::new(),
                error: None,
            }
        })
        .collect()
}

#[test]
fn criterion_06_rft_selection_fidelity() {
    let run = || -> Outcome {
        let pool = fixture_pool(10_000, 606);
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        catforge::cat::write_jsonl(&mut buf, &pool).map_err(|e| e.to_string())?;
        std::fs::write(dir.path().join("pool.jsonl"), &buf).map_err(|e| e.to_string())?;

        // Independent recount straight from the JSON text.
        let winners: Vec<(String, u64, String)> = String::from_utf8_lossy(&buf)
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).expect("fixture line"))
            .filter(|v| v["reward"] == 1)
            .map(|v| {
                (
                    v["task_id"].as_str().unwrap().to_string(),
                    v["seed"].as_u64().unwrap(),
                    v["policy"].as_str().unwrap().to_string(),
                )
            })
            .collect();
        ensure!(!winners.is_empty() && winners.len() < pool.len(), "fixture is not mixed");

        let out = export_rft(&pool, &ExportOptions::default());
        let got: Vec<(String, u64, String)> =
            out.samples.iter().map(|s| (s.meta.task_id.clone(), s.meta.seed, s.meta.policy.clone())).collect();
        ensure!(got == winners, "library export selected {} of {} winners", got.len(), winners.len());

        catforge(dir.path(), &["export", "--in", "pool.jsonl", "--mode", "rft", "--out", "rft.jsonl"])?;
        catforge(
            dir.path(),
            &["export", "--in", "pool.jsonl", "--mode", "distill", "--only-success", "--out", "distill.jsonl"],
        )?;
        catforge(dir.path(), &["export", "--in", "pool.jsonl", "--mode", "distill", "--out", "all.jsonl"])?;
        let read = |name: &str| std::fs::read(dir.path().join(name)).map_err(|e| e.to_string());
        let (rft, distill, all) = (read("rft.jsonl")?, read("distill.jsonl")?, read("all.jsonl")?);
        ensure!(rft == distill, "distill --only-success differs from rft");
        let lines = String::from_utf8_lossy(&rft).lines().count();
        ensure!(lines == winners.len(), "cli rft wrote {lines} samples for {} winners", winners.len());
        let all_lines = String::from_utf8_lossy(&all).lines().count();
        ensure!(all_lines == pool.len(), "distill wrote {all_lines} of {}", pool.len());
        Ok(format!(
            "{} of {} selected, recount equal, distill --only-success byte-identical",
            winners.len(),
            pool.len()
        ))
    };
    verdict(6, "rft data selection fidelity", run());
}

fn pipeline(dir: &Path, workers: &str) -> Result<BTreeMap<String, String>, String> {
    let mut shards = Vec::new();
    for kind in EnvKind::ALL {
        let file = format!("{kind}.jsonl");
        catforge(
            dir,
            &[
                "--ci",
                "--workers",
                workers,
                "challenge",
                "--env",
                kind.as_str(),
                "--n",
                "12",
                "--seed",
                "7",
                "--out",
                &file,
            ],
        )?;
        shards.push(file);
    }
    let mut validate = vec![
        "--ci",
        "--workers",
        workers,
        "validate",
        "--out",
        "accepted.jsonl",
        "--stats",
        "filter_stats.json",
        "--in",
    ];
    validate.extend(shards.iter().map(String::as_str));
    catforge(dir, &validate)?;
    let common = ["--ci", "--workers", workers];
    for args in [
        &[
            "rollout",
            "--in",
            "accepted.jsonl",
            "--policy",
            "oracle,random",
            "--trials",
            "4",
            "--seed",
            "8",
            "--out",
            "trajectories.jsonl",
        ][..],
        &["export", "--in", "trajectories.jsonl", "--mode", "rft", "--out", "rft.jsonl"],
        &["export", "--in", "trajectories.jsonl", "--mode", "dpo", "--seed", "9", "--out", "dpo.jsonl"],
        &["eval", "--in", "trajectories.jsonl", "--stats", "filter_stats.json", "--out", "report.json"],
    ] {
        let mut full = common.to_vec();
        full.extend_from_slice(args);
        catforge(dir, &full)?;
    }
    let mut digests = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path: PathBuf = entry.map_err(|e| e.to_string())?.path();
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        digests.insert(path.file_name().unwrap().to_string_lossy().into_owned(), hex::encode(Sha256::digest(&bytes)));
    }
    Ok(digests)
}

#[test]
fn criterion_07_pipeline_determinism() {
    let run = || -> Outcome {
        let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
        let first = pipeline(a.path(), "1")?;
        let second = pipeline(b.path(), "4")?;
        ensure!(first.len() == 10, "expected 10 artifacts, got {:?}", first.keys());
        for (name, digest) in &first {
            ensure!(second.get(name) == Some(digest), "{name} differs between runs");
        }
        let size = std::fs::metadata(a.path().join("trajectories.jsonl")).map_err(|e| e.to_string())?.len();
        ensure!(size > 0, "empty trajectories");
        Ok(format!("{} artifacts byte-identical across runs with 1 and 4 workers", first.len()))
    };
    verdict(7, "pipeline determinism", run());
}

#[test]
fn criterion_08_interpreter_conformance() {
    let run = || -> Outcome {
        let cases = golden::parse_cases();
        ensure!(cases.len() >= 60, "only {} golden cases", cases.len());
        for case in &cases {
            golden::check(case).map_err(|e| format!("{}: {e}", case.name))?;
        }
        // Every value case succeeds at exactly its step count and breaches one below it.
        let mut thresholds = 0;
        for case in cases.iter().filter(|c| matches!(c.expect, golden::Expect::Value(..))) {
            let program = ctl::parse(&case.source).map_err(|e| e.to_string())?;
            let used = evaluate(&program, &mut golden::StubTools::default(), case.limits)
                .map_err(|e| format!("{}: {e}", case.name))?
                .steps_used;
            let fit = EvalLimits { max_steps: used, ..case.limits };
            ensure!(
                evaluate(&program, &mut golden::StubTools::default(), fit).is_ok(),
                "{} fails at its own step count",
                case.name
            );
            if used > 1 {
                let tight = EvalLimits { max_steps: used - 1, ..case.limits };
                let err = evaluate(&program, &mut golden::StubTools::default(), tight);
                ensure!(
                    matches!(err, Err(ref e) if e.kind == RuntimeErrorKind::LimitExceeded(Limit::Steps)),
                    "{} at {} steps: {:?}",
                    case.name,
                    used - 1,
                    err.map(|o| o.result)
                );
                thresholds += 1;
            }
        }
        let ten = "[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]";
        let runaway = ctl::parse(&format!("n = 0\nfor a in {ten} {{\n for b in {ten} {{\n  for c in {ten} {{\n   for d in {ten} {{\n    n = n + 1\n    count()\n   }}\n  }}\n }}\n}}"))
            .map_err(|e| e.to_string())?;
        for steps in [1, 7, 50, 500, 5000] {
            let limits = EvalLimits { max_steps: steps, max_tool_calls: 10_000, ..EvalLimits::default() };
            let mut host = golden::StubTools::default();
            let err = evaluate(&runaway, &mut host, limits);
            ensure!(
                matches!(err, Err(ref e) if e.kind == RuntimeErrorKind::LimitExceeded(Limit::Steps)),
                "runaway under {steps} steps did not breach"
            );
            ensure!((host.counter as u64) < steps, "{} tool calls inside a {steps}-step budget", host.counter);
        }
        for tools in [1, 3, 64] {
            let mut host = golden::StubTools::default();
            let err = evaluate(&runaway, &mut host, EvalLimits { max_tool_calls: tools, ..EvalLimits::default() });
            ensure!(
                matches!(err, Err(ref e) if e.kind == RuntimeErrorKind::LimitExceeded(Limit::ToolCalls)),
                "tool budget {tools} not enforced"
            );
            ensure!(host.counter as usize == tools, "{} calls made under a budget of {tools}", host.counter);
        }
        Ok(format!("{} golden cases exact; {thresholds} exact step thresholds; runaway loops stopped", cases.len()))
    };
    verdict(8, "interpreter conformance", run());
}

#[test]
fn criterion_09_audit_confusion() {
    let run = || -> Outcome {
        let worlds = WorldSet::new();
        let mut total = Confusion::default();
        for kind in EnvKind::ALL {
            let bundles = generate(&worlds, &gen(kind, 40, 909, ChallengerKind::Noisy(FlawRates::default())))?;
            // Planted outcome of each scripted pairing: clean tasks alternate
            // solution (TP) and no-op (TN), lenient verifiers meet the no-op
            // agent (FP), broken tasks meet the solution agent (FN), and
            // ambiguous tasks are still solved by the solution agent (TP).
            let mut want = Confusion::default();
            let mut clean = 0;
            for b in &bundles {
                match planted_flaw(b) {
                    None => {
                        clean += 1;
                        if clean % 2 == 1 {
                            want.tp += 1
                        } else {
                            want.tn += 1
                        }
                    }
                    Some(Flaw::LenientVerifier) => want.fp += 1,
                    Some(Flaw::Unrunnable | Flaw::InfeasibleSolution) => want.fn_ += 1,
                    Some(Flaw::AmbiguousInstruction) => want.tp += 1,
                }
            }
            ensure!((want.tp, want.tn, want.fp, want.fn_) == (10, 6, 8, 16), "{kind}: planted plan is {want:?}");
            let (got, _) = audit_tasks(&worlds, &build_oracle_tasks(bundles), &ExecutorConfig::default())
                .map_err(|e| e.to_string())?;
            ensure!(got == want, "{kind}: audit {got:?}, planted {want:?}");
            total = total.merge(&got);
        }
        Ok(format!("TP {} TN {} FP {} FN {} over 4 x 40 tasks, equal to plan", total.tp, total.tn, total.fp, total.fn_))
    };
    verdict(9, "audit confusion correctness", run());
}

#[test]
fn criterion_10_difficulty_histogram() {
    let run = || -> Outcome {
        let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_bundles.jsonl");
        let text = std::fs::read_to_string(&data).map_err(|e| e.to_string())?;
        let bundles: Vec<CatBundle> = catforge::cat::read_jsonl(text.as_bytes()).map_err(|e| e.to_string())?;
        // Counted by hand: top-level statements of each solution.
        let by_hand = [1, 2, 3, 4, 2, 1, 3, 5, 6];
        let measured: Vec<usize> = bundles.iter().map(|b| difficulty(b).unwrap_or(0)).collect();
        ensure!(measured == by_hand, "lengths {measured:?}, counted {by_hand:?}");

        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let stdout = catforge(
            dir.path(),
            &["validate", "--in", data.to_str().unwrap(), "--out", "a.jsonl", "--stats", "s.json"],
        )?;
        let stats: BTreeMap<String, FilterStats> =
            serde_json::from_slice(&std::fs::read(dir.path().join("s.json")).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
        let accepted: BTreeMap<usize, usize> = [(1, 2), (2, 2), (3, 2), (4, 1), (5, 1)].into();
        let mut all = accepted.clone();
        all.insert(6, 1);
        for key in ["calc", "all"] {
            let s = stats.get(key).ok_or_else(|| format!("no {key} stats"))?;
            ensure!(s.difficulty_histogram == accepted, "{key} histogram {:?}", s.difficulty_histogram);
            ensure!(s.histogram_all == all, "{key} all-bundle histogram {:?}", s.histogram_all);
        }
        let bar = |n| "#".repeat(n);
        let expected = format!(
            "solution length | count\n              1 |     2 {0}\n              2 |     2 {0}\n              3 |     2 {0}\n              4 |     1 {1}\n              5 |     1 {1}\n",
            bar(40),
            bar(20)
        );
        ensure!(stdout.contains(&expected), "histogram text:\n{stdout}");
        Ok("8 accepted golden bundles bin as 1:2 2:2 3:2 4:1 5:1; rejected length-6 bundle excluded".into())
    };
    verdict(10, "difficulty metric", run());
}
