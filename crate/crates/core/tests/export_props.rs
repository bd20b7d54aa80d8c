use std::collections::BTreeMap;

use catforge::envs::EnvKind;
use catforge::export::{export_distill, export_dpo, export_rft, ExportOptions};
use catforge::rollout::{Role, TerminatedBy, Trajectory, Turn};
use proptest::prelude::*;

fn trajectory(task: usize, reward: u8, seed: u64, actions: usize) -> Trajectory {
    let mut turns = vec![Turn::new(Role::System, "tools"), Turn::new(Role::User, format!("task {task}"))];
    for i in 0..actions {
        turns.push(Turn::new(Role::Assistant, format!("ACTION:\nx = {seed}{i}\nEND ACTION")));
        turns.push(Turn::new(Role::Tool, format!("obs {i}")));
    }
    Trajectory {
        task_id: format!("t{task}"),
        env_kind: EnvKind::Retail,
        policy: "scripted".into(),
        seed,
        turns,
        reward,
        terminated_by: TerminatedBy::Exhausted,
        answer: None,
        final_digest: String::new(),
        error: None,
    }
}

fn pool() -> impl Strategy<Value = Vec<Trajectory>> {
    prop::collection::vec((0usize..6, 0u8..2, any::<u64>(), 0usize..4), 0..40)
        .prop_map(|v| v.into_iter().map(|(t, r, s, a)| trajectory(t, r, s, a)).collect())
}

fn lines<T: serde::Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    catforge::cat::write_jsonl(&mut out, items).unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rft_equals_distill_only_success(pool in pool()) {
        let opts = ExportOptions::default();
        prop_assert_eq!(lines(&export_rft(&pool, &opts).samples), lines(&export_distill(&pool, true, &opts).samples));
    }

    #[test]
    fn rft_keeps_exactly_successes_with_turns(pool in pool()) {
        let out = export_rft(&pool, &ExportOptions::default());
        let expected = pool.iter().filter(|t| t.reward == 1 && t.turns.iter().any(|x| x.role == Role::Assistant)).count();
        prop_assert_eq!(out.samples.len(), expected);
        prop_assert!(out.samples.iter().all(|s| s.meta.reward == 1));
    }

    #[test]
    fn only_assistant_messages_are_unmasked(pool in pool()) {
        for s in export_distill(&pool, false, &ExportOptions::default()).samples {
            prop_assert_eq!(s.messages.len(), s.mask.len());
            for (m, &train) in s.messages.iter().zip(&s.mask) {
                prop_assert_eq!(train, m.role == "assistant");
            }
            for w in s.messages.windows(2) {
                prop_assert_ne!(&w[0].role, &w[1].role);
            }
            prop_assert_eq!(s.messages.last().map(|m| m.role.as_str()), Some("assistant"));
        }
    }

    /// Pair counts per task match an independent recount of min(P, s * f).
    #[test]
    fn dpo_counts_match_combinatorics(pool in pool(), cap in 1usize..6, seed in any::<u64>()) {
        let out = export_dpo(&pool, cap, seed, &ExportOptions::default());
        let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for t in pool.iter().filter(|t| t.turns.iter().any(|x| x.role == Role::Assistant)) {
            let e = tally.entry(t.task_id.as_str()).or_default();
            if t.reward == 1 { e.0 += 1 } else { e.1 += 1 }
        }
        let mut got: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &out.pairs {
            *got.entry(p.meta.task_id.as_str()).or_default() += 1;
        }
        for (task, (s, f)) in tally {
            prop_assert_eq!(got.get(task).copied().unwrap_or(0), cap.min(s * f), "task {}", task);
        }
        let again = export_dpo(&pool, cap, seed, &ExportOptions::default());
        prop_assert_eq!(lines(&out.pairs), lines(&again.pairs));
    }
}

#[test]
fn dpo_pairs_are_distinct_and_well_formed() {
    let pool: Vec<Trajectory> = (0..8).map(|i| trajectory(0, u8::from(i % 2 == 0), i, 2)).collect();
    let out = export_dpo(&pool, 4, 9, &ExportOptions::default());
    assert_eq!(out.pairs.len(), 4);
    let mut keys: Vec<(u64, u64)> = out.pairs.iter().map(|p| (p.meta.chosen_seed, p.meta.rejected_seed)).collect();
    keys.sort_unstable();
    keys.dedup();
    assert_eq!(keys.len(), 4);
    for p in &out.pairs {
        assert_eq!(p.chosen[0].role, "assistant");
        assert_eq!(p.rejected[0].role, "assistant");
        assert_eq!(p.prompt.last().unwrap().role, "user");
        assert_eq!(p.meta.chosen_seed % 2, 0);
    }
}

#[test]
fn teacher_pool_metadata_survives() {
    let pool: Vec<Trajectory> = (0..5)
        .map(|i| {
            let mut t = trajectory(i, (i % 2) as u8, i as u64, 1);
            t.policy = "teacher".into();
            t
        })
        .collect();
    let out = export_distill(&pool, false, &ExportOptions::default());
    assert_eq!(out.samples.len(), 5);
    assert!(out.samples.iter().all(|s| s.meta.policy == "teacher"));
}
