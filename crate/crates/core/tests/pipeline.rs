use catforge::cat::{Validator, Variant};
use catforge::envs::{EnvKind, Scale, WorldSet};
use catforge::rollout::{
    generate_bundles, planted_flaw, run_executor_episode, ChallengerConfig, ChallengerKind, ExecutorConfig, Flaw,
    FlawRates, GenerateConfig, ImmediateAnswer, OracleReplay,
};

const KINDS: [EnvKind; 4] = [EnvKind::Retail, EnvKind::Airline, EnvKind::Calc, EnvKind::Web];

fn config(kind: EnvKind, count: usize, challenger: ChallengerKind) -> GenerateConfig {
    GenerateConfig {
        kind,
        scale: Scale::Small,
        count,
        base_seed: 11,
        challenger,
        attempts: 4,
        episode: ChallengerConfig::default(),
    }
}

#[test]
fn template_tasks_pass_the_full_filter() {
    let worlds = WorldSet::new();
    let validator = Validator::default();
    for kind in KINDS {
        let report = generate_bundles(&worlds, &config(kind, 24, ChallengerKind::Template));
        assert!(report.failed.is_empty(), "{kind}: {:?}", report.failed);
        for b in &report.bundles {
            let verdict = validator.validate(b, Variant::Full);
            assert!(verdict.accepted(), "{kind} rejected: {verdict:?}\n{}", b.to_json_line());
        }
    }
}

#[test]
fn oracle_replay_earns_reward_and_empty_answer_does_not() {
    let worlds = WorldSet::new();
    for kind in KINDS {
        let world = worlds.get(kind, Scale::Small);
        for b in generate_bundles(&worlds, &config(kind, 8, ChallengerKind::Template)).bundles {
            let ep =
                run_executor_episode(&b, world, &mut OracleReplay::new(&b.solution), 1, &ExecutorConfig::default())
                    .unwrap();
            assert_eq!(ep.trajectory.reward, 1, "{kind}: {:?}", ep.trajectory.turns);
            let ep = run_executor_episode(&b, world, &mut ImmediateAnswer, 1, &ExecutorConfig::default()).unwrap();
            assert_eq!(ep.trajectory.reward, 0, "{kind}");
        }
    }
}

#[test]
fn planted_flaws_get_their_reject_class() {
    let worlds = WorldSet::new();
    let validator = Validator::default();
    for kind in KINDS {
        let report = generate_bundles(&worlds, &config(kind, 30, ChallengerKind::Noisy(FlawRates::default())));
        assert!(report.failed.is_empty(), "{kind}: {:?}", report.failed);
        let mut seen = 0;
        for b in &report.bundles {
            let verdict = validator.validate(b, Variant::Full);
            match planted_flaw(b) {
                Some(f @ (Flaw::Unrunnable | Flaw::InfeasibleSolution | Flaw::LenientVerifier)) => {
                    seen += 1;
                    assert_eq!(verdict.reject_class, f.expected_reject(), "{kind} {f:?}\n{}", b.to_json_line());
                }
                _ => assert!(verdict.accepted(), "{kind}: {verdict:?}\n{}", b.to_json_line()),
            }
        }
        assert_eq!(seen, 18, "{kind}");
    }
}

#[test]
fn generation_is_deterministic() {
    let worlds = WorldSet::new();
    let cfg = config(EnvKind::Retail, 6, ChallengerKind::Noisy(FlawRates::default()));
    let a: Vec<String> = generate_bundles(&worlds, &cfg).bundles.iter().map(|b| b.to_json_line()).collect();
    let b: Vec<String> = generate_bundles(&worlds, &cfg).bundles.iter().map(|b| b.to_json_line()).collect();
    assert_eq!(a, b);
}
