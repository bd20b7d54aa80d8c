use catforge::ctl::{parse, EvalLimits, Value};
use catforge::env::{run_verifier, Access, AgentAction, EnvState, Environment, EpisodeConfig, Mode, NoUser};
use catforge::envs::{check_invariants, generate_world, EnvKind, Scale, WorldSet};
use catforge::rollout::{Policy, RandomTool, Role, Turn};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = EnvKind> {
    prop::sample::select(EnvKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generation_is_deterministic_and_valid(kind in kind(), seed in any::<u64>()) {
        let a = generate_world(kind, seed, Scale::Small);
        let b = generate_world(kind, seed, Scale::Small);
        prop_assert_eq!(a.digest(), b.digest());
        prop_assert!(check_invariants(kind, &a).is_ok());
    }

    #[test]
    fn snapshots_restore_exactly(kind in kind(), seed in any::<u64>()) {
        let s = generate_world(kind, seed, Scale::Small);
        let back = EnvState::restore(&s.snapshot()).unwrap();
        prop_assert_eq!(back.digest(), s.digest());
    }

    /// A verifier calling every tool, mutating ones included, leaves the
    /// caller's state untouched.
    #[test]
    fn verifiers_never_mutate(kind in kind(), seed in any::<u64>(), policy_seed in any::<u64>()) {
        let worlds = WorldSet::new();
        let world = worlds.get(kind, Scale::Small);
        let state = world.generate(seed);
        let before = state.digest();
        let tools = world.registry().visible(Access::Full).map(|t| t.spec.clone()).collect();
        let mut random = RandomTool::new(policy_seed, tools);
        let turns = vec![Turn::new(Role::User, format!("{:?}", state.table("users").map(|t| t.keys().take(3).collect::<Vec<_>>())))];
        for _ in 0..5 {
            let text = random.next_action(&turns).unwrap();
            if let AgentAction::Code(src) = AgentAction::parse(&text) {
                let program = parse(&src).unwrap();
                let _ = run_verifier(world.registry(), &state, &program, EvalLimits::default(), Value::Null);
            }
        }
        prop_assert_eq!(state.digest(), before);
    }

    /// Random tool use never breaks a world's invariants, and the step
    /// counter follows the actions taken.
    #[test]
    fn random_episodes_keep_invariants(kind in kind(), seed in any::<u64>(), policy_seed in any::<u64>()) {
        let worlds = WorldSet::new();
        let world = worlds.get(kind, Scale::Small).clone();
        let env = Environment::new(
            world.clone(),
            EpisodeConfig { max_steps: 8, seed, mode: Mode::Executor, limits: EvalLimits::default() },
        ).unwrap();
        let mut state = env.reset(seed);
        let tools = world.registry().visible(Access::Executor).map(|t| t.spec.clone()).collect();
        let mut random = RandomTool::new(policy_seed, tools);
        let mut turns = vec![Turn::new(Role::System, env.initial_observation().text)];
        for step in 0..8u32 {
            let text = random.next_action(&turns).unwrap();
            let (next, obs) = env.apply_action(state, &AgentAction::parse(&text), &mut NoUser).unwrap();
            state = next;
            prop_assert_eq!(state.step_count, step + 1);
            turns.push(Turn::new(Role::Assistant, text));
            turns.push(Turn { role: Role::Tool, content: obs.text, value: obs.value });
        }
        prop_assert!(check_invariants(kind, &state).is_ok(), "{:?}", check_invariants(kind, &state));
        prop_assert!(env.apply_action(state, &AgentAction::Answer(String::new()), &mut NoUser).is_err());
    }
}
