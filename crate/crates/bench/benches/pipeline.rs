use catforge::cat::{Validator, Variant};
use catforge::ctl::{evaluate, parse, EvalLimits, NoTools};
use catforge::envs::{EnvKind, Scale, WorldSet};
use catforge::rollout::{
    generate_bundles, run_executor_episode, ChallengerConfig, ChallengerKind, ExecutorConfig, GenerateConfig,
    OracleReplay,
};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

const LOOP: &str = "total = 0\nfor i in [1, 2, 3, 4, 5, 6, 7, 8, 9, 10] {\n    for j in [1, 2, 3, 4, 5] {\n        if i * j > 20 {\n            total = total + i * j\n        }\n    }\n}\nreturn total";

fn interpreter(c: &mut Criterion) {
    c.bench_function("ctl/parse", |b| b.iter(|| parse(LOOP).unwrap()));
    let program = parse(LOOP).unwrap();
    c.bench_function("ctl/eval_nested_loops", |b| {
        b.iter(|| evaluate(&program, &mut NoTools, EvalLimits::default()).unwrap())
    });
}

fn bundles(kind: EnvKind) -> Vec<catforge::cat::CatBundle> {
    let config = GenerateConfig {
        kind,
        scale: Scale::Small,
        count: 8,
        base_seed: 1,
        challenger: ChallengerKind::Template,
        attempts: 4,
        episode: ChallengerConfig::default(),
    };
    generate_bundles(&WorldSet::new(), &config).bundles
}

fn pipeline(c: &mut Criterion) {
    let worlds = WorldSet::new();
    let validator = Validator::default();
    for kind in [EnvKind::Retail, EnvKind::Calc] {
        let batch = bundles(kind);
        c.bench_function(&format!("filter/full/{kind}"), |b| {
            b.iter(|| batch.iter().filter(|x| validator.validate(x, Variant::Full).accepted()).count())
        });
        let world = worlds.get(kind, Scale::Small);
        c.bench_function(&format!("rollout/oracle/{kind}"), |b| {
            b.iter_batched(
                || OracleReplay::new(batch[0].solution.clone()),
                |mut policy| {
                    run_executor_episode(&batch[0], world, &mut policy, 0, &ExecutorConfig::default()).unwrap()
                },
                BatchSize::SmallInput,
            )
        });
    }
    c.bench_function("generate/template/retail", |b| b.iter(|| bundles(EnvKind::Retail)));
}

criterion_group!(benches, interpreter, pipeline);
criterion_main!(benches);
