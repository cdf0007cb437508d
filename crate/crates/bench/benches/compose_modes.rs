//! One training update of a probe chain, memoised against checkpointed,
//! across depths.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use paralens::arch::probe_chain;
use paralens::check::gen::random_values;
use paralens::learner::{LearnMode, Learner};
use paralens::loss::{constant_rate, mse};
use paralens::optim::gradient_descent;
use paralens::ComposeMode;

fn update(c: &mut Criterion) {
    let mut group = c.benchmark_group("update");
    for depth in [4, 16, 64] {
        let model = probe_chain(depth, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random_values(&mut rng, model.input());
        let y = random_values(&mut rng, model.output());
        for mode in [ComposeMode::Memoised, ComposeMode::Checkpointed] {
            let learner = Learner::new(
                model.clone(),
                mse(model.output()).unwrap(),
                constant_rate(0.01),
                gradient_descent(model.param()),
                LearnMode::ParamLearning,
                mode,
            )
            .unwrap();
            let st = learner.init_state(1).unwrap();
            group.bench_with_input(BenchmarkId::new(mode.to_string(), depth), &depth, |b, _| {
                b.iter(|| learner.update_step(&st, &x, &y).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, update);
criterion_main!(benches);
