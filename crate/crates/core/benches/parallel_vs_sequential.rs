use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use synth_core::combin::{gen_problems, CombProblem, CombTask, GenConfig};
use synth_core::eval::{evaluate, EvalConfig, Guide};
use synth_core::mcts::{big_step_attempt, SearchBudget, SearchConfig, TnnOracle};
use synth_core::par::{self, Parallelism};
use synth_core::task::Phase;
use synth_core::tnn::{train, TnnModel, TrainExample, TrainSchedule};
use synth_core::Task;

const THREADS: usize = 4;
const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn problems(count: usize) -> Vec<CombProblem> {
    let cfg = GenConfig {
        count,
        max_size: 8,
        ..GenConfig::default()
    };
    gen_problems(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
}

/// Examples as the training loop would collect them.
fn examples(model: &Arc<TnnModel>, problems: &[CombProblem]) -> Vec<TrainExample> {
    let oracle = TnnOracle::new(model.clone(), &CombTask.signature(), CombTask.move_count()).unwrap();
    let search = SearchConfig {
        noise: Some(0.25),
        ..SearchConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    problems
        .iter()
        .flat_map(|p| {
            let spec = CombTask.spec(p, Phase::Training);
            big_step_attempt(&spec, &oracle, SearchBudget::simulations(100), 2 * p.size, &search, true, true, &mut rng)
                .unwrap()
                .examples
        })
        .collect()
}

fn training(c: &mut Criterion) {
    let model = Arc::new(CombTask.new_model(16, &mut ChaCha8Rng::seed_from_u64(0)));
    let data = examples(&model, &problems(60));
    let schedule = TrainSchedule {
        epochs: 1,
        ..TrainSchedule::default()
    };
    let mut group = c.benchmark_group("train_one_epoch");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new(name, data.len()), &mode, |b, &mode| {
            par::with_threads(THREADS, || {
                b.iter(|| {
                    let rng = &mut ChaCha8Rng::seed_from_u64(3);
                    black_box(train((*model).clone(), &data, &schedule, rng, mode).unwrap())
                })
            })
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let set = problems(32);
    let mut group = c.benchmark_group("evaluate_uniform");
    group.sample_size(10);
    for (name, mode) in MODES {
        let cfg = EvalConfig {
            budget: SearchBudget::simulations(2000),
            c_explore: 2.0,
            parallelism: mode,
        };
        group.bench_with_input(BenchmarkId::new(name, set.len()), &cfg, |b, cfg| {
            par::with_threads(THREADS, || b.iter(|| black_box(evaluate(&CombTask, &set, &Guide::Uniform, cfg).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, training, evaluation);
criterion_main!(benches);
