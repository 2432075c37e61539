use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::combin::{gen_problems, CombProblem, CombTask, GenConfig};
use crate::term::Signature;

fn record(history: &[bool]) -> ProblemRecord {
    ProblemRecord {
        id: 0,
        bound: 4,
        history: history.to_vec(),
    }
}

fn mini_problems(count: usize) -> Vec<CombProblem> {
    let cfg = GenConfig {
        count,
        max_size: 4,
        ..GenConfig::default()
    };
    gen_problems(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap()
}

fn mini_config() -> GenerationConfig {
    GenerationConfig {
        budget: SearchBudget::simulations(30),
        schedule: TrainSchedule {
            epochs: 2,
            ..TrainSchedule::default()
        },
        dim: 4,
        seed: 17,
        ..GenerationConfig::default()
    }
}

fn example(v: f64) -> TrainExample {
    let mut sig = Signature::new();
    let a = sig.add("a", 0).unwrap();
    TrainExample {
        input: crate::term::Term::new(a, vec![]),
        policy: vec![1.0],
        value: v,
    }
}

#[test]
fn streak_examples() {
    assert_eq!(streak_score(&[true, true, true]), Some(1.0 / 3.0));
    assert_eq!(streak_score(&[true, false]), Some(1.0));
    assert_eq!(streak_score(&[false, false, true, true]), Some(0.5));
    assert_eq!(streak_score(&[]), None);
}

#[test]
fn positivity() {
    assert!(!record(&[]).is_positive());
    assert!(record(&[false, true]).is_positive());
    assert!(!record(&[true, false]).is_positive());
    assert!(record(&[true, false]).ever_solved());
}

#[test]
fn fresh_records_select_only_negatives() {
    let records: Vec<ProblemRecord> = (0..300).map(|i| ProblemRecord::new(i, 4)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let chosen = select_problems(&records, 100, 100, &mut rng);
    assert_eq!(chosen.len(), 100);
    let distinct: std::collections::HashSet<_> = chosen.iter().collect();
    assert_eq!(distinct.len(), 100);
    assert!(chosen.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn positives_capped_without_backfill() {
    let mut records: Vec<ProblemRecord> = (0..150).map(|_| record(&[true])).collect();
    records.extend((0..10).map(|_| record(&[false])));
    let chosen = select_problems(&records, 100, 100, &mut ChaCha8Rng::seed_from_u64(2));
    assert_eq!(chosen.iter().filter(|&&i| i < 150).count(), 100);
    assert_eq!(chosen.iter().filter(|&&i| i >= 150).count(), 10);
}

#[test]
fn streak_weights_drive_selection() {
    let records = vec![record(&[false]), record(&[false, false, false, false])];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trials = 20_000;
    let first = (0..trials)
        .filter(|_| select_problems(&records, 0, 1, &mut rng) == vec![0])
        .count();
    let ratio = first as f64 / (trials - first) as f64;
    assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn expectancy_examples() {
    assert_eq!(expectancy(&[record(&[true; 5])]), 1.0);
    assert_eq!(expectancy(&[record(&[false, true])]), 0.5);
    assert_eq!(expectancy(&[record(&[]), record(&[])]), 0.0);
    assert_eq!(expectancy(&[record(&[true, false, false, false, false, false])]), 0.0);
    assert_eq!(solved_at_least_once(&[record(&[true, false]), record(&[false])]), 1);
}

#[test]
fn window_is_fifo() {
    let mut w = ExampleWindow::new(3);
    w.extend((0..5).map(|i| example(i as f64)));
    assert_eq!(w.len(), 3);
    let values: Vec<f64> = w.iter().map(|e| e.value).collect();
    assert_eq!(values, vec![2.0, 3.0, 4.0]);
    let mut z = ExampleWindow::new(0);
    z.extend([example(0.0)]);
    assert!(z.is_empty());
}

#[test]
fn window_at_capacity_drops_oldest() {
    let mut w = ExampleWindow::new(2000);
    w.extend((0..2000).map(|i| example(i as f64)));
    w.extend((0..150).map(|i| example(-(i as f64))));
    assert_eq!(w.len(), 2000);
    assert_eq!(w.iter().next().unwrap().value, 150.0);
}

#[test]
fn zero_selection_retrains_on_unchanged_window() {
    let problems = mini_problems(4);
    let task = CombTask;
    let mut records: Vec<ProblemRecord> = problems.iter().map(|p| ProblemRecord::new(p.id, 2 * p.size)).collect();
    let cfg = GenerationConfig {
        positives: 0,
        negatives: 0,
        ..mini_config()
    };
    let model = Arc::new(initial_model(&task, &cfg));
    let mut window = ExampleWindow::new(100);
    let (_, stats) = run_generation(&task, &problems, &model, &mut records, &mut window, &cfg, 1).unwrap();
    assert_eq!(stats.attempted, 0);
    assert_eq!(stats.window_len, 0);
    assert!(records.iter().all(|r| r.history.is_empty()));
}

#[test]
fn generation_updates_records_and_window() {
    let problems = mini_problems(6);
    let task = CombTask;
    let mut records: Vec<ProblemRecord> = problems.iter().map(|p| ProblemRecord::new(p.id, 2 * p.size)).collect();
    let cfg = mini_config();
    let model = Arc::new(initial_model(&task, &cfg));
    let mut window = ExampleWindow::new(10_000);
    let (next, stats) = run_generation(&task, &problems, &model, &mut records, &mut window, &cfg, 1).unwrap();
    assert_eq!(stats.attempted, 6);
    assert!(records.iter().all(|r| r.history.len() == 1));
    assert_eq!(stats.window_len, window.len());
    assert!(stats.expectancy <= stats.solved_at_least_once as f64);
    assert_ne!(next.params(), model.params());
    let ids: Vec<usize> = stats.outcomes.iter().map(|o| o.0).collect();
    assert_eq!(ids, (0..6).collect::<Vec<_>>());
}

#[test]
fn parallel_generation_matches_sequential() {
    let problems = mini_problems(6);
    let task = CombTask;
    let run = |parallelism| {
        let cfg = GenerationConfig {
            parallelism,
            ..mini_config()
        };
        let mut records: Vec<ProblemRecord> =
            problems.iter().map(|p| ProblemRecord::new(p.id, 2 * p.size)).collect();
        let model = Arc::new(initial_model(&task, &cfg));
        let mut window = ExampleWindow::new(10_000);
        let (next, stats) = run_generation(&task, &problems, &model, &mut records, &mut window, &cfg, 1).unwrap();
        (next.save(), stats, records)
    };
    let seq = run(Parallelism::Sequential);
    let par = crate::par::with_threads(4, || run(Parallelism::Parallel));
    assert_eq!(seq, par);
}

#[test]
fn loop_writes_one_checkpoint_and_row_per_generation() {
    let dir = tempfile::tempdir().unwrap();
    let problems = mini_problems(5);
    let lcfg = LoopConfig {
        generations: 1,
        out_dir: dir.path().to_path_buf(),
        window_capacity: 1000,
        resume: false,
    };
    let mut seen = Vec::new();
    rl_loop(&CombTask, &problems, &mini_config(), &lcfg, |s| seen.push(s.generation)).unwrap();
    assert_eq!(seen, vec![1]);
    let mut tnn: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".tnn"))
        .collect();
    tnn.sort();
    assert_eq!(tnn, vec!["gen_1.tnn"]);
    let stats = fs::read_to_string(dir.path().join("stats.tsv")).unwrap();
    let lines: Vec<&str> = stats.lines().collect();
    assert_eq!(lines[0], STATS_HEADER);
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1].split('\t').count(), 3);
    assert!(lines[1].starts_with("1\t"));
}

#[test]
fn resume_reproduces_the_next_generation() {
    let problems = mini_problems(5);
    let cfg = mini_config();
    let straight = tempfile::tempdir().unwrap();
    let lcfg = |dir: &std::path::Path, generations, resume| LoopConfig {
        generations,
        out_dir: dir.to_path_buf(),
        window_capacity: 1000,
        resume,
    };
    rl_loop(&CombTask, &problems, &cfg, &lcfg(straight.path(), 3, false), |_| {}).unwrap();
    let split = tempfile::tempdir().unwrap();
    rl_loop(&CombTask, &problems, &cfg, &lcfg(split.path(), 1, false), |_| {}).unwrap();
    let mut resumed = Vec::new();
    rl_loop(&CombTask, &problems, &cfg, &lcfg(split.path(), 3, true), |s| resumed.push(s.generation)).unwrap();
    assert_eq!(resumed, vec![2, 3]);
    for name in ["gen_2.tnn", "gen_3.tnn", "stats.tsv", "state.json"] {
        let a = fs::read(straight.path().join(name)).unwrap();
        let b = fs::read(split.path().join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    let other_seed = GenerationConfig { seed: 99, ..cfg };
    assert!(matches!(
        rl_loop(&CombTask, &problems, &other_seed, &lcfg(split.path(), 4, true), |_| {}),
        Err(RlError::Resume(_))
    ));
}
