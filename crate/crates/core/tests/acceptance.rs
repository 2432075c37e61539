//! End-to-end acceptance checks. Runs as a plain binary so that every
//! check prints exactly one PASS or FAIL line whatever happens in the
//! others; exits nonzero if any check fails.

use std::collections::{HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use synth_core::combin::{self, count_nf, normalize, random_nf, Comb, CombMove, CombTask, NormBounds};
use synth_core::dioph::{self, parse_monomials, DiophGenConfig, DiophTask, Poly};
use synth_core::eval::{evaluate, EvalConfig, EvalSummary, Guide};
use synth_core::mcts::graph::GraphSpec;
use synth_core::mcts::{search, SearchBudget, SearchConfig, SearchTree, Status, UniformOracle};
use synth_core::rl::{initial_model, rl_loop, run_generation, ExampleWindow, GenerationConfig, LoopConfig, ProblemRecord};
use synth_core::term::{Signature, Term};
use synth_core::tnn::{TnnModel, TrainExample};
use synth_core::{Parallelism, Task};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn c(s: &str) -> Comb {
    s.parse().unwrap()
}

/// Witnesses completed by exactly `n` moves, by brute force over all move
/// sequences.
fn witnesses_by_moves(n: usize) -> Vec<Comb> {
    let mut frontier = vec![Comb::X];
    for _ in 0..n {
        frontier = frontier
            .iter()
            .filter(|w| w.contains_x())
            .flat_map(|w| CombMove::ALL.iter().map(move |m| w.replace_first_x(&m.template()).unwrap()))
            .collect();
    }
    frontier.into_iter().filter(|w| !w.contains_x()).collect()
}

fn normal_form_counting() -> Check {
    ensure!(count_nf(4).to_string() == "40", "count_nf(4) = {}", count_nf(4));
    let mut counts = Vec::new();
    for n in 1..=7 {
        let found = witnesses_by_moves(n);
        let distinct: HashSet<&Comb> = found.iter().collect();
        ensure!(distinct.len() == found.len(), "size {n}: duplicate witnesses");
        ensure!(found.iter().all(|w| !w.has_redex() && w.size() == n), "size {n}: not all normal forms of size {n}");
        ensure!(count_nf(n).to_string() == found.len().to_string(), "size {n}: count {} vs enumeration {}", count_nf(n), found.len());
        counts.push(found.len());
    }
    Ok(format!("count_nf(4) = 40; sizes 1..7 enumerate to {counts:?}"))
}

fn witness_oracles() -> Check {
    ensure!(
        combin::verify_witness(&c("S (S (K S) (S (K K) S)) (K K)"), &c("v1 v3 v2")),
        "flip combinator rejected"
    );
    let big = c("S (S (S (K (S (S (K S)))) K) S) (S (S (S (S K K))))");
    let target = c("v1 v2 (v1 v2) (v2 (v1 v2) (v1 v2 (v2 (v1 v2)))) v3");
    ensure!(combin::verify_witness(&big, &target), "largest combinator rejected");
    let b = "(S (K S) K)";
    let got = normalize(&c(&format!("S ({b} {b} S) (K K)")), NormBounds::GENERATION);
    ensure!(got == Some(c("S (S (K (S (K S) K)) S) (K K)")), "S (B B S) (K K) normalised to {got:?}");
    let p = Poly::canonical(parse_monomials("[[1,0,0,2],[12,0,4],[7,1],[7,2,2,2],[7,2,2,2,2]]").unwrap()).unwrap();
    let want = [0, 1, 3, 4, 5, 9, 11, 12, 13].iter().fold(0u16, |s, &k| s | 1 << k);
    ensure!(dioph::dioph_set(p.monomials()) == want, "polynomial defines {}", dioph::set_to_string(dioph::dioph_set(p.monomials())));
    ensure!(dioph::verify_witness(p.monomials(), want), "polynomial witness rejected");
    Ok("four witnesses verified".into())
}

fn small_sig() -> Arc<Signature> {
    let mut sig = Signature::new();
    for (name, arity) in [("a", 0), ("b", 0), ("g", 1), ("f", 2), ("h", 3)] {
        sig.add(name, arity).unwrap();
    }
    Arc::new(sig)
}

fn random_term<R: Rng>(sig: &Signature, depth: usize, rng: &mut R) -> Term {
    let names: &[&str] = if depth == 0 { &["a", "b"] } else { &["a", "b", "g", "f", "h"] };
    let name = names[rng.random_range(0..names.len())];
    let arity = sig.op(sig.lookup(name).unwrap()).arity;
    let args = (0..arity).map(|_| random_term(sig, depth - depth.min(1), rng)).collect();
    sig.apply(name, args)
}

fn gradient_check() -> Check {
    let sig = small_sig();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let dim = rng.random_range(2..=4);
        let moves = rng.random_range(1..=4);
        let model = TnnModel::policy_value(sig.clone(), dim, moves, &mut rng);
        let shared = random_term(&sig, 2, &mut rng);
        let input = sig.apply("f", vec![shared.clone(), sig.apply("g", vec![shared])]);
        let mut policy: Vec<f64> = (0..moves).map(|_| rng.random()).collect();
        let total: f64 = policy.iter().sum();
        policy.iter_mut().for_each(|p| *p /= total);
        let ex = TrainExample { input, policy, value: rng.random() };
        let analytic = model.gradient(&ex).unwrap();
        let mut probe = model.clone();
        for i in 0..analytic.len() {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + h;
            let up = probe.loss(&ex).unwrap();
            probe.params_mut()[i] = orig - h;
            let down = probe.loss(&ex).unwrap();
            probe.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    ensure!(worst < 1e-4, "max relative error {worst:e}");
    Ok(format!("50 networks, max relative error {worst:.2e}"))
}

fn tree_violation<St: Clone>(tree: &SearchTree<St>) -> Option<String> {
    for (i, node) in tree.nodes.iter().enumerate() {
        let mut sum = 0u64;
        for mv in 0..node.visits.len() {
            let n = node.visits[mv];
            if node.wsum[mv] < -1e-12 || node.wsum[mv] > n as f64 + 1e-9 {
                return Some(format!("node {i} move {mv}: reward sum {} over {n} visits", node.wsum[mv]));
            }
            if let Some(ch) = node.children[mv] {
                let child = &tree.nodes[ch];
                if !child.is_end() && child.visit_total() != n as u64 {
                    return Some(format!("node {ch}: {} visits, edge says {n}", child.visit_total()));
                }
                sum += n as u64;
            } else if n > 0 {
                return Some(format!("node {i} move {mv}: visits without a child"));
            }
        }
        if node.visit_total() != 1 + sum {
            return Some(format!("node {i}: visit total is not 1 + children"));
        }
        if !(0.0..=1.0).contains(&node.value) {
            return Some(format!("node {i}: value {}", node.value));
        }
    }
    let p = tree.improved_policy().ok()?;
    if (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 || p.iter().any(|&x| x < 0.0) {
        return Some(format!("improved policy {p:?}"));
    }
    let v = tree.improved_value();
    if !(0.0..=1.0).contains(&v) {
        return Some(format!("improved value {v}"));
    }
    None
}

/// States the search can reach: everything behind ongoing states.
fn reachable(spec: &GraphSpec) -> usize {
    let mut seen = vec![false; spec.states.len()];
    let mut stack = vec![spec.start];
    seen[spec.start] = true;
    let mut count = 0;
    while let Some(s) = stack.pop() {
        count += 1;
        if spec.states[s].status != Status::Ongoing {
            continue;
        }
        for &t in spec.states[s].edges.iter().flatten() {
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    count
}

fn mcts_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut solvable, mut most_sims) = (0, 0);
    let trials = 100;
    for t in 0..trials {
        let moves = rng.random_range(2..=4);
        let spec = GraphSpec::random_tree(moves, rng.random_range(2..=500), 0.02, 0.3, &mut rng);
        let all = reachable(&spec);
        // Grow the budget until the search wins or has seen every state.
        let mut budget = 20 * spec.states.len() as u64;
        let tree = loop {
            let tree = search(&spec, &UniformOracle, 0, SearchBudget::simulations(budget), &SearchConfig::default(), &mut rng)
                .map_err(|e| format!("trial {t}: {e}"))?;
            if let Some(v) = tree_violation(&tree) {
                return Err(format!("trial {t}: {v}"));
            }
            ensure!(tree.simulations == budget, "trial {t}: {} simulations", tree.simulations);
            ensure!(tree.nodes.len() <= all, "trial {t}: {} nodes for {all} states", tree.nodes.len());
            if tree.won.is_some() || tree.nodes.len() == all || budget >= 1 << 24 {
                break tree;
            }
            budget *= 2;
        };
        ensure!(tree.won.is_some() || tree.nodes.len() == all, "trial {t}: {budget} simulations cover {} of {all} states", tree.nodes.len());
        ensure!(tree.won.is_some() == spec.solvable(), "trial {t}: search and breadth-first search disagree");
        solvable += spec.solvable() as usize;
        most_sims = most_sims.max(budget);
    }
    Ok(format!("{trials} random problems ({solvable} solvable), all invariants hold, at most {most_sims} simulations"))
}

fn uniform_generation() -> Check {
    let universe = witnesses_by_moves(4);
    let mut counts: HashMap<Comb, u64> = universe.into_iter().map(|w| (w, 0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let draws = 40_000;
    for _ in 0..draws {
        let w = random_nf(4, &mut rng);
        match counts.get_mut(&w) {
            Some(n) => *n += 1,
            None => return Err(format!("{w} is not a size-4 normal form")),
        }
    }
    let expected = draws as f64 / counts.len() as f64;
    let stat: f64 = counts.values().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(counts.len() as f64 - 1.0).unwrap().cdf(stat);
    ensure!(p > 0.001, "chi-square {stat:.2}, p = {p:.5}");
    Ok(format!("{draws} draws over {} forms, chi-square {stat:.2}, p = {p:.3}", counts.len()))
}

const MINI_SEED: u64 = 1;
const MINI_GENERATIONS: usize = 20;

struct Table {
    rows: Vec<(String, EvalSummary, EvalSummary)>,
}

impl Table {
    fn print(&self, train: usize, test: usize) {
        println!("       {:<24}{:>14}{:>12}{:>14}", "strategy", format!("train ({train})"), format!("test ({test})"), "sims/s");
        for (name, tr, te) in &self.rows {
            println!("       {name:<24}{:>14.2}{:>12.1}{:>14.0}", tr.percent(), te.percent(), te.sims_per_second());
        }
    }

    fn test(&self, prefix: &str) -> &EvalSummary {
        &self.rows.iter().find(|r| r.0.starts_with(prefix)).unwrap().2
    }
}

struct MiniRun {
    solved_curve: Vec<usize>,
    table: Table,
    seconds: f64,
}

fn mini_rl<T: Task>(task: &T, train: &[T::Problem], test: &[T::Problem], dim: usize) -> MiniRun {
    let start = Instant::now();
    let cfg = GenerationConfig {
        budget: SearchBudget::simulations(200),
        dim,
        seed: MINI_SEED,
        warm_start: true,
        ..GenerationConfig::default()
    };
    let mut records: Vec<ProblemRecord> = train.iter().map(|p| ProblemRecord::new(task.id(p), task.big_step_bound(p))).collect();
    let mut window = ExampleWindow::default();
    let mut model = Arc::new(initial_model(task, &cfg));
    let mut solved_curve = Vec::new();
    for generation in 1..=MINI_GENERATIONS {
        let (next, stats) = run_generation(task, train, &model, &mut records, &mut window, &cfg, generation).unwrap();
        solved_curve.push(stats.solved_at_least_once);
        model = Arc::new(next);
    }
    let mut guides = vec![("uniform @20k".to_string(), Guide::Uniform, 20_000)];
    if task.heuristic().is_some() {
        guides.push(("heuristic @20k".to_string(), Guide::Heuristic, 20_000));
    }
    guides.push(("TNN-guided @10k".to_string(), Guide::Tnn(model), 10_000));
    let rows = guides
        .into_iter()
        .map(|(name, guide, sims)| {
            let ecfg = EvalConfig {
                budget: SearchBudget::simulations(sims),
                c_explore: 2.0,
                parallelism: Parallelism::Sequential,
            };
            let tr = EvalSummary::of(&evaluate(task, train, &guide, &ecfg).unwrap());
            let te = EvalSummary::of(&evaluate(task, test, &guide, &ecfg).unwrap());
            (name, tr, te)
        })
        .collect();
    MiniRun {
        solved_curve,
        table: Table { rows },
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn judge_mini(name: &str, run: &MiniRun, train: usize, test: usize) -> Check {
    run.table.print(train, test);
    let curve = &run.solved_curve;
    let (tnn, uniform) = (run.table.test("TNN").solved, run.table.test("uniform").solved);
    let detail = format!(
        "{name}: solved-at-least-once {curve:?}; held-out TNN@10k {tnn}/{test} vs uniform@20k {uniform}/{test}; {:.0}s",
        run.seconds
    );
    ensure!(curve.windows(2).all(|w| w[0] <= w[1]), "{detail} (curve decreases)");
    ensure!(curve.last() > curve.first(), "{detail} (no increase)");
    ensure!(tnn > uniform, "{detail} (TNN does not beat uniform)");
    Ok(detail)
}

fn combin_split() -> (Vec<combin::CombProblem>, Vec<combin::CombProblem>) {
    // Every distinct target reachable with a witness of size at most 6.
    let cfg = combin::GenConfig {
        count: 66,
        max_size: 6,
        max_draws: 10_000_000,
        ..combin::GenConfig::default()
    };
    let mut problems = combin::gen_problems(&cfg, &mut ChaCha8Rng::seed_from_u64(MINI_SEED)).unwrap();
    problems.shuffle(&mut ChaCha8Rng::seed_from_u64(MINI_SEED));
    let test = problems.split_off(50);
    (problems, test)
}

fn dioph_split() -> (Vec<dioph::DiophProblem>, Vec<dioph::DiophProblem>) {
    let cfg = DiophGenConfig {
        count: 70,
        max_monomials: 2,
        max_draws: 10_000_000,
    };
    let mut problems = dioph::gen_problems(&cfg, &mut ChaCha8Rng::seed_from_u64(MINI_SEED)).unwrap();
    problems.shuffle(&mut ChaCha8Rng::seed_from_u64(MINI_SEED));
    let test = problems.split_off(50);
    (problems, test)
}

fn baseline_ordering(run: &MiniRun) -> Check {
    let uniform = run.table.test("uniform").sims_per_second();
    let heuristic = run.table.test("heuristic").sims_per_second();
    let counts: Vec<String> = run.table.rows.iter().map(|(n, _, te)| format!("{n} {}/{}", te.solved, te.total)).collect();
    let detail = format!("heuristic {heuristic:.0} vs uniform {uniform:.0} sims/s; held-out {}", counts.join(", "));
    ensure!(heuristic < uniform, "{detail}");
    Ok(detail)
}

fn tptp_byte_match() -> Check {
    let expected = "fof(axS,axiom, ![X, Y, Z]: (a(a(a(s,X),Y),Z) = a(a(X,Z),a(Y,Z)))).\n\
fof(axK,axiom, ![X, Y]: (a(a(k,X),Y) = X)).\n\
fof(conjecture,conjecture, ?[Vc]: ![V1, V2, V3]: (a(a(a(Vc,V1),V2),V3) = V3)).\n";
    let got = combin::export_tptp(&c("v3"));
    ensure!(got == expected, "export differs:\n{got}");
    Ok("three lines identical".into())
}

fn round_trips() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sig = small_sig();
    for _ in 0..200 {
        let t = random_term(&sig, 5, &mut rng);
        let text = sig.render(&t);
        ensure!(sig.parse(&text).as_ref() == Ok(&t), "term `{text}` does not round-trip");
    }
    for _ in 0..200 {
        let w = random_nf(rng.random_range(1..=30), &mut rng);
        ensure!(w.to_string().parse::<Comb>() == Ok(w.clone()), "combinator `{w}` does not round-trip");
    }
    let model = TnnModel::policy_value(combin::comb_signature().clone(), 8, 5, &mut rng);
    let text = model.save();
    let back = TnnModel::load(&text).map_err(|e| e.to_string())?;
    ensure!(back.save() == text, "checkpoint text changes on reload");
    let bits = |m: &TnnModel| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    ensure!(bits(&back) == bits(&model), "checkpoint parameters change on reload");

    let (train, test) = combin_split();
    let train = &train[..10];
    let cfg = GenerationConfig {
        budget: SearchBudget::simulations(50),
        dim: 4,
        seed: 5,
        ..GenerationConfig::default()
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let lcfg = LoopConfig {
            generations: 3,
            out_dir: dir.path().to_path_buf(),
            window_capacity: 10_000,
            resume: false,
        };
        rl_loop(&CombTask, train, &cfg, &lcfg, |_| {}).map_err(|e| e.to_string())?;
    }
    for name in ["gen_1.tnn", "gen_2.tnn", "gen_3.tnn", "stats.tsv", "state.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        ensure!(a == b, "seeded training runs differ in {name}");
    }
    let ecfg = EvalConfig {
        budget: SearchBudget::simulations(2000),
        c_explore: 2.0,
        parallelism: Parallelism::Sequential,
    };
    let strip = || -> Vec<(usize, bool, u64, Option<String>)> {
        evaluate(&CombTask, &test, &Guide::Uniform, &ecfg)
            .unwrap()
            .into_iter()
            .map(|r| (r.id, r.solved, r.simulations, r.witness))
            .collect()
    };
    ensure!(strip() == strip(), "seeded evaluations differ");
    let gen = || {
        let cfg = DiophGenConfig { count: 50, ..DiophGenConfig::default() };
        dioph::write_problems(&dioph::gen_problems(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap())
    };
    ensure!(gen() == gen(), "seeded problem generation differs");
    Ok("terms, combinators, checkpoints, training, evaluation and generation reproduce exactly".into())
}

fn report(name: &str, outcome: std::thread::Result<Check>, failures: &mut usize) {
    let line = match outcome {
        Ok(Ok(detail)) => format!("PASS  {name}: {detail}"),
        Ok(Err(why)) => format!("FAIL  {name}: {why}"),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            format!("FAIL  {name}: panicked: {msg}")
        }
    };
    if line.starts_with("FAIL") {
        *failures += 1;
    }
    println!("{line}");
}

fn main() {
    // A substring of check names restricts the run, e.g. `cargo test --test acceptance -- gradient`.
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let wanted = |name: &str| filter.as_deref().is_none_or(|f| name.contains(f));
    let mut failures = 0;
    let quick: [(&str, fn() -> Check); 7] = [
        ("normal-form counting", normal_form_counting),
        ("witness oracles", witness_oracles),
        ("gradient check", gradient_check),
        ("search invariants", mcts_invariants),
        ("uniform generation", uniform_generation),
        ("TPTP byte match", tptp_byte_match),
        ("round trips and determinism", round_trips),
    ];
    for (name, check) in quick.into_iter().filter(|q| wanted(q.0)) {
        let start = Instant::now();
        let outcome = catch_unwind(check);
        let name = format!("{name} [{:.2}s]", start.elapsed().as_secs_f64());
        report(&name, outcome, &mut failures);
    }

    if wanted("mini learning, combinators") {
        println!("mini combinator run, seed {MINI_SEED}");
        let combin_run = catch_unwind(|| {
            let (train, test) = combin_split();
            let run = mini_rl(&CombTask, &train, &test, 8);
            (run, train.len(), test.len())
        });
        report(
            "mini learning, combinators",
            combin_run.map(|(run, tr, te)| judge_mini("combinators", &run, tr, te)),
            &mut failures,
        );
    }

    if wanted("mini learning, polynomials") || wanted("baseline ordering") {
        println!("mini polynomial run, seed {MINI_SEED}");
        let dioph_run = catch_unwind(|| {
            let (train, test) = dioph_split();
            let run = mini_rl(&DiophTask, &train, &test, 16);
            (run, train.len(), test.len())
        });
        match dioph_run {
            Ok((run, tr, te)) => {
                let run = AssertUnwindSafe(run);
                report("mini learning, polynomials", catch_unwind(|| judge_mini("polynomials", &run, tr, te)), &mut failures);
                report("baseline ordering", catch_unwind(|| baseline_ordering(&run)), &mut failures);
            }
            Err(e) => {
                report("mini learning, polynomials", Err(e), &mut failures);
                report("baseline ordering", Ok(Err("polynomial run did not complete".into())), &mut failures);
            }
        }
    }

    println!("{failures} check(s) failed");
    if failures > 0 {
        std::process::exit(1);
    }
}
