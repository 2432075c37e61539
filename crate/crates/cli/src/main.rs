mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use synth_core::combin::{self, CombTask};
use synth_core::dioph::DiophTask;
use synth_core::eval::{self, EvalConfig, EvalSummary, Guide};
use synth_core::mcts::{search, SearchBudget, SearchConfig, SearchSpec, Status};
use synth_core::par;
use synth_core::rl::{self, GenerationConfig, LoopConfig};
use synth_core::task::Phase;
use synth_core::tnn::{TnnModel, TrainSchedule};
use synth_core::{Parallelism, Task, TaskKind};

use config::ConfigFile;

/// Learned search for SK-combinator and Diophantine-set synthesis.
#[derive(Debug, Parser)]
#[command(name = "synth", version)]
struct Cli {
    /// Default directory for problem files, training runs and results.
    #[arg(long, global = true, env = "SYNTH_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    /// File of `key = value` settings; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate distinct problems and split them into train and test files.
    Gen(GenArgs),
    /// Run the self-learning loop on a problem file.
    Train(TrainArgs),
    /// Search every problem once and write a results file.
    Eval(EvalArgs),
    /// Re-check every claimed solution in a results file.
    Verify(VerifyArgs),
    /// Write one TPTP problem per combinator problem.
    ExportTptp(ExportArgs),
    /// Search one problem and print the root's children.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    task: Option<TaskKind>,
    /// Total number of distinct problems.
    #[arg(long, default_value_t = 2200)]
    count: usize,
    /// How many of them go to the test file.
    #[arg(long, default_value_t = 200)]
    test: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: the data directory].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    task: Option<TaskKind>,
    /// [default: <data-dir>/train.tsv]
    #[arg(long)]
    problems: Option<PathBuf>,
    /// Directory for checkpoints and statistics [default: <data-dir>/run].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Embedding dimension [default: 16].
    #[arg(long)]
    dim: Option<usize>,
    /// Simulations per big step [default: 1600].
    #[arg(long)]
    sims: Option<u64>,
    /// Weight of the root noise [default: 0.25].
    #[arg(long)]
    noise: Option<f64>,
    /// [default: 2.0]
    #[arg(long)]
    c_explore: Option<f64>,
    /// [default: 10]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 0.02]
    #[arg(long)]
    lr: Option<f64>,
    /// [default: 16]
    #[arg(long)]
    batch: Option<usize>,
    /// Example window capacity [default: 200000].
    #[arg(long)]
    window: Option<usize>,
    /// Problems attempted per generation, half positive and half negative [default: 200].
    #[arg(long)]
    select: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    threads: Option<usize>,
    /// Continue after the last completed generation in the output directory.
    #[arg(long)]
    resume: bool,
    /// Train each generation's network from the previous weights.
    #[arg(long)]
    warm_start: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("guide").required(true).args(["checkpoint", "uniform", "heuristic"])))]
struct EvalArgs {
    #[arg(long)]
    task: Option<TaskKind>,
    /// [default: <data-dir>/test.tsv]
    #[arg(long)]
    problems: Option<PathBuf>,
    /// Network guiding the search.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Uniform priors and values.
    #[arg(long)]
    uniform: bool,
    /// The task's hand-written value (dioph only).
    #[arg(long)]
    heuristic: bool,
    /// Seconds per problem [default: 60].
    #[arg(long)]
    time_limit: Option<f64>,
    /// Stop after this many simulations per problem instead of a time limit.
    #[arg(long)]
    sims: Option<u64>,
    /// [default: 2.0]
    #[arg(long)]
    c_explore: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    threads: Option<usize>,
    /// [default: <data-dir>/results_<guide>.tsv]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    task: Option<TaskKind>,
    results: PathBuf,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    task: Option<TaskKind>,
    /// [default: <data-dir>/test.tsv]
    #[arg(long)]
    problems: Option<PathBuf>,
    /// [default: <data-dir>/tptp]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    task: Option<TaskKind>,
    /// [default: <data-dir>/test.tsv]
    #[arg(long)]
    problems: Option<PathBuf>,
    /// Problem id.
    #[arg(long)]
    id: usize,
    /// Guide with this network instead of uniformly.
    #[arg(long, conflicts_with = "heuristic")]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    heuristic: bool,
    /// [default: 1600]
    #[arg(long)]
    sims: Option<u64>,
    /// [default: 2.0]
    #[arg(long)]
    c_explore: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

macro_rules! dispatch {
    ($kind:expr, $f:ident($($arg:expr),*)) => {
        match $kind {
            TaskKind::Combin => $f(&CombTask, $($arg),*),
            TaskKind::Dioph => $f(&DiophTask, $($arg),*),
        }
    };
}

fn task_of(cfg: &ConfigFile, flag: Option<TaskKind>) -> Result<TaskKind> {
    cfg.pick_opt(flag, "task")?
        .context("no task given: pass --task combin|dioph or set `task` in the config file")
}

fn positive<T: PartialOrd + Default + std::fmt::Display>(name: &str, v: T) -> Result<T> {
    ensure!(v > T::default(), "--{name} must be positive, got {v}");
    Ok(v)
}

fn read_problems<T: Task>(task: &T, path: &Path) -> Result<Vec<T::Problem>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    task.parse_problems(&text).with_context(|| format!("in {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn gen<T: Task>(task: &T, count: usize, test: usize, seed: u64, out: &Path) -> Result<ExitCode> {
    ensure!(test <= count, "--test {test} exceeds --count {count}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut problems = task.gen_problems(count, &mut rng)?;
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for p in &problems {
        *histogram.entry(task.size(p)).or_default() += 1;
    }
    problems.shuffle(&mut rng);
    let mut train = problems.split_off(test);
    let mut test_set = problems;
    train.sort_by_key(|p| task.id(p));
    test_set.sort_by_key(|p| task.id(p));
    write(&out.join("train.tsv"), &task.write_problems(&train))?;
    write(&out.join("test.tsv"), &task.write_problems(&test_set))?;
    let mut hist = String::from("size\tcount\n");
    for (size, n) in histogram {
        hist.push_str(&format!("{size}\t{n}\n"));
    }
    write(&out.join("histogram.tsv"), &hist)?;
    println!(
        "{} problems: {} train, {} test, written to {}",
        count,
        train.len(),
        test_set.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn train<T: Task>(task: &T, problems: &Path, cfg: GenerationConfig, lcfg: LoopConfig, threads: usize) -> Result<ExitCode> {
    if let Some(d) = task.required_dim() {
        ensure!(cfg.dim == d, "the {} task needs --dim {d}, got {}", T::KIND, cfg.dim);
    }
    let problems = read_problems(task, problems)?;
    ensure!(!problems.is_empty(), "no problems to train on");
    let total = problems.len();
    par::with_threads(threads, || {
        rl::rl_loop(task, &problems, &cfg, &lcfg, |s| {
            println!(
                "gen {}: solved {}/{} attempted, solved at least once {}/{}, expectancy {:.4}, window {}",
                s.generation, s.solved, s.attempted, s.solved_at_least_once, total, s.expectancy, s.window_len
            );
        })
    })?;
    println!("checkpoints and stats.tsv in {}", lcfg.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn guide_from(checkpoint: Option<&Path>, heuristic: bool) -> Result<Guide> {
    Ok(match (checkpoint, heuristic) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
            let model = TnnModel::load(&text).with_context(|| format!("loading checkpoint {}", path.display()))?;
            Guide::Tnn(Arc::new(model))
        }
        (None, true) => Guide::Heuristic,
        (None, false) => Guide::Uniform,
    })
}

fn evaluate<T: Task>(task: &T, problems: &Path, guide: &Guide, cfg: EvalConfig, threads: usize, out: &Path) -> Result<ExitCode> {
    let problems = read_problems(task, problems)?;
    let results = par::with_threads(threads, || eval::evaluate(task, &problems, guide, &cfg))?;
    write(out, &eval::results_tsv(&results))?;
    println!("{guide}: {}", EvalSummary::of(&results));
    println!("results in {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn verify<T: Task>(task: &T, results: &Path) -> Result<ExitCode> {
    let text = fs::read_to_string(results).with_context(|| format!("reading {}", results.display()))?;
    let claims = eval::parse_claims(&text).map_err(anyhow::Error::msg)?;
    let mut failed = Vec::new();
    for claim in &claims {
        match task.verify_text(&claim.target, &claim.witness) {
            Ok(true) => {}
            Ok(false) => failed.push(format!("problem {} (line {}): witness does not produce the target", claim.id, claim.line)),
            Err(e) => failed.push(format!("problem {} (line {}): {e}", claim.id, claim.line)),
        }
    }
    println!("{}/{} verified", claims.len() - failed.len(), claims.len());
    for f in &failed {
        println!("failed: {f}");
    }
    Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn export_tptp(problems: &Path, out: &Path) -> Result<ExitCode> {
    let problems = read_problems(&CombTask, problems)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for p in &problems {
        write(&out.join(format!("prob_{}.p", p.id)), &combin::export_tptp(&p.target))?;
    }
    println!("{} files in {}", problems.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn stats<T: Task>(task: &T, problems: &Path, id: usize, guide: &Guide, cfg: SearchConfig, sims: u64, seed: u64) -> Result<ExitCode> {
    let problems = read_problems(task, problems)?;
    let problem = problems
        .iter()
        .find(|p| task.id(p) == id)
        .with_context(|| format!("no problem with id {id}"))?;
    let spec = task.spec(problem, Phase::Evaluation);
    let root = spec.initial_state();
    ensure!(spec.status(&root) == Status::Ongoing, "problem {id} is already decided at its initial state");
    let oracle = eval::oracle_for(task, guide)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = search(&spec, &*oracle, root, SearchBudget::simulations(sims), &cfg, &mut rng)?;
    print!("{}", tree.root_stats_tsv());
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    let data = &cli.data_dir;
    match cli.command {
        Command::Gen(a) => {
            let task = task_of(&cfg, a.task)?;
            let seed = cfg.pick(a.seed, "seed", 0)?;
            let count = positive("count", a.count)?;
            let out = a.out.unwrap_or_else(|| data.clone());
            dispatch!(task, gen(count, a.test, seed, &out))
        }
        Command::Train(a) => {
            let task = task_of(&cfg, a.task)?;
            let generations = cfg
                .pick_opt(a.generations, "generations")?
                .context("no generation count: pass --generations or set `generations`")?;
            let select = positive("select", cfg.pick(a.select, "select", 200)?)?;
            let noise: f64 = cfg.pick(a.noise, "noise", 0.25)?;
            ensure!((0.0..=1.0).contains(&noise), "--noise must lie in [0, 1], got {noise}");
            let threads = positive("threads", cfg.pick(a.threads, "threads", 1)?)?;
            let gcfg = GenerationConfig {
                positives: select / 2,
                negatives: select - select / 2,
                budget: SearchBudget::simulations(positive("sims", cfg.pick(a.sims, "sims", 1600)?)?),
                search: SearchConfig {
                    c_explore: positive("c-explore", cfg.pick(a.c_explore, "c-explore", 2.0)?)?,
                    noise: (noise > 0.0).then_some(noise),
                    ..SearchConfig::default()
                },
                schedule: TrainSchedule {
                    epochs: positive("epochs", cfg.pick(a.epochs, "epochs", 10)?)?,
                    learning_rate: positive("lr", cfg.pick(a.lr, "lr", 0.02)?)?,
                    batch_size: positive("batch", cfg.pick(a.batch, "batch", 16)?)?,
                },
                dim: positive("dim", cfg.pick(a.dim, "dim", 16)?)?,
                warm_start: a.warm_start,
                seed: cfg.pick(a.seed, "seed", 0)?,
                parallelism: Parallelism::from_threads(threads),
            };
            let lcfg = LoopConfig {
                generations: positive("generations", generations)?,
                out_dir: a.out.unwrap_or_else(|| data.join("run")),
                window_capacity: positive("window", cfg.pick(a.window, "window", 200_000)?)?,
                resume: a.resume,
            };
            let problems = a.problems.unwrap_or_else(|| data.join("train.tsv"));
            dispatch!(task, train(&problems, gcfg, lcfg, threads))
        }
        Command::Eval(a) => {
            let task = task_of(&cfg, a.task)?;
            let threads = positive("threads", cfg.pick(a.threads, "threads", 1)?)?;
            let budget = match a.sims {
                Some(n) => SearchBudget::simulations(positive("sims", n)?),
                None => {
                    let secs = positive("time-limit", cfg.pick(a.time_limit, "time-limit", 60.0)?)?;
                    SearchBudget::time(Duration::from_secs_f64(secs))
                }
            };
            let ecfg = EvalConfig {
                budget,
                c_explore: positive("c-explore", cfg.pick(a.c_explore, "c-explore", 2.0)?)?,
                parallelism: Parallelism::from_threads(threads),
            };
            if a.heuristic && task == TaskKind::Combin {
                bail!("--heuristic is only defined for the dioph task");
            }
            let guide = guide_from(a.checkpoint.as_deref(), a.heuristic)?;
            let problems = a.problems.unwrap_or_else(|| data.join("test.tsv"));
            let out = a.out.unwrap_or_else(|| data.join(format!("results_{guide}.tsv")));
            dispatch!(task, evaluate(&problems, &guide, ecfg, threads, &out))
        }
        Command::Verify(a) => {
            let task = task_of(&cfg, a.task)?;
            dispatch!(task, verify(&a.results))
        }
        Command::ExportTptp(a) => {
            let task = task_of(&cfg, a.task)?;
            if task != TaskKind::Combin {
                bail!("export-tptp supports only the combin task");
            }
            let problems = a.problems.unwrap_or_else(|| data.join("test.tsv"));
            export_tptp(&problems, &a.out.unwrap_or_else(|| data.join("tptp")))
        }
        Command::Stats(a) => {
            let task = task_of(&cfg, a.task)?;
            if a.heuristic && task == TaskKind::Combin {
                bail!("--heuristic is only defined for the dioph task");
            }
            let guide = guide_from(a.checkpoint.as_deref(), a.heuristic)?;
            let scfg = SearchConfig {
                c_explore: positive("c-explore", cfg.pick(a.c_explore, "c-explore", 2.0)?)?,
                noise: None,
                ..SearchConfig::default()
            };
            let sims = positive("sims", cfg.pick(a.sims, "sims", 1600)?)?;
            let seed = cfg.pick(a.seed, "seed", 0)?;
            let problems = a.problems.unwrap_or_else(|| data.join("test.tsv"));
            dispatch!(task, stats(&problems, a.id, &guide, scfg, sims, seed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
