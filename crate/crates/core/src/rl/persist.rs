use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{initial_model, run_generation, ExampleWindow, GenerationConfig, GenerationStats, ProblemRecord, RlError};
use crate::task::Task;
use crate::term::Signature;
use crate::tnn::{TnnModel, TrainExample};

pub const STATS_HEADER: &str = "gen\tsol\texp";
const STATE_FILE: &str = "state.json";
const STATS_FILE: &str = "stats.tsv";

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub generations: usize,
    pub out_dir: PathBuf,
    pub window_capacity: usize,
    /// Continue after the last completed generation found in `out_dir`.
    pub resume: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoredExample {
    input: String,
    policy: Vec<f64>,
    value: f64,
}

/// Everything needed to run the next generation besides the checkpoint.
#[derive(Debug, Serialize, Deserialize)]
pub struct LoopState {
    pub completed: usize,
    pub seed: u64,
    pub records: Vec<ProblemRecord>,
    /// `(gen, solved at least once, expectancy)` per completed generation.
    pub stats: Vec<(usize, usize, f64)>,
    window: Vec<StoredExample>,
}

pub fn checkpoint_path(dir: &Path, generation: usize) -> PathBuf {
    dir.join(format!("gen_{generation}.tnn"))
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)
}

fn stats_tsv(rows: &[(usize, usize, f64)]) -> String {
    let mut out = format!("{STATS_HEADER}\n");
    for (g, sol, exp) in rows {
        out.push_str(&format!("{g}\t{sol}\t{exp:.4}\n"));
    }
    out
}

fn load_state(dir: &Path, sig: &Signature, capacity: usize) -> Result<(LoopState, ExampleWindow), RlError> {
    let text = fs::read_to_string(dir.join(STATE_FILE))?;
    let mut state: LoopState = serde_json::from_str(&text).map_err(|e| RlError::Resume(e.to_string()))?;
    let mut window = ExampleWindow::new(capacity);
    let stored = std::mem::take(&mut state.window);
    let mut examples = Vec::with_capacity(stored.len());
    for ex in stored {
        let input = sig
            .parse(&ex.input)
            .map_err(|e| RlError::Resume(format!("window term: {e}")))?;
        examples.push(TrainExample {
            input,
            policy: ex.policy,
            value: ex.value,
        });
    }
    window.extend(examples);
    Ok((state, window))
}

fn save_state(dir: &Path, sig: &Signature, state: &mut LoopState, window: &ExampleWindow) -> Result<(), RlError> {
    state.window = window
        .iter()
        .map(|ex| StoredExample {
            input: sig.render(&ex.input),
            policy: ex.policy.clone(),
            value: ex.value,
        })
        .collect();
    let text = serde_json::to_string(state).map_err(|e| RlError::Resume(e.to_string()))?;
    state.window.clear();
    write_atomic(&dir.join(STATE_FILE), &text)?;
    Ok(())
}

/// Runs generations `1..=generations`, writing `gen_<n>.tnn`, `stats.tsv`
/// and `state.json` into `out_dir` after each one. `on_generation` sees
/// every finished generation's stats.
pub fn rl_loop<T: Task>(
    task: &T,
    problems: &[T::Problem],
    cfg: &GenerationConfig,
    lcfg: &LoopConfig,
    mut on_generation: impl FnMut(&GenerationStats),
) -> Result<TnnModel, RlError> {
    fs::create_dir_all(&lcfg.out_dir)?;
    let sig = task.signature();
    let (mut state, mut window, mut model) = if lcfg.resume && lcfg.out_dir.join(STATE_FILE).exists() {
        let (state, window) = load_state(&lcfg.out_dir, &sig, lcfg.window_capacity)?;
        if state.seed != cfg.seed {
            return Err(RlError::Resume(format!("state was written with seed {}, not {}", state.seed, cfg.seed)));
        }
        let ids: Vec<usize> = problems.iter().map(|p| task.id(p)).collect();
        if state.records.iter().map(|r| r.id).collect::<Vec<_>>() != ids {
            return Err(RlError::Resume("problem set differs from the saved run".into()));
        }
        let model = if state.completed == 0 {
            initial_model(task, cfg)
        } else {
            let text = fs::read_to_string(checkpoint_path(&lcfg.out_dir, state.completed))?;
            TnnModel::load(&text)?
        };
        (state, window, model)
    } else {
        let records = problems
            .iter()
            .map(|p| ProblemRecord::new(task.id(p), task.big_step_bound(p)))
            .collect();
        let state = LoopState {
            completed: 0,
            seed: cfg.seed,
            records,
            stats: Vec::new(),
            window: Vec::new(),
        };
        (state, ExampleWindow::new(lcfg.window_capacity), initial_model(task, cfg))
    };
    for generation in state.completed + 1..=lcfg.generations {
        let (next, stats) = run_generation(
            task,
            problems,
            &Arc::new(model),
            &mut state.records,
            &mut window,
            cfg,
            generation,
        )?;
        model = next;
        write_atomic(&checkpoint_path(&lcfg.out_dir, generation), &model.save())?;
        state.completed = generation;
        state.stats.push((generation, stats.solved_at_least_once, stats.expectancy));
        save_state(&lcfg.out_dir, &sig, &mut state, &window)?;
        write_atomic(&lcfg.out_dir.join(STATS_FILE), &stats_tsv(&state.stats))?;
        on_generation(&stats);
    }
    Ok(model)
}
