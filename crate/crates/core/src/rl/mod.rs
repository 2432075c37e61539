//! The generation loop: pick problems, attempt them by big steps with the
//! current network, keep the resulting examples in a bounded window and
//! train the next network on it.

mod persist;

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mcts::{big_step_attempt, OracleError, Outcome, SearchBudget, SearchConfig, SearchError, TnnOracle};
use crate::par::{self, Parallelism};
use crate::task::{Phase, Task};
use crate::tnn::{train, CheckpointError, TnnError, TnnModel, TrainExample, TrainSchedule};

pub use persist::{rl_loop, LoopConfig, LoopState, STATS_HEADER};

#[derive(Debug, Error)]
pub enum RlError {
    #[error(transparent)]
    Tnn(#[from] TnnError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("problem {id}: {source}")]
    Search { id: usize, source: SearchError },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("resume: {0}")]
    Resume(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub id: usize,
    /// Big steps allowed per attempt.
    pub bound: usize,
    /// One entry per attempt, `true` when solved.
    pub history: Vec<bool>,
}

impl ProblemRecord {
    pub fn new(id: usize, bound: usize) -> Self {
        ProblemRecord {
            id,
            bound,
            history: Vec::new(),
        }
    }

    /// Solved on its most recent attempt.
    pub fn is_positive(&self) -> bool {
        self.history.last() == Some(&true)
    }

    pub fn ever_solved(&self) -> bool {
        self.history.iter().any(|&s| s)
    }
}

/// Inverse length of the run of identical outcomes ending the history;
/// `None` for an empty history.
pub fn streak_score(history: &[bool]) -> Option<f64> {
    let last = *history.last()?;
    let run = history.iter().rev().take_while(|&&s| s == last).count();
    Some(1.0 / run as f64)
}

/// Draws `k` distinct indices with probability proportional to `weights`.
fn weighted_without_replacement<R: Rng + ?Sized>(weights: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    let mut pool: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
    let mut out = Vec::with_capacity(k.min(pool.len()));
    while out.len() < k && !pool.is_empty() {
        let total: f64 = pool.iter().map(|p| p.1).sum();
        let mut r = rng.random::<f64>() * total;
        let mut pick = pool.len() - 1;
        for (j, &(_, w)) in pool.iter().enumerate() {
            if r < w {
                pick = j;
                break;
            }
            r -= w;
        }
        out.push(pool.swap_remove(pick).0);
    }
    out
}

/// Up to `positives` problems solved on their last attempt and up to
/// `negatives` others, each class sampled by streak score. Never-attempted
/// problems are negative with score 1. Returns record indices in
/// ascending order.
pub fn select_problems<R: Rng + ?Sized>(
    records: &[ProblemRecord],
    positives: usize,
    negatives: usize,
    rng: &mut R,
) -> Vec<usize> {
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..records.len()).partition(|&i| records[i].is_positive());
    let mut chosen = Vec::new();
    for (class, k) in [(pos, positives), (neg, negatives)] {
        let weights: Vec<f64> = class
            .iter()
            .map(|&i| streak_score(&records[i].history).unwrap_or(1.0))
            .collect();
        chosen.extend(weighted_without_replacement(&weights, k, rng).into_iter().map(|j| class[j]));
    }
    chosen.sort_unstable();
    chosen
}

/// Sum over problems of the solve rate over their last five attempts.
pub fn expectancy(records: &[ProblemRecord]) -> f64 {
    records
        .iter()
        .filter(|r| !r.history.is_empty())
        .map(|r| {
            let tail = &r.history[r.history.len().saturating_sub(5)..];
            tail.iter().filter(|&&s| s).count() as f64 / tail.len() as f64
        })
        .sum()
}

pub fn solved_at_least_once(records: &[ProblemRecord]) -> usize {
    records.iter().filter(|r| r.ever_solved()).count()
}

/// FIFO buffer of training examples.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleWindow {
    capacity: usize,
    examples: VecDeque<TrainExample>,
}

impl ExampleWindow {
    pub const DEFAULT_CAPACITY: usize = 200_000;

    pub fn new(capacity: usize) -> Self {
        ExampleWindow {
            capacity,
            examples: VecDeque::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Appends, evicting the oldest examples beyond capacity.
    pub fn extend(&mut self, new: impl IntoIterator<Item = TrainExample>) {
        for ex in new {
            if self.capacity == 0 {
                return;
            }
            if self.examples.len() == self.capacity {
                self.examples.pop_front();
            }
            self.examples.push_back(ex);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrainExample> {
        self.examples.iter()
    }

    /// Contents oldest first, as one slice.
    pub fn as_slice(&mut self) -> &[TrainExample] {
        self.examples.make_contiguous()
    }
}

impl Default for ExampleWindow {
    fn default() -> Self {
        ExampleWindow::new(Self::DEFAULT_CAPACITY)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub positives: usize,
    pub negatives: usize,
    pub budget: SearchBudget,
    pub search: SearchConfig,
    pub schedule: TrainSchedule,
    pub dim: usize,
    /// Continue from the previous weights instead of a fresh network.
    pub warm_start: bool,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            positives: 100,
            negatives: 100,
            budget: SearchBudget::simulations(1600),
            search: SearchConfig {
                noise: Some(0.25),
                ..SearchConfig::default()
            },
            schedule: TrainSchedule::default(),
            dim: 16,
            warm_start: false,
            seed: 0,
            parallelism: Parallelism::Sequential,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub attempted: usize,
    pub solved: usize,
    pub solved_at_least_once: usize,
    pub expectancy: f64,
    pub window_len: usize,
    /// `(problem id, outcome)` in id order.
    pub outcomes: Vec<(usize, Outcome)>,
}

const SELECT_STREAM: u64 = 0xFFFF_FFFF;
const TRAIN_STREAM: u64 = 0xFFFF_FFFE;
const INIT_STREAM: u64 = 0xFFFF_FFFD;

/// Generator for one purpose within one generation; independent of how
/// many draws other purposes made.
pub fn stream_rng(seed: u64, generation: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((generation as u64) << 32 | stream);
    rng
}

/// The randomly initialised network explored with in generation 1.
pub fn initial_model<T: Task>(task: &T, cfg: &GenerationConfig) -> TnnModel {
    task.new_model(cfg.dim, &mut stream_rng(cfg.seed, 0, INIT_STREAM))
}

/// One generation. `records[i]` must describe `problems[i]`.
pub fn run_generation<T: Task>(
    task: &T,
    problems: &[T::Problem],
    model: &Arc<TnnModel>,
    records: &mut [ProblemRecord],
    window: &mut ExampleWindow,
    cfg: &GenerationConfig,
    generation: usize,
) -> Result<(TnnModel, GenerationStats), RlError> {
    assert_eq!(problems.len(), records.len(), "one record per problem");
    let oracle = TnnOracle::new(model.clone(), &task.signature(), task.move_count())?;
    let selected = select_problems(
        records,
        cfg.positives,
        cfg.negatives,
        &mut stream_rng(cfg.seed, generation, SELECT_STREAM),
    );
    let results = par::map(&selected, cfg.parallelism, |&i| {
        let problem = &problems[i];
        let id = task.id(problem);
        let spec = task.spec(problem, Phase::Training);
        let mut rng = stream_rng(cfg.seed, generation, id as u64);
        big_step_attempt(
            &spec,
            &oracle,
            cfg.budget,
            records[i].bound,
            &cfg.search,
            true,
            true,
            &mut rng,
        )
        .map_err(|source| RlError::Search { id, source })
    });
    let mut outcomes = Vec::with_capacity(selected.len());
    for (&i, result) in selected.iter().zip(results) {
        let attempt = result?;
        records[i].history.push(attempt.outcome == Outcome::Won);
        window.extend(attempt.examples);
        outcomes.push((records[i].id, attempt.outcome));
    }
    let mut rng = stream_rng(cfg.seed, generation, TRAIN_STREAM);
    let start = if cfg.warm_start {
        (**model).clone()
    } else {
        task.new_model(cfg.dim, &mut rng)
    };
    let next = if window.is_empty() {
        start
    } else {
        train(start, window.as_slice(), &cfg.schedule, &mut rng, cfg.parallelism)?
    };
    let stats = GenerationStats {
        generation,
        attempted: outcomes.len(),
        solved: outcomes.iter().filter(|(_, o)| *o == Outcome::Won).count(),
        solved_at_least_once: solved_at_least_once(records),
        expectancy: expectancy(records),
        window_len: window.len(),
        outcomes,
    };
    Ok((next, stats))
}

#[cfg(test)]
mod tests;
