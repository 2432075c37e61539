//! What the training loop and evaluation need from a synthesis task.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::mcts::{Oracle, SearchSpec};
use crate::term::Signature;
use crate::tnn::TnnModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Combin,
    Dioph,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Combin => "combin",
            TaskKind::Dioph => "dioph",
        })
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "combin" => Ok(TaskKind::Combin),
            "dioph" => Ok(TaskKind::Dioph),
            other => Err(format!("unknown task `{other}` (expected combin or dioph)")),
        }
    }
}

/// Where a search problem is used. Training may use tighter resource
/// bounds than evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Training,
    Evaluation,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("generation stalled: {found} of {wanted} distinct problems after {draws} draws")]
    Stalled {
        found: usize,
        wanted: usize,
        draws: usize,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ProblemFileError {
    pub line: usize,
    pub msg: String,
}

pub trait Task: Send + Sync {
    type Problem: Clone + Send + Sync;
    type State: Clone + Send + Sync;
    type Spec: SearchSpec<State = Self::State> + Send + Sync;

    const KIND: TaskKind;

    fn signature(&self) -> Arc<Signature>;
    fn move_count(&self) -> usize;
    /// Embedding dimension forced by the encoding, if any.
    fn required_dim(&self) -> Option<usize> {
        None
    }

    fn spec(&self, problem: &Self::Problem, phase: Phase) -> Self::Spec;

    fn id(&self, problem: &Self::Problem) -> usize;
    /// Size of the generated solution.
    fn size(&self, problem: &Self::Problem) -> usize;
    /// Big steps allowed per training attempt.
    fn big_step_bound(&self, problem: &Self::Problem) -> usize;
    fn target_text(&self, problem: &Self::Problem) -> String;
    fn solution_text(&self, problem: &Self::Problem) -> String;

    /// Text of the solution held by a won state.
    fn witness_text(&self, state: &Self::State) -> String;
    /// Independent check of a textual witness against a textual target.
    fn verify_text(&self, target: &str, witness: &str) -> Result<bool, String>;

    fn gen_problems<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<Self::Problem>, GenError>;
    fn write_problems(&self, problems: &[Self::Problem]) -> String;
    fn parse_problems(&self, text: &str) -> Result<Vec<Self::Problem>, ProblemFileError>;

    /// Hand-written guidance, when the task has one.
    fn heuristic(&self) -> Option<Box<dyn Oracle<Self::Spec> + Send + Sync>> {
        None
    }

    /// Randomly initialised policy/value network for this task.
    fn new_model<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> TnnModel {
        TnnModel::policy_value(self.signature(), dim, self.move_count(), rng)
    }
}
