use rand::Rng;

use super::{search, Oracle, SearchBudget, SearchConfig, SearchError, SearchSpec, Status};
use crate::tnn::TrainExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Won,
    Lost,
    /// The big-step bound was reached without an end state.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct Attempt<St> {
    pub outcome: Outcome,
    pub examples: Vec<TrainExample>,
    pub final_state: St,
    pub moves: Vec<usize>,
}

/// A full attempt by big steps: search from the current state with a fresh
/// tree, record `(state, improved policy, improved value)` when `collect`,
/// commit the most visited move, repeat.
///
/// With `cap_depth` the search below each big step is limited so that no
/// node lies more than `max_big_steps` moves from the problem start.
#[allow(clippy::too_many_arguments)]
pub fn big_step_attempt<S, O, R>(
    spec: &S,
    oracle: &O,
    budget: SearchBudget,
    max_big_steps: usize,
    cfg: &SearchConfig,
    cap_depth: bool,
    collect: bool,
    rng: &mut R,
) -> Result<Attempt<S::State>, SearchError>
where
    S: SearchSpec + ?Sized,
    O: Oracle<S> + ?Sized,
    R: Rng + ?Sized,
{
    let mut state = spec.initial_state();
    let mut examples = Vec::new();
    let mut moves = Vec::new();
    loop {
        match spec.status(&state) {
            Status::Won => return Ok(finish(Outcome::Won, examples, state, moves)),
            Status::Lost => return Ok(finish(Outcome::Lost, examples, state, moves)),
            Status::Ongoing if moves.len() >= max_big_steps => {
                return Ok(finish(Outcome::Exhausted, examples, state, moves))
            }
            Status::Ongoing => {}
        }
        let mut step_cfg = *cfg;
        if cap_depth {
            step_cfg.depth_cap = Some(max_big_steps - moves.len());
        }
        let tree = match search(spec, oracle, state.clone(), budget, &step_cfg, rng) {
            Ok(t) => t,
            // An ongoing state without legal moves.
            Err(SearchError::RootIsEnd) => {
                return Ok(finish(Outcome::Lost, examples, state, moves))
            }
            Err(e) => return Err(e),
        };
        let mv = tree.best_move()?;
        if collect {
            examples.push(TrainExample {
                input: spec.encode(&state),
                policy: tree.improved_policy()?,
                value: tree.improved_value(),
            });
        }
        state = spec.apply(&state, mv);
        moves.push(mv);
    }
}

fn finish<St>(outcome: Outcome, examples: Vec<TrainExample>, final_state: St, moves: Vec<usize>) -> Attempt<St> {
    Attempt {
        outcome,
        examples,
        final_state,
        moves,
    }
}
