//! Explicit finite search problems given as a transition table, plus a
//! breadth-first reachability check. Useful for exercising the search on
//! problems whose answer is known.

use std::collections::VecDeque;

use rand::Rng;

use super::{SearchSpec, Status};
use crate::term::{OpId, Term};

#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    pub status: Status,
    /// `edges[mv]` is the successor under `mv`, `None` when illegal.
    pub edges: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub moves: usize,
    pub states: Vec<GraphState>,
    pub start: usize,
}

impl SearchSpec for GraphSpec {
    type State = usize;

    fn move_count(&self) -> usize {
        self.moves
    }

    fn initial_state(&self) -> usize {
        self.start
    }

    fn apply(&self, state: &usize, mv: usize) -> usize {
        self.states[*state].edges[mv].expect("legal move")
    }

    fn status(&self, state: &usize) -> Status {
        self.states[*state].status
    }

    fn legal(&self, state: &usize) -> Vec<bool> {
        self.states[*state].edges.iter().map(Option::is_some).collect()
    }

    fn encode(&self, state: &usize) -> Term {
        Term::new(OpId(*state as u32), Vec::new())
    }
}

impl GraphSpec {
    /// Whether a won state is reachable from the start through ongoing states.
    pub fn solvable(&self) -> bool {
        let mut seen = vec![false; self.states.len()];
        let mut queue = VecDeque::from([self.start]);
        seen[self.start] = true;
        while let Some(s) = queue.pop_front() {
            match self.states[s].status {
                Status::Won => return true,
                Status::Lost => continue,
                Status::Ongoing => {}
            }
            for &t in self.states[s].edges.iter().flatten() {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        false
    }

    /// A random tree-shaped problem with at most `max_states` states.
    /// Ongoing states always have at least one move; states left unexpanded
    /// when the budget runs out become losing.
    pub fn random_tree<R: Rng + ?Sized>(
        moves: usize,
        max_states: usize,
        p_won: f64,
        p_lost: f64,
        rng: &mut R,
    ) -> GraphSpec {
        let mut states = vec![GraphState {
            status: Status::Ongoing,
            edges: vec![None; moves],
        }];
        let mut queue = VecDeque::from([0usize]);
        while let Some(s) = queue.pop_front() {
            let room = max_states - states.len();
            if room == 0 {
                states[s].status = Status::Lost;
                continue;
            }
            let k = rng.random_range(1..=moves.min(room));
            let mut mvs: Vec<usize> = (0..moves).collect();
            for i in 0..k {
                let j = rng.random_range(i..moves);
                mvs.swap(i, j);
            }
            for &mv in &mvs[..k] {
                let r: f64 = rng.random();
                let status = if r < p_won {
                    Status::Won
                } else if r < p_won + p_lost {
                    Status::Lost
                } else {
                    Status::Ongoing
                };
                let id = states.len();
                states.push(GraphState {
                    status,
                    edges: vec![None; moves],
                });
                states[s].edges[mv] = Some(id);
                if status == Status::Ongoing {
                    queue.push_back(id);
                }
            }
        }
        GraphSpec {
            moves,
            states,
            start: 0,
        }
    }
}
