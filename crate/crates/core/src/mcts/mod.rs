//! Single-player search problems and PUCT-guided Monte Carlo tree search.
//!
//! There are no roll-outs: a newly created node is scored by the oracle's
//! value (1 for won, 0 for lost end states) and that reward is backed up
//! along the selection path. Selection maximises
//! `Q(i) + c * P(i) * sqrt(N) / (1 + N(i))` over legal moves, with
//! `Q(i) = 0` for unvisited moves and ties going to the lowest move index.

mod attempt;
pub mod graph;

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use thiserror::Error;

use crate::term::{Signature, Term};
use crate::tnn::{TnnModel, POLICY_HEAD, VALUE_HEAD};

pub use attempt::{big_step_attempt, Attempt, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Won,
    Lost,
    Ongoing,
}

/// A single-player game with a fixed move alphabet `0..move_count()`.
pub trait SearchSpec {
    type State: Clone;

    fn move_count(&self) -> usize;
    fn initial_state(&self) -> Self::State;
    /// Only called on ongoing states with a legal `mv`.
    fn apply(&self, state: &Self::State, mv: usize) -> Self::State;
    fn status(&self, state: &Self::State) -> Status;
    /// Legality mask of length `move_count()`.
    fn legal(&self, state: &Self::State) -> Vec<bool>;
    fn encode(&self, state: &Self::State) -> Term;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Raw per-move scores; masked and renormalised by the search.
    pub prior: Vec<f64>,
    pub value: f64,
}

pub trait Oracle<S: SearchSpec + ?Sized> {
    fn evaluate(&self, spec: &S, state: &S::State) -> Evaluation;
}

/// Every legal move equally likely, constant value 0.5.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformOracle;

impl<S: SearchSpec + ?Sized> Oracle<S> for UniformOracle {
    fn evaluate(&self, spec: &S, _state: &S::State) -> Evaluation {
        Evaluation {
            prior: vec![1.0; spec.move_count()],
            value: 0.5,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("model signature does not match the task signature")]
    Signature,
    #[error("model head `{head}` outputs {found} values, expected {expected}")]
    HeadDim {
        head: &'static str,
        expected: usize,
        found: usize,
    },
}

/// Policy and value from a trained tree network.
#[derive(Debug, Clone)]
pub struct TnnOracle {
    model: Arc<TnnModel>,
}

impl TnnOracle {
    /// Checks that `model` was built over `sig` with a `moves`-wide policy.
    pub fn new(model: Arc<TnnModel>, sig: &Signature, moves: usize) -> Result<Self, OracleError> {
        if **model.signature() != *sig {
            return Err(OracleError::Signature);
        }
        for (head, expected) in [(POLICY_HEAD, moves), (VALUE_HEAD, 1)] {
            let found = model.head_output_dim(head).unwrap_or(0);
            if found != expected {
                return Err(OracleError::HeadDim {
                    head,
                    expected,
                    found,
                });
            }
        }
        Ok(TnnOracle { model })
    }

    pub fn model(&self) -> &TnnModel {
        &self.model
    }
}

impl<S: SearchSpec + ?Sized> Oracle<S> for TnnOracle {
    fn evaluate(&self, spec: &S, state: &S::State) -> Evaluation {
        let out = self
            .model
            .infer(&spec.encode(state))
            .expect("task encodings are well-formed over the checked signature");
        Evaluation {
            prior: out.policy,
            value: out.value,
        }
    }
}

/// Zeroes illegal moves and renormalises; uniform over legal moves if
/// nothing legal has positive mass.
pub fn mask_prior(raw: &[f64], legal: &[bool]) -> Vec<f64> {
    let mut p: Vec<f64> = raw
        .iter()
        .zip(legal)
        .map(|(&x, &l)| if l && x > 0.0 { x } else { 0.0 })
        .collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    } else {
        let n = legal.iter().filter(|&&l| l).count();
        for (x, &l) in p.iter_mut().zip(legal) {
            *x = if l { 1.0 / n as f64 } else { 0.0 };
        }
    }
    p
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SearchError {
    #[error("search root is an end state")]
    RootIsEnd,
    #[error("node has no legal moves")]
    NoLegalMoves,
    #[error("root has no visited children")]
    NoVisitedChildren,
    #[error("search budget must bound simulations or time")]
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchBudget {
    pub max_simulations: Option<u64>,
    pub max_time: Option<Duration>,
}

impl SearchBudget {
    pub fn simulations(n: u64) -> Self {
        SearchBudget {
            max_simulations: Some(n),
            max_time: None,
        }
    }

    pub fn time(limit: Duration) -> Self {
        SearchBudget {
            max_simulations: None,
            max_time: Some(limit),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub c_explore: f64,
    /// Weight of the uniform-random noise mixed into the root prior.
    pub noise: Option<f64>,
    /// Nodes this many moves below the root are not expanded and score 0.
    pub depth_cap: Option<usize>,
    /// Stop as soon as a won node enters the tree.
    pub stop_on_win: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            c_explore: 2.0,
            noise: None,
            depth_cap: None,
            stop_on_win: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node<St> {
    pub state: St,
    pub status: Status,
    /// Ongoing node at the depth cap; behaves as a losing end state.
    pub capped: bool,
    pub parent: Option<(usize, usize)>,
    pub depth: usize,
    /// Oracle value, or the reward of an end state.
    pub value: f64,
    pub legal: Vec<bool>,
    pub prior: Vec<f64>,
    pub children: Vec<Option<usize>>,
    pub visits: Vec<u32>,
    pub wsum: Vec<f64>,
}

impl<St> Node<St> {
    pub fn is_end(&self) -> bool {
        self.status != Status::Ongoing || self.capped
    }

    /// `1 + sum` of child visit counts.
    pub fn visit_total(&self) -> u64 {
        1 + self.visits.iter().map(|&v| v as u64).sum::<u64>()
    }

    pub fn child_visits(&self) -> u64 {
        self.visits.iter().map(|&v| v as u64).sum()
    }
}

/// Argmax of the PUCT score over legal moves of an ongoing node.
pub fn puct_select<St>(node: &Node<St>, c_explore: f64) -> Result<usize, SearchError> {
    if node.is_end() {
        return Err(SearchError::RootIsEnd);
    }
    let sqrt_total = (node.child_visits() as f64).sqrt();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..node.legal.len() {
        if !node.legal[i] {
            continue;
        }
        let n = node.visits[i] as f64;
        let q = if n > 0.0 { node.wsum[i] / n } else { 0.0 };
        let score = q + c_explore * node.prior[i] * sqrt_total / (1.0 + n);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i).ok_or(SearchError::NoLegalMoves)
}

#[derive(Debug, Clone)]
pub struct SearchTree<St> {
    pub nodes: Vec<Node<St>>,
    pub simulations: u64,
    /// First won node created, if any.
    pub won: Option<usize>,
}

impl<St: Clone> SearchTree<St> {
    pub fn root(&self) -> &Node<St> {
        &self.nodes[0]
    }

    /// Moves leading from the root to node `idx`.
    pub fn path_to(&self, mut idx: usize) -> Vec<usize> {
        let mut moves = Vec::new();
        while let Some((p, mv)) = self.nodes[idx].parent {
            moves.push(mv);
            idx = p;
        }
        moves.reverse();
        moves
    }

    /// Root visit shares.
    pub fn improved_policy(&self) -> Result<Vec<f64>, SearchError> {
        let root = self.root();
        let total = root.child_visits();
        if total == 0 {
            return Err(SearchError::NoVisitedChildren);
        }
        Ok(root
            .visits
            .iter()
            .map(|&v| v as f64 / total as f64)
            .collect())
    }

    /// Mean over every non-end node's value (once each) and every end
    /// node's reward repeated as many times as it was visited.
    pub fn improved_value(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0u64;
        for node in &self.nodes {
            if node.is_end() {
                let visits = match node.parent {
                    Some((p, mv)) => self.nodes[p].visits[mv] as u64,
                    None => 1,
                };
                sum += node.value * visits as f64;
                count += visits;
            } else {
                sum += node.value;
                count += 1;
            }
        }
        sum / count as f64
    }

    /// Most visited root move, lowest index on ties.
    pub fn best_move(&self) -> Result<usize, SearchError> {
        let root = self.root();
        let mut best: Option<(usize, u32)> = None;
        for (i, &v) in root.visits.iter().enumerate() {
            if v > 0 && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i).ok_or(SearchError::NoVisitedChildren)
    }

    /// TSV of the root's legal children: `move prior visits mean_value`.
    pub fn root_stats_tsv(&self) -> String {
        let root = self.root();
        let mut out = String::from("move\tprior\tvisits\tmean_value\n");
        for i in 0..root.legal.len() {
            if !root.legal[i] {
                continue;
            }
            let n = root.visits[i];
            let mean = if n > 0 { root.wsum[i] / n as f64 } else { 0.0 };
            let _ = writeln!(out, "{i}\t{:.6}\t{n}\t{mean:.6}", root.prior[i]);
        }
        out
    }
}

fn make_node<S, O>(
    spec: &S,
    oracle: &O,
    state: S::State,
    parent: Option<(usize, usize)>,
    depth: usize,
    cfg: &SearchConfig,
) -> Node<S::State>
where
    S: SearchSpec + ?Sized,
    O: Oracle<S> + ?Sized,
{
    let status = spec.status(&state);
    let m = spec.move_count();
    let capped = status == Status::Ongoing && cfg.depth_cap.is_some_and(|cap| depth >= cap);
    let mut node = Node {
        state,
        status,
        capped,
        parent,
        depth,
        value: 0.0,
        legal: vec![false; m],
        prior: vec![0.0; m],
        children: vec![None; m],
        visits: vec![0; m],
        wsum: vec![0.0; m],
    };
    match status {
        Status::Won => node.value = 1.0,
        Status::Lost => {}
        Status::Ongoing if capped => {}
        Status::Ongoing => {
            node.legal = spec.legal(&node.state);
            if node.legal.iter().any(|&l| l) {
                let eval = oracle.evaluate(spec, &node.state);
                node.prior = mask_prior(&eval.prior, &node.legal);
                node.value = eval.value.clamp(0.0, 1.0);
            } else {
                node.status = Status::Lost;
            }
        }
    }
    node
}

/// Runs one select / extend / backup iteration. Returns the index of the
/// node created, if any.
pub fn simulate<S, O>(
    tree: &mut SearchTree<S::State>,
    spec: &S,
    oracle: &O,
    cfg: &SearchConfig,
) -> Result<Option<usize>, SearchError>
where
    S: SearchSpec + ?Sized,
    O: Oracle<S> + ?Sized,
{
    let mut path: Vec<(usize, usize)> = Vec::new();
    let mut cur = 0;
    let mut created = None;
    let reward = loop {
        let node = &tree.nodes[cur];
        if node.is_end() {
            if cur == 0 {
                return Err(SearchError::RootIsEnd);
            }
            break node.value;
        }
        let mv = puct_select(node, cfg.c_explore)?;
        path.push((cur, mv));
        match node.children[mv] {
            Some(child) => cur = child,
            None => {
                let state = spec.apply(&node.state, mv);
                let depth = node.depth + 1;
                let child = make_node(spec, oracle, state, Some((cur, mv)), depth, cfg);
                let reward = child.value;
                let idx = tree.nodes.len();
                if child.status == Status::Won && tree.won.is_none() {
                    tree.won = Some(idx);
                }
                tree.nodes.push(child);
                tree.nodes[cur].children[mv] = Some(idx);
                created = Some(idx);
                break reward;
            }
        }
    };
    for (n, mv) in path {
        let node = &mut tree.nodes[n];
        node.visits[mv] += 1;
        node.wsum[mv] += reward;
    }
    tree.simulations += 1;
    Ok(created)
}

/// Builds a fresh tree at `root` and simulates until the budget runs out
/// (or, with `stop_on_win`, until a won node is found).
pub fn search<S, O, R>(
    spec: &S,
    oracle: &O,
    root: S::State,
    budget: SearchBudget,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<SearchTree<S::State>, SearchError>
where
    S: SearchSpec + ?Sized,
    O: Oracle<S> + ?Sized,
    R: Rng + ?Sized,
{
    if budget.max_simulations.is_none() && budget.max_time.is_none() {
        return Err(SearchError::Unbounded);
    }
    let start = Instant::now();
    let mut root_node = make_node(spec, oracle, root, None, 0, cfg);
    if root_node.is_end() {
        return Err(SearchError::RootIsEnd);
    }
    if let Some(eps) = cfg.noise {
        let noise: Vec<f64> = root_node
            .legal
            .iter()
            .map(|&l| if l { rng.random::<f64>() } else { 0.0 })
            .collect();
        let noise = mask_prior(&noise, &root_node.legal);
        for (p, u) in root_node.prior.iter_mut().zip(noise) {
            *p = (1.0 - eps) * *p + eps * u;
        }
    }
    let mut tree = SearchTree {
        nodes: vec![root_node],
        simulations: 0,
        won: None,
    };
    loop {
        if cfg.stop_on_win && tree.won.is_some() {
            break;
        }
        if budget.max_simulations.is_some_and(|n| tree.simulations >= n) {
            break;
        }
        if budget.max_time.is_some_and(|t| start.elapsed() >= t) {
            break;
        }
        simulate(&mut tree, spec, oracle, cfg)?;
    }
    Ok(tree)
}
