//! Final evaluation: one search per problem from its starting state, no
//! noise and no big steps, stopping at the budget or at the first won node.

use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mcts::{search, Oracle, OracleError, SearchBudget, SearchConfig, SearchError, SearchSpec, Status, TnnOracle, UniformOracle};
use crate::par::{self, Parallelism};
use crate::task::{Phase, Task};
use crate::tnn::TnnModel;

/// Source of priors and values during evaluation.
#[derive(Debug, Clone)]
pub enum Guide {
    Uniform,
    Tnn(Arc<TnnModel>),
    Heuristic,
}

impl fmt::Display for Guide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Guide::Uniform => "uniform",
            Guide::Tnn(_) => "tnn",
            Guide::Heuristic => "heuristic",
        })
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("the {0} task has no heuristic")]
    NoHeuristic(crate::TaskKind),
    #[error("problem {id}: {source}")]
    Search { id: usize, source: SearchError },
    #[error("problem {id}: witness `{witness}` failed verification")]
    Unverified { id: usize, witness: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub budget: SearchBudget,
    pub c_explore: f64,
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub id: usize,
    pub target: String,
    pub solved: bool,
    /// Wall-clock time until the win, or of the whole search.
    pub seconds: f64,
    pub simulations: u64,
    pub witness: Option<String>,
}

pub const RESULTS_HEADER: &str = "id\ttarget\tsolved\tseconds\tsims\twitness";

fn solve_one<T: Task>(
    task: &T,
    problem: &T::Problem,
    oracle: &(dyn Oracle<T::Spec> + Send + Sync),
    cfg: &EvalConfig,
) -> Result<EvalResult, EvalError> {
    let id = task.id(problem);
    let spec = task.spec(problem, Phase::Evaluation);
    let start = Instant::now();
    let root = spec.initial_state();
    let mut result = EvalResult {
        id,
        target: task.target_text(problem),
        solved: false,
        seconds: 0.0,
        simulations: 0,
        witness: None,
    };
    let won_state = match spec.status(&root) {
        Status::Won => Some(root),
        Status::Lost => None,
        Status::Ongoing => {
            let search_cfg = SearchConfig {
                c_explore: cfg.c_explore,
                noise: None,
                depth_cap: None,
                stop_on_win: true,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(id as u64);
            let tree = search(&spec, oracle, root, cfg.budget, &search_cfg, &mut rng)
                .map_err(|source| EvalError::Search { id, source })?;
            result.simulations = tree.simulations;
            tree.won.map(|i| tree.nodes[i].state.clone())
        }
    };
    result.seconds = start.elapsed().as_secs_f64();
    if let Some(state) = won_state {
        let witness = task.witness_text(&state);
        if task.verify_text(&result.target, &witness) != Ok(true) {
            return Err(EvalError::Unverified { id, witness });
        }
        result.solved = true;
        result.witness = Some(witness);
    }
    Ok(result)
}

pub fn oracle_for<T: Task>(task: &T, guide: &Guide) -> Result<Box<dyn Oracle<T::Spec> + Send + Sync>, EvalError> {
    Ok(match guide {
        Guide::Uniform => Box::new(UniformOracle),
        Guide::Tnn(model) => Box::new(TnnOracle::new(model.clone(), &task.signature(), task.move_count())?),
        Guide::Heuristic => task.heuristic().ok_or(EvalError::NoHeuristic(T::KIND))?,
    })
}

/// Searches every problem, in parallel across problems when configured.
/// Results are in input order.
pub fn evaluate<T: Task>(task: &T, problems: &[T::Problem], guide: &Guide, cfg: &EvalConfig) -> Result<Vec<EvalResult>, EvalError> {
    let oracle = oracle_for(task, guide)?;
    par::map(problems, cfg.parallelism, |p| solve_one(task, p, &*oracle, cfg))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub solved: usize,
    pub total: usize,
    pub simulations: u64,
    pub seconds: f64,
}

impl EvalSummary {
    pub fn of(results: &[EvalResult]) -> Self {
        EvalSummary {
            solved: results.iter().filter(|r| r.solved).count(),
            total: results.len(),
            simulations: results.iter().map(|r| r.simulations).sum(),
            seconds: results.iter().map(|r| r.seconds).sum(),
        }
    }

    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.solved as f64 / self.total as f64
        }
    }

    pub fn sims_per_second(&self) -> f64 {
        if self.seconds > 0.0 {
            self.simulations as f64 / self.seconds
        } else {
            0.0
        }
    }
}

impl fmt::Display for EvalSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "solved {}/{} ({:.2}%), {} simulations, {:.0} simulations/s",
            self.solved,
            self.total,
            self.percent(),
            self.simulations,
            self.sims_per_second()
        )
    }
}

pub fn results_tsv(results: &[EvalResult]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in results {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.6}\t{}\t{}",
            r.id,
            r.target,
            r.solved,
            r.seconds,
            r.simulations,
            r.witness.as_deref().unwrap_or("")
        );
    }
    out
}

/// A claimed solution read back from a results file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub line: usize,
    pub id: usize,
    pub target: String,
    pub witness: String,
}

/// Solved rows of a results file.
pub fn parse_claims(text: &str) -> Result<Vec<Claim>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && line.starts_with("id\t")) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, target, solved, _, _, witness] = fields[..] else {
            return Err(format!("line {}: expected 6 tab-separated fields", i + 1));
        };
        if solved != "true" {
            continue;
        }
        out.push(Claim {
            line: i + 1,
            id: id.parse().map_err(|_| format!("line {}: bad id `{id}`", i + 1))?,
            target: target.to_string(),
            witness: witness.to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combin::{CombProblem, CombTask};
    use crate::dioph::{DiophProblem, DiophTask, Poly, ALL};

    fn comb(target: &str, witness: &str, size: usize) -> CombProblem {
        CombProblem {
            id: size,
            target: target.parse().unwrap(),
            witness: witness.parse().unwrap(),
            size,
        }
    }

    fn cfg(sims: u64) -> EvalConfig {
        EvalConfig {
            budget: SearchBudget::simulations(sims),
            c_explore: 2.0,
            parallelism: Parallelism::Sequential,
        }
    }

    #[test]
    fn uniform_solves_small_targets() {
        let problems = vec![comb("v1 v2 v3", "S K K", 3), comb("v3", "K (K (S K K))", 5)];
        let results = evaluate(&CombTask, &problems, &Guide::Uniform, &cfg(5000)).unwrap();
        for r in &results {
            assert!(r.solved, "{r:?}");
            assert!(r.simulations > 0 && r.simulations <= 5000);
            let w = r.witness.as_ref().unwrap();
            assert_eq!(CombTask.verify_text(&r.target, w), Ok(true));
        }
    }

    #[test]
    fn unsolved_within_tiny_budget() {
        let problems = vec![comb("v1 v3 v2", "S (S (K S) (S (K K) S)) (K K)", 7)];
        let results = evaluate(&CombTask, &problems, &Guide::Uniform, &cfg(3)).unwrap();
        assert!(!results[0].solved);
        assert_eq!(results[0].simulations, 3);
        assert_eq!(results[0].witness, None);
    }

    #[test]
    fn heuristic_needs_a_task_with_one() {
        let problems = vec![comb("v1 v2 v3", "S K K", 3)];
        assert!(matches!(
            evaluate(&CombTask, &problems, &Guide::Heuristic, &cfg(10)),
            Err(EvalError::NoHeuristic(crate::TaskKind::Combin))
        ));
    }

    #[test]
    fn full_set_is_solved_by_the_empty_polynomial() {
        let problems = vec![DiophProblem {
            id: 0,
            target: ALL,
            witness: "[[8,1,1,1,1]]".parse::<Poly>().unwrap(),
            size: 5,
        }];
        let results = evaluate(&DiophTask, &problems, &Guide::Heuristic, &cfg(10)).unwrap();
        assert!(results[0].solved);
        assert_eq!(results[0].simulations, 0);
        assert_eq!(results[0].witness.as_deref(), Some("[]"));
    }

    #[test]
    fn heuristic_solves_a_single_monomial() {
        let problems = vec![DiophProblem {
            id: 3,
            target: 1,
            witness: "[[1,1]]".parse::<Poly>().unwrap(),
            size: 2,
        }];
        let results = evaluate(&DiophTask, &problems, &Guide::Heuristic, &cfg(20_000)).unwrap();
        assert!(results[0].solved);
    }

    #[test]
    fn results_file_round_trip() {
        let problems = vec![comb("v1 v2 v3", "S K K", 3), comb("v1 v3 v2", "S (S (K S) (S (K K) S)) (K K)", 7)];
        let results = evaluate(&CombTask, &problems, &Guide::Uniform, &cfg(200)).unwrap();
        let text = results_tsv(&results);
        assert!(text.starts_with(RESULTS_HEADER));
        let claims = parse_claims(&text).unwrap();
        assert_eq!(claims.len(), results.iter().filter(|r| r.solved).count());
        assert_eq!(claims[0].id, 3);
        assert_eq!(claims[0].line, 2);
        assert!(parse_claims("id\ttarget\n1\t2\n").is_err());
        let summary = EvalSummary::of(&results);
        assert_eq!(summary.total, 2);
        assert!(summary.to_string().starts_with(&format!("solved {}/2", summary.solved)));
    }

    #[test]
    fn parallel_evaluation_is_in_input_order() {
        let problems: Vec<CombProblem> = (1..=6).map(|i| comb("v1 v2 v3", "S K K", i)).collect();
        let par_cfg = EvalConfig {
            parallelism: Parallelism::Parallel,
            ..cfg(500)
        };
        let seq = evaluate(&CombTask, &problems, &Guide::Uniform, &cfg(500)).unwrap();
        let par = crate::par::with_threads(3, || evaluate(&CombTask, &problems, &Guide::Uniform, &par_cfg).unwrap());
        let strip = |rs: Vec<EvalResult>| -> Vec<(usize, bool, u64, Option<String>)> {
            rs.into_iter().map(|r| (r.id, r.solved, r.simulations, r.witness)).collect()
        };
        assert_eq!(strip(seq), strip(par));
    }
}
