use std::sync::{Arc, OnceLock};

use rand::Rng;

use super::problems::{gen_problems, parse_problems, write_problems, CombProblem, GenConfig};
use super::{app, apply_vars, normalize, Comb, NormBounds};
use crate::mcts::{SearchSpec, Status};
use crate::task::{GenError, Phase, ProblemFileError, Task, TaskKind};
use crate::term::{Signature, Term};

/// Largest number of arguments a variable may head in an encoded target.
pub const MAX_VAR_ARITY: usize = 8;

/// The five placeholder rewrites, in move-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombMove {
    S,
    SX,
    SXX,
    K,
    KX,
}

impl CombMove {
    pub const ALL: [CombMove; 5] = [CombMove::S, CombMove::SX, CombMove::SXX, CombMove::K, CombMove::KX];

    pub fn template(self) -> Comb {
        match self {
            CombMove::S => Comb::S,
            CombMove::SX => app(Comb::S, Comb::X),
            CombMove::SXX => app(app(Comb::S, Comb::X), Comb::X),
            CombMove::K => Comb::K,
            CombMove::KX => app(Comb::K, Comb::X),
        }
    }
}

/// Arity-tagged operators: `s0..s2`, `k0..k1`, `x0`, `v<i>_<a>` and the
/// binary `pair` joining witness and target.
pub fn comb_signature() -> &'static Arc<Signature> {
    static SIG: OnceLock<Arc<Signature>> = OnceLock::new();
    SIG.get_or_init(|| {
        let mut sig = Signature::new();
        sig.add("pair", 2).unwrap();
        for a in 0..=2 {
            sig.add(&format!("s{a}"), a).unwrap();
        }
        for a in 0..=1 {
            sig.add(&format!("k{a}"), a).unwrap();
        }
        sig.add("x0", 0).unwrap();
        for v in 1..=3 {
            for a in 0..=MAX_VAR_ARITY {
                sig.add(&format!("v{v}_{a}"), a).unwrap();
            }
        }
        Arc::new(sig)
    })
}

/// Collapses application spines: a head applied to `a` arguments becomes
/// the operator `<head><a>` over the encoded arguments. `None` when an
/// arity is outside the signature.
pub fn encode_comb(c: &Comb) -> Option<Term> {
    let sig = comb_signature();
    let (head, args) = c.unwind();
    let name = match head {
        Comb::S => format!("s{}", args.len()),
        Comb::K => format!("k{}", args.len()),
        Comb::X => format!("x{}", args.len()),
        Comb::Var(i) => format!("v{i}_{}", args.len()),
        Comb::App(_) => unreachable!("unwound"),
    };
    let op = sig.lookup(&name)?;
    let args = args.into_iter().map(encode_comb).collect::<Option<Vec<_>>>()?;
    Some(Term::new(op, args))
}

pub fn encode_state(witness: &Comb, target: &Comb) -> Option<Term> {
    let sig = comb_signature();
    Some(sig.apply("pair", vec![encode_comb(witness)?, encode_comb(target)?]))
}

/// Won when the witness with placeholders deleted maps `v1 v2 v3` to the
/// target; lost when the witness is complete but wrong.
pub fn status(witness: &Comb, target: &Comb, bounds: NormBounds) -> Status {
    let solved = witness
        .strip_x()
        .and_then(|w| normalize(&apply_vars(&w), bounds))
        .is_some_and(|nf| nf == *target);
    if solved {
        Status::Won
    } else if witness.contains_x() {
        Status::Ongoing
    } else {
        Status::Lost
    }
}

/// `w v1 v2 v3` normalises to `target` within ten times the generation
/// bounds.
pub fn verify_witness(w: &Comb, target: &Comb) -> bool {
    !w.contains_x() && normalize(&apply_vars(w), NormBounds::VERIFICATION).is_some_and(|nf| nf == *target)
}

/// Search problem for one target. States are partial witnesses.
#[derive(Debug, Clone)]
pub struct CombSpec {
    target: Comb,
    target_term: Term,
    bounds: NormBounds,
}

impl CombSpec {
    /// `None` when the target is not encodable.
    pub fn new(target: Comb, bounds: NormBounds) -> Option<Self> {
        if !target.is_pure() {
            return None;
        }
        let target_term = encode_comb(&target)?;
        Some(CombSpec {
            target,
            target_term,
            bounds,
        })
    }

    pub fn target(&self) -> &Comb {
        &self.target
    }
}

impl SearchSpec for CombSpec {
    type State = Comb;

    fn move_count(&self) -> usize {
        CombMove::ALL.len()
    }

    fn initial_state(&self) -> Comb {
        Comb::X
    }

    fn apply(&self, state: &Comb, mv: usize) -> Comb {
        state
            .replace_first_x(&CombMove::ALL[mv].template())
            .expect("moves apply to witnesses with a placeholder")
    }

    fn status(&self, state: &Comb) -> Status {
        status(state, &self.target, self.bounds)
    }

    fn legal(&self, state: &Comb) -> Vec<bool> {
        vec![state.contains_x(); CombMove::ALL.len()]
    }

    fn encode(&self, state: &Comb) -> Term {
        let w = encode_comb(state).expect("partial witnesses respect s0..s2, k0..k1, x0");
        comb_signature().apply("pair", vec![w, self.target_term.clone()])
    }
}

/// The combinator task as seen by the training loop and evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CombTask;

impl Task for CombTask {
    type Problem = CombProblem;
    type State = Comb;
    type Spec = CombSpec;

    const KIND: TaskKind = TaskKind::Combin;

    fn signature(&self) -> Arc<Signature> {
        comb_signature().clone()
    }

    fn move_count(&self) -> usize {
        CombMove::ALL.len()
    }

    fn spec(&self, problem: &CombProblem, phase: Phase) -> CombSpec {
        let bounds = match phase {
            Phase::Training => NormBounds::GENERATION,
            Phase::Evaluation => NormBounds::VERIFICATION,
        };
        CombSpec::new(problem.target.clone(), bounds).expect("problem targets are encodable")
    }

    fn id(&self, problem: &CombProblem) -> usize {
        problem.id
    }

    fn size(&self, problem: &CombProblem) -> usize {
        problem.size
    }

    fn big_step_bound(&self, problem: &CombProblem) -> usize {
        2 * problem.size
    }

    fn target_text(&self, problem: &CombProblem) -> String {
        problem.target.to_string()
    }

    fn solution_text(&self, problem: &CombProblem) -> String {
        problem.witness.to_string()
    }

    fn witness_text(&self, state: &Comb) -> String {
        state.strip_x().map_or_else(|| "X".to_string(), |w| w.to_string())
    }

    fn verify_text(&self, target: &str, witness: &str) -> Result<bool, String> {
        let target: Comb = target.parse().map_err(|e| format!("target: {e}"))?;
        let witness: Comb = witness.parse().map_err(|e| format!("witness: {e}"))?;
        Ok(verify_witness(&witness, &target))
    }

    fn gen_problems<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<CombProblem>, GenError> {
        let cfg = GenConfig {
            count,
            ..GenConfig::default()
        };
        gen_problems(&cfg, rng)
    }

    fn write_problems(&self, problems: &[CombProblem]) -> String {
        write_problems(problems)
    }

    fn parse_problems(&self, text: &str) -> Result<Vec<CombProblem>, ProblemFileError> {
        parse_problems(text)
    }
}
