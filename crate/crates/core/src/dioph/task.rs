use std::sync::{Arc, OnceLock};

use rand::Rng;

use super::problems::{gen_problems, parse_problems, write_problems, DiophGenConfig, DiophProblem};
use super::{
    dioph_set_cached, dioph_set_fast, parse_monomials, parse_set, set_to_string, verify_witness, Monomial,
    Poly, MAX_EXP, MAX_MONOMIALS, MODULUS,
};
use crate::mcts::{Evaluation, Oracle, SearchSpec, Status};
use crate::task::{GenError, Phase, ProblemFileError, Task, TaskKind};
use crate::term::{Signature, Term};

/// 15 coefficient moves followed by 5 exponent moves.
pub const MOVE_COUNT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiophMove {
    /// Opens a monomial with this coefficient, `1..=15`.
    Coef(u8),
    /// Exponent of the next variable, `0..=4`.
    Exp(u8),
}

impl DiophMove {
    pub fn index(self) -> usize {
        match self {
            DiophMove::Coef(c) => c as usize - 1,
            DiophMove::Exp(e) => 15 + e as usize,
        }
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < MOVE_COUNT, "move index {i} out of range");
        if i < 15 {
            DiophMove::Coef(i as u8 + 1)
        } else {
            DiophMove::Exp((i - 15) as u8)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pending {
    pub coef: u8,
    pub exps: Vec<u8>,
}

/// A polynomial under construction: completed monomials in normal order
/// and at most one monomial still waiting for exponents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct DiophState {
    pub monos: Vec<Monomial>,
    pub pending: Option<Pending>,
}

impl DiophState {
    pub fn legal(&self) -> Vec<bool> {
        let mut legal = vec![false; MOVE_COUNT];
        match &self.pending {
            None => {
                if self.monos.len() < MAX_MONOMIALS {
                    legal[..15].fill(true);
                }
            }
            Some(p) => {
                for e in 0..=MAX_EXP {
                    let ok = if p.exps.len() == 3 {
                        let exps = [p.exps[0], p.exps[1], p.exps[2], e];
                        self.monos.last().is_none_or(|prev| exps < prev.exps)
                    } else {
                        true
                    };
                    legal[DiophMove::Exp(e).index()] = ok;
                }
            }
        }
        legal
    }

    pub fn apply(&self, mv: DiophMove) -> DiophState {
        let mut next = self.clone();
        match (mv, &mut next.pending) {
            (DiophMove::Coef(coef), None) => next.pending = Some(Pending { coef, exps: Vec::new() }),
            (DiophMove::Exp(e), Some(p)) => {
                p.exps.push(e);
                if p.exps.len() == 4 {
                    let exps = [p.exps[0], p.exps[1], p.exps[2], p.exps[3]];
                    let coef = p.coef;
                    next.pending = None;
                    next.monos.push(Monomial { coef, exps });
                }
            }
            _ => panic!("illegal move {mv:?}"),
        }
        next
    }

    /// The completed part as a polynomial.
    pub fn poly(&self) -> Poly {
        Poly::new(self.monos.clone()).expect("completed monomials stay normalised")
    }
}

/// Fraction of `0..16` on which the completed part's set agrees with
/// `target`.
pub fn heuristic_value(state: &DiophState, target: u16) -> f64 {
    let set = dioph_set_fast(&state.monos);
    (16 - (set ^ target).count_ones()) as f64 / 16.0
}

/// Operators: `pair`, `add`, `mul`, `pending`, `empty`, coefficients
/// `c1..c15`, variable powers `k_pow0..z_pow4` and the literal `setlit`.
pub fn dioph_signature() -> &'static Arc<Signature> {
    static SIG: OnceLock<Arc<Signature>> = OnceLock::new();
    SIG.get_or_init(|| {
        let mut sig = Signature::new();
        sig.add("pair", 2).unwrap();
        sig.add("add", 2).unwrap();
        sig.add("mul", 2).unwrap();
        sig.add("pending", 1).unwrap();
        sig.add("empty", 0).unwrap();
        for c in 1..MODULUS {
            sig.add(&format!("c{c}"), 0).unwrap();
        }
        for v in VARS {
            for e in 0..=MAX_EXP {
                sig.add(&format!("{v}_pow{e}"), 0).unwrap();
            }
        }
        sig.add_literal("setlit").unwrap();
        Arc::new(sig)
    })
}

const VARS: [&str; 4] = ["k", "x", "y", "z"];

fn monomial_term(sig: &Signature, coef: u8, exps: &[u8], keep_zero: bool) -> Term {
    let mut t = sig.leaf(&format!("c{coef}"));
    for (v, &e) in VARS.iter().zip(exps) {
        if e != 0 || keep_zero {
            t = sig.apply("mul", vec![t, sig.leaf(&format!("{v}_pow{e}"))]);
        }
    }
    t
}

fn set_literal(sig: &Signature, target: u16) -> Term {
    let values: Vec<i8> = (0..16).map(|k| if target >> k & 1 == 1 { 1 } else { -1 }).collect();
    Term::literal(sig.lookup("setlit").unwrap(), values)
}

fn encode_poly(sig: &Signature, state: &DiophState) -> Term {
    let mut parts: Vec<Term> = state
        .monos
        .iter()
        .map(|m| monomial_term(sig, m.coef, &m.exps, false))
        .collect();
    if let Some(p) = &state.pending {
        parts.push(sig.apply("pending", vec![monomial_term(sig, p.coef, &p.exps, true)]));
    }
    parts
        .into_iter()
        .reduce(|acc, m| sig.apply("add", vec![acc, m]))
        .unwrap_or_else(|| sig.leaf("empty"))
}

/// `pair(polynomial, setlit[..])`. Completed monomials omit zero
/// exponents; the pending one keeps them so its progress is visible.
pub fn encode_state(state: &DiophState, target: u16) -> Term {
    let sig = dioph_signature();
    sig.apply("pair", vec![encode_poly(sig, state), set_literal(sig, target)])
}

#[derive(Debug, Clone)]
pub struct DiophSpec {
    target: u16,
    target_term: Term,
}

impl DiophSpec {
    pub fn new(target: u16) -> Self {
        DiophSpec {
            target,
            target_term: set_literal(dioph_signature(), target),
        }
    }

    pub fn target(&self) -> u16 {
        self.target
    }
}

impl SearchSpec for DiophSpec {
    type State = DiophState;

    fn move_count(&self) -> usize {
        MOVE_COUNT
    }

    fn initial_state(&self) -> DiophState {
        DiophState::default()
    }

    fn apply(&self, state: &DiophState, mv: usize) -> DiophState {
        state.apply(DiophMove::from_index(mv))
    }

    fn status(&self, state: &DiophState) -> Status {
        if state.pending.is_none() && dioph_set_cached(&state.monos) == self.target {
            Status::Won
        } else if state.legal().iter().any(|&l| l) {
            Status::Ongoing
        } else {
            Status::Lost
        }
    }

    fn legal(&self, state: &DiophState) -> Vec<bool> {
        state.legal()
    }

    fn encode(&self, state: &DiophState) -> Term {
        let sig = dioph_signature();
        sig.apply("pair", vec![encode_poly(sig, state), self.target_term.clone()])
    }
}

/// Uniform prior; value is the share of `0..16` the completed monomials
/// classify correctly. The set is recomputed at every call.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicOracle;

impl Oracle<DiophSpec> for HeuristicOracle {
    fn evaluate(&self, spec: &DiophSpec, state: &DiophState) -> Evaluation {
        Evaluation {
            prior: vec![1.0; MOVE_COUNT],
            value: heuristic_value(state, spec.target),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DiophTask;

impl Task for DiophTask {
    type Problem = DiophProblem;
    type State = DiophState;
    type Spec = DiophSpec;

    const KIND: TaskKind = TaskKind::Dioph;

    fn signature(&self) -> Arc<Signature> {
        dioph_signature().clone()
    }

    fn move_count(&self) -> usize {
        MOVE_COUNT
    }

    fn required_dim(&self) -> Option<usize> {
        Some(16)
    }

    fn spec(&self, problem: &DiophProblem, _phase: Phase) -> DiophSpec {
        DiophSpec::new(problem.target)
    }

    fn id(&self, problem: &DiophProblem) -> usize {
        problem.id
    }

    fn size(&self, problem: &DiophProblem) -> usize {
        problem.size
    }

    fn big_step_bound(&self, problem: &DiophProblem) -> usize {
        2 * 5 * problem.witness.len()
    }

    fn target_text(&self, problem: &DiophProblem) -> String {
        set_to_string(problem.target)
    }

    fn solution_text(&self, problem: &DiophProblem) -> String {
        problem.witness.to_string()
    }

    fn witness_text(&self, state: &DiophState) -> String {
        state.poly().to_string()
    }

    fn verify_text(&self, target: &str, witness: &str) -> Result<bool, String> {
        let target = parse_set(target)?;
        let p = parse_monomials(witness).map_err(|e| e.to_string())?;
        Ok(verify_witness(&p, target))
    }

    fn gen_problems<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<DiophProblem>, GenError> {
        let cfg = DiophGenConfig {
            count,
            ..DiophGenConfig::default()
        };
        gen_problems(&cfg, rng)
    }

    fn write_problems(&self, problems: &[DiophProblem]) -> String {
        write_problems(problems)
    }

    fn parse_problems(&self, text: &str) -> Result<Vec<DiophProblem>, ProblemFileError> {
        parse_problems(text)
    }

    fn heuristic(&self) -> Option<Box<dyn Oracle<DiophSpec> + Send + Sync>> {
        Some(Box::new(HeuristicOracle))
    }
}
