use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;

use super::{dioph_set_fast, parse_set, set_to_string, Monomial, Poly, MAX_EXP, MAX_MONOMIALS, MODULUS};
use crate::task::{GenError, ProblemFileError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiophProblem {
    pub id: usize,
    /// Bit `k` set iff `k` is in the target set.
    pub target: u16,
    /// Smallest polynomial seen during generation.
    pub witness: Poly,
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiophGenConfig {
    pub count: usize,
    /// Monomial counts are drawn from `1..=max_monomials`.
    pub max_monomials: usize,
    pub max_draws: usize,
}

impl Default for DiophGenConfig {
    fn default() -> Self {
        DiophGenConfig {
            count: 2200,
            max_monomials: MAX_MONOMIALS,
            max_draws: 10_000_000,
        }
    }
}

/// A monomial over the first `0..=4` variables with random exponents.
fn random_monomial<R: Rng + ?Sized>(rng: &mut R) -> Monomial {
    let vars = rng.random_range(0..=4usize);
    let mut exps = [0u8; 4];
    for e in &mut exps[..vars] {
        *e = rng.random_range(0..=MAX_EXP);
    }
    Monomial {
        coef: rng.random_range(1..MODULUS as u8),
        exps,
    }
}

/// Draws random polynomials until `count` distinct sets are found; a
/// repeated set keeps the strictly smaller polynomial. Draws that cancel
/// to the empty polynomial are skipped.
pub fn gen_problems<R: Rng + ?Sized>(cfg: &DiophGenConfig, rng: &mut R) -> Result<Vec<DiophProblem>, GenError> {
    let mut index: HashMap<u16, usize> = HashMap::new();
    let mut problems: Vec<DiophProblem> = Vec::new();
    let mut draws = 0;
    while problems.len() < cfg.count {
        if draws >= cfg.max_draws {
            return Err(GenError::Stalled {
                found: problems.len(),
                wanted: cfg.count,
                draws,
            });
        }
        draws += 1;
        let n = rng.random_range(1..=cfg.max_monomials);
        let monos: Vec<Monomial> = (0..n).map(|_| random_monomial(rng)).collect();
        let poly = Poly::canonical(monos).expect("at most five monomials");
        if poly.is_empty() {
            continue;
        }
        let target = dioph_set_fast(poly.monomials());
        let size = poly.size();
        match index.get(&target) {
            Some(&i) => {
                if size < problems[i].size {
                    problems[i].witness = poly;
                    problems[i].size = size;
                }
            }
            None => {
                index.insert(target, problems.len());
                problems.push(DiophProblem {
                    id: problems.len(),
                    target,
                    witness: poly,
                    size,
                });
            }
        }
    }
    Ok(problems)
}

/// `<id>\t<target>\t<solution>\t<size>` per line, with a header row.
pub fn write_problems(problems: &[DiophProblem]) -> String {
    let mut out = String::from("id\ttarget\twitness\tsize\n");
    for p in problems {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", p.id, set_to_string(p.target), p.witness, p.size);
    }
    out
}

pub fn parse_problems(text: &str) -> Result<Vec<DiophProblem>, ProblemFileError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || (i == 0 && line.starts_with("id\t")) {
            continue;
        }
        let err = |msg: String| ProblemFileError { line: line_no, msg };
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, target, witness, size] = fields[..] else {
            return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
        };
        out.push(DiophProblem {
            id: id.parse().map_err(|_| err(format!("bad id `{id}`")))?,
            target: parse_set(target).map_err(err)?,
            witness: witness.parse().map_err(|e| err(format!("witness: {e}")))?,
            size: size.parse().map_err(|_| err(format!("bad size `{size}`")))?,
        });
    }
    Ok(out)
}
