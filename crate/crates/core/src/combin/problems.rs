use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;

use super::task::MAX_VAR_ARITY;
use super::{apply_vars, normalize, random_nf, Comb, NormBounds};
use crate::task::{GenError, ProblemFileError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombProblem {
    pub id: usize,
    /// Head normal form over `v1 v2 v3`.
    pub target: Comb,
    /// Smallest witness seen during generation.
    pub witness: Comb,
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    pub count: usize,
    /// Witness sizes are drawn uniformly from `1..=max_size`.
    pub max_size: usize,
    pub bounds: NormBounds,
    /// Give up after this many draws.
    pub max_draws: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            count: 2200,
            max_size: 20,
            bounds: NormBounds::GENERATION,
            max_draws: 50_000_000,
        }
    }
}

fn max_var_arity(c: &Comb) -> usize {
    let (head, args) = c.unwind();
    let own = if matches!(head, Comb::Var(_)) { args.len() } else { 0 };
    args.iter().map(|a| max_var_arity(a)).fold(own, usize::max)
}

/// Draws random normal forms until `count` distinct images are found. An
/// image is kept when `w v1 v2 v3` normalises within bounds to a term made
/// of variables only; a repeated image keeps the strictly smaller witness.
/// Problems are numbered in order of first discovery.
pub fn gen_problems<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<Vec<CombProblem>, GenError> {
    let mut index: HashMap<Comb, usize> = HashMap::new();
    let mut problems: Vec<CombProblem> = Vec::new();
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
        let size = rng.random_range(1..=cfg.max_size);
        let w = random_nf(size, rng);
        let Some(image) = normalize(&apply_vars(&w), cfg.bounds) else {
            continue;
        };
        if !image.is_pure() || max_var_arity(&image) > MAX_VAR_ARITY {
            continue;
        }
        match index.get(&image) {
            Some(&i) => {
                if size < problems[i].size {
                    problems[i].witness = w;
                    problems[i].size = size;
                }
            }
            None => {
                index.insert(image.clone(), problems.len());
                problems.push(CombProblem {
                    id: problems.len(),
                    target: image,
                    witness: w,
                    size,
                });
            }
        }
    }
    Ok(problems)
}

/// `<id>\t<target>\t<witness>\t<size>` per line, with a header row.
pub fn write_problems(problems: &[CombProblem]) -> String {
    let mut out = String::from("id\ttarget\twitness\tsize\n");
    for p in problems {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", p.id, p.target, p.witness, p.size);
    }
    out
}

pub fn parse_problems(text: &str) -> Result<Vec<CombProblem>, ProblemFileError> {
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
        let target: Comb = target.parse().map_err(|e| err(format!("target: {e}")))?;
        if !target.is_pure() {
            return Err(err("target must contain only variables".into()));
        }
        if max_var_arity(&target) > MAX_VAR_ARITY {
            return Err(err(format!("a variable takes more than {MAX_VAR_ARITY} arguments")));
        }
        out.push(CombProblem {
            id: id.parse().map_err(|_| err(format!("bad id `{id}`")))?,
            target,
            witness: witness.parse().map_err(|e| err(format!("witness: {e}")))?,
            size: size.parse().map_err(|_| err(format!("bad size `{size}`")))?,
        });
    }
    Ok(out)
}

pub const TPTP_AXIOMS: &str = "fof(axS,axiom, ![X, Y, Z]: (a(a(a(s,X),Y),Z) = a(a(X,Z),a(Y,Z)))).\n\
fof(axK,axiom, ![X, Y]: (a(a(k,X),Y) = X)).\n";

fn tptp_term(c: &Comb, out: &mut String) {
    match c {
        Comb::Var(i) => {
            let _ = write!(out, "V{i}");
        }
        Comb::App(p) => {
            out.push_str("a(");
            tptp_term(&p.0, out);
            out.push(',');
            tptp_term(&p.1, out);
            out.push(')');
        }
        Comb::S => out.push('s'),
        Comb::K => out.push('k'),
        Comb::X => out.push_str("Vc"),
    }
}

/// First-order problem: the S and K axioms over the binary application
/// symbol `a` and the conjecture that some `Vc` maps `V1 V2 V3` to the
/// target.
pub fn export_tptp(target: &Comb) -> String {
    let mut rhs = String::new();
    tptp_term(target, &mut rhs);
    format!(
        "{TPTP_AXIOMS}fof(conjecture,conjecture, ?[Vc]: ![V1, V2, V3]: (a(a(a(Vc,V1),V2),V3) = {rhs})).\n"
    )
}
