//! SK-combinator synthesis.
//!
//! A problem gives a head normal form `h` over the variables `v1 v2 v3`; a
//! solution is a combinator `w` with `w v1 v2 v3 ->* h` under the rewrite
//! system `S x y z -> x z (y z)`, `K x y -> x`. Witnesses are built by
//! rewriting the leftmost placeholder `X` with one of five templates, which
//! yields exactly the normal-form combinators.

mod nf;
mod problems;
mod task;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use nf::{count_nf, random_nf};
pub use problems::{
    export_tptp, gen_problems, parse_problems, write_problems, CombProblem, GenConfig, TPTP_AXIOMS,
};
pub use task::{
    comb_signature, encode_comb, encode_state, status, verify_witness, CombMove, CombSpec,
    CombTask, MAX_VAR_ARITY,
};

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Comb {
    S,
    K,
    /// Synthesis placeholder.
    X,
    /// Variable `v<i>`, `i >= 1`.
    Var(u8),
    App(Arc<(Comb, Comb)>),
}

/// Divergence guards for normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormBounds {
    pub max_steps: usize,
    pub max_size: usize,
}

impl NormBounds {
    /// Bounds used while generating problems and during training.
    pub const GENERATION: NormBounds = NormBounds {
        max_steps: 100,
        max_size: 400,
    };
    /// Ten times the generation bounds, for evaluation and verification.
    pub const VERIFICATION: NormBounds = NormBounds {
        max_steps: 1000,
        max_size: 4000,
    };
}

pub fn app(f: Comb, a: Comb) -> Comb {
    Comb::App(Arc::new((f, a)))
}

/// `head a1 a2 ... an`
pub fn apply_all(head: Comb, args: impl IntoIterator<Item = Comb>) -> Comb {
    args.into_iter().fold(head, app)
}

impl Comb {
    /// Head and arguments of the application spine.
    pub fn unwind(&self) -> (&Comb, Vec<&Comb>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Comb::App(p) = cur {
            args.push(&p.1);
            cur = &p.0;
        }
        args.reverse();
        (cur, args)
    }

    /// Number of S and K leaves.
    pub fn size(&self) -> usize {
        match self {
            Comb::S | Comb::K => 1,
            Comb::X | Comb::Var(_) => 0,
            Comb::App(p) => p.0.size() + p.1.size(),
        }
    }

    /// Total node count (leaves and applications).
    pub fn nodes(&self) -> usize {
        match self {
            Comb::App(p) => 1 + p.0.nodes() + p.1.nodes(),
            _ => 1,
        }
    }

    fn nodes_exceed(&self, limit: usize) -> bool {
        fn go(c: &Comb, budget: &mut usize) -> bool {
            if *budget == 0 {
                return true;
            }
            *budget -= 1;
            match c {
                Comb::App(p) => go(&p.0, budget) || go(&p.1, budget),
                _ => false,
            }
        }
        let mut budget = limit;
        go(self, &mut budget)
    }

    pub fn contains_x(&self) -> bool {
        match self {
            Comb::X => true,
            Comb::App(p) => p.0.contains_x() || p.1.contains_x(),
            _ => false,
        }
    }

    /// Built from variables and application only.
    pub fn is_pure(&self) -> bool {
        match self {
            Comb::Var(_) => true,
            Comb::App(p) => p.0.is_pure() && p.1.is_pure(),
            _ => false,
        }
    }

    pub fn has_redex(&self) -> bool {
        let (head, args) = self.unwind();
        match head {
            Comb::S if args.len() >= 3 => true,
            Comb::K if args.len() >= 2 => true,
            _ => args.iter().any(|a| a.has_redex()),
        }
    }

    /// Deletes every application whose argument is `X`; `None` for `X`
    /// itself.
    pub fn strip_x(&self) -> Option<Comb> {
        match self {
            Comb::X => None,
            Comb::App(p) => {
                let f = p.0.strip_x()?;
                Some(match p.1.strip_x() {
                    Some(a) => app(f, a),
                    None => f,
                })
            }
            other => Some(other.clone()),
        }
    }

    /// Replaces the leftmost `X` (pre-order) by `with`.
    pub fn replace_first_x(&self, with: &Comb) -> Option<Comb> {
        match self {
            Comb::X => Some(with.clone()),
            Comb::App(p) => {
                if let Some(f) = p.0.replace_first_x(with) {
                    Some(app(f, p.1.clone()))
                } else {
                    p.1.replace_first_x(with).map(|a| app(p.0.clone(), a))
                }
            }
            _ => None,
        }
    }
}

/// Contracts the leftmost-outermost redex.
pub fn lo_step(c: &Comb) -> Option<Comb> {
    let (head, args) = c.unwind();
    match head {
        Comb::S if args.len() >= 3 => {
            let (x, y, z) = (args[0].clone(), args[1].clone(), args[2].clone());
            let contracted = app(app(x, z.clone()), app(y, z));
            Some(apply_all(contracted, args[3..].iter().map(|&a| a.clone())))
        }
        Comb::K if args.len() >= 2 => Some(apply_all(
            args[0].clone(),
            args[2..].iter().map(|&a| a.clone()),
        )),
        _ => {
            for (i, a) in args.iter().enumerate() {
                if let Some(r) = lo_step(a) {
                    let rebuilt = args
                        .iter()
                        .enumerate()
                        .map(|(j, &b)| if j == i { r.clone() } else { b.clone() });
                    return Some(apply_all(head.clone(), rebuilt));
                }
            }
            None
        }
    }
}

/// Normal form under the leftmost-outermost strategy, or `None` when more
/// than `max_steps` steps are needed or a term exceeds `max_size` nodes.
pub fn normalize(c: &Comb, bounds: NormBounds) -> Option<Comb> {
    if c.nodes_exceed(bounds.max_size) {
        return None;
    }
    let mut cur = c.clone();
    let mut steps = 0;
    while let Some(next) = lo_step(&cur) {
        steps += 1;
        if steps > bounds.max_steps || next.nodes_exceed(bounds.max_size) {
            return None;
        }
        cur = next;
    }
    Some(cur)
}

/// `w v1 v2 v3`
pub fn apply_vars(w: &Comb) -> Comb {
    apply_all(w.clone(), (1..=3).map(Comb::Var))
}

impl fmt::Display for Comb {
    /// Minimal-parentheses applicative notation, e.g. `S (K S) K`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Comb::S => f.write_str("S"),
            Comb::K => f.write_str("K"),
            Comb::X => f.write_str("X"),
            Comb::Var(i) => write!(f, "v{i}"),
            Comb::App(p) => {
                write!(f, "{} ", p.0)?;
                if matches!(p.1, Comb::App(_)) {
                    write!(f, "({})", p.1)
                } else {
                    write!(f, "{}", p.1)
                }
            }
        }
    }
}

impl fmt::Debug for Comb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("combinator parse error at byte {pos}: {msg}")]
pub struct CombParseError {
    pub pos: usize,
    pub msg: String,
}

impl std::str::FromStr for Comb {
    type Err = CombParseError;

    /// Accepts `S`, `K`, `X`, `v<digit>`, parentheses and juxtaposition;
    /// spaces between single-letter atoms are optional (`S(KS)K`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = CombParser { src: s.as_bytes(), pos: 0 };
        let c = p.sequence()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected `)`"));
        }
        Ok(c)
    }
}

struct CombParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl CombParser<'_> {
    fn err(&self, msg: &str) -> CombParseError {
        CombParseError {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(u8::is_ascii_whitespace) {
            self.pos += 1;
        }
    }

    fn sequence(&mut self) -> Result<Comb, CombParseError> {
        let mut acc: Option<Comb> = None;
        loop {
            self.skip_ws();
            let atom = match self.src.get(self.pos) {
                None | Some(b')') => break,
                Some(b'(') => {
                    self.pos += 1;
                    let inner = self.sequence()?;
                    self.skip_ws();
                    if self.src.get(self.pos) != Some(&b')') {
                        return Err(self.err("expected `)`"));
                    }
                    self.pos += 1;
                    inner
                }
                Some(b'S') => {
                    self.pos += 1;
                    Comb::S
                }
                Some(b'K') => {
                    self.pos += 1;
                    Comb::K
                }
                Some(b'X') => {
                    self.pos += 1;
                    Comb::X
                }
                Some(b'v') => {
                    self.pos += 1;
                    let start = self.pos;
                    while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                        self.pos += 1;
                    }
                    let n: u8 = std::str::from_utf8(&self.src[start..self.pos])
                        .unwrap()
                        .parse()
                        .ok()
                        .filter(|&n| n >= 1)
                        .ok_or_else(|| self.err("expected variable index"))?;
                    Comb::Var(n)
                }
                Some(_) => return Err(self.err("unexpected character")),
            };
            acc = Some(match acc {
                None => atom,
                Some(f) => app(f, atom),
            });
        }
        acc.ok_or_else(|| self.err("empty combinator"))
    }
}
