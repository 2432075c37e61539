//! Diophantine-set synthesis over Z/16Z.
//!
//! A problem is a subset `S` of `0..16`; a solution is a polynomial `p` in
//! `k, x, y, z` with `D(p) = S`, where
//! `D(p) = { k | exists x y z. p(k, x, y, z) = 0 mod 16 }`.
//! Polynomials are built one monomial at a time: a coefficient move, then
//! one exponent move for each of the four variables.

mod problems;
mod task;

use std::fmt;
use std::sync::OnceLock;

use dashmap::DashMap;
use thiserror::Error;

pub use problems::{gen_problems, parse_problems, write_problems, DiophGenConfig, DiophProblem};
pub use task::{
    dioph_signature, encode_state, heuristic_value, DiophMove, DiophSpec, DiophState, DiophTask, Pending,
    HeuristicOracle, MOVE_COUNT,
};

pub const MAX_MONOMIALS: usize = 5;
pub const MAX_EXP: u8 = 4;
pub const MODULUS: u32 = 16;
/// The full set `0..16`.
pub const ALL: u16 = u16::MAX;

/// `coef * k^e[0] * x^e[1] * y^e[2] * z^e[3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub coef: u8,
    pub exps: [u8; 4],
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("coefficient {0} outside 1..=15")]
    Coef(i64),
    #[error("exponent {0} outside 0..=4")]
    Exp(i64),
    #[error("monomial lists have 1 to 5 entries, found {0}")]
    Length(usize),
    #[error("more than {MAX_MONOMIALS} monomials")]
    TooMany,
    #[error("monomials are not in strictly descending exponent order")]
    Order,
    #[error("malformed polynomial: {0}")]
    Syntax(String),
}

impl Monomial {
    pub fn new(coef: u8, exps: [u8; 4]) -> Result<Self, PolyError> {
        if !(1..MODULUS as u8).contains(&coef) {
            return Err(PolyError::Coef(coef as i64));
        }
        if let Some(&e) = exps.iter().find(|&&e| e > MAX_EXP) {
            return Err(PolyError::Exp(e as i64));
        }
        Ok(Monomial { coef, exps })
    }

    /// `[coef, e1, ..]` with trailing zero exponents dropped.
    pub fn to_list(&self) -> Vec<u8> {
        let used = self.exps.iter().rposition(|&e| e != 0).map_or(0, |i| i + 1);
        std::iter::once(self.coef).chain(self.exps[..used].iter().copied()).collect()
    }

    pub fn from_list(list: &[i64]) -> Result<Self, PolyError> {
        if list.is_empty() || list.len() > 5 {
            return Err(PolyError::Length(list.len()));
        }
        let coef = list[0];
        if !(1..MODULUS as i64).contains(&coef) {
            return Err(PolyError::Coef(coef));
        }
        let mut exps = [0u8; 4];
        for (slot, &e) in exps.iter_mut().zip(&list[1..]) {
            if !(0..=MAX_EXP as i64).contains(&e) {
                return Err(PolyError::Exp(e));
            }
            *slot = e as u8;
        }
        Ok(Monomial { coef: coef as u8, exps })
    }

    /// Length of the list form.
    pub fn size(&self) -> usize {
        self.to_list().len()
    }

    pub fn eval(&self, k: u32, x: u32, y: u32, z: u32) -> u32 {
        let mut acc = self.coef as u32;
        for (v, &e) in [k, x, y, z].iter().zip(&self.exps) {
            acc = acc * pow16(*v, e) % MODULUS;
        }
        acc
    }
}

/// `b^e mod 16`, with `0^0 = 1`.
pub fn pow16(b: u32, e: u8) -> u32 {
    (0..e).fold(1, |acc, _| acc * (b % MODULUS) % MODULUS)
}

/// A normalised polynomial: at most five monomials with strictly
/// descending exponent vectors.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    monos: Vec<Monomial>,
}

impl Poly {
    pub fn empty() -> Self {
        Poly::default()
    }

    /// Accepts monomials already in normal form.
    pub fn new(monos: Vec<Monomial>) -> Result<Self, PolyError> {
        if monos.len() > MAX_MONOMIALS {
            return Err(PolyError::TooMany);
        }
        if monos.windows(2).any(|w| w[0].exps <= w[1].exps) {
            return Err(PolyError::Order);
        }
        Ok(Poly { monos })
    }

    /// Merges monomials with equal exponents (coefficients add mod 16),
    /// drops zero coefficients and sorts. Fails only when more than five
    /// monomials remain.
    pub fn canonical(monos: impl IntoIterator<Item = Monomial>) -> Result<Self, PolyError> {
        let mut sums: Vec<([u8; 4], u32)> = Vec::new();
        for m in monos {
            match sums.iter_mut().find(|(e, _)| *e == m.exps) {
                Some((_, c)) => *c = (*c + m.coef as u32) % MODULUS,
                None => sums.push((m.exps, m.coef as u32)),
            }
        }
        let mut out: Vec<Monomial> = sums
            .into_iter()
            .filter(|&(_, c)| c != 0)
            .map(|(exps, c)| Monomial { coef: c as u8, exps })
            .collect();
        out.sort_by_key(|m| std::cmp::Reverse(m.exps));
        Poly::new(out)
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monos
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    /// Sum of the monomial list lengths.
    pub fn size(&self) -> usize {
        self.monos.iter().map(Monomial::size).sum()
    }

    pub fn eval(&self, k: u32, x: u32, y: u32, z: u32) -> u32 {
        eval_poly(&self.monos, k, x, y, z)
    }

    pub fn to_lists(&self) -> Vec<Vec<u8>> {
        self.monos.iter().map(Monomial::to_list).collect()
    }
}

/// Sum of monomials mod 16; the empty sum is 0.
pub fn eval_poly(monos: &[Monomial], k: u32, x: u32, y: u32, z: u32) -> u32 {
    monos.iter().fold(0, |acc, m| (acc + m.eval(k, x, y, z)) % MODULUS)
}

impl fmt::Display for Poly {
    /// Nested list form, e.g. `[[1,2,3],[2,0,0,4]]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, m) in self.monos.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str("[")?;
            for (j, v) in m.to_list().iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{v}")?;
            }
            f.write_str("]")?;
        }
        f.write_str("]")
    }
}

/// Parses the nested list form into raw monomials, without requiring
/// normal form.
pub fn parse_monomials(s: &str) -> Result<Vec<Monomial>, PolyError> {
    let lists: Vec<Vec<i64>> = serde_json::from_str(s).map_err(|e| PolyError::Syntax(e.to_string()))?;
    lists.iter().map(|l| Monomial::from_list(l)).collect()
}

impl std::str::FromStr for Poly {
    type Err = PolyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Poly::new(parse_monomials(s)?)
    }
}

/// `D(p)` as a bit mask (bit `k` set iff `k` is in the set), by checking
/// every `(k, x, y, z)`.
pub fn dioph_set(monos: &[Monomial]) -> u16 {
    let mut set = 0u16;
    for k in 0..MODULUS {
        'k: for x in 0..MODULUS {
            for y in 0..MODULUS {
                for z in 0..MODULUS {
                    if eval_poly(monos, k, x, y, z) == 0 {
                        set |= 1 << k;
                        break 'k;
                    }
                }
            }
        }
    }
    set
}

/// `x^a * y^b * z^c mod 16` for every exponent triple, indexed by
/// `25a + 5b + c` and then `256x + 16y + z`.
fn xyz_table() -> &'static [[u8; 4096]] {
    static TABLE: OnceLock<Vec<[u8; 4096]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![[0u8; 4096]; 125];
        for (idx, row) in t.iter_mut().enumerate() {
            let (a, b, c) = ((idx / 25) as u8, (idx / 5 % 5) as u8, (idx % 5) as u8);
            for (xyz, v) in row.iter_mut().enumerate() {
                let (x, y, z) = ((xyz >> 8) as u32, (xyz >> 4 & 15) as u32, (xyz & 15) as u32);
                *v = (pow16(x, a) * pow16(y, b) % MODULUS * pow16(z, c) % MODULUS) as u8;
            }
        }
        t
    })
}

/// Same set as [`dioph_set`], from precomputed power tables.
pub fn dioph_set_fast(monos: &[Monomial]) -> u16 {
    let table = xyz_table();
    let rows: Vec<&[u8; 4096]> = monos
        .iter()
        .map(|m| &table[m.exps[1] as usize * 25 + m.exps[2] as usize * 5 + m.exps[3] as usize])
        .collect();
    let mut set = 0u16;
    let mut ck = vec![0u32; monos.len()];
    for k in 0..MODULUS {
        for (c, m) in ck.iter_mut().zip(monos) {
            *c = m.coef as u32 * pow16(k, m.exps[0]) % MODULUS;
        }
        if ck.iter().all(|&c| c == 0) {
            set |= 1 << k;
            continue;
        }
        for xyz in 0..4096 {
            let s: u32 = ck.iter().zip(&rows).map(|(&c, r)| c * r[xyz] as u32).sum();
            if s.is_multiple_of(MODULUS) {
                set |= 1 << k;
                break;
            }
        }
    }
    set
}

const CACHE_LIMIT: usize = 1 << 20;

/// [`dioph_set_fast`] memoised in a process-wide concurrent map.
pub fn dioph_set_cached(monos: &[Monomial]) -> u16 {
    static CACHE: OnceLock<DashMap<Vec<Monomial>, u16>> = OnceLock::new();
    let cache = CACHE.get_or_init(DashMap::new);
    if let Some(s) = cache.get(monos) {
        return *s;
    }
    let s = dioph_set_fast(monos);
    if cache.len() >= CACHE_LIMIT {
        cache.clear();
    }
    cache.insert(monos.to_vec(), s);
    s
}

/// Sorted comma-separated members, e.g. `0,2,4`; empty for the empty set.
pub fn set_to_string(set: u16) -> String {
    (0..16)
        .filter(|k| set >> k & 1 == 1)
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_set(s: &str) -> Result<u16, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(0);
    }
    let mut set = 0u16;
    for part in s.split(',') {
        let k: u32 = part
            .trim()
            .parse()
            .map_err(|_| format!("bad set member `{part}`"))?;
        if k >= MODULUS {
            return Err(format!("set member {k} outside 0..16"));
        }
        set |= 1 << k;
    }
    Ok(set)
}

/// Independent check: the brute-force set of `p` equals `target`.
pub fn verify_witness(p: &[Monomial], target: u16) -> bool {
    dioph_set(p) == target
}
