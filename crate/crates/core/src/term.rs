//! Operator signatures and first-order terms.
//!
//! A [`Term`] is an operator-labelled ordered tree. Operators are identified
//! by an [`OpId`] index into a [`Signature`], so terms are cheap to hash and
//! compare, and rendering them back to text needs the signature.
//!
//! Besides ordinary operators a signature may declare *literal* operators:
//! arity-0 symbols whose instances carry a fixed integer vector (used as a
//! non-learnable embedding by the tree network). Their text form is
//! `name[v1,v2,...]`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OpId(pub u32);

impl OpId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operator {
    pub name: String,
    pub arity: usize,
    /// Literal operators have arity 0 and carry a value vector per instance.
    pub literal: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("operator `{0}` declared twice")]
    Duplicate(String),
    #[error("invalid operator name `{0}`")]
    InvalidName(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("parse error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown operator `{name}` at byte {pos}")]
    UnknownOperator { name: String, pos: usize },
    #[error("operator `{name}` expects {expected} arguments, found {found} (byte {pos})")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        pos: usize,
    },
}

/// A finite set of operators with unique names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    ops: Vec<Operator>,
    by_name: HashMap<String, OpId>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, arity: usize) -> Result<OpId, SignatureError> {
        self.insert(Operator {
            name: name.to_string(),
            arity,
            literal: false,
        })
    }

    pub fn add_literal(&mut self, name: &str) -> Result<OpId, SignatureError> {
        self.insert(Operator {
            name: name.to_string(),
            arity: 0,
            literal: true,
        })
    }

    fn insert(&mut self, op: Operator) -> Result<OpId, SignatureError> {
        if !valid_name(&op.name) {
            return Err(SignatureError::InvalidName(op.name));
        }
        if self.by_name.contains_key(&op.name) {
            return Err(SignatureError::Duplicate(op.name));
        }
        let id = OpId(self.ops.len() as u32);
        self.by_name.insert(op.name.clone(), id);
        self.ops.push(op);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn get(&self, id: OpId) -> Option<&Operator> {
        self.ops.get(id.index())
    }

    pub fn op(&self, id: OpId) -> &Operator {
        &self.ops[id.index()]
    }

    pub fn lookup(&self, name: &str) -> Option<OpId> {
        self.by_name.get(name).copied()
    }

    pub fn ops(&self) -> impl Iterator<Item = (OpId, &Operator)> {
        self.ops
            .iter()
            .enumerate()
            .map(|(i, op)| (OpId(i as u32), op))
    }

    /// Builds `name(args)`, panicking on unknown names or arity mismatch.
    /// Meant for encoders whose signature is fixed at construction.
    pub fn apply(&self, name: &str, args: Vec<Term>) -> Term {
        let id = self
            .lookup(name)
            .unwrap_or_else(|| panic!("operator `{name}` not in signature"));
        assert_eq!(self.op(id).arity, args.len(), "arity of `{name}`");
        Term::new(id, args)
    }

    pub fn leaf(&self, name: &str) -> Term {
        self.apply(name, Vec::new())
    }

    /// True iff every node's operator is declared here with matching arity
    /// and literal nodes are used exactly for literal operators.
    pub fn check_wf(&self, t: &Term) -> bool {
        match t {
            Term::App { op, args } => match self.get(*op) {
                Some(o) if !o.literal && o.arity == args.len() => {
                    args.iter().all(|a| self.check_wf(a))
                }
                _ => false,
            },
            Term::Lit { op, .. } => matches!(self.get(*op), Some(o) if o.literal),
        }
    }

    pub fn render(&self, t: &Term) -> String {
        let mut out = String::new();
        self.render_into(t, &mut out);
        out
    }

    fn render_into(&self, t: &Term, out: &mut String) {
        match t {
            Term::App { op, args } => {
                out.push_str(&self.op(*op).name);
                if !args.is_empty() {
                    out.push('(');
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            out.push(',');
                        }
                        self.render_into(a, out);
                    }
                    out.push(')');
                }
            }
            Term::Lit { op, values } => {
                out.push_str(&self.op(*op).name);
                out.push('[');
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{v}");
                }
                out.push(']');
            }
        }
    }

    pub fn parse(&self, text: &str) -> Result<Term, ParseError> {
        let mut p = TermParser {
            sig: self,
            src: text.as_bytes(),
            pos: 0,
        };
        p.skip_ws();
        let t = p.term()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.syntax("trailing input"));
        }
        Ok(t)
    }
}

/// A first-order term over some [`Signature`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    App { op: OpId, args: Vec<Term> },
    Lit { op: OpId, values: Arc<[i8]> },
}

impl Term {
    pub fn new(op: OpId, args: Vec<Term>) -> Self {
        Term::App { op, args }
    }

    pub fn literal(op: OpId, values: impl Into<Arc<[i8]>>) -> Self {
        Term::Lit {
            op,
            values: values.into(),
        }
    }

    pub fn op(&self) -> OpId {
        match self {
            Term::App { op, .. } | Term::Lit { op, .. } => *op,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::App { args, .. } => args,
            Term::Lit { .. } => &[],
        }
    }

    /// Total node count.
    pub fn size(&self) -> usize {
        1 + self.args().iter().map(Term::size).sum::<usize>()
    }

    pub fn subterms(&self) -> Vec<&Term> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            let t = out[i];
            out.extend(t.args());
            i += 1;
        }
        out
    }
}

struct TermParser<'a> {
    sig: &'a Signature,
    src: &'a [u8],
    pos: usize,
}

impl<'a> TermParser<'a> {
    fn syntax(&self, msg: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else if self.peek().is_none() {
            Err(self.syntax(&format!("expected `{}`, found end of input", b as char)))
        } else {
            Err(self.syntax(&format!("expected `{}`", b as char)))
        }
    }

    fn name(&mut self) -> Result<(&'a str, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_alphanumeric() || b == b'_') {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.peek().is_none() {
                self.syntax("expected operator name, found end of input")
            } else {
                self.syntax("expected operator name")
            });
        }
        // Names are ASCII by construction.
        let src: &'a [u8] = self.src;
        let name = std::str::from_utf8(&src[start..self.pos]).unwrap();
        Ok((name, start))
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let (name, start) = self.name()?;
        let id = self
            .sig
            .lookup(name)
            .ok_or_else(|| ParseError::UnknownOperator {
                name: name.to_string(),
                pos: start,
            })?;
        let op = self.sig.op(id);
        self.skip_ws();
        if op.literal {
            self.expect(b'[')?;
            let mut values = Vec::new();
            self.skip_ws();
            if self.peek() == Some(b']') {
                self.pos += 1;
            } else {
                loop {
                    values.push(self.int()?);
                    self.skip_ws();
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b']') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.syntax("expected `,` or `]`")),
                    }
                }
            }
            return Ok(Term::literal(id, values));
        }
        let mut args = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                args.push(self.term()?);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    None => return Err(self.syntax("unexpected end of input")),
                    _ => return Err(self.syntax("expected `,` or `)`")),
                }
            }
        }
        if args.len() != op.arity {
            return Err(ParseError::Arity {
                name: op.name.clone(),
                expected: op.arity,
                found: args.len(),
                pos: start,
            });
        }
        Ok(Term::new(id, args))
    }

    fn int(&mut self) -> Result<i8, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ParseError::Syntax {
                pos: start,
                msg: "expected integer".to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig1_sig() -> Signature {
        let mut sig = Signature::new();
        sig.add("f", 2).unwrap();
        sig.add("g", 1).unwrap();
        sig.add("a", 0).unwrap();
        sig.add("b", 0).unwrap();
        sig
    }

    fn fig1_term(sig: &Signature) -> Term {
        let a = sig.leaf("a");
        let b = sig.leaf("b");
        let fab = sig.apply("f", vec![a.clone(), b]);
        let ga = sig.apply("g", vec![a]);
        sig.apply("f", vec![fab, ga])
    }

    #[test]
    fn well_formedness() {
        let sig = fig1_sig();
        assert!(sig.check_wf(&sig.leaf("a")));
        assert!(sig.check_wf(&fig1_term(&sig)));

        let mut sig3 = Signature::new();
        let f = sig3.add("f", 3).unwrap();
        let a = sig3.add("a", 0).unwrap();
        let b = sig3.add("b", 0).unwrap();
        let bad = Term::new(f, vec![Term::new(a, vec![]), Term::new(b, vec![])]);
        assert!(!sig3.check_wf(&bad));
        assert!(!sig3.check_wf(&Term::new(OpId(17), vec![])));
    }

    #[test]
    fn sizes() {
        let sig = fig1_sig();
        assert_eq!(sig.leaf("a").size(), 1);
        assert_eq!(sig.apply("g", vec![sig.leaf("a")]).size(), 2);
        assert_eq!(fig1_term(&sig).size(), 6);
    }

    #[test]
    fn render_and_parse() {
        let sig = fig1_sig();
        let t = fig1_term(&sig);
        let text = sig.render(&t);
        assert_eq!(text, "f(f(a,b),g(a))");
        assert_eq!(sig.parse(&text).unwrap(), t);
        assert_eq!(sig.parse(" f( f(a, b) , g(a))").unwrap(), t);
    }

    #[test]
    fn arity_tagged_combinator() {
        let mut sig = Signature::new();
        for (n, a) in [("s0", 0), ("s1", 1), ("s2", 2), ("k0", 0), ("k1", 1)] {
            sig.add(n, a).unwrap();
        }
        let t = sig.parse("s2(k1(s0),k0)").unwrap();
        let expected = sig.apply(
            "s2",
            vec![sig.apply("k1", vec![sig.leaf("s0")]), sig.leaf("k0")],
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn parse_errors() {
        let sig = fig1_sig();
        assert!(matches!(
            sig.parse("f(a"),
            Err(ParseError::Syntax { pos: 3, .. })
        ));
        assert!(matches!(
            sig.parse("h(a)"),
            Err(ParseError::UnknownOperator { .. })
        ));
        assert!(matches!(sig.parse("f(a)"), Err(ParseError::Arity { .. })));
        assert!(matches!(sig.parse("a b"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn literals_round_trip() {
        let mut sig = fig1_sig();
        let set = sig.add_literal("setlit").unwrap();
        let t = sig.apply(
            "f",
            vec![sig.leaf("a"), Term::literal(set, vec![1i8, -1, -1, 1])],
        );
        let text = sig.render(&t);
        assert_eq!(text, "f(a,setlit[1,-1,-1,1])");
        assert_eq!(sig.parse(&text).unwrap(), t);
        assert!(sig.check_wf(&t));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut sig = fig1_sig();
        assert_eq!(
            sig.add("f", 1),
            Err(SignatureError::Duplicate("f".to_string()))
        );
        assert!(matches!(sig.add("f-g", 1), Err(SignatureError::InvalidName(_))));
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        // Operator ids follow fig1_sig: f/2, g/1, a/0, b/0.
        let leaf = prop_oneof![Just(Term::new(OpId(2), vec![])), Just(Term::new(OpId(3), vec![]))];
        leaf.prop_recursive(6, 64, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(x, y)| Term::new(OpId(0), vec![x, y])),
                inner.prop_map(|x| Term::new(OpId(1), vec![x])),
            ]
        })
    }

    proptest! {
        #[test]
        fn round_trip(t in arb_term()) {
            let sig = fig1_sig();
            prop_assert_eq!(sig.parse(&sig.render(&t)).unwrap(), t);
        }

        #[test]
        fn wf_closed_under_subterms(t in arb_term()) {
            let sig = fig1_sig();
            prop_assert!(sig.check_wf(&t));
            for s in t.subterms() {
                prop_assert!(sig.check_wf(s));
            }
        }

        #[test]
        fn size_is_recursive(t in arb_term()) {
            let expected = 1 + t.args().iter().map(Term::size).sum::<usize>();
            prop_assert_eq!(t.size(), expected);
        }
    }
}
