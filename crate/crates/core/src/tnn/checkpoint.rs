//! Plain-text checkpoints.
//!
//! ```text
//! tnn-checkpoint v1 dim=<d>
//! op <name> <arity>            arity-0: one line of d numbers
//! op <name> 0 literal          no data
//! op <name> <arity>            arity>0: one layer block
//! head <name> <layers>         followed by that many layer blocks
//! ```
//!
//! A layer block is `layer <out> <in>`, then `out` weight rows of `in`
//! numbers, then one line of `out` biases. Numbers use Rust's shortest
//! round-trip formatting, so save/load is lossless.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use super::{Head, LayerShape, OpParams, TnnModel};
use crate::term::Signature;

const MAGIC: &str = "tnn-checkpoint";
const VERSION: &str = "v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("line {line}: unsupported checkpoint version `{found}`")]
    Version { line: usize, found: String },
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("unexpected end of checkpoint after line {line}")]
    Truncated { line: usize },
}

impl TnnModel {
    pub fn save(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION} dim={}\n", self.dim);
        for ((_, op), params) in self.sig.ops().zip(&self.ops) {
            match *params {
                OpParams::Literal => {
                    let _ = writeln!(out, "op {} 0 literal", op.name);
                }
                OpParams::Embedding { off } => {
                    let _ = writeln!(out, "op {} 0", op.name);
                    write_row(&mut out, &self.params[off..off + self.dim]);
                }
                OpParams::Net(shape) => {
                    let _ = writeln!(out, "op {} {}", op.name, op.arity);
                    self.write_layer(&mut out, shape);
                }
            }
        }
        for h in &self.heads {
            let _ = writeln!(out, "head {} {}", h.name, h.layers.len());
            for &s in &h.layers {
                self.write_layer(&mut out, s);
            }
        }
        out
    }

    fn write_layer(&self, out: &mut String, s: LayerShape) {
        let _ = writeln!(out, "layer {} {}", s.out, s.inp);
        for r in 0..s.out {
            let start = s.w_off + r * s.inp;
            write_row(out, &self.params[start..start + s.inp]);
        }
        write_row(out, &self.params[s.b_off..s.b_off + s.out]);
    }

    pub fn load(text: &str) -> Result<TnnModel, CheckpointError> {
        let mut r = Reader::new(text);
        let (line, header) = r.next_line()?;
        let mut words = header.split_whitespace();
        if words.next() != Some(MAGIC) {
            return Err(CheckpointError::Format {
                line,
                msg: "missing checkpoint header".into(),
            });
        }
        match words.next() {
            Some(VERSION) => {}
            other => {
                return Err(CheckpointError::Version {
                    line,
                    found: other.unwrap_or("").to_string(),
                })
            }
        }
        let dim: usize = words
            .next()
            .and_then(|w| w.strip_prefix("dim="))
            .and_then(|w| w.parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| CheckpointError::Format {
                line,
                msg: "expected dim=<positive integer>".into(),
            })?;

        let mut sig = Signature::new();
        let mut ops = Vec::new();
        let mut heads = Vec::new();
        let mut params = Vec::new();
        while let Some((line, text)) = r.peek_line() {
            let words: Vec<&str> = text.split_whitespace().collect();
            r.advance();
            match words.as_slice() {
                ["op", name, arity, rest @ ..] => {
                    let arity: usize = arity.parse().map_err(|_| CheckpointError::Format {
                        line,
                        msg: format!("bad arity `{arity}`"),
                    })?;
                    let literal = match rest {
                        [] => false,
                        ["literal"] if arity == 0 => true,
                        _ => {
                            return Err(CheckpointError::Format {
                                line,
                                msg: "unexpected tokens after arity".into(),
                            })
                        }
                    };
                    let added = if literal {
                        sig.add_literal(name)
                    } else {
                        sig.add(name, arity)
                    };
                    added.map_err(|e| CheckpointError::Format {
                        line,
                        msg: e.to_string(),
                    })?;
                    if literal {
                        ops.push(OpParams::Literal);
                    } else if arity == 0 {
                        let off = params.len();
                        r.read_row(dim, &mut params)?;
                        ops.push(OpParams::Embedding { off });
                    } else {
                        let s = r.read_layer(&mut params)?;
                        if s.inp != arity * dim || s.out != dim {
                            return Err(CheckpointError::Format {
                                line,
                                msg: format!("operator `{name}` layer shape does not match arity {arity}"),
                            });
                        }
                        ops.push(OpParams::Net(s));
                    }
                }
                ["head", name, n] => {
                    let n: usize = n.parse().map_err(|_| CheckpointError::Format {
                        line,
                        msg: format!("bad layer count `{n}`"),
                    })?;
                    let mut layers = Vec::with_capacity(n);
                    for _ in 0..n {
                        layers.push(r.read_layer(&mut params)?);
                    }
                    let chained = layers.first().is_some_and(|l| l.inp == dim)
                        && layers.windows(2).all(|w| w[0].out == w[1].inp);
                    if !chained {
                        return Err(CheckpointError::Format {
                            line,
                            msg: format!("head `{name}` layers do not chain from dim {dim}"),
                        });
                    }
                    heads.push(Head {
                        name: name.to_string(),
                        layers,
                    });
                }
                _ => {
                    return Err(CheckpointError::Format {
                        line,
                        msg: format!("unexpected line `{text}`"),
                    })
                }
            }
        }
        Ok(TnnModel {
            dim,
            sig: Arc::new(sig),
            ops,
            heads,
            params,
        })
    }
}

fn write_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:?}");
    }
    out.push('\n');
}

struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Reader { lines, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(0, |l| l.0)
    }

    fn peek_line(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    fn advance(&mut self) {
        self.pos += 1;
    }

    fn next_line(&mut self) -> Result<(usize, &'a str), CheckpointError> {
        let l = self.peek_line().ok_or(CheckpointError::Truncated {
            line: self.last_line(),
        })?;
        self.advance();
        Ok(l)
    }

    fn read_row(&mut self, len: usize, params: &mut Vec<f64>) -> Result<(), CheckpointError> {
        let (line, text) = self.next_line()?;
        let start = params.len();
        for w in text.split_whitespace() {
            let v: f64 = w.parse().map_err(|_| CheckpointError::Format {
                line,
                msg: format!("bad number `{w}`"),
            })?;
            params.push(v);
        }
        if params.len() - start != len {
            return Err(CheckpointError::Format {
                line,
                msg: format!("expected {len} numbers, found {}", params.len() - start),
            });
        }
        Ok(())
    }

    fn read_layer(&mut self, params: &mut Vec<f64>) -> Result<LayerShape, CheckpointError> {
        let (line, text) = self.next_line()?;
        let dims: Vec<usize> = match text.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["layer", o, i] => [o, i].iter().filter_map(|w| w.parse().ok()).collect(),
            _ => Vec::new(),
        };
        let [out, inp] = dims[..] else {
            return Err(CheckpointError::Format {
                line,
                msg: "expected `layer <out> <in>`".into(),
            });
        };
        let w_off = params.len();
        for _ in 0..out {
            self.read_row(inp, params)?;
        }
        let b_off = params.len();
        self.read_row(out, params)?;
        Ok(LayerShape {
            inp,
            out,
            w_off,
            b_off,
        })
    }
}
