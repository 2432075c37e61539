//! Self-learning term synthesis.
//!
//! A tree neural network ([`tnn`]) guides a PUCT Monte Carlo tree search
//! ([`mcts`]) over two synthesis tasks: SK-combinators that behave like a
//! given head normal form ([`combin`]) and polynomials over Z/16Z whose
//! Diophantine set is a given subset of `0..16` ([`dioph`]). The generation
//! loop in [`rl`] alternates exploration and retraining; [`eval`] runs the
//! final single-search evaluation against uniform and heuristic baselines.

pub mod combin;
pub mod dioph;
pub mod eval;
pub mod mcts;
pub mod par;
pub mod rl;
pub mod task;
pub mod term;
pub mod tnn;

pub use par::Parallelism;
pub use task::{Task, TaskKind};
