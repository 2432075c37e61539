//! Counting and exact uniform sampling of normal-form combinators by size.
//!
//! A normal form of size `n` is one of `S`, `K` (n = 1), `S a`, `K a`
//! (|a| = n - 1) or `S a b` (|a| + |b| = n - 1), so
//! `N(1) = 2` and `N(n) = 2 N(n-1) + sum_{i+j=n-1} N(i) N(j)`.

use num_bigint::BigUint;
use rand::Rng;

use super::{app, Comb};

/// Number of normal-form SK-combinators with `n` leaves.
pub fn count_nf(n: usize) -> BigUint {
    assert!(n >= 1, "sizes start at 1");
    let mut counts: Vec<BigUint> = vec![BigUint::from(0u32), BigUint::from(2u32)];
    for m in 2..=n {
        let mut c = &counts[m - 1] * 2u32;
        for i in 1..m - 1 {
            c += &counts[i] * &counts[m - 1 - i];
        }
        counts.push(c);
    }
    counts.swap_remove(n)
}

/// Counts up to `n` as `u128`; exact while `N(n)` fits (n <= 50).
fn small_counts(n: usize) -> Vec<u128> {
    assert!(n <= 50, "uniform sampling supports sizes up to 50");
    let mut counts = vec![0u128, 2];
    for m in 2..=n {
        let mut c = 2 * counts[m - 1];
        for i in 1..m - 1 {
            c += counts[i] * counts[m - 1 - i];
        }
        counts.push(c);
    }
    counts
}

/// A normal form of size `n` drawn uniformly at random, built top-down by
/// choosing the head shape and argument sizes with probability
/// proportional to the number of completions.
pub fn random_nf<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Comb {
    assert!(n >= 1, "sizes start at 1");
    let counts = small_counts(n);
    draw(n, &counts, rng)
}

fn draw<R: Rng + ?Sized>(n: usize, counts: &[u128], rng: &mut R) -> Comb {
    if n == 1 {
        return if rng.random_bool(0.5) { Comb::S } else { Comb::K };
    }
    let mut r = rng.random_range(0..counts[n]);
    // S a, K a
    for head in [Comb::S, Comb::K] {
        if r < counts[n - 1] {
            return app(head, draw(n - 1, counts, rng));
        }
        r -= counts[n - 1];
    }
    // S a b
    for i in 1..n - 1 {
        let w = counts[i] * counts[n - 1 - i];
        if r < w {
            let a = draw(i, counts, rng);
            let b = draw(n - 1 - i, counts, rng);
            return app(app(Comb::S, a), b);
        }
        r -= w;
    }
    unreachable!("weights sum to N(n)")
}
