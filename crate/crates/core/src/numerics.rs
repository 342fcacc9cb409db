//! Summation helpers.
//!
//! All reductions go through fixed-size blocks so the result does not depend on
//! the rayon thread count.

use rayon::prelude::*;

const LEAF: usize = 64;
const BLOCK: usize = 1 << 15;

fn pairwise<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
    let n = hi - lo;
    if n <= LEAF {
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    } else {
        let mid = lo + n / 2;
        pairwise(lo, mid, f) + pairwise(mid, hi, f)
    }
}

/// Pairwise sum of `f(0) + ... + f(len - 1)`.
pub fn pairwise_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if len <= BLOCK {
        return pairwise(0, len, &f);
    }
    let blocks = len.div_ceil(BLOCK);
    let partial: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| pairwise(b * BLOCK, ((b + 1) * BLOCK).min(len), &f))
        .collect();
    pairwise(0, partial.len(), &|i| partial[i])
}

/// Mean of `f(i)` over `0..len`.
pub fn mean<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    pairwise_sum(len, f) / len as f64
}
