//! Data-parallel building blocks with a sequential fallback.
//!
//! Every reduction here is deterministic and independent of the thread count:
//! sums are accumulated over fixed-size blocks in block order, maxima use
//! `f64::max` which is associative and commutative on finite inputs. The
//! sequential variants produce bit-identical results and back the crate when
//! the `parallel` feature is disabled; they are also what the benches compare
//! against.

/// Block length for deterministic sums. Fixed so the reduction tree does not
/// depend on the number of worker threads.
pub const SUM_BLOCK: usize = 1024;

pub fn fill_with_seq<T, F>(out: &mut [T], f: F)
where
    F: Fn(usize) -> T,
{
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

pub fn sum_indexed_seq<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64,
{
    let mut total = 0.0;
    let mut lo = 0;
    while lo < n {
        let hi = (lo + SUM_BLOCK).min(n);
        let mut block = 0.0;
        for i in lo..hi {
            block += f(i);
        }
        total += block;
        lo = hi;
    }
    total
}

pub fn max_indexed_seq<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64,
{
    let mut m = f64::NEG_INFINITY;
    for i in 0..n {
        m = m.max(f(i));
    }
    m
}

#[cfg(feature = "parallel")]
mod parallel {
    use rayon::prelude::*;

    pub fn fill_with<T, F>(out: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, slot)| *slot = f(i));
    }

    /// Deterministic parallel sum: per-block partials in block order, folded
    /// sequentially. Bitwise equal to `sum_indexed_seq`.
    pub fn sum_indexed<F>(n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let nblocks = n.div_ceil(super::SUM_BLOCK);
        let partials: Vec<f64> = (0..nblocks)
            .into_par_iter()
            .map(|b| {
                let lo = b * super::SUM_BLOCK;
                let hi = (lo + super::SUM_BLOCK).min(n);
                let mut block = 0.0;
                for i in lo..hi {
                    block += f(i);
                }
                block
            })
            .collect();
        partials.into_iter().sum()
    }

    pub fn max_indexed<F>(n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        (0..n)
            .into_par_iter()
            .map(f)
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(feature = "parallel")]
pub use parallel::{fill_with, max_indexed, sum_indexed};

#[cfg(not(feature = "parallel"))]
pub use self::{fill_with_seq as fill_with, max_indexed_seq as max_indexed, sum_indexed_seq as sum_indexed};
