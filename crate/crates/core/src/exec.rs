//! Chunked execution shared by every Monte Carlo routine.
//!
//! Work is always split into the same chunks regardless of backend, each
//! chunk draws from its own ChaCha substream keyed by `(seed, chunk)`, and
//! partial results come back in chunk order. Reductions over the returned
//! vector are therefore bit-identical between the rayon and sequential
//! backends.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples per Monte Carlo chunk.
pub(crate) const CHUNK: u64 = 1 << 16;

pub(crate) fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Splits `total` items into `(chunk_index, len)` pieces of at most [`CHUNK`].
pub(crate) fn chunks(total: u64) -> impl Iterator<Item = (u64, u64)> {
    let n = total.div_ceil(CHUNK);
    (0..n).map(move |c| (c, CHUNK.min(total - c * CHUNK)))
}

#[cfg(feature = "parallel")]
pub(crate) fn map_ordered<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_ordered<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    F: Fn(I) -> T,
{
    items.into_iter().map(f).collect()
}

/// Runs `f(chunk_index, len, rng)` over every chunk of `total` items.
pub(crate) fn map_chunks<T, F>(total: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64, &mut ChaCha8Rng) -> T + Sync + Send,
{
    let work: Vec<(u64, u64)> = chunks(total).collect();
    map_ordered(work, |(c, len)| {
        let mut rng = chunk_rng(seed, c);
        f(c, len, &mut rng)
    })
}

/// Runs `f(chunk_index, rng)` over full chunks `range`, in order.
pub(crate) fn map_chunk_range<T, F>(range: std::ops::Range<u64>, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync + Send,
{
    map_ordered(range.collect(), |c| {
        let mut rng = chunk_rng(seed, c);
        f(c, &mut rng)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_total() {
        let total = 3 * CHUNK + 17;
        let v: Vec<_> = chunks(total).collect();
        assert_eq!(v.len(), 4);
        assert_eq!(v.iter().map(|c| c.1).sum::<u64>(), total);
        assert_eq!(v[3], (3, 17));
    }

    #[test]
    fn substreams_differ() {
        use rand::Rng;
        let a: u64 = chunk_rng(7, 0).gen();
        let b: u64 = chunk_rng(7, 1).gen();
        let a2: u64 = chunk_rng(7, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}
