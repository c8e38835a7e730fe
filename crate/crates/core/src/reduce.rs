//! Deterministic reductions.
//!
//! Every parallel loop in this crate is organized as a map over a fixed
//! partition of the index space followed by an in-order combine, so results
//! are bit-identical for any worker count (including the sequential build
//! without the `parallel` feature). Scalar sums use pairwise (cascade)
//! summation over the same fixed tree regardless of threading.

/// Fixed chunk length for scalar reductions. Part of the numerical contract:
/// changing it changes summation order and therefore low-order bits.
pub const SUM_CHUNK: usize = 1024;

/// Pairwise sum of a slice with a fixed recursion tree.
pub fn pairwise_sum(data: &[f64]) -> f64 {
    if data.len() <= 32 {
        let mut acc = 0.0;
        for &x in data {
            acc += x;
        }
        acc
    } else {
        let mid = data.len() / 2;
        pairwise_sum(&data[..mid]) + pairwise_sum(&data[mid..])
    }
}

/// Sum of `f(i)` for `i in 0..n` over the fixed chunk partition; chunk
/// partials are computed (possibly in parallel) and combined pairwise in
/// chunk order.
pub fn indexed_sum(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    let n_chunks = n.div_ceil(SUM_CHUNK).max(1);
    let partial = |c: usize| {
        let lo = c * SUM_CHUNK;
        let hi = ((c + 1) * SUM_CHUNK).min(n);
        let vals: Vec<f64> = (lo..hi).map(&f).collect();
        pairwise_sum(&vals)
    };
    let partials: Vec<f64> = map_chunks(n_chunks, partial);
    pairwise_sum(&partials)
}

/// Evaluates `f(c)` for `c in 0..n_chunks`, in parallel when available,
/// returning results in chunk order.
pub fn map_chunks<T: Send>(n_chunks: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_chunks).map(f).collect()
    }
}

/// Runs `fill(c, &mut buf)` for each chunk into a private zeroed buffer of
/// length `len`, then merges the buffers into `out` in ascending chunk
/// order. `out` must have length `len`.
pub fn accumulate_chunked(
    len: usize,
    n_chunks: usize,
    out: &mut [f64],
    fill: impl Fn(usize, &mut [f64]) + Sync + Send,
) {
    assert_eq!(out.len(), len);
    let bufs: Vec<Vec<f64>> = map_chunks(n_chunks, |c| {
        let mut buf = vec![0.0; len];
        fill(c, &mut buf);
        buf
    });
    for buf in bufs {
        for (o, b) in out.iter_mut().zip(&buf) {
            *o += *b;
        }
    }
}

/// Applies `f` to disjoint equal-stride blocks of `data` (block `i` covers
/// `i*stride..(i+1)*stride`), in parallel when available. Each block is
/// written independently, so the result does not depend on scheduling.
pub fn for_each_block(data: &mut [f64], stride: usize, f: impl Fn(usize, &mut [f64]) + Sync + Send) {
    assert_eq!(data.len() % stride, 0);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(stride).enumerate().for_each(|(i, b)| f(i, b));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(stride).enumerate().for_each(|(i, b)| f(i, b));
    }
}

/// Runs `job` inside a worker pool of the requested size. With the
/// `parallel` feature disabled (or `workers <= 1` semantics aside), the job
/// runs on the current thread; results are identical either way.
pub fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .expect("failed to build worker pool");
        pool.install(job)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        job()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_benign_data() {
        let data: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = data.iter().sum();
        assert!((pairwise_sum(&data) - naive).abs() < 1e-9);
    }

    #[test]
    fn indexed_sum_is_chunk_stable() {
        // same values, different closure shapes -> identical bits
        let v: Vec<f64> = (0..5000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let a = indexed_sum(v.len(), |i| v[i]);
        let b = indexed_sum(v.len(), |i| v[i] * 1.0);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn accumulate_chunked_merges_in_order() {
        let mut out = vec![0.0; 4];
        accumulate_chunked(4, 7, &mut out, |c, buf| {
            buf[c % 4] += c as f64;
        });
        assert_eq!(out, vec![4.0 + 0.0, 1.0 + 5.0, 2.0 + 6.0, 3.0]);
    }
}
