//! Execution layer: data-parallel map with a sequential fallback.
//!
//! All embarrassingly parallel work in this crate (per-client local training,
//! pairwise distance rows, per-coordinate trimmed means, Monte-Carlo batches)
//! goes through [`map_range`]. With the `parallel` feature (default) it runs
//! on the rayon global pool; without it, it is a plain sequential loop.
//! [`map_range_seq`] is always sequential and exists so benchmarks can compare
//! the two paths within one build.
//!
//! Results are collected in index order, so the parallel and sequential paths
//! produce identical output for pure `f`.

/// Applies `f` to every index in `0..n` and collects the results in order,
/// in parallel when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Applies `f` to every index in `0..n` and collects the results in order
/// (sequential build).
#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    map_range_seq(n, f)
}

/// Sequential version of [`map_range`], available in every build.
pub fn map_range_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let par = map_range(100, |i| i * i);
        let seq = map_range_seq(100, |i| i * i);
        assert_eq!(par, seq);
    }
}
