//! Data-parallel map helpers for grid scans and batch sweeps.
//!
//! With the `parallel` feature (default) `par_map` fans out over rayon;
//! without it, it degrades to a plain sequential map. Output order always
//! matches input order, so results are identical either way.

#[cfg(feature = "parallel")]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Sequential map, kept for benchmarking against `par_map`.
pub fn seq_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Build the global rayon pool with a thread cap, if the feature is on.
/// Returns whether a cap was applied.
#[cfg(feature = "parallel")]
pub fn limit_threads(n: usize) -> bool {
    if n == 0 {
        return false;
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .is_ok()
}

#[cfg(not(feature = "parallel"))]
pub fn limit_threads(_n: usize) -> bool {
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let out = par_map(&items, |x| x * x);
        let expect = seq_map(&items, |x| x * x);
        assert_eq!(out, expect);
    }
}
