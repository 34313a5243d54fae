//! Batch-map helpers for the data-parallel stages (scenario runs, per-device
//! model training). With the `parallel` feature the work fans out over a
//! rayon pool; without it the same API runs sequentially. Output order always
//! matches input order.

/// Map a function over items, in parallel when the feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_batch<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_batch<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Always-sequential variant, kept for baseline comparisons in benches.
pub fn map_batch_seq<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_and_preserve_order() {
        let items: Vec<u64> = (0..500).collect();
        let f = |x: u64| x * x + 1;
        assert_eq!(map_batch(items.clone(), f), map_batch_seq(items, f));
    }
}
