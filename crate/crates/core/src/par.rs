//! Data-parallel helpers.
//!
//! With the `parallel` feature the maps below run on the rayon global pool;
//! without it they are plain sequential iterators. Every helper returns its
//! results in index order, so callers that reduce afterwards get the same
//! floating-point sums regardless of the execution mode.
//!
//! [`set_sequential`] forces the sequential path at runtime even when the
//! feature is compiled in. Benches use it to compare both paths in one binary.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force (or stop forcing) sequential execution process-wide.
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

/// True when maps will actually fan out to worker threads.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Indices `i` in `0..n` for which `pred(i)` holds, ascending.
pub fn filter_range<F>(n: usize, pred: F) -> Vec<usize>
where
    F: Fn(usize) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().filter(|&i| pred(i)).collect();
        }
    }
    (0..n).filter(|&i| pred(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_preserve_order() {
        let v = map_range(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
        let s: Vec<u32> = (0..100).collect();
        let w = map_slice(&s, |x| x + 1);
        assert_eq!(w[99], 100);
        let f = filter_range(50, |i| i % 7 == 0);
        assert_eq!(f, vec![0, 7, 14, 21, 28, 35, 42, 49]);
    }
}
