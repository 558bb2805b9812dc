//! Execution policy for the data-parallel loops.
//!
//! Every parallel entry point preserves input order in its output, so a
//! result never depends on the worker count or on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a batch loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Sequential,
    /// Run on a dedicated pool with this many threads; 0 means the global
    /// rayon pool. Without the `parallel` feature this is sequential.
    Parallel(usize),
}

impl Exec {
    /// `workers <= 1` is sequential.
    pub fn from_workers(workers: usize) -> Self {
        if workers <= 1 {
            Exec::Sequential
        } else {
            Exec::Parallel(workers)
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && matches!(self, Exec::Parallel(_))
    }

    /// Order-preserving map.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel(threads) => self.install(threads, || items.par_iter().map(&f).collect()),
            _ => items.iter().map(f).collect(),
        }
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<U, F>(self, n: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel(threads) => {
                self.install(threads, || (0..n).into_par_iter().map(&f).collect())
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Fold chunks of `items` with `fold` and combine the partial results with
    /// `merge`. `merge` must be associative with `identity` as its unit.
    pub fn fold_reduce<T, A, Id, F, M>(self, items: &[T], identity: Id, fold: F, merge: M) -> A
    where
        T: Sync,
        A: Send,
        Id: Fn() -> A + Sync + Send,
        F: Fn(A, &T) -> A + Sync + Send,
        M: Fn(A, A) -> A + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel(threads) => self.install(threads, || {
                items
                    .par_iter()
                    .fold(&identity, &fold)
                    .reduce(&identity, &merge)
            }),
            _ => items.iter().fold(identity(), fold),
        }
    }

    #[cfg(feature = "parallel")]
    fn install<R: Send>(self, threads: usize, op: impl FnOnce() -> R + Send) -> R {
        if threads == 0 {
            return op();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(op),
            // Pool creation only fails on resource exhaustion; the global pool still works.
            Err(_) => op(),
        }
    }
}
