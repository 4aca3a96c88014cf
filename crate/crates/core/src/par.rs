//! Data-parallel helpers. Without the `parallel` feature everything runs on
//! the calling thread and [`Parallelism::Parallel`] behaves like
//! [`Parallelism::Sequential`].

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Maps `f` over `items`, keeping input order.
pub fn map<T, U, F>(mode: Parallelism, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items.into_par_iter().map(f).collect();
    }
    let _ = mode;
    items.into_iter().map(f).collect()
}

/// Folds `0..n` in chunks and merges the partial results.
pub fn fold_range<A, F, M>(mode: Parallelism, n: u64, init: A, step: F, merge: M) -> A
where
    A: Clone + Send + Sync,
    F: Fn(A, u64) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .fold(|| init.clone(), &step)
            .reduce(|| init.clone(), &merge);
    }
    let _ = (mode, &merge);
    (0..n).fold(init, step)
}
