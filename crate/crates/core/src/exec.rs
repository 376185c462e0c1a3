//! Execution strategy for independent work items.
//!
//! With the `parallel` feature the work is spread over a rayon pool; without it
//! every strategy degrades to a plain sequential loop. Results always come back
//! in input order, so output never depends on scheduling.

/// How a batch of independent evaluations is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// True when the crate was built with the rayon backend.
pub fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// Maps `f` over `items`, preserving order.
pub fn map_indexed<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().enumerate().map(|(k, x)| f(k, x)).collect()
        }
        _ => items.iter().enumerate().map(|(k, x)| f(k, x)).collect(),
    }
}

/// Fallible variant of [`map_indexed`]; the first error in input order wins.
pub fn try_map_indexed<T, R, E, F>(exec: Execution, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(usize, &T) -> Result<R, E> + Sync + Send,
{
    map_indexed(exec, items, f).into_iter().collect()
}

/// Runs `f` with at most `threads` workers. `None` keeps the default pool.
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
                return pool.install(f);
            }
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
