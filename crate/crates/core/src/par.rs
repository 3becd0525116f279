//! Data-parallel job map used by the state sweep and the preprocessing stage.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] runs on the
//! current rayon pool. Without it, every map runs sequentially. Results are
//! always returned in input order, so callers never observe scheduling.

/// How a job map is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `true` when this build can actually run jobs on more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Runs `op` inside a dedicated pool of `jobs` worker threads.
///
/// `jobs == 0` uses the global pool. Without the `parallel` feature this just
/// calls `op`.
pub fn with_jobs<R, OP>(jobs: usize, op: OP) -> R
where
    R: Send,
    OP: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if jobs > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => return pool.install(op),
            Err(_) => return op(),
        }
    }
    let _ = jobs;
    op()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_both_modes() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map(&items, Execution::Sequential, |x| x * x);
        let par = with_jobs(4, || map(&items, Execution::Parallel, |x| x * x));
        assert_eq!(seq, par);
        assert_eq!(seq[999], 999 * 999);
    }
}
