//! Tiny execution-policy shim: data-parallel map with a sequential fallback.
//!
//! The parallel path needs `rayon` (feature `parallel`, on by default). Both
//! paths produce results in input order, so callers stay deterministic.

/// How independent work items (detection restarts, agent solves, sweep cells)
/// are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for ExecMode {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        ExecMode::Parallel
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        ExecMode::Sequential
    }
}

/// Maps `f` over `0..n`, in order, under the given execution mode.
pub fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let out = map_indexed(ExecMode::Sequential, 5, |i| i * i);
        assert_eq!(out, vec![0, 1, 4, 9, 16]);
        #[cfg(feature = "parallel")]
        {
            let out = map_indexed(ExecMode::Parallel, 5, |i| i * i);
            assert_eq!(out, vec![0, 1, 4, 9, 16]);
        }
    }
}
