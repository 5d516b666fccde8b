//! Execution-mode plumbing shared by the ensemble and hierarchy solvers.
//!
//! Everything here is written so that results are bitwise identical across
//! `RunMode::Sequential` and `RunMode::Parallel` and across thread counts:
//!
//! * work is assigned to pre-allocated slots indexed by a deterministic
//!   integer (trajectory index, hierarchy node index), never to "whichever
//!   worker gets there first";
//! * floating-point reductions always use the same fixed binary tree over
//!   those indices, so the association order of every `+` is identical no
//!   matter how the leaves were scheduled.
//!
//! The `parallel` cargo feature gates the rayon dependency. With the
//! feature disabled, `RunMode::Parallel` still exists but degrades to
//! sequential execution, so downstream code does not need `cfg` switches.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How slot-parallel work is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Single-threaded, in slot order.
    Sequential,
    /// Rayon work-stealing over slots (needs the `parallel` feature;
    /// otherwise behaves exactly like `Sequential`).
    Parallel,
}

impl Default for RunMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            RunMode::Parallel
        } else {
            RunMode::Sequential
        }
    }
}

/// Builds `n` values by evaluating `f` at each slot index.
///
/// Slot `i` of the result is always `f(i)`; scheduling cannot reorder
/// outputs.
pub fn fill_slots<T, F>(mode: RunMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        RunMode::Sequential => (0..n).map(f).collect(),
        RunMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n).map(f).collect()
            }
        }
    }
}

/// Applies `f` to every slot of `slots` in place.
pub fn for_each_slot<T, F>(mode: RunMode, slots: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    match mode {
        RunMode::Sequential => {
            for (i, s) in slots.iter_mut().enumerate() {
                f(i, s);
            }
        }
        RunMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                slots.par_iter_mut().enumerate().for_each(|(i, s)| f(i, s));
            }
            #[cfg(not(feature = "parallel"))]
            {
                for (i, s) in slots.iter_mut().enumerate() {
                    f(i, s);
                }
            }
        }
    }
}

/// Maps `leaf` over `lo..hi` and combines results pairwise.
///
/// The combine tree is a fixed midpoint split down to single leaves, so
/// floating-point accumulation order is a function of `(lo, hi)` only.
/// Both modes evaluate the identical tree; `Parallel` merely runs the two
/// halves of each split on different workers.
///
/// Panics if `lo >= hi`.
pub fn map_reduce<T, Leaf, Comb>(mode: RunMode, lo: usize, hi: usize, leaf: &Leaf, comb: &Comb) -> T
where
    T: Send,
    Leaf: Fn(usize) -> T + Sync + Send,
    Comb: Fn(T, T) -> T + Sync + Send,
{
    assert!(lo < hi, "map_reduce needs a non-empty range");
    if hi - lo == 1 {
        return leaf(lo);
    }
    let mid = lo + (hi - lo) / 2;
    match mode {
        RunMode::Sequential => {
            let a = map_reduce(mode, lo, mid, leaf, comb);
            let b = map_reduce(mode, mid, hi, leaf, comb);
            comb(a, b)
        }
        RunMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                // Stop forking once subranges are small; the tree shape (and
                // therefore the arithmetic) is unchanged, only scheduling.
                if hi - lo <= 8 {
                    let a = map_reduce(RunMode::Sequential, lo, mid, leaf, comb);
                    let b = map_reduce(RunMode::Sequential, mid, hi, leaf, comb);
                    return comb(a, b);
                }
                let (a, b) = rayon::join(
                    || map_reduce(mode, lo, mid, leaf, comb),
                    || map_reduce(mode, mid, hi, leaf, comb),
                );
                comb(a, b)
            }
            #[cfg(not(feature = "parallel"))]
            {
                let a = map_reduce(mode, lo, mid, leaf, comb);
                let b = map_reduce(mode, mid, hi, leaf, comb);
                comb(a, b)
            }
        }
    }
}

/// Runs `f` inside a rayon pool capped at `threads` workers.
///
/// `None` keeps the global pool. Without the `parallel` feature the cap is
/// meaningless and `f` just runs. Capping the pool never changes results,
/// only scheduling; see the module docs.
pub fn with_thread_cap<T, F>(threads: Option<usize>, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(feature = "parallel")]
    {
        match threads {
            None => f(),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .expect("failed to build thread pool");
                pool.install(f)
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
