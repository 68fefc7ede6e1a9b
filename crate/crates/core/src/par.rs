//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) batch loops fan out over rayon's
//! global pool. [`set_sequential`] forces the sequential path at runtime,
//! which is how the benches compare both on one binary. Results are always
//! collected in index order, so any reduction done by the caller over the
//! returned vector is bit-identical across worker counts.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// State vectors below this many amplitudes are never split across threads.
pub const KERNEL_PAR_MIN_LEN: usize = 1 << 14;

pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

/// True when batch loops will actually run in parallel.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// `(0..n).map(f).collect()`, possibly in parallel, order preserved.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && n > 1 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Map over a slice, possibly in parallel, order preserved.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && items.len() > 1 {
        use rayon::prelude::*;
        return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Run `f` on each `chunk`-sized piece of `data` together with its index.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && data.len() >= KERNEL_PAR_MIN_LEN && data.len() / chunk > 1 {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Elementwise update with the global index, possibly in parallel.
pub fn for_each_indexed_mut<T, F>(data: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && data.len() >= KERNEL_PAR_MIN_LEN {
        use rayon::prelude::*;
        const BLOCK: usize = 1 << 12;
        data.par_chunks_mut(BLOCK).enumerate().for_each(|(b, c)| {
            let base = b * BLOCK;
            for (i, x) in c.iter_mut().enumerate() {
                f(base + i, x);
            }
        });
        return;
    }
    data.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}
