//! Data-parallel helpers. With the `parallel` feature jobs run on rayon;
//! without it they run in order on the calling thread. Results are returned
//! in input order either way, so outputs do not depend on scheduling.

/// Map `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Always-sequential variant, for benchmarks and for callers that must stay
/// on one thread.
pub fn seq_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Run `body` with at most `threads` workers. `None` or `0` uses the global
/// pool. A no-op wrapper when the `parallel` feature is off.
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: Option<usize>, body: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(body),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                body()
            }
        },
        _ => body(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<R: Send>(_threads: Option<usize>, body: impl FnOnce() -> R + Send) -> R {
    body()
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
