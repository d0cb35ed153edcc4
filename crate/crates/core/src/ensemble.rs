//! Replica-parallel execution with results returned in replica order.
//!
//! Workers share nothing but immutable plans; each owns its solver buffers.
//! Results come back indexed by replica, so downstream folds see the same
//! order regardless of scheduling and are bit-reproducible.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub struct Pool {
    inner: rayon::ThreadPool,
}

impl std::fmt::Debug for Pool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pool").field("workers", &self.workers()).finish()
    }
}

impl Pool {
    /// `workers = None` uses one worker per available core.
    pub fn new(workers: Option<usize>) -> Result<Self> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = workers {
            if w == 0 {
                return Err(Error::InvalidArgument("worker count must be positive".into()));
            }
            b = b.num_threads(w);
        }
        let inner = b
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
        Ok(Self { inner })
    }

    pub fn workers(&self) -> usize {
        self.inner.current_num_threads()
    }

    /// `f(state, replica)` for replicas `0..n`, with one `init()` state per worker task.
    pub fn map_init<S, T, I, F>(&self, n: usize, init: I, f: F) -> Result<Vec<T>>
    where
        T: Send,
        I: Fn() -> Result<S> + Sync + Send,
        F: Fn(&mut S, usize) -> Result<T> + Sync + Send,
    {
        self.inner.install(|| {
            (0..n)
                .into_par_iter()
                .map_init(
                    init,
                    |state, i| match state {
                        Ok(s) => f(s, i),
                        Err(e) => Err(e.clone()),
                    },
                )
                .collect()
        })
    }

    pub fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        self.map_init(n, || Ok(()), |_, i| f(i))
    }
}
