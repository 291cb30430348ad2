//! Deterministic fork-join over sample indices.
//!
//! Work is partitioned by sample index, never by worker: each unit of work is
//! one index, results are collected in index order, and reductions run
//! sequentially over that order. Metric values are therefore identical for
//! any worker count, including 1.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

static WORKER_OVERRIDE: AtomicUsize = AtomicUsize::new(0);

/// RAII override of the worker count (experiment specs can pin it).
pub struct WorkerOverride {
    previous: usize,
}

impl WorkerOverride {
    pub fn new(workers: usize) -> Self {
        let previous = WORKER_OVERRIDE.swap(workers.max(1), Ordering::SeqCst);
        WorkerOverride { previous }
    }
}

impl Drop for WorkerOverride {
    fn drop(&mut self) {
        WORKER_OVERRIDE.store(self.previous, Ordering::SeqCst);
    }
}

/// Worker count: programmatic override, then the `WIGNER_LAB_WORKERS`
/// environment variable, then available parallelism.
pub fn worker_count() -> usize {
    let o = WORKER_OVERRIDE.load(Ordering::SeqCst);
    if o >= 1 {
        return o;
    }
    if let Ok(s) = std::env::var("WIGNER_LAB_WORKERS") {
        if let Ok(n) = s.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Map `f` over `0..n_items` on `workers` threads; results come back in
/// index order.
pub fn parallel_map<A, F>(n_items: usize, workers: usize, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(usize) -> A + Sync,
{
    let workers = workers.max(1).min(n_items.max(1));
    if workers == 1 {
        return (0..n_items).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<A>>> = Mutex::new((0..n_items).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n_items {
                    break;
                }
                let out = f(i);
                slots.lock().unwrap()[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("worker left a hole"))
        .collect()
}

/// `parallel_map` with the globally configured worker count.
pub fn parallel_samples<A, F>(n_items: usize, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(usize) -> A + Sync,
{
    parallel_map(n_items, worker_count(), f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_by_index() {
        let out = parallel_map(100, 4, |i| i * i);
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn worker_count_invariance() {
        let job = |i: usize| ((i as f64) * 0.1).sin();
        let a: f64 = parallel_map(500, 1, job).iter().sum();
        let b: f64 = parallel_map(500, 4, job).iter().sum();
        let c: f64 = parallel_map(500, 8, job).iter().sum();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(a.to_bits(), c.to_bits());
    }
}
