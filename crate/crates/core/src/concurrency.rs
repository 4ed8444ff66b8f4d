//! Bounded in-flight execution of independent jobs.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Runs `f` over `items` with at most `max_in_flight` calls outstanding at
/// any moment and returns the results in input order.
///
/// Workers pull the next unclaimed index, so throughput degrades gracefully
/// when job latencies differ. On failure the error of the lowest failing
/// index is returned after all in-flight jobs finish.
pub fn bounded_map<I, O, E, F>(items: &[I], max_in_flight: usize, f: F) -> Result<Vec<O>, E>
where
    I: Sync,
    O: Send,
    E: Send,
    F: Fn(usize, &I) -> Result<O, E> + Sync,
{
    assert!(max_in_flight >= 1, "max_in_flight must be at least 1");
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let next = AtomicUsize::new(0);
    let failed = std::sync::atomic::AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<O, E>>>> =
        Mutex::new((0..items.len()).map(|_| None).collect());
    let workers = max_in_flight.min(items.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::Acquire) {
                    break;
                }
                let idx = next.fetch_add(1, Ordering::AcqRel);
                if idx >= items.len() {
                    break;
                }
                let res = f(idx, &items[idx]);
                if res.is_err() {
                    failed.store(true, Ordering::Release);
                }
                slots.lock().expect("slot lock")[idx] = Some(res);
            });
        }
    });

    let slots = slots.into_inner().expect("slot lock");
    let mut out = Vec::with_capacity(items.len());
    for slot in slots {
        match slot {
            Some(Ok(v)) => out.push(v),
            Some(Err(e)) => return Err(e),
            // only reachable after an earlier failure stopped the workers
            None => continue,
        }
    }
    Ok(out)
}
