//! Deterministic capped parallelism: results are produced in input order
//! regardless of the thread count, so ESDA_THREADS only changes wall time.

pub fn thread_cap() -> usize {
    if let Ok(v) = std::env::var("ESDA_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8)
}

/// Maps `f` over `items`, chunked across at most [`thread_cap`] threads;
/// the output vector preserves input order.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = thread_cap().min(items.len().max(1));
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let mut out: Vec<Option<R>> = Vec::with_capacity(items.len());
    out.resize_with(items.len(), || None);
    let slots: Vec<(usize, &[T])> =
        items.chunks(chunk).enumerate().map(|(i, c)| (i * chunk, c)).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (offset, part) in slots {
            let f = &f;
            handles.push(scope.spawn(move || {
                let results: Vec<R> = part.iter().map(f).collect();
                (offset, results)
            }));
        }
        for h in handles {
            let (offset, results) = h.join().expect("worker panicked");
            for (i, r) in results.into_iter().enumerate() {
                out[offset + i] = Some(r);
            }
        }
    });
    out.into_iter().map(|r| r.expect("all slots filled")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let items: Vec<usize> = (0..97).collect();
        let doubled = par_map(&items, |x| x * 2);
        assert_eq!(doubled, items.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
