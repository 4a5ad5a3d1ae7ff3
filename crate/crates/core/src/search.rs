use rayon::prelude::*;

const CHUNK: usize = 64;

/// Evaluates `trial(0..total)` in parallel chunks and returns the lowest
/// index whose result is `Some`, along with the number of trials up to and
/// including it. The answer does not depend on thread scheduling.
pub(crate) fn first_hit<T, F>(total: usize, trial: F) -> (Option<(usize, T)>, usize)
where
    T: Send,
    F: Fn(usize) -> Option<T> + Sync,
{
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        let hit = (start..end)
            .into_par_iter()
            .filter_map(|i| trial(i).map(|t| (i, t)))
            .min_by_key(|(i, _)| *i);
        if let Some((i, t)) = hit {
            return (Some((i, t)), i + 1);
        }
        start = end;
    }
    (None, total)
}

/// Evaluates `trial(0..total)` in parallel chunks and returns the outcomes
/// in index order up to and including the first one satisfying `stop`.
pub(crate) fn scan_until<T, F, S>(total: usize, trial: F, stop: S) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
    S: Fn(&T) -> bool,
{
    let mut out = Vec::new();
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        let chunk: Vec<T> = (start..end).into_par_iter().map(&trial).collect();
        if let Some(p) = chunk.iter().position(&stop) {
            out.extend(chunk.into_iter().take(p + 1));
            return out;
        }
        out.extend(chunk);
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_lowest_index() {
        let (hit, used) = first_hit(1000, |i| (i % 97 == 96 || i == 300).then_some(i * 2));
        assert_eq!(hit, Some((96, 192)));
        assert_eq!(used, 97);
        let (hit, used) = first_hit(50, |_| None::<()>);
        assert!(hit.is_none());
        assert_eq!(used, 50);
    }

    #[test]
    fn scan_stops_after_first_hit() {
        let out = scan_until(1000, |i| i * 3, |v| *v >= 600);
        assert_eq!(out.len(), 201);
        assert_eq!(out[200], 600);
        assert_eq!(scan_until(10, |i| i, |_| false).len(), 10);
    }
}
