use std::cmp::Ordering;

use super::MetricError;
use crate::Scalar;

fn check_pair<T: Scalar>(xs: &[T], ys: &[T]) -> Result<(), MetricError> {
    if xs.len() != ys.len() {
        return Err(MetricError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(MetricError::UndefinedCorrelation("need at least two observations"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(MetricError::UndefinedCorrelation("non-finite observation"));
    }
    Ok(())
}

fn cmp<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("finite values")
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks<T: Scalar>(xs: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| cmp(&xs[a], &xs[b]));
    let mut ranks = vec![T::zero(); xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end
        let avg = T::from_count(start + 1 + end) / T::lit(2.0);
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> Result<T, MetricError> {
    let n = T::from_count(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
        syy = syy + (y - my) * (y - my);
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(MetricError::UndefinedCorrelation("zero rank variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).max(-T::one()).min(T::one()))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman_rho<T: Scalar>(xs: &[T], ys: &[T]) -> Result<T, MetricError> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

fn tied_pairs(run: u64) -> u64 {
    run * (run - 1) / 2
}

/// Sum of `t(t-1)/2` over runs of equal keys in an already sorted sequence.
fn count_ties<T: Scalar>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0;
    let mut prev: Option<T> = None;
    let mut run = 0u64;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            total += tied_pairs(run.max(1));
            run = 1;
        }
        prev = Some(v);
    }
    total + tied_pairs(run.max(1))
}

/// Kendall's tau-b, computed with Knight's merge-sort algorithm in `O(n log n)`.
pub fn kendall_tau<T: Scalar>(xs: &[T], ys: &[T]) -> Result<T, MetricError> {
    check_pair(xs, ys)?;
    let n = xs.len();
    let mut pairs: Vec<(T, T)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp(&a.0, &b.0).then(cmp(&a.1, &b.1)));

    let total = tied_pairs(n as u64);
    let tied_x = count_ties(pairs.iter().map(|p| p.0));
    let tied_xy = {
        let mut t = 0;
        let mut i = 0;
        while i < n {
            let mut j = i + 1;
            while j < n && pairs[j] == pairs[i] {
                j += 1;
            }
            t += tied_pairs((j - i) as u64);
            i = j;
        }
        t
    };

    // Bottom-up merge sort on y, counting the swaps needed (= discordant pairs).
    let mut ys_sorted: Vec<T> = pairs.iter().map(|p| p.1).collect();
    let mut buf = ys_sorted.clone();
    let mut swaps: u64 = 0;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if ys_sorted[i] <= ys_sorted[j] {
                    buf[k] = ys_sorted[i];
                    i += 1;
                } else {
                    buf[k] = ys_sorted[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                }
                k += 1;
            }
            buf[k..k + (mid - i)].copy_from_slice(&ys_sorted[i..mid]);
            k += mid - i;
            buf[k..k + (hi - j)].copy_from_slice(&ys_sorted[j..hi]);
            lo = hi;
        }
        std::mem::swap(&mut ys_sorted, &mut buf);
        width *= 2;
    }
    let tied_y = count_ties(ys_sorted.iter().copied());

    let denom_x = total - tied_x;
    let denom_y = total - tied_y;
    if denom_x == 0 || denom_y == 0 {
        return Err(MetricError::UndefinedCorrelation("all values tied"));
    }
    // concordant - discordant = total - tied_x - tied_y + tied_xy - 2 * swaps
    let numer = total as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * swaps as f64;
    let tau = numer / ((denom_x as f64) * (denom_y as f64)).sqrt();
    Ok(T::lit(tau.clamp(-1.0, 1.0)))
}
