use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceTransform {
    Identity,
    Log,
}

/// Prefix means `sum_{i<=N} g(x_i) / N` for `N = 1..=len`.
pub fn running_mean_trace<T: Scalar>(scores: &[T], transform: TraceTransform) -> Vec<T> {
    let mut acc = T::zero();
    scores
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            acc = acc
                + match transform {
                    TraceTransform::Identity => x,
                    TraceTransform::Log => x.ln(),
                };
            acc / T::from_count(i + 1)
        })
        .collect()
}
