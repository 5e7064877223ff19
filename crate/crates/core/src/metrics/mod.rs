//! Popularity-bias metrics.
//!
//! Every metric compares a recommendation profile `r` with a user profile `u` in three
//! steps: raw popularity scores are transformed item by item, each profile's transformed
//! scores are aggregated to one number, and the two aggregates are compared. The five
//! metrics here are the common points of that space:
//!
//! | metric            | transform | aggregation     | comparison          |
//! |-------------------|-----------|-----------------|---------------------|
//! | `avg_pop_lift`    | identity  | mean            | relative difference |
//! | `gini_diff`       | share     | Gini            | difference          |
//! | `pru`             | rank      | identity        | rank correlation    |
//! | `herfindahl_diff` | share     | sum of squares  | difference          |
//! | `log_pop_diff`    | log       | mean            | difference          |
//!
//! Profiles are multisets: repeated items count once per occurrence.

pub mod desiderata;
mod rank;
mod trace;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{ItemId, PopularityTable};
use crate::Scalar;

pub use desiderata::{
    check_desideratum, check_grid, default_battery, CheckInput, CheckVerdict, Desideratum, PerturbTarget,
    PerturbationFixture, SamplingConfig, VerdictGrid,
};
pub use rank::{average_ranks, kendall_tau, spearman_rho};
pub use trace::{running_mean_trace, TraceTransform};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("item {0} missing from popularity table")]
    MissingItem(ItemId),
    #[error("empty profile")]
    EmptyProfile,
    #[error("score {0} outside the log domain (must be >= 1)")]
    LogDomain(f64),
    #[error("score {0} is not a positive finite number")]
    NonPositiveScore(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("PRU undefined: profiles share {0} item(s), need at least 2")]
    PruUndefined(usize),
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
}

/// Item list of a user (`p_u`) or a recommendation (`p_r`). When `ranked`, position 0 is
/// the top slot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Profile {
    pub items: Vec<ItemId>,
    pub ranked: bool,
}

impl Profile {
    pub fn new(items: Vec<ItemId>) -> Self {
        Self { items, ranked: false }
    }

    pub fn ranked(items: Vec<ItemId>) -> Self {
        Self { items, ranked: true }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Pairs every item with its raw score from `phi`.
    pub fn scored<T: Scalar>(&self, phi: &PopularityTable) -> Result<Vec<(ItemId, T)>, MetricError> {
        self.items.iter().map(|&i| phi.score(i).map(|s| (i, s)).ok_or(MetricError::MissingItem(i))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    LogPopDiff,
    AvgPopLift,
    GiniDiff,
    HerfindahlDiff,
    Pru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    Log,
    Rank,
    Share,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Mean,
    Gini,
    SumOfSquares,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Difference,
    RelativeDifference,
    Correlation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricDefinition {
    pub id: MetricId,
    pub transform: Transform,
    pub aggregation: Aggregation,
    pub comparison: Comparison,
}

impl MetricDefinition {
    /// Whether the profile aggregate lives in a fixed bounded interval whatever the profile
    /// size: shares aggregated by Gini or sum of squares, and rank correlations.
    pub fn bounded_aggregate(&self) -> bool {
        matches!(
            (self.transform, self.aggregation),
            (Transform::Share, Aggregation::Gini)
                | (Transform::Share, Aggregation::SumOfSquares)
                | (Transform::Rank, Aggregation::Identity)
        )
    }
}

impl MetricId {
    pub const ALL: [MetricId; 5] =
        [MetricId::AvgPopLift, MetricId::GiniDiff, MetricId::Pru, MetricId::HerfindahlDiff, MetricId::LogPopDiff];

    /// Metrics usable on disjoint slate/history profiles (PRU needs an overlap).
    pub const EVAL_DEFAULT: [MetricId; 4] =
        [MetricId::LogPopDiff, MetricId::AvgPopLift, MetricId::GiniDiff, MetricId::HerfindahlDiff];

    pub fn definition(self) -> MetricDefinition {
        use Aggregation as A;
        use Comparison as C;
        use Transform as T;
        let (transform, aggregation, comparison) = match self {
            MetricId::AvgPopLift => (T::Identity, A::Mean, C::RelativeDifference),
            MetricId::GiniDiff => (T::Share, A::Gini, C::Difference),
            MetricId::Pru => (T::Rank, A::Identity, C::Correlation),
            MetricId::HerfindahlDiff => (T::Share, A::SumOfSquares, C::Difference),
            MetricId::LogPopDiff => (T::Log, A::Mean, C::Difference),
        };
        MetricDefinition { id: self, transform, aggregation, comparison }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::LogPopDiff => "log_pop_diff",
            MetricId::AvgPopLift => "avg_pop_lift",
            MetricId::GiniDiff => "gini_diff",
            MetricId::HerfindahlDiff => "herfindahl_diff",
            MetricId::Pru => "pru",
        }
    }

    /// Compares two scored profiles. `r` must be in rank order for PRU.
    pub fn evaluate_scored<T: Scalar>(self, r: &[(ItemId, T)], u: &[(ItemId, T)]) -> Result<T, MetricError> {
        let rs: Vec<T> = r.iter().map(|p| p.1).collect();
        let us: Vec<T> = u.iter().map(|p| p.1).collect();
        match self {
            MetricId::LogPopDiff => log_pop_difference_scores(&rs, &us),
            MetricId::AvgPopLift => avg_pop_lift_scores(&rs, &us),
            MetricId::GiniDiff => Ok(gini_index(&rs)? - gini_index(&us)?),
            MetricId::HerfindahlDiff => Ok(herfindahl_index(&rs)? - herfindahl_index(&us)?),
            MetricId::Pru => pru_scored(r, u),
        }
    }

    pub fn evaluate<T: Scalar>(self, r: &Profile, u: &Profile, phi: &PopularityTable) -> Result<T, MetricError> {
        self.evaluate_scored(&r.scored::<T>(phi)?, &u.scored::<T>(phi)?)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| MetricError::UnknownMetric(s.to_owned()))
    }
}

fn check_positive<T: Scalar>(scores: &[T]) -> Result<(), MetricError> {
    if scores.is_empty() {
        return Err(MetricError::EmptyProfile);
    }
    match scores.iter().find(|s| !(s.is_finite() && **s > T::zero())) {
        Some(bad) => Err(MetricError::NonPositiveScore(bad.to_f64_lossy())),
        None => Ok(()),
    }
}

fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::from_count(xs.len())
}

fn mean_log<T: Scalar>(scores: &[T]) -> Result<T, MetricError> {
    check_positive(scores)?;
    if let Some(bad) = scores.iter().find(|s| **s < T::one()) {
        return Err(MetricError::LogDomain(bad.to_f64_lossy()));
    }
    Ok(mean(&scores.iter().map(|s| s.ln()).collect::<Vec<_>>()))
}

/// Mean natural-log popularity of `r` minus that of `u`.
pub fn log_pop_difference_scores<T: Scalar>(r: &[T], u: &[T]) -> Result<T, MetricError> {
    Ok(mean_log(r)? - mean_log(u)?)
}

/// `(AP(r) - AP(u)) / AP(u)` with `AP` the plain mean of raw scores.
pub fn avg_pop_lift_scores<T: Scalar>(r: &[T], u: &[T]) -> Result<T, MetricError> {
    check_positive(r)?;
    check_positive(u)?;
    let (ap_r, ap_u) = (mean(r), mean(u));
    Ok((ap_r - ap_u) / ap_u)
}

/// Gini index of the profile's popularity shares, in `[0, 1)`.
pub fn gini_index<T: Scalar>(scores: &[T]) -> Result<T, MetricError> {
    check_positive(scores)?;
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let n = T::from_count(sorted.len());
    let total: T = sorted.iter().copied().sum();
    let two = T::lit(2.0);
    Ok(sorted.iter().enumerate().map(|(i, &x)| (two * T::from_count(i + 1) - n - T::one()) / n * (x / total)).sum())
}

/// Herfindahl concentration of the profile's popularity shares, in `(0, 1]`.
pub fn herfindahl_index<T: Scalar>(scores: &[T]) -> Result<T, MetricError> {
    check_positive(scores)?;
    let total: T = scores.iter().copied().sum();
    Ok(scores.iter().map(|&x| (x / total) * (x / total)).sum())
}

/// Spearman correlation between popularity and slot alignment `k + 1 - position` over the
/// items `r` and `u` share; +1 means the most popular shared items sit in the top slots.
fn pru_scored<T: Scalar>(r: &[(ItemId, T)], u: &[(ItemId, T)]) -> Result<T, MetricError> {
    let in_u: HashSet<ItemId> = u.iter().map(|p| p.0).collect();
    let k = r.len();
    let mut seen = HashSet::new();
    let (mut pop, mut align) = (Vec::new(), Vec::new());
    for (pos, &(item, score)) in r.iter().enumerate() {
        if in_u.contains(&item) && seen.insert(item) {
            pop.push(score);
            align.push(T::from_count(k - pos));
        }
    }
    if pop.len() < 2 {
        return Err(MetricError::PruUndefined(pop.len()));
    }
    spearman_rho(&pop, &align)
}

pub fn log_pop_difference<T: Scalar>(r: &Profile, u: &Profile, phi: &PopularityTable) -> Result<T, MetricError> {
    MetricId::LogPopDiff.evaluate(r, u, phi)
}

pub fn avg_pop_lift<T: Scalar>(r: &Profile, u: &Profile, phi: &PopularityTable) -> Result<T, MetricError> {
    MetricId::AvgPopLift.evaluate(r, u, phi)
}

pub fn gini_profile<T: Scalar>(p: &Profile, phi: &PopularityTable) -> Result<T, MetricError> {
    let scores: Vec<T> = p.scored(phi)?.into_iter().map(|s| s.1).collect();
    gini_index(&scores)
}

pub fn gini_diff<T: Scalar>(r: &Profile, u: &Profile, phi: &PopularityTable) -> Result<T, MetricError> {
    MetricId::GiniDiff.evaluate(r, u, phi)
}

pub fn herfindahl_profile<T: Scalar>(p: &Profile, phi: &PopularityTable) -> Result<T, MetricError> {
    let scores: Vec<T> = p.scored(phi)?.into_iter().map(|s| s.1).collect();
    herfindahl_index(&scores)
}

pub fn herfindahl_diff<T: Scalar>(r: &Profile, u: &Profile, phi: &PopularityTable) -> Result<T, MetricError> {
    MetricId::HerfindahlDiff.evaluate(r, u, phi)
}

pub fn pru<T: Scalar>(r: &Profile, u: &Profile, phi: &PopularityTable) -> Result<T, MetricError> {
    MetricId::Pru.evaluate(r, u, phi)
}
