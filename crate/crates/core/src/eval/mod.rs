//! Offline evaluation: per-user splits, folds, hit rates, fold aggregation and reports.

mod report;
mod run;

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CatalogError, Interaction, ItemId, PopularityTable, UserId};
use crate::metrics::MetricId;
use crate::recommenders::{derive_seed, HistoryEntry, RecommendError, Recommender, Slate, UserHistory};

pub use report::{correlate_metrics, emit_report, parse_report_csv, CorrelationMatrix, EvalRow, MeanSem, ReportFormat};
pub use run::{
    popularity_tilt_suite, rated_items, run_evaluation, BaselineSpec, Dataset, EvalConfig, Failure, RecommenderFactory,
    RunManifest, RunOutcome, SkippedUser, TrainScope, TrainingContext,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 folds to aggregate, got {0}")]
    TooFewFolds(usize),
    #[error("need {need} eligible users for the fold spec, only {have} available")]
    InsufficientUsers { need: usize, have: usize },
    #[error("invalid fold spec: {0}")]
    InvalidSpec(String),
    #[error("empty test set")]
    EmptyTest,
    #[error("k = {k} exceeds the slate's requested size {requested}")]
    KTooLarge { k: usize, requested: usize },
    #[error("need at least {need} report rows, got {have}")]
    TooFewRows { need: usize, have: usize },
    #[error("row {recommender} has no value for {metric}")]
    MissingValue { recommender: String, metric: MetricId },
    #[error("rows disagree on the metric columns")]
    MetricMismatch,
    #[error("malformed report: {0}")]
    Report(String),
    #[error(transparent)]
    Recommender(#[from] RecommendError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldSpec {
    pub fold_count: usize,
    pub users_per_fold: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub min_ratings: usize,
}

impl Default for FoldSpec {
    fn default() -> Self {
        Self { fold_count: 5, users_per_fold: 1000, seed: 0, train_fraction: 0.8, min_ratings: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum SkipReason {
    TooFewRatings { have: usize, need: usize },
    EmptyTest,
    EmptyTrain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSplit {
    pub train: UserHistory,
    pub test: Vec<ItemId>,
}

impl UserSplit {
    pub fn user(&self) -> UserId {
        self.train.user
    }
}

/// Random per-user train/test split with `round(train_fraction * n)` training ratings.
/// Deterministic per (user, seed). Repeated items keep their latest rating.
pub fn split_user_ratings(
    ratings: &[Interaction],
    train_fraction: f64,
    min_ratings: usize,
    seed: u64,
) -> Result<UserSplit, SkipReason> {
    let mut latest: BTreeMap<ItemId, Interaction> = BTreeMap::new();
    let mut ordered = ratings.to_vec();
    ordered.sort_by_key(|r| r.timestamp);
    for r in ordered {
        latest.insert(r.item, r);
    }
    let n = latest.len();
    if n < min_ratings.max(1) {
        return Err(SkipReason::TooFewRatings { have: n, need: min_ratings.max(1) });
    }
    let user = ratings[0].user;
    debug_assert!(ratings.iter().all(|r| r.user == user), "ratings of several users");
    let mut pool: Vec<Interaction> = latest.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, user.0));
    pool.shuffle(&mut rng);
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 {
        return Err(SkipReason::EmptyTrain);
    }
    if n_train >= n {
        return Err(SkipReason::EmptyTest);
    }
    let mut train: Vec<Interaction> = pool[..n_train].to_vec();
    train.sort_by_key(|r| (r.timestamp, r.item));
    let mut test: Vec<ItemId> = pool[n_train..].iter().map(|r| r.item).collect();
    test.sort_unstable();
    let entries =
        train.into_iter().map(|r| HistoryEntry { item: r.item, rating: r.rating, timestamp: r.timestamp }).collect();
    Ok(UserSplit { train: UserHistory { user, entries }, test })
}

#[derive(Debug, Clone)]
pub struct Fold {
    pub index: usize,
    /// Ascending user id.
    pub users: Vec<UserSplit>,
}

#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub skipped: Vec<(UserId, SkipReason)>,
}

/// Splits every user, then draws disjoint folds of eligible users.
pub fn make_folds(interactions: &[Interaction], spec: &FoldSpec) -> Result<FoldPlan, EvalError> {
    if spec.fold_count == 0 || spec.users_per_fold == 0 {
        return Err(EvalError::InvalidSpec("fold_count and users_per_fold must be positive".into()));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(EvalError::InvalidSpec(format!("train_fraction {} outside (0, 1)", spec.train_fraction)));
    }
    let mut by_user: BTreeMap<UserId, Vec<Interaction>> = BTreeMap::new();
    for r in interactions {
        by_user.entry(r.user).or_default().push(*r);
    }
    let mut eligible = Vec::new();
    let mut skipped = Vec::new();
    for (user, rs) in &by_user {
        match split_user_ratings(rs, spec.train_fraction, spec.min_ratings, spec.seed) {
            Ok(s) => eligible.push(s),
            Err(reason) => skipped.push((*user, reason)),
        }
    }
    let need = spec.fold_count * spec.users_per_fold;
    if eligible.len() < need {
        return Err(EvalError::InsufficientUsers { need, have: eligible.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    eligible.shuffle(&mut rng);
    eligible.truncate(need);
    let mut folds = Vec::with_capacity(spec.fold_count);
    for index in 0..spec.fold_count {
        let mut users: Vec<UserSplit> =
            eligible[index * spec.users_per_fold..(index + 1) * spec.users_per_fold].to_vec();
        users.sort_by_key(|s| s.user());
        folds.push(Fold { index, users });
    }
    Ok(FoldPlan { folds, skipped })
}

/// Per-user recall at `k`: the share of test items found in the slate's first `k` entries.
pub fn hit_rate_at_k(slate: &Slate, test: &HashSet<ItemId>, k: usize) -> Result<f64, EvalError> {
    if k > slate.requested_k {
        return Err(EvalError::KTooLarge { k, requested: slate.requested_k });
    }
    if test.is_empty() {
        return Err(EvalError::EmptyTest);
    }
    let hits = slate.entries.iter().take(k).filter(|i| test.contains(i)).count();
    Ok(hits as f64 / test.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserOutcome {
    pub user: UserId,
    pub slate: Slate,
    pub hr5: f64,
    pub hr10: f64,
    /// One entry per evaluated metric; `None` where the metric is undefined for this slate.
    pub bias: Vec<Option<f64>>,
    pub unmatched: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub metrics: Vec<MetricId>,
    pub users: Vec<UserOutcome>,
    pub hr5: f64,
    pub hr10: f64,
    pub bias: Vec<Option<f64>>,
    pub unmatched: f64,
    pub empty_slates: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Runs `rec` for every user of the fold. Bias compares the slate with the user's training
/// profile under `phi`; users with an empty slate score zero hits and no bias.
pub fn evaluate_recommender(
    rec: &dyn Recommender,
    fold: &Fold,
    phi: &PopularityTable,
    metrics: &[MetricId],
    k: usize,
) -> Result<FoldOutcome, EvalError> {
    if k < 10 {
        return Err(EvalError::InvalidSpec(format!("slate size {k} below 10 cannot give HR@10")));
    }
    let histories: Vec<UserHistory> = fold.users.iter().map(|s| s.train.clone()).collect();
    let recs = rec.recommend_batch(&histories, k);
    let mut users = Vec::with_capacity(recs.len());
    for (split, r) in fold.users.iter().zip(recs) {
        let r = r?;
        let test: HashSet<ItemId> = split.test.iter().copied().collect();
        let hr5 = hit_rate_at_k(&r.slate, &test, 5)?;
        let hr10 = hit_rate_at_k(&r.slate, &test, 10)?;
        let bias = if r.slate.is_empty() {
            vec![None; metrics.len()]
        } else {
            let (rp, up) = (r.slate.profile(), split.train.profile());
            metrics.iter().map(|m| m.evaluate::<f64>(&rp, &up, phi).ok()).collect()
        };
        users.push(UserOutcome { user: split.user(), slate: r.slate, hr5, hr10, bias, unmatched: r.unmatched });
    }
    let bias = (0..metrics.len()).map(|j| mean(users.iter().filter_map(|u| u.bias[j]))).collect();
    Ok(FoldOutcome {
        metrics: metrics.to_vec(),
        hr5: mean(users.iter().map(|u| u.hr5)).unwrap_or(0.0),
        hr10: mean(users.iter().map(|u| u.hr10)).unwrap_or(0.0),
        unmatched: mean(users.iter().map(|u| u.unmatched as f64)).unwrap_or(0.0),
        empty_slates: users.iter().filter(|u| u.slate.is_empty()).count(),
        bias,
        users,
    })
}

/// Mean and standard error of the mean (sample sd over `sqrt(n)`).
pub fn aggregate_folds(values: &[f64]) -> Result<MeanSem, EvalError> {
    if values.len() < 2 {
        return Err(EvalError::TooFewFolds(values.len()));
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    Ok(MeanSem { mean: m, sem: var.sqrt() / n.sqrt() })
}
