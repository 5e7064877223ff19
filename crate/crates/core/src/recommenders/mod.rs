//! Baseline top-k recommenders.

mod knn;
mod matrix;

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::catalog::{ItemId, PopularityTable, UserId};
use crate::metrics::Profile;

pub use knn::{
    build_item_knn, build_user_knn, build_user_knn_for, recommend_item_knn, recommend_user_knn, KnnMode, KnnModel,
    DEFAULT_NEIGHBORS,
};
pub use matrix::RatingMatrix;

/// Ordered top-k list; position 0 is the top slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slate {
    pub entries: Vec<ItemId>,
    pub requested_k: usize,
}

impl Slate {
    pub fn new(entries: Vec<ItemId>, requested_k: usize) -> Self {
        debug_assert!(entries.len() <= requested_k);
        debug_assert_eq!(entries.iter().collect::<HashSet<_>>().len(), entries.len(), "duplicate slate entry");
        Self { entries, requested_k }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn profile(&self) -> Profile {
        Profile::ranked(self.entries.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub item: ItemId,
    pub rating: f64,
    pub timestamp: i64,
}

/// A user's training interactions in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct UserHistory {
    pub user: UserId,
    pub entries: Vec<HistoryEntry>,
}

impl UserHistory {
    pub fn items(&self) -> Vec<ItemId> {
        self.entries.iter().map(|e| e.item).collect()
    }

    pub fn rated(&self) -> Vec<(ItemId, f64)> {
        self.entries.iter().map(|e| (e.item, e.rating)).collect()
    }

    pub fn profile(&self) -> Profile {
        Profile::new(self.items())
    }

    pub fn item_set(&self) -> HashSet<ItemId> {
        self.entries.iter().map(|e| e.item).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub slate: Slate,
    /// Requested slots not filled by a valid catalog item.
    pub unmatched: usize,
}

impl From<Slate> for Recommendation {
    fn from(slate: Slate) -> Self {
        Recommendation { slate, unmatched: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecommendError {
    #[error("only {available} candidate items left after exclusions, {needed} requested")]
    InsufficientCandidates { needed: usize, available: usize },
    #[error("recommender failed: {0}")]
    Failed(String),
}

pub trait Recommender: Send + Sync {
    fn name(&self) -> &str;

    fn recommend(&self, user: &UserHistory, k: usize) -> Result<Recommendation, RecommendError>;

    /// Recommends for every user; results are in input order.
    fn recommend_batch(&self, users: &[UserHistory], k: usize) -> Vec<Result<Recommendation, RecommendError>> {
        users.par_iter().map(|u| self.recommend(u, k)).collect()
    }
}

/// Top `k` items by descending score, ties by ascending id.
pub(crate) fn rank_scores(scored: impl Iterator<Item = (ItemId, f64)>, k: usize) -> Vec<ItemId> {
    let mut v: Vec<(ItemId, f64)> = scored.collect();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    v.truncate(k);
    v.into_iter().map(|p| p.0).collect()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-(seed, key) stream seed, so results do not depend on evaluation order.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    splitmix64(seed ^ splitmix64(key))
}

/// `k` distinct items drawn uniformly without replacement from `candidates \ exclude`.
pub fn recommend_random(
    candidates: &[ItemId],
    exclude: &HashSet<ItemId>,
    k: usize,
    seed: u64,
) -> Result<Slate, RecommendError> {
    let mut pool: Vec<ItemId> = candidates.iter().copied().filter(|i| !exclude.contains(i)).collect();
    pool.sort_unstable();
    pool.dedup();
    if pool.len() < k {
        return Err(RecommendError::InsufficientCandidates { needed: k, available: pool.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (picked, _) = pool.partial_shuffle(&mut rng, k);
    Ok(Slate::new(picked.to_vec(), k))
}

/// The `k` most popular items outside `exclude`, ties by ascending id.
pub fn recommend_top_pop(phi: &PopularityTable, exclude: &HashSet<ItemId>, k: usize) -> Result<Slate, RecommendError> {
    let entries: Vec<ItemId> = phi.ranked().into_iter().map(|p| p.0).filter(|i| !exclude.contains(i)).take(k).collect();
    if entries.len() < k {
        return Err(RecommendError::InsufficientCandidates { needed: k, available: entries.len() });
    }
    Ok(Slate::new(entries, k))
}

#[derive(Debug, Clone)]
pub struct RandomRecommender {
    items: Vec<ItemId>,
    seed: u64,
}

impl RandomRecommender {
    pub fn new(mut items: Vec<ItemId>, seed: u64) -> Self {
        items.sort_unstable();
        items.dedup();
        Self { items, seed }
    }
}

impl Recommender for RandomRecommender {
    fn name(&self) -> &str {
        "Random"
    }

    fn recommend(&self, user: &UserHistory, k: usize) -> Result<Recommendation, RecommendError> {
        recommend_random(&self.items, &user.item_set(), k, derive_seed(self.seed, user.user.0)).map(Into::into)
    }
}

#[derive(Debug, Clone)]
pub struct TopPopRecommender {
    phi: PopularityTable,
}

impl TopPopRecommender {
    pub fn new(phi: PopularityTable) -> Self {
        Self { phi }
    }
}

impl Recommender for TopPopRecommender {
    fn name(&self) -> &str {
        "TopPop"
    }

    fn recommend(&self, user: &UserHistory, k: usize) -> Result<Recommendation, RecommendError> {
        recommend_top_pop(&self.phi, &user.item_set(), k).map(Into::into)
    }
}

#[derive(Debug, Clone)]
pub struct ItemKnnRecommender {
    matrix: RatingMatrix,
    model: KnnModel,
}

impl ItemKnnRecommender {
    pub fn train(matrix: RatingMatrix, k: usize) -> Self {
        let model = build_item_knn(&matrix, k);
        Self { matrix, model }
    }

    pub fn model(&self) -> &KnnModel {
        &self.model
    }
}

impl Recommender for ItemKnnRecommender {
    fn name(&self) -> &str {
        "ItemKNN"
    }

    fn recommend(&self, user: &UserHistory, k: usize) -> Result<Recommendation, RecommendError> {
        Ok(recommend_item_knn(&self.model, &self.matrix, &user.rated(), k).into())
    }
}

#[derive(Debug, Clone)]
pub struct UserKnnRecommender {
    matrix: RatingMatrix,
    model: KnnModel,
}

impl UserKnnRecommender {
    pub fn train(matrix: RatingMatrix, k: usize) -> Self {
        let model = build_user_knn(&matrix, k);
        Self { matrix, model }
    }

    /// Trains neighbor lists only for `users`, the ones that will be asked for slates.
    pub fn train_for(matrix: RatingMatrix, k: usize, users: &[UserId]) -> Self {
        let model = build_user_knn_for(&matrix, k, users);
        Self { matrix, model }
    }

    pub fn model(&self) -> &KnnModel {
        &self.model
    }
}

impl Recommender for UserKnnRecommender {
    fn name(&self) -> &str {
        "UserKNN"
    }

    fn recommend(&self, user: &UserHistory, k: usize) -> Result<Recommendation, RecommendError> {
        Ok(recommend_user_knn(&self.model, &self.matrix, user.user, &user.rated(), k).into())
    }
}

/// Samples `k` unseen items without replacement with probability proportional to `phi^beta`
/// (Gumbel top-k). `beta < 0` favours the long tail, `beta = 0` is uniform, large `beta`
/// approaches TopPop.
#[derive(Debug, Clone)]
pub struct PopularityTiltRecommender {
    items: Vec<(ItemId, f64)>,
    beta: f64,
    seed: u64,
    name: String,
}

impl PopularityTiltRecommender {
    pub fn new(phi: &PopularityTable, beta: f64, seed: u64) -> Self {
        let items = phi.iter().map(|(i, c)| (i, (c as f64).ln())).collect();
        Self { items, beta, seed, name: format!("PopTilt({beta:+.2})") }
    }
}

impl Recommender for PopularityTiltRecommender {
    fn name(&self) -> &str {
        &self.name
    }

    fn recommend(&self, user: &UserHistory, k: usize) -> Result<Recommendation, RecommendError> {
        let seen = user.item_set();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed ^ self.beta.to_bits(), user.user.0));
        let scored = self.items.iter().filter(|(i, _)| !seen.contains(i)).map(|&(i, log_phi)| {
            let gumbel = -(-(1.0 - rand::Rng::gen::<f64>(&mut rng)).ln()).ln();
            (i, self.beta * log_phi + gumbel)
        });
        let slate = rank_scores(scored, k);
        if slate.len() < k {
            return Err(RecommendError::InsufficientCandidates { needed: k, available: slate.len() });
        }
        Ok(Slate::new(slate, k).into())
    }
}
