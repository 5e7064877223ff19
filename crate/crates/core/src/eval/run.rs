use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    aggregate_folds, evaluate_recommender, make_folds, EvalError, EvalRow, Fold, FoldOutcome, FoldSpec, MeanSem,
    SkipReason,
};
use crate::catalog::{
    compute_popularity, read_movies, read_ratings, Catalog, CatalogEntry, CatalogError, Interaction, ItemId, LineError,
    ParseMode, PopularityTable, UserId,
};
use crate::metrics::MetricId;
use crate::recommenders::{
    ItemKnnRecommender, PopularityTiltRecommender, RandomRecommender, RatingMatrix, RecommendError, Recommender,
    TopPopRecommender, UserKnnRecommender, DEFAULT_NEIGHBORS,
};

/// A loaded MovieLens-format dataset with the popularity table over all its ratings.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub catalog: Catalog,
    pub interactions: Vec<Interaction>,
    pub phi: PopularityTable,
    pub movie_errors: Vec<LineError>,
    pub rating_errors: Vec<LineError>,
}

impl Dataset {
    /// Reads `movies.dat` and `ratings.dat` from `dir`.
    pub fn load(dir: &Path, mode: ParseMode) -> Result<Self, CatalogError> {
        let movies = read_movies(&dir.join("movies.dat"), mode)?;
        let ratings = read_ratings(&dir.join("ratings.dat"), mode)?;
        let mut d = Self::from_parts(movies.records, ratings.records)?;
        d.movie_errors = movies.errors;
        d.rating_errors = ratings.errors;
        Ok(d)
    }

    pub fn from_parts(movies: Vec<CatalogEntry>, interactions: Vec<Interaction>) -> Result<Self, CatalogError> {
        let phi = compute_popularity(&interactions)?;
        Ok(Self { catalog: Catalog::new(movies), interactions, phi, movie_errors: vec![], rating_errors: vec![] })
    }
}

fn default_neighbors() -> usize {
    DEFAULT_NEIGHBORS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineSpec {
    Random,
    TopPop,
    ItemKnn {
        #[serde(default = "default_neighbors")]
        neighbors: usize,
    },
    UserKnn {
        #[serde(default = "default_neighbors")]
        neighbors: usize,
    },
    PopularityTilt {
        beta: f64,
    },
}

impl BaselineSpec {
    /// Random, TopPop, ItemKNN and UserKNN with K = 30.
    pub fn standard() -> Vec<BaselineSpec> {
        vec![
            BaselineSpec::Random,
            BaselineSpec::TopPop,
            BaselineSpec::ItemKnn { neighbors: DEFAULT_NEIGHBORS },
            BaselineSpec::UserKnn { neighbors: DEFAULT_NEIGHBORS },
        ]
    }
}

/// `n` popularity-tilt recommenders with `beta` evenly spaced over `[lo, hi]`.
pub fn popularity_tilt_suite(n: usize, lo: f64, hi: f64) -> Vec<BaselineSpec> {
    (0..n)
        .map(|i| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            BaselineSpec::PopularityTilt { beta: lo + t * (hi - lo) }
        })
        .collect()
}

/// Which interactions baselines are trained on in each fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainScope {
    /// Every rating in the dataset except the fold users' held-out test ratings.
    #[default]
    AllUsers,
    /// Only the fold users' training ratings.
    FoldUsers,
}

/// What a recommender may see when it is built for one fold.
pub struct TrainingContext<'a> {
    pub fold: &'a Fold,
    pub matrix: &'a RatingMatrix,
    pub train_phi: &'a PopularityTable,
    pub phi: &'a PopularityTable,
    pub catalog: &'a Catalog,
    pub seed: u64,
}

pub trait RecommenderFactory: Send + Sync {
    fn name(&self) -> String;

    fn build(&self, ctx: &TrainingContext<'_>) -> Result<Box<dyn Recommender>, RecommendError>;
}

impl RecommenderFactory for BaselineSpec {
    fn name(&self) -> String {
        match self {
            BaselineSpec::Random => "Random".into(),
            BaselineSpec::TopPop => "TopPop".into(),
            BaselineSpec::ItemKnn { .. } => "ItemKNN".into(),
            BaselineSpec::UserKnn { .. } => "UserKNN".into(),
            BaselineSpec::PopularityTilt { beta } => format!("PopTilt({beta:+.2})"),
        }
    }

    fn build(&self, ctx: &TrainingContext<'_>) -> Result<Box<dyn Recommender>, RecommendError> {
        Ok(match self {
            BaselineSpec::Random => Box::new(RandomRecommender::new(ctx.phi.items(), ctx.seed)),
            BaselineSpec::TopPop => Box::new(TopPopRecommender::new(ctx.train_phi.clone())),
            BaselineSpec::ItemKnn { neighbors } => Box::new(ItemKnnRecommender::train(ctx.matrix.clone(), *neighbors)),
            BaselineSpec::UserKnn { neighbors } => {
                let users: Vec<UserId> = ctx.fold.users.iter().map(|s| s.user()).collect();
                Box::new(UserKnnRecommender::train_for(ctx.matrix.clone(), *neighbors, &users))
            }
            BaselineSpec::PopularityTilt { beta } => {
                Box::new(PopularityTiltRecommender::new(ctx.train_phi, *beta, ctx.seed))
            }
        })
    }
}

fn default_k() -> usize {
    10
}

fn default_metrics() -> Vec<MetricId> {
    MetricId::EVAL_DEFAULT.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub folds: FoldSpec,
    #[serde(default)]
    pub scope: TrainScope,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricId>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { folds: FoldSpec::default(), scope: TrainScope::default(), k: default_k(), metrics: default_metrics() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedUser {
    pub user: UserId,
    #[serde(flatten)]
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub recommender: String,
    pub error: String,
}

/// What a run did: configuration, fold membership, skipped users and failed recommenders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: EvalConfig,
    pub recommenders: Vec<String>,
    pub interactions: usize,
    pub items: usize,
    pub folds: Vec<Vec<UserId>>,
    pub skipped: Vec<SkippedUser>,
    pub empty_slates: Vec<(String, usize)>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<EvalRow>,
    /// Per recommender (successful ones only), the per-fold outcomes.
    pub folds: Vec<(String, Vec<FoldOutcome>)>,
    pub manifest: RunManifest,
}

fn training_interactions(data: &Dataset, fold: &Fold, scope: TrainScope) -> Vec<Interaction> {
    let mut train = Vec::new();
    if scope == TrainScope::AllUsers {
        let in_fold: HashMap<UserId, ()> = fold.users.iter().map(|s| (s.user(), ())).collect();
        train.extend(data.interactions.iter().filter(|r| !in_fold.contains_key(&r.user)));
    }
    for s in &fold.users {
        train.extend(s.train.entries.iter().map(|e| Interaction {
            user: s.user(),
            item: e.item,
            rating: e.rating,
            timestamp: e.timestamp,
        }));
    }
    train
}

fn row_from_folds(name: &str, metrics: &[MetricId], folds: &[FoldOutcome]) -> Result<EvalRow, EvalError> {
    let agg = |f: &dyn Fn(&FoldOutcome) -> f64| -> Result<MeanSem, EvalError> {
        aggregate_folds(&folds.iter().map(f).collect::<Vec<_>>())
    };
    let mut bias = Vec::with_capacity(metrics.len());
    for (j, m) in metrics.iter().enumerate() {
        let vals: Option<Vec<f64>> = folds.iter().map(|f| f.bias[j]).collect();
        bias.push((*m, vals.map(|v| aggregate_folds(&v)).transpose()?));
    }
    Ok(EvalRow {
        recommender: name.to_owned(),
        hr5: agg(&|f| f.hr5)?,
        hr10: agg(&|f| f.hr10)?,
        bias,
        unmatched: agg(&|f| f.unmatched)?,
    })
}

/// Runs every recommender on every fold. A recommender that fails in any fold is dropped
/// from the report and listed in the manifest; the others are unaffected.
pub fn run_evaluation(
    data: &Dataset,
    cfg: &EvalConfig,
    factories: &[&dyn RecommenderFactory],
) -> Result<RunOutcome, EvalError> {
    if cfg.folds.fold_count < 2 {
        return Err(EvalError::InvalidSpec("at least 2 folds are needed for a standard error".into()));
    }
    let plan = make_folds(&data.interactions, &cfg.folds)?;
    let names: Vec<String> = factories.iter().map(|f| f.name()).collect();
    let mut results: Vec<Result<Vec<FoldOutcome>, String>> = factories.iter().map(|_| Ok(Vec::new())).collect();
    for fold in &plan.folds {
        let train = training_interactions(data, fold, cfg.scope);
        let matrix = RatingMatrix::from_ratings(train.iter().map(|r| (r.user, r.item, r.rating)));
        let train_phi = compute_popularity(&train)?;
        let ctx = TrainingContext {
            fold,
            matrix: &matrix,
            train_phi: &train_phi,
            phi: &data.phi,
            catalog: &data.catalog,
            seed: cfg.folds.seed,
        };
        for (factory, slot) in factories.iter().zip(results.iter_mut()) {
            let Ok(done) = slot else { continue };
            let outcome = factory
                .build(&ctx)
                .map_err(EvalError::from)
                .and_then(|rec| evaluate_recommender(rec.as_ref(), fold, &data.phi, &cfg.metrics, cfg.k));
            match outcome {
                Ok(o) => done.push(o),
                Err(e) => *slot = Err(format!("fold {}: {e}", fold.index)),
            }
        }
    }

    let mut rows = Vec::new();
    let mut folds = Vec::new();
    let mut failures = Vec::new();
    let mut empty_slates = Vec::new();
    for (name, res) in names.iter().zip(results) {
        match res {
            Ok(outcomes) => {
                rows.push(row_from_folds(name, &cfg.metrics, &outcomes)?);
                empty_slates.push((name.clone(), outcomes.iter().map(|o| o.empty_slates).sum()));
                folds.push((name.clone(), outcomes));
            }
            Err(error) => failures.push(Failure { recommender: name.clone(), error }),
        }
    }
    let manifest = RunManifest {
        config: cfg.clone(),
        recommenders: names,
        interactions: data.interactions.len(),
        items: data.phi.len(),
        folds: plan.folds.iter().map(|f| f.users.iter().map(|s| s.user()).collect()).collect(),
        skipped: plan.skipped.into_iter().map(|(user, reason)| SkippedUser { user, reason }).collect(),
        empty_slates,
        failures,
    };
    Ok(RunOutcome { rows, folds, manifest })
}

/// Every item id of the dataset that has at least one rating.
pub fn rated_items(data: &Dataset) -> Vec<ItemId> {
    data.phi.items()
}
