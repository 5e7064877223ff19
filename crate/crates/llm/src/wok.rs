use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use popbias::catalog::{Catalog, ItemId, TitleIndex};
use popbias::eval::{RecommenderFactory, TrainingContext};
use popbias::recommenders::{RecommendError, Recommendation, Recommender, UserHistory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::parse::{parse_recommendations, validate_and_resolve, Validated};
use crate::prompt::{render_prompt, PromptVariant, WatchedTitle};
use crate::provider::{ChatClient, ProviderConfig, ProviderError};

/// Everything produced for one user, for inspection and logging.
#[derive(Debug, Clone)]
pub struct WokTrace {
    pub prompt: String,
    pub response: String,
    pub validated: Validated,
}

pub struct WokRecommender {
    name: String,
    variant: PromptVariant,
    client: Arc<ChatClient>,
    catalog: Arc<Catalog>,
    index: Arc<TitleIndex>,
    pool: Arc<rayon::ThreadPool>,
}

fn pool(n: usize) -> Result<Arc<rayon::ThreadPool>, ProviderError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Arc::new)
        .map_err(|e| ProviderError::Config(e.to_string()))
}

pub fn wok_name(cfg: &ProviderConfig, variant: PromptVariant) -> String {
    format!("WOK-{}{}", cfg.label(), variant.suffix())
}

impl WokRecommender {
    pub fn new(cfg: ProviderConfig, variant: PromptVariant, catalog: Arc<Catalog>) -> Result<Self, ProviderError> {
        let index = Arc::new(catalog.title_index());
        Self::with_parts(variant, Arc::new(ChatClient::new(cfg)?), catalog, index)
    }

    fn with_parts(
        variant: PromptVariant,
        client: Arc<ChatClient>,
        catalog: Arc<Catalog>,
        index: Arc<TitleIndex>,
    ) -> Result<Self, ProviderError> {
        let cfg = client.config();
        Ok(Self { name: wok_name(cfg, variant), variant, pool: pool(cfg.max_in_flight)?, client, catalog, index })
    }

    /// Watch history as shown to the model, oldest first.
    pub fn history_titles(&self, user: &UserHistory) -> Vec<WatchedTitle> {
        user.entries
            .iter()
            .filter_map(|e| self.catalog.get(e.item))
            .map(|c| WatchedTitle { title: c.display_title(), year: c.year })
            .collect()
    }

    pub fn trace(&self, user: &UserHistory, k: usize) -> Result<WokTrace, RecommendError> {
        let fail = |e: &dyn std::fmt::Display| RecommendError::Failed(format!("user {}: {e}", user.user));
        let prompt = render_prompt(&self.history_titles(user), k, self.variant).map_err(|e| fail(&e))?;
        let response = self.client.complete(&prompt).map_err(|e| fail(&e))?;
        let watched: HashSet<ItemId> = user.item_set();
        let validated = validate_and_resolve(&parse_recommendations(&response), &watched, &self.index, k);
        Ok(WokTrace { prompt, response, validated })
    }
}

impl Recommender for WokRecommender {
    fn name(&self) -> &str {
        &self.name
    }

    fn recommend(&self, user: &UserHistory, k: usize) -> Result<Recommendation, RecommendError> {
        let v = self.trace(user, k)?.validated;
        Ok(Recommendation { slate: v.slate, unmatched: v.unmatched })
    }

    /// At most `max_in_flight` requests run at once.
    fn recommend_batch(&self, users: &[UserHistory], k: usize) -> Vec<Result<Recommendation, RecommendError>> {
        self.pool.install(|| users.par_iter().map(|u| self.recommend(u, k)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WokSpec {
    pub provider: ProviderConfig,
    #[serde(default)]
    pub variant: PromptVariant,
}

type CachedCatalog = (usize, Arc<Catalog>, Arc<TitleIndex>);

/// Builds one [`WokRecommender`] per fold, sharing the HTTP client and the title index.
pub struct WokFactory {
    variant: PromptVariant,
    client: Arc<ChatClient>,
    cached: Mutex<Option<CachedCatalog>>,
}

impl WokFactory {
    pub fn new(spec: WokSpec) -> Result<Self, ProviderError> {
        Ok(Self { variant: spec.variant, client: Arc::new(ChatClient::new(spec.provider)?), cached: Mutex::new(None) })
    }
}

impl RecommenderFactory for WokFactory {
    fn name(&self) -> String {
        wok_name(self.client.config(), self.variant)
    }

    fn build(&self, ctx: &TrainingContext<'_>) -> Result<Box<dyn Recommender>, RecommendError> {
        let key = ctx.catalog as *const Catalog as usize;
        let (catalog, index) = {
            let mut slot = self.cached.lock().expect("cache lock");
            match slot.as_ref() {
                Some((k, c, i)) if *k == key => (c.clone(), i.clone()),
                _ => {
                    let c = Arc::new(ctx.catalog.clone());
                    let i = Arc::new(c.title_index());
                    *slot = Some((key, c.clone(), i.clone()));
                    (c, i)
                }
            }
        };
        let rec = WokRecommender::with_parts(self.variant, self.client.clone(), catalog, index)
            .map_err(|e| RecommendError::Failed(e.to_string()))?;
        Ok(Box::new(rec))
    }
}
