use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use popbias::eval::{popularity_tilt_suite, BaselineSpec, EvalConfig, RecommenderFactory};
use popbias::recommenders::DEFAULT_NEIGHBORS;
use popbias_llm::{Dialect, PromptVariant, ProviderConfig, WokFactory, WokSpec};
use serde::{Deserialize, Serialize};

fn default_neighbors() -> usize {
    DEFAULT_NEIGHBORS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RecommenderConfig {
    Random {},
    TopPop {},
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
    /// `n` tilt recommenders with evenly spaced exponents over `[lo, hi]`.
    PopularityTiltSuite {
        n: usize,
        lo: f64,
        hi: f64,
    },
    Wok {
        #[serde(default)]
        variant: PromptVariant,
    },
}

fn standard_recommenders() -> Vec<RecommenderConfig> {
    vec![
        RecommenderConfig::Random {},
        RecommenderConfig::TopPop {},
        RecommenderConfig::ItemKnn { neighbors: DEFAULT_NEIGHBORS },
        RecommenderConfig::UserKnn { neighbors: DEFAULT_NEIGHBORS },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding `movies.dat` and `ratings.dat`.
    pub dir: PathBuf,
}

/// Contents of a `--config` TOML file. Relative paths are taken from the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub strict_parse: bool,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default = "standard_recommenders")]
    pub recommenders: Vec<RecommenderConfig>,
    #[serde(default)]
    pub provider: Option<ProviderConfig>,
    /// A separate TOML file with the provider table, instead of an inline `[provider]`.
    #[serde(default)]
    pub provider_file: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            seed: None,
            out: None,
            strict_parse: false,
            eval: EvalConfig::default(),
            recommenders: standard_recommenders(),
            provider: None,
            provider_file: None,
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strict_parse: bool,
    pub provider: Option<Dialect>,
    pub data: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).context("invalid config")?;
        if let Some(d) = cfg.data.as_mut() {
            rebase(base, &mut d.dir);
        }
        if let Some(o) = cfg.out.as_mut() {
            rebase(base, o);
        }
        if let Some(mut f) = cfg.provider_file.take() {
            ensure!(cfg.provider.is_none(), "give either [provider] or provider_file, not both");
            rebase(base, &mut f);
            let text = std::fs::read_to_string(&f).with_context(|| format!("cannot read {}", f.display()))?;
            cfg.provider =
                Some(toml::from_str(&text).with_context(|| format!("invalid provider file {}", f.display()))?);
        }
        if let Some(p) = cfg.provider.as_mut() {
            if let Some(dir) = p.stub_dir.as_mut() {
                rebase(base, dir);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if let Some(seed) = self.seed {
            self.eval.folds.seed = seed;
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        self.strict_parse |= o.strict_parse;
        if let Some(d) = o.provider {
            self.provider.get_or_insert_with(ProviderConfig::default).dialect = d;
        }
        if let Some(dir) = &o.data {
            self.data = Some(DataConfig { dir: dir.clone() });
        }
        if let Some(p) = self.provider.take() {
            self.provider = Some(p.with_key_from_env());
        }
    }

    pub fn data_dir(&self) -> Result<&Path> {
        match &self.data {
            Some(d) => Ok(&d.dir),
            None => bail!("no data directory: set [data] dir in the config or pass a path"),
        }
    }

    /// Checks everything that can be checked before any data is read.
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.recommenders.is_empty(), "no recommenders configured");
        ensure!(!self.eval.metrics.is_empty(), "no metrics configured");
        ensure!(self.eval.k >= 10, "eval.k must be at least 10, got {}", self.eval.k);
        ensure!(self.eval.folds.fold_count >= 2, "eval.folds.fold_count must be at least 2");
        let f = &self.eval.folds;
        ensure!(f.train_fraction > 0.0 && f.train_fraction < 1.0, "train_fraction must lie in (0, 1)");
        for r in &self.recommenders {
            match r {
                RecommenderConfig::ItemKnn { neighbors } | RecommenderConfig::UserKnn { neighbors } => {
                    ensure!(*neighbors > 0, "neighbors must be positive")
                }
                RecommenderConfig::PopularityTilt { beta } => ensure!(beta.is_finite(), "beta must be finite"),
                RecommenderConfig::PopularityTiltSuite { n, lo, hi } => {
                    ensure!(*n > 0 && lo.is_finite() && hi.is_finite(), "invalid popularity_tilt_suite")
                }
                RecommenderConfig::Wok { .. } => match &self.provider {
                    None => bail!("a wok recommender needs a [provider] table"),
                    Some(p) => p.validate()?,
                },
                _ => {}
            }
        }
        let factories = self.factories()?;
        let mut seen = HashSet::new();
        for f in &factories {
            ensure!(seen.insert(f.name()), "recommender {} is listed twice", f.name());
        }
        Ok(())
    }

    pub fn factories(&self) -> Result<Vec<Box<dyn RecommenderFactory>>> {
        let mut out: Vec<Box<dyn RecommenderFactory>> = Vec::new();
        for r in &self.recommenders {
            match r {
                RecommenderConfig::Random {} => out.push(Box::new(BaselineSpec::Random)),
                RecommenderConfig::TopPop {} => out.push(Box::new(BaselineSpec::TopPop)),
                RecommenderConfig::ItemKnn { neighbors } => {
                    out.push(Box::new(BaselineSpec::ItemKnn { neighbors: *neighbors }))
                }
                RecommenderConfig::UserKnn { neighbors } => {
                    out.push(Box::new(BaselineSpec::UserKnn { neighbors: *neighbors }))
                }
                RecommenderConfig::PopularityTilt { beta } => {
                    out.push(Box::new(BaselineSpec::PopularityTilt { beta: *beta }))
                }
                RecommenderConfig::PopularityTiltSuite { n, lo, hi } => {
                    for spec in popularity_tilt_suite(*n, *lo, *hi) {
                        out.push(Box::new(spec));
                    }
                }
                RecommenderConfig::Wok { variant } => {
                    let provider = self.provider.clone().context("a wok recommender needs a [provider] table")?;
                    out.push(Box::new(WokFactory::new(WokSpec { provider, variant: *variant })?));
                }
            }
        }
        Ok(out)
    }
}
