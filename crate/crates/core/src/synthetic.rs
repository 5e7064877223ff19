//! MovieLens-shaped synthetic data: heavy-tailed item popularity, genre clusters, user taste
//! profiles and half-star ratings. Used when the real dump is not at hand.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::catalog::{CatalogEntry, Interaction, ItemId, UserId};
use crate::distfit::sample_pareto;

const GENRES: [&str; 18] = [
    "Action",
    "Adventure",
    "Animation",
    "Children",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];
const ADJECTIVES: [&str; 30] = [
    "Silent",
    "Broken",
    "Golden",
    "Hidden",
    "Last",
    "Crimson",
    "Lonely",
    "Wild",
    "Frozen",
    "Burning",
    "Distant",
    "Secret",
    "Electric",
    "Savage",
    "Gentle",
    "Midnight",
    "Hollow",
    "Velvet",
    "Iron",
    "Paper",
    "Restless",
    "Shattered",
    "Northern",
    "Lucky",
    "Bitter",
    "Quiet",
    "Endless",
    "Scarlet",
    "Wandering",
    "Fallen",
];
const NOUNS: [&str; 30] = [
    "River",
    "Kingdom",
    "Stranger",
    "Garden",
    "Harbor",
    "Witness",
    "Empire",
    "Orchard",
    "Signal",
    "Frontier",
    "Promise",
    "Mirror",
    "Voyage",
    "Circus",
    "Highway",
    "Island",
    "Letter",
    "Machine",
    "Station",
    "Summer",
    "Winter",
    "Prophet",
    "Canyon",
    "Lantern",
    "Bridge",
    "Tide",
    "Crown",
    "Shadow",
    "Carnival",
    "Detective",
];
const PLACES: [&str; 12] = [
    "",
    " of Avalon",
    " in Paris",
    " of the North",
    " at Dawn",
    " in the Rain",
    " of Glass",
    " of Tomorrow",
    " in Winter",
    " of Fortune",
    " on Mars",
    " of the Deep",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    /// Pareto shape of the item attractiveness weights.
    pub popularity_shape: f64,
    /// Ratings per user are `min_ratings` plus a Pareto tail with this mean excess.
    pub min_ratings: usize,
    pub mean_extra_ratings: f64,
    pub max_ratings: usize,
    /// Dirichlet concentration of user genre tastes; small means focused users.
    pub taste_concentration: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_users: 6000,
            n_items: 3000,
            popularity_shape: 0.68,
            min_ratings: 20,
            mean_extra_ratings: 40.0,
            max_ratings: 600,
            taste_concentration: 0.25,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub movies: Vec<CatalogEntry>,
    pub ratings: Vec<Interaction>,
}

fn titles(n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut all: Vec<(usize, usize, usize)> = Vec::with_capacity(ADJECTIVES.len() * NOUNS.len() * PLACES.len());
    for a in 0..ADJECTIVES.len() {
        for b in 0..NOUNS.len() {
            for c in 0..PLACES.len() {
                all.push((a, b, c));
            }
        }
    }
    all.shuffle(rng);
    (0..n)
        .map(|i| {
            let (a, b, c) = all[i % all.len()];
            let base = format!("{} {}{}", ADJECTIVES[a], NOUNS[b], PLACES[c]);
            let base = if i >= all.len() { format!("{base} {}", i / all.len() + 1) } else { base };
            if rng.gen_bool(0.2) {
                format!("{base}, The")
            } else {
                base
            }
        })
        .collect()
}

/// Generates a dataset. Deterministic for a fixed config.
pub fn generate(cfg: &SyntheticConfig) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let names = titles(cfg.n_items, &mut rng);
    let weights: Vec<f64> = sample_pareto(&mut rng, cfg.popularity_shape, 1.0, cfg.n_items);
    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let genre_of: Vec<usize> = (0..cfg.n_items).map(|_| rng.gen_range(0..GENRES.len())).collect();
    let quality = Normal::new(0.0, 0.45).expect("valid normal");
    let item_quality: Vec<f64> = (0..cfg.n_items).map(|_| quality.sample(&mut rng)).collect();

    let movies: Vec<CatalogEntry> = (0..cfg.n_items)
        .map(|i| {
            let mut genres = vec![GENRES[genre_of[i]].to_owned()];
            if rng.gen_bool(0.3) {
                let g = GENRES[rng.gen_range(0..GENRES.len())];
                if g != genres[0] {
                    genres.push(g.to_owned());
                }
            }
            CatalogEntry {
                item: ItemId(i as u64 + 1),
                title: names[i].clone(),
                year: rng.gen_range(1950..=2008),
                genres,
            }
        })
        .collect();

    let taste = Gamma::new(cfg.taste_concentration, 1.0).expect("valid gamma");
    let user_bias = Normal::new(0.0, 0.35).expect("valid normal");
    let noise = Normal::new(0.0, 0.6).expect("valid normal");
    let extra_shape = 1.0 + 1.0 / (cfg.mean_extra_ratings / cfg.min_ratings as f64).max(0.05);
    let mut ratings = Vec::new();
    for u in 0..cfg.n_users {
        let mut prefs: Vec<f64> = (0..GENRES.len()).map(|_| taste.sample(&mut rng) + 1e-6).collect();
        let total: f64 = prefs.iter().sum();
        prefs.iter_mut().for_each(|p| *p /= total);
        let tail: Vec<f64> = sample_pareto(&mut rng, extra_shape, cfg.min_ratings as f64, 1);
        let n = (tail[0].round() as usize).clamp(cfg.min_ratings, cfg.max_ratings.min(cfg.n_items));
        // Gumbel top-n: sampling without replacement with probability proportional to
        // taste(genre) * weight(item)
        let mut keys: Vec<(f64, usize)> = (0..cfg.n_items)
            .map(|i| {
                let g = -(-(1.0 - rng.gen::<f64>()).ln()).ln();
                (prefs[genre_of[i]].ln() + log_w[i] + g, i)
            })
            .collect();
        keys.select_nth_unstable_by(n - 1, |a, b| b.0.partial_cmp(&a.0).expect("finite keys"));
        keys.truncate(n);
        keys.sort_by_key(|k| k.1);
        keys.shuffle(&mut rng);
        let bias = user_bias.sample(&mut rng);
        let mut ts = 956_703_932 + rng.gen_range(0..200_000_000i64);
        for (_, i) in keys {
            let affinity = 1.2 * (prefs[genre_of[i]] * GENRES.len() as f64).min(3.0).ln_1p();
            let raw = 2.6 + bias + item_quality[i] + affinity + noise.sample(&mut rng);
            let rating = ((raw * 2.0).round() / 2.0).clamp(0.5, 5.0);
            ratings.push(Interaction { user: UserId(u as u64 + 1), item: ItemId(i as u64 + 1), rating, timestamp: ts });
            ts += rng.gen_range(1..86_400 * 30);
        }
    }
    SyntheticData { movies, ratings }
}

fn fmt_rating(r: f64) -> String {
    if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

/// Writes `movies.dat` and `ratings.dat` in MovieLens 10M format into `dir`.
pub fn write_movielens(data: &SyntheticData, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut movies = io::BufWriter::new(fs::File::create(dir.join("movies.dat"))?);
    for m in &data.movies {
        writeln!(movies, "{}::{} ({})::{}", m.item, m.title, m.year, m.genres.join("|"))?;
    }
    movies.flush()?;
    let mut ratings = io::BufWriter::new(fs::File::create(dir.join("ratings.dat"))?);
    for r in &data.ratings {
        writeln!(ratings, "{}::{}::{}::{}", r.user, r.item, fmt_rating(r.rating), r.timestamp)?;
    }
    ratings.flush()
}
