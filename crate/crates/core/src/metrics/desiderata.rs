//! Property checks of a metric against the five desiderata.
//!
//! Four desiderata are checked on small perturbation fixtures: a recommendation profile,
//! a user profile, and an increment `epsilon` added to one item's popularity. The
//! well-behaved desideratum is checked by resampling profiles from a Pareto distribution.
//!
//! A desideratum holds for a metric on a battery of fixtures iff it holds on every fixture
//! the metric can be evaluated on; the first counterexample is kept as the witness.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{gini_index, herfindahl_index, spearman_rho, Aggregation, MetricError, MetricId, Transform};
use crate::catalog::ItemId;
use crate::distfit::sample_pareto;
use crate::Scalar;

/// Absolute tolerance for "exactly zero" checks.
pub const ZERO_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Desideratum {
    WellBehaved,
    ZeroCentered,
    AntiSymmetric,
    LongTailSensitive,
    Monotonic,
}

impl Desideratum {
    pub const ALL: [Desideratum; 5] = [
        Desideratum::WellBehaved,
        Desideratum::ZeroCentered,
        Desideratum::AntiSymmetric,
        Desideratum::LongTailSensitive,
        Desideratum::Monotonic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Desideratum::WellBehaved => "well behaved",
            Desideratum::ZeroCentered => "zero centered",
            Desideratum::AntiSymmetric => "anti symmetric",
            Desideratum::LongTailSensitive => "long tail sensitivity",
            Desideratum::Monotonic => "monotonicity",
        }
    }
}

impl fmt::Display for Desideratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which recommended item(s) the `epsilon` increment is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbTarget {
    Item(usize),
    /// Every recommended item at once (a uniform lift).
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationFixture<T> {
    pub name: String,
    pub recommender_scores: Vec<T>,
    pub user_scores: Vec<T>,
    pub epsilon: T,
    pub target: PerturbTarget,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub resamples: usize,
    pub size: usize,
    pub shape: f64,
    /// Required ratio of dispersion at `4 * size` over dispersion at `size`.
    pub contraction: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { resamples: 200, size: 50, shape: 0.68, contraction: 0.65, seed: 7 }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum CheckInput<'a, T> {
    Fixture(&'a PerturbationFixture<T>),
    Sampling(&'a SamplingConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckVerdict {
    pub desideratum: Desideratum,
    pub metric: MetricId,
    pub passed: bool,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesiderataError {
    #[error("cannot check {desideratum} for {metric}: {reason}")]
    NotConstructible { metric: MetricId, desideratum: Desideratum, reason: String },
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
}

impl<T: Scalar> PerturbationFixture<T> {
    pub fn new(name: &str, recommender: &[f64], user: &[f64], epsilon: f64, target: PerturbTarget) -> Self {
        Self {
            name: name.to_owned(),
            recommender_scores: recommender.iter().map(|&v| T::lit(v)).collect(),
            user_scores: user.iter().map(|&v| T::lit(v)).collect(),
            epsilon: T::lit(epsilon),
            target,
        }
    }

    fn validate(&self) -> Result<(), DesiderataError> {
        if !(self.epsilon > T::zero()) {
            return Err(DesiderataError::InvalidFixture("epsilon must be positive".into()));
        }
        if self.recommender_scores.is_empty() || self.user_scores.is_empty() {
            return Err(DesiderataError::InvalidFixture("profiles must be non-empty".into()));
        }
        if self.recommender_scores.iter().chain(&self.user_scores).any(|s| !(*s >= T::one())) {
            return Err(DesiderataError::InvalidFixture("all scores must be >= 1".into()));
        }
        if let PerturbTarget::Item(i) = self.target {
            if i >= self.recommender_scores.len() {
                return Err(DesiderataError::InvalidFixture(format!("target {i} out of range")));
            }
        }
        Ok(())
    }
}

/// Popularity world built from a fixture: recommended items are `0..m`, user items follow.
/// For PRU the user profile also holds the recommended items, since PRU only looks at the
/// items both profiles share.
struct World<T> {
    phi: BTreeMap<ItemId, T>,
    r: Vec<ItemId>,
    u: Vec<ItemId>,
}

impl<T: Scalar> World<T> {
    fn build(f: &PerturbationFixture<T>, metric: MetricId) -> Self {
        let m = f.recommender_scores.len() as u64;
        let mut phi = BTreeMap::new();
        let r: Vec<ItemId> = (0..m).map(ItemId).collect();
        for (&item, &s) in r.iter().zip(&f.recommender_scores) {
            phi.insert(item, s);
        }
        let mut u = Vec::new();
        if metric == MetricId::Pru {
            u.extend(&r);
        }
        for (j, &s) in f.user_scores.iter().enumerate() {
            let item = ItemId(m + j as u64);
            phi.insert(item, s);
            u.push(item);
        }
        World { phi, r, u }
    }

    fn scored(&self, items: &[ItemId]) -> Vec<(ItemId, T)> {
        items.iter().map(|i| (*i, self.phi[i])).collect()
    }

    fn eval(&self, metric: MetricId, r: &[ItemId], u: &[ItemId]) -> Result<T, MetricError> {
        metric.evaluate_scored(&self.scored(r), &self.scored(u))
    }

    fn bumped(&self, items: &[ItemId], eps: T) -> Self {
        let mut phi = self.phi.clone();
        for i in items {
            *phi.get_mut(i).expect("item in world") = phi[i] + eps;
        }
        World { phi, r: self.r.clone(), u: self.u.clone() }
    }
}

fn not_constructible(metric: MetricId, d: Desideratum, reason: impl Into<String>) -> DesiderataError {
    DesiderataError::NotConstructible { metric, desideratum: d, reason: reason.into() }
}

fn fmt_scores<T: Scalar>(s: &[T]) -> String {
    let parts: Vec<String> = s.iter().map(|v| format!("{v}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Runs one desideratum check on one input.
pub fn check_desideratum<T: Scalar>(
    metric: MetricId,
    d: Desideratum,
    input: CheckInput<'_, T>,
) -> Result<CheckVerdict, DesiderataError> {
    let verdict = |passed: bool, witness: String| CheckVerdict { desideratum: d, metric, passed, witness };
    let fixture = match (d, input) {
        (Desideratum::WellBehaved, CheckInput::Sampling(cfg)) => {
            let (passed, witness) = well_behaved::<T>(metric, cfg)?;
            return Ok(verdict(passed, witness));
        }
        (Desideratum::WellBehaved, CheckInput::Fixture(_)) => {
            return Err(not_constructible(metric, d, "needs a sampling configuration"))
        }
        (_, CheckInput::Sampling(_)) => return Err(not_constructible(metric, d, "needs a perturbation fixture")),
        (_, CheckInput::Fixture(f)) => f,
    };
    fixture.validate()?;
    let world = World::build(fixture, metric);
    let eval = |w: &World<T>, r: &[ItemId], u: &[ItemId]| {
        w.eval(metric, r, u).map_err(|e| not_constructible(metric, d, e.to_string()))
    };
    let tol = T::lit(ZERO_TOLERANCE);
    let (r, u) = (&world.r, &world.u);

    match d {
        Desideratum::WellBehaved => unreachable!(),
        Desideratum::ZeroCentered => {
            let v = eval(&world, r, r)?;
            Ok(verdict(v.abs() < tol, format!("M(r, r) = {v} for r = {}", fmt_scores(&fixture.recommender_scores))))
        }
        Desideratum::AntiSymmetric => {
            let ru = eval(&world, r, u)?;
            let ur = eval(&world, u, r)?;
            Ok(verdict((ru + ur).abs() < tol, format!("M(r, u) = {ru} vs M(u, r) = {ur}")))
        }
        Desideratum::LongTailSensitive => {
            let s = &fixture.recommender_scores;
            let (lo, hi) = extremes(s).ok_or_else(|| {
                not_constructible(metric, d, "recommendation needs a unique least and most popular item")
            })?;
            let next_up = s.iter().enumerate().filter(|&(i, _)| i != lo).map(|(_, &v)| v).fold(T::infinity(), T::min);
            if !(s[lo] + fixture.epsilon < next_up) {
                return Err(not_constructible(metric, d, "epsilon would reorder the least popular item"));
            }
            let base = eval(&world, r, u)?;
            let d_low = eval(&world.bumped(&[r[lo]], fixture.epsilon), r, u)? - base;
            let d_high = eval(&world.bumped(&[r[hi]], fixture.epsilon), r, u)? - base;
            let passed = d_low.abs() - d_high.abs() > T::noise_floor(base);
            Ok(verdict(
                passed,
                format!(
                    "|dM| = {} at least popular ({}) vs {} at most popular ({})",
                    d_low.abs(),
                    s[lo],
                    d_high.abs(),
                    s[hi]
                ),
            ))
        }
        Desideratum::Monotonic => {
            let targets: Vec<ItemId> = match fixture.target {
                PerturbTarget::Item(i) => vec![r[i]],
                PerturbTarget::All => r.clone(),
            };
            let base = eval(&world, r, u)?;
            let delta = eval(&world.bumped(&targets, fixture.epsilon), r, u)? - base;
            let what = match fixture.target {
                PerturbTarget::Item(i) => format!("score {} + {}", fixture.recommender_scores[i], fixture.epsilon),
                PerturbTarget::All => format!("all scores + {}", fixture.epsilon),
            };
            let passed = delta > T::noise_floor(base);
            let witness = if !passed && delta.abs() <= T::noise_floor(base) {
                format!("{} unchanged under {what} on r = {}", metric, fmt_scores(&fixture.recommender_scores))
            } else {
                format!("dM = {delta} under {what} on r = {}", fmt_scores(&fixture.recommender_scores))
            };
            Ok(verdict(passed, witness))
        }
    }
}

/// Indices of the unique minimum and unique maximum, if both exist and differ.
fn extremes<T: Scalar>(s: &[T]) -> Option<(usize, usize)> {
    let min = s.iter().copied().fold(T::infinity(), T::min);
    let max = s.iter().copied().fold(T::neg_infinity(), T::max);
    let lo: Vec<usize> = (0..s.len()).filter(|&i| s[i] == min).collect();
    let hi: Vec<usize> = (0..s.len()).filter(|&i| s[i] == max).collect();
    (min < max && lo.len() == 1 && hi.len() == 1).then(|| (lo[0], hi[0]))
}

fn iqr(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (i, frac) = (pos.floor() as usize, pos.fract());
        if i + 1 < v.len() {
            v[i] + frac * (v[i + 1] - v[i])
        } else {
            v[i]
        }
    };
    q(0.75) - q(0.25)
}

/// The per-profile aggregate a metric compares, on one sampled profile.
fn profile_aggregate<T: Scalar>(metric: MetricId, sample: &[T], rng: &mut ChaCha8Rng) -> Result<T, MetricError> {
    let def = metric.definition();
    match (def.transform, def.aggregation) {
        (Transform::Identity, Aggregation::Mean) => Ok(sample.iter().copied().sum::<T>() / T::from_count(sample.len())),
        (Transform::Log, Aggregation::Mean) => {
            Ok(sample.iter().map(|x| x.ln()).sum::<T>() / T::from_count(sample.len()))
        }
        (Transform::Share, Aggregation::Gini) => gini_index(sample),
        (Transform::Share, Aggregation::SumOfSquares) => herfindahl_index(sample),
        // rank correlation of popularity against an arbitrary recommender ranking
        _ => {
            let mut slots: Vec<T> = (1..=sample.len()).map(T::from_count).collect();
            slots.shuffle(rng);
            spearman_rho(sample, &slots)
        }
    }
}

fn well_behaved<T: Scalar>(metric: MetricId, cfg: &SamplingConfig) -> Result<(bool, String), DesiderataError> {
    let d = Desideratum::WellBehaved;
    if cfg.resamples < 4 || cfg.size < 2 {
        return Err(not_constructible(metric, d, "need >= 4 resamples of size >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dispersion = |n: usize| -> Result<f64, DesiderataError> {
        let mut stats = Vec::with_capacity(cfg.resamples);
        for _ in 0..cfg.resamples {
            let sample: Vec<T> = sample_pareto(&mut rng, cfg.shape, 1.0, n);
            let v = profile_aggregate(metric, &sample, &mut rng)
                .map_err(|e| not_constructible(metric, d, e.to_string()))?;
            stats.push(v.to_f64_lossy());
        }
        Ok(iqr(stats))
    };
    let small = dispersion(cfg.size)?;
    let large = dispersion(4 * cfg.size)?;
    let ratio = large / small;
    let contracts = ratio.is_finite() && ratio <= cfg.contraction;
    let bounded = metric.definition().bounded_aggregate();
    let witness = format!(
        "IQR ratio {ratio:.3} between profile sizes {} and {} (need <= {}); bounded aggregate: {}",
        4 * cfg.size,
        cfg.size,
        cfg.contraction,
        if bounded { "yes" } else { "no" }
    );
    Ok((contracts || bounded, witness))
}

/// Fixtures covering heavy-tailed, near-uniform and flat profiles.
pub fn default_battery<T: Scalar>() -> Vec<PerturbationFixture<T>> {
    vec![
        PerturbationFixture::new(
            "heavy-tail",
            &[3.0, 10.0, 40.0, 250.0, 2000.0],
            &[5.0, 20.0, 80.0, 600.0],
            0.5,
            PerturbTarget::Item(0),
        ),
        PerturbationFixture::new(
            "near-uniform",
            &[10.0, 11.0, 12.0, 15.0],
            &[8.0, 9.0, 30.0],
            0.5,
            PerturbTarget::Item(3),
        ),
        PerturbationFixture::new("flat-lift", &[4.0, 4.0, 4.0, 4.0], &[1.0, 8.0], 0.5, PerturbTarget::All),
        PerturbationFixture::new("doubled-average", &[2.0, 2.0], &[1.0, 1.0], 0.5, PerturbTarget::Item(0)),
    ]
}

#[derive(Debug, Clone)]
pub struct VerdictGrid {
    pub metrics: Vec<MetricId>,
    pub verdicts: Vec<CheckVerdict>,
}

impl VerdictGrid {
    pub fn get(&self, metric: MetricId, d: Desideratum) -> Option<&CheckVerdict> {
        self.verdicts.iter().find(|v| v.metric == metric && v.desideratum == d)
    }

    /// Plain-text grid: one row per desideratum, one column per metric.
    pub fn render(&self) -> String {
        let mut out = format!("{:<24}", "desideratum");
        for m in &self.metrics {
            out.push_str(&format!("{:>17}", m.as_str()));
        }
        out.push('\n');
        for d in Desideratum::ALL {
            out.push_str(&format!("{:<24}", d.label()));
            for m in &self.metrics {
                let mark = match self.get(*m, d) {
                    Some(v) if v.passed => "✓",
                    Some(_) => "✗",
                    None => "?",
                };
                out.push_str(&format!("{mark:>17}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Checks every desideratum for every metric: the well-behaved desideratum by sampling,
/// the rest over the fixture battery.
pub fn check_grid<T: Scalar>(
    metrics: &[MetricId],
    battery: &[PerturbationFixture<T>],
    sampling: &SamplingConfig,
) -> Result<VerdictGrid, DesiderataError> {
    let mut verdicts = Vec::new();
    for &metric in metrics {
        for d in Desideratum::ALL {
            if d == Desideratum::WellBehaved {
                verdicts.push(check_desideratum::<T>(metric, d, CheckInput::Sampling(sampling))?);
                continue;
            }
            let mut applicable = 0;
            let mut failure = None;
            for f in battery {
                match check_desideratum(metric, d, CheckInput::Fixture(f)) {
                    Ok(v) => {
                        applicable += 1;
                        if !v.passed && failure.is_none() {
                            failure = Some(format!("{}: {}", f.name, v.witness));
                        }
                    }
                    Err(DesiderataError::NotConstructible { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            if applicable == 0 {
                return Err(not_constructible(metric, d, "no fixture in the battery applies"));
            }
            let passed = failure.is_none();
            let witness = failure.unwrap_or_else(|| format!("holds on {applicable} fixture(s)"));
            verdicts.push(CheckVerdict { desideratum: d, metric, passed, witness });
        }
    }
    Ok(VerdictGrid { metrics: metrics.to_vec(), verdicts })
}
