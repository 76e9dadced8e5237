//! Seeded synthetic marketplaces with skewed provider sizes and quality.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::domain::{Arrival, ArrivalSchedule, Dataset, PreferenceStore, ProviderCatalog};
use crate::error::{Error, Result};

// independent random streams per component
const STREAM_OWNERSHIP: u64 = 1;
const STREAM_SCORES: u64 = 2;
const STREAM_TRAFFIC: u64 = 3;
const STREAM_ARRIVALS: u64 = 4;

/// Distribution of base relevance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreDistribution {
    Uniform,
    /// Beta(2, 5): most items mildly relevant, a few strongly.
    BetaSkewed,
}

/// Shape of per-interval traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficPattern {
    Constant,
    /// `1 + 0.5 sin(2 pi (n - 1) / N)`.
    Sinusoidal,
    /// Constant with random intervals at triple load.
    Bursty,
}

macro_rules! named_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(Error::Validation(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"), s
                    ))),
                }
            }
        }
    };
}

named_enum!(ScoreDistribution { Uniform => "uniform", BetaSkewed => "beta-skewed" });
named_enum!(TrafficPattern { Constant => "constant", Sinusoidal => "sinusoidal", Bursty => "bursty" });

/// Parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    pub providers: usize,
    pub intervals: usize,
    /// Total arrivals; defaults to one per user.
    pub arrivals: Option<usize>,
    pub score_distribution: ScoreDistribution,
    /// Zipf exponent of provider catalog sizes.
    pub provider_size_skew: f64,
    /// Score bonus of the largest provider over the smallest.
    pub quality_offset: f64,
    /// Multiplier applied to every score.
    pub score_scale: f64,
    pub traffic_pattern: TrafficPattern,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            users: 1000,
            items: 500,
            providers: 20,
            intervals: 8,
            arrivals: None,
            score_distribution: ScoreDistribution::BetaSkewed,
            provider_size_skew: 1.0,
            quality_offset: 0.2,
            score_scale: 1.0,
            traffic_pattern: TrafficPattern::Sinusoidal,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.users == 0 || self.items == 0 || self.providers == 0 || self.intervals == 0 {
            return fail("users, items, providers and intervals must all be at least 1".into());
        }
        if self.providers > self.items {
            return fail(format!("{} providers cannot own {} items", self.providers, self.items));
        }
        if !(self.provider_size_skew >= 0.0 && self.provider_size_skew.is_finite()) {
            return fail(format!("size skew {} must be non-negative", self.provider_size_skew));
        }
        if !(0.0..=1.0).contains(&self.quality_offset) {
            return fail(format!("quality offset {} outside [0, 1]", self.quality_offset));
        }
        if !(self.score_scale > 0.0 && self.score_scale <= 1.0) {
            return fail(format!("score scale {} outside (0, 1]", self.score_scale));
        }
        if self.arrivals == Some(0) {
            return fail("arrivals must be at least 1".into());
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Splits `total` proportionally to `weights` by largest remainders; ties
/// favour the lower index.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Catalog sizes: one item each plus a Zipf share of the rest.
pub fn provider_sizes(items: usize, providers: usize, skew: f64) -> Vec<usize> {
    let weights: Vec<f64> = (1..=providers).map(|r| (r as f64).powf(-skew)).collect();
    apportion(items - providers, &weights).into_iter().map(|c| c + 1).collect()
}

/// Users per interval.
pub fn traffic(total: usize, intervals: usize, pattern: TrafficPattern, rng: &mut impl Rng) -> Vec<usize> {
    let weights: Vec<f64> = match pattern {
        TrafficPattern::Constant => vec![1.0; intervals],
        TrafficPattern::Sinusoidal => (0..intervals)
            .map(|n| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * n as f64 / intervals as f64).sin())
            .collect(),
        TrafficPattern::Bursty => (0..intervals)
            .map(|_| if rng.random_bool(0.25) { 3.0 } else { 1.0 })
            .collect(),
    };
    apportion(total, &weights)
}

fn id(prefix: char, i: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len();
    format!("{prefix}{i:0width$}")
}

/// Scores, catalog and arrivals described by `spec`.
pub fn generate(spec: &SyntheticSpec) -> Result<(PreferenceStore, ProviderCatalog, ArrivalSchedule)> {
    spec.validate()?;
    let provider_ids: Vec<String> = (0..spec.providers).map(|p| id('p', p, spec.providers)).collect();
    let item_ids: Vec<String> = (0..spec.items).map(|i| id('i', i, spec.items)).collect();
    let user_ids: Vec<String> = (0..spec.users).map(|u| id('u', u, spec.users)).collect();

    let mut rng = spec.rng(STREAM_OWNERSHIP);
    let mut owners: Vec<usize> = provider_sizes(spec.items, spec.providers, spec.provider_size_skew)
        .into_iter()
        .enumerate()
        .flat_map(|(p, n)| std::iter::repeat_n(p, n))
        .collect();
    owners.shuffle(&mut rng);
    let catalog = ProviderCatalog::from_pairs(
        item_ids.iter().zip(&owners).map(|(i, &p)| (i.as_str(), provider_ids[p].as_str())),
    )?;

    // provider 0 is the largest and gets the full offset
    let denom = (spec.providers.max(2) - 1) as f64;
    let offsets: Vec<f64> = (0..spec.providers)
        .map(|p| spec.quality_offset * (1.0 - p as f64 / denom))
        .collect();
    let mut rng = spec.rng(STREAM_SCORES);
    let beta = Beta::new(2.0, 5.0).expect("valid shape");
    let mut builder = PreferenceStore::builder();
    for u in &user_ids {
        for (i, item) in item_ids.iter().enumerate() {
            let base = match spec.score_distribution {
                ScoreDistribution::Uniform => rng.random::<f64>(),
                ScoreDistribution::BetaSkewed => beta.sample(&mut rng),
            };
            builder.insert(u, item, spec.score_scale * (base + offsets[owners[i]]).min(1.0))?;
        }
    }

    let total = spec.arrivals.unwrap_or(spec.users);
    let counts = traffic(total, spec.intervals, spec.traffic_pattern, &mut spec.rng(STREAM_TRAFFIC));
    let mut rng = spec.rng(STREAM_ARRIVALS);
    let mut order: Vec<usize> = Vec::with_capacity(total);
    while order.len() < total {
        let mut round: Vec<usize> = (0..spec.users).collect();
        round.shuffle(&mut rng);
        order.extend(round);
    }
    order.truncate(total);
    let mut arrivals = Vec::with_capacity(total);
    let mut next = order.into_iter();
    for (n, &c) in counts.iter().enumerate() {
        for u in next.by_ref().take(c) {
            arrivals.push(Arrival { interval: n + 1, user: user_ids[u].clone() });
        }
    }
    let schedule = ArrivalSchedule::new(arrivals, spec.intervals)?;
    Ok((builder.build(), catalog, schedule))
}

/// [`generate`] assembled into a validated [`Dataset`].
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    let (store, catalog, schedule) = generate(spec)?;
    Dataset::new(store, catalog, schedule)
}
