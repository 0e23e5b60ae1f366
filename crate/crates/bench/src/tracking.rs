//! How well the rate filter places signals in their true frequency band.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resin_core::foc::{partition, FocConfig, FocTracker};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingConfig {
    pub events: usize,
    pub resample_every: usize,
    pub rate_hi: f64,
    /// Estimates this soon after a rate jump are excluded from band accuracy.
    pub transient: usize,
    pub foc: FocConfig,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            events: 10_000,
            resample_every: 20,
            rate_hi: 30.0,
            transient: 10,
            foc: FocConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub truth: f64,
    pub estimate: f64,
    /// Events since the last rate jump.
    pub age: usize,
}

/// One signal whose rate is redrawn from `U(0, rate_hi)` every
/// `resample_every` events; arrivals are spaced exactly `1/λ` apart.
pub fn track(seed: u64, cfg: &TrackingConfig) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tracker = FocTracker::new(cfg.foc);
    let mut out = Vec::with_capacity(cfg.events);
    let mut t = 0.0;
    let mut rate = 1.0;
    for k in 0..cfg.events {
        if k % cfg.resample_every == 0 {
            rate = rng.random_range(f64::MIN_POSITIVE..cfg.rate_hi);
        }
        t += 1.0 / rate;
        // Alternating weights make every arrival meaningful.
        tracker.offer(t, (k % 2) as f64);
        if let Some(estimate) = tracker.estimate() {
            out.push(Sample {
                truth: rate,
                estimate,
                age: k % cfg.resample_every,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandScore {
    pub h: f64,
    /// Share of post-transient estimates in the true band.
    pub in_band: f64,
    /// Mean absolute band error over all estimates.
    pub mae: f64,
}

pub fn score(samples: &[Sample], h: f64, transient: usize) -> BandScore {
    let band = |r: f64| partition(r, h).expect("positive width") as f64;
    let mut hits = 0usize;
    let mut settled = 0usize;
    let mut err = 0.0;
    for s in samples {
        let d = (band(s.estimate) - band(s.truth)).abs();
        err += d;
        if s.age >= transient {
            settled += 1;
            hits += usize::from(d == 0.0);
        }
    }
    BandScore {
        h,
        in_band: hits as f64 / settled.max(1) as f64,
        mae: err / samples.len().max(1) as f64,
    }
}

/// Scores averaged over `seeds` independent runs, one entry per width.
pub fn sweep(seeds: u64, widths: &[f64], cfg: &TrackingConfig) -> Vec<BandScore> {
    let runs: Vec<Vec<Sample>> = (0..seeds).map(|s| track(s, cfg)).collect();
    widths
        .iter()
        .map(|&h| {
            let scores: Vec<BandScore> = runs.iter().map(|r| score(r, h, cfg.transient)).collect();
            let n = scores.len() as f64;
            BandScore {
                h,
                in_band: scores.iter().map(|s| s.in_band).sum::<f64>() / n,
                mae: scores.iter().map(|s| s.mae).sum::<f64>() / n,
            }
        })
        .collect()
}
