//! Random weighted model counting workloads and their event traces.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use resin_core::circuit::CircuitError;
use resin_core::grounder::{ChoiceKind, CompiledSource, Literal, WmcPolynomial};
use resin_core::lang::{GroundAtom, SignalType, SourceInfo};
use resin_core::runtime::{AdaptationPolicy, BusMessage, Engine, EngineConfig, Mode, TypedValue};
use resin_core::{ReactiveCircuit, SemiringInstance};
use thiserror::Error;

use crate::harness::{RateSchedule, Trace};

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("sources per model ({per_model}) exceeds the number of signals ({signals})")]
    TooManySourcesPerModel { per_model: usize, signals: usize },
    #[error("workload needs at least one signal, model and source per model")]
    Empty,
    #[error("rate bounds must satisfy 0 <= lo < hi, got [{0}, {1}]")]
    RateBounds(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorkload {
    pub n_signals: usize,
    pub models: usize,
    pub sources_per_model: usize,
    /// Rates are drawn from `U(rate_lo, rate_hi)`.
    pub rate_lo: f64,
    pub rate_hi: f64,
    /// Events per signal between rate resamples.
    pub resample_every: usize,
    pub seed: u64,
}

impl Default for SyntheticWorkload {
    fn default() -> Self {
        SyntheticWorkload {
            n_signals: 100,
            models: 1000,
            sources_per_model: 20,
            rate_lo: 0.0,
            rate_hi: 30.0,
            resample_every: 20,
            seed: 0,
        }
    }
}

impl SyntheticWorkload {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.n_signals == 0 || self.models == 0 || self.sources_per_model == 0 {
            return Err(WorkloadError::Empty);
        }
        if self.sources_per_model > self.n_signals {
            return Err(WorkloadError::TooManySourcesPerModel {
                per_model: self.sources_per_model,
                signals: self.n_signals,
            });
        }
        if !(self.rate_lo >= 0.0 && self.rate_lo < self.rate_hi) {
            return Err(WorkloadError::RateBounds(self.rate_lo, self.rate_hi));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Each model picks `sources_per_model` distinct signals with random signs.
    /// Duplicate models collapse, so the term count can fall short of `models`.
    pub fn polynomial(&self) -> Result<WmcPolynomial, WorkloadError> {
        self.validate()?;
        let mut rng = self.rng(0);
        let mut terms = BTreeSet::new();
        for _ in 0..self.models {
            let mut term: Vec<Literal> = sample(&mut rng, self.n_signals, self.sources_per_model)
                .into_iter()
                .map(|v| {
                    if rng.random_bool(0.5) {
                        Literal::pos(v)
                    } else {
                        Literal::neg(v)
                    }
                })
                .collect();
            term.sort();
            terms.insert(term);
        }
        Ok(WmcPolynomial {
            variables: (0..self.n_signals).map(|i| format!("s{i}")).collect(),
            terms: terms.into_iter().collect(),
        })
    }

    pub fn channels(&self) -> Vec<String> {
        (0..self.n_signals).map(|i| format!("/s{i}")).collect()
    }

    /// Non-stationary Poisson trace by thinning: each signal keeps a rate
    /// from `U(lo, hi)` for `resample_every` accepted events. Values are
    /// uniform probabilities.
    pub fn trace(&self, seconds: f64) -> Result<Trace, WorkloadError> {
        self.validate()?;
        let mut rng = self.rng(1);
        let channels = self.channels();
        let bound = Exp::new(self.rate_hi).expect("positive rate");
        let mut events = Vec::new();
        let mut segments = Vec::with_capacity(self.n_signals);
        for channel in &channels {
            let mut rate = rng.random_range(self.rate_lo..self.rate_hi);
            let mut seg = vec![(0.0, rate)];
            let mut accepted = 0;
            let mut t = 0.0;
            loop {
                t += bound.sample(&mut rng);
                if t >= seconds {
                    break;
                }
                if rng.random::<f64>() * self.rate_hi >= rate {
                    continue;
                }
                events.push(BusMessage::new(
                    channel.clone(),
                    TypedValue::Probability(rng.random()),
                    t,
                ));
                accepted += 1;
                if accepted % self.resample_every == 0 {
                    rate = rng.random_range(self.rate_lo..self.rate_hi);
                    seg.push((t, rate));
                }
            }
            segments.push(seg);
        }
        Ok(Trace::new(
            events,
            seconds,
            Some(RateSchedule::new(channels, segments)),
        ))
    }

    /// An engine over the generated polynomial, one Probability channel per
    /// signal.
    pub fn engine(&self, cfg: EngineConfig, mode: Mode) -> Result<Engine, WorkloadError> {
        let poly = self.polynomial()?;
        Ok(probability_engine(&poly, "/target", cfg, mode))
    }
}

/// Engine over `poly` where variable `i` reads the Probability channel `/{name_i}`.
pub fn probability_engine(
    poly: &WmcPolynomial,
    target: &str,
    cfg: EngineConfig,
    mode: Mode,
) -> Engine {
    let signals: Vec<SourceInfo> = poly
        .variables
        .iter()
        .map(|v| SourceInfo {
            atom: GroundAtom::new(v.clone(), vec![]),
            channel: format!("/{v}"),
            dtype: SignalType::Probability,
        })
        .collect();
    let sources = signals
        .iter()
        .enumerate()
        .map(|(i, s)| CompiledSource {
            name: s.atom.to_string(),
            channel: s.channel.clone(),
            dtype: SignalType::Probability,
            kind: ChoiceKind::Source(i),
            negated: poly.uses_negation(i),
        })
        .collect();
    Engine::from_parts(target.to_string(), signals, sources, poly, cfg, mode)
}

/// Homogeneous Poisson events with uniform probability values, one rate per
/// channel.
pub fn poisson_trace(channels: &[String], rates: &[f64], seconds: f64, seed: u64) -> Trace {
    assert_eq!(channels.len(), rates.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    for (channel, &rate) in channels.iter().zip(rates) {
        if rate <= 0.0 {
            continue;
        }
        let gap = Exp::new(rate).expect("positive rate");
        let mut t = gap.sample(&mut rng);
        while t < seconds {
            events.push(BusMessage::new(
                channel.clone(),
                TypedValue::Probability(rng.random()),
                t,
            ));
            t += gap.sample(&mut rng);
        }
    }
    let segments = rates.iter().map(|&r| vec![(0.0, r)]).collect();
    Trace::new(
        events,
        seconds,
        Some(RateSchedule::new(channels.to_vec(), segments)),
    )
}

/// Per-signal rates from a mixture of Gaussians, clamped to `[0, hi]`.
pub fn mixture_rates(n: usize, means: &[f64], stddev: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mean = means[rng.random_range(0..means.len())];
            let d = Normal::new(mean, stddev).expect("valid normal");
            d.sample(&mut rng).clamp(0.0, hi)
        })
        .collect()
}

/// Adapts a circuit over `poly` to fixed `rates` with width `h` until the
/// policy stops moving signals; returns `(memo nodes, layers)`.
pub fn settle(poly: &WmcPolynomial, rates: &[f64], h: f64) -> Result<(usize, usize), CircuitError> {
    let rc = settled_circuit(poly, rates, h)?;
    Ok((rc.memo_nodes(), rc.layers()))
}

/// Circuit adapted to fixed rates until the layout stops changing.
pub fn settled_circuit(
    poly: &WmcPolynomial,
    rates: &[f64],
    h: f64,
) -> Result<ReactiveCircuit, CircuitError> {
    let mut rc = ReactiveCircuit::from_polynomial(poly, SemiringInstance::Probability);
    for v in 0..poly.num_vars() {
        rc.set_literal_weights(v, 0.5, 0.5)?;
    }
    rc.evaluate_full()?;
    let mut policy = AdaptationPolicy::new(h, 1, poly.num_vars());
    for _ in 0..64 {
        if policy.evaluate(&mut rc, rates)?.moves() == 0 {
            break;
        }
    }
    Ok(rc)
}
