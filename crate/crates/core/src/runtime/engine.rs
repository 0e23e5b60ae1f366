//! One engine per target: coerces incoming source values, filters them by the
//! change predicate, tracks their rates, updates the circuit and publishes.

use std::collections::HashMap;
use std::thread::JoinHandle;

use thiserror::Error;

use super::bus::{Bus, BusError};
use super::coerce::{coerce_choice, CoerceError};
use super::config::EngineConfig;
use super::policy::{AdaptationPolicy, PolicyOutcome};
use super::value::{BusMessage, TypedValue, ValueError};
use crate::circuit::{CircuitError, ReactiveCircuit};
use crate::foc::FocTracker;
use crate::grounder::{ChoiceKind, CompiledSource, CompiledTarget, Operand, WmcPolynomial};
use crate::lang::{SignalType, SourceInfo};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("channel `{0}` is not a source of this target")]
    UnknownChannel(String),
    #[error("channel `{channel}` expects {expected}, got {got}")]
    TypeMismatch {
        channel: String,
        expected: SignalType,
        got: SignalType,
    },
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error(transparent)]
    Coerce(#[from] CoerceError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("rate override has {got} entries, expected {expected}")]
    RateOverride { got: usize, expected: usize },
}

/// How the target value is recomputed after a meaningful update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Full evaluation of the unadapted circuit.
    Flat,
    /// Full evaluation of the adapted circuit.
    Adapted,
    /// Invalidation and queue evaluation of the adapted circuit.
    Reactive,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Flat, Mode::Adapted, Mode::Reactive];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Flat => "flat",
            Mode::Adapted => "adapted",
            Mode::Reactive => "reactive",
        }
    }

    fn adapts(self) -> bool {
        self != Mode::Flat
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub messages: u64,
    /// Per-atom meaningful updates.
    pub meaningful: u64,
    pub publications: u64,
    /// Applications spent computing published values.
    pub eval_ops: u64,
    pub adaptation_ops: u64,
    pub lifts: u64,
    pub drops: u64,
    /// Policy rounds that moved at least one signal.
    pub adaptations: u64,
}

#[derive(Debug)]
pub struct Engine {
    channel: String,
    signals_info: Vec<SourceInfo>,
    sources: Vec<CompiledSource>,
    rc: ReactiveCircuit,
    mode: Mode,
    cfg: EngineConfig,
    policy: AdaptationPolicy,
    trackers: Vec<FocTracker>,
    signals: Vec<Option<TypedValue>>,
    /// Channel to signal index.
    channels: HashMap<String, usize>,
    /// Signal index to the circuit atoms reading it.
    readers: Vec<Vec<usize>>,
    initialized: bool,
    rate_override: Option<Vec<f64>>,
    last_value: Option<f64>,
    stats: EngineStats,
}

impl Engine {
    pub fn new(target: CompiledTarget, cfg: EngineConfig, mode: Mode) -> Self {
        let poly = target.wmc_polynomial();
        Engine::from_parts(
            target.channel,
            target.signals,
            target.sources,
            &poly,
            cfg,
            mode,
        )
    }

    /// Builds an engine over an arbitrary polynomial whose variable `i` is
    /// `sources[i]`, reading the declared `signals`.
    pub fn from_parts(
        channel: String,
        signals: Vec<SourceInfo>,
        sources: Vec<CompiledSource>,
        poly: &WmcPolynomial,
        cfg: EngineConfig,
        mode: Mode,
    ) -> Self {
        assert_eq!(poly.num_vars(), sources.len(), "one source per variable");
        let rc = ReactiveCircuit::from_polynomial(poly, cfg.semiring);
        let n = sources.len();
        let mut readers = vec![Vec::new(); signals.len()];
        for (atom, s) in sources.iter().enumerate() {
            let inputs = match &s.kind {
                ChoiceKind::Source(i) => vec![*i],
                ChoiceKind::Comparison(c) => match c.rhs {
                    Operand::Source(r) if r != c.lhs => vec![c.lhs, r],
                    _ => vec![c.lhs],
                },
            };
            for i in inputs {
                readers[i].push(atom);
            }
        }
        let channels = (0..signals.len())
            .filter(|&i| !readers[i].is_empty())
            .map(|i| (signals[i].channel.clone(), i))
            .collect();
        Engine {
            policy: AdaptationPolicy::new(cfg.h, cfg.hysteresis, n),
            trackers: (0..n).map(|_| FocTracker::new(cfg.foc())).collect(),
            signals: vec![None; signals.len()],
            channels,
            readers,
            initialized: false,
            rate_override: None,
            last_value: None,
            stats: EngineStats::default(),
            channel,
            signals_info: signals,
            sources,
            rc,
            mode,
            cfg,
        }
    }

    pub fn target_channel(&self) -> &str {
        &self.channel
    }

    pub fn sources(&self) -> &[CompiledSource] {
        &self.sources
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn circuit(&self) -> &ReactiveCircuit {
        &self.rc
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn trackers(&self) -> &[FocTracker] {
        &self.trackers
    }

    pub fn last_value(&self) -> Option<f64> {
        self.last_value
    }

    /// Channels this engine consumes.
    pub fn source_channels(&self) -> Vec<String> {
        let mut v: Vec<String> = self.channels.keys().cloned().collect();
        v.sort();
        v
    }

    /// Replaces the filtered rate estimates with known rates, one per atom.
    pub fn set_rate_override(&mut self, rates: Option<Vec<f64>>) -> Result<(), EngineError> {
        if let Some(r) = &rates {
            if r.len() != self.trackers.len() {
                return Err(EngineError::RateOverride {
                    got: r.len(),
                    expected: self.trackers.len(),
                });
            }
        }
        self.rate_override = rates;
        Ok(())
    }

    /// Current rate per atom; atoms without any event count as silent.
    pub fn rates(&self, now: f64) -> Vec<f64> {
        match &self.rate_override {
            Some(r) => r.clone(),
            None => self
                .trackers
                .iter()
                .map(|t| t.rate_at(now).unwrap_or(0.0))
                .collect(),
        }
    }

    /// Processes one message; returns the target publication, if any.
    pub fn step(&mut self, msg: &BusMessage) -> Result<Option<BusMessage>, EngineError> {
        let &signal = self
            .channels
            .get(&msg.channel)
            .ok_or_else(|| EngineError::UnknownChannel(msg.channel.clone()))?;
        let expected = self.signals_info[signal].dtype;
        let got = msg.value.signal_type();
        if expected != got {
            return Err(EngineError::TypeMismatch {
                channel: msg.channel.clone(),
                expected,
                got,
            });
        }
        msg.value.validate()?;
        self.stats.messages += 1;

        // Coerce every reader before touching any state.
        let previous = self.signals[signal].replace(msg.value);
        let mut weights = Vec::with_capacity(self.readers[signal].len());
        for &atom in &self.readers[signal] {
            match coerce_choice(
                &self.sources[atom].kind,
                &self.signals,
                self.cfg.equality_tolerance,
            ) {
                Ok(w) => weights.push((atom, w)),
                Err(e) => {
                    self.signals[signal] = previous;
                    return Err(e.into());
                }
            }
        }

        let mut updated = Vec::new();
        for (atom, w) in weights {
            let Some(w) = w else { continue };
            if !self.trackers[atom].offer(msg.timestamp, w) {
                continue;
            }
            self.stats.meaningful += 1;
            updated.push(atom);
            self.rc.set_literal_weights(atom, w, 1.0 - w)?;
            if self.initialized && self.mode == Mode::Reactive {
                self.rc.invalidate(atom)?;
            }
        }
        if updated.is_empty() {
            return Ok(None);
        }

        if !self.initialized {
            if (0..self.trackers.len()).any(|a| self.trackers[a].last_event().is_none()) {
                return Ok(None);
            }
            self.initialized = true;
            let before = self.rc.ops().full;
            self.last_value = Some(self.rc.evaluate_full()?);
            self.stats.eval_ops += self.rc.ops().full - before;
        } else {
            let value = match self.mode {
                Mode::Flat | Mode::Adapted => {
                    let before = self.rc.ops().full;
                    let v = self.rc.evaluate_full()?;
                    self.stats.eval_ops += self.rc.ops().full - before;
                    v
                }
                Mode::Reactive => {
                    let (v, ops) = self.rc.react()?;
                    self.stats.eval_ops += ops;
                    v
                }
            };
            self.last_value = Some(value);
        }
        self.stats.publications += 1;
        let out = BusMessage::new(
            self.channel.clone(),
            TypedValue::Probability(self.last_value.expect("evaluated")),
            msg.timestamp,
        );
        self.adapt(msg.timestamp, Some(&updated))?;
        Ok(Some(out))
    }

    /// Runs the adaptation policy at time `now` without evaluating the target.
    /// Every signal counts as freshly estimated, so silent signals slow down.
    pub fn tick(&mut self, now: f64) -> Result<PolicyOutcome, EngineError> {
        self.adapt(now, None)
    }

    fn adapt(&mut self, now: f64, fresh: Option<&[usize]>) -> Result<PolicyOutcome, EngineError> {
        if !self.mode.adapts() || !self.initialized {
            return Ok(PolicyOutcome::default());
        }
        let rates = self.rates(now);
        let out = self.policy.evaluate_fresh(&mut self.rc, &rates, fresh)?;
        self.stats.adaptation_ops += out.ops;
        self.stats.lifts += out.lifts as u64;
        self.stats.drops += out.drops as u64;
        if out.moves() > 0 {
            self.stats.adaptations += 1;
            log::debug!(
                "{}: {} lifts, {} drops, {} memo nodes",
                self.channel,
                out.lifts,
                out.drops,
                self.rc.memo_nodes()
            );
        }
        Ok(out)
    }

    /// Runs the engine on its own thread, consuming the bus until it closes.
    pub fn spawn(mut self, bus: Bus) -> Result<JoinHandle<Engine>, EngineError> {
        let sub = bus.subscribe_many(&self.source_channels())?;
        bus.declare(&self.channel, SignalType::Probability)?;
        for &i in self.channels.values() {
            let s = &self.signals_info[i];
            bus.declare(&s.channel, s.dtype)?;
        }
        Ok(std::thread::spawn(move || {
            while let Some(msg) = sub.recv() {
                match self.step(&msg) {
                    Ok(Some(out)) => {
                        if let Err(e) = bus.publish(out) {
                            log::warn!("{}: cannot publish: {e}", self.channel);
                        }
                    }
                    Ok(None) => {}
                    Err(e) => log::warn!("{}: skipped message: {e}", self.channel),
                }
            }
            self
        }))
    }
}
