//! Runs recorded traces through engines in each evaluation mode.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use resin_core::foc::partition;
use resin_core::runtime::{BusMessage, Engine, EngineError, EngineStats, Mode};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no evaluation mode selected")]
    NoModes,
    #[error("window length must be positive, got {0}")]
    Window(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{mode} published {got} values where {reference} published {expected}")]
    PublicationCount {
        mode: Mode,
        reference: Mode,
        got: usize,
        expected: usize,
    },
    #[error("{mode} disagrees with {reference} at event {event}: {a} vs {b}")]
    Disagreement {
        mode: Mode,
        reference: Mode,
        event: usize,
        a: f64,
        b: f64,
    },
}

/// Known piecewise-constant rates, `segments[i]` holding `(start, rate)`
/// pairs for `channels[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSchedule {
    pub channels: Vec<String>,
    pub segments: Vec<Vec<(f64, f64)>>,
}

impl RateSchedule {
    pub fn new(channels: Vec<String>, segments: Vec<Vec<(f64, f64)>>) -> Self {
        assert_eq!(channels.len(), segments.len());
        RateSchedule { channels, segments }
    }

    pub fn rate(&self, i: usize, t: f64) -> f64 {
        let seg = &self.segments[i];
        let k = seg.partition_point(|&(start, _)| start <= t);
        seg[k.saturating_sub(1)].1
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.channels
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect()
    }
}

/// A recorded input stream shared by every mode of a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Ordered by timestamp.
    pub events: Vec<BusMessage>,
    pub seconds: f64,
    pub truth: Option<RateSchedule>,
    /// Period of policy ticks between messages.
    pub tick_every: Option<f64>,
}

impl Trace {
    pub fn new(mut events: Vec<BusMessage>, seconds: f64, truth: Option<RateSchedule>) -> Self {
        events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        Trace {
            events,
            seconds,
            truth,
            tick_every: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSample {
    pub start: f64,
    pub eval_ops: u64,
    pub adaptation_ops: u64,
    pub wall_us: u64,
    pub memo_nodes: usize,
    pub layers: usize,
    pub partition_mae: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ModeRun {
    pub mode: Mode,
    pub stats: EngineStats,
    pub wall: Duration,
    /// `(event index, published value)`.
    pub publications: Vec<(usize, f64)>,
    pub windows: Vec<WindowSample>,
    /// `(time, lifts + drops)` for every policy round that moved something.
    pub migrations: Vec<(f64, u64)>,
    pub memo_nodes: usize,
    pub layers: usize,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub runs: Vec<ModeRun>,
    pub events: usize,
    pub seconds: f64,
    pub window: f64,
    pub max_disagreement: f64,
}

impl BenchResult {
    pub fn run(&self, mode: Mode) -> Option<&ModeRun> {
        self.runs.iter().find(|r| r.mode == mode)
    }

    /// Counted evaluation gain of `mode` over flat.
    pub fn gain(&self, mode: Mode) -> Option<f64> {
        let flat = self.run(Mode::Flat)?.stats.eval_ops as f64;
        let ops = self.run(mode)?.stats.eval_ops as f64;
        (ops > 0.0).then(|| flat / ops)
    }
}

/// Mean absolute band error of the engine's rate estimates against `truth`.
pub fn partition_mae(engine: &Engine, truth: &RateSchedule, now: f64) -> Option<f64> {
    let h = engine.config().h;
    let index = truth.index();
    let rates = engine.rates(now);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (atom, source) in engine.sources().iter().enumerate() {
        let Some(&i) = index.get(source.channel.as_str()) else {
            continue;
        };
        let est = partition(rates[atom], h).ok()? as f64;
        let actual = partition(truth.rate(i, now), h).ok()? as f64;
        sum += (est - actual).abs();
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn sample(engine: &Engine, trace: &Trace, start: f64, end: f64, wall: Duration) -> WindowSample {
    let stats = engine.stats();
    let rc = engine.circuit();
    WindowSample {
        start,
        eval_ops: stats.eval_ops,
        adaptation_ops: stats.adaptation_ops,
        wall_us: wall.as_micros() as u64,
        memo_nodes: rc.memo_nodes(),
        layers: rc.layers(),
        partition_mae: trace
            .truth
            .as_ref()
            .and_then(|t| partition_mae(engine, t, end)),
    }
}

/// Feeds the whole trace to one engine.
pub fn run_mode(mut engine: Engine, trace: &Trace, window: f64) -> Result<ModeRun, BenchError> {
    if !(window > 0.0) {
        return Err(BenchError::Window(window));
    }
    let mode = engine.mode();
    let mut wall = Duration::ZERO;
    let mut publications = Vec::new();
    let mut windows = Vec::new();
    let mut migrations = Vec::new();
    let mut next_window = window;
    let mut next_tick = trace.tick_every;
    let mut moved = 0u64;
    let mut note_moves = |engine: &Engine, t: f64, migrations: &mut Vec<(f64, u64)>| {
        let s = engine.stats();
        let total = s.lifts + s.drops;
        if total > moved {
            migrations.push((t, total - moved));
            moved = total;
        }
    };

    for (i, msg) in trace.events.iter().enumerate() {
        while next_window <= msg.timestamp {
            windows.push(sample(
                &engine,
                trace,
                next_window - window,
                next_window,
                wall,
            ));
            next_window += window;
        }
        if let (Some(t), Some(dt)) = (next_tick, trace.tick_every) {
            let mut t = t;
            while t <= msg.timestamp {
                let clock = Instant::now();
                engine.tick(t)?;
                wall += clock.elapsed();
                note_moves(&engine, t, &mut migrations);
                t += dt;
            }
            next_tick = Some(t);
        }
        let clock = Instant::now();
        let out = engine.step(msg)?;
        wall += clock.elapsed();
        if let Some(out) = out {
            let v = match out.value {
                resin_core::runtime::TypedValue::Probability(p) => p,
                _ => unreachable!("targets publish probabilities"),
            };
            publications.push((i, v));
        }
        note_moves(&engine, msg.timestamp, &mut migrations);
    }
    while next_window <= trace.seconds + 1e-9 {
        windows.push(sample(
            &engine,
            trace,
            next_window - window,
            next_window,
            wall,
        ));
        next_window += window;
    }
    // A trailing partial window.
    if next_window - window < trace.seconds - 1e-9 {
        windows.push(sample(
            &engine,
            trace,
            next_window - window,
            trace.seconds,
            wall,
        ));
    }
    Ok(ModeRun {
        mode,
        stats: engine.stats(),
        wall,
        publications,
        windows,
        migrations,
        memo_nodes: engine.circuit().memo_nodes(),
        layers: engine.circuit().layers(),
    })
}

/// Runs every mode over the same trace and checks that all of them publish
/// the same values within 1e-9.
pub fn run_benchmark<F>(
    mut make_engine: F,
    trace: &Trace,
    modes: &[Mode],
    window: f64,
) -> Result<BenchResult, BenchError>
where
    F: FnMut(Mode) -> Result<Engine, BenchError>,
{
    if modes.is_empty() {
        return Err(BenchError::NoModes);
    }
    let mut runs = Vec::with_capacity(modes.len());
    for &mode in modes {
        log::info!("running {mode} over {} events", trace.events.len());
        runs.push(run_mode(make_engine(mode)?, trace, window)?);
    }
    let mut max_disagreement: f64 = 0.0;
    let reference = &runs[0];
    for run in &runs[1..] {
        if run.publications.len() != reference.publications.len() {
            return Err(BenchError::PublicationCount {
                mode: run.mode,
                reference: reference.mode,
                got: run.publications.len(),
                expected: reference.publications.len(),
            });
        }
        for (&(i, a), &(j, b)) in reference.publications.iter().zip(&run.publications) {
            let d = (a - b).abs();
            if i != j || !(d <= 1e-9) {
                return Err(BenchError::Disagreement {
                    mode: run.mode,
                    reference: reference.mode,
                    event: i.min(j),
                    a,
                    b,
                });
            }
            max_disagreement = max_disagreement.max(d);
        }
    }
    Ok(BenchResult {
        runs,
        events: trace.events.len(),
        seconds: trace.seconds,
        window,
        max_disagreement,
    })
}

/// Parses a comma-separated mode list such as `flat,reactive`.
pub fn parse_modes(text: &str) -> Result<Vec<Mode>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let mode = Mode::ALL
            .into_iter()
            .find(|m| m.name() == part)
            .ok_or_else(|| format!("unknown mode `{part}`"))?;
        if !out.contains(&mode) {
            out.push(mode);
        }
    }
    if out.is_empty() {
        return Err("no evaluation mode selected".into());
    }
    Ok(out)
}
