//! Kinematic drone scenario: drones hop between landing pads and publish
//! their pairwise distances as Gaussian estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resin_core::runtime::{BusMessage, TypedValue};
use resin_core::{check, compile, CompiledTarget, Engine, EngineConfig, Mode};
use thiserror::Error;

use crate::harness::{RateSchedule, Trace};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("need at least two drones, got {0}")]
    TooFewDrones(usize),
    #[error("need more pads than drones ({pads} pads, {drones} drones)")]
    TooFewPads { pads: usize, drones: usize },
    #[error("invalid scenario parameter: {0}")]
    Parameter(&'static str),
    #[error("generated program failed to compile: {0}")]
    Compile(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroneScenario {
    pub n_drones: usize,
    pub seed: u64,
    pub seconds: f64,
    pub speed: (f64, f64),
    /// Parking time between journeys, seconds.
    pub dwell: (f64, f64),
    /// Pads sit evenly on a circle.
    pub pads: usize,
    pub pad_ring_radius: f64,
    /// Positional noise per axis; a pair distance carries `sqrt(2)` times this.
    pub sigma_pos: f64,
    pub safety_radius: f64,
    pub tick_hz: f64,
}

impl Default for DroneScenario {
    fn default() -> Self {
        DroneScenario {
            n_drones: 5,
            seed: 0,
            seconds: 60.0,
            speed: (8.0, 12.0),
            dwell: (10.0, 30.0),
            pads: 7,
            pad_ring_radius: 50.0,
            sigma_pos: 5.0,
            safety_radius: 25.0,
            tick_hz: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseChange {
    pub time: f64,
    pub drone: usize,
    /// Whether a journey starts (otherwise it ends).
    pub departs: bool,
}

#[derive(Debug, Clone)]
pub struct DroneTrace {
    pub trace: Trace,
    pub phase_changes: Vec<PhaseChange>,
}

#[derive(Debug, Clone, Copy)]
enum State {
    Parked {
        pad: usize,
        until: f64,
    },
    Flying {
        from: [f64; 2],
        to: usize,
        start: f64,
        arrive: f64,
    },
}

pub fn pair_channel(i: usize, j: usize) -> String {
    format!("/drone{}_drone{}", i + 1, j + 1)
}

/// Pairs `(i, j)` with `i < j`, in channel order.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

impl DroneScenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_drones < 2 {
            return Err(ScenarioError::TooFewDrones(self.n_drones));
        }
        if self.pads <= self.n_drones {
            return Err(ScenarioError::TooFewPads {
                pads: self.pads,
                drones: self.n_drones,
            });
        }
        if !(self.speed.0 > 0.0 && self.speed.0 <= self.speed.1) {
            return Err(ScenarioError::Parameter("speed bounds"));
        }
        if !(self.dwell.0 > 0.0 && self.dwell.0 <= self.dwell.1) {
            return Err(ScenarioError::Parameter("dwell bounds"));
        }
        if !(self.sigma_pos > 0.0 && self.tick_hz > 0.0 && self.seconds > 0.0) {
            return Err(ScenarioError::Parameter(
                "noise, tick rate and duration must be positive",
            ));
        }
        Ok(())
    }

    pub fn pad(&self, k: usize) -> [f64; 2] {
        let a = std::f64::consts::TAU * k as f64 / self.pads as f64;
        [
            self.pad_ring_radius * a.cos(),
            self.pad_ring_radius * a.sin(),
        ]
    }

    /// The safety program over every drone pair.
    pub fn program(&self) -> String {
        let mut s = String::from("# Estimated pairwise distances\n");
        for (i, j) in pairs(self.n_drones) {
            s += &format!(
                "distance(drone_{}, drone_{}) <- source(\"{}\", Density).\n",
                i + 1,
                j + 1,
                pair_channel(i, j)
            );
        }
        s += &format!(
            "\n# Unsafe once two drones are closer than {} meters\nunsafe if distance(X, Y) < {:?}.\n\nunsafe -> target(\"/safety\").\n",
            self.safety_radius, self.safety_radius
        );
        s
    }

    pub fn compile(&self, max_sources: usize) -> Result<CompiledTarget, ScenarioError> {
        let tp = check(&self.program()).map_err(|d| {
            ScenarioError::Compile(
                d.iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            )
        })?;
        let mut targets =
            compile(&tp, max_sources).map_err(|e| ScenarioError::Compile(e.to_string()))?;
        Ok(targets.remove(0))
    }

    pub fn engine(&self, cfg: EngineConfig, mode: Mode) -> Result<Engine, ScenarioError> {
        let target = self.compile(cfg.max_sources)?;
        Ok(Engine::new(target, cfg, mode))
    }

    /// Simulates the scenario at `tick_hz`, publishing every pair each tick.
    pub fn simulate(&self) -> Result<DroneTrace, ScenarioError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.n_drones;
        let mut pads: Vec<usize> = (0..self.pads).collect();
        for k in (1..pads.len()).rev() {
            pads.swap(k, rng.random_range(0..=k));
        }
        // Each drone holds the pad it sits on or flies to.
        let mut held: Vec<usize> = pads[..n].to_vec();
        let mut state: Vec<State> = held
            .iter()
            .map(|&pad| State::Parked {
                pad,
                until: rng.random_range(self.dwell.0..=self.dwell.1),
            })
            .collect();

        let pairs = pairs(n);
        let channels: Vec<String> = pairs.iter().map(|&(i, j)| pair_channel(i, j)).collect();
        let mut segments: Vec<Vec<(f64, f64)>> = vec![Vec::new(); pairs.len()];
        let mut events = Vec::new();
        let mut phase_changes = Vec::new();
        let stddev = std::f64::consts::SQRT_2 * self.sigma_pos;
        let ticks = (self.seconds * self.tick_hz).ceil() as usize;

        for k in 0..ticks {
            let t = k as f64 / self.tick_hz;
            for d in 0..n {
                match state[d] {
                    State::Parked { pad, until } if t >= until => {
                        let free: Vec<usize> =
                            (0..self.pads).filter(|p| !held.contains(p)).collect();
                        let to = free[rng.random_range(0..free.len())];
                        let from = self.pad(pad);
                        let dist = norm(sub(self.pad(to), from));
                        let speed = rng.random_range(self.speed.0..=self.speed.1);
                        held[d] = to;
                        state[d] = State::Flying {
                            from,
                            to,
                            start: t,
                            arrive: t + dist / speed,
                        };
                        phase_changes.push(PhaseChange {
                            time: t,
                            drone: d,
                            departs: true,
                        });
                    }
                    State::Flying { to, arrive, .. } if t >= arrive => {
                        state[d] = State::Parked {
                            pad: to,
                            until: t + rng.random_range(self.dwell.0..=self.dwell.1),
                        };
                        phase_changes.push(PhaseChange {
                            time: t,
                            drone: d,
                            departs: false,
                        });
                    }
                    _ => {}
                }
            }
            let pos: Vec<[f64; 2]> = state
                .iter()
                .map(|s| match *s {
                    State::Parked { pad, .. } => self.pad(pad),
                    State::Flying {
                        from,
                        to,
                        start,
                        arrive,
                    } => {
                        let f = ((t - start) / (arrive - start)).clamp(0.0, 1.0);
                        let to = self.pad(to);
                        [
                            from[0] + f * (to[0] - from[0]),
                            from[1] + f * (to[1] - from[1]),
                        ]
                    }
                })
                .collect();
            let flying: Vec<bool> = state
                .iter()
                .map(|s| matches!(s, State::Flying { .. }))
                .collect();
            for (p, &(i, j)) in pairs.iter().enumerate() {
                let rate = if flying[i] || flying[j] {
                    self.tick_hz
                } else {
                    0.0
                };
                if segments[p].last().map(|&(_, r)| r) != Some(rate) {
                    segments[p].push((t, rate));
                }
                events.push(BusMessage::new(
                    channels[p].clone(),
                    TypedValue::Density {
                        mean: norm(sub(pos[i], pos[j])),
                        stddev,
                    },
                    t,
                ));
            }
        }
        let mut trace = Trace::new(
            events,
            self.seconds,
            Some(RateSchedule::new(channels, segments)),
        );
        trace.tick_every = Some(1.0 / self.tick_hz);
        Ok(DroneTrace {
            trace,
            phase_changes,
        })
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}
