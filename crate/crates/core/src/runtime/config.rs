//! Engine configuration, read from a TOML key-value file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foc::FocConfig;
use crate::grounder::DEFAULT_MAX_SOURCES;
use crate::semiring::SemiringInstance;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// All keys are optional; see `Default` for the values used when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Partition width in Hz.
    pub h: f64,
    /// Change threshold in weight space.
    pub epsilon: f64,
    pub kalman_q: [f64; 2],
    pub kalman_r: f64,
    pub kalman_x0: [f64; 2],
    pub kalman_p0: [f64; 2],
    pub kalman_delta_t: f64,
    /// Smallest inter-arrival estimate in seconds.
    pub kalman_floor: f64,
    /// Consecutive agreeing estimates of a signal before it changes band.
    pub hysteresis: u32,
    pub max_sources: usize,
    pub queue_capacity: usize,
    /// Half width of the interval used for `==` on densities; also the
    /// tolerance of `==` on numbers.
    pub equality_tolerance: f64,
    pub semiring: SemiringInstance,
    pub bridge_address: String,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let foc = FocConfig::default();
        EngineConfig {
            h: 5.0,
            epsilon: foc.epsilon,
            kalman_q: foc.q,
            kalman_r: foc.r,
            kalman_x0: foc.x0,
            kalman_p0: foc.p0,
            kalman_delta_t: foc.delta_t,
            kalman_floor: foc.floor,
            hysteresis: 3,
            max_sources: DEFAULT_MAX_SOURCES,
            queue_capacity: super::bus::DEFAULT_QUEUE_CAPACITY,
            equality_tolerance: 1e-3,
            semiring: SemiringInstance::Probability,
            bridge_address: "127.0.0.1:7878".into(),
        }
    }
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: EngineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.h > 0.0) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if self.hysteresis < 1 {
            return bad("hysteresis must be at least 1".into());
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if !(self.kalman_r > 0.0) || self.kalman_q.iter().any(|q| !(*q >= 0.0)) {
            return bad("kalman noise must be nonnegative with r > 0".into());
        }
        if !(self.kalman_floor > 0.0) || !(self.kalman_delta_t > 0.0) {
            return bad("kalman_floor and kalman_delta_t must be positive".into());
        }
        if self.max_sources == 0 || self.max_sources > 63 {
            return bad(format!(
                "max_sources must be in 1..=63, got {}",
                self.max_sources
            ));
        }
        Ok(())
    }

    pub fn foc(&self) -> FocConfig {
        FocConfig {
            q: self.kalman_q,
            r: self.kalman_r,
            x0: self.kalman_x0,
            p0: self.kalman_p0,
            delta_t: self.kalman_delta_t,
            floor: self.kalman_floor,
            epsilon: self.epsilon,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
