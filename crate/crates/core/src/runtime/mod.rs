//! Signals, the bus they travel on, and the engines that turn them into
//! target values.

pub mod bridge;
pub mod bus;
pub mod coerce;
pub mod config;
pub mod engine;
pub mod policy;
pub mod value;

pub use bridge::Bridge;
pub use bus::{Bus, BusError, Subscription};
pub use coerce::{coerce_choice, coerce_comparison, coerce_literal, CoerceError};
pub use config::{ConfigError, EngineConfig};
pub use engine::{Engine, EngineError, EngineStats, Mode};
pub use policy::{AdaptationPolicy, PolicyOutcome};
pub use value::{BusMessage, TypedValue, ValueError};
