use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::SignalType;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueError {
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("density standard deviation must be positive, got {0}")]
    StdDev(f64),
    #[error("non-finite value")]
    NonFinite,
    #[error("message for `{channel}` is missing field `{field}`")]
    MissingField {
        channel: String,
        field: &'static str,
    },
}

/// A signal value as carried on the bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TypedValue {
    Boolean(bool),
    Number(f64),
    Probability(f64),
    /// Univariate Gaussian.
    Density {
        mean: f64,
        stddev: f64,
    },
}

impl TypedValue {
    pub fn signal_type(&self) -> SignalType {
        match self {
            TypedValue::Boolean(_) => SignalType::Boolean,
            TypedValue::Number(_) => SignalType::Number,
            TypedValue::Probability(_) => SignalType::Probability,
            TypedValue::Density { .. } => SignalType::Density,
        }
    }

    pub fn validate(&self) -> Result<(), ValueError> {
        match *self {
            TypedValue::Boolean(_) => Ok(()),
            TypedValue::Number(x) if x.is_finite() => Ok(()),
            TypedValue::Number(_) => Err(ValueError::NonFinite),
            TypedValue::Probability(p) if (0.0..=1.0).contains(&p) => Ok(()),
            TypedValue::Probability(p) => Err(ValueError::Probability(p)),
            TypedValue::Density { mean, stddev } => {
                if !mean.is_finite() {
                    Err(ValueError::NonFinite)
                } else if stddev > 0.0 && stddev.is_finite() {
                    Ok(())
                } else {
                    Err(ValueError::StdDev(stddev))
                }
            }
        }
    }
}

/// A timestamped value on a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WireMessage", into = "WireMessage")]
pub struct BusMessage {
    pub channel: String,
    pub value: TypedValue,
    /// Monotonic seconds.
    pub timestamp: f64,
}

impl BusMessage {
    pub fn new(channel: impl Into<String>, value: TypedValue, timestamp: f64) -> Self {
        BusMessage {
            channel: channel.into(),
            value,
            timestamp,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum WireValue {
    Flag(bool),
    Real(f64),
}

/// Line format: `{"channel", "type", "value" | "mean"+"stddev", "timestamp"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct WireMessage {
    channel: String,
    #[serde(rename = "type")]
    dtype: SignalType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<WireValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stddev: Option<f64>,
    timestamp: f64,
}

impl From<BusMessage> for WireMessage {
    fn from(m: BusMessage) -> Self {
        let (value, mean, stddev) = match m.value {
            TypedValue::Boolean(b) => (Some(WireValue::Flag(b)), None, None),
            TypedValue::Number(x) | TypedValue::Probability(x) => {
                (Some(WireValue::Real(x)), None, None)
            }
            TypedValue::Density { mean, stddev } => (None, Some(mean), Some(stddev)),
        };
        WireMessage {
            channel: m.channel,
            dtype: m.value.signal_type(),
            value,
            mean,
            stddev,
            timestamp: m.timestamp,
        }
    }
}

impl TryFrom<WireMessage> for BusMessage {
    type Error = ValueError;

    fn try_from(w: WireMessage) -> Result<Self, Self::Error> {
        let missing = |field| ValueError::MissingField {
            channel: w.channel.clone(),
            field,
        };
        let real = |v: Option<WireValue>| match v {
            Some(WireValue::Real(x)) => Ok(x),
            Some(WireValue::Flag(b)) => Ok(f64::from(u8::from(b))),
            None => Err(missing("value")),
        };
        let value = match w.dtype {
            SignalType::Boolean => match w.value {
                Some(WireValue::Flag(b)) => TypedValue::Boolean(b),
                Some(WireValue::Real(x)) => TypedValue::Boolean(x != 0.0),
                None => return Err(missing("value")),
            },
            SignalType::Number => TypedValue::Number(real(w.value)?),
            SignalType::Probability => TypedValue::Probability(real(w.value)?),
            SignalType::Density => TypedValue::Density {
                mean: w.mean.ok_or_else(|| missing("mean"))?,
                stddev: w.stddev.ok_or_else(|| missing("stddev"))?,
            },
        };
        value.validate()?;
        Ok(BusMessage {
            channel: w.channel,
            value,
            timestamp: w.timestamp,
        })
    }
}
