//! In-process publish/subscribe bus with bounded, drop-oldest queues.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use thiserror::Error;

use super::value::BusMessage;
use crate::lang::SignalType;

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BusError {
    #[error("channel `{channel}` carries {declared}, got {got}")]
    TypeMismatch {
        channel: String,
        declared: SignalType,
        got: SignalType,
    },
    #[error("invalid channel path `{0}`")]
    InvalidChannel(String),
    #[error("bus is closed")]
    Closed,
}

#[derive(Debug)]
struct QueueState {
    items: VecDeque<BusMessage>,
    dropped: u64,
}

#[derive(Debug)]
struct SubscriberQueue {
    state: Mutex<QueueState>,
    ready: Condvar,
    capacity: usize,
}

impl SubscriberQueue {
    fn push(&self, msg: BusMessage) {
        let mut st = self.state.lock().expect("queue lock");
        if st.items.len() >= self.capacity {
            st.items.pop_front();
            st.dropped += 1;
            log::warn!(
                "subscriber queue full on `{}`; dropped oldest message ({} so far)",
                msg.channel,
                st.dropped
            );
        }
        st.items.push_back(msg);
        self.ready.notify_one();
    }
}

#[derive(Debug, Default)]
struct Channel {
    dtype: Option<SignalType>,
    subscribers: Vec<Arc<SubscriberQueue>>,
}

#[derive(Debug, Default)]
struct BusState {
    channels: HashMap<String, Channel>,
    closed: bool,
}

/// Cheaply cloneable handle to a shared bus.
#[derive(Debug, Clone)]
pub struct Bus {
    state: Arc<Mutex<BusState>>,
    capacity: usize,
    closed: Arc<(Mutex<bool>, Condvar)>,
}

impl Default for Bus {
    fn default() -> Self {
        Bus::new(DEFAULT_QUEUE_CAPACITY)
    }
}

fn check_path(channel: &str) -> Result<(), BusError> {
    if channel.starts_with('/') {
        Ok(())
    } else {
        Err(BusError::InvalidChannel(channel.to_string()))
    }
}

impl Bus {
    pub fn new(queue_capacity: usize) -> Self {
        Bus {
            state: Arc::default(),
            capacity: queue_capacity.max(1),
            closed: Arc::default(),
        }
    }

    /// Fixes the value type of a channel. Redeclaring with another type fails.
    pub fn declare(&self, channel: &str, dtype: SignalType) -> Result<(), BusError> {
        check_path(channel)?;
        let mut st = self.state.lock().expect("bus lock");
        let ch = st.channels.entry(channel.to_string()).or_default();
        match ch.dtype {
            Some(d) if d != dtype => Err(BusError::TypeMismatch {
                channel: channel.to_string(),
                declared: d,
                got: dtype,
            }),
            _ => {
                ch.dtype = Some(dtype);
                Ok(())
            }
        }
    }

    pub fn publish(&self, msg: BusMessage) -> Result<(), BusError> {
        check_path(&msg.channel)?;
        let st = self.state.lock().expect("bus lock");
        if st.closed {
            return Err(BusError::Closed);
        }
        let Some(ch) = st.channels.get(&msg.channel) else {
            return Ok(());
        };
        let got = msg.value.signal_type();
        if let Some(declared) = ch.dtype {
            if declared != got {
                return Err(BusError::TypeMismatch {
                    channel: msg.channel,
                    declared,
                    got,
                });
            }
        }
        for sub in &ch.subscribers {
            sub.push(msg.clone());
        }
        Ok(())
    }

    pub fn subscribe(&self, channel: &str) -> Result<Subscription, BusError> {
        self.subscribe_many(&[channel])
    }

    /// One queue receiving the messages of all `channels`.
    pub fn subscribe_many<S: AsRef<str>>(&self, channels: &[S]) -> Result<Subscription, BusError> {
        let queue = Arc::new(SubscriberQueue {
            state: Mutex::new(QueueState {
                items: VecDeque::new(),
                dropped: 0,
            }),
            ready: Condvar::new(),
            capacity: self.capacity,
        });
        let mut st = self.state.lock().expect("bus lock");
        for c in channels {
            check_path(c.as_ref())?;
            st.channels
                .entry(c.as_ref().to_string())
                .or_default()
                .subscribers
                .push(queue.clone());
        }
        Ok(Subscription {
            queue,
            bus: self.clone(),
        })
    }

    /// Stops delivery; blocked receivers return once their queue drains.
    pub fn close(&self) {
        let mut st = self.state.lock().expect("bus lock");
        st.closed = true;
        for ch in st.channels.values() {
            for s in &ch.subscribers {
                let _guard = s.state.lock().expect("queue lock");
                s.ready.notify_all();
            }
        }
        let (flag, cv) = &*self.closed;
        *flag.lock().expect("close lock") = true;
        cv.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        *self.closed.0.lock().expect("close lock")
    }
}

#[derive(Debug)]
pub struct Subscription {
    queue: Arc<SubscriberQueue>,
    bus: Bus,
}

impl Subscription {
    pub fn try_recv(&self) -> Option<BusMessage> {
        self.queue
            .state
            .lock()
            .expect("queue lock")
            .items
            .pop_front()
    }

    /// Blocks until a message arrives; `None` once the bus is closed and
    /// the queue is empty.
    pub fn recv(&self) -> Option<BusMessage> {
        let mut st = self.queue.state.lock().expect("queue lock");
        loop {
            if let Some(m) = st.items.pop_front() {
                return Some(m);
            }
            if self.bus.is_closed() {
                return None;
            }
            st = self
                .queue
                .ready
                .wait_timeout(st, Duration::from_millis(50))
                .expect("queue lock")
                .0;
        }
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<BusMessage> {
        let mut st = self.queue.state.lock().expect("queue lock");
        if st.items.is_empty() {
            st = self
                .queue
                .ready
                .wait_timeout_while(st, timeout, |s| s.items.is_empty() && !self.bus.is_closed())
                .expect("queue lock")
                .0;
        }
        st.items.pop_front()
    }

    pub fn drain(&self) -> Vec<BusMessage> {
        self.queue
            .state
            .lock()
            .expect("queue lock")
            .items
            .drain(..)
            .collect()
    }

    pub fn dropped(&self) -> u64 {
        self.queue.state.lock().expect("queue lock").dropped
    }
}
