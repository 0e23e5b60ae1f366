//! Frequency of change: which updates are meaningful, how often they arrive,
//! and which frequency band a signal belongs to.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FocError {
    #[error("partition width must be positive, got {0}")]
    InvalidWidth(f64),
    #[error("inter-arrival time must be positive, got {0}")]
    NonPositiveInterval(f64),
}

/// Threshold predicate on coerced weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePredicate {
    pub epsilon: f64,
}

impl Default for ChangePredicate {
    fn default() -> Self {
        ChangePredicate { epsilon: 1e-3 }
    }
}

impl ChangePredicate {
    pub fn meaningful(&self, old: Option<f64>, new: f64) -> bool {
        match old {
            None => true,
            Some(old) => (new - old).abs() > self.epsilon,
        }
    }
}

/// Kalman filter parameters for inter-arrival tracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FocConfig {
    /// Diagonal of the process noise.
    pub q: [f64; 2],
    pub r: f64,
    /// Prior state (inter-arrival seconds, drift per step).
    pub x0: [f64; 2],
    /// Diagonal of the prior covariance.
    pub p0: [f64; 2],
    pub delta_t: f64,
    /// Smallest inter-arrival estimate, in seconds.
    pub floor: f64,
    pub epsilon: f64,
}

impl Default for FocConfig {
    fn default() -> Self {
        FocConfig {
            q: [1e-2, 1e-6],
            r: 1e-2,
            x0: [1.0, 0.0],
            p0: [1.0, 0.0],
            delta_t: 1.0,
            floor: 1e-4,
            epsilon: 1e-3,
        }
    }
}

/// Constant-velocity Kalman filter over inter-arrival times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub x: [f64; 2],
    pub p: [[f64; 2]; 2],
    pub q: [f64; 2],
    pub r: f64,
    pub delta_t: f64,
    pub observations: u64,
}

impl KalmanState {
    pub fn new(cfg: &FocConfig) -> Self {
        KalmanState {
            x: cfg.x0,
            p: [[cfg.p0[0], 0.0], [0.0, cfg.p0[1]]],
            q: cfg.q,
            r: cfg.r,
            delta_t: cfg.delta_t,
            observations: 0,
        }
    }

    /// One predict/update cycle with measurement `z` seconds.
    pub fn observe(&mut self, z: f64) -> Result<(), FocError> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(FocError::NonPositiveInterval(z));
        }
        let d = self.delta_t;
        let [x0, x1] = self.x;
        let [[a, b], [_, c]] = self.p;
        // x <- F x, P <- F P F^T + Q with F = [[1, d], [0, 1]].
        let x0 = x0 + d * x1;
        let pa = a + 2.0 * d * b + d * d * c + self.q[0];
        let pb = b + d * c;
        let pc = c + self.q[1];
        // H = [1, 0].
        let s = pa + self.r;
        let (k0, k1) = (pa / s, pb / s);
        let y = z - x0;
        self.x = [x0 + k0 * y, x1 + k1 * y];
        // P <- (I - K H) P, written out symmetrically.
        let na = (1.0 - k0) * pa;
        let nb = (1.0 - k0) * pb;
        let nc = pc - k1 * pb;
        self.p = [[na, nb], [nb, nc]];
        self.observations += 1;
        Ok(())
    }

    pub fn inter_arrival(&self) -> f64 {
        self.x[0]
    }
}

/// λ̂ = 1 / max(Δt̂, floor), or `None` before the first observation.
pub fn foc_estimate(ks: &KalmanState, floor: f64) -> Option<f64> {
    (ks.observations > 0).then(|| 1.0 / ks.inter_arrival().max(floor))
}

/// Frequency band index `floor(λ / h)`.
pub fn partition(lambda: f64, h: f64) -> Result<usize, FocError> {
    if !(h > 0.0) {
        return Err(FocError::InvalidWidth(h));
    }
    Ok((lambda.max(0.0) / h).floor() as usize)
}

/// Per-signal predicate state and rate filter.
#[derive(Debug, Clone)]
pub struct FocTracker {
    cfg: FocConfig,
    predicate: ChangePredicate,
    last_weight: Option<f64>,
    last_event: Option<f64>,
    kalman: KalmanState,
    raw: u64,
    meaningful: u64,
}

impl FocTracker {
    pub fn new(cfg: FocConfig) -> Self {
        FocTracker {
            cfg,
            predicate: ChangePredicate {
                epsilon: cfg.epsilon,
            },
            last_weight: None,
            last_event: None,
            kalman: KalmanState::new(&cfg),
            raw: 0,
            meaningful: 0,
        }
    }

    /// Feeds a coerced weight arriving at monotonic time `now` (seconds).
    /// Returns whether it was a meaningful update.
    pub fn offer(&mut self, now: f64, weight: f64) -> bool {
        self.raw += 1;
        if !self.predicate.meaningful(self.last_weight, weight) {
            return false;
        }
        self.last_weight = Some(weight);
        self.meaningful += 1;
        if let Some(prev) = self.last_event {
            // Equal timestamps carry no rate information.
            let _ = self.kalman.observe(now - prev);
        }
        self.last_event = Some(now);
        true
    }

    pub fn kalman(&self) -> &KalmanState {
        &self.kalman
    }

    pub fn last_event(&self) -> Option<f64> {
        self.last_event
    }

    pub fn raw_count(&self) -> u64 {
        self.raw
    }

    pub fn meaningful_count(&self) -> u64 {
        self.meaningful
    }

    /// Filter estimate λ̂.
    pub fn estimate(&self) -> Option<f64> {
        foc_estimate(&self.kalman, self.cfg.floor)
    }

    /// Rate at time `now`, decaying once the silence since the last event
    /// exceeds the filtered inter-arrival time. Before the first inter-arrival
    /// the prior is used. `None` before any event.
    pub fn rate_at(&self, now: f64) -> Option<f64> {
        let last = self.last_event?;
        let dt = self
            .kalman
            .inter_arrival()
            .max(now - last)
            .max(self.cfg.floor);
        Some(1.0 / dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicate_examples() {
        let p = ChangePredicate { epsilon: 0.01 };
        assert!(!p.meaningful(Some(0.5), 0.505));
        assert!(p.meaningful(Some(0.5), 0.6));
        assert!(p.meaningful(None, 0.0));
    }

    #[test]
    fn constant_stream_converges() {
        let mut k = KalmanState::new(&FocConfig::default());
        for _ in 0..100 {
            k.observe(0.2).unwrap();
        }
        assert!((k.inter_arrival() - 0.2).abs() < 1e-3);
    }

    #[test]
    fn single_observation_is_between() {
        let mut k = KalmanState::new(&FocConfig::default());
        k.observe(0.5).unwrap();
        assert!(k.inter_arrival() > 0.5 && k.inter_arrival() < 1.0);
    }

    #[test]
    fn rate_jump_reaches_band() {
        let mut k = KalmanState::new(&FocConfig::default());
        for _ in 0..40 {
            k.observe(0.5).unwrap();
        }
        let band = |k: &KalmanState| partition(foc_estimate(k, 1e-4).unwrap(), 5.0).unwrap();
        let mut settled = None;
        for i in 1..=15 {
            k.observe(0.05).unwrap();
            if band(&k) == 4 && settled.is_none() {
                settled = Some(i);
            }
        }
        assert!(settled.is_some());
        assert_eq!(band(&k), 4);
    }

    #[test]
    fn nonpositive_measurement_rejected() {
        let mut k = KalmanState::new(&FocConfig::default());
        let before = k;
        assert_eq!(k.observe(0.0), Err(FocError::NonPositiveInterval(0.0)));
        assert!(k.observe(-1.0).is_err());
        assert_eq!(k, before);
    }

    #[test]
    fn estimate_examples() {
        let mut k = KalmanState::new(&FocConfig::default());
        assert_eq!(foc_estimate(&k, 1e-4), None);
        k.observations = 1;
        k.x[0] = 0.2;
        assert!((foc_estimate(&k, 1e-4).unwrap() - 5.0).abs() < 1e-12);
        k.x[0] = 1.0;
        assert_eq!(foc_estimate(&k, 1e-4), Some(1.0));
        k.x[0] = -3.0;
        assert!((foc_estimate(&k, 1e-4).unwrap() - 1e4).abs() < 1e-6);
    }

    #[test]
    fn partition_examples() {
        assert_eq!(partition(7.2, 5.0), Ok(1));
        assert_eq!(partition(5.0, 5.0), Ok(1));
        assert_eq!(partition(0.0, 5.0), Ok(0));
        assert_eq!(partition(1.0, 0.0), Err(FocError::InvalidWidth(0.0)));
        assert!(partition(1.0, -2.0).is_err());
    }

    #[test]
    fn tracker_counts_and_decays() {
        let mut t = FocTracker::new(FocConfig::default());
        assert_eq!(t.rate_at(0.0), None);
        assert!(t.offer(0.0, 0.5));
        assert!(!t.offer(0.1, 0.5));
        assert!(t.offer(0.2, 0.7));
        assert_eq!((t.raw_count(), t.meaningful_count()), (3, 2));
        let near = t.rate_at(0.2).unwrap();
        let later = t.rate_at(100.0).unwrap();
        assert!(later < near);
        assert!((later - 1.0 / 99.8).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(2000))]

            #[test]
            fn covariance_stays_psd(zs in prop::collection::vec(1e-3f64..50.0, 1..60)) {
                let mut k = KalmanState::new(&FocConfig::default());
                for z in zs {
                    k.observe(z).unwrap();
                    let [[a, b], [b2, c]] = k.p;
                    prop_assert_eq!(b, b2);
                    // Smallest eigenvalue of a symmetric 2x2 matrix.
                    let half = (a + c) / 2.0;
                    let lo = half - (((a - c) / 2.0).powi(2) + b * b).sqrt();
                    prop_assert!(lo >= -1e-10, "eigenvalue {lo}");
                }
            }

            #[test]
            fn wider_bands_never_raise_the_index(lambda in 0.0f64..1e4, h in 0.01f64..100.0, dh in 0.0f64..100.0) {
                prop_assert!(partition(lambda, h + dh).unwrap() <= partition(lambda, h).unwrap());
            }

            #[test]
            fn meaningful_never_exceeds_raw(
                ws in prop::collection::vec(0.0f64..=1.0, 1..200),
                eps in 0.0f64..0.5,
            ) {
                let mut t = FocTracker::new(FocConfig { epsilon: eps, ..FocConfig::default() });
                for (i, w) in ws.into_iter().enumerate() {
                    t.offer(i as f64 * 0.1, w);
                    prop_assert!(t.meaningful_count() <= t.raw_count());
                }
            }
        }
    }
}
