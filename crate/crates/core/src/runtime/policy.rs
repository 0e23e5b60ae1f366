//! Placement of signals by frequency band: the fastest band sits next to the
//! root, each slower band one layer further down.

use crate::circuit::{CircuitError, ReactiveCircuit};
use crate::foc::partition;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PolicyOutcome {
    /// Signals moved towards the root, counted once per layer.
    pub lifts: usize,
    /// Signals moved towards the leaves, counted once per layer.
    pub drops: usize,
    /// Applications spent refreshing memos.
    pub ops: u64,
}

impl PolicyOutcome {
    pub fn moves(&self) -> usize {
        self.lifts + self.drops
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Lift,
    Drop,
}

/// Hysteresis applies to band membership: a signal joins a new band after
/// that many consecutive estimates agree. Depths follow from the confirmed
/// bands alone, so one noisy estimate never reshuffles the other signals.
#[derive(Debug, Clone)]
pub struct AdaptationPolicy {
    h: f64,
    hysteresis: u32,
    /// Confirmed band per signal; `None` until the first confirmation.
    band: Vec<Option<usize>>,
    /// Per signal: proposed band and how many times in a row.
    pending: Vec<Option<(usize, u32)>>,
}

impl AdaptationPolicy {
    pub fn new(h: f64, hysteresis: u32, num_vars: usize) -> Self {
        assert!(h > 0.0 && hysteresis >= 1);
        AdaptationPolicy {
            h,
            hysteresis,
            band: vec![None; num_vars],
            pending: vec![None; num_vars],
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn bands(&self) -> &[Option<usize>] {
        &self.band
    }

    /// Target depth per signal with a confirmed band. Occupied bands are
    /// ranked from the highest down, so empty bands do not add layers.
    pub fn target_depths(&self) -> Vec<Option<usize>> {
        let mut occupied: Vec<usize> = self.band.iter().flatten().copied().collect();
        occupied.sort_unstable_by(|a, b| b.cmp(a));
        occupied.dedup();
        self.band
            .iter()
            .map(|b| b.map(|k| occupied.iter().position(|&o| o == k).expect("occupied")))
            .collect()
    }

    /// Counts one round of estimates towards band changes; true if any
    /// signal changed band. Only signals in `fresh` count, all when `None`.
    fn observe(&mut self, rc: &ReactiveCircuit, rates: &[f64], fresh: Option<&[usize]>) -> bool {
        let all: Vec<usize>;
        let vars = match fresh {
            Some(v) => v,
            None => {
                all = (0..rc.num_vars()).collect();
                &all
            }
        };
        let mut changed = false;
        for &v in vars {
            if rc.signal_depths(v).is_none() {
                continue;
            }
            let k = partition(rates[v], self.h).expect("positive width");
            if self.band[v] == Some(k) {
                self.pending[v] = None;
                continue;
            }
            let count = match self.pending[v] {
                Some((pk, c)) if pk == k => c + 1,
                _ => 1,
            };
            if count >= self.hysteresis {
                self.band[v] = Some(k);
                self.pending[v] = None;
                changed = true;
            } else {
                self.pending[v] = Some((k, count));
            }
        }
        changed
    }

    fn direction(rc: &ReactiveCircuit, var: usize, target: usize) -> Option<Direction> {
        let (lo, hi) = rc.signal_depths(var)?;
        if hi > target && lo >= target {
            Some(Direction::Lift)
        } else if lo < target && hi <= target {
            Some(Direction::Drop)
        } else {
            None
        }
    }

    /// Feeds one round of rate estimates for every signal and applies the
    /// confirmed moves.
    pub fn evaluate(
        &mut self,
        rc: &mut ReactiveCircuit,
        rates: &[f64],
    ) -> Result<PolicyOutcome, CircuitError> {
        self.evaluate_fresh(rc, rates, None)
    }

    /// Like `evaluate`, but only the signals in `fresh` have a new estimate.
    pub fn evaluate_fresh(
        &mut self,
        rc: &mut ReactiveCircuit,
        rates: &[f64],
        fresh: Option<&[usize]>,
    ) -> Result<PolicyOutcome, CircuitError> {
        if !self.observe(rc, rates, fresh) {
            return Ok(PolicyOutcome::default());
        }
        let confirmed: Vec<(usize, usize)> = self
            .target_depths()
            .into_iter()
            .enumerate()
            .filter_map(|(v, t)| Some((v, t?)))
            .collect();

        let before = rc.root_value();
        let mut out = PolicyOutcome::default();
        for dir in [Direction::Lift, Direction::Drop] {
            loop {
                let vars: Vec<usize> = confirmed
                    .iter()
                    .filter(|&&(v, t)| Self::direction(rc, v, t) == Some(dir))
                    .map(|&(v, _)| v)
                    .collect();
                if vars.is_empty() {
                    break;
                }
                let layout: Vec<_> = vars.iter().map(|&v| rc.signal_depths(v)).collect();
                match dir {
                    Direction::Lift => {
                        out.ops += rc.lift(&vars)?;
                        out.lifts += vars.len();
                    }
                    Direction::Drop => {
                        out.ops += rc.drop(&vars)?;
                        out.drops += vars.len();
                    }
                }
                let after: Vec<_> = vars.iter().map(|&v| rc.signal_depths(v)).collect();
                if after == layout {
                    break;
                }
            }
        }
        if let (Some(a), Some(b)) = (before, rc.root_value()) {
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                return Err(CircuitError::Invariant(format!(
                    "adaptation changed the root value from {a} to {b}"
                )));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::ReactiveCircuit;
    use crate::grounder::{build_wmc_polynomial, StableModel};
    use crate::semiring::SemiringInstance;

    fn worked() -> ReactiveCircuit {
        let poly = build_wmc_polynomial(
            vec!["a".into(), "b".into(), "c".into()],
            &[
                StableModel::from_bits(0b011, 3),
                StableModel::from_bits(0b110, 3),
            ],
        );
        let mut rc = ReactiveCircuit::from_polynomial(&poly, SemiringInstance::Probability);
        for (v, w) in [0.5, 0.4, 0.2].into_iter().enumerate() {
            rc.set_weight(v, w).unwrap();
        }
        rc.evaluate_full().unwrap();
        rc
    }

    #[test]
    fn fast_signal_stays_on_top() {
        let mut rc = worked();
        let mut policy = AdaptationPolicy::new(5.0, 1, 3);
        let out = policy.evaluate(&mut rc, &[5.0, 1.0, 1.0]).unwrap();
        assert_eq!(out.drops, 2);
        assert_eq!(rc.omega(0), 3);
        assert_eq!(rc.memo_nodes(), 3);
        // Stable afterwards.
        assert_eq!(
            policy.evaluate(&mut rc, &[5.0, 1.0, 1.0]).unwrap().moves(),
            0
        );
    }

    #[test]
    fn single_band_never_moves() {
        let mut rc = worked();
        let mut policy = AdaptationPolicy::new(30.0, 1, 3);
        for _ in 0..10 {
            assert_eq!(
                policy.evaluate(&mut rc, &[5.0, 1.0, 20.0]).unwrap().moves(),
                0
            );
        }
        assert_eq!(rc.memo_nodes(), 1);
    }

    #[test]
    fn hysteresis_suppresses_oscillation() {
        let mut rc = worked();
        let mut policy = AdaptationPolicy::new(5.0, 3, 3);
        for i in 0..20 {
            let b = if i % 2 == 0 { 1.0 } else { 6.0 };
            assert_eq!(policy.evaluate(&mut rc, &[5.0, b, 5.0]).unwrap().moves(), 0);
        }
        // A persistent change goes through on the third estimate.
        assert_eq!(
            policy.evaluate(&mut rc, &[5.0, 1.0, 5.0]).unwrap().moves(),
            0
        );
        assert_eq!(
            policy.evaluate(&mut rc, &[5.0, 1.0, 5.0]).unwrap().moves(),
            0
        );
        assert_eq!(policy.evaluate(&mut rc, &[5.0, 1.0, 5.0]).unwrap().drops, 1);
    }

    #[test]
    fn three_bands_make_a_chain() {
        // safe if clearance and not rain and speed / clearance and rain and speed'.
        let names = vec!["speed".into(), "clearance".into(), "rain".into()];
        let models: Vec<_> = [0b011u64, 0b111, 0b110]
            .iter()
            .map(|&b| StableModel::from_bits(b, 3))
            .collect();
        let poly = build_wmc_polynomial(names, &models);
        let mut rc = ReactiveCircuit::from_polynomial(&poly, SemiringInstance::Probability);
        for v in 0..3 {
            rc.set_weight(v, 0.3 + 0.2 * v as f64).unwrap();
        }
        rc.evaluate_full().unwrap();
        let mut policy = AdaptationPolicy::new(5.0, 1, 3);
        policy.evaluate(&mut rc, &[12.0, 7.0, 1.0]).unwrap();
        rc.check_invariants().unwrap();
        assert_eq!(rc.signal_depths(0), Some((0, 0)));
        assert_eq!(rc.signal_depths(1), Some((1, 1)));
        assert_eq!(rc.signal_depths(2), Some((2, 2)));
        assert_eq!(rc.layers(), 3);
        // Rates reverse: everything moves back up in the new order.
        for _ in 0..3 {
            policy.evaluate(&mut rc, &[1.0, 7.0, 12.0]).unwrap();
        }
        assert_eq!(rc.signal_depths(2), Some((0, 0)));
        assert_eq!(rc.signal_depths(0), Some((2, 2)));
        let mut fresh = rc.clone();
        assert!((fresh.evaluate_full().unwrap() - rc.root_value().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn empty_bands_add_no_layers() {
        let mut rc = worked();
        let mut policy = AdaptationPolicy::new(5.0, 1, 3);
        // Bands 40, 0 and 0: one gap of 39 empty bands.
        policy.evaluate(&mut rc, &[200.0, 1.0, 2.0]).unwrap();
        assert_eq!(policy.target_depths(), vec![Some(0), Some(1), Some(1)]);
        assert_eq!(rc.layers(), 2);
    }
}
