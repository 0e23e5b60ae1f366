use std::fmt;

use super::{AtomRef, GroundError, GroundProgram};

/// A total assignment to the choice atoms of a ground program.
///
/// Bit `i` holds the value of choice atom `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StableModel {
    pub bits: u64,
    pub n: usize,
}

impl StableModel {
    pub fn from_bits(bits: u64, n: usize) -> Self {
        StableModel { bits, n }
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    /// One character per choice atom, atom 0 first.
    pub fn bitstring(&self) -> String {
        (0..self.n)
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect()
    }

    pub fn from_bitstring(s: &str) -> Option<Self> {
        let mut bits = 0u64;
        for (i, c) in s.chars().enumerate() {
            match c {
                '1' => bits |= 1 << i,
                '0' => {}
                _ => return None,
            }
        }
        Some(StableModel::from_bits(bits, s.chars().count()))
    }
}

impl fmt::Display for StableModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.bitstring())
    }
}

fn holds(a: &AtomRef, bits: u64, derived: &[bool]) -> bool {
    match a {
        AtomRef::Choice(i) => bits >> i & 1 == 1,
        AtomRef::Derived(i) => derived[*i],
    }
}

/// Stratified least fixpoint of the derived atoms under a choice assignment.
pub fn derive_atoms(gp: &GroundProgram, bits: u64) -> Vec<bool> {
    let mut derived = vec![false; gp.derived.len()];
    let top = gp.strata.iter().copied().max().unwrap_or(0);
    let mut by_stratum: Vec<Vec<usize>> = vec![Vec::new(); top + 1];
    for (i, r) in gp.rules.iter().enumerate() {
        by_stratum[gp.strata[r.head]].push(i);
    }
    for rules in &by_stratum {
        loop {
            let mut changed = false;
            for &ri in rules {
                let r = &gp.rules[ri];
                if derived[r.head] {
                    continue;
                }
                if r.pos.iter().all(|a| holds(a, bits, &derived))
                    && !r.neg.iter().any(|a| holds(a, bits, &derived))
                {
                    derived[r.head] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
    derived
}

/// Every choice assignment whose stratified model contains the target, in
/// ascending order of the assignment bits.
pub fn enumerate_stable_models(
    gp: &GroundProgram,
    limit: usize,
) -> Result<Vec<StableModel>, GroundError> {
    let n = gp.num_choices();
    if n > limit || n >= 64 {
        return Err(GroundError::TooManySources { n, limit });
    }
    let mut models = Vec::new();
    for bits in 0..1u64 << n {
        let derived = derive_atoms(gp, bits);
        if holds(&gp.target, bits, &derived) {
            models.push(StableModel::from_bits(bits, n));
        }
    }
    Ok(models)
}

/// Gelfond-Lifschitz check: the least model of the reduct with respect to
/// `derived` (plus the chosen atoms as facts) must be exactly `derived`.
pub fn verify_stable(gp: &GroundProgram, model: StableModel, derived: &[bool]) -> bool {
    let bits = model.bits;
    let reduct: Vec<_> = gp
        .rules
        .iter()
        .filter(|r| !r.neg.iter().any(|a| holds(a, bits, derived)))
        .collect();
    let mut least = vec![false; gp.derived.len()];
    loop {
        let mut changed = false;
        for r in &reduct {
            if !least[r.head] && r.pos.iter().all(|a| holds(a, bits, &least)) {
                least[r.head] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    least == derived && holds(&gp.target, bits, &least)
}
