//! Seeded random instances.
//!
//! Generation is deterministic in the seed. Atom sets collapse duplicates, so
//! an instance may hold fewer than the requested number of atoms.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::model::{evaluate_atom, Assignment, AtomSystem, ExtValue, MaxAtom, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenMode {
    /// Independent uniform variables and offsets.
    Uniform,
    /// Only atoms satisfied by a hidden non-trivial assignment.
    Planted,
    /// A difference-constraint path through every variable plus extras.
    Chains,
    /// A directed cycle of single-variable atoms plus extras.
    Cycles,
}

impl GenMode {
    pub const ALL: [GenMode; 4] = [GenMode::Uniform, GenMode::Planted, GenMode::Chains, GenMode::Cycles];
}

impl fmt::Display for GenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenMode::Uniform => "uniform",
            GenMode::Planted => "planted",
            GenMode::Chains => "chains",
            GenMode::Cycles => "cycles",
        })
    }
}

impl FromStr for GenMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GenMode::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

/// A planted instance together with the assignment it was built around.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Planted {
    pub system: AtomSystem,
    pub witness: Assignment,
}

/// Resampling budget per requested atom.
const TRIES_PER_ATOM: usize = 64;

pub fn generate(n: usize, m: usize, offsets: RangeInclusive<i64>, seed: u64, mode: GenMode) -> AtomSystem {
    assert!(n >= 1, "at least one variable");
    assert!(!offsets.is_empty(), "empty offset range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        GenMode::Uniform => uniform(&mut rng, n, m, &offsets),
        GenMode::Planted => planted_with(&mut rng, n, m, &offsets).system,
        GenMode::Chains => chains(&mut rng, n, m, &offsets),
        GenMode::Cycles => cycles(&mut rng, n, m, &offsets),
    }
}

/// Same instance as `generate(.., GenMode::Planted)`, with its witness.
pub fn generate_planted(n: usize, m: usize, offsets: RangeInclusive<i64>, seed: u64) -> Planted {
    assert!(n >= 1, "at least one variable");
    assert!(!offsets.is_empty(), "empty offset range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    planted_with(&mut rng, n, m, &offsets)
}

fn var(rng: &mut ChaCha8Rng, n: usize) -> VarId {
    VarId::new(rng.gen_range(1..=n))
}

fn random_atom(rng: &mut ChaCha8Rng, n: usize, offsets: &RangeInclusive<i64>) -> MaxAtom {
    MaxAtom::new(var(rng, n), var(rng, n), var(rng, n), rng.gen_range(offsets.clone()))
}

fn fill(system: &mut AtomSystem, m: usize, mut next: impl FnMut() -> Option<MaxAtom>) {
    for _ in 0..m.saturating_mul(TRIES_PER_ATOM) {
        if system.atoms().len() >= m {
            return;
        }
        if let Some(atom) = next() {
            system.add_atom(atom).expect("indices in range");
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, m: usize, offsets: &RangeInclusive<i64>) -> AtomSystem {
    let mut system = AtomSystem::new(n).expect("n >= 1");
    fill(&mut system, m, || Some(random_atom(rng, n, offsets)));
    system
}

fn planted_with(rng: &mut ChaCha8Rng, n: usize, m: usize, offsets: &RangeInclusive<i64>) -> Planted {
    let width = offsets.start().unsigned_abs().max(offsets.end().unsigned_abs()) as i64;
    let mut values: Vec<ExtValue> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.15) {
                ExtValue::MinusInf
            } else {
                ExtValue::int(rng.gen_range(-width..=0))
            }
        })
        .collect();
    if !values.iter().any(|v| v.is_finite()) {
        values[rng.gen_range(0..n)] = ExtValue::zero();
    }
    let witness = Assignment::from_values(values);
    let mut system = AtomSystem::new(n).expect("n >= 1");
    fill(&mut system, m, || {
        let (z, y, x) = (var(rng, n), var(rng, n), var(rng, n));
        let left = witness.get(z).max(witness.get(y));
        let r = match (left, witness.get(x)) {
            (_, ExtValue::MinusInf) => rng.gen_range(offsets.clone()),
            (ExtValue::MinusInf, ExtValue::Finite(_)) => return None,
            (ExtValue::Finite(l), ExtValue::Finite(v)) => {
                let tight = (v - l).to_integer().max(*offsets.start());
                if tight > *offsets.end() {
                    return None;
                }
                // half of the atoms are tight
                if rng.gen_bool(0.5) {
                    tight
                } else {
                    rng.gen_range(tight..=*offsets.end())
                }
            }
        };
        let atom = MaxAtom::new(z, y, x, r);
        debug_assert!(evaluate_atom(&atom, &witness));
        Some(atom)
    });
    Planted { system, witness }
}

fn chains(rng: &mut ChaCha8Rng, n: usize, m: usize, offsets: &RangeInclusive<i64>) -> AtomSystem {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut system = AtomSystem::new(n).expect("n >= 1");
    for pair in order.windows(2).take(m) {
        let atom = MaxAtom::single(VarId::new(pair[0]), VarId::new(pair[1]), rng.gen_range(offsets.clone()));
        system.add_atom(atom).expect("indices in range");
    }
    fill(&mut system, m, || {
        Some(if rng.gen_bool(0.75) {
            MaxAtom::single(var(rng, n), var(rng, n), rng.gen_range(offsets.clone()))
        } else {
            random_atom(rng, n, offsets)
        })
    });
    system
}

fn cycles(rng: &mut ChaCha8Rng, n: usize, m: usize, offsets: &RangeInclusive<i64>) -> AtomSystem {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    order.truncate(n.min(m.max(1)));
    let k = order.len();
    let mut system = AtomSystem::new(n).expect("n >= 1");
    for t in 0..k {
        let atom = MaxAtom::single(
            VarId::new(order[t]),
            VarId::new(order[(t + 1) % k]),
            rng.gen_range(offsets.clone()),
        );
        system.add_atom(atom).expect("indices in range");
    }
    fill(&mut system, m, || Some(random_atom(rng, n, offsets)));
    system
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::verify;

    #[test]
    fn deterministic_in_seed() {
        for mode in GenMode::ALL {
            assert_eq!(generate(5, 8, -3..=3, 42, mode), generate(5, 8, -3..=3, 42, mode));
        }
        assert_ne!(
            generate(5, 8, -3..=3, 1, GenMode::Uniform),
            generate(5, 8, -3..=3, 2, GenMode::Uniform)
        );
    }

    #[test]
    fn planted_witness_satisfies() {
        for seed in 0..200 {
            let p = generate_planted(6, 10, -5..=5, seed);
            let report = verify(&p.system, &p.witness).unwrap();
            assert!(report.satisfied && report.nontrivial, "seed {seed}");
            assert_eq!(p.system, generate(6, 10, -5..=5, seed, GenMode::Planted));
        }
    }

    #[test]
    fn sizes_and_shapes() {
        let s = generate(4, 6, -2..=2, 7, GenMode::Uniform);
        assert_eq!(s.atoms().len(), 6);
        let c = generate(5, 4, -2..=2, 7, GenMode::Chains);
        assert_eq!(c.atoms().len(), 4);
        assert!(c.atoms().iter().all(MaxAtom::is_single));
        let cyc = generate(4, 4, -3..=-1, 7, GenMode::Cycles);
        assert_eq!(cyc.atoms().len(), 4);
        assert!(cyc.atoms().iter().all(MaxAtom::is_single));
    }

    #[test]
    fn mode_names() {
        for mode in GenMode::ALL {
            assert_eq!(mode.to_string().parse::<GenMode>().unwrap(), mode);
        }
        assert!("sparse".parse::<GenMode>().is_err());
    }
}
