//! Solution-set preserving simplification rules.
//!
//! Each rule is one sweep over the atom set: targets are visited in atom key
//! order and the first matching partner rewrites the target. Partners are
//! always single-variable atoms `y + r >= x`; for a fixed `(y, x)` only the
//! smallest offset matters, since every guard below is monotone in `r`.

use std::collections::BTreeMap;

use num_traits::Zero;
use thiserror::Error;

use crate::model::{AtomSet, MaxAtom, Offset, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("rule saturation made {rounds} productive rounds, bound is {bound}")]
    RoundBoundExceeded { rounds: usize, bound: usize },
}

/// What a rewrite did. `changed` iff something was removed or added.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RewriteOutcome {
    pub changed: bool,
    pub removed: Vec<MaxAtom>,
    pub added: Vec<MaxAtom>,
}

impl RewriteOutcome {
    fn remove(&mut self, atoms: &mut AtomSet, atom: MaxAtom) {
        if atoms.remove(&atom) {
            self.removed.push(atom);
            self.changed = true;
        }
    }

    fn add(&mut self, atoms: &mut AtomSet, atom: MaxAtom) {
        if atoms.insert(atom) {
            self.added.push(atom);
            self.changed = true;
        }
    }

    fn replace(&mut self, atoms: &mut AtomSet, old: MaxAtom, new: MaxAtom) {
        self.remove(atoms, old);
        self.add(atoms, new);
    }

    pub fn absorb(&mut self, other: RewriteOutcome) {
        self.changed |= other.changed;
        self.removed.extend(other.removed);
        self.added.extend(other.added);
    }
}

/// Smallest offset of each single-variable atom `left + r >= right`, keyed by `(left, right)`.
#[derive(Default)]
struct SingleIndex(BTreeMap<(VarId, VarId), Offset>);

impl SingleIndex {
    fn build(atoms: &AtomSet) -> Self {
        let mut index = SingleIndex::default();
        for atom in atoms.iter().filter(|a| a.is_single()) {
            index.note(atom);
        }
        index
    }

    fn note(&mut self, atom: &MaxAtom) {
        debug_assert!(atom.is_single());
        self.0
            .entry((atom.left1, atom.right))
            .and_modify(|r| *r = (*r).min(atom.offset))
            .or_insert(atom.offset);
    }

    fn get(&self, left: VarId, right: VarId) -> Option<Offset> {
        self.0.get(&(left, right)).copied()
    }
}

fn two_var_targets(atoms: &AtomSet) -> Vec<MaxAtom> {
    atoms.iter().filter(|a| a.is_two_var()).copied().collect()
}

/// `max(y, x) + r >= x`: deleted when `r >= 0`, otherwise becomes `y + r >= x`.
pub fn rule_reflexive(atoms: &mut AtomSet) -> RewriteOutcome {
    let mut out = RewriteOutcome::default();
    let targets: Vec<MaxAtom> = atoms.iter().filter(|a| a.is_reflexive()).copied().collect();
    for target in targets {
        if target.offset.is_nonnegative() {
            out.remove(atoms, target);
        } else if target.is_two_var() {
            let other = target.other_left(target.right).expect("reflexive atom");
            out.replace(atoms, target, MaxAtom::single(other, target.right, target.offset));
        }
        // `x + r >= x` with r < 0 is already in the rewritten shape.
    }
    out
}

/// Among atoms with identical variables only the smallest offset survives.
pub fn rule_same_args_dominance(atoms: &mut AtomSet) -> RewriteOutcome {
    let mut out = RewriteOutcome::default();
    let mut doomed = Vec::new();
    let mut prev: Option<&MaxAtom> = None;
    // key order puts equal variable triples next to each other, smallest offset first
    for atom in atoms.iter() {
        if let Some(p) = prev {
            if (p.left1, p.left2, p.right) == (atom.left1, atom.left2, atom.right) {
                doomed.push(*atom);
                continue;
            }
        }
        prev = Some(atom);
    }
    for atom in doomed {
        out.remove(atoms, atom);
    }
    out
}

/// `y + r >= x` removes any `max(z, y) + r' >= x` with `r <= r'`.
///
/// `z = y` is allowed, which makes this also drop weaker copies of a
/// single-variable atom.
pub fn rule_atom_dominates(atoms: &mut AtomSet) -> RewriteOutcome {
    let mut out = RewriteOutcome::default();
    let index = SingleIndex::build(atoms);
    let targets: Vec<MaxAtom> = atoms.iter().copied().collect();
    for target in targets {
        let lefts = if target.is_single() {
            vec![target.left1]
        } else {
            vec![target.left1, target.left2]
        };
        let dominated = lefts.into_iter().any(|y| match index.get(y, target.right) {
            Some(r) if target.is_single() => r < target.offset,
            Some(r) => r <= target.offset,
            None => false,
        });
        if dominated {
            out.remove(atoms, target);
        }
    }
    out
}

/// `z + r >= y` with `r <= 0` turns `max(z, y) + r' >= x` into `z + r' >= x`.
pub fn rule_order_substitution(atoms: &mut AtomSet) -> RewriteOutcome {
    let mut out = RewriteOutcome::default();
    let mut index = SingleIndex::build(atoms);
    for target in two_var_targets(atoms) {
        if !atoms.contains(&target) {
            continue;
        }
        let pairs = [(target.left1, target.left2), (target.left2, target.left1)];
        let winner = pairs.into_iter().find(|&(z, y)| {
            index
                .get(z, y)
                .is_some_and(|r| r.value() <= Zero::zero())
        });
        if let Some((z, _)) = winner {
            let new = MaxAtom::single(z, target.right, target.offset);
            out.replace(atoms, target, new);
            index.note(&new);
        }
    }
    out
}

/// `y + r >= x` and `max(z, x) + r' >= y` with `r + r' < 0`: the second becomes `z + r' >= y`.
pub fn rule_negative_pair(atoms: &mut AtomSet) -> RewriteOutcome {
    let mut out = RewriteOutcome::default();
    let mut index = SingleIndex::build(atoms);
    for target in two_var_targets(atoms) {
        if !atoms.contains(&target) {
            continue;
        }
        let y = target.right;
        let pairs = [(target.left1, target.left2), (target.left2, target.left1)];
        let winner = pairs.into_iter().find(|&(x, _)| {
            index
                .get(y, x)
                .is_some_and(|r| (r + target.offset).is_negative())
        });
        if let Some((_, z)) = winner {
            let new = MaxAtom::single(z, y, target.offset);
            out.replace(atoms, target, new);
            index.note(&new);
        }
    }
    out
}

/// Result of [`saturate_rules`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Saturation {
    pub outcome: RewriteOutcome,
    /// Rounds in which at least one rule fired.
    pub rounds: usize,
}

/// Applies dominance, order substitution and negative-pair rewriting, in that
/// order, restarting after any change, until nothing fires.
///
/// A productive round either deletes an atom or turns a two-variable atom
/// into a single-variable one, so `atoms + two-variable atoms` at entry bounds
/// the number of productive rounds. Crossing it is reported as an error.
pub fn saturate_rules(atoms: &mut AtomSet) -> Result<Saturation, RuleError> {
    let bound = atoms.len() + atoms.iter().filter(|a| a.is_two_var()).count();
    let mut sat = Saturation::default();
    loop {
        let mut round = rule_atom_dominates(atoms);
        if !round.changed {
            round.absorb(rule_order_substitution(atoms));
        }
        if !round.changed {
            round.absorb(rule_negative_pair(atoms));
        }
        if !round.changed {
            return Ok(sat);
        }
        sat.rounds += 1;
        sat.outcome.absorb(round);
        if sat.rounds > bound {
            return Err(RuleError::RoundBoundExceeded {
                rounds: sat.rounds,
                bound,
            });
        }
    }
}
