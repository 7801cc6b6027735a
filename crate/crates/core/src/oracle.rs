//! Reference solvers used as referees: a descent to the greatest normalized
//! solution, and brute force over a finite grid for tiny instances.
//!
//! Both work on integer offsets. Rational systems are scaled by the least
//! common multiple of the offset denominators and results are scaled back.
//!
//! The descent cutoff: solutions are closed under `max` and under adding a
//! constant, so the solutions bounded above by 0 have a greatest element `G`,
//! and `G` has maximum exactly 0 whenever it is non-trivial. Sort the finite
//! values of `G` downwards. If two consecutive ones were more than `R` apart,
//! raising every variable below the gap by the gap size would keep each atom
//! satisfied (an atom whose right side is below the gap either has a left side
//! below it too, or is slack by more than `R`), contradicting maximality. So
//! finite values of `G` are at least `-(n - 1) R`, and anything that sinks
//! below `-n R` is minus infinity in `G`.

use num_integer::Integer;
use thiserror::Error;

use crate::model::{Assignment, AtomSystem, ExtValue, Rational};

/// Largest universe accepted by [`exhaustive_search`].
pub const EXHAUSTIVE_MAX_VARS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{nvars} variables is too many for exhaustive search (limit {EXHAUSTIVE_MAX_VARS})")]
    TooLarge { nvars: usize },
    #[error("depth {depth} is below n * R = {needed}")]
    DepthTooShallow { depth: i64, needed: i64 },
    #[error("offset scaling overflows 64-bit integers")]
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    NonTrivial(Assignment),
    TrivialOnly,
}

impl Verdict {
    pub fn is_nontrivial(&self) -> bool {
        matches!(self, Verdict::NonTrivial(_))
    }

    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            Verdict::NonTrivial(a) => Some(a),
            Verdict::TrivialOnly => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleVerdict {
    pub verdict: Verdict,
    /// Descent: number of lowering steps. Grid search: assignments visited.
    pub iterations: u64,
    /// Values strictly below `-threshold` count as minus infinity (descent),
    /// or the grid depth (grid search), in original units.
    pub threshold: Rational,
}

/// A system with every offset multiplied by `factor` and stored as an integer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaledSystem {
    pub nvars: usize,
    pub factor: i64,
    /// `(left1, left2, right, offset)` as 0-based slots, in atom key order.
    pub atoms: Vec<(usize, usize, usize, i64)>,
    /// Largest absolute scaled offset.
    pub range: i64,
}

impl ScaledSystem {
    pub fn new(system: &AtomSystem) -> Result<Self, OracleError> {
        let factor = system
            .atoms()
            .iter()
            .fold(1i64, |acc, a| acc.lcm(a.offset.value().denom()));
        let mut atoms = Vec::with_capacity(system.atoms().len());
        let mut range = 0i64;
        for a in system.atoms() {
            let r = a.offset.value();
            let scaled = r
                .numer()
                .checked_mul(factor / r.denom())
                .ok_or(OracleError::Overflow)?;
            range = range.max(scaled.checked_abs().ok_or(OracleError::Overflow)?);
            atoms.push((a.left1.slot(), a.left2.slot(), a.right.slot(), scaled));
        }
        Ok(ScaledSystem {
            nvars: system.nvars(),
            factor,
            atoms,
            range,
        })
    }

    /// `n * R`.
    pub fn default_threshold(&self) -> Result<i64, OracleError> {
        (self.nvars as i64)
            .checked_mul(self.range)
            .ok_or(OracleError::Overflow)
    }

    fn holds(&self, atom: (usize, usize, usize, i64), values: &[Option<i64>]) -> bool {
        let (l1, l2, x, r) = atom;
        match (values[l1].max(values[l2]), values[x]) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(left), Some(right)) => left + r >= right,
        }
    }

    fn satisfied(&self, values: &[Option<i64>]) -> bool {
        self.atoms.iter().all(|&a| self.holds(a, values))
    }

    fn unscale(&self, values: &[Option<i64>]) -> Assignment {
        Assignment::from_values(
            values
                .iter()
                .map(|v| match v {
                    Some(k) => ExtValue::Finite(Rational::new(*k, self.factor)),
                    None => ExtValue::MinusInf,
                })
                .collect(),
        )
    }
}

fn finish(scaled: &ScaledSystem, values: &[Option<i64>], iterations: u64, threshold: i64) -> OracleVerdict {
    let verdict = if values.iter().any(Option::is_some) {
        Verdict::NonTrivial(scaled.unscale(values))
    } else {
        Verdict::TrivialOnly
    };
    OracleVerdict {
        verdict,
        iterations,
        threshold: Rational::new(threshold, scaled.factor),
    }
}

/// Greatest normalized solution by descent from all zeros, cutoff `n * R`.
pub fn kleene_descent(system: &AtomSystem) -> Result<OracleVerdict, OracleError> {
    let scaled = ScaledSystem::new(system)?;
    let threshold = scaled.default_threshold()?;
    Ok(descend(&scaled, threshold))
}

/// Descent with an explicit cutoff, in scaled units: values strictly below
/// `-threshold` become minus infinity.
pub fn kleene_descent_with_threshold(system: &AtomSystem, threshold: i64) -> Result<OracleVerdict, OracleError> {
    let scaled = ScaledSystem::new(system)?;
    Ok(descend(&scaled, threshold.max(0)))
}

fn descend(scaled: &ScaledSystem, threshold: i64) -> OracleVerdict {
    let mut values: Vec<Option<i64>> = vec![Some(0); scaled.nvars];
    let mut iterations = 0u64;
    // always lower the first violated atom in key order
    while let Some(&(l1, l2, x, r)) = scaled.atoms.iter().find(|&&a| !scaled.holds(a, &values)) {
        iterations += 1;
        values[x] = match values[l1].max(values[l2]) {
            Some(left) if left + r >= -threshold => Some(left + r),
            _ => None,
        };
    }
    finish(scaled, &values, iterations, threshold)
}

/// Componentwise maximum of the satisfying normalized assignments over
/// `({-depth, ..., 0} ∪ {-inf})^n`, `depth` in scaled units.
pub fn exhaustive_search(system: &AtomSystem, depth: i64) -> Result<OracleVerdict, OracleError> {
    let n = system.nvars();
    if n > EXHAUSTIVE_MAX_VARS {
        return Err(OracleError::TooLarge { nvars: n });
    }
    let scaled = ScaledSystem::new(system)?;
    let needed = scaled.default_threshold()?;
    if depth < needed {
        return Err(OracleError::DepthTooShallow { depth, needed });
    }
    // digit 0 is minus infinity, digit k is the value 1 - k
    let radix = depth as u64 + 2;
    let total = radix.pow(n as u32);
    let decode = |d: u64| if d == 0 { None } else { Some(1 - d as i64) };
    let mut values = vec![None; n];
    let mut best: Option<Vec<Option<i64>>> = None;
    for code in 0..total {
        let mut c = code;
        for v in values.iter_mut() {
            *v = decode(c % radix);
            c /= radix;
        }
        if !values.contains(&Some(0)) || !scaled.satisfied(&values) {
            continue;
        }
        best = Some(match best {
            None => values.clone(),
            Some(b) => b.iter().zip(&values).map(|(p, q)| (*p).max(*q)).collect(),
        });
    }
    let values = best.unwrap_or_else(|| vec![None; n]);
    Ok(finish(&scaled, &values, total, depth))
}

/// Same verdict, and for non-trivial answers the same support and the same
/// normalized values.
pub fn oracles_agree(system: &AtomSystem) -> Result<bool, OracleError> {
    let descent = kleene_descent(system)?;
    let depth = ScaledSystem::new(system)?.default_threshold()?;
    let grid = exhaustive_search(system, depth)?;
    Ok(verdicts_agree(&descent.verdict, &grid.verdict))
}

pub fn verdicts_agree(a: &Verdict, b: &Verdict) -> bool {
    match (a, b) {
        (Verdict::TrivialOnly, Verdict::TrivialOnly) => true,
        (Verdict::NonTrivial(p), Verdict::NonTrivial(q)) => p.normalized() == q.normalized(),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{verify, MaxAtom, VarId};

    fn x(i: usize) -> VarId {
        VarId::new(i)
    }

    fn sys(n: usize, atoms: &[MaxAtom]) -> AtomSystem {
        AtomSystem::with_atoms(n, atoms.iter().copied()).unwrap()
    }

    fn ints(values: &[Option<i64>]) -> Assignment {
        Assignment::from_values(
            values
                .iter()
                .map(|v| v.map_or(ExtValue::MinusInf, ExtValue::int))
                .collect(),
        )
    }

    #[test]
    fn descent_examples() {
        let s = sys(2, &[MaxAtom::new(x(1), x(2), x(2), -1)]);
        let out = kleene_descent(&s).unwrap();
        assert_eq!(out.verdict, Verdict::NonTrivial(ints(&[Some(0), Some(-1)])));
        assert_eq!(out.iterations, 1);

        let s = sys(2, &[MaxAtom::single(x(1), x(2), -1), MaxAtom::single(x(2), x(1), -1)]);
        assert_eq!(kleene_descent(&s).unwrap().verdict, Verdict::TrivialOnly);

        let s = sys(3, &[MaxAtom::new(x(1), x(2), x(3), 0)]);
        assert_eq!(
            kleene_descent(&s).unwrap().verdict,
            Verdict::NonTrivial(Assignment::zeros(3))
        );
    }

    #[test]
    fn descent_scales_rationals() {
        let s = sys(2, &[MaxAtom::new(x(1), x(2), x(2), Rational::new(-3, 2))]);
        let out = kleene_descent(&s).unwrap();
        let a = out.verdict.assignment().unwrap();
        assert_eq!(a.get(x(2)), ExtValue::Finite(Rational::new(-3, 2)));
        assert!(verify(&s, a).unwrap().satisfied);
        assert_eq!(out.threshold, Rational::from_integer(3));
    }

    #[test]
    fn exhaustive_examples() {
        let s = sys(2, &[MaxAtom::new(x(1), x(2), x(2), -1)]);
        let out = exhaustive_search(&s, 3).unwrap();
        assert_eq!(out.verdict, Verdict::NonTrivial(ints(&[Some(0), Some(-1)])));

        let s = sys(
            3,
            &[
                MaxAtom::new(x(2), x(3), x(1), -1),
                MaxAtom::single(x(1), x(2), 0),
                MaxAtom::single(x(1), x(3), 0),
            ],
        );
        assert_eq!(exhaustive_search(&s, 4).unwrap().verdict, Verdict::TrivialOnly);

        let empty = AtomSystem::new(3).unwrap();
        assert_eq!(
            exhaustive_search(&empty, 0).unwrap().verdict,
            Verdict::NonTrivial(Assignment::zeros(3))
        );
    }

    #[test]
    fn exhaustive_rejects_bad_input() {
        assert_eq!(
            exhaustive_search(&AtomSystem::new(6).unwrap(), 10),
            Err(OracleError::TooLarge { nvars: 6 })
        );
        let s = sys(2, &[MaxAtom::single(x(1), x(2), -3)]);
        assert_eq!(
            exhaustive_search(&s, 5),
            Err(OracleError::DepthTooShallow { depth: 5, needed: 6 })
        );
    }

    #[test]
    fn agreement_examples() {
        for s in [
            sys(2, &[MaxAtom::new(x(1), x(2), x(2), -1)]),
            sys(2, &[MaxAtom::single(x(1), x(2), -1), MaxAtom::single(x(2), x(1), -1)]),
            sys(3, &[MaxAtom::new(x(1), x(2), x(3), 0)]),
            sys(3, &[MaxAtom::new(x(1), x(2), x(3), 2), MaxAtom::single(x(3), x(1), 1)]),
        ] {
            assert!(oracles_agree(&s).unwrap());
        }
    }

    #[test]
    fn tight_threshold_can_lose_solutions() {
        // x1 = 0, x2 = -2, x3 = -4 is the only normalized shape
        let s = sys(
            3,
            &[
                MaxAtom::single(x(1), x(2), -2),
                MaxAtom::single(x(2), x(3), -2),
                MaxAtom::single(x(3), x(1), 4),
            ],
        );
        let full = kleene_descent(&s).unwrap();
        assert_eq!(full.verdict, Verdict::NonTrivial(ints(&[Some(0), Some(-2), Some(-4)])));
        let cut = kleene_descent_with_threshold(&s, 3).unwrap();
        assert_ne!(cut.verdict, full.verdict);
    }
}
