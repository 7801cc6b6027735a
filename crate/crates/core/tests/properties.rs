mod common;

use common::{grid, solution_mask, x};
use maxatom::format::{emit_instance, parse_instance};
use maxatom::graph::{graph_from_atoms, max_weight_closure, positive_circuit};
use maxatom::model::{canonicalize, verify};
use maxatom::oracle::kleene_descent;
use maxatom::rules::saturate_rules;
use maxatom::solver::{algorithm_a, phi, Bounds, SolveOutcome};
use maxatom::{Assignment, AtomSet, AtomSystem, ExtValue, MaxAtom, Offset, Rational};
use proptest::prelude::*;

fn atom(n: usize, offsets: std::ops::RangeInclusive<i64>) -> impl Strategy<Value = MaxAtom> {
    (1..=n, 1..=n, 1..=n, offsets).prop_map(|(z, y, v, r)| MaxAtom::new(x(z), x(y), x(v), r))
}

fn system(max_vars: usize, max_atoms: usize, lo: i64, hi: i64) -> impl Strategy<Value = AtomSystem> {
    (1..=max_vars).prop_flat_map(move |n| {
        proptest::collection::vec(atom(n, lo..=hi), 0..=max_atoms)
            .prop_map(move |atoms| AtomSystem::with_atoms(n, atoms).unwrap())
    })
}

fn rational_offsets(n: usize) -> impl Strategy<Value = MaxAtom> {
    (1..=n, 1..=n, 1..=n, -20i64..=20, 1i64..=6)
        .prop_map(|(z, y, v, p, q)| MaxAtom::new(x(z), x(y), x(v), Rational::new(p, q)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn canonical_form_is_idempotent(a in atom(5, -5..=5)) {
        let c = canonicalize(a);
        prop_assert_eq!(canonicalize(c), c);
        prop_assert!(c.left1 <= c.left2);
        prop_assert_eq!(c, canonicalize(MaxAtom { left1: a.left2, left2: a.left1, ..a }));
    }

    #[test]
    fn emit_then_parse_round_trips(atoms in proptest::collection::vec(rational_offsets(5), 0..12)) {
        let s = AtomSystem::with_atoms(5, atoms).unwrap();
        let text = emit_instance(&s);
        let parsed = parse_instance(&text).unwrap();
        prop_assert_eq!(&parsed, &s);
        prop_assert_eq!(emit_instance(&parsed), text);
    }

    #[test]
    fn solutions_closed_under_join_and_shift(s in system(5, 8, -4, 4), shift in -7i64..=7) {
        let Some(a) = kleene_descent(&s).unwrap().verdict.assignment().cloned() else {
            return Ok(());
        };
        let shifted = a.translate(Offset::int(shift));
        prop_assert!(verify(&s, &shifted).unwrap().satisfied);
        // keep only the zero coordinates; when that is a solution the join must be too
        let b = Assignment::from_values(a.values().iter().map(|v| if *v == ExtValue::zero() { *v } else { ExtValue::MinusInf }).collect());
        if verify(&s, &b).unwrap().satisfied {
            prop_assert!(verify(&s, &a.join(&b)).unwrap().satisfied);
        }
        prop_assert!(verify(&s, &a.join(&shifted)).unwrap().satisfied);
    }

    #[test]
    fn descent_result_is_greatest(s in system(5, 8, -4, 4)) {
        let Some(a) = kleene_descent(&s).unwrap().verdict.assignment().cloned() else {
            return Ok(());
        };
        prop_assert_eq!(a.values().iter().filter_map(|v| v.finite()).max(), Some(Rational::from_integer(0)));
        for v in s.vars() {
            let mut raised = a.clone();
            raised.set(v, match a.get(v) {
                ExtValue::Finite(q) if q < Rational::from_integer(0) => ExtValue::Finite(q + 1),
                ExtValue::Finite(_) => continue,
                ExtValue::MinusInf => ExtValue::zero(),
            });
            prop_assert!(!verify(&s, &raised).unwrap().satisfied, "{} can be raised", v);
        }
    }

    #[test]
    fn saturation_preserves_grid_solutions(s in system(3, 6, -3, 3)) {
        let points = grid(3, 6);
        let before: AtomSet = s.atoms().clone();
        let mut after = before.clone();
        let sat = saturate_rules(&mut after).unwrap();
        prop_assert_eq!(solution_mask(&before, &points), solution_mask(&after, &points));
        prop_assert!(after.len() <= before.len());
        let mut again = after.clone();
        prop_assert!(!saturate_rules(&mut again).unwrap().outcome.changed);
        prop_assert_eq!(sat.outcome.changed, before != after);
    }

    #[test]
    fn closure_atoms_hold_on_grid(atoms in proptest::collection::vec((1..=3usize, 1..=3usize, -3i64..=3), 0..6)) {
        let set: AtomSet = atoms.iter().map(|&(y, v, r)| MaxAtom::single(x(y), x(v), r)).collect();
        let g = graph_from_atoms(&set, (1..=3).map(x));
        prop_assume!(positive_circuit(&g).is_none());
        let closure = max_weight_closure(&g).unwrap();
        let mut extended = set.clone();
        extended.extend(maxatom::graph::closure_to_atoms(&closure));
        let points = grid(3, 6);
        prop_assert_eq!(solution_mask(&set, &points), solution_mask(&extended, &points));
    }

    #[test]
    fn solver_answers_verify_and_respect_ceilings(s in system(6, 10, -5, 5)) {
        let report = algorithm_a(&s);
        let bounds = Bounds::new(s.nvars(), s.atoms().len());
        prop_assert!(report.counters.violations(&bounds).is_empty(), "{:?}", report.counters);
        if let SolveOutcome::NonTrivial(a) = &report.outcome {
            let check = verify(&s, a).unwrap();
            prop_assert!(check.satisfied && check.nontrivial);
        }
        if kleene_descent(&s).unwrap().verdict == maxatom::Verdict::TrivialOnly {
            prop_assert!(!report.outcome.is_nontrivial());
        }
    }

    #[test]
    fn decisions_leave_input_untouched(s in system(5, 8, -4, 4)) {
        for a in s.atoms().iter().filter(|a| a.is_two_var()) {
            let copy = s.clone();
            let forward = phi((a.left1, a.left2), a, &s).unwrap();
            let backward = phi((a.left2, a.left1), a, &s).unwrap();
            prop_assert_eq!(&s, &copy);
            let limit = Bounds::new(s.nvars(), s.atoms().len()).phi_step_limit();
            prop_assert!(forward.steps <= limit && backward.steps <= limit);
        }
    }
}
