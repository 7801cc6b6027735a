//! Test-side reference machinery, written without the library's evaluators.

#![allow(dead_code)]

use std::collections::BTreeSet;

use maxatom::graph::WeightedDigraph;
use maxatom::{AtomSet, AtomSystem, MaxAtom, Rational, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `None` is minus infinity.
pub type GridPoint = Vec<Option<i64>>;

pub fn x(i: usize) -> VarId {
    VarId::new(i)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer offset of an atom; the grid tests only build integer systems.
fn int_offset(atom: &MaxAtom) -> i64 {
    let r: Rational = atom.offset.value();
    assert!(r.is_integer(), "grid oracle needs integer offsets");
    *r.numer()
}

fn holds(atom: &MaxAtom, p: &[Option<i64>]) -> bool {
    let left = match (p[atom.left1.index() - 1], p[atom.left2.index() - 1]) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (Some(a), None) | (None, Some(a)) => Some(a),
        (None, None) => None,
    };
    match (left, p[atom.right.index() - 1]) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(l), Some(v)) => l + int_offset(atom) >= v,
    }
}

/// Every point of `({-depth..0} ∪ {-inf})^n`.
pub fn grid(n: usize, depth: i64) -> Vec<GridPoint> {
    let mut points = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &points {
            for v in std::iter::once(None).chain((-depth..=0).map(Some)) {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        points = next;
    }
    points
}

pub fn solutions_on<'a>(atoms: &AtomSet, points: &'a [GridPoint]) -> Vec<&'a GridPoint> {
    points
        .iter()
        .filter(|p| atoms.iter().all(|a| holds(a, p)))
        .collect()
}

/// Bitmask of the grid points satisfying `atoms`.
pub fn solution_mask(atoms: &AtomSet, points: &[GridPoint]) -> Vec<bool> {
    points
        .iter()
        .map(|p| atoms.iter().all(|a| holds(a, p)))
        .collect()
}

pub fn has_nontrivial_solution(system: &AtomSystem, depth: i64) -> bool {
    grid(system.nvars(), depth)
        .iter()
        .any(|p| p.iter().any(Option::is_some) && system.atoms().iter().all(|a| holds(a, p)))
}

pub fn atoms(list: &[MaxAtom]) -> AtomSet {
    list.iter().copied().collect()
}

pub fn system(n: usize, list: &[MaxAtom]) -> AtomSystem {
    AtomSystem::with_atoms(n, list.iter().copied()).unwrap()
}

pub fn random_atom(rng: &mut ChaCha8Rng, n: usize, lo: i64, hi: i64) -> MaxAtom {
    MaxAtom::new(
        x(rng.gen_range(1..=n)),
        x(rng.gen_range(1..=n)),
        x(rng.gen_range(1..=n)),
        rng.gen_range(lo..=hi),
    )
}

pub fn random_single(rng: &mut ChaCha8Rng, n: usize, lo: i64, hi: i64) -> MaxAtom {
    MaxAtom::single(x(rng.gen_range(1..=n)), x(rng.gen_range(1..=n)), rng.gen_range(lo..=hi))
}

pub fn random_graph(rng: &mut ChaCha8Rng, max_vertices: usize, max_arcs: usize, lo: i64, hi: i64) -> WeightedDigraph {
    use maxatom::graph::WeightedArc;
    let n = rng.gen_range(1..=max_vertices);
    let mut g = WeightedDigraph::with_vertices((1..=n).map(x));
    for _ in 0..rng.gen_range(0..=max_arcs) {
        let (u, v) = (rng.gen_range(1..=n), rng.gen_range(1..=n));
        g.arc_sum(WeightedArc::new(x(u), x(v), Rational::from_integer(rng.gen_range(lo..=hi))));
    }
    g
}

/// Depth-first enumeration of simple cycles; true iff one has positive weight.
pub fn has_positive_simple_cycle(g: &WeightedDigraph) -> bool {
    let vertices: Vec<VarId> = g.vertices().iter().copied().collect();
    fn dfs(
        g: &WeightedDigraph,
        start: VarId,
        at: VarId,
        weight: Rational,
        seen: &mut BTreeSet<VarId>,
        vertices: &[VarId],
    ) -> bool {
        for &next in vertices {
            let Some(w) = g.weight(at, next) else { continue };
            if next == start {
                if weight + w > Rational::from_integer(0) {
                    return true;
                }
            } else if next > start && !seen.contains(&next) {
                seen.insert(next);
                if dfs(g, start, next, weight + w, seen, vertices) {
                    return true;
                }
                seen.remove(&next);
            }
        }
        false
    }
    vertices.iter().any(|&s| {
        let mut seen = BTreeSet::from([s]);
        dfs(g, s, s, Rational::from_integer(0), &mut seen, &vertices)
    })
}
