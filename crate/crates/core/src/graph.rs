//! Weighted digraph over variables for the single-variable fragment.
//!
//! The atom `y + r >= x` is the arc `x -> y` of weight `-r`, read as
//! `value(y) >= value(x) + weight`. A circuit of positive weight therefore
//! forces every variable on it to minus infinity, and longest paths give the
//! tightest implied atoms and a finite solution when no such circuit exists.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use thiserror::Error;

use crate::model::{Assignment, AtomSet, ExtValue, MaxAtom, Offset, Rational, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph has a positive circuit through {0:?}")]
    PositiveCircuit(Vec<VarId>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WeightedArc {
    pub from: VarId,
    pub to: VarId,
    pub weight: Rational,
}

impl WeightedArc {
    pub fn new(from: VarId, to: VarId, weight: Rational) -> Self {
        WeightedArc { from, to, weight }
    }

    /// Arc encoding the single-variable atom `y + r >= x`.
    pub fn from_atom(atom: &MaxAtom) -> Self {
        debug_assert!(atom.is_single());
        WeightedArc::new(atom.right, atom.left1, -atom.offset.value())
    }
}

/// At most one arc per ordered pair; parallel arcs collapse to the largest weight.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WeightedDigraph {
    vertices: BTreeSet<VarId>,
    arcs: BTreeMap<(VarId, VarId), Rational>,
}

impl WeightedDigraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vertices(vertices: impl IntoIterator<Item = VarId>) -> Self {
        WeightedDigraph {
            vertices: vertices.into_iter().collect(),
            arcs: BTreeMap::new(),
        }
    }

    pub fn add_vertex(&mut self, v: VarId) {
        self.vertices.insert(v);
    }

    pub fn vertices(&self) -> &BTreeSet<VarId> {
        &self.vertices
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn weight(&self, from: VarId, to: VarId) -> Option<Rational> {
        self.arcs.get(&(from, to)).copied()
    }

    pub fn arcs(&self) -> impl Iterator<Item = WeightedArc> + '_ {
        self.arcs
            .iter()
            .map(|(&(from, to), &weight)| WeightedArc::new(from, to, weight))
    }

    /// Adds `arc`; an existing arc between the same endpoints keeps the larger weight.
    pub fn arc_sum(&mut self, arc: WeightedArc) {
        self.vertices.insert(arc.from);
        self.vertices.insert(arc.to);
        self.arcs
            .entry((arc.from, arc.to))
            .and_modify(|w| *w = (*w).max(arc.weight))
            .or_insert(arc.weight);
    }

    /// In-place [`graph_sum`].
    pub fn absorb(&mut self, other: &WeightedDigraph) {
        self.vertices.extend(other.vertices.iter().copied());
        for arc in other.arcs() {
            self.arc_sum(arc);
        }
    }

    fn indexed(&self) -> (Vec<VarId>, BTreeMap<VarId, usize>) {
        let order: Vec<VarId> = self.vertices.iter().copied().collect();
        let slots = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        (order, slots)
    }
}

/// Vertex union, arcs combined with [`WeightedDigraph::arc_sum`].
pub fn graph_sum(g1: &WeightedDigraph, g2: &WeightedDigraph) -> WeightedDigraph {
    let mut out = g1.clone();
    out.absorb(g2);
    out
}

/// Arcs for every single-variable atom; two-variable atoms contribute nothing.
pub fn graph_from_atoms<'a>(
    atoms: impl IntoIterator<Item = &'a MaxAtom>,
    vertices: impl IntoIterator<Item = VarId>,
) -> WeightedDigraph {
    let mut g = WeightedDigraph::with_vertices(vertices);
    for atom in atoms.into_iter().filter(|a| a.is_single()) {
        g.arc_sum(WeightedArc::from_atom(atom));
    }
    g
}

/// Longest-path potentials from a virtual source joined to every vertex by a
/// 0-arc. `Err` carries a positive circuit.
fn longest_potentials(g: &WeightedDigraph) -> Result<Vec<Rational>, Vec<VarId>> {
    let (order, slots) = g.indexed();
    let k = order.len();
    let arcs: Vec<(usize, usize, Rational)> = g
        .arcs()
        .map(|a| (slots[&a.from], slots[&a.to], a.weight))
        .collect();
    let mut dist = vec![Rational::zero(); k];
    let mut pred: Vec<Option<usize>> = vec![None; k];
    for round in 0..k {
        let mut last = None;
        for &(u, v, w) in &arcs {
            let cand = dist[u] + w;
            if cand > dist[v] {
                dist[v] = cand;
                pred[v] = Some(u);
                last = Some(v);
            }
        }
        let Some(mut v) = last else {
            return Ok(dist);
        };
        if round + 1 == k {
            // still relaxing after k rounds: walk back k steps to land on the circuit
            for _ in 0..k {
                v = pred[v].expect("relaxed vertex has a predecessor");
            }
            let start = v;
            let mut cycle = vec![order[start]];
            let mut u = pred[start].expect("on circuit");
            while u != start {
                cycle.push(order[u]);
                u = pred[u].expect("on circuit");
            }
            cycle.reverse();
            return Err(cycle);
        }
    }
    Ok(dist)
}

/// A circuit of strictly positive total weight, vertices in arc order, if any.
pub fn positive_circuit(g: &WeightedDigraph) -> Option<Vec<VarId>> {
    longest_potentials(g).err()
}

/// Total weight of the closed walk `cycle[0] -> cycle[1] -> ... -> cycle[0]`.
pub fn circuit_weight(g: &WeightedDigraph, cycle: &[VarId]) -> Option<Rational> {
    let mut total = Rational::zero();
    for (i, &from) in cycle.iter().enumerate() {
        let to = cycle[(i + 1) % cycle.len()];
        total += g.weight(from, to)?;
    }
    Some(total)
}

/// Maximum path weights `r*(u, v)` over every ordered pair joined by a path.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClosureResult {
    rstar: BTreeMap<(VarId, VarId), Rational>,
}

impl ClosureResult {
    pub fn rstar(&self, u: VarId, v: VarId) -> Option<Rational> {
        self.rstar.get(&(u, v)).copied()
    }

    pub fn reachable(&self) -> BTreeSet<(VarId, VarId)> {
        self.rstar.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.rstar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rstar.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((VarId, VarId), Rational)> + '_ {
        self.rstar.iter().map(|(&k, &w)| (k, w))
    }

    /// The closure as a graph over `vertices`, one arc per reachable pair.
    pub fn to_graph(&self, vertices: impl IntoIterator<Item = VarId>) -> WeightedDigraph {
        let mut g = WeightedDigraph::with_vertices(vertices);
        for ((u, v), w) in self.iter() {
            g.arc_sum(WeightedArc::new(u, v, w));
        }
        g
    }
}

/// Max-plus transitive closure (Floyd–Warshall).
///
/// Self-pairs appear when a circuit passes through the vertex; their weight is
/// the empty path's 0, which no non-positive circuit can beat.
#[allow(clippy::needless_range_loop)]
pub fn max_weight_closure(g: &WeightedDigraph) -> Result<ClosureResult, GraphError> {
    let (order, slots) = g.indexed();
    let k = order.len();
    let mut dist: Vec<Vec<Option<Rational>>> = vec![vec![None; k]; k];
    for arc in g.arcs() {
        let (i, j) = (slots[&arc.from], slots[&arc.to]);
        dist[i][j] = Some(dist[i][j].map_or(arc.weight, |w| w.max(arc.weight)));
    }
    for mid in 0..k {
        for i in 0..k {
            let Some(left) = dist[i][mid] else { continue };
            for j in 0..k {
                if let Some(right) = dist[mid][j] {
                    let cand = left + right;
                    if dist[i][j].is_none_or(|w| cand > w) {
                        dist[i][j] = Some(cand);
                    }
                }
            }
        }
    }
    let mut rstar = BTreeMap::new();
    for i in 0..k {
        if dist[i][i].is_some_and(|w| w > Rational::zero()) {
            let cycle = positive_circuit(g).unwrap_or_else(|| vec![order[i]]);
            return Err(GraphError::PositiveCircuit(cycle));
        }
        for j in 0..k {
            if let Some(w) = dist[i][j] {
                let w = if i == j { Rational::zero() } else { w };
                rstar.insert((order[i], order[j]), w);
            }
        }
    }
    Ok(ClosureResult { rstar })
}

/// `v - r*(u, v) >= u` for every reachable pair with `u != v`.
pub fn closure_to_atoms(c: &ClosureResult) -> AtomSet {
    c.iter()
        .filter(|((u, v), _)| u != v)
        .map(|((u, v), w)| MaxAtom::single(v, u, Offset::new(-w)))
        .collect()
}

/// Longest paths from a fresh source with 0-arcs to every vertex.
///
/// Every variable of `universe` comes out finite; variables of the `nvars`
/// universe outside it are left at minus infinity.
pub fn built_solution(
    g: &WeightedDigraph,
    universe: &BTreeSet<VarId>,
    nvars: usize,
) -> Result<Assignment, GraphError> {
    let mut full = g.clone();
    for &v in universe {
        full.add_vertex(v);
    }
    let dist = longest_potentials(&full).map_err(GraphError::PositiveCircuit)?;
    let mut out = Assignment::minus_inf(nvars);
    for (slot, v) in full.vertices().iter().enumerate() {
        if universe.contains(v) {
            out.set(*v, ExtValue::Finite(dist[slot]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate_atom, AtomSystem};

    fn x(i: usize) -> VarId {
        VarId::new(i)
    }

    fn r(v: i64) -> Rational {
        Rational::from_integer(v)
    }

    fn graph(arcs: &[(usize, usize, i64)]) -> WeightedDigraph {
        let mut g = WeightedDigraph::new();
        for &(a, b, w) in arcs {
            g.arc_sum(WeightedArc::new(x(a), x(b), r(w)));
        }
        g
    }

    #[test]
    fn arc_sum_keeps_max() {
        let g = graph(&[(1, 2, 3), (1, 2, 5)]);
        assert_eq!(g.arc_count(), 1);
        assert_eq!(g.weight(x(1), x(2)), Some(r(5)));

        let g = graph(&[(1, 2, 3), (2, 1, 5)]);
        assert_eq!(g.arc_count(), 2);

        assert_eq!(graph(&[(1, 2, 3), (1, 2, 3)]), graph(&[(1, 2, 3)]));
    }

    #[test]
    fn graph_sum_examples() {
        let g = graph(&[(1, 2, 1), (3, 1, -2)]);
        assert_eq!(graph_sum(&g, &WeightedDigraph::new()), g);
        assert_eq!(graph_sum(&g, &g), g);
        let sum = graph_sum(&graph(&[(1, 2, 1)]), &graph(&[(1, 2, 4), (2, 3, 0)]));
        assert_eq!(sum, graph(&[(1, 2, 4), (2, 3, 0)]));
    }

    #[test]
    fn from_atoms_examples() {
        let atoms = [MaxAtom::single(x(2), x(1), 1)];
        let g = graph_from_atoms(&atoms, []);
        assert_eq!(g.weight(x(1), x(2)), Some(r(-1)));

        let atoms = [MaxAtom::new(x(1), x(2), x(3), 1)];
        assert!(graph_from_atoms(&atoms, []).is_empty());

        let atoms = [MaxAtom::single(x(2), x(1), 1), MaxAtom::single(x(2), x(1), 3)];
        let g = graph_from_atoms(&atoms, []);
        assert_eq!(g.arc_count(), 1);
        assert_eq!(g.weight(x(1), x(2)), Some(r(-1)));
    }

    #[test]
    fn positive_circuit_examples() {
        let g = graph(&[(1, 2, 1), (2, 1, 1)]);
        let c = positive_circuit(&g).expect("weight 2 circuit");
        assert_eq!(c.len(), 2);
        assert!(circuit_weight(&g, &c).unwrap() > r(0));

        assert!(positive_circuit(&graph(&[(1, 2, 1), (2, 1, -1)])).is_none());
        assert!(positive_circuit(&WeightedDigraph::new()).is_none());

        let g = graph(&[(3, 3, 1)]);
        assert_eq!(positive_circuit(&g), Some(vec![x(3)]));

        // circuit not reachable from the lowest vertex
        let g = graph(&[(1, 2, -5), (3, 4, 2), (4, 5, -1), (5, 3, 0)]);
        let c = positive_circuit(&g).unwrap();
        assert_eq!(circuit_weight(&g, &c), Some(r(1)));
    }

    #[test]
    fn closure_examples() {
        let c = max_weight_closure(&graph(&[(1, 2, 2), (2, 3, 3)])).unwrap();
        assert_eq!(c.rstar(x(1), x(3)), Some(r(5)));
        assert!(c.rstar(x(3), x(1)).is_none());

        // two paths 1->2 (2) and 1->3->2 (0 + 3)
        let c = max_weight_closure(&graph(&[(1, 2, 2), (1, 3, 0), (3, 2, 3)])).unwrap();
        assert_eq!(c.rstar(x(1), x(2)), Some(r(3)));
        assert!(!c.reachable().contains(&(x(2), x(1))));

        // zero circuit gives self pairs at 0
        let c = max_weight_closure(&graph(&[(1, 2, 1), (2, 1, -1)])).unwrap();
        assert_eq!(c.rstar(x(1), x(1)), Some(r(0)));

        assert!(matches!(
            max_weight_closure(&graph(&[(1, 2, 1), (2, 1, 0)])),
            Err(GraphError::PositiveCircuit(_))
        ));
    }

    #[test]
    fn closure_atoms_examples() {
        let c = max_weight_closure(&graph(&[(1, 3, 5)])).unwrap();
        let atoms = closure_to_atoms(&c);
        assert_eq!(atoms.into_iter().collect::<Vec<_>>(), vec![MaxAtom::single(x(3), x(1), -5)]);

        assert!(closure_to_atoms(&ClosureResult::default()).is_empty());

        // x2 + 1 >= x1 and x3 + 1 >= x2 give x3 + 2 >= x1
        let atoms = [MaxAtom::single(x(2), x(1), 1), MaxAtom::single(x(3), x(2), 1)];
        let c = max_weight_closure(&graph_from_atoms(&atoms, [])).unwrap();
        assert!(closure_to_atoms(&c).contains(&MaxAtom::single(x(3), x(1), 2)));
    }

    #[test]
    fn built_solution_examples() {
        let universe: BTreeSet<VarId> = [x(1), x(2)].into();
        let a = built_solution(&WeightedDigraph::new(), &universe, 2).unwrap();
        assert_eq!(a.values(), &[ExtValue::zero(), ExtValue::zero()]);

        let g = graph(&[(1, 2, 1)]);
        let a = built_solution(&g, &universe, 2).unwrap();
        assert_eq!(a.values(), &[ExtValue::int(0), ExtValue::int(1)]);
        assert!(evaluate_atom(&MaxAtom::single(x(2), x(1), -1), &a));

        let g = graph(&[(1, 2, 1), (2, 1, -1)]);
        let a = built_solution(&g, &universe, 2).unwrap();
        assert_eq!(a.values(), &[ExtValue::int(0), ExtValue::int(1)]);

        let universe3: BTreeSet<VarId> = [x(1), x(3)].into();
        let a = built_solution(&WeightedDigraph::new(), &universe3, 3).unwrap();
        assert_eq!(a.get(x(2)), ExtValue::MinusInf);

        assert!(built_solution(&graph(&[(1, 2, 1), (2, 1, 0)]), &universe, 2).is_err());
    }

    #[test]
    fn built_solution_satisfies_encoded_atoms() {
        let atoms = [
            MaxAtom::single(x(2), x(1), -1),
            MaxAtom::single(x(3), x(2), 2),
            MaxAtom::single(x(1), x(3), 0),
        ];
        let system = AtomSystem::with_atoms(3, atoms).unwrap();
        let g = graph_from_atoms(system.atoms(), system.vars());
        let a = built_solution(&g, &system.vars().collect(), 3).unwrap();
        assert!(crate::model::verify(&system, &a).unwrap().satisfied);
    }
}
