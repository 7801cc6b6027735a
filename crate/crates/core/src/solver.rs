//! The decision procedure: simplification, minus-infinity propagation, the
//! per-atom decision subroutine and final solution synthesis.
//!
//! The driver is a loop with three restart points, mirroring the procedure
//! it implements:
//!
//! * a positive circuit in the single-variable graph kills its vertices and
//!   restarts from the top,
//! * an atom whose two orderings both fail kills both left variables,
//!   propagates, and restarts,
//! * an atom whose two orderings both succeed merges its left variables and
//!   restarts.
//!
//! Every restart removes at least one live variable. Loop counters and the
//! work done inside each decision call are checked against fixed polynomial
//! ceilings; crossing one, or producing an assignment that fails to verify
//! against the input, ends the run with [`SolveOutcome::InternalBoundExceeded`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    built_solution, closure_to_atoms, graph_from_atoms, max_weight_closure, positive_circuit,
    GraphError, WeightedDigraph,
};
use crate::model::{verify, Assignment, AtomSet, AtomSystem, MaxAtom, VarId};
use crate::rules::{
    rule_atom_dominates, rule_negative_pair, rule_order_substitution, rule_reflexive,
    rule_same_args_dominance, saturate_rules, RuleError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("decision ({hi} >= {lo}) does not match the left side of {atom}")]
    InvalidDecision { hi: VarId, lo: VarId, atom: MaxAtom },
    #[error("atom {0} is not in the system")]
    UnknownAtom(MaxAtom),
    #[error("cannot aggregate a failed decision graph")]
    FailedDecisionInAggregate,
    #[error("decision subroutine used {steps} steps, ceiling is {limit}")]
    PhiStepBound { steps: u64, limit: u64 },
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Polynomial ceilings for a system with `n` variables and `m` atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub n: u64,
    pub m: u64,
}

impl Bounds {
    pub fn new(n: usize, m: usize) -> Self {
        Bounds {
            n: n as u64,
            m: m as u64,
        }
    }

    /// Ceiling for the restart loops.
    pub fn restart_limit(&self) -> u64 {
        self.n
    }

    /// Ceiling for repeats of the simplification loop.
    pub fn simplify_limit(&self) -> u64 {
        self.m
    }

    /// Largest atom set after saturation: `m + n^2`.
    pub fn atom_limit(&self) -> u64 {
        self.m + self.n * self.n
    }

    /// Steps in one decision call: `m (3 (m + n^2)^2 + m + n^2 + 2 n^3)`.
    pub fn phi_step_limit(&self) -> u64 {
        let f = self.atom_limit();
        self.m * (3 * f * f + f + 2 * self.n.pow(3))
    }
}

/// Loop and work counters of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounters {
    /// Restarts after a positive circuit in the main graph.
    pub loop1: u64,
    /// Restarts after merging two variables.
    pub loop2: u64,
    /// Most repeats of the simplification loop within one pass.
    pub loop3: u64,
    /// Restarts after an atom had no feasible ordering.
    pub loop4: u64,
    pub phi_calls: u64,
    /// Largest step count of a single decision call.
    pub phi_steps: u64,
    /// Largest atom set observed after saturation, main loop or decision call.
    pub max_atoms: u64,
}

impl StepCounters {
    /// Human-readable list of every ceiling this run crossed.
    pub fn violations(&self, bounds: &Bounds) -> Vec<String> {
        let mut out = Vec::new();
        for (name, value) in [("loop1", self.loop1), ("loop2", self.loop2), ("loop4", self.loop4)] {
            if value > bounds.restart_limit() {
                out.push(format!("{name} = {value} > n = {}", bounds.n));
            }
        }
        if self.loop3 > bounds.simplify_limit() {
            out.push(format!("loop3 = {} > m = {}", self.loop3, bounds.m));
        }
        if self.phi_steps > bounds.phi_step_limit() {
            out.push(format!(
                "phi_steps = {} > {}",
                self.phi_steps,
                bounds.phi_step_limit()
            ));
        }
        if self.max_atoms > bounds.atom_limit() {
            out.push(format!(
                "atoms = {} > m + n^2 = {}",
                self.max_atoms,
                bounds.atom_limit()
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    /// A loop, step or atom-count ceiling was crossed.
    BoundExceeded,
    /// The candidate assignment failed against the input system.
    VerifyFailed,
    /// An intermediate object broke an assumption of a later step, such as
    /// a positive circuit in the aggregated decision graph.
    Precondition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
    pub trace: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    NonTrivial(Assignment),
    TrivialOnly,
    InternalBoundExceeded(Diagnostic),
}

impl SolveOutcome {
    pub fn is_nontrivial(&self) -> bool {
        matches!(self, SolveOutcome::NonTrivial(_))
    }

    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            SolveOutcome::NonTrivial(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveReport {
    pub outcome: SolveOutcome,
    pub counters: StepCounters,
    pub trace: Vec<String>,
}

/// Return value of the decision subroutine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhiResult {
    /// False iff the decision produced a positive circuit.
    pub status: bool,
    pub graph: WeightedDigraph,
    pub steps: u64,
    pub iterations: u64,
    pub max_atoms: u64,
}

/// Kills `seeds` and propagates: atoms whose right side is minus infinity
/// are dropped, a dead left operand is removed from the max, and an atom
/// with both left operands dead kills its right side. Runs to a fixpoint and
/// returns every variable killed, seeds included.
pub fn propagate_minus_infinity(
    system: &mut AtomSystem,
    seeds: impl IntoIterator<Item = VarId>,
) -> BTreeSet<VarId> {
    let mut killed = BTreeSet::new();
    for v in seeds {
        if system.kill(v) {
            killed.insert(system.representative(v));
        }
    }
    loop {
        let mut changed = false;
        let snapshot: Vec<MaxAtom> = system.atoms().iter().copied().collect();
        for atom in snapshot {
            if !system.atoms().contains(&atom) {
                continue;
            }
            let dead_left1 = system.is_killed(atom.left1);
            let dead_left2 = system.is_killed(atom.left2);
            if system.is_killed(atom.right) {
                system.atoms_mut().remove(&atom);
            } else if dead_left1 && dead_left2 {
                system.atoms_mut().remove(&atom);
                system.kill(atom.right);
                killed.insert(system.representative(atom.right));
            } else if dead_left1 || dead_left2 {
                let alive = if dead_left1 { atom.left2 } else { atom.left1 };
                system.atoms_mut().remove(&atom);
                system
                    .atoms_mut()
                    .insert(MaxAtom::single(alive, atom.right, atom.offset));
            } else {
                continue;
            }
            changed = true;
        }
        if !changed {
            return killed;
        }
    }
}

/// Identifies `drop` with `keep` and rewrites every atom through the merge.
/// Atoms that collapse onto an existing one disappear; atoms that become
/// reflexive are kept as they are.
pub fn merge_variables(system: &mut AtomSystem, keep: VarId, drop: VarId) {
    debug_assert_ne!(keep, drop);
    system.unite(keep, drop);
    let old = std::mem::take(system.atoms_mut());
    let rewritten: AtomSet = old
        .iter()
        .map(|a| a.map_vars(|v| system.representative(v)))
        .collect();
    *system.atoms_mut() = rewritten;
}

/// Sums the graphs of successful decisions.
pub fn aggregate_decision_graphs(results: &[PhiResult]) -> Result<WeightedDigraph, SolveError> {
    let mut out = WeightedDigraph::new();
    for result in results {
        if !result.status {
            return Err(SolveError::FailedDecisionInAggregate);
        }
        out.absorb(&result.graph);
    }
    Ok(out)
}

/// The decision subroutine with the ceiling derived from `system` itself.
pub fn phi(decision: (VarId, VarId), atom: &MaxAtom, system: &AtomSystem) -> Result<PhiResult, SolveError> {
    let limit = Bounds::new(system.nvars(), system.atoms().len()).phi_step_limit();
    phi_with_limit(decision, atom, system, limit)
}

/// Assumes `hi >= lo` for the left variables of `atom` and decides whether
/// the linearized system stays free of positive circuits.
///
/// Works on a copy: the atom is replaced by `hi + 0 >= lo` and
/// `hi + r >= right`, then rule passes, graph construction, circuit check
/// and closure repeat until the atom set stops changing.
///
/// Steps are charged per phase: each rule pass costs `|F|^2`, building the
/// graph `|F|`, the circuit check and the closure `|V|^3` each.
pub fn phi_with_limit(
    decision: (VarId, VarId),
    atom: &MaxAtom,
    system: &AtomSystem,
    limit: u64,
) -> Result<PhiResult, SolveError> {
    let (hi, lo) = decision;
    if hi == lo || !atom.has_left(hi) || atom.other_left(hi) != Some(lo) {
        return Err(SolveError::InvalidDecision { hi, lo, atom: *atom });
    }
    if !system.atoms().contains(atom) {
        return Err(SolveError::UnknownAtom(*atom));
    }
    let vertices = system.live_vars();
    let cube = (vertices.len() as u64).pow(3);
    let mut atoms = system.atoms().clone();
    atoms.remove(atom);
    atoms.insert(MaxAtom::single(hi, lo, 0));
    atoms.insert(MaxAtom::single(hi, atom.right, atom.offset));

    let mut graph = WeightedDigraph::with_vertices(vertices.iter().copied());
    let mut steps = 0u64;
    let mut iterations = 0u64;
    let mut max_atoms = 0u64;
    let charge = |steps: &mut u64, amount: u64| -> Result<(), SolveError> {
        *steps += amount;
        if *steps > limit {
            Err(SolveError::PhiStepBound { steps: *steps, limit })
        } else {
            Ok(())
        }
    };
    loop {
        iterations += 1;
        let before = atoms.clone();
        for pass in [rule_atom_dominates, rule_order_substitution, rule_negative_pair] {
            let size = atoms.len() as u64;
            charge(&mut steps, size * size)?;
            pass(&mut atoms);
        }
        max_atoms = max_atoms.max(atoms.len() as u64);
        charge(&mut steps, atoms.len() as u64)?;
        graph.absorb(&graph_from_atoms(&atoms, []));
        charge(&mut steps, cube)?;
        if positive_circuit(&graph).is_some() {
            return Ok(PhiResult {
                status: false,
                graph,
                steps,
                iterations,
                max_atoms,
            });
        }
        charge(&mut steps, cube)?;
        let closure = max_weight_closure(&graph)?;
        atoms.extend(closure_to_atoms(&closure));
        if atoms == before {
            return Ok(PhiResult {
                status: true,
                graph,
                steps,
                iterations,
                max_atoms,
            });
        }
    }
}

/// Runs the full procedure on `system` and checks any returned assignment
/// against it.
pub fn algorithm_a(system: &AtomSystem) -> SolveReport {
    let mut driver = Driver::new(system);
    let outcome = match driver.drive() {
        Ok(outcome) => outcome,
        Err(Failure(kind, message)) => SolveOutcome::InternalBoundExceeded(Diagnostic {
            kind,
            message,
            trace: driver.trace.clone(),
        }),
    };
    SolveReport {
        outcome,
        counters: driver.counters,
        trace: driver.trace,
    }
}

struct Driver<'a> {
    original: &'a AtomSystem,
    work: AtomSystem,
    bounds: Bounds,
    counters: StepCounters,
    trace: Vec<String>,
}

struct Failure(DiagnosticKind, String);

fn bound(message: String) -> Failure {
    Failure(DiagnosticKind::BoundExceeded, message)
}

fn precondition(message: impl ToString) -> Failure {
    Failure(DiagnosticKind::Precondition, message.to_string())
}

/// Control flow out of the simplification loop.
enum Simplified {
    Restart,
    AllDead,
    Stable(WeightedDigraph),
}

impl<'a> Driver<'a> {
    fn new(system: &'a AtomSystem) -> Self {
        Driver {
            original: system,
            work: system.clone(),
            bounds: Bounds::new(system.nvars(), system.atoms().len()),
            counters: StepCounters::default(),
            trace: Vec::new(),
        }
    }

    fn drive(&mut self) -> Result<SolveOutcome, Failure> {
        let mut last_measure: Option<(usize, usize)> = None;
        loop {
            let live = self.work.live_vars();
            let measure = (live.len(), self.work.two_var_count());
            if let Some(prev) = last_measure {
                if measure >= prev {
                    return Err(bound(format!("restart did not shrink the system: {prev:?} -> {measure:?}")));
                }
            }
            last_measure = Some(measure);
            self.trace.push(format!(
                "restart: {} live variables, {} atoms ({} two-variable)",
                measure.0,
                self.work.atoms().len(),
                measure.1
            ));

            // all offsets non-negative: zero on every live variable works
            if self.work.min_offset().is_none_or(|r| r.is_nonnegative()) {
                self.trace.push("all offsets non-negative".into());
                let zeros = self.on_live(&live, |_| crate::model::ExtValue::zero());
                return self.finish(zeros);
            }

            rule_reflexive(self.work.atoms_mut());
            rule_same_args_dominance(self.work.atoms_mut());

            let graph = match self.simplify(&live)? {
                Simplified::Restart => continue,
                Simplified::AllDead => return Ok(SolveOutcome::TrivialOnly),
                Simplified::Stable(g) => g,
            };

            if self.work.two_var_count() == 0 {
                self.trace.push("no two-variable atoms left".into());
                let solution = built_solution(&graph, &live, self.work.nvars()).map_err(precondition)?;
                return self.finish(solution);
            }

            let mut retained = Vec::new();
            let mut restart = false;
            let targets: Vec<MaxAtom> = self.work.atoms().iter().filter(|a| a.is_two_var()).copied().collect();
            for atom in targets {
                let first = self.decide((atom.left1, atom.left2), &atom)?;
                let second = self.decide((atom.left2, atom.left1), &atom)?;
                match (first.status, second.status) {
                    (false, false) => {
                        self.trace.push(format!("{atom}: no feasible ordering, killing {} and {}", atom.left1, atom.left2));
                        let killed = propagate_minus_infinity(&mut self.work, [atom.left1, atom.left2]);
                        self.trace.push(format!("killed {killed:?}"));
                        self.counters.loop4 += 1;
                        self.check_restart_counter("loop4", self.counters.loop4)?;
                        if self.work.live_vars().is_empty() {
                            return Ok(SolveOutcome::TrivialOnly);
                        }
                        restart = true;
                        break;
                    }
                    (true, true) => {
                        let (keep, drop) = (atom.left1, atom.left2);
                        self.trace.push(format!("{atom}: both orderings feasible, merging {drop} into {keep}"));
                        merge_variables(&mut self.work, keep, drop);
                        self.counters.loop2 += 1;
                        self.check_restart_counter("loop2", self.counters.loop2)?;
                        restart = true;
                        break;
                    }
                    (true, false) => retained.push(first),
                    (false, true) => retained.push(second),
                }
            }
            if restart {
                continue;
            }

            let combined = aggregate_decision_graphs(&retained).map_err(precondition)?;
            self.trace.push(format!(
                "aggregated {} decision graphs into {} arcs",
                retained.len(),
                combined.arc_count()
            ));
            let solution = built_solution(&combined, &live, self.work.nvars())
                .map_err(|e| precondition(format!("aggregated decision graph: {e}")))?;
            return self.finish(solution);
        }
    }

    /// Graph construction, circuit detection, closure and rule saturation until stable.
    fn simplify(&mut self, live: &BTreeSet<VarId>) -> Result<Simplified, Failure> {
        let mut repeats = 0u64;
        loop {
            let before = self.work.atoms().clone();
            let graph = graph_from_atoms(self.work.atoms(), live.iter().copied());
            if let Some(circuit) = positive_circuit(&graph) {
                self.trace.push(format!("positive circuit {circuit:?}"));
                let killed = propagate_minus_infinity(&mut self.work, circuit);
                self.trace.push(format!("killed {killed:?}"));
                self.counters.loop1 += 1;
                self.check_restart_counter("loop1", self.counters.loop1)?;
                return Ok(if self.work.live_vars().is_empty() {
                    Simplified::AllDead
                } else {
                    Simplified::Restart
                });
            }
            if !graph.is_empty() {
                let closure = max_weight_closure(&graph).map_err(precondition)?;
                self.work.atoms_mut().extend(closure_to_atoms(&closure));
            }
            saturate_rules(self.work.atoms_mut()).map_err(|e| bound(e.to_string()))?;
            self.note_atoms(self.work.atoms().len() as u64)?;
            if *self.work.atoms() == before {
                return Ok(Simplified::Stable(graph));
            }
            repeats += 1;
            self.counters.loop3 = self.counters.loop3.max(repeats);
            if repeats > self.bounds.simplify_limit() {
                return Err(bound(format!(
                    "simplification loop repeated {repeats} times, ceiling m = {}",
                    self.bounds.m
                )));
            }
        }
    }

    fn decide(&mut self, decision: (VarId, VarId), atom: &MaxAtom) -> Result<PhiResult, Failure> {
        let result = phi_with_limit(decision, atom, &self.work, self.bounds.phi_step_limit())
            .map_err(|e| {
                let message = format!("decision {} >= {} on {atom}: {e}", decision.0, decision.1);
                match e {
                    SolveError::PhiStepBound { .. } | SolveError::Rule(_) => bound(message),
                    _ => precondition(message),
                }
            })?;
        self.counters.phi_calls += 1;
        self.counters.phi_steps = self.counters.phi_steps.max(result.steps);
        self.note_atoms(result.max_atoms)?;
        Ok(result)
    }

    fn note_atoms(&mut self, size: u64) -> Result<(), Failure> {
        self.counters.max_atoms = self.counters.max_atoms.max(size);
        if size > self.bounds.atom_limit() {
            Err(bound(format!(
                "saturated atom set has {size} atoms, ceiling m + n^2 = {}",
                self.bounds.atom_limit()
            )))
        } else {
            Ok(())
        }
    }

    fn check_restart_counter(&self, name: &str, value: u64) -> Result<(), Failure> {
        if value > self.bounds.restart_limit() {
            Err(bound(format!("{name} reached {value}, ceiling n = {}", self.bounds.n)))
        } else {
            Ok(())
        }
    }

    fn on_live(&self, live: &BTreeSet<VarId>, value: impl Fn(VarId) -> crate::model::ExtValue) -> Assignment {
        let mut a = Assignment::minus_inf(self.work.nvars());
        for &v in live {
            a.set(v, value(v));
        }
        a
    }

    /// Expands merges and kills, then verifies against the input system.
    fn finish(&mut self, on_representatives: Assignment) -> Result<SolveOutcome, Failure> {
        let full = self.work.expand(&on_representatives);
        let report = verify(self.original, &full).map_err(precondition)?;
        let failed = |message: String| Failure(DiagnosticKind::VerifyFailed, message);
        if let Some(atom) = report.violated.first() {
            return Err(failed(format!(
                "candidate assignment violates {atom} ({} violated atoms)",
                report.violated.len()
            )));
        }
        if !report.nontrivial {
            return Err(failed("candidate assignment is trivial".into()));
        }
        Ok(SolveOutcome::NonTrivial(full))
    }
}
