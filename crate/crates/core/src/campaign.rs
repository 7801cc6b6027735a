//! Differential testing of the decision procedure against the descent oracle,
//! with line-delimited JSON reports and seed-exact replay.

use std::io::{self, BufRead, Write};
use std::ops::RangeInclusive;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format::emit_instance;
use crate::generate::{generate_planted, generate, GenMode};
use crate::model::{verify, Assignment, AtomSystem};
use crate::oracle::{kleene_descent, Verdict};
use crate::solver::{algorithm_a, Bounds, DiagnosticKind, SolveOutcome, StepCounters};

/// Trials executed between report flushes and abort checks.
const CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub trials: u64,
    /// Upper bound on variables per trial; each trial samples from `1..=max_vars`.
    pub max_vars: usize,
    /// Upper bound on atoms per trial; each trial samples from `1..=max_atoms`.
    pub max_atoms: usize,
    pub offset_min: i64,
    pub offset_max: i64,
    pub seed: u64,
    /// Fixed mode, or `None` to rotate through every mode.
    pub mode: Option<GenMode>,
}

impl CampaignConfig {
    pub fn offsets(&self) -> RangeInclusive<i64> {
        self.offset_min..=self.offset_max
    }
}

/// Everything needed to regenerate one trial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub trial: u64,
    pub seed: u64,
    pub nvars: usize,
    pub atoms: usize,
    pub offset_min: i64,
    pub offset_max: i64,
    pub mode: GenMode,
}

impl TrialSpec {
    /// Derived from the campaign seed and trial index only, never from scheduling.
    pub fn derive(config: &CampaignConfig, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(trial);
        let mode = config
            .mode
            .unwrap_or(GenMode::ALL[(trial % GenMode::ALL.len() as u64) as usize]);
        TrialSpec {
            trial,
            seed: rng.gen(),
            nvars: rng.gen_range(1..=config.max_vars.max(1)),
            atoms: rng.gen_range(1..=config.max_atoms.max(1)),
            offset_min: config.offset_min,
            offset_max: config.offset_max,
            mode,
        }
    }

    pub fn instance(&self) -> AtomSystem {
        generate(self.nvars, self.atoms, self.offset_min..=self.offset_max, self.seed, self.mode)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverVerdict {
    Sat,
    Trivial,
    Internal(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleOutcome {
    Sat,
    Trivial,
    Error(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyResult {
    Passed,
    Failed { atom: String },
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// Solver and oracle disagree on triviality.
    VerdictMismatch,
    /// A returned assignment failed an atom.
    VerifyFailed,
    /// The solver gave up with a diagnostic.
    Internal,
    /// A planted instance was not solved.
    PlantedMissed,
    /// A loop, step or size ceiling was crossed.
    BoundViolation,
    /// A verified solver assignment where the oracle claims none exists.
    OracleFalsified,
    OracleError,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub spec: TrialSpec,
    pub instance: String,
    pub algorithm_a_verdict: SolverVerdict,
    pub algorithm_a_assignment: Option<String>,
    pub oracle_verdict: OracleOutcome,
    pub oracle_assignment: Option<String>,
    pub verify_result: VerifyResult,
    pub counters: StepCounters,
    pub bound_violations: Vec<String>,
    pub flags: Vec<Flag>,
    /// Excluded from replay comparison.
    pub wall_time_us: u64,
}

impl TrialRecord {
    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }

    /// Equality ignoring wall time.
    pub fn same_result(&self, other: &TrialRecord) -> bool {
        TrialRecord {
            wall_time_us: 0,
            ..self.clone()
        } == TrialRecord {
            wall_time_us: 0,
            ..other.clone()
        }
    }
}

fn show(a: &Assignment) -> String {
    a.iter().map(|(_, v)| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Runs solver and oracle on one instance. `planted` asserts ground truth.
pub fn judge(spec: TrialSpec, system: &AtomSystem, planted: bool) -> TrialRecord {
    let start = Instant::now();
    let report = algorithm_a(system);
    let wall_time_us = start.elapsed().as_micros() as u64;
    let bounds = Bounds::new(system.nvars(), system.atoms().len());
    let mut bound_violations = report.counters.violations(&bounds);
    if let SolveOutcome::InternalBoundExceeded(d) = &report.outcome {
        if d.kind == DiagnosticKind::BoundExceeded {
            bound_violations.push(d.message.clone());
        }
    }
    let mut flags = Vec::new();

    let (algorithm_a_verdict, algorithm_a_assignment, verify_result) = match &report.outcome {
        SolveOutcome::NonTrivial(a) => {
            let check = verify(system, a).expect("assignment over the system's universe");
            let verify_result = match check.violated.first() {
                Some(atom) => VerifyResult::Failed { atom: atom.to_string() },
                None if !check.nontrivial => VerifyResult::Failed {
                    atom: "assignment is trivial".into(),
                },
                None => VerifyResult::Passed,
            };
            (SolverVerdict::Sat, Some(show(a)), verify_result)
        }
        SolveOutcome::TrivialOnly => (SolverVerdict::Trivial, None, VerifyResult::NotApplicable),
        SolveOutcome::InternalBoundExceeded(d) => (
            SolverVerdict::Internal(d.message.clone()),
            None,
            VerifyResult::NotApplicable,
        ),
    };
    let (oracle_verdict, oracle_assignment) = match kleene_descent(system) {
        Ok(v) => match v.verdict {
            Verdict::NonTrivial(a) => (OracleOutcome::Sat, Some(show(&a))),
            Verdict::TrivialOnly => (OracleOutcome::Trivial, None),
        },
        Err(e) => (OracleOutcome::Error(e.to_string()), None),
    };

    let solver_verified = verify_result == VerifyResult::Passed;
    if matches!(verify_result, VerifyResult::Failed { .. }) {
        flags.push(Flag::VerifyFailed);
    }
    if matches!(algorithm_a_verdict, SolverVerdict::Internal(_)) {
        flags.push(Flag::Internal);
    }
    match (&algorithm_a_verdict, &oracle_verdict) {
        (_, OracleOutcome::Error(_)) => flags.push(Flag::OracleError),
        (SolverVerdict::Sat, OracleOutcome::Trivial) | (SolverVerdict::Trivial, OracleOutcome::Sat) => {
            flags.push(Flag::VerdictMismatch)
        }
        _ => {}
    }
    if solver_verified && oracle_verdict == OracleOutcome::Trivial {
        flags.push(Flag::OracleFalsified);
    }
    if planted && oracle_verdict == OracleOutcome::Trivial && !flags.contains(&Flag::OracleFalsified) {
        flags.push(Flag::OracleFalsified);
    }
    if planted && !solver_verified {
        flags.push(Flag::PlantedMissed);
    }
    if !bound_violations.is_empty() {
        flags.push(Flag::BoundViolation);
    }

    TrialRecord {
        instance: emit_instance(system),
        spec,
        algorithm_a_verdict,
        algorithm_a_assignment,
        oracle_verdict,
        oracle_assignment,
        verify_result,
        counters: report.counters,
        bound_violations,
        flags,
        wall_time_us,
    }
}

pub fn run_trial(spec: &TrialSpec) -> TrialRecord {
    let system = spec.instance();
    judge(spec.clone(), &system, spec.mode == GenMode::Planted)
}

/// Re-executes a record from its spec.
pub fn replay(record: &TrialRecord) -> TrialRecord {
    run_trial(&record.spec)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub trials_run: u64,
    pub agreements: u64,
    pub disagreements: u64,
    pub solver_sat: u64,
    pub solver_trivial: u64,
    pub verified: u64,
    pub verify_failures: u64,
    pub internal: u64,
    pub planted_trials: u64,
    pub planted_solved: u64,
    pub bound_violations: u64,
    pub flagged: u64,
    pub persisted: u64,
    /// Componentwise maximum of the trial counters.
    pub max_counters: StepCounters,
    pub aborted: Option<String>,
}

impl CampaignSummary {
    pub fn agreement_rate(&self) -> f64 {
        if self.trials_run == 0 {
            1.0
        } else {
            self.agreements as f64 / self.trials_run as f64
        }
    }

    fn absorb(&mut self, r: &TrialRecord) {
        self.trials_run += 1;
        let agree = matches!(
            (&r.algorithm_a_verdict, &r.oracle_verdict),
            (SolverVerdict::Sat, OracleOutcome::Sat) | (SolverVerdict::Trivial, OracleOutcome::Trivial)
        );
        if agree {
            self.agreements += 1;
        } else {
            self.disagreements += 1;
        }
        match r.algorithm_a_verdict {
            SolverVerdict::Sat => self.solver_sat += 1,
            SolverVerdict::Trivial => self.solver_trivial += 1,
            SolverVerdict::Internal(_) => self.internal += 1,
        }
        match r.verify_result {
            VerifyResult::Passed => self.verified += 1,
            VerifyResult::Failed { .. } => self.verify_failures += 1,
            VerifyResult::NotApplicable => {}
        }
        if r.spec.mode == GenMode::Planted {
            self.planted_trials += 1;
            if r.verify_result == VerifyResult::Passed {
                self.planted_solved += 1;
            }
        }
        if !r.bound_violations.is_empty() {
            self.bound_violations += 1;
        }
        if r.is_flagged() {
            self.flagged += 1;
        }
        let (m, c) = (&mut self.max_counters, &r.counters);
        m.loop1 = m.loop1.max(c.loop1);
        m.loop2 = m.loop2.max(c.loop2);
        m.loop3 = m.loop3.max(c.loop3);
        m.loop4 = m.loop4.max(c.loop4);
        m.phi_calls = m.phi_calls.max(c.phi_calls);
        m.phi_steps = m.phi_steps.max(c.phi_steps);
        m.max_atoms = m.max_atoms.max(c.max_atoms);
    }
}

/// One line of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportLine {
    Config(CampaignConfig),
    Trial(Box<TrialRecord>),
    Summary(CampaignSummary),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignReport {
    pub summary: CampaignSummary,
    pub flagged: Vec<TrialRecord>,
}

fn write_line(sink: &mut dyn Write, line: &ReportLine) -> io::Result<()> {
    serde_json::to_writer(&mut *sink, line)?;
    sink.write_all(b"\n")
}

/// Runs the campaign in parallel chunks, appending every flagged record to
/// `sink` in trial order. Stops after the chunk in which the oracle is
/// falsified.
pub fn run_differential(config: &CampaignConfig, sink: &mut dyn Write) -> io::Result<CampaignReport> {
    write_line(sink, &ReportLine::Config(config.clone()))?;
    let mut summary = CampaignSummary::default();
    let mut flagged = Vec::new();
    let mut next = 0u64;
    while next < config.trials && summary.aborted.is_none() {
        let end = (next + CHUNK as u64).min(config.trials);
        let records: Vec<TrialRecord> = (next..end)
            .into_par_iter()
            .map(|t| run_trial(&TrialSpec::derive(config, t)))
            .collect();
        for record in records {
            summary.absorb(&record);
            if record.is_flagged() {
                write_line(sink, &ReportLine::Trial(Box::new(record.clone())))?;
                summary.persisted += 1;
                if record.flags.contains(&Flag::OracleFalsified) && summary.aborted.is_none() {
                    summary.aborted = Some(format!("oracle falsified on trial {}", record.spec.trial));
                }
                flagged.push(record);
            }
        }
        sink.flush()?;
        next = end;
    }
    write_line(sink, &ReportLine::Summary(summary.clone()))?;
    sink.flush()?;
    Ok(CampaignReport { summary, flagged })
}

/// Parses a report, skipping nothing: a malformed line is an error.
pub fn read_report(reader: impl BufRead) -> io::Result<Vec<ReportLine>> {
    reader
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|l| {
            let l = l?;
            serde_json::from_str(&l).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub nvars: usize,
    pub atoms: usize,
    pub verdict: SolverVerdict,
    pub verified: bool,
    pub wall_time_us: u64,
    pub counters: StepCounters,
    pub bound_violations: Vec<String>,
}

/// Solves one planted instance per `(n, m)` size.
pub fn bench(sizes: &[(usize, usize)], seed: u64, offsets: RangeInclusive<i64>) -> Vec<BenchRow> {
    sizes
        .iter()
        .map(|&(n, m)| {
            let planted = generate_planted(n, m, offsets.clone(), seed);
            let system = &planted.system;
            let start = Instant::now();
            let report = algorithm_a(system);
            let wall_time_us = start.elapsed().as_micros() as u64;
            let (verdict, verified) = match &report.outcome {
                SolveOutcome::NonTrivial(a) => (
                    SolverVerdict::Sat,
                    verify(system, a).map(|r| r.satisfied && r.nontrivial).unwrap_or(false),
                ),
                SolveOutcome::TrivialOnly => (SolverVerdict::Trivial, false),
                SolveOutcome::InternalBoundExceeded(d) => (SolverVerdict::Internal(d.message.clone()), false),
            };
            BenchRow {
                nvars: n,
                atoms: system.atoms().len(),
                verdict,
                verified,
                wall_time_us,
                counters: report.counters,
                bound_violations: report.counters.violations(&Bounds::new(n, system.atoms().len())),
            }
        })
        .collect()
}
