//! `maxatom`: solve, check and fuzz max-atom systems.
//!
//! Exit codes: 0 sat, 1 trivial (or a violated solution), 2 input error,
//! 3 internal diagnostic or a failed campaign gate.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maxatom::campaign::{bench, run_differential, CampaignConfig, SolverVerdict};
use maxatom::format::{emit_instance, emit_solution, parse_instance, parse_solution, Solution};
use maxatom::generate::{generate, GenMode};
use maxatom::model::{verify, AtomSystem};
use maxatom::oracle::{exhaustive_search, kleene_descent, kleene_descent_with_threshold, ScaledSystem, Verdict};
use maxatom::solver::{algorithm_a, SolveOutcome};

const SAT: u8 = 0;
const TRIVIAL: u8 = 1;
const INPUT: u8 = 2;
const INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "maxatom", version, about = "Max-atom constraint solver and differential tester")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide an instance and print a solution.
    Solve { file: PathBuf },
    /// Solve with a reference oracle.
    Oracle {
        file: PathBuf,
        /// Descent cutoff in scaled offset units (default n * R).
        #[arg(long)]
        threshold: Option<i64>,
        /// Brute-force grid search instead of descent (at most 5 variables).
        #[arg(long)]
        exhaustive: bool,
    },
    /// Check a solution file against an instance.
    Verify { file: PathBuf, solution: PathBuf },
    /// Print a random instance.
    Gen {
        #[arg(long)]
        vars: usize,
        #[arg(long)]
        atoms: usize,
        /// Offsets are drawn from [-range, range].
        #[arg(long)]
        range: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "uniform")]
        mode: GenMode,
    },
    /// Differential campaign against the descent oracle.
    Fuzz {
        #[arg(long)]
        trials: u64,
        /// Each trial draws its variable count from 1..=vars.
        #[arg(long)]
        vars: usize,
        /// Each trial draws its atom count from 1..=atoms.
        #[arg(long)]
        atoms: usize,
        #[arg(long)]
        range: u32,
        #[arg(long)]
        seed: u64,
        /// Line-delimited JSON report of flagged trials.
        #[arg(long)]
        report: PathBuf,
        /// Fixed generator mode; by default trials rotate through all modes.
        #[arg(long)]
        mode: Option<GenMode>,
    },
    /// Time the solver on planted instances.
    Bench {
        /// Comma-separated sizes such as `10x20,20x40`.
        #[arg(long, value_parser = parse_sizes)]
        sizes: Sizes,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        range: u32,
    },
}

#[derive(Clone, Debug)]
struct Sizes(Vec<(usize, usize)>);

fn parse_sizes(text: &str) -> Result<Sizes, String> {
    text.split(',')
        .map(|item| {
            let (n, m) = item
                .trim()
                .split_once('x')
                .ok_or_else(|| format!("expected NxM, found {item:?}"))?;
            let n: usize = n.parse().map_err(|_| format!("bad variable count in {item:?}"))?;
            let m: usize = m.parse().map_err(|_| format!("bad atom count in {item:?}"))?;
            if n == 0 {
                return Err(format!("no variables in {item:?}"));
            }
            Ok((n, m))
        })
        .collect::<Result<_, _>>()
        .map(Sizes)
}

/// Error that ends the process with a specific code.
struct Exit(u8, String);

impl From<io::Error> for Exit {
    fn from(e: io::Error) -> Self {
        Exit(INTERNAL, e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Exit> {
    fs::read_to_string(path).map_err(|e| Exit(INPUT, format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<AtomSystem, Exit> {
    parse_instance(&read(path)?).map_err(|e| Exit(INPUT, format!("{}: {e}", path.display())))
}

fn solve(file: &Path) -> Result<u8, Exit> {
    let system = load(file)?;
    let report = algorithm_a(&system);
    match report.outcome {
        SolveOutcome::NonTrivial(a) => {
            print!("{}", emit_solution(&Solution::Sat(a)));
            Ok(SAT)
        }
        SolveOutcome::TrivialOnly => {
            print!("{}", emit_solution(&Solution::Trivial));
            Ok(TRIVIAL)
        }
        SolveOutcome::InternalBoundExceeded(d) => {
            let mut err = io::stderr().lock();
            writeln!(err, "internal: {}", d.message)?;
            for line in &d.trace {
                writeln!(err, "  {line}")?;
            }
            write!(err, "instance:\n{}", emit_instance(&system))?;
            Ok(INTERNAL)
        }
    }
}

fn oracle(file: &Path, threshold: Option<i64>, exhaustive: bool) -> Result<u8, Exit> {
    let system = load(file)?;
    let out = if exhaustive {
        let depth = ScaledSystem::new(&system)
            .and_then(|s| s.default_threshold())
            .map_err(|e| Exit(INPUT, e.to_string()))?;
        exhaustive_search(&system, threshold.unwrap_or(depth))
    } else {
        match threshold {
            Some(t) => kleene_descent_with_threshold(&system, t),
            None => kleene_descent(&system),
        }
    }
    .map_err(|e| Exit(INPUT, e.to_string()))?;
    eprintln!("iterations {} threshold {}", out.iterations, out.threshold);
    match out.verdict {
        Verdict::NonTrivial(a) => {
            print!("{}", emit_solution(&Solution::Sat(a)));
            Ok(SAT)
        }
        Verdict::TrivialOnly => {
            print!("{}", emit_solution(&Solution::Trivial));
            Ok(TRIVIAL)
        }
    }
}

fn check(file: &Path, solution: &Path) -> Result<u8, Exit> {
    let system = load(file)?;
    let parsed = parse_solution(&read(solution)?, system.nvars())
        .map_err(|e| Exit(INPUT, format!("{}: {e}", solution.display())))?;
    let Solution::Sat(a) = parsed else {
        println!("trivial: the all minus infinity assignment satisfies every system");
        return Ok(TRIVIAL);
    };
    let report = verify(&system, &a).map_err(|e| Exit(INPUT, e.to_string()))?;
    for atom in &report.violated {
        println!("violated {atom}");
    }
    if !report.satisfied {
        return Ok(TRIVIAL);
    }
    if !report.nontrivial {
        println!("ok (trivial)");
        return Ok(TRIVIAL);
    }
    println!("ok");
    Ok(SAT)
}

fn fuzz(config: CampaignConfig, report: &Path) -> Result<u8, Exit> {
    let file = fs::File::create(report).map_err(|e| Exit(INPUT, format!("{}: {e}", report.display())))?;
    let mut sink = BufWriter::new(file);
    let out = run_differential(&config, &mut sink)?;
    let s = &out.summary;
    println!("trials        {}", s.trials_run);
    println!("agreement     {}/{} ({:.4})", s.agreements, s.trials_run, s.agreement_rate());
    println!("solver sat    {} (verified {}, failed {})", s.solver_sat, s.verified, s.verify_failures);
    println!("solver triv   {}", s.solver_trivial);
    println!("internal      {}", s.internal);
    println!("planted       {}/{}", s.planted_solved, s.planted_trials);
    println!("bound viol.   {}", s.bound_violations);
    println!("persisted     {}/{}", s.persisted, s.flagged);
    let c = &s.max_counters;
    println!(
        "max counters  loop1 {} loop2 {} loop3 {} loop4 {} phi_steps {} atoms {}",
        c.loop1, c.loop2, c.loop3, c.loop4, c.phi_steps, c.max_atoms
    );
    if let Some(reason) = &s.aborted {
        println!("aborted: {reason}");
    }
    let failed = s.verify_failures > 0
        || s.internal > 0
        || s.bound_violations > 0
        || s.planted_solved < s.planted_trials
        || s.aborted.is_some();
    Ok(if failed { INTERNAL } else { SAT })
}

fn run(cli: Cli) -> Result<u8, Exit> {
    match cli.command {
        Command::Solve { file } => solve(&file),
        Command::Oracle {
            file,
            threshold,
            exhaustive,
        } => oracle(&file, threshold, exhaustive),
        Command::Verify { file, solution } => check(&file, &solution),
        Command::Gen {
            vars,
            atoms,
            range,
            seed,
            mode,
        } => {
            if vars == 0 {
                return Err(Exit(INPUT, "--vars must be at least 1".into()));
            }
            let r = i64::from(range);
            print!("{}", emit_instance(&generate(vars, atoms, -r..=r, seed, mode)));
            Ok(SAT)
        }
        Command::Fuzz {
            trials,
            vars,
            atoms,
            range,
            seed,
            report,
            mode,
        } => {
            if vars == 0 || atoms == 0 {
                return Err(Exit(INPUT, "--vars and --atoms must be at least 1".into()));
            }
            let r = i64::from(range);
            let config = CampaignConfig {
                trials,
                max_vars: vars,
                max_atoms: atoms,
                offset_min: -r,
                offset_max: r,
                seed,
                mode,
            };
            fuzz(config, &report)
        }
        Command::Bench { sizes, seed, range } => {
            let r = i64::from(range);
            let rows = bench(&sizes.0, seed, -r..=r);
            println!("{:>5} {:>6} {:>8} {:>10} {:>6} {:>6} {:>6} {:>6} {:>12} {:>6}", "n", "m", "verdict", "ms", "loop1", "loop2", "loop3", "loop4", "phi_steps", "viol");
            let mut code = SAT;
            for row in rows {
                let verdict = match &row.verdict {
                    SolverVerdict::Sat if row.verified => "sat",
                    SolverVerdict::Sat => "badsat",
                    SolverVerdict::Trivial => "trivial",
                    SolverVerdict::Internal(_) => "internal",
                };
                let c = row.counters;
                println!(
                    "{:>5} {:>6} {:>8} {:>10.1} {:>6} {:>6} {:>6} {:>6} {:>12} {:>6}",
                    row.nvars,
                    row.atoms,
                    verdict,
                    row.wall_time_us as f64 / 1000.0,
                    c.loop1,
                    c.loop2,
                    c.loop3,
                    c.loop4,
                    c.phi_steps,
                    row.bound_violations.len()
                );
                if verdict != "sat" || !row.bound_violations.is_empty() {
                    code = INTERNAL;
                }
            }
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Exit(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
