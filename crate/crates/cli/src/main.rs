use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ctrd::exec::{self, check_ec, check_sc, con_observation, AbstractExecution};
use ctrd::runtime::cloud::CloudConfig;
use ctrd::runtime::explore::{explore, ExploreOptions};
use ctrd::runtime::schedule::{run, RunOutcome, Scheduler};
use ctrd::runtime::trace::{trace_to_json, TraceEntry};
use ctrd::runtime::wf::check_wf;
use ctrd::syntax::{parse_program, Program};
use ctrd::typecheck::typecheck_program;

const EXIT_TYPE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_CHECK: u8 = 3;
const EXIT_INCOMPLETE: u8 = 4;
const EXIT_NOT_LOW_EQUIVALENT: u8 = 5;

#[derive(Parser)]
#[command(
    name = "ctrd",
    version,
    about = "Check, run and explore consistency-typed programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Sched {
    Random,
    RoundRobin,
    DrainFair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum History {
    /// Only the events of the atomic rules.
    Con,
    /// Every event, unprojected.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum CheckName {
    Sc,
    Ec,
    Wf,
    Progress,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and typecheck programs.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run one schedule to quiescence.
    Run {
        file: PathBuf,
        /// Seed for the random scheduler (implies --sched random).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        sched: Option<Sched>,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        /// Write the trace as JSON to this file (`-` for standard output).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',')]
        check: Vec<CheckName>,
        #[arg(long, value_enum, default_value = "con")]
        history: History,
        #[arg(long)]
        servers: Option<usize>,
        /// Write a JSON run report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the recorded abstract execution as JSON to this file.
        #[arg(long)]
        execution: Option<PathBuf>,
    },
    /// Enumerate every schedule up to a depth.
    Explore {
        file: PathBuf,
        #[arg(long, default_value_t = 12)]
        max_depth: usize,
        #[arg(long, value_enum, value_delimiter = ',')]
        check: Vec<CheckName>,
        #[arg(long, value_enum, default_value = "con")]
        history: History,
        #[arg(long)]
        servers: Option<usize>,
    },
    /// Compare con observations of two programs differing in ava literals.
    Nif {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, default_value_t = 12)]
        max_depth: usize,
    },
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct RunReport {
    pub steps: usize,
    pub outcome: String,
    pub quiescent: bool,
    pub observation: BTreeMap<String, String>,
    pub verdicts: BTreeMap<String, BTreeMap<String, bool>>,
    pub trace: Option<String>,
}

enum Failure {
    Io(String),
    Load(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        match self {
            Failure::Io(m) => {
                eprintln!("error: {m}");
                ExitCode::from(EXIT_IO)
            }
            Failure::Load(m) => {
                eprintln!("{m}");
                ExitCode::from(EXIT_TYPE)
            }
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    let src = read(path)?;
    parse_program(&src).map_err(|ds| {
        Failure::Load(
            ds.iter()
                .map(|d| format!("{}:{d}", path.display()))
                .collect::<Vec<_>>()
                .join("\n"),
        )
    })
}

fn load_config(path: &Path, servers: Option<usize>) -> Result<CloudConfig, Failure> {
    let program = load_program(path)?;
    let typing = typecheck_program(&program)
        .map_err(|e| Failure::Load(format!("{}: {e}", path.display())))?;
    Ok(CloudConfig::new(&program, typing, servers))
}

fn write_out(path: &Path, contents: &str) -> Result<(), Failure> {
    if path == Path::new("-") {
        println!("{contents}");
        return Ok(());
    }
    fs::write(path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn history(trace: &[TraceEntry], which: History) -> Result<AbstractExecution, String> {
    let full = exec::record(trace).map_err(|e| e.to_string())?;
    Ok(match which {
        History::Con => exec::project_con(&full),
        History::Full => full,
    })
}

fn flags(pairs: &[(&str, bool)]) -> BTreeMap<String, bool> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn cmd_check(files: &[PathBuf]) -> ExitCode {
    let mut code = 0;
    for f in files {
        let program = match load_program(f) {
            Ok(p) => p,
            Err(e) => {
                let c = match &e {
                    Failure::Io(_) => EXIT_IO,
                    Failure::Load(_) => EXIT_TYPE,
                };
                code = code.max(c);
                e.report();
                continue;
            }
        };
        match typecheck_program(&program) {
            Ok(typing) => {
                let tys: Vec<String> = typing
                    .client_types
                    .iter()
                    .map(|(c, t)| format!("client {c}: {t}"))
                    .collect();
                println!("{}: ok ({})", f.display(), tys.join("; "));
            }
            Err(e) => {
                eprintln!("{}: {}", f.display(), e);
                code = code.max(EXIT_TYPE);
            }
        }
    }
    ExitCode::from(code)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    file: &Path,
    seed: Option<u64>,
    sched: Option<Sched>,
    max_steps: usize,
    trace_path: Option<&Path>,
    checks: &[CheckName],
    which: History,
    servers: Option<usize>,
    report_path: Option<&Path>,
    execution_path: Option<&Path>,
) -> Result<ExitCode, Failure> {
    let config = load_config(file, servers)?;
    let scheduler = match (sched, seed) {
        (Some(Sched::RoundRobin), _) => Scheduler::RoundRobin,
        (Some(Sched::DrainFair), _) => Scheduler::DrainFair,
        (Some(Sched::Random), s) => Scheduler::Seeded(s.unwrap_or(0)),
        (None, Some(s)) => Scheduler::Seeded(s),
        (None, None) => Scheduler::DrainFair,
    };
    let result = run(config, scheduler, max_steps);
    let cfg = &result.config;

    if let Some(p) = trace_path {
        write_out(p, &trace_to_json(&cfg.trace))?;
    }
    println!("outcome {} steps {}", result.outcome, result.steps);
    let observation: BTreeMap<String, String> = con_observation(cfg)
        .into_iter()
        .map(|(id, v)| (id.to_string(), v))
        .collect();
    for (id, v) in &observation {
        println!("observe {id} = {v}");
    }

    let mut verdicts = BTreeMap::new();
    let mut failed = false;
    let needs_history = checks
        .iter()
        .any(|c| matches!(c, CheckName::Sc | CheckName::Ec))
        || execution_path.is_some();
    let full = if needs_history {
        match exec::record(&cfg.trace) {
            Ok(e) => Some(e),
            Err(e) => {
                println!("CHECK history error={e}");
                failed = true;
                None
            }
        }
    } else {
        None
    };
    if let (Some(p), Some(full)) = (execution_path, &full) {
        let json = serde_json::to_string_pretty(&full.to_json()).expect("serializable");
        write_out(p, &json)?;
    }
    let mut checks = checks.to_vec();
    checks.sort();
    checks.dedup();
    for c in checks {
        match c {
            CheckName::Sc => {
                if let Some(full) = &full {
                    let e = match which {
                        History::Con => exec::project_con(full),
                        History::Full => full.clone(),
                    };
                    let v = check_sc(&e);
                    println!("{v}");
                    if let Some(w) = &v.witness {
                        println!("  witness: {w}");
                    }
                    failed |= !v.passed();
                    verdicts.insert(
                        "sc".into(),
                        flags(&[
                            ("po_in_vis", v.po_in_vis),
                            ("ar_vis_closure", v.ar_vis_closure),
                            ("ar_neg_vis_closure", v.ar_neg_vis_closure),
                            ("rval", v.rval_ok),
                        ]),
                    );
                }
            }
            CheckName::Ec => {
                if let Some(full) = &full {
                    match check_ec(&exec::project_ava(full), cfg) {
                        Ok(v) => {
                            println!("{v}");
                            if let Some(w) = &v.witness {
                                println!("  witness: {w}");
                            }
                            failed |= !v.passed();
                            verdicts.insert(
                                "ec".into(),
                                flags(&[
                                    ("eventual_visibility", v.eventual_visibility),
                                    ("rval", v.rval_ok),
                                    ("converged", v.converged),
                                ]),
                            );
                        }
                        Err(e) => {
                            println!("CHECK ec error={e}");
                            failed = true;
                            verdicts.insert("ec".into(), flags(&[("quiescent", false)]));
                        }
                    }
                }
            }
            CheckName::Wf => {
                let vs = check_wf(cfg);
                println!("CHECK wf violations={}", vs.len());
                for v in &vs {
                    println!("  {v}");
                }
                failed |= !vs.is_empty();
                verdicts.insert("wf".into(), flags(&[("ok", vs.is_empty())]));
            }
            CheckName::Progress => {
                let ok = !matches!(&result.outcome, RunOutcome::Fault(e) if !matches!(e, ctrd::runtime::RuntimeError::DuplicatedIdentifier(_)));
                println!("CHECK progress {}", if ok { "OK" } else { "FAIL" });
                failed |= !ok;
                verdicts.insert("progress".into(), flags(&[("ok", ok)]));
            }
        }
    }

    let quiescent = result.outcome == RunOutcome::Quiescent;
    if let Some(p) = report_path {
        let report = RunReport {
            steps: result.steps,
            outcome: result.outcome.to_string(),
            quiescent,
            observation,
            verdicts,
            trace: trace_path.map(|p| p.display().to_string()),
        };
        write_out(
            p,
            &serde_json::to_string_pretty(&report).expect("serializable"),
        )?;
    }
    Ok(if !quiescent {
        ExitCode::from(EXIT_INCOMPLETE)
    } else if failed {
        ExitCode::from(EXIT_CHECK)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_explore(
    file: &Path,
    depth: usize,
    checks: &[CheckName],
    which: History,
    servers: Option<usize>,
) -> Result<ExitCode, Failure> {
    let config = load_config(file, servers)?;
    let want = |c: CheckName| checks.contains(&c);
    let mut opts = ExploreOptions::new(depth);
    opts.check_wf = want(CheckName::Wf);
    opts.check_progress = want(CheckName::Progress);
    opts.distinguish_histories = want(CheckName::Sc);

    let mut sc_checked = 0usize;
    let mut sc_failed = 0usize;
    let mut first_witness: Option<String> = None;
    let mut history_errors = 0usize;
    let stats = explore(&config, &opts, &mut |leaf, _| {
        if !want(CheckName::Sc) {
            return;
        }
        sc_checked += 1;
        match history(&leaf.trace, which) {
            Ok(e) => {
                let v = check_sc(&e);
                if !v.passed() {
                    sc_failed += 1;
                    if first_witness.is_none() {
                        let rules: Vec<String> = leaf
                            .trace
                            .iter()
                            .map(|t| match t.client {
                                Some(c) => format!("{}@{c}", t.rule),
                                None => format!(
                                    "{}@s{}",
                                    t.rule,
                                    t.server.map_or("-".into(), |s| s.to_string())
                                ),
                            })
                            .collect();
                        first_witness = Some(format!(
                            "{v}\n  witness: {}\n  schedule: {}",
                            v.witness.clone().unwrap_or_default(),
                            rules.join(" ")
                        ));
                    }
                }
            }
            Err(_) => history_errors += 1,
        }
    });
    let stats = match stats {
        Ok(s) => s,
        Err(e) => {
            println!("{e}");
            return Ok(ExitCode::from(EXIT_INCOMPLETE));
        }
    };
    println!(
        "explored states={} traces={} quiescent={} deadlock={} bound={}",
        stats.states,
        stats.leaves,
        stats.quiescent_leaves,
        stats.deadlock_leaves,
        stats.bound_leaves
    );
    let mut failed = false;
    if want(CheckName::Sc) {
        println!(
            "CHECK sc traces={} violations={} history={}",
            sc_checked,
            sc_failed + history_errors,
            match which {
                History::Con => "con",
                History::Full => "full",
            }
        );
        if let Some(w) = first_witness {
            println!("  first violation: {w}");
        }
        failed |= sc_failed + history_errors > 0;
    }
    if want(CheckName::Wf) {
        println!("CHECK wf violations={}", stats.wf_violations.len());
        for v in stats.wf_violations.iter().take(5) {
            println!("  {v}");
        }
        failed |= !stats.wf_violations.is_empty();
    }
    if want(CheckName::Progress) {
        println!(
            "CHECK progress violations={} duplicated={} blocked_states={}",
            stats.progress_violations.len(),
            stats.duplicated_faults,
            stats.blocked_states
        );
        for v in stats.progress_violations.iter().take(5) {
            println!("  {v}");
        }
        failed |= !stats.progress_violations.is_empty();
    }
    if want(CheckName::Ec) {
        println!("CHECK ec skipped: use `run --sched drain-fair --check ec`");
    }
    Ok(if failed {
        ExitCode::from(EXIT_CHECK)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_nif(left: &Path, right: &Path, depth: usize) -> Result<ExitCode, Failure> {
    let a = load_program(left)?;
    let b = load_program(right)?;
    match exec::check_noninterference(&a, &b, depth) {
        Ok(v) => {
            let show = |set: &std::collections::BTreeSet<exec::Observation>| -> Vec<String> {
                set.iter()
                    .map(|o| {
                        let kv: Vec<String> = o.iter().map(|(k, v)| format!("{k} = {v}")).collect();
                        format!("{{{}}}", kv.join(", "))
                    })
                    .collect()
            };
            println!("left  observations: {}", show(&v.left).join(" "));
            println!("right observations: {}", show(&v.right).join(" "));
            println!(
                "CHECK nif equal={} bound_leaves={}",
                if v.equal() { "OK" } else { "FAIL" },
                v.bound_leaves
            );
            Ok(if v.equal() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK)
            })
        }
        Err(exec::NifError::NotLowEquivalent(why)) => {
            eprintln!("ProgramsNotLowEquivalent: {why}");
            Ok(ExitCode::from(EXIT_NOT_LOW_EQUIVALENT))
        }
        Err(exec::NifError::Type(e)) => Err(Failure::Load(e.to_string())),
        Err(exec::NifError::Explore(e)) => {
            println!("{e}");
            Ok(ExitCode::from(EXIT_INCOMPLETE))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Check { files } => Ok(cmd_check(&files)),
        Command::Run {
            file,
            seed,
            sched,
            max_steps,
            trace,
            check,
            history,
            servers,
            report,
            execution,
        } => cmd_run(
            &file,
            seed,
            sched,
            max_steps,
            trace.as_deref(),
            &check,
            history,
            servers,
            report.as_deref(),
            execution.as_deref(),
        ),
        Command::Explore {
            file,
            max_depth,
            check,
            history,
            servers,
        } => cmd_explore(&file, max_depth, &check, history, servers),
        Command::Nif {
            left,
            right,
            max_depth,
        } => cmd_nif(&left, &right, max_depth),
    };
    out.unwrap_or_else(Failure::report)
}
