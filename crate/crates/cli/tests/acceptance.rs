//! One line per acceptance criterion. Runs without the libtest harness so
//! the lines always reach stdout.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ctrd::clone::{isomorphic, reachable_graph};
use ctrd::exec::{check_ec, check_noninterference, check_sc, project_con, record};
use ctrd::lattice::LatticeValue;
use ctrd::rng::SplitMix64;
use ctrd::runtime::explore::{explore, ExploreOptions};
use ctrd::runtime::trace::atomic_step_count;
use ctrd::runtime::{erase, run, CloudConfig, RunOutcome, Scheduler};
use ctrd::syntax::{parse_program, Identifier, Label, Program};
use ctrd::typecheck::typecheck_program;

fn corpus(dir: &str) -> Vec<PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(dir);
    let mut files: Vec<PathBuf> = fs::read_dir(&root)
        .unwrap_or_else(|e| panic!("{}: {e}", root.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "ctrd"))
        .collect();
    files.sort();
    files
}

fn name(p: &Path) -> String {
    let dir = p
        .parent()
        .and_then(|d| d.file_name())
        .unwrap()
        .to_string_lossy();
    format!("{dir}/{}", p.file_name().unwrap().to_string_lossy())
}

fn program(p: &Path) -> Result<Program, String> {
    let src = fs::read_to_string(p).map_err(|e| e.to_string())?;
    parse_program(&src).map_err(|d| format!("{}: {d:?}", name(p)))
}

fn load(p: &Path) -> Result<CloudConfig, String> {
    let src = fs::read_to_string(p).map_err(|e| e.to_string())?;
    CloudConfig::from_source(&src, None).map_err(|e| format!("{}: {e}", name(p)))
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, || format!("took {t:.2?}, limit {limit:?}"))
}

fn typechecker_corpus() -> Outcome {
    let start = Instant::now();
    let accept = corpus("accept");
    let reject = corpus("reject");
    ensure(accept.len() >= 12 && reject.len() >= 12, || {
        format!("{} accept / {} reject programs", accept.len(), reject.len())
    })?;
    for p in &accept {
        typecheck_program(&program(p)?).map_err(|e| format!("{} rejected: {e}", name(p)))?;
    }
    for p in &reject {
        let src = fs::read_to_string(p).unwrap();
        let expected = src
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("// expect: "))
            .ok_or_else(|| format!("{} has no expect line", name(p)))?
            .trim()
            .to_string();
        let got = match parse_program(&src) {
            Err(d) => format!("{:?}", d[0].kind),
            Ok(prog) => match typecheck_program(&prog) {
                Ok(_) => return Err(format!("{} accepted", name(p))),
                Err(e) => e.error.kind.as_str().to_string(),
            },
        };
        ensure(got == expected, || {
            format!("{}: expected {expected}, got {got}", name(p))
        })?;
    }
    within(start, Duration::from_secs(1))?;
    Ok(format!(
        "{} accepted, {} rejected with the expected kind",
        accept.len(),
        reject.len()
    ))
}

fn random_lattice_value(rng: &mut SplitMix64, nat: bool) -> LatticeValue {
    if nat {
        LatticeValue::nat(rng.below(64) as u64)
    } else {
        let n = rng.below(5);
        LatticeValue::set((0..n).map(|_| ((b'a' + rng.below(6) as u8) as char).to_string()))
    }
}

fn lattice_laws(a: &LatticeValue, b: &LatticeValue, c: &LatticeValue) -> Result<(), String> {
    let j = |x: &LatticeValue, y: &LatticeValue| x.join(y).unwrap();
    let m = |x: &LatticeValue, y: &LatticeValue| x.meet(y).unwrap();
    let le = |x: &LatticeValue, y: &LatticeValue| x.leq(y).unwrap();
    let laws = [
        ("join commutative", j(a, b) == j(b, a)),
        ("join associative", j(&j(a, b), c) == j(a, &j(b, c))),
        ("join idempotent", j(a, a) == *a),
        ("meet commutative", m(a, b) == m(b, a)),
        ("meet associative", m(&m(a, b), c) == m(a, &m(b, c))),
        ("absorption", j(a, &m(a, b)) == *a && m(a, &j(a, b)) == *a),
        ("join is an upper bound", le(a, &j(a, b)) && le(b, &j(a, b))),
        ("join is least", !(le(a, c) && le(b, c)) || le(&j(a, b), c)),
        ("order agrees with join", le(a, b) == (j(a, b) == *b)),
        ("antisymmetry", !(le(a, b) && le(b, a)) || a == b),
        ("transitivity", !(le(a, b) && le(b, c)) || le(a, c)),
    ];
    match laws.iter().find(|(_, ok)| !ok) {
        Some((law, _)) => Err(format!("{law} fails on {a:?}, {b:?}, {c:?}")),
        None => Ok(()),
    }
}

fn label_algebra() -> Outcome {
    let start = Instant::now();
    let mut triples = 0;
    for a in Label::ALL {
        for b in Label::ALL {
            for c in Label::ALL {
                triples += 1;
                let ok = a.join(b) == b.join(a)
                    && a.join(b).join(c) == a.join(b.join(c))
                    && a.join(a) == a
                    && a.meet(b) == b.meet(a)
                    && a.meet(b).meet(c) == a.meet(b.meet(c))
                    && a.join(a.meet(b)) == a
                    && a.leq(b) == (a.join(b) == b)
                    && (!(a.leq(b) && b.leq(c)) || a.leq(c))
                    && (!(a.leq(b) && b.leq(a)) || a == b)
                    && (!(a.leq(c) && b.leq(c)) || a.join(b).leq(c))
                    && (a.leq(b) || b.leq(a))
                    && Label::Loc.leq(a)
                    && a.leq(Label::Ava);
                ensure(ok, || format!("label laws fail on ({a}, {b}, {c})"))?;
            }
        }
    }
    let chain = [Label::Loc, Label::Con, Label::Oac, Label::Ava];
    ensure(chain.windows(2).all(|w| w[0].lt(w[1])), || {
        "labels do not form loc<con<oac<ava".into()
    })?;

    let mut rng = SplitMix64::new(0x5eed);
    let cases = 12_000;
    for i in 0..cases {
        let nat = i % 2 == 0;
        let a = random_lattice_value(&mut rng, nat);
        let b = random_lattice_value(&mut rng, nat);
        let c = random_lattice_value(&mut rng, nat);
        lattice_laws(&a, &b, &c)?;
    }
    ensure(
        LatticeValue::nat(1)
            .join(&LatticeValue::set(["a"]))
            .is_err(),
        || "join across domains succeeded".into(),
    )?;
    within(start, Duration::from_secs(5))?;
    Ok(format!(
        "{triples} label triples, {cases} random lattice cases"
    ))
}

/// Two-client programs on three servers.
fn concurrent_programs() -> Result<Vec<PathBuf>, String> {
    let mut out = Vec::new();
    for dir in ["con", "ava", "mixed", "accept"] {
        for p in corpus(dir) {
            let prog = program(&p)?;
            if prog.clients.len() == 2 && prog.servers == 3 {
                out.push(p);
            }
        }
    }
    Ok(out)
}

fn well_formedness() -> Outcome {
    let programs = concurrent_programs()?;
    ensure(programs.len() >= 10, || {
        format!("only {} two-client programs", programs.len())
    })?;
    let mut states = 0;
    for p in &programs {
        let config = load(p)?;
        let mut opts = ExploreOptions::new(12);
        opts.check_wf = true;
        let stats =
            explore(&config, &opts, &mut |_, _| {}).map_err(|e| format!("{}: {e}", name(p)))?;
        ensure(stats.wf_violations.is_empty(), || {
            format!("{}: {}", name(p), stats.wf_violations[0])
        })?;
        states += stats.states;
    }
    Ok(format!(
        "{} programs, {states} states, no violations",
        programs.len()
    ))
}

fn progress() -> Outcome {
    let mut programs = concurrent_programs()?;
    programs.extend(corpus("accept"));
    programs.sort();
    programs.dedup();
    let (mut blocked, mut duplicated) = (0, 0);
    for p in &programs {
        let config = load(p)?;
        let mut opts = ExploreOptions::new(12);
        opts.check_progress = true;
        let stats =
            explore(&config, &opts, &mut |_, _| {}).map_err(|e| format!("{}: {e}", name(p)))?;
        ensure(stats.progress_violations.is_empty(), || {
            format!("{}: {}", name(p), stats.progress_violations[0])
        })?;
        blocked += stats.blocked_states;
        duplicated += stats.duplicated_faults;
    }
    Ok(format!(
        "{} programs; {blocked} states blocked at await, {duplicated} duplicated-identifier faults",
        programs.len()
    ))
}

fn sequential_consistency() -> Outcome {
    let programs = corpus("con");
    ensure(programs.len() >= 5, || {
        format!("only {} con programs", programs.len())
    })?;
    let (mut traces, mut runs) = (0, 0);
    for p in &programs {
        let config = load(p)?;
        let mut failure = None;
        let opts = ExploreOptions::new(12).with_histories();
        explore(&config, &opts, &mut |c, _| {
            traces += 1;
            match record(&c.trace) {
                Ok(exec) => {
                    let v = check_sc(&exec);
                    if !v.passed() {
                        failure.get_or_insert(format!("{}: {v} ({:?})", name(p), v.witness));
                    }
                }
                Err(e) => {
                    failure.get_or_insert(format!("{}: {e}", name(p)));
                }
            }
        })
        .map_err(|e| e.to_string())?;
        if let Some(f) = failure {
            return Err(f);
        }
        for seed in 0..100 {
            let r = run(config.clone(), Scheduler::Seeded(seed), 10_000);
            ensure(r.outcome == RunOutcome::Quiescent, || {
                format!("{} seed {seed}: {}", name(p), r.outcome)
            })?;
            let exec = record(&r.config.trace).map_err(|e| e.to_string())?;
            let v = check_sc(&exec);
            ensure(v.passed(), || format!("{} seed {seed}: {v}", name(p)))?;
            runs += 1;
        }
    }
    Ok(format!(
        "{} programs, {traces} explored traces, {runs} seeded runs",
        programs.len()
    ))
}

fn eventual_consistency() -> Outcome {
    let start = Instant::now();
    let programs = corpus("ava");
    ensure(programs.len() >= 5, || {
        format!("only {} ava programs", programs.len())
    })?;
    for p in &programs {
        let r = run(load(p)?, Scheduler::DrainFair, 10_000);
        ensure(r.outcome == RunOutcome::Quiescent, || {
            format!("{}: {}", name(p), r.outcome)
        })?;
        let exec = record(&r.config.trace).map_err(|e| e.to_string())?;
        let v = check_ec(&exec, &r.config).map_err(|e| format!("{}: {e}", name(p)))?;
        ensure(v.passed(), || format!("{}: {v} ({:?})", name(p), v.witness))?;
        let servers = &r.config.servers;
        ensure(
            servers.len() == 3 && servers.windows(2).all(|w| w[0].store == w[1].store),
            || format!("{}: replica stores differ", name(p)),
        )?;

        let mut folded: BTreeMap<_, LatticeValue> = BTreeMap::new();
        for op in exec
            .op
            .values()
            .filter(|o| o.is_write() && o.location.kind != Label::Con)
        {
            let Some((w, _)) = op.value.as_lattice() else {
                return Err(format!("{}: non-lattice write to {}", name(p), op.location));
            };
            let joined = match folded.remove(&op.location) {
                Some(acc) => acc.join(w).map_err(|e| e.to_string())?,
                None => w.clone(),
            };
            folded.insert(op.location, joined);
        }
        ensure(!folded.is_empty(), || {
            format!("{}: no available writes", name(p))
        })?;
        for (o, expected) in &folded {
            let stored = servers[0].store.get(o).map(erase);
            let got = stored
                .as_ref()
                .and_then(|v| v.as_lattice())
                .map(|(l, _)| l.clone());
            ensure(got.as_ref() == Some(expected), || {
                format!(
                    "{}: {o} holds {got:?}, writes join to {expected:?}",
                    name(p)
                )
            })?;
        }
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "{} programs converge to the join of their writes",
        programs.len()
    ))
}

fn anomaly() -> Outcome {
    let p = &corpus("mixed")[0];
    let config = load(p)?;
    let (mut traces, mut unprojected, mut projected_failures) = (0, 0, 0);
    let opts = ExploreOptions::new(14).with_histories();
    explore(&config, &opts, &mut |c, _| {
        traces += 1;
        let exec = record(&c.trace).expect("explored traces record");
        if !check_sc(&exec).passed() {
            unprojected += 1;
        }
        if !check_sc(&project_con(&exec)).passed() {
            projected_failures += 1;
        }
    })
    .map_err(|e| e.to_string())?;
    ensure(unprojected > 0, || {
        format!("{}: no SC failure in {traces} traces", name(p))
    })?;
    ensure(projected_failures == 0, || {
        format!("{projected_failures} con-projected failures")
    })?;
    Ok(format!(
        "{}: {unprojected}/{traces} traces fail SC unprojected, con projection passes on all",
        name(p)
    ))
}

fn noninterference() -> Outcome {
    let files = corpus("nif");
    let mut pairs = 0;
    for left in files
        .iter()
        .filter(|f| f.to_string_lossy().ends_with("_a.ctrd"))
    {
        let right = PathBuf::from(left.to_string_lossy().replace("_a.ctrd", "_b.ctrd"));
        let (a, b) = (program(left)?, program(&right)?);
        match check_noninterference(&a, &b, 12) {
            Ok(v) => {
                ensure(v.equal(), || format!("{}: observations differ", name(left)))?;
                ensure(!v.left.is_empty(), || {
                    format!("{}: no maximal traces within depth 12", name(left))
                })?;
                pairs += 1;
            }
            // Pairs that differ in con data are negative controls.
            Err(ctrd::exec::NifError::NotLowEquivalent(_)) => {}
            Err(e) => return Err(format!("{}: {e}", name(left))),
        }
    }
    ensure(pairs >= 3, || format!("only {pairs} low-equivalent pairs"))?;
    Ok(format!("{pairs} pairs give equal con observations"))
}

fn chain_source(n: usize, label: Label) -> String {
    let mut s = String::from("client 1 {\n");
    for i in 1..=n {
        let content = if i == 1 {
            format!("nat 1 @{label}")
        } else {
            format!("x{}", i - 1)
        };
        s += &format!("  let x{i} = ref@{label}({content}, ({label}, {i})) in\n");
    }
    if label == Label::Loc {
        s += &format!("  clone@con(x{n}, (con, 1))\n}}\n");
    } else {
        s += &format!("  x{n}\n}}\n");
    }
    s
}

fn clone_chains() -> Outcome {
    let start = Instant::now();
    for n in [3, 10, 50] {
        let direct = run(
            CloudConfig::from_source(&chain_source(n, Label::Con), None)
                .map_err(|e| e.to_string())?,
            Scheduler::DrainFair,
            100_000,
        );
        ensure(direct.outcome == RunOutcome::Quiescent, || {
            format!("n={n} con chain: {}", direct.outcome)
        })?;
        let cloned = run(
            CloudConfig::from_source(&chain_source(n, Label::Loc), None)
                .map_err(|e| e.to_string())?,
            Scheduler::DrainFair,
            100_000,
        );
        ensure(cloned.outcome == RunOutcome::Quiescent, || {
            format!("n={n} clone: {}", cloned.outcome)
        })?;

        let (d, c) = (
            atomic_step_count(&direct.config.trace),
            atomic_step_count(&cloned.config.trace),
        );
        ensure(d == n && c == 1, || {
            format!("n={n}: {d} atomic steps direct, {c} cloned")
        })?;

        let client = &cloned.config.clients[0];
        let local_root = client.idmap[&Identifier::new(Label::Loc, n as u64)];
        let remote_root = cloned.config.global[&Identifier::new(Label::Con, 1)];
        let local = reachable_graph(local_root, &client.store).map_err(|e| e.to_string())?;
        ensure(local.nodes.len() == n, || {
            format!("n={n}: local graph has {} nodes", local.nodes.len())
        })?;
        for (r, s) in cloned.config.servers.iter().enumerate() {
            let remote = reachable_graph(remote_root, &s.store).map_err(|e| e.to_string())?;
            ensure(isomorphic(&local, &remote), || {
                format!("n={n}: server {r} copy is not isomorphic")
            })?;
        }
    }
    within(start, Duration::from_secs(10))?;
    Ok("n = 3, 10, 50: n atomic steps direct, 1 cloned, copies isomorphic".into())
}

fn deterministic_replay() -> Outcome {
    let p = corpus("ava")
        .into_iter()
        .find(|p| p.ends_with("set_adds.ctrd"))
        .unwrap();
    let trace = || {
        Command::new(env!("CARGO_BIN_EXE_ctrd"))
            .args(["run", p.to_str().unwrap(), "--seed", "42", "--trace", "-"])
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (trace()?, trace()?);
    ensure(a.status.success() && b.status.success(), || {
        format!("exit {:?}", a.status.code())
    })?;
    ensure(!a.stdout.is_empty(), || "empty trace".into())?;
    ensure(a.stdout == b.stdout, || "traces differ".into())?;
    Ok(format!("{}: {} identical bytes", name(&p), a.stdout.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("typechecker corpus", typechecker_corpus),
        ("label algebra", label_algebra),
        ("well-formedness preserved", well_formedness),
        ("progress", progress),
        (
            "sequential consistency of con programs",
            sequential_consistency,
        ),
        ("eventual consistency of ava programs", eventual_consistency),
        ("mixed-consistency anomaly", anomaly),
        ("noninterference", noninterference),
        ("clone chains", clone_chains),
        ("deterministic replay", deterministic_replay),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {title}: {detail} [{t:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {title}: {why} [{t:.2?}]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
