use ctrd::clone::{isomorphic, reachable_graph};
use ctrd::exec::{check_ec, check_sc, project_con, record, EcError};
use ctrd::runtime::explore::{explore, ExploreOptions};
use ctrd::runtime::trace::{atomic_step_count, OpKind};
use ctrd::runtime::{run, CloudConfig, RunOutcome, Scheduler};
use ctrd::syntax::Identifier;
use ctrd::Label;

fn drained(src: &str) -> CloudConfig {
    let r = run(
        CloudConfig::from_source(src, None).unwrap(),
        Scheduler::DrainFair,
        10_000,
    );
    assert_eq!(r.outcome, RunOutcome::Quiescent);
    r.config
}

#[test]
fn con_write_then_remote_read() {
    let c = drained(
        "client 1 { ref@con(nat 1 @con, (con, 1)) }
         client 2 { !await((con, 1)) }",
    );
    let exec = record(&c.trace).unwrap();
    let ops: Vec<_> = exec.op.values().map(|o| (o.op, o.client)).collect();
    assert_eq!(ops, vec![(OpKind::Ref, 1), (OpKind::Rd, 2)]);
    let w = *exec.op.keys().next().unwrap();
    let r = *exec.op.keys().nth(1).unwrap();
    assert!(exec.vis.contains(w, r));
    assert!(check_sc(&exec).passed());
}

#[test]
fn ava_writes_are_arbitrated_on_delivery() {
    let c = drained("client 1 { let c = ref@ava(nat 1 @ava, (ava, 1)) in c := nat 3 @ava }");
    let exec = record(&c.trace).unwrap();
    let writes: Vec<_> = exec
        .op
        .iter()
        .filter(|(_, o)| o.is_write())
        .map(|(e, _)| *e)
        .collect();
    assert_eq!(writes.len(), 2);
    assert!(exec.op.values().all(|o| o.class == Label::Ava));
    assert!(exec.rb.contains(writes[0], writes[1]));
    let verdict = check_ec(&exec, &c).unwrap();
    assert!(verdict.passed(), "{verdict}");
}

#[test]
fn ec_needs_quiescence() {
    let c = CloudConfig::from_source("client 1 { ref@ava(nat 1 @ava, (ava, 1)) }", None).unwrap();
    let r = run(c, Scheduler::DrainFair, 2);
    let exec = record(&r.config.trace).unwrap();
    assert!(matches!(
        check_ec(&exec, &r.config),
        Err(EcError::NotQuiescent(_))
    ));
}

#[test]
fn stale_read_violates_sc_but_not_its_con_projection() {
    let src = "client 1 { let x = ref@ava(nat 1 @ava, (ava, 1)) in ref@con(nat 1 @con, (con, 1)) }
               client 2 { !await((ava, 1)) }";
    let c = CloudConfig::from_source(src, None).unwrap();
    let mut bad = 0;
    explore(
        &c,
        &ExploreOptions::new(14).with_histories(),
        &mut |leaf, _| {
            let exec = record(&leaf.trace).unwrap();
            let v = check_sc(&exec);
            if !v.passed() {
                bad += 1;
                assert!(!v.ar_vis_closure, "{v}");
                assert!(v.witness.is_some());
            }
            assert!(check_sc(&project_con(&exec)).passed());
        },
    )
    .unwrap();
    assert!(bad > 0);
}

#[test]
fn corrupted_return_value_is_caught() {
    let c = drained("client 1 { let r = ref@con(nat 4 @con, (con, 1)) in !r }");
    let mut exec = record(&c.trace).unwrap();
    assert!(check_sc(&exec).passed());
    let read = *exec.op.iter().find(|(_, o)| o.is_read()).unwrap().0;
    exec.rval.insert(read, ctrd::exec::Rval::Nabla);
    let v = check_sc(&exec);
    assert!(!v.rval_ok);
    assert!(v.po_in_vis && v.ar_vis_closure);
}

#[test]
fn dropping_visibility_breaks_program_order() {
    let c = drained("client 1 { let r = ref@con(nat 4 @con, (con, 1)) in !r }");
    let mut exec = record(&c.trace).unwrap();
    exec.vis.pairs.clear();
    assert!(!check_sc(&exec).po_in_vis);
}

#[test]
fn clone_uploads_a_chain_in_one_step() {
    let c = drained(
        "client 1 {
           let x = ref@loc(nat 1 @loc, (loc, 1)) in
           let y = ref@loc(x, (loc, 2)) in
           let z = ref@loc(y, (loc, 3)) in
           clone@con(z, (con, 1))
         }",
    );
    assert_eq!(atomic_step_count(&c.trace), 1);
    let clone = c.trace.iter().find(|e| e.rule == "E-CLONE").unwrap();
    assert_eq!(clone.node_count, Some(3));

    let client = &c.clients[0];
    let local =
        reachable_graph(client.idmap[&Identifier::new(Label::Loc, 3)], &client.store).unwrap();
    let root = c.global[&Identifier::new(Label::Con, 1)];
    for s in &c.servers {
        let remote = reachable_graph(root, &s.store).unwrap();
        assert_eq!(remote.nodes.len(), 3);
        assert!(isomorphic(&local, &remote));
        assert!(remote.nodes.keys().all(|o| o.kind == Label::Con));
    }
    assert_eq!(c.anonymous.len(), 2);
}
