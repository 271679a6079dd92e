//! Acceptance target: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

#![allow(clippy::needless_range_loop)]

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use ontoact_core::descriptions::{load_bundle, load_description, Description, DescriptionError};
use ontoact_core::mentality::{deify, reify, MentalModel, WorldTag};
use ontoact_core::{Bindings, Runtime, Statement, Term, Tick};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Check = Result<(), String>;

type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

/// Key steps of a trace: lookups, messages, executions and final
/// conversation statuses.
fn milestones(jsonl: &str) -> Vec<String> {
    jsonl
        .lines()
        .filter_map(|l| {
            let v: Value = serde_json::from_str(l).ok()?;
            let s = |k: &str| v[k].as_str().unwrap_or_default().to_owned();
            match v["event"].as_str()? {
                "lookup" => Some(format!("lookup {}", s("capability"))),
                "msg" => Some(format!("{} {}->{}", s("performative"), s("sender"), s("receiver"))),
                "action" => Some(format!("execute {} by {}: {}", s("name"), s("agent"), s("status"))),
                "conversation" if v["status"] != "running" => Some(format!("conversation {}", s("status"))),
                _ => None,
            }
        })
        .collect()
}

/// Runs a shipped scenario, compares against its golden file byte for byte
/// and returns the trace.
fn golden_run(name: &str) -> Result<String, String> {
    let start = Instant::now();
    let (_, report) = scenario(name).run().map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let actual = report.trace.to_jsonl();
    let golden = fs::read_to_string(golden_path(name)).map_err(|e| e.to_string())?;
    ensure(actual == golden, || format!("{name}: trace differs from golden"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("{name}: took {elapsed:?}"))?;
    Ok(actual)
}

fn expect_milestones(trace: &str, expected: &[&str]) -> Check {
    let got = milestones(trace);
    ensure(got == expected, || format!("sequence {got:?}"))
}

fn cooperation() -> Check {
    let trace = golden_run("cooperation")?;
    expect_milestones(
        &trace,
        &[
            "lookup ex:VideoAbstractService",
            "request S->T",
            "agree T->S",
            "execute ex:video-abstract by T: succeeded",
            "inform T->S",
            "conversation succeeded",
        ],
    )
}

fn coordination() -> Check {
    let trace = golden_run("coordination")?;
    expect_milestones(
        &trace,
        &[
            "lookup ex:VideoBroadcastService",
            "cfp S->A",
            "cfp S->B",
            "cfp S->C",
            "cfp S->D",
            "refuse A->S",
            "refuse B->S",
            "propose C->S",
            "propose D->S",
            "reject-proposal S->C",
            "accept-proposal S->D",
            "execute ex:video-broadcast by D: succeeded",
            "inform D->S",
            "conversation succeeded",
        ],
    )
}

fn refuse() -> Check {
    let trace = golden_run("refuse")?;
    expect_milestones(
        &trace,
        &[
            "lookup ex:VideoAbstractService",
            "request S->T",
            "refuse T->S",
            "conversation failed",
        ],
    )?;
    let (_, report) = scenario("refuse").run().map_err(|e| e.to_string())?;
    ensure(!report.all_goals_succeeded(), || "goal should fail".into())
}

fn fsm_safety() -> Check {
    let mut runs = 0;
    for n in 1..=4 {
        for case in all_cases(n) {
            check_run(
                "fipa-contract-net",
                &case,
                run_case("fipa-contract-net", &case, 10, 1000),
            )?;
            runs += 1;
        }
    }
    for case in all_cases(1) {
        check_run("fipa-request", &case, run_case("fipa-request", &case, 10, 1000))?;
        runs += 1;
    }
    ensure(runs == 2 * (2 + 4 + 8 + 16) + 4, || format!("{runs} runs"))
}

fn store_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..500 {
        let (store, stmts) = random_store(&mut rng, 50);
        let q = random_query(&mut rng);
        ensure(sorted(store.query(&q)) == sorted(brute_join(&stmts, &q)), || {
            format!("query {i}: {q:?}")
        })?;
    }
    for g in 0..100 {
        let (n, edges, store) = random_hierarchy(&mut rng);
        let oracle = closure_oracle(n, &edges);
        for a in 0..n {
            for b in 0..n {
                ensure(store.is_subclass(&class(a), &class(b)) == oracle[a][b], || {
                    format!("graph {g}: C{a} <= C{b}")
                })?;
            }
        }
    }
    Ok(())
}

fn mentality_laws() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..100 {
        let object = match rng.random_range(0..3) {
            0 => Term::sym(format!("ex:o{}", rng.random_range(0..100))),
            1 => Term::lit(format!("text {}", rng.random::<u16>())),
            _ => Term::quantity(rng.random_range(0.0..10.0), "Mbps"),
        };
        let s = Statement::new(Term::sym(format!("ex:s{i}")), Term::sym("ex:p"), object).map_err(|e| e.to_string())?;
        let e = reify(&s, &agent("S"), rng.random_bool(0.5), Tick(i)).map_err(|e| e.to_string())?;
        ensure(deify(&e) == s, || format!("round trip {s:?}"))?;
    }
    let believers = [agent("S"), agent("T"), agent("D")];
    let pool: Vec<Statement> = ["a", "b", "c", "d"].iter().map(|x| stmt(x, "p", "o")).collect();
    for seq in 0..1000 {
        let mut mm = MentalModel::new();
        let mut oracle = AllocationOracle::default();
        for _ in 0..rng.random_range(1..30) {
            let who = believers.choose(&mut rng).unwrap();
            let s = pool.choose(&mut rng).unwrap();
            let belief = rng.random_bool(0.5);
            let t = rng.random_range(0..8u64);
            mm.allocate(&reify(s, who, belief, Tick(t)).map_err(|e| e.to_string())?);
            oracle.allocate(who, s, belief, t);
        }
        for (who, s) in oracle.keys() {
            let w = mm
                .worlds(who)
                .ok_or_else(|| format!("sequence {seq}: no worlds for {who}"))?;
            let want = if oracle.expected(who, s) == Some(true) {
                WorldTag::Actual
            } else {
                WorldTag::Imaginary
            };
            ensure(w.world_of(s) == Some(want), || {
                format!("sequence {seq}: {s:?} for {who}")
            })?;
            ensure(!(w.actual().contains(s) && w.imaginary().contains(s)), || {
                format!("sequence {seq}: {s:?} in both worlds")
            })?;
        }
    }
    Ok(())
}

fn searle_validation() -> Check {
    let ca = |class: &str, content: Value| {
        json!({"type": "CommunicativeAct", "name": "x", "searleClass": class, "content": content}).to_string()
    };
    let violations = [
        ("assertive", json!({"proposition": true, "action": true})),
        ("directive", json!({"proposition": true})),
        ("commissive", json!({"action": true})),
        ("expressive", json!({"action": true, "condition": true})),
    ];
    for (class, content) in violations {
        let r = load_description(ca(class, content.clone()).as_bytes());
        ensure(matches!(r, Err(DescriptionError::Schema { .. })), || {
            format!("{class} {content} accepted: {r:?}")
        })?;
    }
    let all = load_bundle(&repo_root().join("descriptions")).map_err(|e| e.to_string())?;
    let acts = all
        .iter()
        .filter(|d| matches!(d, Description::CommunicativeAct(_)))
        .count();
    ensure(acts == 10, || format!("{acts} communicative acts"))
}

fn runtime_with_broadcasters(ids: &[&str]) -> Result<Runtime, String> {
    let mut rt = scenario("coordination").runtime().map_err(|e| e.to_string())?;
    let entries: Vec<_> = rt
        .matchmaker
        .entries()
        .iter()
        .filter(|e| ids.contains(&e.agent.as_str()) || e.capability != "ex:VideoBroadcastService")
        .cloned()
        .collect();
    rt.matchmaker = Default::default();
    for e in entries {
        rt.matchmaker.register(e, &rt.board.data).map_err(|e| e.to_string())?;
    }
    Ok(rt)
}

fn selection_pipeline() -> Check {
    let inputs = Bindings::from([("movie".to_owned(), sym("ex:m1"))]);
    for (ids, ca, protocol) in [
        (&["D"][..], Some("request"), Some("fipa-request")),
        (&["A", "B", "C", "D"][..], Some("cfp"), Some("fipa-contract-net")),
        (&[][..], None, None),
    ] {
        let mut rt = runtime_with_broadcasters(ids)?;
        let out = rt.delegate_external(&agent("S"), "ex:video-broadcast", inputs.clone());
        ensure(out.providers.len() == ids.len(), || {
            format!("{} providers", out.providers.len())
        })?;
        ensure(out.ca.as_deref() == ca && out.protocol.as_deref() == protocol, || {
            format!("{} providers chose {:?}/{:?}", ids.len(), out.ca, out.protocol)
        })?;
        ensure(out.succeeded == !ids.is_empty(), || {
            format!("{} providers: succeeded={}", ids.len(), out.succeeded)
        })?;
    }
    Ok(())
}

fn determinism() -> Check {
    for name in ["cooperation", "coordination", "refuse", "movie-night"] {
        let once = scenario(name).run().map_err(|e| e.to_string())?.1.trace.to_jsonl();
        let twice = scenario(name).run().map_err(|e| e.to_string())?.1.trace.to_jsonl();
        ensure(once == twice, || format!("{name} differs between runs"))?;
    }
    let (_, report) = scenario("movie-night").run().map_err(|e| e.to_string())?;
    ensure(report.all_goals_succeeded() && report.ticks <= 40, || {
        format!("movie-night: {} ticks", report.ticks)
    })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("cooperation scenario reproduces its golden trace", cooperation),
        ("coordination scenario reproduces its golden trace", coordination),
        ("incapable provider refuses the request", refuse),
        (
            "protocol FSMs terminate safely for every response combination",
            fsm_safety,
        ),
        ("store queries and subclass closure match their oracles", store_oracle),
        ("reification and allocation laws hold", mentality_laws),
        ("communicative acts obey the Searle content rules", searle_validation),
        ("provider count selects act and protocol", selection_pipeline),
        ("scenario traces are deterministic", determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match result {
            Ok(()) => println!("PASS {}: {name}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}: {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
