//! Fixtures and independent oracles shared by the integration tests and the
//! acceptance target. The oracles deliberately avoid the library's indexes
//! and search code.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use ontoact_core::descriptions::Registry;
use ontoact_core::scenario::load_descriptions;
use ontoact_core::store::RDFS_SUBCLASS_OF;
use ontoact_core::{AgentId, Bindings, Pattern, Scenario, Statement, Term, TripleStore};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn scenario_path(name: &str) -> PathBuf {
    repo_root().join("scenarios/movie").join(format!("{name}.json"))
}

pub fn golden_path(name: &str) -> PathBuf {
    repo_root().join("scenarios/movie/golden").join(format!("{name}.jsonl"))
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(scenario_path(name)).unwrap_or_else(|e| panic!("{e}"))
}

/// Shipped protocols and acts plus the movie actions.
pub fn shipped_registry() -> Registry {
    let root = repo_root();
    load_descriptions(&[root.join("descriptions"), root.join("scenarios/movie/actions")]).unwrap()
}

pub fn sym(s: &str) -> Term {
    Term::sym(s)
}

pub fn stmt(s: &str, p: &str, o: &str) -> Statement {
    Statement::new(sym(s), sym(p), sym(o)).unwrap()
}

pub fn agent(id: &str) -> AgentId {
    AgentId::new(id)
}

// ---- conjunctive query oracle ----

/// Unifies one pattern position against a value under `b`.
fn bind_term(pat: &Term, value: &Term, b: &mut Bindings) -> bool {
    match pat {
        Term::Var(v) => match b.get(v) {
            Some(bound) => bound == value,
            None => {
                b.insert(v.clone(), value.clone());
                true
            }
        },
        other => other == value,
    }
}

/// Every assignment of statements to patterns, joined by brute force.
pub fn brute_join(statements: &[Statement], patterns: &[Pattern]) -> Vec<Bindings> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; patterns.len()];
    if statements.is_empty() {
        return if patterns.is_empty() {
            vec![Bindings::new()]
        } else {
            out
        };
    }
    loop {
        let mut b = Bindings::new();
        let ok = patterns.iter().zip(&idx).all(|(p, &i)| {
            let s = &statements[i];
            bind_term(&p.subject, &s.subject, &mut b)
                && bind_term(&p.predicate, &s.predicate, &mut b)
                && bind_term(&p.object, &s.object, &mut b)
        });
        if ok {
            out.push(b);
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == idx.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < statements.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub fn sorted(mut v: Vec<Bindings>) -> Vec<Bindings> {
    v.sort();
    v
}

const SUBJECTS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
const PREDICATES: [&str; 3] = ["p", "q", "r"];
const VARS: [&str; 3] = ["x", "y", "z"];

pub fn random_store(rng: &mut ChaCha8Rng, max: usize) -> (TripleStore, Vec<Statement>) {
    let mut store = TripleStore::new();
    let mut stmts = Vec::new();
    for _ in 0..rng.random_range(0..=max) {
        let s = stmt(
            SUBJECTS.choose(rng).unwrap(),
            PREDICATES.choose(rng).unwrap(),
            SUBJECTS.choose(rng).unwrap(),
        );
        if !stmts.contains(&s) {
            stmts.push(s.clone());
            store.assert_stmt(s).unwrap();
        }
    }
    (store, stmts)
}

fn random_position(rng: &mut ChaCha8Rng, pool: &[&str]) -> Term {
    if rng.random_bool(0.5) {
        Term::var(*VARS.choose(rng).unwrap())
    } else {
        sym(pool.choose(rng).unwrap())
    }
}

pub fn random_query(rng: &mut ChaCha8Rng) -> Vec<Pattern> {
    (0..rng.random_range(1..=3))
        .map(|_| {
            Pattern::new(
                random_position(rng, &SUBJECTS),
                random_position(rng, &PREDICATES),
                random_position(rng, &SUBJECTS),
            )
        })
        .collect()
}

// ---- subclass closure oracle ----

/// Reflexive-transitive closure by Warshall's algorithm over a node list.
pub fn closure_oracle(nodes: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; nodes]; nodes];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        r[a][b] = true;
    }
    for k in 0..nodes {
        for i in 0..nodes {
            if r[i][k] {
                for j in 0..nodes {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

pub fn class(i: usize) -> Term {
    sym(&format!("ex:C{i}"))
}

pub fn random_hierarchy(rng: &mut ChaCha8Rng) -> (usize, Vec<(usize, usize)>, TripleStore) {
    let n = rng.random_range(1..=20);
    let edges: BTreeSet<(usize, usize)> = (0..rng.random_range(0..=2 * n))
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    let mut store = TripleStore::new();
    for &(a, b) in &edges {
        store
            .assert_stmt(Statement::new(class(a), sym(RDFS_SUBCLASS_OF), class(b)).unwrap())
            .unwrap();
    }
    (n, edges.into_iter().collect(), store)
}

// ---- mental model oracle ----

/// Reference model of allocation: per (believer, statement), the newest
/// (time, belief) wins and an equal-time allocation overrides.
#[derive(Default)]
pub struct AllocationOracle {
    latest: BTreeMap<(AgentId, Statement), (u64, bool)>,
}

impl AllocationOracle {
    pub fn allocate(&mut self, believer: &AgentId, s: &Statement, belief: bool, time: u64) {
        let slot = self
            .latest
            .entry((believer.clone(), s.clone()))
            .or_insert((time, belief));
        if time >= slot.0 {
            *slot = (time, belief);
        }
    }

    pub fn expected(&self, believer: &AgentId, s: &Statement) -> Option<bool> {
        self.latest.get(&(believer.clone(), s.clone())).map(|&(_, b)| b)
    }

    pub fn keys(&self) -> impl Iterator<Item = &(AgentId, Statement)> {
        self.latest.keys()
    }
}

// ---- protocol harness ----

use ontoact_core::action_engine::HostBindings;
use ontoact_core::ca_engine::{ActionRef, CaContext, OfferConditions};
use ontoact_core::descriptions::Condition;
use ontoact_core::mentality::reify;
use ontoact_core::protocol_engine::{start_conversation, step, Conversation, Direction, Objective, StepContext};
use ontoact_core::transport::Transport;
use ontoact_core::{Blackboard, ConversationId, Tick};

pub const PARTICIPANTS: [&str; 4] = ["A", "B", "C", "D"];

/// One combination of participant behaviour.
#[derive(Debug, Clone)]
pub struct Case {
    /// Participant has the bandwidth the broadcast precondition needs.
    pub capable: Vec<bool>,
    /// Replies from this participant are lost in transit.
    pub silent: Vec<bool>,
    /// The broadcast service itself succeeds.
    pub host_ok: bool,
}

pub struct CaseRun {
    pub conv: Conversation,
    pub steps: usize,
    pub board: Blackboard,
    pub transport: Transport,
    pub registry: Registry,
}

pub fn broadcast_hosts(ok: bool) -> HostBindings {
    let mut hosts = HostBindings::new();
    hosts.bind("open-stream", move |b: &Bindings, _: &TripleStore| {
        if !ok {
            return Err("link down".into());
        }
        let name = format!("stream:{}", b["self"]);
        Ok(Bindings::from([("stream".to_owned(), Term::sym(name))]))
    });
    hosts
}

/// Runs `protocol` between S and the first `case.capable.len()`
/// participants, stepping until the conversation ends or `limit` steps.
pub fn run_case(protocol: &str, case: &Case, timeout_budget: u32, limit: usize) -> CaseRun {
    let registry = shipped_registry();
    let root = repo_root();
    let mut data =
        TripleStore::from_json_slice(&std::fs::read(root.join("scenarios/movie/ontology.json")).unwrap()).unwrap();
    let n = case.capable.len();
    let participants: Vec<AgentId> = PARTICIPANTS[..n].iter().map(|p| agent(p)).collect();
    for (i, p) in participants.iter().enumerate() {
        if case.capable[i] {
            let bw = Term::quantity((i + 1) as f64, "Mbps");
            data.assert_stmt(Statement::new(p.term(), sym("ex:hasBandwidth"), bw).unwrap())
                .unwrap();
        }
    }
    let mut board = Blackboard::new(data);
    let mut transport = Transport::new();
    transport.register(&agent("S"));
    for p in &participants {
        transport.register(p);
        let belief = Statement::new(p.term(), sym("acf:hasCapability"), sym("ex:VideoBroadcastService")).unwrap();
        board.allocate(&reify(&belief, p, true, Tick(0)).unwrap());
    }
    let silent: Vec<AgentId> = participants
        .iter()
        .zip(&case.silent)
        .filter(|(_, s)| **s)
        .map(|(p, _)| p.clone())
        .collect();
    transport.drop_when(move |e| silent.contains(&e.sender));

    let hosts = broadcast_hosts(case.host_ok);
    let mut offers = OfferConditions::new();
    let offer: Condition = serde_json::from_str(r#"[{"pattern": ["?self", "ex:hasBandwidth", "?bw"]}]"#).unwrap();
    for p in &participants {
        offers.insert((p.clone(), "ex:video-broadcast".into()), offer.clone());
    }
    let objective = Objective {
        direction: Direction::Maximize,
        variable: "?bw".into(),
    };
    let action = ActionRef {
        name: "ex:video-broadcast".into(),
        inputs: Bindings::from([("movie".to_owned(), sym("ex:m1"))]),
    };
    let mut conv = start_conversation(
        &registry,
        protocol,
        ConversationId("c1".into()),
        &agent("S"),
        &participants,
        action,
        &mut board,
    )
    .unwrap();
    conv.timeout_budget = timeout_budget;

    let mut steps = 0;
    {
        let mut ctx = StepContext {
            ca: CaContext {
                registry: &registry,
                hosts: &hosts,
                offers: &offers,
            },
            transport: &mut transport,
            objective: Some(&objective),
        };
        while conv.is_running() && steps < limit {
            // Deadlock is reported as an error and leaves the conversation failed.
            let _ = step(&mut conv, &mut ctx, &mut board);
            steps += 1;
        }
    }
    CaseRun {
        conv,
        steps,
        board,
        transport,
        registry,
    }
}

/// Every capable/incapable combination for `n` participants, with the
/// service both working and failing.
pub fn all_cases(n: usize) -> Vec<Case> {
    let mut out = Vec::new();
    for mask in 0..(1u32 << n) {
        for host_ok in [true, false] {
            out.push(Case {
                capable: (0..n).map(|i| mask & (1 << i) != 0).collect(),
                silent: vec![false; n],
                host_ok,
            });
        }
    }
    out
}

/// Checks one finished run: terminal lanes, step bound, licensed hops,
/// well-formed correlation and silence after the end.
pub fn check_run(protocol: &str, case: &Case, mut run: CaseRun) -> Result<(), String> {
    use ontoact_core::protocol_engine::{replay, ConversationStatus};
    use ontoact_core::transport::check_correlation;

    let desc = run.registry.protocol(protocol).ok_or("unknown protocol")?.clone();
    let n = case.capable.len();
    let label = format!("{protocol} {case:?}");
    let ensure = |ok: bool, what: &str| if ok { Ok(()) } else { Err(format!("{label}: {what}")) };

    ensure(!run.conv.is_running(), "still running")?;
    ensure(run.steps <= desc.states.len() * n, &format!("{} steps", run.steps))?;
    ensure(
        run.conv.lanes.iter().all(|l| desc.is_accept(&l.state)),
        "lane not in an accept state",
    )?;
    replay(&desc, &run.conv.initiator, &run.conv.transcript).map_err(|e| format!("{label}: {e}"))?;
    check_correlation(run.transport.log()).map_err(|e| format!("{label}: {e}"))?;
    ensure(
        run.transport.log().count() == run.conv.transcript.len(),
        "log and transcript differ",
    )?;

    let expected = if case.capable.iter().any(|c| *c) && case.host_ok {
        ConversationStatus::Succeeded
    } else {
        ConversationStatus::Failed
    };
    ensure(run.conv.status == expected, &format!("status {:?}", run.conv.status))?;
    if protocol == "fipa-contract-net" {
        if let Some(best) = case.capable.iter().rposition(|c| *c) {
            ensure(
                run.conv.winner == Some(agent(PARTICIPANTS[best])),
                &format!("winner {:?}", run.conv.winner),
            )?;
        }
    }

    let sent = run.transport.log().count();
    let lines = run.board.trace.len();
    let hosts = HostBindings::new();
    let offers = OfferConditions::new();
    let mut ctx = StepContext {
        ca: CaContext {
            registry: &run.registry,
            hosts: &hosts,
            offers: &offers,
        },
        transport: &mut run.transport,
        objective: None,
    };
    for _ in 0..3 {
        let hops = step(&mut run.conv, &mut ctx, &mut run.board).map_err(|e| format!("{label}: {e}"))?;
        ensure(hops.is_empty(), "post-terminal hop")?;
    }
    ensure(run.transport.log().count() == sent, "post-terminal message")?;
    ensure(run.board.trace.len() == lines, "post-terminal trace line")
}
