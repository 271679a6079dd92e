//! Executes action descriptions against the data model.
//!
//! An execution stores its inputs as an invocation node, checks the
//! precondition, runs the process tree with atomic steps dispatched to host
//! operations, then applies the declared effects and stores the outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::board::Blackboard;
use crate::descriptions::{
    apply_effects, eval_condition, first_failing_clause, ActionDescription, AppliedChange, ConditionError, Effect,
    ProcessNode, RoleMap, Scope, SELF_VAR,
};
use crate::ids::AgentId;
use crate::mentality::{reify, MentalModel};
use crate::store::{Pattern, Statement, StoreError, TripleSource, TripleStore, RDF_TYPE};
use crate::term::{Bindings, Term};
use crate::trace::TraceEvent;

pub const ACF_INVOKES: &str = "acf:invokes";
pub const ACF_INVOKED_BY: &str = "acf:invokedBy";
pub const ACF_FAILED_BECAUSE: &str = "acf:failedBecause";

type HostFn = dyn Fn(&Bindings, &TripleStore) -> Result<Bindings, String>;

/// Host operations that atomic process steps dispatch to.
///
/// A host operation sees the bindings at its step and the data model, and
/// returns the bindings it produces (which override same-named ones) or a
/// failure reason.
#[derive(Default)]
pub struct HostBindings {
    ops: BTreeMap<String, Box<HostFn>>,
}

impl HostBindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind<F>(&mut self, op: impl Into<String>, f: F)
    where
        F: Fn(&Bindings, &TripleStore) -> Result<Bindings, String> + 'static,
    {
        self.ops.insert(op.into(), Box::new(f));
    }

    pub fn contains(&self, op: &str) -> bool {
        self.ops.contains_key(op)
    }

    pub fn ops(&self) -> impl Iterator<Item = &str> {
        self.ops.keys().map(String::as_str)
    }

    fn call(&self, op: &str, bindings: &Bindings, data: &TripleStore) -> Result<Bindings, ProcessError> {
        let f = self.ops.get(op).ok_or_else(|| ProcessError::UnboundOp(op.to_owned()))?;
        f(bindings, data).map_err(|reason| ProcessError::Host {
            op: op.to_owned(),
            reason,
        })
    }
}

impl fmt::Debug for HostBindings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.ops.keys()).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("action {action}: missing input `{input}`")]
    MissingInput { action: String, input: String },
    #[error("action {action}: input `{input}` = {value} does not conform to {expected}")]
    TypeMismatch {
        action: String,
        input: String,
        value: String,
        expected: String,
    },
    #[error("action {action}: atomic operation `{op}` has no host binding")]
    UnboundAtomicOp { action: String, op: String },
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProcessError {
    #[error("host operation `{op}` failed: {reason}")]
    Host { op: String, reason: String },
    #[error("operation `{0}` has no host binding")]
    UnboundOp(String),
    #[error("concurrent branches disagree on ?{var}")]
    BindingConflict { var: String },
    #[error("no alternative branch applies")]
    NoBranchApplicable,
    #[error("iteration did not finish within {max_iters} rounds")]
    IterationBudgetExceeded { max_iters: u32 },
    #[error(transparent)]
    Condition(#[from] ConditionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecStatus {
    Succeeded,
    PreconditionFailed,
    StepFailed,
}

impl ExecStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecStatus::Succeeded => "succeeded",
            ExecStatus::PreconditionFailed => "precondition_failed",
            ExecStatus::StepFailed => "step_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionRecord {
    pub action: String,
    pub agent: AgentId,
    /// Invocation node the inputs and outputs hang off in the data model.
    pub invocation: Term,
    pub inputs: Bindings,
    pub outputs: Bindings,
    pub precondition_held: bool,
    /// Statements written to store the inputs, before the precondition ran.
    pub stored_inputs: Vec<Statement>,
    /// Effect changes followed by output storage.
    pub applied: Vec<AppliedChange>,
    pub status: ExecStatus,
    pub reason: Option<Statement>,
}

impl ExecutionRecord {
    pub fn succeeded(&self) -> bool {
        self.status == ExecStatus::Succeeded
    }
}

/// Checks that `value` may be passed where `data_type` is declared.
///
/// Class-typed parameters accept an individual typed with the class or one
/// of its subclasses, or a class symbol that is itself such a subclass.
pub fn conforms(value: &Term, data_type: &str, data: &TripleStore) -> bool {
    match data_type {
        "rdfs:Resource" => true,
        "xsd:string" => matches!(value, Term::Str(_)),
        "xsd:decimal" | "xsd:double" | "xsd:integer" => matches!(value, Term::Num { .. }),
        "xsd:boolean" => matches!(value, Term::Bool(_)),
        class => {
            let class = Term::sym(class);
            matches!(value, Term::Symbol(_))
                && (data.is_subclass(value, &class) || data.types_of(value).iter().any(|t| data.is_subclass(t, &class)))
        }
    }
}

fn input_pred(name: &str) -> Term {
    Term::sym(format!("in:{name}"))
}

fn output_pred(name: &str) -> Term {
    Term::sym(format!("out:{name}"))
}

/// Runs `action` for `executor` with the given input bindings.
pub fn execute(
    action: &ActionDescription,
    inputs: &Bindings,
    executor: &AgentId,
    hosts: &HostBindings,
    board: &mut Blackboard,
) -> Result<ExecutionRecord, ActionError> {
    let before = check_inputs(action, inputs, hosts, &board.data);
    board.emit(TraceEvent::Check {
        action: action.name.clone(),
        phase: "before-evaluation",
        ok: before.is_ok(),
    });
    let inputs = before?;

    let invocation = Term::sym(format!("inv:{}.{}", action.name, board.data.revision().0));
    let mut stored_inputs = vec![
        Statement::new(invocation.clone(), Term::sym(ACF_INVOKES), Term::sym(&action.name))?,
        Statement::new(invocation.clone(), Term::sym(ACF_INVOKED_BY), executor.term())?,
    ];
    for (name, value) in &inputs {
        stored_inputs.push(Statement::new(invocation.clone(), input_pred(name), value.clone())?);
    }
    for s in &stored_inputs {
        board.data.assert_stmt(s.clone())?;
    }

    let mut bindings = inputs.clone();
    bindings.insert(SELF_VAR.to_owned(), executor.term());
    let roles = RoleMap::new();
    let solutions = eval_condition(&action.precondition, &bindings, &board.data, &board.mental, &roles)?;
    board.emit(TraceEvent::Check {
        action: action.name.clone(),
        phase: "after-precondition",
        ok: !solutions.is_empty(),
    });

    let mut record = ExecutionRecord {
        action: action.name.clone(),
        agent: executor.clone(),
        invocation: invocation.clone(),
        inputs: inputs.clone(),
        outputs: Bindings::new(),
        precondition_held: !solutions.is_empty(),
        stored_inputs,
        applied: Vec::new(),
        status: ExecStatus::Succeeded,
        reason: None,
    };

    let Some(solution) = solutions.into_iter().next() else {
        let idx =
            first_failing_clause(&action.precondition, &bindings, &board.data, &board.mental, &roles)?.unwrap_or(0);
        let shown: Vec<String> = inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let explanation = format!(
            "precondition clause {} {} does not hold for inputs [{}]",
            idx + 1,
            action.precondition[idx],
            shown.join(", ")
        );
        return Ok(finish(board, record, ExecStatus::PreconditionFailed, Some(explanation)));
    };

    let ctx = ProcessCtx {
        hosts,
        data: &board.data,
        mental: &board.mental,
    };
    let produced = match run_process(&action.process, &solution, &ctx) {
        Ok(b) => b,
        Err(e) => return Ok(finish(board, record, ExecStatus::StepFailed, Some(e.to_string()))),
    };

    let mut outputs = Bindings::new();
    for p in &action.outputs {
        match produced.get(&p.name) {
            Some(v) if v.is_ground() => {
                outputs.insert(p.name.clone(), v.clone());
            }
            _ => {
                let why = format!("process left output `{}` unbound", p.name);
                return Ok(finish(board, record, ExecStatus::StepFailed, Some(why)));
            }
        }
    }

    let mut applied = match apply_effects(&action.effect, &produced, &Scope::Data, &roles, board) {
        Ok(changes) => changes,
        Err(e) => return Ok(finish(board, record, ExecStatus::StepFailed, Some(e.to_string()))),
    };
    for (name, value) in &outputs {
        let stmt = Statement::new(invocation.clone(), output_pred(name), value.clone())?;
        board.data.assert_stmt(stmt.clone())?;
        applied.push(AppliedChange::Asserted(stmt));
    }
    record.outputs = outputs;
    record.applied = applied;
    Ok(finish(board, record, ExecStatus::Succeeded, None))
}

fn check_inputs(
    action: &ActionDescription,
    inputs: &Bindings,
    hosts: &HostBindings,
    data: &TripleStore,
) -> Result<Bindings, ActionError> {
    let mut checked = Bindings::new();
    for p in &action.inputs {
        let value = inputs
            .get(&p.name)
            .filter(|v| v.is_ground())
            .ok_or_else(|| ActionError::MissingInput {
                action: action.name.clone(),
                input: p.name.clone(),
            })?;
        if !conforms(value, &p.data_type, data) {
            return Err(ActionError::TypeMismatch {
                action: action.name.clone(),
                input: p.name.clone(),
                value: value.to_string(),
                expected: p.data_type.clone(),
            });
        }
        checked.insert(p.name.clone(), value.clone());
    }
    if let Some(op) = action.process.atomic_ops().into_iter().find(|op| !hosts.contains(op)) {
        return Err(ActionError::UnboundAtomicOp {
            action: action.name.clone(),
            op: op.to_owned(),
        });
    }
    Ok(checked)
}

fn finish(
    board: &mut Blackboard,
    mut record: ExecutionRecord,
    status: ExecStatus,
    explanation: Option<String>,
) -> ExecutionRecord {
    record.status = status;
    record.reason = explanation.map(|text| {
        Statement::new(
            record.invocation.clone(),
            Term::sym(ACF_FAILED_BECAUSE),
            Term::lit(text),
        )
        .expect("invocation node and literal form a ground statement")
    });
    board.emit(TraceEvent::Check {
        action: record.action.clone(),
        phase: "after-execution",
        ok: status == ExecStatus::Succeeded,
    });
    board.emit(TraceEvent::Action {
        name: record.action.clone(),
        agent: record.agent.clone(),
        status: status.as_str(),
        outputs: record.outputs.clone(),
    });
    record
}

/// Read-only context a process tree runs in.
pub struct ProcessCtx<'a> {
    pub hosts: &'a HostBindings,
    pub data: &'a TripleStore,
    pub mental: &'a MentalModel,
}

/// Runs a process tree, returning the bindings after its last step.
pub fn run_process(node: &ProcessNode, bindings: &Bindings, ctx: &ProcessCtx) -> Result<Bindings, ProcessError> {
    match node {
        ProcessNode::Atomic(op) => {
            let produced = ctx.hosts.call(op, bindings, ctx.data)?;
            let mut out = bindings.clone();
            out.extend(produced);
            Ok(out)
        }
        ProcessNode::Sequence(children) => {
            let mut current = bindings.clone();
            for child in children {
                current = run_process(child, &current, ctx)?;
            }
            Ok(current)
        }
        ProcessNode::Concurrence(children) => {
            let mut merged = bindings.clone();
            let mut written: BTreeSet<String> = BTreeSet::new();
            for child in children {
                let result = run_process(child, bindings, ctx)?;
                for (var, value) in result {
                    if bindings.get(&var) == Some(&value) {
                        continue;
                    }
                    if written.contains(&var) && merged.get(&var) != Some(&value) {
                        return Err(ProcessError::BindingConflict { var });
                    }
                    written.insert(var.clone());
                    merged.insert(var, value);
                }
            }
            Ok(merged)
        }
        ProcessNode::Alternative(branches) => {
            for branch in branches {
                if !eval_condition(&branch.when, bindings, ctx.data, ctx.mental, &RoleMap::new())?.is_empty() {
                    return run_process(&branch.body, bindings, ctx);
                }
            }
            Err(ProcessError::NoBranchApplicable)
        }
        ProcessNode::Iteration { body, until, max_iters } => {
            let mut current = bindings.clone();
            for _ in 0..*max_iters {
                current = run_process(body, &current, ctx)?;
                if !eval_condition(until, &current, ctx.data, ctx.mental, &RoleMap::new())?.is_empty() {
                    return Ok(current);
                }
            }
            Err(ProcessError::IterationBudgetExceeded { max_iters: *max_iters })
        }
    }
}

/// Result of checking whether an external action's effects can be had.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalEffects {
    pub satisfiable: bool,
    /// Effect statements already present in the data model.
    pub grounded: Vec<Statement>,
}

/// Looks for the action's assert effects in the data model.
///
/// Effects left behind by an earlier execution are reified into the
/// requester's actual world and make the action satisfiable. Otherwise the
/// action is satisfiable when every effect variable would be bound by the
/// supplied inputs or the declared outputs.
pub fn evaluate_external_effects(
    action: &ActionDescription,
    inputs: &Bindings,
    requester: &AgentId,
    board: &mut Blackboard,
) -> Result<ExternalEffects, ActionError> {
    let patterns: Vec<Pattern> = action
        .effect
        .iter()
        .filter(|e| matches!(e, Effect::Assert { .. }))
        .map(|e| e.pattern().substitute(inputs))
        .collect();

    let mut grounded: Vec<Statement> = Vec::new();
    if !patterns.is_empty() {
        for sol in board.data.solve(&patterns, &Bindings::new()) {
            for p in &patterns {
                let stmt = p.ground(&sol)?;
                if !grounded.contains(&stmt) {
                    grounded.push(stmt);
                }
            }
        }
    }

    let satisfiable = if grounded.is_empty() {
        let mut available: BTreeSet<&str> = inputs.keys().map(String::as_str).collect();
        available.extend(action.outputs.iter().map(|p| p.name.as_str()));
        available.insert(SELF_VAR);
        patterns.iter().all(|p| p.variables().all(|v| available.contains(v)))
    } else {
        for stmt in &grounded {
            let p = reify(stmt, requester, true, board.now)?;
            board.allocate(&p);
        }
        true
    };
    board.emit(TraceEvent::ExternalEffects {
        agent: requester.clone(),
        action: action.name.clone(),
        satisfiable,
        grounded: grounded.len(),
    });
    Ok(ExternalEffects { satisfiable, grounded })
}

/// Asserted type statements for `value` (used by services and tests to seed inputs).
pub fn typed(value: &str, class: &str) -> Statement {
    Statement::new(Term::sym(value), Term::sym(RDF_TYPE), Term::sym(class)).expect("symbols form a ground statement")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptions::{load_description, Description};

    fn action(json: &str) -> ActionDescription {
        match load_description(json.as_bytes()).unwrap() {
            Description::Action(a) => a,
            other => panic!("expected action, got {}", other.kind()),
        }
    }

    fn counter_hosts() -> HostBindings {
        let mut h = HostBindings::new();
        h.bind("increment", |b, _| {
            let n = match b.get("counter") {
                Some(Term::Num { value, .. }) => value.0,
                _ => 0.0,
            };
            Ok(Bindings::from([("counter".to_string(), Term::num(n + 1.0))]))
        });
        h.bind("fail", |_, _| Err("boom".into()));
        h.bind("left", |_, _| Ok(Bindings::from([("x".to_string(), Term::num(1.0))])));
        h.bind("right", |_, _| Ok(Bindings::from([("y".to_string(), Term::num(2.0))])));
        h.bind("clash", |_, _| Ok(Bindings::from([("x".to_string(), Term::num(9.0))])));
        h
    }

    fn ctx_run(node: serde_json::Value, start: Bindings) -> Result<Bindings, ProcessError> {
        let node: ProcessNode = serde_json::from_value(node).unwrap();
        let hosts = counter_hosts();
        let data = TripleStore::new();
        let mental = MentalModel::new();
        run_process(
            &node,
            &start,
            &ProcessCtx {
                hosts: &hosts,
                data: &data,
                mental: &mental,
            },
        )
    }

    #[test]
    fn iteration_counts_to_three() {
        let node = serde_json::json!({"iteration": {
            "body": {"atomic": "increment"},
            "until": [{"compare": ["?counter", "=", 3]}],
            "maxIters": 10
        }});
        let out = ctx_run(node, Bindings::from([("counter".to_string(), Term::num(0.0))])).unwrap();
        assert_eq!(out["counter"], Term::num(3.0));
    }

    #[test]
    fn iteration_budget() {
        let node = serde_json::json!({"iteration": {
            "body": {"atomic": "increment"},
            "until": [{"compare": ["?counter", "=", 30]}],
            "maxIters": 4
        }});
        let err = ctx_run(node, Bindings::from([("counter".to_string(), Term::num(0.0))])).unwrap_err();
        assert_eq!(err, ProcessError::IterationBudgetExceeded { max_iters: 4 });
    }

    #[test]
    fn sequence_short_circuits() {
        let node = serde_json::json!({"sequence": [{"atomic": "fail"}, {"atomic": "increment"}]});
        assert!(matches!(ctx_run(node, Bindings::new()), Err(ProcessError::Host { .. })));
    }

    #[test]
    fn alternative_takes_first_true_branch() {
        let node = serde_json::json!({"alternative": [
            {"when": [{"compare": [1, ">", 2]}], "do": {"atomic": "left"}},
            {"when": [{"compare": [1, "<", 2]}], "do": {"atomic": "right"}}
        ]});
        let out = ctx_run(node, Bindings::new()).unwrap();
        assert_eq!(out.get("y"), Some(&Term::num(2.0)));
        assert!(!out.contains_key("x"));
    }

    #[test]
    fn alternative_without_match_fails() {
        let node = serde_json::json!({"alternative": [{"when": [{"compare": [1, ">", 2]}], "do": {"atomic": "left"}}]});
        assert_eq!(ctx_run(node, Bindings::new()), Err(ProcessError::NoBranchApplicable));
    }

    #[test]
    fn concurrence_merges_and_detects_conflicts() {
        let ok = serde_json::json!({"concurrence": [{"atomic": "left"}, {"atomic": "right"}]});
        let out = ctx_run(ok, Bindings::new()).unwrap();
        assert_eq!(out.len(), 2);
        let clash = serde_json::json!({"concurrence": [{"atomic": "left"}, {"atomic": "clash"}]});
        assert_eq!(
            ctx_run(clash, Bindings::new()),
            Err(ProcessError::BindingConflict { var: "x".into() })
        );
    }

    const ABSTRACT: &str = r#"{
        "type": "Action", "name": "ex:video-abstract", "capability": "ex:VideoAbstractService",
        "inputs": [{"name": "movie", "dataType": "ex:Movie"}],
        "outputs": [{"name": "clip", "dataType": "rdfs:Resource"}],
        "precondition": [{"pattern": ["?movie", "ex:title", "?title"]}],
        "effect": [{"assert": ["?movie", "ex:hasAbstract", "?clip"]}],
        "process": {"atomic": "make-clip"}
    }"#;

    fn abstract_board() -> Blackboard {
        let mut board = Blackboard::default();
        board.data.assert_stmt(typed("ex:m1", "ex:Movie")).unwrap();
        board
            .data
            .assert_stmt(
                Statement::new(
                    Term::sym("ex:m1"),
                    Term::sym("ex:title"),
                    Term::lit("Brokeback Mountain"),
                )
                .unwrap(),
            )
            .unwrap();
        board
    }

    fn clip_hosts() -> HostBindings {
        let mut h = HostBindings::new();
        h.bind("make-clip", |b, _| {
            let movie = b["movie"].as_symbol().unwrap().to_owned();
            Ok(Bindings::from([(
                "clip".to_string(),
                Term::sym(format!("clip:{movie}")),
            )]))
        });
        h
    }

    #[test]
    fn successful_execution_records_effects_and_outputs() {
        let a = action(ABSTRACT);
        let mut board = abstract_board();
        let inputs = Bindings::from([("movie".to_string(), Term::sym("ex:m1"))]);
        let rec = execute(&a, &inputs, &"T".into(), &clip_hosts(), &mut board).unwrap();
        assert!(rec.succeeded());
        assert_eq!(rec.outputs["clip"], Term::sym("clip:ex:m1"));
        let effect = Statement::new(Term::sym("ex:m1"), Term::sym("ex:hasAbstract"), Term::sym("clip:ex:m1")).unwrap();
        assert!(board.data.contains(&effect));
        let phases: Vec<_> = board
            .trace
            .lines()
            .iter()
            .filter_map(|l| match &l.event {
                TraceEvent::Check { phase, ok, .. } => Some((*phase, *ok)),
                _ => None,
            })
            .collect();
        assert_eq!(
            phases,
            vec![
                ("before-evaluation", true),
                ("after-precondition", true),
                ("after-execution", true)
            ]
        );
    }

    #[test]
    fn failed_precondition_names_clause_and_inputs() {
        let a = action(ABSTRACT);
        let mut board = Blackboard::default();
        board.data.assert_stmt(typed("ex:m9", "ex:Movie")).unwrap();
        let inputs = Bindings::from([("movie".to_string(), Term::sym("ex:m9"))]);
        let rec = execute(&a, &inputs, &"T".into(), &clip_hosts(), &mut board).unwrap();
        assert_eq!(rec.status, ExecStatus::PreconditionFailed);
        let reason = rec.reason.unwrap();
        let Term::Str(text) = &reason.object else { panic!() };
        assert!(text.contains("clause 1") && text.contains("movie=ex:m9"), "{text}");
        assert!(rec.applied.is_empty());
    }

    #[test]
    fn input_errors() {
        let a = action(ABSTRACT);
        let mut board = abstract_board();
        let err = execute(&a, &Bindings::new(), &"T".into(), &clip_hosts(), &mut board).unwrap_err();
        assert!(matches!(err, ActionError::MissingInput { .. }));
        let wrong = Bindings::from([("movie".to_string(), Term::sym("ex:catalog"))]);
        let err = execute(&a, &wrong, &"T".into(), &clip_hosts(), &mut board).unwrap_err();
        assert!(matches!(err, ActionError::TypeMismatch { .. }));
        let inputs = Bindings::from([("movie".to_string(), Term::sym("ex:m1"))]);
        let err = execute(&a, &inputs, &"T".into(), &HostBindings::new(), &mut board).unwrap_err();
        assert!(matches!(err, ActionError::UnboundAtomicOp { .. }));
    }

    #[test]
    fn subclass_input_accepted() {
        let mut data = TripleStore::new();
        data.assert_stmt(
            Statement::new(
                Term::sym("ex:VideoBroadcastService"),
                Term::sym("rdfs:subClassOf"),
                Term::sym("ex:MediaService"),
            )
            .unwrap(),
        )
        .unwrap();
        assert!(conforms(
            &Term::sym("ex:VideoBroadcastService"),
            "ex:MediaService",
            &data
        ));
        assert!(!conforms(
            &Term::sym("ex:MediaService"),
            "ex:VideoBroadcastService",
            &data
        ));
    }

    #[test]
    fn external_effects_on_empty_store() {
        let a = action(ABSTRACT);
        let mut board = Blackboard::default();
        let given = Bindings::from([("movie".to_string(), Term::sym("ex:m1"))]);
        assert!(
            evaluate_external_effects(&a, &given, &"S".into(), &mut board)
                .unwrap()
                .satisfiable
        );

        let mut open = a.clone();
        open.effect = vec![Effect::assert(Pattern::new(
            Term::var("who"),
            Term::sym("ex:watched"),
            Term::var("movie"),
        ))];
        let r = evaluate_external_effects(&open, &Bindings::new(), &"S".into(), &mut board).unwrap();
        assert!(!r.satisfiable);
        assert!(r.grounded.is_empty());
    }

    #[test]
    fn external_effects_reuse_prior_outputs_idempotently() {
        let a = action(ABSTRACT);
        let mut board = abstract_board();
        let inputs = Bindings::from([("movie".to_string(), Term::sym("ex:m1"))]);
        execute(&a, &inputs, &"T".into(), &clip_hosts(), &mut board).unwrap();
        let r = evaluate_external_effects(&a, &inputs, &"S".into(), &mut board).unwrap();
        assert_eq!(r.grounded.len(), 1);
        let size = board.mental.actual_statements(&"S".into()).len();
        assert_eq!(size, 1);
        evaluate_external_effects(&a, &inputs, &"S".into(), &mut board).unwrap();
        assert_eq!(board.mental.actual_statements(&"S".into()).len(), size);
    }
}
