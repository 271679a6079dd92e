//! Performs communicative acts: judges the feasibility precondition, applies
//! the rational effect to the mental model and hands carried actions to the
//! action engine. Never sends messages; the protocol engine does that.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::action_engine::{execute, ActionError, ExecutionRecord, HostBindings};
use crate::board::Blackboard;
use crate::descriptions::{
    apply_effects, condition_to_json, eval_condition, ActionDescription, ActionPerformer, AppliedChange, Condition,
    ConditionError, ContentSchema, Registry, RoleMap, Scope, SELF_VAR,
};
use crate::ids::{AgentId, ConversationId};
use crate::mentality::reify;
use crate::store::{Statement, StoreError};
use crate::term::{bindings_to_json, Bindings, Term};
use crate::trace::TraceEvent;

pub const ACF_UNABLE_TO_PERFORM: &str = "acf:unableToPerform";

/// Per-agent conditions under which a provider offers an action.
pub type OfferConditions = BTreeMap<(AgentId, String), Condition>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CaError {
    #[error("unknown communicative act `{0}`")]
    UnknownCa(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("{ca} expects content {expected}, got {found}")]
    ContentSchemaMismatch {
        ca: String,
        expected: ContentSchema,
        found: ContentSchema,
    },
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionRef {
    pub name: String,
    pub inputs: Bindings,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaContent {
    pub action: Option<ActionRef>,
    pub proposition: Option<Statement>,
    pub condition: Option<Condition>,
    pub reason: Option<Statement>,
}

impl CaContent {
    pub fn schema(&self) -> ContentSchema {
        ContentSchema {
            action: self.action.is_some(),
            proposition: self.proposition.is_some(),
            condition: self.condition.is_some(),
            reason: self.reason.is_some(),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        if let Some(a) = &self.action {
            m.insert(
                "action".into(),
                json!({"name": a.name, "inputs": bindings_to_json(&a.inputs)}),
            );
        }
        if let Some(p) = &self.proposition {
            m.insert("proposition".into(), p.to_json());
        }
        if let Some(c) = &self.condition {
            m.insert("condition".into(), condition_to_json(c));
        }
        if let Some(r) = &self.reason {
            m.insert("reason".into(), r.to_json());
        }
        Value::Object(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaInstance {
    pub ca: String,
    pub sender: AgentId,
    pub receiver: AgentId,
    pub content: CaContent,
    pub conversation: ConversationId,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaOutcome {
    Performed,
    FpFailed,
    ActionFailed { reason: Statement },
}

impl CaOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaOutcome::Performed => "performed",
            CaOutcome::FpFailed => "fp_failed",
            CaOutcome::ActionFailed { .. } => "action_failed",
        }
    }

    pub fn is_performed(&self) -> bool {
        matches!(self, CaOutcome::Performed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaReport {
    pub outcome: CaOutcome,
    /// Bindings the feasibility check settled on (empty when it failed).
    pub bindings: Bindings,
    /// Rational-effect changes, then reified execution results.
    pub changes: Vec<AppliedChange>,
    pub execution: Option<ExecutionRecord>,
    /// Why the act could not be performed or its action failed.
    pub reason: Option<Statement>,
}

/// Everything a CA needs besides the blackboard.
#[derive(Debug, Clone, Copy)]
pub struct CaContext<'a> {
    pub registry: &'a Registry,
    pub hosts: &'a HostBindings,
    pub offers: &'a OfferConditions,
}

fn role_map(sender: &AgentId, receiver: &AgentId) -> RoleMap {
    RoleMap::from([
        ("initiator".to_owned(), sender.clone()),
        ("participant".to_owned(), receiver.clone()),
    ])
}

fn with_self(cond: &Condition, agent: &AgentId, bindings: &Bindings) -> Bindings {
    let mut b = bindings.clone();
    if cond.iter().any(|c| c.variables().contains(SELF_VAR)) {
        b.insert(SELF_VAR.to_owned(), agent.term());
    }
    b
}

/// Binding map a CA's conditions and effects are evaluated under.
pub fn base_bindings(inst: &CaInstance, action: Option<&ActionDescription>) -> Bindings {
    let mut b = Bindings::from([
        ("sender".to_owned(), inst.sender.term()),
        ("receiver".to_owned(), inst.receiver.term()),
        ("conv".to_owned(), Term::sym(&inst.conversation.0)),
    ]);
    if let Some(a) = &inst.content.action {
        b.insert("action".to_owned(), Term::sym(&a.name));
        b.extend(a.inputs.clone());
    }
    if let Some(d) = action {
        b.insert("capability".to_owned(), Term::sym(&d.capability));
    }
    for (prefix, stmt) in [("p", &inst.content.proposition), ("r", &inst.content.reason)] {
        if let Some(s) = stmt {
            b.insert(format!("{prefix}s"), s.subject.clone());
            b.insert(format!("{prefix}p"), s.predicate.clone());
            b.insert(format!("{prefix}o"), s.object.clone());
        }
    }
    b
}

/// Checks feasibility of `inst` and, when it holds, performs it.
pub fn perform_ca(inst: &CaInstance, ctx: CaContext<'_>, board: &mut Blackboard) -> Result<CaReport, CaError> {
    let desc = ctx
        .registry
        .ca(&inst.ca)
        .ok_or_else(|| CaError::UnknownCa(inst.ca.clone()))?;
    let found = inst.content.schema();
    if found != desc.content {
        return Err(CaError::ContentSchemaMismatch {
            ca: inst.ca.clone(),
            expected: desc.content,
            found,
        });
    }
    let action = match &inst.content.action {
        Some(a) => Some(
            ctx.registry
                .action(&a.name)
                .ok_or_else(|| CaError::UnknownAction(a.name.clone()))?,
        ),
        None => None,
    };

    let roles = role_map(&inst.sender, &inst.receiver);
    let bindings = base_bindings(inst, action);
    let solution = feasible(inst, desc.is_action_directive(), action, ctx, &roles, &bindings, board)?;

    let Some(solution) = solution else {
        let reason = action.map(|a| {
            Statement::new(
                inst.receiver.term(),
                Term::sym(ACF_UNABLE_TO_PERFORM),
                Term::sym(&a.name),
            )
            .expect("symbols form a ground statement")
        });
        board.emit(ca_line(inst, &CaOutcome::FpFailed));
        return Ok(CaReport {
            outcome: CaOutcome::FpFailed,
            bindings: Bindings::new(),
            changes: Vec::new(),
            execution: None,
            reason,
        });
    };

    let mut changes = apply_effects(&desc.re, &solution, &Scope::Mental("participant".into()), &roles, board)?;

    let mut outcome = CaOutcome::Performed;
    let mut execution = None;
    let mut reason = None;
    if let (Some(performer), Some(a), Some(aref)) = (desc.action_performer, action, &inst.content.action) {
        let performer = match performer {
            ActionPerformer::Sender => &inst.sender,
            ActionPerformer::Receiver => &inst.receiver,
        };
        let record = execute(a, &aref.inputs, performer, ctx.hosts, board)?;
        let shared: Vec<Statement> = if record.succeeded() {
            record
                .applied
                .iter()
                .filter_map(|c| match c {
                    AppliedChange::Asserted(s) => Some(s.clone()),
                    _ => None,
                })
                .collect()
        } else {
            record.reason.iter().cloned().collect()
        };
        for stmt in &shared {
            for believer in [&inst.sender, &inst.receiver] {
                let p = reify(stmt, believer, true, board.now)?;
                let world = board.allocate(&p);
                changes.push(AppliedChange::Allocated {
                    believer: believer.clone(),
                    statement: stmt.clone(),
                    belief: true,
                    world,
                });
            }
        }
        if let Some(r) = record.reason.clone().filter(|_| !record.succeeded()) {
            outcome = CaOutcome::ActionFailed { reason: r.clone() };
            reason = Some(r);
        }
        execution = Some(record);
    }

    board.emit(ca_line(inst, &outcome));
    Ok(CaReport {
        outcome,
        bindings: solution,
        changes,
        execution,
        reason,
    })
}

/// First solution of the act's feasibility condition, if any.
///
/// Besides the description's own FP, a directive that carries an action
/// needs the action's precondition and the receiver's offer condition to
/// hold for the receiver; a commissive needs its content condition to hold
/// for the sender.
fn feasible(
    inst: &CaInstance,
    directive: bool,
    action: Option<&ActionDescription>,
    ctx: CaContext<'_>,
    roles: &RoleMap,
    bindings: &Bindings,
    board: &Blackboard,
) -> Result<Option<Bindings>, CaError> {
    let desc = &ctx.registry.ca(&inst.ca).expect("checked by caller");
    let mut solutions = eval_condition(&desc.fp, bindings, &board.data, &board.mental, roles)?;

    let mut extra: Vec<(Condition, &AgentId)> = Vec::new();
    if let (true, Some(a)) = (directive, action) {
        extra.push((a.precondition.clone(), &inst.receiver));
        if let Some(offer) = ctx.offers.get(&(inst.receiver.clone(), a.name.clone())) {
            extra.push((offer.clone(), &inst.receiver));
        }
    }
    if let Some(cond) = &inst.content.condition {
        extra.push((cond.clone(), &inst.sender));
    }

    for (cond, agent) in extra {
        let mut next = Vec::new();
        for sol in &solutions {
            let start = with_self(&cond, agent, sol);
            let had_self = sol.contains_key(SELF_VAR);
            for mut found in eval_condition(&cond, &start, &board.data, &board.mental, roles)? {
                if !had_self {
                    found.remove(SELF_VAR);
                }
                next.push(found);
            }
        }
        solutions = next;
    }
    Ok(solutions.into_iter().next())
}

fn ca_line(inst: &CaInstance, outcome: &CaOutcome) -> TraceEvent {
    TraceEvent::Ca {
        name: inst.ca.clone(),
        sender: inst.sender.clone(),
        receiver: inst.receiver.clone(),
        outcome: outcome.as_str(),
    }
}

/// Candidate acts for delegating `action`, in preference order.
///
/// Only directive acts whose content is exactly one action and that open a
/// loaded protocol qualify, and their rational effect must be expressible
/// with what the delegation knows (parties, action, inputs, outputs). One
/// provider calls for a protocol without proposal evaluation, several for
/// one with it. An empty result sends the caller back to provider lookup.
pub fn select_ca(
    action: &ActionDescription,
    outputs_available: bool,
    provider_count: usize,
    registry: &Registry,
) -> Vec<String> {
    if provider_count == 0 || !outputs_available {
        return Vec::new();
    }
    let want_evaluation = provider_count > 1;
    let mut known: BTreeSet<&str> = ["sender", "receiver", "conv", "action", "capability"].into();
    known.extend(action.parameter_names());

    let mut out: Vec<String> = registry
        .cas()
        .filter(|ca| ca.is_action_directive())
        .filter(|ca| ca.re.iter().all(|e| e.pattern().variables().all(|v| known.contains(v))))
        .filter(|ca| {
            registry
                .protocols()
                .any(|p| p.has_barrier() == want_evaluation && p.opening_cas().any(|o| o == ca.name))
        })
        .map(|ca| ca.name.clone())
        .collect();
    out.sort();
    out
}
