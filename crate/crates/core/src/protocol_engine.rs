//! Drives conversations through protocol state machines.
//!
//! Each participant has its own lane through the protocol. A step fires at
//! most one transition per lane: the sender's envelope goes out, the
//! receiver's CA engine judges it, and the outcome is carried to select the
//! lane's next transition. States whose exits are labelled `selected` /
//! `rejected` form a barrier: lanes wait there until every lane has arrived,
//! then the collected proposals are evaluated once.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_engine::ExecutionRecord;
use crate::board::Blackboard;
use crate::ca_engine::{perform_ca, ActionRef, CaContent, CaContext, CaError, CaInstance, CaOutcome};
use crate::descriptions::{
    eval_condition, ConditionError, ProtocolDescription, Registry, RoleMap, Transition, TransitionLabel, SELF_VAR,
};
use crate::ids::{AgentId, ConversationId};
use crate::store::Statement;
use crate::term::{Bindings, Term};
use crate::trace::TraceEvent;
use crate::transport::{Envelope, Transport, TransportError};

pub const ACF_PERFORMED: &str = "acf:performed";
pub const ACF_DECLINED: &str = "acf:declined";
pub const ACF_PROPOSAL_REJECTED_FOR: &str = "acf:proposalRejectedFor";
pub const ACF_NO_RESPONSE_TO: &str = "acf:noResponseTo";

pub const DEFAULT_TIMEOUT_BUDGET: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("conversation needs at least one participant")]
    NoParticipants,
    #[error("unknown protocol `{0}`")]
    UnknownProtocol(String),
    #[error("no protocol opens with `{0}`")]
    NoProtocolForCa(String),
    #[error("no proposals to evaluate")]
    NoProposals,
    #[error("{conv}: lane of {participant} is stuck in `{state}`")]
    Deadlock {
        conv: ConversationId,
        participant: AgentId,
        state: String,
    },
    #[error(transparent)]
    Ca(#[from] CaError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Objective {
    pub direction: Direction,
    /// Proposal variable to rank by; a leading `?` is ignored.
    pub variable: String,
}

impl Objective {
    pub fn var(&self) -> &str {
        self.variable.trim_start_matches('?')
    }
}

/// Picks the winning proposal.
///
/// Proposals are ranked by the objective variable; a proposal without a
/// comparable value ranks last. Ties, and every comparison when there is no
/// objective, fall back to agent-id order.
pub fn evaluate_proposals(
    proposals: &[(AgentId, Bindings)],
    objective: Option<&Objective>,
) -> Result<AgentId, ProtocolError> {
    fn key<'a>(b: &'a Bindings, objective: Option<&Objective>) -> Option<&'a Term> {
        objective.and_then(|o| b.get(o.var()))
    }
    let better = |a: &(AgentId, Bindings), b: &(AgentId, Bindings)| -> Ordering {
        let by_value = match (key(&a.1, objective), key(&b.1, objective)) {
            (Some(x), Some(y)) => match x.partial_order(y) {
                Ok(ord) => match objective.map(|o| o.direction) {
                    Some(Direction::Minimize) => ord,
                    _ => ord.reverse(),
                },
                Err(_) => Ordering::Equal,
            },
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_value.then_with(|| a.0.cmp(&b.0))
    };
    proposals
        .iter()
        .min_by(|a, b| better(a, b))
        .map(|(agent, _)| agent.clone())
        .ok_or(ProtocolError::NoProposals)
}

/// Protocol opened by `ca`, preferring the family that fits the provider count.
pub fn select_protocol(ca: &str, provider_count: usize, registry: &Registry) -> Result<String, ProtocolError> {
    let want_evaluation = provider_count > 1;
    registry
        .protocols()
        .filter(|p| p.opening_cas().any(|o| o == ca))
        .min_by_key(|p| (p.has_barrier() != want_evaluation, p.name.clone()))
        .map(|p| p.name.clone())
        .ok_or_else(|| ProtocolError::NoProtocolForCa(ca.to_owned()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConversationStatus {
    Running,
    Succeeded,
    Failed,
}

impl ConversationStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ConversationStatus::Running => "running",
            ConversationStatus::Succeeded => "succeeded",
            ConversationStatus::Failed => "failed",
        }
    }
}

/// What the previous hop of a lane left behind.
#[derive(Debug, Clone, PartialEq)]
pub enum Carried {
    Nothing,
    Outcome(TransitionLabel),
    /// The last envelope never arrived.
    Lost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub participant: AgentId,
    pub state: String,
    pub carried: Carried,
    /// Steps spent waiting for a response that never came.
    pub stalled: u32,
    pub last_token: Option<String>,
    pub reason: Option<Statement>,
    pub proposal: Option<Bindings>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub participant: AgentId,
    pub from: String,
    pub to: String,
    pub ca: String,
    pub sender: AgentId,
    pub receiver: AgentId,
    pub reply_with: String,
    /// `None` when the envelope was dropped and never judged.
    pub outcome: Option<CaOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    pub id: ConversationId,
    pub protocol: String,
    pub initiator: AgentId,
    pub action: ActionRef,
    pub lanes: Vec<Lane>,
    pub transcript: Vec<TranscriptEntry>,
    pub status: ConversationStatus,
    pub winner: Option<AgentId>,
    pub evaluated: bool,
    pub timeout_budget: u32,
    /// The execution that performed the delegated action, once one has.
    pub execution: Option<ExecutionRecord>,
    sent: u64,
}

impl Conversation {
    pub fn is_running(&self) -> bool {
        self.status == ConversationStatus::Running
    }

    pub fn lane(&self, participant: &AgentId) -> Option<&Lane> {
        self.lanes.iter().find(|l| &l.participant == participant)
    }

    pub fn participants(&self) -> impl Iterator<Item = &AgentId> {
        self.lanes.iter().map(|l| &l.participant)
    }
}

/// Opens a conversation with every participant at the start state.
pub fn start_conversation(
    registry: &Registry,
    protocol: &str,
    id: ConversationId,
    initiator: &AgentId,
    participants: &[AgentId],
    action: ActionRef,
    board: &mut Blackboard,
) -> Result<Conversation, ProtocolError> {
    let desc = registry
        .protocol(protocol)
        .ok_or_else(|| ProtocolError::UnknownProtocol(protocol.to_owned()))?;
    if participants.is_empty() {
        return Err(ProtocolError::NoParticipants);
    }
    let start = desc.start_state().id.clone();
    let lanes = participants
        .iter()
        .map(|p| Lane {
            participant: p.clone(),
            state: start.clone(),
            carried: Carried::Nothing,
            stalled: 0,
            last_token: None,
            reason: None,
            proposal: None,
        })
        .collect();
    board.emit(TraceEvent::Conversation {
        conv: id.clone(),
        protocol: protocol.to_owned(),
        status: ConversationStatus::Running.as_str(),
    });
    Ok(Conversation {
        id,
        protocol: protocol.to_owned(),
        initiator: initiator.clone(),
        action,
        lanes,
        transcript: Vec::new(),
        status: ConversationStatus::Running,
        winner: None,
        evaluated: false,
        timeout_budget: DEFAULT_TIMEOUT_BUDGET,
        execution: None,
        sent: 0,
    })
}

pub struct StepContext<'a> {
    pub ca: CaContext<'a>,
    pub transport: &'a mut Transport,
    pub objective: Option<&'a Objective>,
}

fn label_allows(t: &Transition, carried: &Carried) -> bool {
    match (carried, t.on) {
        (Carried::Nothing, None | Some(TransitionLabel::Performed)) => true,
        (Carried::Outcome(TransitionLabel::Performed), None) => true,
        (Carried::Outcome(c), Some(on)) => *c == on,
        _ => false,
    }
}

/// Advances the conversation by one step and returns the transitions fired.
///
/// Does nothing on a conversation that is no longer running. A lane with no
/// enabled transition deadlocks the conversation, which then fails.
pub fn step(
    conv: &mut Conversation,
    ctx: &mut StepContext<'_>,
    board: &mut Blackboard,
) -> Result<Vec<TranscriptEntry>, ProtocolError> {
    if !conv.is_running() {
        return Ok(Vec::new());
    }
    board.advance();
    let registry = ctx.ca.registry;
    let desc = registry
        .protocol(&conv.protocol)
        .ok_or_else(|| ProtocolError::UnknownProtocol(conv.protocol.clone()))?;

    let at_barrier = |l: &Lane| desc.is_barrier(&l.state);
    if !conv.evaluated {
        // A proposal lost in transit holds evaluation back until its lane
        // has waited out the timeout budget.
        for lane in conv
            .lanes
            .iter_mut()
            .filter(|l| at_barrier(l) && l.carried == Carried::Lost)
        {
            lane.stalled += 1;
        }
        let budget = conv.timeout_budget;
        let ready = |l: &Lane| {
            desc.is_accept(&l.state) || (at_barrier(l) && (l.carried != Carried::Lost || l.stalled >= budget))
        };
        if conv.lanes.iter().any(at_barrier) && conv.lanes.iter().all(ready) {
            evaluate_barrier(conv, desc, ctx.objective, board);
        }
    }

    let mut fired = Vec::new();
    for i in 0..conv.lanes.len() {
        let lane = &conv.lanes[i];
        if desc.is_accept(&lane.state) || (at_barrier(lane) && !conv.evaluated) {
            continue;
        }
        let roles = RoleMap::from([
            ("initiator".to_owned(), conv.initiator.clone()),
            ("participant".to_owned(), lane.participant.clone()),
        ]);
        let mut chosen = None;
        for t in desc.outgoing(&lane.state).filter(|t| label_allows(t, &lane.carried)) {
            if guard_holds(t, &roles, board)? {
                chosen = Some(t);
                break;
            }
        }
        if chosen.is_none() && lane.carried == Carried::Lost {
            let lane = &mut conv.lanes[i];
            lane.stalled += 1;
            if lane.stalled < conv.timeout_budget {
                continue;
            }
            chosen = desc
                .outgoing(&lane.state)
                .find(|t| t.on == Some(TransitionLabel::Timeout));
        }
        let Some(t) = chosen else {
            let lane = &conv.lanes[i];
            let err = ProtocolError::Deadlock {
                conv: conv.id.clone(),
                participant: lane.participant.clone(),
                state: lane.state.clone(),
            };
            finish(conv, ConversationStatus::Failed, board);
            return Err(err);
        };
        fired.push(fire(conv, i, t, ctx, board)?);
    }

    if conv.lanes.iter().all(|l| desc.is_accept(&l.state)) {
        let ok = conv.lanes.iter().any(|l| !desc.is_failure(&l.state));
        let status = if ok {
            ConversationStatus::Succeeded
        } else {
            ConversationStatus::Failed
        };
        finish(conv, status, board);
    }
    Ok(fired)
}

fn guard_holds(t: &Transition, roles: &RoleMap, board: &Blackboard) -> Result<bool, ProtocolError> {
    let Some(guard) = &t.guard else {
        return Ok(true);
    };
    let bindings = roles
        .iter()
        .map(|(role, agent)| (role.clone(), agent.term()))
        .collect::<Bindings>();
    Ok(!eval_condition(guard, &bindings, &board.data, &board.mental, roles)?.is_empty())
}

fn evaluate_barrier(
    conv: &mut Conversation,
    desc: &ProtocolDescription,
    objective: Option<&Objective>,
    board: &mut Blackboard,
) {
    let proposals: Vec<(AgentId, Bindings)> = conv
        .lanes
        .iter()
        .filter(|l| desc.is_barrier(&l.state))
        .filter_map(|l| l.proposal.clone().map(|p| (l.participant.clone(), p)))
        .collect();
    let winner = evaluate_proposals(&proposals, objective).ok();
    board.emit(TraceEvent::Evaluate {
        conv: conv.id.clone(),
        proposals: proposals.clone(),
        winner: winner.clone(),
    });
    for lane in conv.lanes.iter_mut().filter(|l| desc.is_barrier(&l.state)) {
        let label = if Some(&lane.participant) == winner.as_ref() {
            TransitionLabel::Selected
        } else {
            TransitionLabel::Rejected
        };
        lane.carried = Carried::Outcome(label);
    }
    conv.winner = winner;
    conv.evaluated = true;
}

fn finish(conv: &mut Conversation, status: ConversationStatus, board: &mut Blackboard) {
    conv.status = status;
    board.emit(TraceEvent::Conversation {
        conv: conv.id.clone(),
        protocol: conv.protocol.clone(),
        status: status.as_str(),
    });
}

fn sym(agent: &AgentId, pred: &str, action: &str) -> Statement {
    Statement::new(agent.term(), Term::sym(pred), Term::sym(action)).expect("symbols form a ground statement")
}

fn build_content(
    conv: &Conversation,
    lane: &Lane,
    t: &Transition,
    sender: &AgentId,
    receiver: &AgentId,
    ctx: &StepContext<'_>,
) -> Result<CaContent, ProtocolError> {
    let desc = ctx
        .ca
        .registry
        .ca(&t.execute)
        .ok_or_else(|| CaError::UnknownCa(t.execute.clone()))?;
    let action = &conv.action.name;
    let schema = desc.content;
    Ok(CaContent {
        action: schema.action.then(|| conv.action.clone()),
        proposition: schema.proposition.then(|| sym(sender, ACF_PERFORMED, action)),
        condition: schema.condition.then(|| {
            ctx.ca
                .offers
                .get(&(sender.clone(), action.clone()))
                .cloned()
                .unwrap_or_default()
        }),
        reason: schema.reason.then(|| match (t.on, &lane.reason) {
            (Some(TransitionLabel::Timeout), _) => sym(sender, ACF_NO_RESPONSE_TO, action),
            (Some(TransitionLabel::Rejected), _) => sym(receiver, ACF_PROPOSAL_REJECTED_FOR, action),
            (_, Some(r)) => r.clone(),
            _ => sym(sender, ACF_DECLINED, action),
        }),
    })
}

fn fire(
    conv: &mut Conversation,
    i: usize,
    t: &Transition,
    ctx: &mut StepContext<'_>,
    board: &mut Blackboard,
) -> Result<TranscriptEntry, ProtocolError> {
    let lane = &conv.lanes[i];
    let agent_for = |role: &str| {
        if role == "initiator" {
            conv.initiator.clone()
        } else {
            lane.participant.clone()
        }
    };
    let (sender, receiver) = (agent_for(&t.sender), agent_for(&t.receiver));
    let content = build_content(conv, lane, t, &sender, &receiver, ctx)?;

    conv.sent += 1;
    let token = format!("{}.{}", conv.id, conv.sent);
    board.emit(TraceEvent::Transition {
        conv: conv.id.clone(),
        from: t.from.clone(),
        to: t.to.clone(),
        ca: t.execute.clone(),
        sender: sender.clone(),
        receiver: receiver.clone(),
    });
    let receipt = ctx.transport.send(
        Envelope {
            performative: t.execute.clone(),
            sender: sender.clone(),
            receiver: receiver.clone(),
            content: content.to_json(),
            conversation: conv.id.clone(),
            reply_with: token.clone(),
            in_reply_to: lane.last_token.clone(),
            tick: board.now,
        },
        board,
    )?;

    let outcome = if receipt.delivered {
        let inst = CaInstance {
            ca: t.execute.clone(),
            sender: sender.clone(),
            receiver: receiver.clone(),
            content: content.clone(),
            conversation: conv.id.clone(),
        };
        Some(perform_ca(&inst, ctx.ca, board)?)
    } else {
        None
    };

    let registry = ctx.ca.registry;
    let desc = registry.protocol(&conv.protocol).expect("checked by step");
    if let Some(record) = outcome
        .as_ref()
        .and_then(|r| r.execution.as_ref())
        .filter(|r| r.succeeded())
    {
        conv.execution = Some(record.clone());
    }
    let lane = &mut conv.lanes[i];
    lane.state = t.to.clone();
    lane.last_token = Some(token.clone());
    lane.stalled = 0;
    match &outcome {
        None => lane.carried = Carried::Lost,
        Some(report) => {
            lane.reason = report.reason.clone();
            if report.outcome.is_performed() {
                lane.carried = Carried::Outcome(TransitionLabel::Performed);
                if desc.is_barrier(&t.to) {
                    lane.proposal = Some(proposal_terms(&report.bindings, content.condition.as_deref()));
                }
            } else {
                lane.carried = Carried::Outcome(TransitionLabel::Failed);
            }
        }
    }

    let entry = TranscriptEntry {
        participant: lane.participant.clone(),
        from: t.from.clone(),
        to: t.to.clone(),
        ca: t.execute.clone(),
        sender,
        receiver,
        reply_with: token,
        outcome: outcome.map(|r| r.outcome),
    };
    conv.transcript.push(entry.clone());
    Ok(entry)
}

/// The part of a proposer's bindings its offer condition produced.
fn proposal_terms(bindings: &Bindings, condition: Option<&[crate::descriptions::Clause]>) -> Bindings {
    let vars: std::collections::BTreeSet<String> = condition
        .unwrap_or_default()
        .iter()
        .flat_map(|c| c.variables())
        .filter(|v| v != SELF_VAR)
        .collect();
    bindings
        .iter()
        .filter(|(k, _)| vars.contains(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Checks a transcript against the protocol: every hop must leave the
/// lane's current state along a declared transition, with matching parties,
/// and nothing may follow an accept state.
pub fn replay(desc: &ProtocolDescription, initiator: &AgentId, transcript: &[TranscriptEntry]) -> Result<(), String> {
    let mut states: std::collections::BTreeMap<&AgentId, &str> = std::collections::BTreeMap::new();
    let start = desc.start_state().id.as_str();
    for (n, e) in transcript.iter().enumerate() {
        let current = *states.entry(&e.participant).or_insert(start);
        if desc.is_accept(current) {
            return Err(format!("hop {n}: {} already finished in `{current}`", e.participant));
        }
        let agent_for = |role: &str| if role == "initiator" { initiator } else { &e.participant };
        let licensed = desc.outgoing(current).any(|t| {
            t.to == e.to
                && t.execute == e.ca
                && agent_for(&t.sender) == &e.sender
                && agent_for(&t.receiver) == &e.receiver
        });
        if e.from != current || !licensed {
            return Err(format!(
                "hop {n}: {} {} -> {} via {} is not licensed",
                e.participant, e.from, e.to, e.ca
            ));
        }
        states.insert(&e.participant, &e.to);
    }
    Ok(())
}
