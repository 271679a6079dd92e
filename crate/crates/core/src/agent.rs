//! Agents and the deliberation cycle.
//!
//! An agent holds a goal base (FIFO), a plan base (stack of partially
//! executed plan bodies) and a derived belief base. Each deliberation step
//! takes the next goal and either decomposes it with a plan rule, executes
//! it as one of the agent's own actions, or delegates it to other agents
//! through a protocol-mediated conversation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::action_engine::{evaluate_external_effects, execute, HostBindings};
use crate::board::Blackboard;
use crate::ca_engine::{select_ca, ActionRef, CaContext, OfferConditions};
use crate::descriptions::{eval_condition, Clause, Condition, Registry, RoleMap, SELF_VAR};
use crate::ids::{AgentId, ConversationId, Tick};
use crate::matchmaker::Matchmaker;
use crate::mentality::{deify, reify};
use crate::protocol_engine::{
    select_protocol, start_conversation, step, Conversation, ConversationStatus, Objective, StepContext,
    DEFAULT_TIMEOUT_BUDGET,
};
use crate::store::{Pattern, Statement, TripleSource, TripleStore};
use crate::term::{Bindings, Term};
use crate::trace::{Trace, TraceEvent};
use crate::transport::Transport;

pub const ACF_HAS_CAPABILITY: &str = "acf:hasCapability";
pub const DEFAULT_DEPTH_BOUND: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("cannot parse goal `{0}`")]
    GoalSyntax(String),
    #[error("plan rule for {head}: body variable ?{var} is bound by neither head nor guard")]
    UnboundBodyVariable { head: String, var: String },
    #[error("agent {agent}: capability `{action}` is not a loaded action")]
    UnknownCapability { agent: AgentId, action: String },
    #[error("duplicate agent id `{0}`")]
    DuplicateAgent(AgentId),
    #[error("max_ticks must be at least 1")]
    ZeroTickBudget,
}

/// A goal or action call: `name` or `name(arg, ...)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Goal {
    pub name: String,
    pub args: Vec<Term>,
}

impl Goal {
    pub fn new(name: impl Into<String>, args: Vec<Term>) -> Self {
        Goal {
            name: name.into(),
            args,
        }
    }

    pub fn substitute(&self, bindings: &Bindings) -> Goal {
        Goal {
            name: self.name.clone(),
            args: self.args.iter().map(|a| a.substitute(bindings)).collect(),
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.args
            .iter()
            .filter_map(|a| match a {
                Term::Var(v) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }

    /// Binds the variables of `self` (a rule head) against a concrete call.
    pub fn unify_head(&self, call: &Goal) -> Option<Bindings> {
        if self.name != call.name || self.args.len() != call.args.len() {
            return None;
        }
        let mut b = Bindings::new();
        for (h, c) in self.args.iter().zip(&call.args) {
            match h {
                Term::Var(v) => match b.get(v) {
                    Some(prev) if prev != c => return None,
                    _ => {
                        b.insert(v.clone(), c.clone());
                    }
                },
                _ if h == c => {}
                _ => return None,
            }
        }
        Some(b)
    }
}

fn parse_arg(raw: &str) -> Result<Term, String> {
    let raw = raw.trim();
    if let Some(inner) = raw.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        return Ok(Term::lit(inner));
    }
    if let Ok(n) = raw.parse::<f64>() {
        return Ok(Term::num(n));
    }
    Term::from_json(&Value::String(raw.to_owned())).map_err(|e| e.to_string())
}

impl FromStr for Goal {
    type Err = RuntimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || RuntimeError::GoalSyntax(s.to_owned());
        let s = s.trim();
        let (name, args) = match s.find('(') {
            None => (s, Vec::new()),
            Some(open) => {
                let inner = s[open + 1..].strip_suffix(')').ok_or_else(err)?;
                let args = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner
                        .split(',')
                        .map(parse_arg)
                        .collect::<Result<_, _>>()
                        .map_err(|_| err())?
                };
                (&s[..open], args)
            }
        };
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(err());
        }
        Ok(Goal::new(name, args))
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(ToString::to_string).collect();
            write!(f, "({})", args.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "RawPlanRule")]
pub struct PlanRule {
    pub head: Goal,
    pub guard: Condition,
    pub body: Vec<Goal>,
}

#[derive(Deserialize)]
struct RawPlanRule {
    head: String,
    #[serde(default)]
    guard: Condition,
    #[serde(default)]
    body: Vec<String>,
}

impl TryFrom<RawPlanRule> for PlanRule {
    type Error = RuntimeError;

    fn try_from(raw: RawPlanRule) -> Result<Self, Self::Error> {
        let rule = PlanRule {
            head: raw.head.parse()?,
            guard: raw.guard,
            body: raw.body.iter().map(|g| g.parse()).collect::<Result<_, _>>()?,
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl PlanRule {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        let mut bound = self.head.variables();
        bound.insert(SELF_VAR.to_owned());
        bound.extend(self.guard.iter().flat_map(Clause::binds));
        for g in &self.body {
            if let Some(var) = g.variables().into_iter().find(|v| !bound.contains(v)) {
                return Err(RuntimeError::UnboundBodyVariable {
                    head: self.head.to_string(),
                    var,
                });
            }
        }
        Ok(())
    }
}

/// Goals that can reach themselves through plan-rule bodies.
pub fn recursive_goals(rules: &[PlanRule]) -> BTreeSet<String> {
    let mut graph: DiGraphMap<&str, ()> = DiGraphMap::new();
    for r in rules {
        graph.add_node(&r.head.name);
        for g in &r.body {
            graph.add_edge(&r.head.name, &g.name, ());
        }
    }
    tarjan_scc(&graph)
        .into_iter()
        .filter(|scc| scc.len() > 1 || graph.contains_edge(scc[0], scc[0]))
        .flatten()
        .map(str::to_owned)
        .collect()
}

/// Agent manifest file.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentManifest {
    pub id: AgentId,
    #[serde(default)]
    pub capabilities: Vec<String>,
    #[serde(default)]
    pub goals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_rules: Option<String>,
    /// Offer condition per action this agent provides.
    #[serde(default)]
    pub conditions: BTreeMap<String, Condition>,
    /// Data-model patterns (may use `?self`) mirrored into the belief base.
    #[serde(default)]
    pub subscribe: Vec<Pattern>,
}

#[derive(Debug, Clone, PartialEq)]
struct PlanFrame {
    goal: Goal,
    body: VecDeque<Goal>,
    bindings: Bindings,
    depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoalStatus {
    Succeeded,
    Failed(String),
    Pending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: AgentId,
    pub capabilities: BTreeSet<String>,
    pub rules: Vec<PlanRule>,
    pub subscriptions: Vec<Pattern>,
    goals: VecDeque<Goal>,
    plans: Vec<PlanFrame>,
    finished: Vec<(Goal, GoalStatus)>,
}

impl AgentState {
    pub fn new(id: AgentId) -> Self {
        AgentState {
            id,
            capabilities: BTreeSet::new(),
            rules: Vec::new(),
            subscriptions: Vec::new(),
            goals: VecDeque::new(),
            plans: Vec::new(),
            finished: Vec::new(),
        }
    }

    pub fn push_goal(&mut self, goal: Goal) {
        self.goals.push_back(goal);
    }

    pub fn goal_base(&self) -> impl Iterator<Item = &Goal> {
        self.goals.iter()
    }

    pub fn plan_depth(&self) -> usize {
        self.plans.len()
    }

    pub fn is_done(&self) -> bool {
        self.goals.is_empty() && self.plans.is_empty()
    }

    /// Root goals with their final status, in completion order.
    pub fn outcomes(&self) -> &[(Goal, GoalStatus)] {
        &self.finished
    }
}

/// What one deliberation step did.
#[derive(Debug, Clone, PartialEq)]
pub enum DeliberationEvent {
    Idle,
    Decomposed { goal: Goal, rule: usize },
    Executed { goal: Goal, succeeded: bool },
    Delegated { goal: Goal, outcome: DelegationOutcome },
    Failed { goal: Goal, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelegationOutcome {
    pub succeeded: bool,
    pub reason: Option<String>,
    pub providers: Vec<AgentId>,
    pub ca: Option<String>,
    pub protocol: Option<String>,
    pub conversation: Option<ConversationId>,
    pub winner: Option<AgentId>,
    pub outputs: Bindings,
}

impl DelegationOutcome {
    fn failed(reason: impl Into<String>, providers: Vec<AgentId>) -> Self {
        DelegationOutcome {
            succeeded: false,
            reason: Some(reason.into()),
            providers,
            ca: None,
            protocol: None,
            conversation: None,
            winner: None,
            outputs: Bindings::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSummary {
    pub id: AgentId,
    pub goals: Vec<(String, GoalStatus)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConversationSummary {
    pub id: ConversationId,
    pub protocol: String,
    pub initiator: AgentId,
    pub participants: Vec<AgentId>,
    pub status: ConversationStatus,
    pub winner: Option<AgentId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// Final value of the logical clock.
    pub ticks: u64,
    /// Scheduler rounds executed.
    pub rounds: u64,
    pub agents: Vec<AgentSummary>,
    pub conversations: Vec<ConversationSummary>,
    pub trace: Trace,
}

impl RunReport {
    pub fn all_goals_succeeded(&self) -> bool {
        self.agents
            .iter()
            .all(|a| a.goals.iter().all(|(_, s)| *s == GoalStatus::Succeeded))
    }
}

/// Everything agents share during a run.
pub struct Runtime {
    pub registry: Registry,
    pub hosts: HostBindings,
    pub offers: OfferConditions,
    pub matchmaker: Matchmaker,
    pub transport: Transport,
    pub objective: Option<Objective>,
    pub timeout_budget: u32,
    pub depth_bound: usize,
    pub board: Blackboard,
    pub agents: Vec<AgentState>,
    pub conversations: Vec<Conversation>,
    rounds: u64,
}

impl Runtime {
    pub fn new(registry: Registry, hosts: HostBindings, data: TripleStore) -> Self {
        Runtime {
            registry,
            hosts,
            offers: OfferConditions::new(),
            matchmaker: Matchmaker::new(),
            transport: Transport::new(),
            objective: None,
            timeout_budget: DEFAULT_TIMEOUT_BUDGET,
            depth_bound: DEFAULT_DEPTH_BOUND,
            board: Blackboard::new(data),
            agents: Vec::new(),
            conversations: Vec::new(),
            rounds: 0,
        }
    }

    pub fn agent(&self, id: &AgentId) -> Option<&AgentState> {
        self.agents.iter().find(|a| &a.id == id)
    }

    fn index_of(&self, id: &AgentId) -> Option<usize> {
        self.agents.iter().position(|a| &a.id == id)
    }

    /// Adds an agent from its manifest and believes its own capabilities.
    pub fn add_agent(&mut self, manifest: &AgentManifest, rules: Vec<PlanRule>) -> Result<(), RuntimeError> {
        if self.agent(&manifest.id).is_some() {
            return Err(RuntimeError::DuplicateAgent(manifest.id.clone()));
        }
        let mut agent = AgentState::new(manifest.id.clone());
        for name in &manifest.capabilities {
            let action = self
                .registry
                .action(name)
                .ok_or_else(|| RuntimeError::UnknownCapability {
                    agent: manifest.id.clone(),
                    action: name.clone(),
                })?;
            agent.capabilities.insert(name.clone());
            let belief = Statement::new(
                manifest.id.term(),
                Term::sym(ACF_HAS_CAPABILITY),
                Term::sym(&action.capability),
            )
            .expect("symbols form a ground statement");
            let p = reify(&belief, &manifest.id, true, self.board.now).expect("ground statement");
            self.board.allocate(&p);
        }
        for g in &manifest.goals {
            agent.push_goal(g.parse()?);
        }
        for (action, cond) in &manifest.conditions {
            self.offers.insert((manifest.id.clone(), action.clone()), cond.clone());
        }
        agent.rules = rules;
        agent.subscriptions = manifest.subscribe.clone();
        self.board.mental.register(&manifest.id);
        self.transport.register(&manifest.id);
        self.agents.push(agent);
        Ok(())
    }

    /// The agent's belief base: its actual world plus subscribed data facts.
    pub fn belief_base(&self, id: &AgentId) -> TripleStore {
        let mut base = TripleStore::new();
        if let Some(w) = self.board.mental.worlds(id) {
            for s in w.actual().statements() {
                base.assert_stmt(s.clone()).expect("ground statement");
            }
        }
        if let Some(agent) = self.agent(id) {
            let me = Bindings::from([(SELF_VAR.to_owned(), id.term())]);
            for pattern in &agent.subscriptions {
                let p = pattern.substitute(&me);
                for sol in self.board.data.solve(std::slice::from_ref(&p), &Bindings::new()) {
                    base.assert_stmt(p.ground(&sol).expect("solution grounds its pattern"))
                        .expect("ground statement");
                }
            }
        }
        base
    }

    /// One pass of the deliberation cycle for agent `idx`.
    pub fn deliberate_step(&mut self, idx: usize) -> DeliberationEvent {
        let id = self.agents[idx].id.clone();
        let (goal, depth) = loop {
            match self.agents[idx].plans.last_mut() {
                Some(frame) => match frame.body.pop_front() {
                    Some(g) => break (g.substitute(&frame.bindings), frame.depth + 1),
                    None => self.complete_frame(idx),
                },
                None => match self.agents[idx].goals.pop_front() {
                    Some(g) => break (g, 0),
                    None => return DeliberationEvent::Idle,
                },
            }
        };

        let agent = &self.agents[idx];
        let rules: Vec<(usize, Bindings)> = agent
            .rules
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.head.unify_head(&goal).map(|b| (i, b)))
            .collect();

        let event = if !rules.is_empty() {
            self.trace_branch(&id, "composed", &goal);
            self.decompose(idx, goal.clone(), depth, rules)
        } else if agent.capabilities.contains(&goal.name) {
            self.trace_branch(&id, "internal", &goal);
            self.run_internal(idx, goal.clone())
        } else if self.registry.action(&goal.name).is_some() {
            self.trace_branch(&id, "external", &goal);
            let outcome = match self.inputs_for(&goal) {
                Ok(inputs) => self.delegate_external(&id, &goal.name, inputs),
                Err(reason) => DelegationOutcome::failed(reason, Vec::new()),
            };
            DeliberationEvent::Delegated {
                goal: goal.clone(),
                outcome,
            }
        } else {
            self.trace_branch(&id, "unknown", &goal);
            DeliberationEvent::Failed {
                reason: format!("no plan rule, capability or action named `{}`", goal.name),
                goal: goal.clone(),
            }
        };

        match &event {
            DeliberationEvent::Executed { succeeded: false, goal } => {
                self.fail_plan(idx, goal, format!("action {goal} failed"));
            }
            DeliberationEvent::Delegated { outcome, goal } if !outcome.succeeded => {
                let why = outcome.reason.clone().unwrap_or_default();
                self.fail_plan(idx, goal, format!("delegation of {goal} failed: {why}"));
            }
            DeliberationEvent::Failed { goal, reason } => self.fail_plan(idx, goal, reason.clone()),
            DeliberationEvent::Decomposed { .. } => {}
            _ => self.settle(idx, &goal),
        }
        event
    }

    fn trace_branch(&mut self, id: &AgentId, branch: &'static str, goal: &Goal) {
        self.board.emit(TraceEvent::Deliberate {
            agent: id.clone(),
            branch,
            goal: goal.to_string(),
        });
    }

    fn decompose(
        &mut self,
        idx: usize,
        goal: Goal,
        depth: usize,
        candidates: Vec<(usize, Bindings)>,
    ) -> DeliberationEvent {
        if depth >= self.depth_bound {
            return DeliberationEvent::Failed {
                reason: format!("decomposition of {goal} exceeds depth {}", self.depth_bound),
                goal,
            };
        }
        let id = self.agents[idx].id.clone();
        let beliefs = self.belief_base(&id);
        let empty = crate::mentality::MentalModel::new();
        for (i, mut bindings) in candidates {
            bindings.insert(SELF_VAR.to_owned(), id.term());
            let rule = &self.agents[idx].rules[i];
            let solutions = match eval_condition(&rule.guard, &bindings, &beliefs, &empty, &RoleMap::new()) {
                Ok(s) => s,
                Err(e) => {
                    return DeliberationEvent::Failed {
                        reason: format!("guard of rule {i}: {e}"),
                        goal,
                    }
                }
            };
            if let Some(solution) = solutions.into_iter().next() {
                let frame = PlanFrame {
                    goal: goal.clone(),
                    body: rule.body.iter().cloned().collect(),
                    bindings: solution,
                    depth,
                };
                self.agents[idx].plans.push(frame);
                self.pop_finished_frames(idx);
                return DeliberationEvent::Decomposed { goal, rule: i };
            }
        }
        DeliberationEvent::Failed {
            reason: format!("no plan rule for {goal} has a satisfied guard"),
            goal,
        }
    }

    fn inputs_for(&self, goal: &Goal) -> Result<Bindings, String> {
        let action = self
            .registry
            .action(&goal.name)
            .ok_or_else(|| format!("unknown action `{}`", goal.name))?;
        if goal.args.len() > action.inputs.len() {
            return Err(format!(
                "{goal} passes {} arguments, {} takes {}",
                goal.args.len(),
                action.name,
                action.inputs.len()
            ));
        }
        Ok(action
            .inputs
            .iter()
            .zip(&goal.args)
            .map(|(p, a)| (p.name.clone(), a.clone()))
            .collect())
    }

    fn run_internal(&mut self, idx: usize, goal: Goal) -> DeliberationEvent {
        let id = self.agents[idx].id.clone();
        let action = self
            .registry
            .action(&goal.name)
            .expect("capabilities are loaded actions");
        let result = self
            .inputs_for(&goal)
            .and_then(|inputs| execute(action, &inputs, &id, &self.hosts, &mut self.board).map_err(|e| e.to_string()));
        match result {
            Ok(record) => DeliberationEvent::Executed {
                succeeded: record.succeeded(),
                goal,
            },
            Err(reason) => DeliberationEvent::Failed { goal, reason },
        }
    }

    /// Finds providers for an action this agent cannot perform and runs the
    /// conversation that gets one of them to perform it.
    pub fn delegate_external(&mut self, requester: &AgentId, action_name: &str, inputs: Bindings) -> DelegationOutcome {
        let Some(action) = self.registry.action(action_name).cloned() else {
            return DelegationOutcome::failed(format!("unknown action `{action_name}`"), Vec::new());
        };
        let outputs: Vec<String> = action.outputs.iter().map(|p| p.data_type.clone()).collect();
        let providers: Vec<AgentId> = self
            .matchmaker
            .lookup(&action.capability, &outputs, &self.board.data)
            .into_iter()
            .filter(|a| a != requester)
            .collect();
        self.board.emit(TraceEvent::Lookup {
            agent: requester.clone(),
            capability: action.capability.clone(),
            agents: providers.clone(),
        });
        if providers.is_empty() {
            return DelegationOutcome::failed(format!("no provider for {}", action.capability), providers);
        }

        let effects = match evaluate_external_effects(&action, &inputs, requester, &mut self.board) {
            Ok(e) => e,
            Err(e) => return DelegationOutcome::failed(e.to_string(), providers),
        };
        let Some(ca) = select_ca(&action, effects.satisfiable, providers.len(), &self.registry)
            .into_iter()
            .next()
        else {
            return DelegationOutcome::failed("no communicative act fits the delegation", providers);
        };
        let protocol = match select_protocol(&ca, providers.len(), &self.registry) {
            Ok(p) => p,
            Err(e) => return DelegationOutcome::failed(e.to_string(), providers),
        };
        self.board.emit(TraceEvent::Select {
            agent: requester.clone(),
            action: action.name.clone(),
            ca: ca.clone(),
            protocol: protocol.clone(),
        });

        let id = ConversationId(format!("c{}", self.conversations.len() + 1));
        let aref = ActionRef {
            name: action.name.clone(),
            inputs,
        };
        let mut conv = match start_conversation(
            &self.registry,
            &protocol,
            id.clone(),
            requester,
            &providers,
            aref,
            &mut self.board,
        ) {
            Ok(c) => c,
            Err(e) => return DelegationOutcome::failed(e.to_string(), providers),
        };
        conv.timeout_budget = self.timeout_budget;

        let mut ctx = StepContext {
            ca: CaContext {
                registry: &self.registry,
                hosts: &self.hosts,
                offers: &self.offers,
            },
            transport: &mut self.transport,
            objective: self.objective.as_ref(),
        };
        let mut failure = None;
        while conv.is_running() {
            if let Err(e) = step(&mut conv, &mut ctx, &mut self.board) {
                failure = Some(e.to_string());
                break;
            }
        }

        let succeeded = conv.status == ConversationStatus::Succeeded;
        let outcome = DelegationOutcome {
            succeeded,
            reason: match (succeeded, failure) {
                (true, _) => None,
                (false, Some(f)) => Some(f),
                (false, None) => Some(format!("conversation {id} failed")),
            },
            providers,
            ca: Some(ca),
            protocol: Some(protocol),
            conversation: Some(id),
            winner: conv.winner.clone(),
            outputs: conv.execution.as_ref().map(|r| r.outputs.clone()).unwrap_or_default(),
        };
        self.conversations.push(conv);
        outcome
    }

    fn complete_frame(&mut self, idx: usize) {
        let agent = &mut self.agents[idx];
        let frame = agent.plans.pop().expect("caller saw a frame");
        if agent.plans.is_empty() {
            self.settle_root(idx, frame.goal, GoalStatus::Succeeded);
        }
    }

    fn pop_finished_frames(&mut self, idx: usize) {
        while self.agents[idx].plans.last().is_some_and(|f| f.body.is_empty()) {
            self.complete_frame(idx);
        }
    }

    /// A goal finished successfully: close any plan bodies it completed.
    fn settle(&mut self, idx: usize, goal: &Goal) {
        if self.agents[idx].plans.is_empty() {
            self.settle_root(idx, goal.clone(), GoalStatus::Succeeded);
        } else {
            self.pop_finished_frames(idx);
        }
    }

    fn fail_plan(&mut self, idx: usize, goal: &Goal, reason: String) {
        let agent = &mut self.agents[idx];
        let root = agent
            .plans
            .first()
            .map(|f| f.goal.clone())
            .unwrap_or_else(|| goal.clone());
        agent.plans.clear();
        self.settle_root(idx, root, GoalStatus::Failed(reason));
    }

    fn settle_root(&mut self, idx: usize, goal: Goal, status: GoalStatus) {
        let agent = &mut self.agents[idx];
        let (label, reason) = match &status {
            GoalStatus::Succeeded => ("succeeded", None),
            GoalStatus::Failed(r) => ("failed", Some(r.clone())),
            GoalStatus::Pending => ("pending", None),
        };
        self.board.emit(TraceEvent::Goal {
            agent: agent.id.clone(),
            goal: goal.to_string(),
            status: label,
            reason,
        });
        agent.finished.push((goal, status));
    }

    /// Round-robin scheduler: every round advances the clock and gives each
    /// agent, in declared order, one deliberation step.
    pub fn run(&mut self, max_ticks: u64) -> Result<RunReport, RuntimeError> {
        if max_ticks == 0 {
            return Err(RuntimeError::ZeroTickBudget);
        }
        while self.board.now < Tick(max_ticks) && !self.agents.iter().all(AgentState::is_done) {
            self.board.advance();
            self.rounds += 1;
            for idx in 0..self.agents.len() {
                self.deliberate_step(idx);
            }
        }
        Ok(self.report())
    }

    pub fn report(&self) -> RunReport {
        let agents = self
            .agents
            .iter()
            .map(|a| {
                let mut goals: Vec<(String, GoalStatus)> =
                    a.finished.iter().map(|(g, s)| (g.to_string(), s.clone())).collect();
                goals.extend(a.plans.first().map(|f| (f.goal.to_string(), GoalStatus::Pending)));
                goals.extend(a.goals.iter().map(|g| (g.to_string(), GoalStatus::Pending)));
                AgentSummary {
                    id: a.id.clone(),
                    goals,
                }
            })
            .collect();
        let conversations = self
            .conversations
            .iter()
            .map(|c| ConversationSummary {
                id: c.id.clone(),
                protocol: c.protocol.clone(),
                initiator: c.initiator.clone(),
                participants: c.participants().cloned().collect(),
                status: c.status,
                winner: c.winner.clone(),
            })
            .collect();
        RunReport {
            ticks: self.board.now.0,
            rounds: self.rounds,
            agents,
            conversations,
            trace: self.board.trace.clone(),
        }
    }

    /// Statements the agent's actual world holds, as plain statements.
    pub fn beliefs_of(&self, id: &AgentId) -> Vec<Statement> {
        self.board
            .mental
            .worlds(id)
            .map(|w| {
                w.actual()
                    .statements()
                    .map(|s| deify(&reify(s, id, true, Tick(0)).expect("ground statement")))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn agent_index(&self, id: &AgentId) -> Option<usize> {
        self.index_of(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn goal_syntax() {
        let g: Goal = "ex:video-abstract(ex:m1)".parse().unwrap();
        assert_eq!(g, Goal::new("ex:video-abstract", vec![Term::sym("ex:m1")]));
        let g: Goal = "ex:recommendation(?genre, \"Night at the museum\", 3)".parse().unwrap();
        assert_eq!(
            g.args,
            vec![Term::var("genre"), Term::lit("Night at the museum"), Term::num(3.0)]
        );
        assert_eq!("ex:watch".parse::<Goal>().unwrap().args, vec![]);
        assert!("bad goal(".parse::<Goal>().is_err());
        assert_eq!(g.to_string().parse::<Goal>().unwrap().name, g.name);
    }

    #[test]
    fn head_unification() {
        let head: Goal = "watch(?m, ex:tonight)".parse().unwrap();
        let b = head.unify_head(&"watch(ex:m1, ex:tonight)".parse().unwrap()).unwrap();
        assert_eq!(b["m"], Term::sym("ex:m1"));
        assert!(head.unify_head(&"watch(ex:m1, ex:tomorrow)".parse().unwrap()).is_none());
        assert!(head.unify_head(&"watch(ex:m1)".parse().unwrap()).is_none());
    }

    #[test]
    fn body_variables_must_be_bound() {
        let r: Result<PlanRule, _> = serde_json::from_str(r#"{"head":"g(?a)","guard":[],"body":["h(?b)"]}"#);
        assert!(r.unwrap_err().to_string().contains("?b"));
        let ok: PlanRule = serde_json::from_str(
            r#"{"head":"g(?a)","guard":[{"pattern":["?b","p","?a"]}],"body":["h(?b)","i(?self)"]}"#,
        )
        .unwrap();
        assert_eq!(ok.body.len(), 2);
    }

    #[test]
    fn recursion_detected() {
        let rules: Vec<PlanRule> = serde_json::from_str(
            r#"[{"head":"a","body":["b"]},{"head":"b","body":["a"]},{"head":"c","body":["c"]},{"head":"d","body":["e"]}]"#,
        )
        .unwrap();
        assert_eq!(
            recursive_goals(&rules),
            BTreeSet::from(["a".into(), "b".into(), "c".into()])
        );
    }
}
