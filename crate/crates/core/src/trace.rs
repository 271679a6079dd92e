//! Run trace: one JSON object per line, keys sorted, ticks from the logical clock.

use serde_json::{json, Map, Value};

use crate::ids::{AgentId, ConversationId, Tick};
use crate::mentality::WorldTag;
use crate::store::Statement;
use crate::term::{bindings_to_json, Bindings};

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Allocate {
        believer: AgentId,
        belief: bool,
        triple: Statement,
        world: WorldTag,
    },
    Ca {
        name: String,
        sender: AgentId,
        receiver: AgentId,
        outcome: &'static str,
    },
    Transition {
        conv: ConversationId,
        from: String,
        to: String,
        ca: String,
        sender: AgentId,
        receiver: AgentId,
    },
    Msg {
        performative: String,
        sender: AgentId,
        receiver: AgentId,
        conv: ConversationId,
        content: Value,
        reply_with: String,
        in_reply_to: Option<String>,
        dropped: bool,
    },
    Action {
        name: String,
        agent: AgentId,
        status: &'static str,
        outputs: Bindings,
    },
    Check {
        action: String,
        phase: &'static str,
        ok: bool,
    },
    Lookup {
        agent: AgentId,
        capability: String,
        agents: Vec<AgentId>,
    },
    ExternalEffects {
        agent: AgentId,
        action: String,
        satisfiable: bool,
        grounded: usize,
    },
    Select {
        agent: AgentId,
        action: String,
        ca: String,
        protocol: String,
    },
    Evaluate {
        conv: ConversationId,
        proposals: Vec<(AgentId, Bindings)>,
        winner: Option<AgentId>,
    },
    Conversation {
        conv: ConversationId,
        protocol: String,
        status: &'static str,
    },
    Deliberate {
        agent: AgentId,
        branch: &'static str,
        goal: String,
    },
    Goal {
        agent: AgentId,
        goal: String,
        status: &'static str,
        reason: Option<String>,
    },
}

impl TraceEvent {
    pub fn to_json(&self, tick: Tick) -> Value {
        let mut v = match self {
            TraceEvent::Allocate {
                believer,
                belief,
                triple,
                world,
            } => json!({
                "believer": believer, "belief": belief,
                "triple": triple.to_json(), "world": world.as_str(),
            }),
            TraceEvent::Ca {
                name,
                sender,
                receiver,
                outcome,
            } => json!({
                "event": "ca", "name": name, "sender": sender,
                "receiver": receiver, "outcome": outcome,
            }),
            TraceEvent::Transition {
                conv,
                from,
                to,
                ca,
                sender,
                receiver,
            } => json!({
                "event": "transition", "conv": conv, "from": from, "to": to,
                "ca": ca, "sender": sender, "receiver": receiver,
            }),
            TraceEvent::Msg {
                performative,
                sender,
                receiver,
                conv,
                content,
                reply_with,
                in_reply_to,
                dropped,
            } => {
                let mut m = json!({
                    "event": "msg", "performative": performative, "sender": sender,
                    "receiver": receiver, "conv": conv, "content": content,
                    "reply_with": reply_with,
                });
                if let Some(r) = in_reply_to {
                    m["in_reply_to"] = json!(r);
                }
                if *dropped {
                    m["dropped"] = json!(true);
                }
                m
            }
            TraceEvent::Action {
                name,
                agent,
                status,
                outputs,
            } => json!({
                "event": "action", "name": name, "agent": agent,
                "status": status, "outputs": bindings_to_json(outputs),
            }),
            TraceEvent::Check { action, phase, ok } => json!({
                "event": "check", "action": action, "phase": phase, "ok": ok,
            }),
            TraceEvent::Lookup {
                agent,
                capability,
                agents,
            } => json!({
                "event": "lookup", "agent": agent, "capability": capability, "agents": agents,
            }),
            TraceEvent::ExternalEffects {
                agent,
                action,
                satisfiable,
                grounded,
            } => json!({
                "event": "external-effects", "agent": agent, "action": action,
                "satisfiable": satisfiable, "grounded": grounded,
            }),
            TraceEvent::Select {
                agent,
                action,
                ca,
                protocol,
            } => json!({
                "event": "select", "agent": agent, "action": action, "ca": ca, "protocol": protocol,
            }),
            TraceEvent::Evaluate {
                conv,
                proposals,
                winner,
            } => {
                let props: Map<String, Value> = proposals
                    .iter()
                    .map(|(a, b)| (a.0.clone(), bindings_to_json(b)))
                    .collect();
                json!({ "event": "evaluate", "conv": conv, "proposals": props, "winner": winner })
            }
            TraceEvent::Conversation { conv, protocol, status } => json!({
                "event": "conversation", "conv": conv, "protocol": protocol, "status": status,
            }),
            TraceEvent::Deliberate { agent, branch, goal } => json!({
                "event": "deliberate", "agent": agent, "branch": branch, "goal": goal,
            }),
            TraceEvent::Goal {
                agent,
                goal,
                status,
                reason,
            } => {
                let mut m = json!({ "event": "goal", "agent": agent, "goal": goal, "status": status });
                if let Some(r) = reason {
                    m["reason"] = json!(r);
                }
                m
            }
        };
        v["tick"] = json!(tick.0);
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLine {
    pub tick: Tick,
    pub event: TraceEvent,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    lines: Vec<TraceLine>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tick: Tick, event: TraceEvent) {
        self.lines.push(TraceLine { tick, event });
    }

    pub fn lines(&self) -> &[TraceLine] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Serializes the trace as JSON lines. `serde_json` maps are ordered, so
    /// keys come out sorted and the bytes are stable across platforms.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&line.event.to_json(line.tick).to_string());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Term;

    #[test]
    fn allocate_line_shape() {
        let mut t = Trace::new();
        t.push(
            Tick(4),
            TraceEvent::Allocate {
                believer: "S".into(),
                belief: true,
                triple: Statement::new(Term::sym("a"), Term::sym("p"), Term::quantity(2.5, "Mbps")).unwrap(),
                world: WorldTag::Actual,
            },
        );
        assert_eq!(
            t.to_jsonl(),
            "{\"belief\":true,\"believer\":\"S\",\"tick\":4,\"triple\":[\"a\",\"p\",{\"unit\":\"Mbps\",\"value\":2.5}],\"world\":\"actual\"}\n"
        );
    }

    #[test]
    fn ca_line_shape() {
        let ev = TraceEvent::Ca {
            name: "request".into(),
            sender: "S".into(),
            receiver: "T".into(),
            outcome: "performed",
        };
        assert_eq!(
            ev.to_json(Tick(1)).to_string(),
            r#"{"event":"ca","name":"request","outcome":"performed","receiver":"T","sender":"S","tick":1}"#
        );
    }
}
