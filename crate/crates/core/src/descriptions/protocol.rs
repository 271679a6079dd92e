use std::collections::{BTreeSet, HashMap};

use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::visit::{Bfs, Reversed};
use serde::{Deserialize, Serialize};

use super::condition::Condition;
use super::DescriptionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Start,
    Transit,
    Accept,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub id: String,
    pub kind: StateKind,
    /// Accept state that ends the lane unsuccessfully.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub failure: bool,
}

/// Outcome of the previous hop (or of proposal evaluation) that enables a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionLabel {
    Performed,
    Failed,
    Selected,
    Rejected,
    Timeout,
}

impl TransitionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TransitionLabel::Performed => "performed",
            TransitionLabel::Failed => "failed",
            TransitionLabel::Selected => "selected",
            TransitionLabel::Rejected => "rejected",
            TransitionLabel::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub execute: String,
    pub sender: String,
    pub receiver: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on: Option<TransitionLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolDescription {
    pub name: String,
    #[serde(rename = "hasInitiator")]
    pub initiator: String,
    #[serde(rename = "hasParticipant")]
    pub participants: Vec<String>,
    pub states: Vec<State>,
    #[serde(rename = "constructedBy")]
    pub transitions: Vec<Transition>,
}

impl ProtocolDescription {
    pub fn state(&self, id: &str) -> Option<&State> {
        self.states.iter().find(|s| s.id == id)
    }

    pub fn start_state(&self) -> &State {
        self.states
            .iter()
            .find(|s| s.kind == StateKind::Start)
            .expect("validated protocol has a start state")
    }

    pub fn is_accept(&self, id: &str) -> bool {
        self.state(id).is_some_and(|s| s.kind == StateKind::Accept)
    }

    pub fn is_failure(&self, id: &str) -> bool {
        self.state(id).is_some_and(|s| s.failure)
    }

    pub fn outgoing(&self, id: &str) -> impl Iterator<Item = &Transition> + '_ {
        let id = id.to_owned();
        self.transitions.iter().filter(move |t| t.from == id)
    }

    /// A state whose exits wait for proposal evaluation across all lanes.
    pub fn is_barrier(&self, id: &str) -> bool {
        self.outgoing(id)
            .any(|t| matches!(t.on, Some(TransitionLabel::Selected | TransitionLabel::Rejected)))
    }

    pub fn has_barrier(&self) -> bool {
        self.states.iter().any(|s| self.is_barrier(&s.id))
    }

    /// CAs fired from the start state.
    pub fn opening_cas(&self) -> impl Iterator<Item = &str> {
        let start = self.start_state().id.as_str();
        self.transitions
            .iter()
            .filter(move |t| t.from == start)
            .map(|t| t.execute.as_str())
    }

    pub fn referenced_cas(&self) -> BTreeSet<&str> {
        self.transitions.iter().map(|t| t.execute.as_str()).collect()
    }

    pub fn roles(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.initiator.as_str()).chain(self.participants.iter().map(String::as_str))
    }

    pub fn validate(&self) -> Result<(), DescriptionError> {
        let err = |reason: String| DescriptionError::Schema {
            name: self.name.clone(),
            reason,
        };

        let mut graph = DiGraph::<&str, ()>::new();
        let mut nodes: HashMap<&str, NodeIndex> = HashMap::new();
        for s in &self.states {
            if nodes.insert(&s.id, graph.add_node(&s.id)).is_some() {
                return Err(err(format!("state `{}` declared twice", s.id)));
            }
            if s.failure && s.kind != StateKind::Accept {
                return Err(err(format!(
                    "state `{}` is flagged failure but is not an accept state",
                    s.id
                )));
            }
        }

        let starts: Vec<&State> = self.states.iter().filter(|s| s.kind == StateKind::Start).collect();
        if starts.len() != 1 {
            return Err(err(format!("expected exactly one start state, found {}", starts.len())));
        }
        if !self.states.iter().any(|s| s.kind == StateKind::Accept) {
            return Err(err("no accept state".into()));
        }
        if self.participants.is_empty() {
            return Err(err("no participant role".into()));
        }

        let roles: BTreeSet<&str> = self.roles().collect();
        for t in &self.transitions {
            let (Some(&from), Some(&to)) = (nodes.get(t.from.as_str()), nodes.get(t.to.as_str())) else {
                return Err(err(format!("transition {} -> {} names an unknown state", t.from, t.to)));
            };
            for role in [&t.sender, &t.receiver] {
                if !roles.contains(role.as_str()) {
                    return Err(err(format!(
                        "transition {} -> {} names unknown role `{role}`",
                        t.from, t.to
                    )));
                }
            }
            graph.add_edge(from, to, ());
        }

        for s in &self.states {
            let exits = self.outgoing(&s.id).count();
            match s.kind {
                StateKind::Accept if exits > 0 => {
                    return Err(err(format!("accept state `{}` has outgoing transitions", s.id)));
                }
                StateKind::Start | StateKind::Transit if exits == 0 => {
                    return Err(err(format!("state `{}` has no outgoing transition", s.id)));
                }
                _ => {}
            }
        }

        let start = nodes[starts[0].id.as_str()];
        let mut reached = BTreeSet::new();
        let mut bfs = Bfs::new(&graph, start);
        while let Some(n) = bfs.next(&graph) {
            reached.insert(n);
        }
        if let Some(s) = self.states.iter().find(|s| !reached.contains(&nodes[s.id.as_str()])) {
            return Err(err(format!("state `{}` is unreachable from start", s.id)));
        }

        let reversed = Reversed(&graph);
        let mut reaches_accept = BTreeSet::new();
        for s in self.states.iter().filter(|s| s.kind == StateKind::Accept) {
            let mut bfs = Bfs::new(reversed, nodes[s.id.as_str()]);
            while let Some(n) = bfs.next(reversed) {
                reaches_accept.insert(n);
            }
        }
        if let Some(s) = self
            .states
            .iter()
            .find(|s| !reaches_accept.contains(&nodes[s.id.as_str()]))
        {
            return Err(err(format!("no accept state reachable from `{}`", s.id)));
        }
        Ok(())
    }
}
