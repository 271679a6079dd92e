//! Capability registry: providers advertise actions under a capability
//! class, requesters look up who can execute an action.
//!
//! Matching is class subsumption. An entry matches a requested class when
//! its capability is that class or a subclass of it; exact matches are
//! listed before subclass matches.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::descriptions::ActionDescription;
use crate::ids::AgentId;
use crate::store::TripleStore;
use crate::term::Term;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchmakerError {
    #[error("capability `{0}` is not a class known to the data model")]
    UnknownCapabilityClass(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub agent: AgentId,
    pub capability: String,
    pub action: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

impl RegistryEntry {
    /// Entry advertising `action` for `agent` with the action's declared signature.
    pub fn for_action(agent: &AgentId, action: &ActionDescription) -> Self {
        RegistryEntry {
            agent: agent.clone(),
            capability: action.capability.clone(),
            action: action.name.clone(),
            inputs: action.inputs.iter().map(|p| p.data_type.clone()).collect(),
            outputs: action.outputs.iter().map(|p| p.data_type.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Matchmaker {
    entries: Vec<RegistryEntry>,
}

impl Matchmaker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    /// Adds an entry, replacing an earlier one for the same (agent, action).
    pub fn register(&mut self, entry: RegistryEntry, data: &TripleStore) -> Result<(), MatchmakerError> {
        if !data.is_class(&Term::sym(&entry.capability)) {
            return Err(MatchmakerError::UnknownCapabilityClass(entry.capability));
        }
        match self
            .entries
            .iter_mut()
            .find(|e| e.agent == entry.agent && e.action == entry.action)
        {
            Some(existing) => *existing = entry,
            None => self.entries.push(entry),
        }
        Ok(())
    }

    /// Agents able to provide `capability` and at least `required_outputs`.
    pub fn lookup(&self, capability: &str, required_outputs: &[String], data: &TripleStore) -> Vec<AgentId> {
        let wanted = Term::sym(capability);
        let mut hits: Vec<(bool, &AgentId)> = self
            .entries
            .iter()
            .filter(|e| data.is_subclass(&Term::sym(&e.capability), &wanted))
            .filter(|e| {
                required_outputs
                    .iter()
                    .all(|r| e.outputs.iter().any(|o| data.is_subclass(&Term::sym(o), &Term::sym(r))))
            })
            .map(|e| (e.capability != capability, &e.agent))
            .collect();
        hits.sort();
        let mut out: Vec<AgentId> = Vec::new();
        for (_, agent) in hits {
            if !out.contains(agent) {
                out.push(agent.clone());
            }
        }
        out
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum Request {
    Lookup {
        capability: String,
        #[serde(default)]
        outputs: Vec<String>,
    },
    Register(RegistryEntry),
}

/// Registry state shared by the wire service.
#[derive(Debug, Default)]
pub struct SharedRegistry {
    inner: RwLock<(Matchmaker, TripleStore)>,
}

impl SharedRegistry {
    pub fn new(matchmaker: Matchmaker, data: TripleStore) -> Self {
        SharedRegistry {
            inner: RwLock::new((matchmaker, data)),
        }
    }

    /// Answers one request line with one response line (no trailing newline).
    pub fn handle_line(&self, line: &str) -> String {
        let response = match serde_json::from_str::<Request>(line) {
            Err(e) => json!({ "error": format!("bad request: {e}") }),
            Ok(Request::Lookup { capability, outputs }) => {
                let guard = self.inner.read().expect("registry lock poisoned");
                let agents = guard.0.lookup(&capability, &outputs, &guard.1);
                json!({ "agents": agents })
            }
            Ok(Request::Register(entry)) => {
                let mut guard = self.inner.write().expect("registry lock poisoned");
                let (mm, data) = &mut *guard;
                match mm.register(entry, data) {
                    Ok(()) => json!({ "ok": true }),
                    Err(e) => json!({ "error": e.to_string() }),
                }
            }
        };
        Value::to_string(&response)
    }

    /// Serves one client until it closes the connection.
    pub fn serve_connection(&self, stream: TcpStream) -> io::Result<()> {
        let mut writer = stream.try_clone()?;
        for line in BufReader::new(stream).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            writeln!(writer, "{}", self.handle_line(&line))?;
        }
        Ok(())
    }

    /// Accepts clients one after another, forever.
    pub fn serve(&self, listener: &TcpListener) -> io::Result<()> {
        for stream in listener.incoming() {
            if let Err(e) = self.serve_connection(stream?) {
                if e.kind() != io::ErrorKind::ConnectionReset {
                    return Err(e);
                }
            }
        }
        Ok(())
    }
}
