use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{ActionDescription, CommunicativeActDescription, Description, ProtocolDescription};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Error)]
pub enum LinkError {
    #[error("duplicate description name `{0}`")]
    DuplicateName(String),
    #[error("`{referrer}` references `{target}`, which is not loaded")]
    DanglingReference { target: String, referrer: String },
}

/// Every problem [`link`] found, sorted so the set is independent of input order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct LinkErrors(pub Vec<LinkError>);

impl fmt::Display for LinkErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&msgs.join("; "))
    }
}

/// Linked descriptions keyed by name. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    protocols: BTreeMap<String, ProtocolDescription>,
    cas: BTreeMap<String, CommunicativeActDescription>,
    actions: BTreeMap<String, ActionDescription>,
}

impl Registry {
    pub fn protocol(&self, name: &str) -> Option<&ProtocolDescription> {
        self.protocols.get(name)
    }

    pub fn ca(&self, name: &str) -> Option<&CommunicativeActDescription> {
        self.cas.get(name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionDescription> {
        self.actions.get(name)
    }

    pub fn protocols(&self) -> impl Iterator<Item = &ProtocolDescription> {
        self.protocols.values()
    }

    pub fn cas(&self) -> impl Iterator<Item = &CommunicativeActDescription> {
        self.cas.values()
    }

    pub fn actions(&self) -> impl Iterator<Item = &ActionDescription> {
        self.actions.values()
    }

    pub fn len(&self) -> usize {
        self.protocols.len() + self.cas.len() + self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Resolves cross-references and builds the registry.
///
/// Names share one namespace across description kinds.
pub fn link(descriptions: impl IntoIterator<Item = Description>) -> Result<Registry, LinkErrors> {
    let mut reg = Registry::default();
    let mut errors = Vec::new();
    let mut seen = BTreeMap::new();
    for d in descriptions {
        let name = d.name().to_owned();
        *seen.entry(name.clone()).or_insert(0usize) += 1;
        if seen[&name] > 1 {
            continue;
        }
        match d {
            Description::Protocol(p) => {
                reg.protocols.insert(name, p);
            }
            Description::CommunicativeAct(c) => {
                reg.cas.insert(name, c);
            }
            Description::Action(a) => {
                reg.actions.insert(name, a);
            }
        }
    }
    errors.extend(
        seen.into_iter()
            .filter(|(_, n)| *n > 1)
            .map(|(name, _)| LinkError::DuplicateName(name)),
    );
    for p in reg.protocols.values() {
        for ca in p.referenced_cas() {
            if !reg.cas.contains_key(ca) {
                errors.push(LinkError::DanglingReference {
                    target: ca.to_owned(),
                    referrer: p.name.clone(),
                });
            }
        }
    }
    if errors.is_empty() {
        Ok(reg)
    } else {
        errors.sort();
        errors.dedup();
        Err(LinkErrors(errors))
    }
}
