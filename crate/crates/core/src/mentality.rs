//! Propositions and the shared mental model.
//!
//! Every believer owns two worlds: the *actual* world holds propositions it
//! believes true, the *imaginary* world those it believes false. A
//! proposition lives in at most one of the two; the allocation with the
//! newest valid time decides which (equal times: the later call wins).

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::ids::{AgentId, Tick};
use crate::store::{Pattern, Statement, StoreError, TripleSource, TripleStore};
use crate::term::{Bindings, Term};

/// A statement lifted into the mental layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Proposition {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Proposition {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Self, StoreError> {
        Statement::new(subject, predicate, object).map(Proposition::from)
    }

    pub fn statement(&self) -> Statement {
        Statement {
            subject: self.subject.clone(),
            predicate: self.predicate.clone(),
            object: self.object.clone(),
        }
    }
}

impl From<Statement> for Proposition {
    fn from(s: Statement) -> Self {
        Proposition {
            subject: s.subject,
            predicate: s.predicate,
            object: s.object,
        }
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.subject, self.predicate, self.object)
    }
}

/// A proposition with the time it occurred to an agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExtendedProposition {
    pub base: Proposition,
    pub valid_time: Tick,
}

/// An extended proposition held (or rejected) by a believer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EmbeddedProposition {
    pub base: ExtendedProposition,
    pub believer: AgentId,
    pub belief: bool,
}

impl EmbeddedProposition {
    pub fn proposition(&self) -> &Proposition {
        &self.base.base
    }

    pub fn valid_time(&self) -> Tick {
        self.base.valid_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WorldTag {
    Actual,
    Imaginary,
}

impl WorldTag {
    pub fn as_str(self) -> &'static str {
        match self {
            WorldTag::Actual => "actual",
            WorldTag::Imaginary => "imaginary",
        }
    }
}

/// Wraps a ground statement as a belief of `believer` occurring at `now`.
pub fn reify(stmt: &Statement, believer: &AgentId, belief: bool, now: Tick) -> Result<EmbeddedProposition, StoreError> {
    stmt.validate()?;
    Ok(EmbeddedProposition {
        base: ExtendedProposition {
            base: Proposition::from(stmt.clone()),
            valid_time: now,
        },
        believer: believer.clone(),
        belief,
    })
}

/// Inverse of [`reify`].
pub fn deify(p: &EmbeddedProposition) -> Statement {
    p.proposition().statement()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Worlds {
    actual: TripleStore,
    imaginary: TripleStore,
    stamps: HashMap<Statement, Tick>,
}

impl Worlds {
    pub fn actual(&self) -> &TripleStore {
        &self.actual
    }

    pub fn imaginary(&self) -> &TripleStore {
        &self.imaginary
    }

    pub fn world_of(&self, stmt: &Statement) -> Option<WorldTag> {
        if self.actual.contains(stmt) {
            Some(WorldTag::Actual)
        } else if self.imaginary.contains(stmt) {
            Some(WorldTag::Imaginary)
        } else {
            None
        }
    }

    pub fn valid_time(&self, stmt: &Statement) -> Option<Tick> {
        self.stamps.get(stmt).copied()
    }
}

/// Shared mental model keyed by believer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MentalModel {
    worlds: BTreeMap<AgentId, Worlds>,
}

impl MentalModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, believer: &AgentId) {
        self.worlds.entry(believer.clone()).or_default();
    }

    pub fn believers(&self) -> impl Iterator<Item = &AgentId> {
        self.worlds.keys()
    }

    pub fn worlds(&self, believer: &AgentId) -> Option<&Worlds> {
        self.worlds.get(believer)
    }

    /// Places `p` in the believer's actual or imaginary world and returns the
    /// world that holds it afterwards.
    ///
    /// An allocation older than the one already recorded for the opposite
    /// world leaves the model unchanged.
    pub fn allocate(&mut self, p: &EmbeddedProposition) -> WorldTag {
        let worlds = self.worlds.entry(p.believer.clone()).or_default();
        let stmt = deify(p);
        let time = p.valid_time();
        let target = if p.belief {
            WorldTag::Actual
        } else {
            WorldTag::Imaginary
        };

        match worlds.world_of(&stmt) {
            Some(current) if current == target => {
                let stamp = worlds.stamps.entry(stmt).or_insert(time);
                *stamp = (*stamp).max(time);
                target
            }
            Some(current) => {
                if worlds.stamps.get(&stmt).is_some_and(|t| *t > time) {
                    return current;
                }
                let (from, to) = match target {
                    WorldTag::Actual => (&mut worlds.imaginary, &mut worlds.actual),
                    WorldTag::Imaginary => (&mut worlds.actual, &mut worlds.imaginary),
                };
                // Statements were validated when they entered the world.
                from.retract_stmt(&stmt).expect("ground statement");
                to.assert_stmt(stmt.clone()).expect("ground statement");
                worlds.stamps.insert(stmt, time);
                target
            }
            None => {
                let to = match target {
                    WorldTag::Actual => &mut worlds.actual,
                    WorldTag::Imaginary => &mut worlds.imaginary,
                };
                to.assert_stmt(stmt.clone()).expect("ground statement");
                worlds.stamps.insert(stmt, time);
                target
            }
        }
    }

    /// Conjunctive match against the believer's actual world only.
    pub fn holds(&self, believer: &AgentId, patterns: &[Pattern]) -> Vec<Bindings> {
        self.holds_with(believer, patterns, &Bindings::new())
    }

    pub fn holds_with(&self, believer: &AgentId, patterns: &[Pattern], initial: &Bindings) -> Vec<Bindings> {
        match self.worlds.get(believer) {
            Some(w) => w.actual.solve(patterns, initial),
            None => Vec::new(),
        }
    }

    /// Statements of the believer's actual world, in allocation order.
    pub fn actual_statements(&self, believer: &AgentId) -> Vec<Statement> {
        self.worlds
            .get(believer)
            .map(|w| w.actual.statements().cloned().collect())
            .unwrap_or_default()
    }
}
