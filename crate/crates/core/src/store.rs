//! The shared data model: an in-memory triple store with per-position indexes.
//!
//! Statements keep their insertion order. Query results are ordered by the
//! insertion order of the statements matched by each pattern, pattern by
//! pattern, so every run over the same assertions produces the same bindings
//! in the same order.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::term::{Bindings, Term, TermError};

pub const RDFS_SUBCLASS_OF: &str = "rdfs:subClassOf";
pub const RDF_TYPE: &str = "rdf:type";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("statement is not ground: {0}")]
    NonGroundStatement(String),
    #[error("{position} of {statement} must be a symbol")]
    NonSymbolPosition { position: &'static str, statement: String },
    #[error("malformed ontology file: {0}")]
    Format(String),
    #[error(transparent)]
    Term(#[from] TermError),
}

/// A ground triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[Term; 3]", into = "[Term; 3]")]
pub struct Statement {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Statement {
    /// Builds a statement, rejecting variables in any position.
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Self, StoreError> {
        let stmt = Statement {
            subject,
            predicate,
            object,
        };
        stmt.validate()?;
        Ok(stmt)
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if !(self.subject.is_ground() && self.predicate.is_ground() && self.object.is_ground()) {
            return Err(StoreError::NonGroundStatement(self.to_string()));
        }
        if self.subject.as_symbol().is_none() {
            return Err(StoreError::NonSymbolPosition {
                position: "subject",
                statement: self.to_string(),
            });
        }
        if self.predicate.as_symbol().is_none() {
            return Err(StoreError::NonSymbolPosition {
                position: "predicate",
                statement: self.to_string(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        Value::Array(vec![
            self.subject.to_json(),
            self.predicate.to_json(),
            self.object.to_json(),
        ])
    }

    pub fn as_pattern(&self) -> Pattern {
        Pattern::new(self.subject.clone(), self.predicate.clone(), self.object.clone())
    }
}

impl TryFrom<[Term; 3]> for Statement {
    type Error = StoreError;

    fn try_from([s, p, o]: [Term; 3]) -> Result<Self, Self::Error> {
        Statement::new(s, p, o)
    }
}

impl From<Statement> for [Term; 3] {
    fn from(s: Statement) -> Self {
        [s.subject, s.predicate, s.object]
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.subject, self.predicate, self.object)
    }
}

/// A triple whose positions may hold variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[Term; 3]", into = "[Term; 3]")]
pub struct Pattern {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Pattern {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        Pattern {
            subject,
            predicate,
            object,
        }
    }

    pub fn positions(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn substitute(&self, bindings: &Bindings) -> Pattern {
        Pattern {
            subject: self.subject.substitute(bindings),
            predicate: self.predicate.substitute(bindings),
            object: self.object.substitute(bindings),
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.positions().into_iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            _ => None,
        })
    }

    pub fn is_ground(&self) -> bool {
        self.variables().next().is_none()
    }

    /// Grounds the pattern with `bindings`; fails on any remaining variable.
    pub fn ground(&self, bindings: &Bindings) -> Result<Statement, StoreError> {
        let p = self.substitute(bindings);
        Statement::new(p.subject, p.predicate, p.object)
    }

    /// Unifies the pattern with a ground statement, extending `bindings`.
    pub fn unify(&self, stmt: &Statement, bindings: &Bindings) -> Option<Bindings> {
        let mut out = bindings.clone();
        for (pat, value) in [
            (&self.subject, &stmt.subject),
            (&self.predicate, &stmt.predicate),
            (&self.object, &stmt.object),
        ] {
            match pat {
                Term::Var(v) => match out.get(v) {
                    Some(bound) if bound != value => return None,
                    Some(_) => {}
                    None => {
                        out.insert(v.clone(), value.clone());
                    }
                },
                ground if ground != value => return None,
                _ => {}
            }
        }
        Some(out)
    }

    pub fn to_json(&self) -> Value {
        Value::Array(self.positions().iter().map(|t| t.to_json()).collect())
    }
}

impl From<[Term; 3]> for Pattern {
    fn from([s, p, o]: [Term; 3]) -> Self {
        Pattern::new(s, p, o)
    }
}

impl From<Pattern> for [Term; 3] {
    fn from(p: Pattern) -> Self {
        [p.subject, p.predicate, p.object]
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.subject, self.predicate, self.object)
    }
}

/// Monotone mutation counter of a [`TripleStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct Revision(pub u64);

/// Source of candidate statements for conjunctive matching.
pub trait TripleSource {
    /// Statements that may match `pattern`, in insertion order.
    fn candidates<'a>(&'a self, pattern: &Pattern) -> Box<dyn Iterator<Item = &'a Statement> + 'a>;

    /// Every binding map satisfying all `patterns`, extending `initial`.
    fn solve(&self, patterns: &[Pattern], initial: &Bindings) -> Vec<Bindings> {
        let mut solutions = vec![initial.clone()];
        for pattern in patterns {
            let mut next = Vec::new();
            for sol in &solutions {
                let p = pattern.substitute(sol);
                for stmt in self.candidates(&p) {
                    if let Some(b) = p.unify(stmt, sol) {
                        next.push(b);
                    }
                }
            }
            solutions = next;
            if solutions.is_empty() {
                break;
            }
        }
        solutions
    }
}

#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    by_seq: BTreeMap<u64, Statement>,
    seq_of: HashMap<Statement, u64>,
    by_subject: HashMap<Term, BTreeSet<u64>>,
    by_predicate: HashMap<Term, BTreeSet<u64>>,
    by_object: HashMap<Term, BTreeSet<u64>>,
    next_seq: u64,
    revision: Revision,
}

impl PartialEq for TripleStore {
    fn eq(&self, other: &Self) -> bool {
        self.revision == other.revision && self.statements().eq(other.statements())
    }
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads a JSON array of `[s, p, o]` triples.
    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, StoreError> {
        let mut store = TripleStore::new();
        store.load_json_slice(bytes)?;
        Ok(store)
    }

    pub fn load_json_slice(&mut self, bytes: &[u8]) -> Result<(), StoreError> {
        let raw: Vec<[Value; 3]> = serde_json::from_slice(bytes).map_err(|e| StoreError::Format(e.to_string()))?;
        for [s, p, o] in raw {
            let stmt = Statement::new(Term::from_json(&s)?, Term::from_json(&p)?, Term::from_json(&o)?)?;
            self.assert_stmt(stmt)?;
        }
        Ok(())
    }

    pub fn revision(&self) -> Revision {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.by_seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_seq.is_empty()
    }

    pub fn contains(&self, stmt: &Statement) -> bool {
        self.seq_of.contains_key(stmt)
    }

    pub fn statements(&self) -> impl Iterator<Item = &Statement> {
        self.by_seq.values()
    }

    fn bump(&mut self) -> Revision {
        self.revision = Revision(self.revision.0 + 1);
        self.revision
    }

    /// Adds a ground statement. Re-asserting an existing statement keeps its
    /// original position but still yields a fresh revision.
    pub fn assert_stmt(&mut self, stmt: Statement) -> Result<Revision, StoreError> {
        stmt.validate()?;
        if !self.seq_of.contains_key(&stmt) {
            let seq = self.next_seq;
            self.next_seq += 1;
            self.by_subject.entry(stmt.subject.clone()).or_default().insert(seq);
            self.by_predicate.entry(stmt.predicate.clone()).or_default().insert(seq);
            self.by_object.entry(stmt.object.clone()).or_default().insert(seq);
            self.seq_of.insert(stmt.clone(), seq);
            self.by_seq.insert(seq, stmt);
        }
        Ok(self.bump())
    }

    /// Removes a statement; returns whether it was present.
    pub fn retract_stmt(&mut self, stmt: &Statement) -> Result<bool, StoreError> {
        stmt.validate()?;
        let Some(seq) = self.seq_of.remove(stmt) else {
            return Ok(false);
        };
        self.by_seq.remove(&seq);
        for (index, key) in [
            (&mut self.by_subject, &stmt.subject),
            (&mut self.by_predicate, &stmt.predicate),
            (&mut self.by_object, &stmt.object),
        ] {
            if let Some(set) = index.get_mut(key) {
                set.remove(&seq);
                if set.is_empty() {
                    index.remove(key);
                }
            }
        }
        self.bump();
        Ok(true)
    }

    /// Conjunctive query over all `patterns`.
    pub fn query(&self, patterns: &[Pattern]) -> Vec<Bindings> {
        self.solve(patterns, &Bindings::new())
    }

    /// True iff `sub` reaches `sup` through zero or more `rdfs:subClassOf` edges.
    pub fn is_subclass(&self, sub: &Term, sup: &Term) -> bool {
        if sub == sup {
            return true;
        }
        let pred = Term::sym(RDFS_SUBCLASS_OF);
        let mut seen: HashSet<&Term> = HashSet::from([sub]);
        let mut queue: VecDeque<&Term> = VecDeque::from([sub]);
        while let Some(class) = queue.pop_front() {
            let Some(seqs) = self.by_subject.get(class) else {
                continue;
            };
            for seq in seqs {
                let stmt = &self.by_seq[seq];
                if stmt.predicate != pred {
                    continue;
                }
                if &stmt.object == sup {
                    return true;
                }
                if seen.insert(&stmt.object) {
                    queue.push_back(&stmt.object);
                }
            }
        }
        false
    }

    /// A class is known when it takes part in a subclass edge or is typed as a class.
    pub fn is_class(&self, class: &Term) -> bool {
        let sub = Term::sym(RDFS_SUBCLASS_OF);
        let typed = [Term::sym("rdfs:Class"), Term::sym("owl:Class")];
        self.statements().any(|s| {
            (s.predicate == sub && (&s.subject == class || &s.object == class))
                || (&s.subject == class && s.predicate == Term::sym(RDF_TYPE) && typed.contains(&s.object))
        })
    }

    /// Classes asserted for an individual with `rdf:type`.
    pub fn types_of(&self, individual: &Term) -> Vec<Term> {
        let p = Pattern::new(individual.clone(), Term::sym(RDF_TYPE), Term::var("t"));
        self.query(&[p]).into_iter().filter_map(|mut b| b.remove("t")).collect()
    }

    /// Statements as a JSON array, in insertion order.
    pub fn to_json(&self) -> Value {
        Value::Array(self.statements().map(Statement::to_json).collect())
    }
}

impl TripleSource for TripleStore {
    fn candidates<'a>(&'a self, pattern: &Pattern) -> Box<dyn Iterator<Item = &'a Statement> + 'a> {
        let mut best: Option<&BTreeSet<u64>> = None;
        for (index, term) in [
            (&self.by_subject, &pattern.subject),
            (&self.by_predicate, &pattern.predicate),
            (&self.by_object, &pattern.object),
        ] {
            if term.is_var() {
                continue;
            }
            match index.get(term) {
                None => return Box::new(std::iter::empty()),
                Some(set) if best.is_none_or(|b| set.len() < b.len()) => best = Some(set),
                Some(_) => {}
            }
        }
        match best {
            Some(set) => Box::new(set.iter().map(move |seq| &self.by_seq[seq])),
            None => Box::new(self.by_seq.values()),
        }
    }
}
