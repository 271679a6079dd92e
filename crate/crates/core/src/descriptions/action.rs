use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::condition::{Clause, Condition, Effect, Scope};
use super::DescriptionError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    #[serde(rename = "dataType")]
    pub data_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub when: Condition,
    #[serde(rename = "do")]
    pub body: ProcessNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessNode {
    Atomic(String),
    Sequence(Vec<ProcessNode>),
    Concurrence(Vec<ProcessNode>),
    Alternative(Vec<Branch>),
    Iteration {
        body: Box<ProcessNode>,
        until: Condition,
        #[serde(rename = "maxIters")]
        max_iters: u32,
    },
}

impl ProcessNode {
    /// Names of every atomic operation in the tree, in pre-order.
    pub fn atomic_ops(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_ops(&mut out);
        out
    }

    fn collect_ops<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ProcessNode::Atomic(op) => out.push(op),
            ProcessNode::Sequence(xs) | ProcessNode::Concurrence(xs) => xs.iter().for_each(|x| x.collect_ops(out)),
            ProcessNode::Alternative(bs) => bs.iter().for_each(|b| b.body.collect_ops(out)),
            ProcessNode::Iteration { body, .. } => body.collect_ops(out),
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            ProcessNode::Atomic(op) if op.is_empty() => Err("atomic node with empty operation name".into()),
            ProcessNode::Atomic(_) => Ok(()),
            ProcessNode::Sequence(xs) | ProcessNode::Concurrence(xs) => xs.iter().try_for_each(ProcessNode::validate),
            ProcessNode::Alternative(bs) if bs.is_empty() => Err("alternative without branches".into()),
            ProcessNode::Alternative(bs) => bs.iter().try_for_each(|b| b.body.validate()),
            ProcessNode::Iteration { max_iters: 0, .. } => Err("iteration needs maxIters >= 1".into()),
            ProcessNode::Iteration { body, .. } => body.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDescription {
    pub name: String,
    pub capability: String,
    #[serde(default)]
    pub inputs: Vec<Parameter>,
    #[serde(default)]
    pub outputs: Vec<Parameter>,
    #[serde(default)]
    pub precondition: Condition,
    #[serde(default)]
    pub effect: Vec<Effect>,
    pub process: ProcessNode,
}

/// Variable bound to the executing agent while an action runs.
pub const SELF_VAR: &str = "self";

impl ActionDescription {
    pub fn input(&self, name: &str) -> Option<&Parameter> {
        self.inputs.iter().find(|p| p.name == name)
    }

    pub fn parameter_names(&self) -> BTreeSet<&str> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .map(|p| p.name.as_str())
            .collect()
    }

    pub fn validate(&self) -> Result<(), DescriptionError> {
        let err = |reason: String| DescriptionError::Schema {
            name: self.name.clone(),
            reason,
        };
        let mut seen = BTreeSet::new();
        for p in self.inputs.iter().chain(&self.outputs) {
            if !seen.insert(p.name.as_str()) {
                return Err(err(format!("parameter `{}` declared twice", p.name)));
            }
        }
        for clause in &self.precondition {
            if clause.scopes().iter().any(|s| **s != Scope::Data) {
                return Err(err(format!("precondition clause {clause} must read the data model")));
            }
        }

        let mut bound: BTreeSet<String> = self.parameter_names().into_iter().map(str::to_owned).collect();
        bound.insert(SELF_VAR.to_owned());
        bound.extend(self.precondition.iter().flat_map(Clause::binds));
        for e in &self.effect {
            if e.scope().is_some_and(|s| *s != Scope::Data) {
                return Err(err(format!("effect {e} must target the data model")));
            }
            if let Some(v) = e.pattern().variables().find(|v| !bound.contains(*v)) {
                return Err(err(format!(
                    "effect {e} uses ?{v}, which no input, output or precondition binds"
                )));
            }
        }
        self.process.validate().map_err(err)
    }
}
