//! Declarative description formats: interaction protocols, communicative
//! acts and actions, plus the condition/effect language they are written in.
//!
//! Files are JSON objects tagged by `"type"`. Loading checks each
//! description on its own; [`link`] resolves the cross-references between
//! them and produces an immutable [`Registry`].

mod act;
mod action;
pub mod condition;
mod protocol;
mod registry;

use std::fs;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

pub use act::{ActionPerformer, CommunicativeActDescription, ContentSchema, SearleClass};
pub use action::{ActionDescription, Branch, Parameter, ProcessNode, SELF_VAR};
pub use condition::{
    apply_effects, condition_to_json, eval_condition, first_failing_clause, AppliedChange, Clause, CompareOp,
    Condition, ConditionError, Effect, RoleMap, Scope,
};
pub use protocol::{ProtocolDescription, State, StateKind, Transition, TransitionLabel};
pub use registry::{link, LinkError, LinkErrors, Registry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescriptionError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("description `{name}`: {reason}")]
    Schema { name: String, reason: String },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Description {
    Protocol(ProtocolDescription),
    CommunicativeAct(CommunicativeActDescription),
    Action(ActionDescription),
}

impl Description {
    pub fn name(&self) -> &str {
        match self {
            Description::Protocol(p) => &p.name,
            Description::CommunicativeAct(c) => &c.name,
            Description::Action(a) => &a.name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Description::Protocol(_) => "Protocol",
            Description::CommunicativeAct(_) => "CommunicativeAct",
            Description::Action(_) => "Action",
        }
    }

    pub fn validate(&self) -> Result<(), DescriptionError> {
        match self {
            Description::Protocol(p) => p.validate(),
            Description::CommunicativeAct(c) => c.validate(),
            Description::Action(a) => a.validate(),
        }
    }
}

/// Parses and checks one description file.
pub fn load_description(bytes: &[u8]) -> Result<Description, DescriptionError> {
    let parse = |e: serde_json::Error| DescriptionError::Parse(e.to_string());
    let mut value: Value = serde_json::from_slice(bytes).map_err(parse)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| DescriptionError::Parse("description must be a JSON object".into()))?;
    let kind = match obj.remove("type") {
        Some(Value::String(k)) => k,
        Some(_) => return Err(DescriptionError::Parse("`type` must be a string".into())),
        None => return Err(DescriptionError::Parse("missing field `type`".into())),
    };
    let desc = match kind.as_str() {
        "Protocol" => Description::Protocol(serde_json::from_value(value).map_err(parse)?),
        "CommunicativeAct" => Description::CommunicativeAct(serde_json::from_value(value).map_err(parse)?),
        "Action" => Description::Action(serde_json::from_value(value).map_err(parse)?),
        other => return Err(DescriptionError::Parse(format!("unknown description type `{other}`"))),
    };
    desc.validate()?;
    Ok(desc)
}

/// Loads every `*.json` file directly inside `dir`, in file-name order.
pub fn load_bundle(dir: &Path) -> Result<Vec<Description>, DescriptionError> {
    let io = |path: &Path, e: &dyn std::fmt::Display| DescriptionError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| io(dir, &e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| io(p, &e))?;
            load_description(&bytes).map_err(|e| match e {
                DescriptionError::Parse(msg) => DescriptionError::Parse(format!("{}: {msg}", p.display())),
                other => other,
            })
        })
        .collect()
}
