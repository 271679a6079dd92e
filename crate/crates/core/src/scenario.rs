//! Scenario files: everything needed to assemble a [`Runtime`], plus the
//! simulated services and golden-trace comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use similar::{capture_diff_slices, Algorithm, DiffOp};
use thiserror::Error;

use crate::action_engine::HostBindings;
use crate::agent::{AgentManifest, PlanRule, RunReport, Runtime, RuntimeError};
use crate::descriptions::{link, load_bundle, load_description, Description, Registry};
use crate::matchmaker::RegistryEntry;
use crate::protocol_engine::{Objective, DEFAULT_TIMEOUT_BUDGET};
use crate::store::{Pattern, Statement, TripleSource, TripleStore};
use crate::term::{Bindings, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}: {reason}", path.display())]
pub struct ConfigError {
    pub path: PathBuf,
    pub reason: String,
}

impl ConfigError {
    fn new(path: &Path, reason: impl fmt::Display) -> Self {
        ConfigError {
            path: path.to_owned(),
            reason: reason.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ServiceSpec {
    pub behavior: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Registration {
    pub agent: String,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub ontology: String,
    /// Directories or single files holding descriptions.
    pub descriptions: Vec<String>,
    pub agents: Vec<String>,
    #[serde(default)]
    pub services: BTreeMap<String, ServiceSpec>,
    /// Matchmaker entries; defaults to every agent's capabilities.
    #[serde(default)]
    pub registrations: Option<Vec<Registration>>,
    #[serde(default)]
    pub objective: Option<Objective>,
    /// Extra data-model triples, `[s, p, o]`.
    #[serde(default)]
    pub facts: Vec<[Value; 3]>,
    #[serde(default = "default_timeout")]
    pub timeout_budget: u32,
    #[serde(default = "default_max_ticks")]
    pub max_ticks: u64,
}

fn default_timeout() -> u32 {
    DEFAULT_TIMEOUT_BUDGET
}

fn default_max_ticks() -> u64 {
    100
}

/// A validated scenario, ready to instantiate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub path: PathBuf,
    pub config: ScenarioConfig,
    pub registry: Registry,
    pub data: TripleStore,
    pub agents: Vec<(AgentManifest, Vec<PlanRule>)>,
}

fn read(path: &Path) -> Result<Vec<u8>, ConfigError> {
    fs::read(path).map_err(|e| ConfigError::new(path, e))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    serde_json::from_slice(&read(path)?).map_err(|e| ConfigError::new(path, e))
}

pub fn load_descriptions(paths: &[PathBuf]) -> Result<Registry, ConfigError> {
    let mut all: Vec<Description> = Vec::new();
    for p in paths {
        if p.is_dir() {
            all.extend(load_bundle(p).map_err(|e| ConfigError::new(p, e))?);
        } else {
            all.push(load_description(&read(p)?).map_err(|e| ConfigError::new(p, e))?);
        }
    }
    let origin = paths.first().cloned().unwrap_or_default();
    link(all).map_err(|e| ConfigError::new(&origin, e))
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
        let path = path.as_ref();
        let config: ScenarioConfig = parse(path)?;
        let base = path.parent().unwrap_or(Path::new("."));

        let ontology = base.join(&config.ontology);
        let mut data = TripleStore::from_json_slice(&read(&ontology)?).map_err(|e| ConfigError::new(&ontology, e))?;
        for [s, p, o] in &config.facts {
            let stmt = Term::from_json(s)
                .and_then(|s| Ok((s, Term::from_json(p)?, Term::from_json(o)?)))
                .map_err(|e| ConfigError::new(path, format!("facts: {e}")))
                .and_then(|(s, p, o)| {
                    Statement::new(s, p, o).map_err(|e| ConfigError::new(path, format!("facts: {e}")))
                })?;
            data.assert_stmt(stmt).map_err(|e| ConfigError::new(path, e))?;
        }

        let dirs: Vec<PathBuf> = config.descriptions.iter().map(|d| base.join(d)).collect();
        let registry = load_descriptions(&dirs)?;

        let mut agents = Vec::new();
        for a in &config.agents {
            let manifest_path = base.join(a);
            let manifest: AgentManifest = parse(&manifest_path)?;
            let rules: Vec<PlanRule> = match &manifest.plan_rules {
                Some(r) => parse(&manifest_path.parent().unwrap_or(base).join(r))?,
                None => Vec::new(),
            };
            agents.push((manifest, rules));
        }

        let scenario = Scenario {
            path: path.to_owned(),
            config,
            registry,
            data,
            agents,
        };
        scenario.runtime()?;
        Ok(scenario)
    }

    /// Builds a fresh runtime; every call starts from the same state.
    pub fn runtime(&self) -> Result<Runtime, ConfigError> {
        let err = |reason: String| ConfigError::new(&self.path, reason);
        let hosts = build_hosts(&self.config.services).map_err(err)?;
        let mut rt = Runtime::new(self.registry.clone(), hosts, self.data.clone());
        rt.objective = self.config.objective.clone();
        rt.timeout_budget = self.config.timeout_budget;
        for (manifest, rules) in &self.agents {
            rt.add_agent(manifest, rules.clone()).map_err(|e| err(e.to_string()))?;
        }

        let registrations: Vec<Registration> = match &self.config.registrations {
            Some(r) => r.clone(),
            None => self
                .agents
                .iter()
                .flat_map(|(m, _)| {
                    m.capabilities.iter().map(|c| Registration {
                        agent: m.id.to_string(),
                        action: c.clone(),
                    })
                })
                .collect(),
        };
        for r in registrations {
            let agent = r.agent.as_str().into();
            if rt.agent(&agent).is_none() {
                return Err(err(format!("registration names unknown agent `{}`", r.agent)));
            }
            let action = self
                .registry
                .action(&r.action)
                .ok_or_else(|| err(format!("registration names unknown action `{}`", r.action)))?;
            rt.matchmaker
                .register(RegistryEntry::for_action(&agent, action), &self.data)
                .map_err(|e| err(e.to_string()))?;
        }

        for action in self.registry.actions() {
            for op in action.process.atomic_ops() {
                if !rt.hosts.contains(op) {
                    return Err(err(format!(
                        "action {} uses operation `{op}` with no service",
                        action.name
                    )));
                }
            }
        }
        Ok(rt)
    }

    pub fn run(&self) -> Result<(Runtime, RunReport), ConfigError> {
        let mut rt = self.runtime()?;
        let report = rt
            .run(self.config.max_ticks)
            .map_err(|e: RuntimeError| ConfigError::new(&self.path, e))?;
        Ok((rt, report))
    }
}

fn param<'a>(params: &'a BTreeMap<String, Value>, op: &str, key: &str) -> Result<&'a Value, String> {
    params
        .get(key)
        .ok_or_else(|| format!("service `{op}` needs parameter `{key}`"))
}

fn param_str(params: &BTreeMap<String, Value>, op: &str, key: &str) -> Result<String, String> {
    param(params, op, key)?
        .as_str()
        .map(|s| s.trim_start_matches('?').to_owned())
        .ok_or_else(|| format!("service `{op}`: parameter `{key}` must be a string"))
}

/// Local part of a term, for minting identifiers.
fn local_name(t: &Term) -> String {
    let s = t.to_string();
    s.rsplit(':').next().unwrap_or(&s).to_owned()
}

/// Instantiates the built-in simulated behaviors:
/// `first-match` binds `output` from the first (sorted) solution of
/// `pattern`; `mint` builds a symbol from `template`, replacing `{var}` by
/// the local name of the bound value.
pub fn build_hosts(services: &BTreeMap<String, ServiceSpec>) -> Result<HostBindings, String> {
    let mut hosts = HostBindings::new();
    for (op, spec) in services {
        let output = param_str(&spec.params, op, "output")?;
        match spec.behavior.as_str() {
            "first-match" => {
                let raw = param(&spec.params, op, "pattern")?;
                let pattern: Pattern =
                    serde_json::from_value(raw.clone()).map_err(|e| format!("service `{op}`: {e}"))?;
                if !pattern.variables().any(|v| v == output) {
                    return Err(format!("service `{op}`: pattern does not bind ?{output}"));
                }
                let name = op.clone();
                hosts.bind(op.clone(), move |b: &Bindings, data: &TripleStore| {
                    let mut values: Vec<Term> = data
                        .solve(std::slice::from_ref(&pattern), b)
                        .into_iter()
                        .filter_map(|s| s.get(&output).cloned())
                        .collect();
                    values.sort();
                    let first = values
                        .into_iter()
                        .next()
                        .ok_or_else(|| format!("{name}: nothing matches {}", pattern.substitute(b)))?;
                    Ok(Bindings::from([(output.clone(), first)]))
                });
            }
            "mint" => {
                let template = param_str(&spec.params, op, "template")?;
                let name = op.clone();
                hosts.bind(op.clone(), move |b: &Bindings, _: &TripleStore| {
                    let mut out = String::new();
                    let mut rest = template.as_str();
                    while let Some(open) = rest.find('{') {
                        let close = rest[open..]
                            .find('}')
                            .ok_or_else(|| format!("{name}: unclosed brace"))?
                            + open;
                        let var = &rest[open + 1..close];
                        let value = b.get(var).ok_or_else(|| format!("{name}: ?{var} is unbound"))?;
                        out.push_str(&rest[..open]);
                        out.push_str(&local_name(value));
                        rest = &rest[close + 1..];
                    }
                    out.push_str(rest);
                    Ok(Bindings::from([(output.clone(), Term::sym(out))]))
                });
            }
            other => return Err(format!("service `{op}`: unknown behavior `{other}`")),
        }
    }
    Ok(hosts)
}

/// One difference between a golden trace and an actual one. Indices are
/// zero-based line numbers in the respective file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceDiff {
    Mismatch {
        index: usize,
        expected: String,
        actual: String,
    },
    Missing {
        index: usize,
        expected: String,
    },
    Surplus {
        index: usize,
        actual: String,
    },
}

impl fmt::Display for TraceDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceDiff::Mismatch {
                index,
                expected,
                actual,
            } => {
                write!(f, "line {index}: expected {expected}, got {actual}")
            }
            TraceDiff::Missing { index, expected } => write!(f, "golden line {index} missing: {expected}"),
            TraceDiff::Surplus { index, actual } => write!(f, "surplus line {index}: {actual}"),
        }
    }
}

/// Canonical form of a trace line; wall-clock `timestamp` fields are ignored.
fn canonical(line: &str) -> String {
    match serde_json::from_str::<Value>(line) {
        Ok(Value::Object(mut m)) => {
            m.remove("timestamp");
            Value::Object(m).to_string()
        }
        Ok(v) => v.to_string(),
        Err(_) => line.to_owned(),
    }
}

/// Structural line diff of two JSON-lines traces; empty when they agree.
pub fn diff_traces(golden: &str, actual: &str) -> Vec<TraceDiff> {
    let g: Vec<&str> = golden.lines().filter(|l| !l.trim().is_empty()).collect();
    let a: Vec<&str> = actual.lines().filter(|l| !l.trim().is_empty()).collect();
    let gc: Vec<String> = g.iter().map(|l| canonical(l)).collect();
    let ac: Vec<String> = a.iter().map(|l| canonical(l)).collect();

    let mut out = Vec::new();
    for op in capture_diff_slices(Algorithm::Myers, &gc, &ac) {
        match op {
            DiffOp::Equal { .. } => {}
            DiffOp::Delete { old_index, old_len, .. } => {
                out.extend((old_index..old_index + old_len).map(|i| TraceDiff::Missing {
                    index: i,
                    expected: g[i].to_owned(),
                }));
            }
            DiffOp::Insert { new_index, new_len, .. } => {
                out.extend((new_index..new_index + new_len).map(|i| TraceDiff::Surplus {
                    index: i,
                    actual: a[i].to_owned(),
                }));
            }
            DiffOp::Replace {
                old_index,
                old_len,
                new_index,
                new_len,
            } => {
                let paired = old_len.min(new_len);
                for k in 0..paired {
                    out.push(TraceDiff::Mismatch {
                        index: new_index + k,
                        expected: g[old_index + k].to_owned(),
                        actual: a[new_index + k].to_owned(),
                    });
                }
                out.extend((old_index + paired..old_index + old_len).map(|i| TraceDiff::Missing {
                    index: i,
                    expected: g[i].to_owned(),
                }));
                out.extend((new_index + paired..new_index + new_len).map(|i| TraceDiff::Surplus {
                    index: i,
                    actual: a[i].to_owned(),
                }));
            }
        }
    }
    out
}

/// Compares two trace files.
pub fn verify_trace(actual: &Path, golden: &Path) -> Result<Vec<TraceDiff>, ConfigError> {
    let text = |p: &Path| fs::read_to_string(p).map_err(|e| ConfigError::new(p, e));
    Ok(diff_traces(&text(golden)?, &text(actual)?))
}
