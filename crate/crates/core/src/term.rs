//! Terms, triples and variable bindings shared by every layer.
//!
//! JSON encoding of a [`Term`]:
//!
//! - `"?name"` is a variable,
//! - a string made only of identifier characters (`A-Z a-z 0-9 _ - . : / # @`)
//!   is a symbol, e.g. `"ex:Movie"` or `"S"`,
//! - any other string is a string literal; `{"lit": "..."}` forces a literal,
//! - a number, or `{"value": 2, "unit": "Mbps"}`, is a numeric literal,
//! - `true` / `false` are boolean literals.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

/// Variable name (without the leading `?`) to ground term.
pub type Bindings = BTreeMap<String, Term>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub enum Term {
    Symbol(String),
    Str(String),
    Num {
        value: OrderedFloat<f64>,
        unit: Option<String>,
    },
    Bool(bool),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("invalid term encoding: {0}")]
    Encoding(String),
    #[error("unit mismatch: {left} vs {right}")]
    UnitMismatch { left: String, right: String },
    #[error("terms {left} and {right} cannot be compared with `{op}`")]
    InvalidComparison { left: String, op: String, right: String },
}

impl Term {
    pub fn sym(s: impl Into<String>) -> Self {
        Term::Symbol(s.into())
    }

    pub fn lit(s: impl Into<String>) -> Self {
        Term::Str(s.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        let name = name.into();
        Term::Var(name.strip_prefix('?').map(str::to_owned).unwrap_or(name))
    }

    pub fn num(value: f64) -> Self {
        Term::Num {
            value: OrderedFloat(value),
            unit: None,
        }
    }

    pub fn quantity(value: f64, unit: impl Into<String>) -> Self {
        Term::Num {
            value: OrderedFloat(value),
            unit: Some(unit.into()),
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_ground(&self) -> bool {
        !self.is_var()
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Term::Symbol(s) => Some(s),
            _ => None,
        }
    }

    /// Replaces a bound variable by its value; everything else is returned as is.
    pub fn substitute(&self, bindings: &Bindings) -> Term {
        match self {
            Term::Var(v) => bindings.get(v).cloned().unwrap_or_else(|| self.clone()),
            _ => self.clone(),
        }
    }

    /// Ordering between two ground terms for `<`-style comparisons.
    ///
    /// Only numbers are ordered, and only against the same unit.
    pub fn partial_order(&self, other: &Term) -> Result<Ordering, TermError> {
        match (self, other) {
            (Term::Num { value: a, unit: ua }, Term::Num { value: b, unit: ub }) => {
                if ua != ub {
                    return Err(TermError::UnitMismatch {
                        left: ua.clone().unwrap_or_default(),
                        right: ub.clone().unwrap_or_default(),
                    });
                }
                Ok(a.cmp(b))
            }
            _ => Err(TermError::InvalidComparison {
                left: self.to_string(),
                op: "<".into(),
                right: other.to_string(),
            }),
        }
    }

    /// Equality used by `=` / `!=` compare clauses.
    ///
    /// Numbers must share a unit; a number never equals a non-number, which is
    /// reported as an invalid comparison rather than silently `false`.
    pub fn same_value(&self, other: &Term) -> Result<bool, TermError> {
        match (self, other) {
            (Term::Num { .. }, Term::Num { .. }) => Ok(self.partial_order(other)? == Ordering::Equal),
            (Term::Num { .. }, _) | (_, Term::Num { .. }) => Err(TermError::InvalidComparison {
                left: self.to_string(),
                op: "=".into(),
                right: other.to_string(),
            }),
            _ => Ok(self == other),
        }
    }

    fn is_symbol_text(s: &str) -> bool {
        !s.is_empty() && !s.starts_with('?') && s.chars().all(|c| c.is_ascii_alphanumeric() || "_-.:/#@".contains(c))
    }

    pub fn to_json(&self) -> Value {
        match self {
            Term::Symbol(s) => Value::String(s.clone()),
            Term::Var(v) => Value::String(format!("?{v}")),
            Term::Str(s) => {
                if Self::is_symbol_text(s) || s.starts_with('?') {
                    json!({ "lit": s })
                } else {
                    Value::String(s.clone())
                }
            }
            Term::Num { value, unit: None } => json!(value.0),
            Term::Num { value, unit: Some(u) } => json!({ "value": value.0, "unit": u }),
            Term::Bool(b) => Value::Bool(*b),
        }
    }

    pub fn from_json(v: &Value) -> Result<Term, TermError> {
        match v {
            Value::String(s) => {
                if let Some(name) = s.strip_prefix('?') {
                    if name.is_empty() {
                        return Err(TermError::Encoding("empty variable name".into()));
                    }
                    Ok(Term::Var(name.to_owned()))
                } else if Self::is_symbol_text(s) {
                    Ok(Term::Symbol(s.clone()))
                } else {
                    Ok(Term::Str(s.clone()))
                }
            }
            Value::Bool(b) => Ok(Term::Bool(*b)),
            Value::Number(n) => n
                .as_f64()
                .map(Term::num)
                .ok_or_else(|| TermError::Encoding(format!("unrepresentable number {n}"))),
            Value::Object(map) => {
                if let Some(lit) = map.get("lit") {
                    return lit
                        .as_str()
                        .map(Term::lit)
                        .ok_or_else(|| TermError::Encoding("`lit` must be a string".into()));
                }
                let value = map
                    .get("value")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| TermError::Encoding(format!("unrecognised term object {v}")))?;
                match map.get("unit") {
                    None | Some(Value::Null) => Ok(Term::num(value)),
                    Some(Value::String(u)) => Ok(Term::quantity(value, u.clone())),
                    Some(other) => Err(TermError::Encoding(format!("unit must be a string, got {other}"))),
                }
            }
            other => Err(TermError::Encoding(format!("unrecognised term {other}"))),
        }
    }
}

impl TryFrom<Value> for Term {
    type Error = TermError;

    fn try_from(v: Value) -> Result<Self, Self::Error> {
        Term::from_json(&v)
    }
}

impl From<Term> for Value {
    fn from(t: Term) -> Self {
        t.to_json()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Symbol(s) => f.write_str(s),
            Term::Str(s) => write!(f, "{s:?}"),
            Term::Num { value, unit: None } => write!(f, "{}", value.0),
            Term::Num { value, unit: Some(u) } => write!(f, "{} {u}", value.0),
            Term::Bool(b) => write!(f, "{b}"),
            Term::Var(v) => write!(f, "?{v}"),
        }
    }
}

pub fn bindings_to_json(bindings: &Bindings) -> Value {
    Value::Object(bindings.iter().map(|(k, v)| (k.clone(), v.to_json())).collect())
}

/// Extends `base` with `extra`, or `None` when a variable is bound to two different values.
pub fn merge_bindings(base: &Bindings, extra: &Bindings) -> Option<Bindings> {
    let mut out = base.clone();
    for (k, v) in extra {
        match out.get(k) {
            Some(existing) if existing != v => return None,
            _ => {
                out.insert(k.clone(), v.clone());
            }
        }
    }
    Some(out)
}
