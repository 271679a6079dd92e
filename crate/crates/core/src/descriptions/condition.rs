//! Condition and effect language used by feasibility preconditions, rational
//! effects, action preconditions/effects, transition guards and plan guards.
//!
//! A condition is a conjunction of clauses evaluated left to right. Pattern
//! clauses read either the data model (`"data"`) or one role's actual world
//! (`"mental:<role>"`); `not` is negation as failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::board::Blackboard;
use crate::ids::AgentId;
use crate::mentality::{reify, MentalModel, WorldTag};
use crate::store::{Pattern, Statement, StoreError, TripleSource, TripleStore};
use crate::term::{Bindings, Term, TermError};

pub type RoleMap = BTreeMap<String, AgentId>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConditionError {
    #[error("variable ?{var} used in comparison before being bound")]
    UnboundVariableInCompare { var: String },
    #[error("variable ?{var} in effect {effect} is not bound")]
    UnboundVariableInEffect { var: String, effect: String },
    #[error("unit mismatch comparing {left} with {right}")]
    UnitMismatch { left: String, right: String },
    #[error("{0}")]
    InvalidComparison(String),
    #[error("scope mental:{0} does not resolve to an agent")]
    UnresolvedRole(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl From<TermError> for ConditionError {
    fn from(e: TermError) -> Self {
        match e {
            TermError::UnitMismatch { left, right } => ConditionError::UnitMismatch { left, right },
            other => ConditionError::InvalidComparison(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    Data,
    Mental(String),
}

impl Scope {
    pub fn parse(s: &str) -> Result<Scope, String> {
        match s {
            "data" => Ok(Scope::Data),
            _ => match s.strip_prefix("mental:") {
                Some(role) if !role.is_empty() => Ok(Scope::Mental(role.to_owned())),
                _ => Err(format!("invalid scope `{s}`")),
            },
        }
    }

    fn believer<'a>(&self, roles: &'a RoleMap) -> Result<Option<&'a AgentId>, ConditionError> {
        match self {
            Scope::Data => Ok(None),
            Scope::Mental(role) => roles
                .get(role)
                .map(Some)
                .ok_or_else(|| ConditionError::UnresolvedRole(role.clone())),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Data => f.write_str("data"),
            Scope::Mental(r) => write!(f, "mental:{r}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn parse(s: &str) -> Result<Self, String> {
        Ok(match s {
            "=" | "==" => CompareOp::Eq,
            "!=" => CompareOp::Ne,
            "<" => CompareOp::Lt,
            "<=" => CompareOp::Le,
            ">" => CompareOp::Gt,
            ">=" => CompareOp::Ge,
            other => return Err(format!("unknown comparison operator `{other}`")),
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    fn holds(self, lhs: &Term, rhs: &Term) -> Result<bool, ConditionError> {
        use std::cmp::Ordering::*;
        Ok(match self {
            CompareOp::Eq => lhs.same_value(rhs)?,
            CompareOp::Ne => !lhs.same_value(rhs)?,
            CompareOp::Lt => lhs.partial_order(rhs)? == Less,
            CompareOp::Le => lhs.partial_order(rhs)? != Greater,
            CompareOp::Gt => lhs.partial_order(rhs)? == Greater,
            CompareOp::Ge => lhs.partial_order(rhs)? != Less,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawClause", into = "RawClause")]
pub enum Clause {
    Pattern { pattern: Pattern, scope: Scope },
    Compare { lhs: Term, op: CompareOp, rhs: Term },
    Not(Box<Clause>),
}

pub type Condition = Vec<Clause>;

impl Clause {
    pub fn data(pattern: Pattern) -> Clause {
        Clause::Pattern {
            pattern,
            scope: Scope::Data,
        }
    }

    pub fn mental(role: &str, pattern: Pattern) -> Clause {
        Clause::Pattern {
            pattern,
            scope: Scope::Mental(role.to_owned()),
        }
    }

    pub fn compare(lhs: Term, op: CompareOp, rhs: Term) -> Clause {
        Clause::Compare { lhs, op, rhs }
    }

    pub fn negate(inner: Clause) -> Clause {
        Clause::Not(Box::new(inner))
    }

    /// Variables this clause can bind (negated clauses bind nothing).
    pub fn binds(&self) -> BTreeSet<String> {
        match self {
            Clause::Pattern { pattern, .. } => pattern.variables().map(str::to_owned).collect(),
            _ => BTreeSet::new(),
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        match self {
            Clause::Pattern { pattern, .. } => pattern.variables().map(str::to_owned).collect(),
            Clause::Compare { lhs, rhs, .. } => [lhs, rhs]
                .into_iter()
                .filter_map(|t| match t {
                    Term::Var(v) => Some(v.clone()),
                    _ => None,
                })
                .collect(),
            Clause::Not(inner) => inner.variables(),
        }
    }

    pub fn scopes(&self) -> Vec<&Scope> {
        match self {
            Clause::Pattern { scope, .. } => vec![scope],
            Clause::Compare { .. } => vec![],
            Clause::Not(inner) => inner.scopes(),
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(RawClause::from(self.clone())).expect("clause serializes")
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clause::Pattern { pattern, scope } => write!(f, "{pattern}@{scope}"),
            Clause::Compare { lhs, op, rhs } => write!(f, "{lhs} {} {rhs}", op.as_str()),
            Clause::Not(inner) => write!(f, "not {inner}"),
        }
    }
}

pub fn condition_to_json(cond: &[Clause]) -> Value {
    Value::Array(cond.iter().map(Clause::to_json).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawClause {
    Pattern {
        pattern: [Term; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Option<String>,
    },
    Compare {
        compare: (Term, String, Term),
    },
    Not {
        not: Box<RawClause>,
    },
}

impl TryFrom<RawClause> for Clause {
    type Error = String;

    fn try_from(raw: RawClause) -> Result<Self, Self::Error> {
        Ok(match raw {
            RawClause::Pattern { pattern, scope } => Clause::Pattern {
                pattern: Pattern::from(pattern),
                scope: Scope::parse(scope.as_deref().unwrap_or("data"))?,
            },
            RawClause::Compare {
                compare: (lhs, op, rhs),
            } => Clause::Compare {
                lhs,
                op: CompareOp::parse(&op)?,
                rhs,
            },
            RawClause::Not { not } => Clause::Not(Box::new(Clause::try_from(*not)?)),
        })
    }
}

impl From<Clause> for RawClause {
    fn from(c: Clause) -> Self {
        match c {
            Clause::Pattern { pattern, scope } => RawClause::Pattern {
                pattern: pattern.into(),
                scope: match scope {
                    Scope::Data => None,
                    s => Some(s.to_string()),
                },
            },
            Clause::Compare { lhs, op, rhs } => RawClause::Compare {
                compare: (lhs, op.as_str().to_owned(), rhs),
            },
            Clause::Not(inner) => RawClause::Not {
                not: Box::new(RawClause::from(*inner)),
            },
        }
    }
}

/// Evaluates a conjunction, returning every extension of `bindings` that
/// satisfies it (empty when the condition fails).
pub fn eval_condition(
    cond: &[Clause],
    bindings: &Bindings,
    data: &TripleStore,
    mm: &MentalModel,
    roles: &RoleMap,
) -> Result<Vec<Bindings>, ConditionError> {
    let mut solutions = vec![bindings.clone()];
    for clause in cond {
        solutions = eval_clause(clause, solutions, data, mm, roles)?;
        if solutions.is_empty() {
            break;
        }
    }
    Ok(solutions)
}

/// Index of the first clause after which the conjunction has no solution.
pub fn first_failing_clause(
    cond: &[Clause],
    bindings: &Bindings,
    data: &TripleStore,
    mm: &MentalModel,
    roles: &RoleMap,
) -> Result<Option<usize>, ConditionError> {
    let mut solutions = vec![bindings.clone()];
    for (i, clause) in cond.iter().enumerate() {
        solutions = eval_clause(clause, solutions, data, mm, roles)?;
        if solutions.is_empty() {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

fn eval_clause(
    clause: &Clause,
    solutions: Vec<Bindings>,
    data: &TripleStore,
    mm: &MentalModel,
    roles: &RoleMap,
) -> Result<Vec<Bindings>, ConditionError> {
    let mut out = Vec::new();
    match clause {
        Clause::Pattern { pattern, scope } => {
            let believer = scope.believer(roles)?;
            for sol in &solutions {
                let found = match believer {
                    None => data.solve(std::slice::from_ref(pattern), sol),
                    Some(agent) => mm.holds_with(agent, std::slice::from_ref(pattern), sol),
                };
                out.extend(found);
            }
        }
        Clause::Compare { lhs, op, rhs } => {
            for sol in solutions {
                let l = lhs.substitute(&sol);
                let r = rhs.substitute(&sol);
                for t in [&l, &r] {
                    if let Term::Var(v) = t {
                        return Err(ConditionError::UnboundVariableInCompare { var: v.clone() });
                    }
                }
                if op.holds(&l, &r)? {
                    out.push(sol);
                }
            }
        }
        Clause::Not(inner) => {
            for sol in solutions {
                let inner_sols = eval_clause(inner, vec![sol.clone()], data, mm, roles)?;
                if inner_sols.is_empty() {
                    out.push(sol);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawEffect", into = "RawEffect")]
pub enum Effect {
    Assert { pattern: Pattern, scope: Option<Scope> },
    Retract { pattern: Pattern, scope: Option<Scope> },
}

impl Effect {
    pub fn assert(pattern: Pattern) -> Effect {
        Effect::Assert { pattern, scope: None }
    }

    pub fn retract(pattern: Pattern) -> Effect {
        Effect::Retract { pattern, scope: None }
    }

    pub fn in_scope(self, scope: Scope) -> Effect {
        match self {
            Effect::Assert { pattern, .. } => Effect::Assert {
                pattern,
                scope: Some(scope),
            },
            Effect::Retract { pattern, .. } => Effect::Retract {
                pattern,
                scope: Some(scope),
            },
        }
    }

    pub fn pattern(&self) -> &Pattern {
        match self {
            Effect::Assert { pattern, .. } | Effect::Retract { pattern, .. } => pattern,
        }
    }

    pub fn scope(&self) -> Option<&Scope> {
        match self {
            Effect::Assert { scope, .. } | Effect::Retract { scope, .. } => scope.as_ref(),
        }
    }

    pub fn is_assert(&self) -> bool {
        matches!(self, Effect::Assert { .. })
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::Assert { pattern, .. } => write!(f, "assert {pattern}"),
            Effect::Retract { pattern, .. } => write!(f, "retract {pattern}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawEffect {
    Assert {
        assert: [Term; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Option<String>,
    },
    Retract {
        retract: [Term; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scope: Option<String>,
    },
}

impl TryFrom<RawEffect> for Effect {
    type Error = String;

    fn try_from(raw: RawEffect) -> Result<Self, Self::Error> {
        let scope = |s: Option<String>| s.as_deref().map(Scope::parse).transpose();
        Ok(match raw {
            RawEffect::Assert { assert, scope: s } => Effect::Assert {
                pattern: assert.into(),
                scope: scope(s)?,
            },
            RawEffect::Retract { retract, scope: s } => Effect::Retract {
                pattern: retract.into(),
                scope: scope(s)?,
            },
        })
    }
}

impl From<Effect> for RawEffect {
    fn from(e: Effect) -> Self {
        match e {
            Effect::Assert { pattern, scope } => RawEffect::Assert {
                assert: pattern.into(),
                scope: scope.map(|s| s.to_string()),
            },
            Effect::Retract { pattern, scope } => RawEffect::Retract {
                retract: pattern.into(),
                scope: scope.map(|s| s.to_string()),
            },
        }
    }
}

/// One change made by [`apply_effects`], in application order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AppliedChange {
    Asserted(Statement),
    Retracted {
        statement: Statement,
        was_present: bool,
    },
    Allocated {
        believer: AgentId,
        statement: Statement,
        belief: bool,
        world: WorldTag,
    },
}

/// Grounds and applies `effects` in order.
///
/// Effects without an explicit scope go to `default_scope`. In a mental
/// scope, `assert` allocates the proposition as believed and `retract`
/// allocates it as disbelieved. Every effect is grounded before the first
/// one is applied, so an unbound variable leaves the stores untouched.
pub fn apply_effects(
    effects: &[Effect],
    bindings: &Bindings,
    default_scope: &Scope,
    roles: &RoleMap,
    board: &mut Blackboard,
) -> Result<Vec<AppliedChange>, ConditionError> {
    let mut grounded = Vec::with_capacity(effects.len());
    for effect in effects {
        let p = effect.pattern().substitute(bindings);
        if let Some(var) = p.variables().next() {
            return Err(ConditionError::UnboundVariableInEffect {
                var: var.to_owned(),
                effect: effect.to_string(),
            });
        }
        let stmt = Statement::new(p.subject, p.predicate, p.object)?;
        let scope = effect.scope().unwrap_or(default_scope);
        grounded.push((effect.is_assert(), stmt, scope.believer(roles)?.cloned()));
    }

    let mut changes = Vec::with_capacity(grounded.len());
    for (is_assert, statement, believer) in grounded {
        match believer {
            None if is_assert => {
                board.data.assert_stmt(statement.clone())?;
                changes.push(AppliedChange::Asserted(statement));
            }
            None => {
                let was_present = board.data.retract_stmt(&statement)?;
                changes.push(AppliedChange::Retracted { statement, was_present });
            }
            Some(agent) => {
                let p = reify(&statement, &agent, is_assert, board.now)?;
                let world = board.allocate(&p);
                changes.push(AppliedChange::Allocated {
                    believer: agent,
                    statement,
                    belief: is_assert,
                    world,
                });
            }
        }
    }
    Ok(changes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::Tick;
    use serde_json::json;

    fn bw_condition(threshold: f64) -> Condition {
        vec![
            Clause::data(Pattern::new(
                Term::var("self"),
                Term::sym("ex:hasBandwidth"),
                Term::var("bw"),
            )),
            Clause::compare(Term::var("bw"), CompareOp::Gt, Term::quantity(threshold, "Mbps")),
        ]
    }

    fn store_with_bw(agent: &str, bw: f64) -> TripleStore {
        let mut s = TripleStore::new();
        s.assert_stmt(
            Statement::new(
                Term::sym(agent),
                Term::sym("ex:hasBandwidth"),
                Term::quantity(bw, "Mbps"),
            )
            .unwrap(),
        )
        .unwrap();
        s
    }

    fn self_binding(agent: &str) -> Bindings {
        Bindings::from([("self".to_string(), Term::sym(agent))])
    }

    #[test]
    fn bandwidth_above_threshold() {
        let data = store_with_bw("C", 1.5);
        let out = eval_condition(
            &bw_condition(1.0),
            &self_binding("C"),
            &data,
            &MentalModel::new(),
            &RoleMap::new(),
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0]["bw"], Term::quantity(1.5, "Mbps"));
    }

    #[test]
    fn bandwidth_below_threshold() {
        let data = store_with_bw("C", 0.5);
        let out = eval_condition(
            &bw_condition(1.0),
            &self_binding("C"),
            &data,
            &MentalModel::new(),
            &RoleMap::new(),
        )
        .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn compare_before_binding() {
        let data = store_with_bw("C", 1.5);
        let mut cond = bw_condition(1.0);
        cond.reverse();
        let err = eval_condition(&cond, &self_binding("C"), &data, &MentalModel::new(), &RoleMap::new()).unwrap_err();
        assert_eq!(err, ConditionError::UnboundVariableInCompare { var: "bw".into() });
    }

    #[test]
    fn unit_mismatch_surfaces() {
        let data = store_with_bw("C", 1.5);
        let cond = vec![
            bw_condition(1.0).remove(0),
            Clause::compare(Term::var("bw"), CompareOp::Gt, Term::quantity(1.0, "kbps")),
        ];
        let err = eval_condition(&cond, &self_binding("C"), &data, &MentalModel::new(), &RoleMap::new()).unwrap_err();
        assert!(matches!(err, ConditionError::UnitMismatch { .. }));
    }

    #[test]
    fn negation_as_failure() {
        let data = store_with_bw("C", 1.5);
        let has_bw = Clause::data(Pattern::new(
            Term::var("self"),
            Term::sym("ex:hasBandwidth"),
            Term::var("_"),
        ));
        let cond = vec![Clause::negate(has_bw)];
        let mm = MentalModel::new();
        assert!(eval_condition(&cond, &self_binding("C"), &data, &mm, &RoleMap::new())
            .unwrap()
            .is_empty());
        assert_eq!(
            eval_condition(&cond, &self_binding("A"), &data, &mm, &RoleMap::new())
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn mental_scope_requires_role() {
        let cond = vec![Clause::mental(
            "participant",
            Pattern::new(Term::var("x"), Term::sym("p"), Term::var("y")),
        )];
        let err = eval_condition(
            &cond,
            &Bindings::new(),
            &TripleStore::new(),
            &MentalModel::new(),
            &RoleMap::new(),
        );
        assert_eq!(err.unwrap_err(), ConditionError::UnresolvedRole("participant".into()));
    }

    #[test]
    fn clause_json_forms() {
        let c: Clause =
            serde_json::from_value(json!({"pattern": ["?s", "p", "o"], "scope": "mental:initiator"})).unwrap();
        assert_eq!(
            c,
            Clause::mental(
                "initiator",
                Pattern::new(Term::var("s"), Term::sym("p"), Term::sym("o"))
            )
        );
        let c: Clause = serde_json::from_value(json!({"compare": ["?bw", ">", {"value": 1, "unit": "Mbps"}]})).unwrap();
        assert_eq!(
            c,
            Clause::compare(Term::var("bw"), CompareOp::Gt, Term::quantity(1.0, "Mbps"))
        );
        let c: Clause = serde_json::from_value(json!({"not": {"pattern": ["a", "b", "c"]}})).unwrap();
        assert!(matches!(c, Clause::Not(_)));
        assert_eq!(serde_json::from_value::<Clause>(c.to_json()).unwrap(), c);
        assert!(serde_json::from_value::<Clause>(json!({"pattern": ["a", "b", "c"], "scope": "elsewhere"})).is_err());
        assert!(serde_json::from_value::<Clause>(json!({"compare": ["?a", "~", 1]})).is_err());
    }

    #[test]
    fn assert_effect_lands_in_data() {
        let mut board = Blackboard::default();
        let eff = vec![Effect::assert(Pattern::new(
            Term::var("a"),
            Term::sym("performed"),
            Term::var("act"),
        ))];
        let b = Bindings::from([
            ("a".into(), Term::sym("T")),
            ("act".into(), Term::sym("ex:video-abstract")),
        ]);
        let changes = apply_effects(&eff, &b, &Scope::Data, &RoleMap::new(), &mut board).unwrap();
        assert_eq!(changes.len(), 1);
        assert!(board.data.contains(
            &Statement::new(Term::sym("T"), Term::sym("performed"), Term::sym("ex:video-abstract")).unwrap()
        ));
    }

    #[test]
    fn retract_then_assert_keeps_statement() {
        let mut board = Blackboard::default();
        let p = Pattern::new(Term::sym("a"), Term::sym("p"), Term::sym("b"));
        let eff = vec![Effect::retract(p.clone()), Effect::assert(p.clone())];
        apply_effects(&eff, &Bindings::new(), &Scope::Data, &RoleMap::new(), &mut board).unwrap();
        assert_eq!(board.data.len(), 1);
        let eff = vec![Effect::assert(p.clone()), Effect::retract(p)];
        apply_effects(&eff, &Bindings::new(), &Scope::Data, &RoleMap::new(), &mut board).unwrap();
        assert!(board.data.is_empty());
    }

    #[test]
    fn mental_effect_reaches_receiver_world() {
        let mut board = Blackboard {
            now: Tick(7),
            ..Default::default()
        };
        let roles = RoleMap::from([("participant".to_string(), AgentId::new("T"))]);
        let eff = vec![Effect::assert(Pattern::new(
            Term::var("s"),
            Term::sym("acf:requested"),
            Term::var("a"),
        ))];
        let b = Bindings::from([
            ("s".into(), Term::sym("S")),
            ("a".into(), Term::sym("ex:video-abstract")),
        ]);
        apply_effects(&eff, &b, &Scope::Mental("participant".into()), &roles, &mut board).unwrap();
        let hits = board.mental.holds(
            &"T".into(),
            &[Pattern::new(Term::sym("S"), Term::sym("acf:requested"), Term::var("x"))],
        );
        assert_eq!(hits.len(), 1);
        assert_eq!(board.trace.len(), 1);
    }

    #[test]
    fn unbound_effect_variable_changes_nothing() {
        let mut board = Blackboard::default();
        let eff = vec![
            Effect::assert(Pattern::new(Term::sym("a"), Term::sym("p"), Term::sym("b"))),
            Effect::assert(Pattern::new(Term::var("who"), Term::sym("p"), Term::sym("b"))),
        ];
        let err = apply_effects(&eff, &Bindings::new(), &Scope::Data, &RoleMap::new(), &mut board).unwrap_err();
        assert!(matches!(err, ConditionError::UnboundVariableInEffect { .. }));
        assert!(board.data.is_empty());
    }
}
