//! Boolean conjunctive queries with negation and comparisons, and aggregate
//! queries `[q(α(x̄)) ← body] θ c`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::schema::{DatabaseState, Schema, Tuple};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(v: impl Into<Value>) -> Self {
        Term::Const(v.into())
    }

    fn resolve<'a>(&'a self, h: &'a Assignment) -> Option<&'a Value> {
        match self {
            Term::Var(x) => h.get(x),
            Term::Const(c) => Some(c),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x) => f.write_str(x),
            Term::Const(c) => f.write_str(&c.quoted()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub relation: String,
    pub terms: Vec<Term>,
}

impl Atom {
    pub fn new(relation: impl Into<String>, terms: impl IntoIterator<Item = Term>) -> Self {
        Atom {
            relation: relation.into(),
            terms: terms.into_iter().collect(),
        }
    }

    fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(|t| match t {
            Term::Var(x) => Some(x.as_str()),
            Term::Const(_) => None,
        })
    }

    /// The ground tuple under a total assignment.
    pub fn ground(&self, h: &Assignment) -> Tuple {
        Tuple::new(
            self.relation.clone(),
            self.terms
                .iter()
                .map(|t| t.resolve(h).expect("assignment covers every variable").clone()),
        )
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CmpOp {
    Eq,
    Lt,
    Gt,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Ne => "!=",
        }
    }

    pub fn apply(self, a: &Value, b: &Value) -> Result<bool> {
        Ok(match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a.compare_ordered(b)?.is_lt(),
            CmpOp::Gt => a.compare_ordered(b)?.is_gt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Comparison {
    pub left: Term,
    pub op: CmpOp,
    pub right: Term,
}

impl Comparison {
    pub fn new(left: Term, op: CmpOp, right: Term) -> Self {
        Comparison { left, op, right }
    }

    pub fn holds(&self, h: &Assignment) -> Result<bool> {
        let a = self.left.resolve(h).expect("assignment covers every variable");
        let b = self.right.resolve(h).expect("assignment covers every variable");
        self.op.apply(a, b)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.op.symbol(), self.right)
    }
}

pub type Assignment = BTreeMap<String, Value>;

/// `P, N, C`: positive atoms, negated atoms and comparisons.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Body {
    pub positive: Vec<Atom>,
    pub negated: Vec<Atom>,
    pub comparisons: Vec<Comparison>,
}

impl Body {
    pub fn new(positive: Vec<Atom>, negated: Vec<Atom>, comparisons: Vec<Comparison>) -> Self {
        Body {
            positive,
            negated,
            comparisons,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.negated.is_empty()
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        let mut vars: BTreeSet<&str> = BTreeSet::new();
        for a in self.positive.iter().chain(&self.negated) {
            vars.extend(a.vars());
        }
        for c in &self.comparisons {
            for t in [&c.left, &c.right] {
                if let Term::Var(x) = t {
                    vars.insert(x);
                }
            }
        }
        vars
    }

    fn positive_variables(&self) -> BTreeSet<&str> {
        self.positive.iter().flat_map(Atom::vars).collect()
    }

    /// Every constant mentioned by the body.
    pub fn constants(&self) -> BTreeSet<Value> {
        let mut out = BTreeSet::new();
        for a in self.positive.iter().chain(&self.negated) {
            for t in &a.terms {
                if let Term::Const(c) = t {
                    out.insert(c.clone());
                }
            }
        }
        for c in &self.comparisons {
            for t in [&c.left, &c.right] {
                if let Term::Const(v) = t {
                    out.insert(v.clone());
                }
            }
        }
        out
    }

    pub fn without_negation(&self) -> Body {
        Body {
            positive: self.positive.clone(),
            negated: Vec::new(),
            comparisons: self.comparisons.clone(),
        }
    }

    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        for a in self.positive.iter().chain(&self.negated) {
            let rel = schema.get(&a.relation)?;
            if rel.arity() != a.terms.len() {
                return Err(Error::Arity {
                    relation: a.relation.clone(),
                    expected: rel.arity(),
                    found: a.terms.len(),
                });
            }
        }
        Ok(())
    }

    /// Ground positive and negated atoms under `h`.
    pub fn ground(&self, h: &Assignment) -> (Vec<Tuple>, Vec<Tuple>) {
        (
            self.positive.iter().map(|a| a.ground(h)).collect(),
            self.negated.iter().map(|a| a.ground(h)).collect(),
        )
    }
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.positive.iter().map(ToString::to_string).collect();
        parts.extend(self.negated.iter().map(|a| format!("!{a}")));
        parts.extend(self.comparisons.iter().map(ToString::to_string));
        f.write_str(&parts.join(", "))
    }
}

/// Every variable of the body (and of `extra`) must occur in a positive
/// atom. Reports the first offender in name order.
pub fn check_safety<'a>(body: &'a Body, extra: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let bound = body.positive_variables();
    let mut all = body.variables();
    all.extend(extra);
    match all.into_iter().find(|v| !bound.contains(v)) {
        Some(v) => Err(Error::Unsafe(v.to_string())),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConjunctiveQuery {
    name: String,
    body: Body,
}

impl ConjunctiveQuery {
    pub fn new(name: impl Into<String>, body: Body) -> Result<Self> {
        check_safety(&body, [])?;
        Ok(ConjunctiveQuery {
            name: name.into(),
            body,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    pub fn is_positive(&self) -> bool {
        self.body.is_positive()
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "deny {} :- {}", self.name, self.body)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AggregateFn {
    Count,
    CountDistinct,
    Sum,
    Max,
}

impl AggregateFn {
    pub fn keyword(self) -> &'static str {
        match self {
            AggregateFn::Count => "count",
            AggregateFn::CountDistinct => "countd",
            AggregateFn::Sum => "sum",
            AggregateFn::Max => "max",
        }
    }
}

impl fmt::Display for AggregateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Comparator of an aggregate query. Only `=`, `<` and `>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AggCmp {
    Eq,
    Lt,
    Gt,
}

impl AggCmp {
    pub fn symbol(self) -> &'static str {
        match self {
            AggCmp::Eq => "=",
            AggCmp::Lt => "<",
            AggCmp::Gt => ">",
        }
    }

    pub fn apply(self, a: &Value, b: &Value) -> Result<bool> {
        let ord = a.compare_ordered(b)?;
        Ok(match self {
            AggCmp::Eq => ord.is_eq(),
            AggCmp::Lt => ord.is_lt(),
            AggCmp::Gt => ord.is_gt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AggregateQuery {
    name: String,
    func: AggregateFn,
    vars: Vec<String>,
    body: Body,
    cmp: AggCmp,
    threshold: Value,
}

impl AggregateQuery {
    pub fn new(
        name: impl Into<String>,
        func: AggregateFn,
        vars: Vec<String>,
        body: Body,
        cmp: AggCmp,
        threshold: Value,
    ) -> Result<Self> {
        match func {
            AggregateFn::Count => {}
            AggregateFn::CountDistinct if vars.is_empty() => {
                return Err(Error::InvalidQuery("countd needs at least one variable".into()))
            }
            AggregateFn::Sum | AggregateFn::Max if vars.len() != 1 => {
                return Err(Error::InvalidQuery(format!("{func} takes exactly one variable")))
            }
            _ => {}
        }
        if !threshold.is_numeric() {
            return Err(Error::Type(format!(
                "aggregate threshold {} is not a number",
                threshold.quoted()
            )));
        }
        check_safety(&body, vars.iter().map(String::as_str))?;
        Ok(AggregateQuery {
            name: name.into(),
            func,
            vars,
            body,
            cmp,
            threshold,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn func(&self) -> AggregateFn {
        self.func
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    pub fn cmp(&self) -> AggCmp {
        self.cmp
    }

    pub fn threshold(&self) -> &Value {
        &self.threshold
    }

    pub fn is_positive(&self) -> bool {
        self.body.is_positive()
    }

    /// `α(B) θ c`, false for the empty bag.
    pub fn decide(&self, bag: &Bag) -> Result<bool> {
        if bag.is_empty() {
            return Ok(false);
        }
        let v = aggregate_apply(self.func, bag)?;
        self.cmp.apply(&v, &self.threshold)
    }

    pub fn project(&self, h: &Assignment) -> Vec<Value> {
        self.vars.iter().map(|x| h[x].clone()).collect()
    }
}

impl fmt::Display for AggregateQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "deny {} [{}({}) :- {}] {} {}",
            self.name,
            self.func,
            self.vars.join(", "),
            self.body,
            self.cmp.symbol(),
            self.threshold.quoted()
        )
    }
}

/// A multiset of value tuples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bag {
    counts: BTreeMap<Vec<Value>, usize>,
}

impl Bag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: Vec<Value>) {
        *self.counts.entry(v).or_insert(0) += 1;
    }

    pub fn add_many(&mut self, v: Vec<Value>, multiplicity: usize) {
        if multiplicity > 0 {
            *self.counts.entry(v).or_insert(0) += multiplicity;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn multiplicity(&self, v: &[Value]) -> usize {
        self.counts.get(v).copied().unwrap_or(0)
    }

    /// Distinct elements with multiplicities.
    pub fn iter(&self) -> impl Iterator<Item = (&Vec<Value>, usize)> {
        self.counts.iter().map(|(v, &m)| (v, m))
    }
}

impl FromIterator<Vec<Value>> for Bag {
    fn from_iter<I: IntoIterator<Item = Vec<Value>>>(iter: I) -> Self {
        let mut b = Bag::new();
        for v in iter {
            b.add(v);
        }
        b
    }
}

fn unary(func: AggregateFn, v: &[Value]) -> Result<&Value> {
    match v {
        [x] => Ok(x),
        _ => Err(Error::InvalidQuery(format!("{func} applies to unary tuples only"))),
    }
}

/// COUNT = Σ mult, COUNTD = |vals|, SUM = Σ mult·v, MAX = max vals.
pub fn aggregate_apply(func: AggregateFn, bag: &Bag) -> Result<Value> {
    if bag.is_empty() {
        return Err(Error::EmptyBag);
    }
    match func {
        AggregateFn::Count => {
            let n: usize = bag.iter().map(|(_, m)| m).sum();
            Ok(Value::Int(n as i64))
        }
        AggregateFn::CountDistinct => Ok(Value::Int(bag.counts.len() as i64)),
        AggregateFn::Sum => {
            let mut total = Value::Int(0);
            for (v, m) in bag.iter() {
                let x = unary(func, v)?;
                if !x.is_numeric() {
                    return Err(Error::Type(format!("sum over non-numeric value {}", x.quoted())));
                }
                total = total.checked_add(&x.checked_mul_count(m)?)?;
            }
            Ok(total)
        }
        AggregateFn::Max => {
            let mut best: Option<&Value> = None;
            for (v, _) in bag.iter() {
                let x = unary(func, v)?;
                best = Some(match best {
                    None => {
                        if !x.is_numeric() {
                            return Err(Error::Type(format!("max over unordered value {}", x.quoted())));
                        }
                        x
                    }
                    Some(b) if x.compare_ordered(b)?.is_gt() => x,
                    Some(b) => b,
                });
            }
            Ok(best.expect("bag is non-empty").clone())
        }
    }
}

struct Matcher<'a> {
    body: &'a Body,
    state: &'a DatabaseState,
}

impl Matcher<'_> {
    /// Depth-first join over the positive atoms; `emit` returns false to stop.
    fn run(&self, depth: usize, h: &mut Assignment, emit: &mut dyn FnMut(&Assignment) -> Result<bool>) -> Result<bool> {
        if depth == self.body.positive.len() {
            for c in &self.body.comparisons {
                if !c.holds(h)? {
                    return Ok(true);
                }
            }
            for a in &self.body.negated {
                if self.state.contains(&a.ground(h)) {
                    return Ok(true);
                }
            }
            return emit(h);
        }
        let atom = &self.body.positive[depth];
        'rows: for row in self.state.rows(&atom.relation) {
            let mut bound_here: Vec<&str> = Vec::new();
            for (t, v) in atom.terms.iter().zip(row) {
                let ok = match t {
                    Term::Const(c) => c == v,
                    Term::Var(x) => match h.get(x) {
                        Some(b) => b == v,
                        None => {
                            h.insert(x.clone(), v.clone());
                            bound_here.push(x);
                            true
                        }
                    },
                };
                if !ok {
                    for x in bound_here {
                        h.remove(x);
                    }
                    continue 'rows;
                }
            }
            let keep_going = self.run(depth + 1, h, emit)?;
            for x in bound_here {
                h.remove(x);
            }
            if !keep_going {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn for_each_assignment(
    body: &Body,
    state: &DatabaseState,
    emit: &mut dyn FnMut(&Assignment) -> Result<bool>,
) -> Result<()> {
    check_safety(body, [])?;
    body.check_schema(state.schema())?;
    let m = Matcher { body, state };
    m.run(0, &mut Assignment::new(), emit)?;
    Ok(())
}

/// All `h` with `h(P) ⊆ state`, `h(N) ∩ state = ∅` and `h(C)` true.
pub fn satisfying_assignments(body: &Body, state: &DatabaseState) -> Result<BTreeSet<Assignment>> {
    let mut out = BTreeSet::new();
    for_each_assignment(body, state, &mut |h| {
        out.insert(h.clone());
        Ok(true)
    })?;
    Ok(out)
}

pub fn eval_boolean(q: &ConjunctiveQuery, state: &DatabaseState) -> Result<bool> {
    let mut found = false;
    for_each_assignment(&q.body, state, &mut |_| {
        found = true;
        Ok(false)
    })?;
    Ok(found)
}

/// The bag `⟦h(x̄) | h ∈ H⟧`.
pub fn aggregate_bag(q: &AggregateQuery, state: &DatabaseState) -> Result<Bag> {
    Ok(satisfying_assignments(&q.body, state)?
        .iter()
        .map(|h| q.project(h))
        .collect())
}

pub fn eval_aggregate(q: &AggregateQuery, state: &DatabaseState) -> Result<bool> {
    q.decide(&aggregate_bag(q, state)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::RelationSchema;
    use std::str::FromStr;
    use std::sync::Arc;

    fn schema() -> Arc<Schema> {
        Arc::new(
            Schema::new()
                .with(RelationSchema::new("R", ["A"]).unwrap())
                .unwrap()
                .with(RelationSchema::new("S", ["A"]).unwrap())
                .unwrap(),
        )
    }

    fn r(x: i64) -> Tuple {
        Tuple::new("R", [Value::Int(x)])
    }

    fn dec(s: &str) -> Value {
        Value::number(rust_decimal::Decimal::from_str(s).unwrap())
    }

    #[test]
    fn safety_reports_offender() {
        let body = Body::new(
            vec![Atom::new("R", [Term::var("x")])],
            vec![Atom::new("S", [Term::var("y")])],
            vec![],
        );
        assert_eq!(check_safety(&body, []), Err(Error::Unsafe("y".into())));
        let ok = Body::new(
            vec![Atom::new("R", [Term::var("x")])],
            vec![],
            vec![Comparison::new(Term::var("x"), CmpOp::Gt, Term::constant(3))],
        );
        assert!(check_safety(&ok, []).is_ok());
    }

    #[test]
    fn aggregate_formulas() {
        let bag: Bag = [1, 1, 3].into_iter().map(|i| vec![Value::Int(i)]).collect();
        assert_eq!(aggregate_apply(AggregateFn::Sum, &bag).unwrap(), Value::Int(5));
        assert_eq!(aggregate_apply(AggregateFn::Count, &bag).unwrap(), Value::Int(3));
        assert_eq!(
            aggregate_apply(AggregateFn::CountDistinct, &bag).unwrap(),
            Value::Int(2)
        );
        let bag: Bag = [dec("0.5"), Value::Int(3)].into_iter().map(|v| vec![v]).collect();
        assert_eq!(aggregate_apply(AggregateFn::Max, &bag).unwrap(), Value::Int(3));
        assert_eq!(aggregate_apply(AggregateFn::Sum, &bag).unwrap(), dec("3.5"));
        assert_eq!(aggregate_apply(AggregateFn::Count, &Bag::new()), Err(Error::EmptyBag));
        let syms: Bag = [vec![Value::sym("a")]].into_iter().collect();
        assert!(matches!(aggregate_apply(AggregateFn::Sum, &syms), Err(Error::Type(_))));
    }

    #[test]
    fn negation_and_comparisons() {
        let s = schema();
        let state = DatabaseState::from_tuples(s, [r(1), r(2), r(5), Tuple::new("S", [Value::Int(2)])]).unwrap();
        let body = Body::new(
            vec![Atom::new("R", [Term::var("x")])],
            vec![Atom::new("S", [Term::var("x")])],
            vec![Comparison::new(Term::var("x"), CmpOp::Lt, Term::constant(5))],
        );
        let hs = satisfying_assignments(&body, &state).unwrap();
        assert_eq!(hs.len(), 1);
        assert_eq!(hs.iter().next().unwrap()["x"], Value::Int(1));
    }

    #[test]
    fn self_inequality_is_unsatisfiable() {
        let s = schema();
        let state = DatabaseState::from_tuples(s, [r(1)]).unwrap();
        let q = ConjunctiveQuery::new(
            "q",
            Body::new(
                vec![Atom::new("R", [Term::var("x")])],
                vec![],
                vec![Comparison::new(Term::var("x"), CmpOp::Ne, Term::var("x"))],
            ),
        )
        .unwrap();
        assert!(!eval_boolean(&q, &state).unwrap());
    }

    #[test]
    fn empty_bag_is_false() {
        let s = schema();
        let body = Body::new(vec![Atom::new("R", [Term::var("x")])], vec![], vec![]);
        for cmp in [AggCmp::Eq, AggCmp::Lt, AggCmp::Gt] {
            let q = AggregateQuery::new("q", AggregateFn::Count, vec![], body.clone(), cmp, Value::Int(0)).unwrap();
            assert!(!eval_aggregate(&q, &DatabaseState::new(s.clone())).unwrap());
        }
        let q = AggregateQuery::new("q", AggregateFn::Count, vec![], body, AggCmp::Gt, Value::Int(0)).unwrap();
        let state = DatabaseState::from_tuples(s, [r(1)]).unwrap();
        assert!(eval_aggregate(&q, &state).unwrap());
    }

    #[test]
    fn ordering_symbols_is_a_type_error() {
        let s = schema();
        let state = DatabaseState::from_tuples(s, [Tuple::new("R", [Value::sym("a")])]).unwrap();
        let q = ConjunctiveQuery::new(
            "q",
            Body::new(
                vec![Atom::new("R", [Term::var("x")])],
                vec![],
                vec![Comparison::new(Term::var("x"), CmpOp::Gt, Term::constant(1))],
            ),
        )
        .unwrap();
        assert!(matches!(eval_boolean(&q, &state), Err(Error::Type(_))));
    }

    #[test]
    fn aggregate_arity_rules() {
        let body = Body::new(vec![Atom::new("R", [Term::var("x")])], vec![], vec![]);
        assert!(AggregateQuery::new("q", AggregateFn::Sum, vec![], body.clone(), AggCmp::Gt, Value::Int(1)).is_err());
        assert!(AggregateQuery::new(
            "q",
            AggregateFn::CountDistinct,
            vec![],
            body.clone(),
            AggCmp::Gt,
            Value::Int(1)
        )
        .is_err());
        assert!(AggregateQuery::new(
            "q",
            AggregateFn::Max,
            vec!["y".into()],
            body.clone(),
            AggCmp::Gt,
            Value::Int(1)
        )
        .is_err());
        assert!(AggregateQuery::new(
            "q",
            AggregateFn::Max,
            vec!["x".into()],
            body,
            AggCmp::Gt,
            Value::sym("a")
        )
        .is_err());
    }
}
