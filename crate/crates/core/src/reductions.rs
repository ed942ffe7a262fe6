//! Hardness constructions turned into instance generators. Each instance
//! records how its answer corresponds to the source problem's answer, so a
//! test can pair it with an independent solver for the source problem.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::chain::{BlockchainDatabase, Transaction};
use crate::constraints::{ConstraintSet, FunctionalDependency, InclusionDependency};
use crate::denial::DenialConstraint;
use crate::error::{Error, Result};
use crate::query::{AggCmp, AggregateFn, AggregateQuery, Atom, Body, CmpOp, Comparison, ConjunctiveQuery, Term};
use crate::schema::{DatabaseState, RelationSchema, Schema, Tuple};
use crate::sepgen::SeparationSpec;
use crate::value::Value;

/// A CNF formula over variables `1..=vars`; literal `-i` negates variable `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    vars: usize,
    clauses: Vec<Vec<i64>>,
}

impl CnfFormula {
    pub fn new(vars: usize, clauses: Vec<Vec<i64>>) -> Result<Self> {
        if clauses.is_empty() {
            return Err(Error::InvalidSpec("formula has no clauses".into()));
        }
        for (i, c) in clauses.iter().enumerate() {
            if c.is_empty() || c.len() > 3 {
                return Err(Error::InvalidSpec(format!(
                    "clause {} has {} literals; expected 1 to 3",
                    i + 1,
                    c.len()
                )));
            }
            if let Some(l) = c.iter().find(|l| **l == 0 || l.unsigned_abs() as usize > vars) {
                return Err(Error::InvalidSpec(format!("literal {l} out of range 1..={vars}")));
            }
        }
        Ok(CnfFormula { vars, clauses })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn clauses(&self) -> &[Vec<i64>] {
        &self.clauses
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    Violated,
    Holds,
    Separable,
    NotSeparable,
}

/// How the instance's answer follows from the source problem's answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correspondence {
    /// The denial constraint is violated iff the formula is satisfiable.
    ViolatedIffSatisfiable,
    /// A bounded separating transaction exists iff the source instance is a
    /// yes-instance (hitting set of size `k`, satisfiable formula).
    SeparableIffYes,
    /// A separating transaction exists iff the dependency is not implied.
    SeparableIffNotImplied,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Problem {
    Denial(DenialConstraint),
    Separation(SeparationSpec),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionInstance {
    pub db: BlockchainDatabase,
    pub problem: Problem,
    pub correspondence: Correspondence,
}

impl ReductionInstance {
    /// The expected answer given the source problem's answer.
    pub fn expected(&self, source_yes: bool) -> Expected {
        match self.correspondence {
            Correspondence::ViolatedIffSatisfiable if source_yes => Expected::Violated,
            Correspondence::ViolatedIffSatisfiable => Expected::Holds,
            Correspondence::SeparableIffYes if source_yes => Expected::Separable,
            Correspondence::SeparableIffYes => Expected::NotSeparable,
            Correspondence::SeparableIffNotImplied if source_yes => Expected::NotSeparable,
            Correspondence::SeparableIffNotImplied => Expected::Separable,
        }
    }
}

fn schema_of(relations: &[(&str, &[&str])]) -> Result<Arc<Schema>> {
    let mut s = Schema::new();
    for (name, attrs) in relations {
        s.add(RelationSchema::new(*name, attrs.iter().copied())?)?;
    }
    Ok(Arc::new(s))
}

fn sym(s: &str) -> Value {
    Value::sym(s)
}

fn var_sym(i: usize) -> Value {
    Value::sym(format!("x{i}"))
}

fn truth(lit: i64) -> Value {
    sym(if lit > 0 { "t" } else { "f" })
}

fn tuple(rel: &str, vals: impl IntoIterator<Item = Value>) -> Tuple {
    Tuple::new(rel, vals)
}

fn ind(s: &Schema, src: &str, sa: &[&str], tgt: &str, ta: &[&str]) -> Result<InclusionDependency> {
    InclusionDependency::new(s, src, sa, tgt, ta)
}

/// One transaction per literal occurrence: `{clause(i), Val(x, t|f)}`.
fn literal_transactions(phi: &CnfFormula, clause_rel: &str, var: impl Fn(usize) -> Value) -> Result<Vec<Transaction>> {
    let mut out = Vec::new();
    for (i, c) in phi.clauses.iter().enumerate() {
        for (j, &l) in c.iter().enumerate() {
            out.push(Transaction::new(
                format!("L{}_{}", i + 1, j + 1),
                [
                    tuple(clause_rel, [Value::Int(i as i64 + 1)]),
                    tuple("Val", [var(l.unsigned_abs() as usize), truth(l)]),
                ],
            )?);
        }
    }
    Ok(out)
}

fn sat_transaction(phi: &CnfFormula) -> Result<Transaction> {
    Transaction::new(
        "SAT",
        std::iter::once(tuple("Sat", [sym("t")]))
            .chain((1..=phi.clauses.len()).map(|i| tuple("Clause2", [Value::Int(i as i64)]))),
    )
}

fn v(x: &str) -> Term {
    Term::var(x)
}

fn c(x: impl Into<Value>) -> Term {
    Term::Const(x.into())
}

/// Conjunctive denial under a key and an inclusion dependency:
/// `q() ← Sat(t)` is violated iff the formula is satisfiable.
pub fn sat_to_denial_key_ind(phi: &CnfFormula) -> Result<ReductionInstance> {
    let s = schema_of(&[
        ("Clause1", &["C"]),
        ("Clause2", &["C"]),
        ("Sat", &["S"]),
        ("Val", &["X", "B"]),
    ])?;
    let ic = ConstraintSet::new()
        .with_fd(FunctionalDependency::key(&s, "Val", &["X"])?)
        .with_ind(ind(&s, "Clause2", &["C"], "Clause1", &["C"])?);
    let mut pending = literal_transactions(phi, "Clause1", var_sym)?;
    pending.push(sat_transaction(phi)?);
    let db = BlockchainDatabase::new(DatabaseState::new(s), ic, pending)?;
    let q = ConjunctiveQuery::new("q", Body::new(vec![Atom::new("Sat", [c("t")])], vec![], vec![]))?;
    Ok(ReductionInstance {
        db,
        problem: Problem::Denial(q.into()),
        correspondence: Correspondence::ViolatedIffSatisfiable,
    })
}

fn triangular(n: i64) -> i64 {
    n * (n + 1) / 2
}

/// Positive aggregate over clauses under a key on `Val`; the threshold asks
/// for every clause to be present.
pub fn sat_to_denial_agg_count(phi: &CnfFormula, func: AggregateFn, cmp: AggCmp) -> Result<ReductionInstance> {
    let n = phi.clauses.len() as i64;
    let full = match func {
        AggregateFn::Count | AggregateFn::CountDistinct => n,
        AggregateFn::Sum => triangular(n),
        AggregateFn::Max => {
            return Err(Error::InvalidQuery(
                "this construction covers count, countd and sum".into(),
            ))
        }
    };
    let threshold = match cmp {
        AggCmp::Gt => full - 1,
        AggCmp::Eq => full,
        AggCmp::Lt => return Err(Error::InvalidQuery("this construction covers > and =".into())),
    };
    let s = schema_of(&[("Clause", &["C"]), ("Val", &["X", "B"])])?;
    let ic = ConstraintSet::new().with_fd(FunctionalDependency::key(&s, "Val", &["X"])?);
    let db = BlockchainDatabase::new(DatabaseState::new(s), ic, literal_transactions(phi, "Clause", var_sym)?)?;
    let vars = if func == AggregateFn::Count {
        vec![]
    } else {
        vec!["i".to_string()]
    };
    let body = Body::new(vec![Atom::new("Clause", [v("i")])], vec![], vec![]);
    let q = AggregateQuery::new("q", func, vars, body, cmp, Value::Int(threshold))?;
    Ok(ReductionInstance {
        db,
        problem: Problem::Denial(q.into()),
        correspondence: Correspondence::ViolatedIffSatisfiable,
    })
}

/// Aggregate denials under one inclusion dependency. With `<` or `=` the
/// query detects a variable holding both truth values besides the dummy
/// variable 0; with `>` it uses negation to count the variables holding
/// exactly one value. Variables are encoded as integers so that SUM and MAX
/// apply to them.
pub fn sat_to_denial_agg_ind(phi: &CnfFormula, func: AggregateFn, cmp: AggCmp) -> Result<ReductionInstance> {
    let with_truth = cmp == AggCmp::Gt;
    if with_truth && func == AggregateFn::Max {
        return Err(Error::InvalidQuery(
            "max with > is not covered by this construction".into(),
        ));
    }
    let mut rels: Vec<(&str, &[&str])> = vec![
        ("Clause1", &["C"]),
        ("Clause2", &["C"]),
        ("Sat", &["S"]),
        ("Val", &["X", "B"]),
    ];
    if with_truth {
        rels.push(("Truth", &["T"]));
    }
    let s = schema_of(&rels)?;
    let ic = ConstraintSet::new().with_ind(ind(&s, "Clause2", &["C"], "Clause1", &["C"])?);
    let mut base = vec![
        tuple("Val", [Value::Int(0), sym("t")]),
        tuple("Val", [Value::Int(0), sym("f")]),
    ];
    let int_var = |i: usize| Value::Int(i as i64);
    let mut pending = literal_transactions(phi, "Clause1", int_var)?;
    pending.push(sat_transaction(phi)?);
    if with_truth {
        base.push(tuple("Truth", [sym("t")]));
        base.push(tuple("Truth", [sym("f")]));
        for x in 1..=phi.vars {
            for b in ["t", "f"] {
                pending.push(Transaction::new(
                    format!("V{x}{b}"),
                    [tuple("Val", [int_var(x), sym(b)])],
                )?);
            }
        }
    }
    let state = DatabaseState::from_tuples(s.clone(), base)?;
    let db = BlockchainDatabase::new(state, ic, pending)?;

    let vars = if func == AggregateFn::Count {
        vec![]
    } else {
        vec!["x".to_string()]
    };
    let (body, threshold) = if with_truth {
        let m = phi.vars as i64;
        let body = Body::new(
            vec![
                Atom::new("Sat", [c("t")]),
                Atom::new("Val", [v("x"), v("b")]),
                Atom::new("Truth", [v("b2")]),
            ],
            vec![Atom::new("Val", [v("x"), v("b2")])],
            vec![],
        );
        let t = match func {
            AggregateFn::Sum => triangular(m) - 1,
            _ => m - 1,
        };
        (body, t)
    } else {
        let body = Body::new(
            vec![
                Atom::new("Sat", [c("t")]),
                Atom::new("Val", [v("x"), v("b")]),
                Atom::new("Val", [v("x"), v("b2")]),
            ],
            vec![],
            vec![Comparison::new(v("b"), CmpOp::Ne, v("b2"))],
        );
        let below = match func {
            AggregateFn::Count => 3,
            AggregateFn::CountDistinct => 2,
            AggregateFn::Sum | AggregateFn::Max => 1,
        };
        (body, if cmp == AggCmp::Lt { below } else { below - 1 })
    };
    let q = AggregateQuery::new("q", func, vars, body, cmp, Value::Int(threshold))?;
    Ok(ReductionInstance {
        db,
        problem: Problem::Denial(q.into()),
        correspondence: Correspondence::ViolatedIffSatisfiable,
    })
}

/// `R(A, B)` with key `A`, one transaction `{R(x, 0) : x ∈ S}` per set, all
/// of them in `t_out`: a separating transaction of `k` tuples picks `k`
/// elements hitting every set.
pub fn hitting_set_to_ksep(
    universe: &BTreeSet<Value>,
    sets: &[BTreeSet<Value>],
    k: usize,
) -> Result<ReductionInstance> {
    if k == 0 {
        return Err(Error::InvalidSpec("k must be at least 1".into()));
    }
    let s = schema_of(&[("R", &["A", "B"])])?;
    let ic = ConstraintSet::new().with_fd(FunctionalDependency::key(&s, "R", &["A"])?);
    let mut pending = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        if let Some(x) = set.iter().find(|x| !universe.contains(x)) {
            return Err(Error::InvalidSpec(format!("{} is not in the universe", x.quoted())));
        }
        if set.is_empty() {
            return Err(Error::InvalidSpec(format!("set {} is empty", i + 1)));
        }
        pending.push(Transaction::new(
            format!("S{}", i + 1),
            set.iter().map(|x| tuple("R", [x.clone(), Value::Int(0)])),
        )?);
    }
    let out: Vec<String> = pending.iter().map(|t| t.label().to_string()).collect();
    let db = BlockchainDatabase::new(DatabaseState::new(s), ic, pending)?;
    let spec = SeparationSpec::new([], out.iter().map(String::as_str), Some(k));
    Ok(ReductionInstance {
        db,
        problem: Problem::Separation(spec),
        correspondence: Correspondence::SeparableIffYes,
    })
}

/// Acyclic inclusion dependencies only; `t_in` is the transaction holding
/// `Sat(x1, …, xm)`, and a separating transaction of `m` tuples is a truth
/// assignment satisfying every clause.
pub fn sat_to_ksep_ind(phi: &CnfFormula) -> Result<ReductionInstance> {
    let m = phi.vars;
    let sat_attrs: Vec<String> = (1..=m).map(|i| format!("X{i}")).collect();
    let mut schema = Schema::new();
    schema.add(RelationSchema::new("Assign1", ["X", "V"])?)?;
    schema.add(RelationSchema::new("Assign2", ["X", "V"])?)?;
    schema.add(RelationSchema::new("Clause1", ["C"])?)?;
    schema.add(RelationSchema::new("Clause2", ["C"])?)?;
    schema.add(RelationSchema::new("Sat", sat_attrs.iter().map(String::as_str))?)?;
    schema.add(RelationSchema::new("Truth", ["V"])?)?;
    let s = Arc::new(schema);

    let mut ic = ConstraintSet::new()
        .with_ind(ind(&s, "Assign1", &["V"], "Truth", &["V"])?)
        .with_ind(ind(&s, "Assign2", &["X", "V"], "Assign1", &["X", "V"])?)
        .with_ind(ind(&s, "Clause2", &["C"], "Clause1", &["C"])?);
    for a in &sat_attrs {
        ic.add_ind(InclusionDependency::new(&s, "Sat", &[a.as_str()], "Assign1", &["X"])?);
    }

    let state = DatabaseState::from_tuples(s.clone(), [tuple("Truth", [sym("t")]), tuple("Truth", [sym("f")])])?;
    let mut pending = Vec::new();
    for x in 1..=m {
        for (prefix, lit) in [("P", x as i64), ("N", -(x as i64))] {
            let clauses = phi
                .clauses
                .iter()
                .enumerate()
                .filter(|(_, c)| c.contains(&lit))
                .map(|(j, _)| tuple("Clause1", [Value::Int(j as i64 + 1)]));
            pending.push(Transaction::new(
                format!("{prefix}{x}"),
                std::iter::once(tuple("Assign2", [var_sym(x), truth(lit)])).chain(clauses),
            )?);
        }
    }
    pending.push(Transaction::new(
        "SAT",
        std::iter::once(tuple("Sat", (1..=m).map(var_sym)))
            .chain((1..=phi.clauses.len()).map(|i| tuple("Clause2", [Value::Int(i as i64)]))),
    )?);
    let db = BlockchainDatabase::new(state, ic, pending)?;
    Ok(ReductionInstance {
        db,
        problem: Problem::Separation(SeparationSpec::new(["SAT"], [], Some(m))),
        correspondence: Correspondence::SeparableIffYes,
    })
}

/// Embeds the implication problem `F ∪ I ⊨ f` for `f = R: X1 … Xn → A`: a
/// fresh relation `S(X1, …, Xn, A)` included in `R`, and one transaction with
/// two `S` tuples that agree on the `X`s and differ on `A`. A separating
/// transaction must extend `R` into an instance violating `f`.
pub fn undecidability_gadget(
    schema: &Schema,
    fds: &[FunctionalDependency],
    inds: &[InclusionDependency],
    f: &FunctionalDependency,
) -> Result<ReductionInstance> {
    if fds.is_empty() {
        return Err(Error::InvalidSpec(
            "the gadget needs at least one functional dependency".into(),
        ));
    }
    let rel = schema.get(f.relation())?;
    let a = match f
        .rhs()
        .iter()
        .filter(|a| !f.lhs().contains(a))
        .collect::<Vec<_>>()
        .as_slice()
    {
        [a] => (*a).clone(),
        _ => {
            return Err(Error::InvalidSpec(
                "the implied dependency needs exactly one new right-hand attribute".into(),
            ))
        }
    };
    let s_name = (0..)
        .map(|i| if i == 0 { "S".to_string() } else { format!("S{i}") })
        .find(|n| !schema.contains(n))
        .expect("some name is free");
    let mut s_attrs: Vec<String> = f.lhs().to_vec();
    s_attrs.push(a.clone());
    let mut full = schema.clone();
    full.add(RelationSchema::new(s_name.clone(), s_attrs.iter().map(String::as_str))?)?;
    let full = Arc::new(full);

    let mut ic = ConstraintSet::new();
    for fd in fds {
        ic.add_fd(FunctionalDependency::new(&full, fd.relation(), fd.lhs(), fd.rhs())?);
    }
    for i in inds {
        ic.add_ind(InclusionDependency::new(
            &full,
            i.source(),
            i.source_attrs(),
            i.target(),
            i.target_attrs(),
        )?);
    }
    ic.add_ind(InclusionDependency::new(
        &full,
        &s_name,
        &s_attrs,
        rel.name(),
        &s_attrs,
    )?);

    let xs: Vec<Value> = (1..=f.lhs().len()).map(var_sym).collect();
    let row = |a: &str| tuple(&s_name, xs.iter().cloned().chain([sym(a)]));
    let g = Transaction::new("G", [row("a1"), row("a2")])?;
    let db = BlockchainDatabase::new(DatabaseState::new(full), ic, [g])?;
    Ok(ReductionInstance {
        db,
        problem: Problem::Separation(SeparationSpec::new(["G"], [], None)),
        correspondence: Correspondence::SeparableIffNotImplied,
    })
}
