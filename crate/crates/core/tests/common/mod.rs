//! Random instance generators and brute-force oracles shared by the
//! integration tests and the acceptance suite.
//!
//! The oracles only use the model types (schema positions, tuples, query
//! ASTs); world enumeration, constraint checking and query evaluation are
//! reimplemented here so they do not share code with the engine.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use bcdb_core::denial::DenialConstraint;
use bcdb_core::query::{AggCmp, AggregateFn, AggregateQuery, Atom, Body, CmpOp, Comparison, ConjunctiveQuery, Term};
use bcdb_core::reductions::CnfFormula;
use bcdb_core::sepgen::SeparationSpec;
use bcdb_core::{
    BlockchainDatabase, ConstraintSet, DatabaseState, FunctionalDependency, InclusionDependency, RelationSchema,
    Schema, Transaction, Tuple, Value,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Independent constraint checking and world enumeration
// ---------------------------------------------------------------------------

pub type TupleSet = BTreeSet<Tuple>;

fn positions(schema: &Schema, rel: &str, attrs: &[String]) -> Vec<usize> {
    schema.get(rel).unwrap().positions(attrs).unwrap()
}

pub fn fds_hold(schema: &Schema, ic: &ConstraintSet, state: &TupleSet) -> bool {
    for fd in ic.fds() {
        let lhs = positions(schema, fd.relation(), fd.lhs());
        let rhs = positions(schema, fd.relation(), fd.rhs());
        let rows: Vec<&Tuple> = state.iter().filter(|t| t.relation == fd.relation()).collect();
        for (i, a) in rows.iter().enumerate() {
            for b in &rows[i + 1..] {
                let same = |ps: &[usize]| ps.iter().all(|&p| a.values[p] == b.values[p]);
                if same(&lhs) && !same(&rhs) {
                    return false;
                }
            }
        }
    }
    true
}

pub fn inds_hold(schema: &Schema, ic: &ConstraintSet, state: &TupleSet) -> bool {
    for ind in ic.inds() {
        let sp = positions(schema, ind.source(), ind.source_attrs());
        let tp = positions(schema, ind.target(), ind.target_attrs());
        for t in state.iter().filter(|t| t.relation == ind.source()) {
            let found = state
                .iter()
                .any(|u| u.relation == ind.target() && sp.iter().zip(&tp).all(|(&a, &b)| t.values[a] == u.values[b]));
            if !found {
                return false;
            }
        }
    }
    true
}

pub fn satisfies(schema: &Schema, ic: &ConstraintSet, state: &TupleSet) -> bool {
    fds_hold(schema, ic, state) && inds_hold(schema, ic, state)
}

pub fn base_tuples(db: &BlockchainDatabase) -> TupleSet {
    db.state().tuples().collect()
}

/// Every possible world, as a tuple set, by exploring append sequences
/// over label masks.
pub fn all_worlds(db: &BlockchainDatabase) -> BTreeSet<TupleSet> {
    let txns = db.pending();
    assert!(txns.len() < 32);
    let schema = db.schema();
    let ic = db.constraints();
    let base = base_tuples(db);
    let state_of = |mask: u32| -> TupleSet {
        let mut s = base.clone();
        for (i, t) in txns.iter().enumerate() {
            if mask & (1 << i) != 0 {
                s.extend(t.tuples().iter().cloned());
            }
        }
        s
    };
    let mut seen = BTreeSet::from([0u32]);
    let mut stack = vec![0u32];
    while let Some(m) = stack.pop() {
        let cur = state_of(m);
        for (i, t) in txns.iter().enumerate() {
            if m & (1 << i) != 0 {
                continue;
            }
            let mut next = cur.clone();
            next.extend(t.tuples().iter().cloned());
            if satisfies(schema, ic, &next) {
                let nm = m | (1 << i);
                if seen.insert(nm) {
                    stack.push(nm);
                }
            }
        }
    }
    seen.into_iter().map(state_of).collect()
}

/// Labels of the pending transactions contained in a state.
pub fn labels_in(db: &BlockchainDatabase, state: &TupleSet) -> BTreeSet<String> {
    db.pending()
        .iter()
        .filter(|t| t.tuples().iter().all(|x| state.contains(x)))
        .map(|t| t.label().to_string())
        .collect()
}

// ---------------------------------------------------------------------------
// Independent query evaluation
// ---------------------------------------------------------------------------

type Env = BTreeMap<String, Value>;

fn resolve(t: &Term, env: &Env) -> Option<Value> {
    match t {
        Term::Const(c) => Some(c.clone()),
        Term::Var(v) => env.get(v).cloned(),
    }
}

fn ground(a: &Atom, env: &Env) -> Tuple {
    Tuple::new(
        a.relation.clone(),
        a.terms.iter().map(|t| resolve(t, env).expect("safe query")),
    )
}

fn num(v: &Value) -> Option<rust_decimal::Decimal> {
    v.as_decimal()
}

fn compare(c: &Comparison, env: &Env) -> bool {
    let (l, r) = (resolve(&c.left, env).unwrap(), resolve(&c.right, env).unwrap());
    match c.op {
        CmpOp::Eq => l == r,
        CmpOp::Ne => l != r,
        CmpOp::Lt => matches!((num(&l), num(&r)), (Some(a), Some(b)) if a < b),
        CmpOp::Gt => matches!((num(&l), num(&r)), (Some(a), Some(b)) if a > b),
    }
}

/// All assignments satisfying the body, by nested-loop join over the
/// positive atoms in order.
pub fn assignments(body: &Body, state: &TupleSet) -> Vec<Env> {
    fn go(i: usize, body: &Body, state: &TupleSet, env: &mut Env, out: &mut Vec<Env>) {
        if i == body.positive.len() {
            let negs_ok = body.negated.iter().all(|a| !state.contains(&ground(a, env)));
            if negs_ok && body.comparisons.iter().all(|c| compare(c, env)) {
                out.push(env.clone());
            }
            return;
        }
        let atom = &body.positive[i];
        for t in state
            .iter()
            .filter(|t| t.relation == atom.relation && t.values.len() == atom.terms.len())
        {
            let mut added = Vec::new();
            let mut ok = true;
            for (term, v) in atom.terms.iter().zip(&t.values) {
                match term {
                    Term::Const(c) => ok &= c == v,
                    Term::Var(x) => match env.get(x) {
                        Some(b) => ok &= b == v,
                        None => {
                            env.insert(x.clone(), v.clone());
                            added.push(x.clone());
                        }
                    },
                }
                if !ok {
                    break;
                }
            }
            if ok {
                go(i + 1, body, state, env, out);
            }
            for x in added {
                env.remove(&x);
            }
        }
    }
    let mut out = Vec::new();
    go(0, body, state, &mut Env::new(), &mut out);
    out.sort();
    out.dedup();
    out
}

fn agg_true(q: &AggregateQuery, state: &TupleSet) -> bool {
    let bag: Vec<Vec<Value>> = assignments(q.body(), state)
        .iter()
        .map(|env| q.vars().iter().map(|v| env[v].clone()).collect())
        .collect();
    if bag.is_empty() {
        return false;
    }
    let value = match q.func() {
        AggregateFn::Count => rust_decimal::Decimal::from(bag.len()),
        AggregateFn::CountDistinct => rust_decimal::Decimal::from(bag.iter().collect::<BTreeSet<_>>().len()),
        AggregateFn::Sum => bag.iter().map(|r| num(&r[0]).unwrap()).sum(),
        AggregateFn::Max => bag.iter().map(|r| num(&r[0]).unwrap()).max().unwrap(),
    };
    let c = num(q.threshold()).unwrap();
    match q.cmp() {
        AggCmp::Eq => value == c,
        AggCmp::Lt => value < c,
        AggCmp::Gt => value > c,
    }
}

pub fn query_true(q: &DenialConstraint, state: &TupleSet) -> bool {
    match q {
        DenialConstraint::Conjunctive(cq) => !assignments(cq.body(), state).is_empty(),
        DenialConstraint::Aggregate(aq) => agg_true(aq, state),
    }
}

/// `D |= ¬q`: the query is false in every possible world.
pub fn holds(db: &BlockchainDatabase, q: &DenialConstraint) -> bool {
    all_worlds(db).iter().all(|w| !query_true(q, w))
}

// ---------------------------------------------------------------------------
// Independent separation check
// ---------------------------------------------------------------------------

pub fn separating(db: &BlockchainDatabase, t: &TupleSet, spec: &SeparationSpec) -> bool {
    let ext = if t.is_empty() {
        db.clone()
    } else {
        let mut label = "SEPCHECK".to_string();
        while db.transaction(&label).is_ok() {
            label.push('_');
        }
        db.with_pending([Transaction::new(label, t.iter().cloned()).unwrap()])
            .unwrap()
    };
    let need: TupleSet = spec
        .t_in
        .iter()
        .flat_map(|l| db.transaction(l).unwrap().tuples().iter().cloned())
        .chain(t.iter().cloned())
        .collect();
    let worlds = all_worlds(&ext);
    let consistent = worlds.iter().any(|w| need.is_subset(w));
    let inconsistent = worlds.iter().filter(|w| t.is_subset(w)).all(|w| {
        spec.t_out
            .iter()
            .all(|l| !db.transaction(l).unwrap().tuples().is_subset(w))
    });
    consistent && inconsistent
}

// ---------------------------------------------------------------------------
// Source-problem oracles
// ---------------------------------------------------------------------------

pub fn satisfiable(phi: &CnfFormula) -> bool {
    let m = phi.vars();
    (0u32..1 << m).any(|bits| {
        phi.clauses().iter().all(|c| {
            c.iter().any(|&l| {
                let v = (bits >> (l.unsigned_abs() - 1)) & 1 == 1;
                if l > 0 {
                    v
                } else {
                    !v
                }
            })
        })
    })
}

pub fn has_hitting_set(universe: &BTreeSet<Value>, sets: &[BTreeSet<Value>], k: usize) -> bool {
    let elems: Vec<&Value> = universe.iter().collect();
    let n = elems.len();
    (0u32..1 << n).any(|bits| {
        bits.count_ones() as usize <= k
            && sets
                .iter()
                .all(|s| (0..n).any(|i| bits & (1 << i) != 0 && s.contains(elems[i])))
    })
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Empty,
    KeyFd,
    Ind,
    Mixed,
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub relations: usize,
    pub txns: usize,
    pub tuples_per_txn: usize,
    pub domain: i64,
    pub base: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            relations: 3,
            txns: 8,
            tuples_per_txn: 4,
            domain: 4,
            base: 4,
        }
    }
}

const RELATIONS: [(&str, &[&str]); 3] = [("R", &["A", "B"]), ("S", &["A", "B"]), ("U", &["A", "B", "C"])];

pub fn gen_schema(rng: &mut StdRng, max_relations: usize) -> Arc<Schema> {
    let n = rng.gen_range(1..=max_relations.clamp(1, 3));
    let mut s = Schema::new();
    for (name, attrs) in &RELATIONS[..n] {
        s.add(RelationSchema::new(*name, attrs.iter().copied()).unwrap())
            .unwrap();
    }
    Arc::new(s)
}

fn gen_fds(rng: &mut StdRng, s: &Schema, ic: &mut ConstraintSet, at_least_one: bool) {
    let rels: Vec<&RelationSchema> = s.relations().collect();
    for (i, r) in rels.iter().enumerate() {
        if !(rng.gen_bool(0.6) || (at_least_one && i == rels.len() - 1 && ic.fds().count() == 0)) {
            continue;
        }
        let fd = if rng.gen_bool(0.5) {
            FunctionalDependency::key(s, r.name(), &["A"]).unwrap()
        } else {
            let rhs = if r.arity() == 3 && rng.gen_bool(0.5) { "C" } else { "B" };
            FunctionalDependency::new(s, r.name(), &["A"], &[rhs]).unwrap()
        };
        ic.add_fd(fd);
    }
}

fn gen_inds(rng: &mut StdRng, s: &Schema, ic: &mut ConstraintSet) {
    let rels: Vec<&RelationSchema> = s.relations().collect();
    let want = rng.gen_range(1..=2);
    while ic.inds().count() < want {
        let src = rels.choose(rng).unwrap();
        let tgt = rels.choose(rng).unwrap();
        let width = if rng.gen_bool(0.3) { 2 } else { 1 };
        let mut sa: Vec<&String> = src.attributes().iter().collect();
        let mut ta: Vec<&String> = tgt.attributes().iter().collect();
        sa.shuffle(rng);
        ta.shuffle(rng);
        let sa: Vec<&str> = sa[..width].iter().map(|a| a.as_str()).collect();
        let ta: Vec<&str> = ta[..width].iter().map(|a| a.as_str()).collect();
        if src.name() != tgt.name() || sa != ta {
            ic.add_ind(InclusionDependency::new(s, src.name(), &sa, tgt.name(), &ta).unwrap());
        }
    }
}

pub fn gen_constraints(rng: &mut StdRng, s: &Schema, mode: Mode) -> ConstraintSet {
    let mut ic = ConstraintSet::new();
    match mode {
        Mode::Empty => {}
        Mode::KeyFd => gen_fds(rng, s, &mut ic, true),
        Mode::Ind => gen_inds(rng, s, &mut ic),
        Mode::Mixed => {
            gen_fds(rng, s, &mut ic, true);
            gen_inds(rng, s, &mut ic);
        }
    }
    ic
}

pub fn gen_tuple(rng: &mut StdRng, s: &Schema, domain: i64) -> Tuple {
    let rels: Vec<&RelationSchema> = s.relations().collect();
    let r = rels.choose(rng).unwrap();
    Tuple::new(r.name(), (0..r.arity()).map(|_| Value::Int(rng.gen_range(0..domain))))
}

pub fn gen_db(rng: &mut StdRng, mode: Mode, shape: Shape) -> BlockchainDatabase {
    let s = gen_schema(rng, shape.relations);
    let ic = gen_constraints(rng, &s, mode);
    let mut base = TupleSet::new();
    for _ in 0..rng.gen_range(0..=shape.base) {
        let mut next = base.clone();
        next.insert(gen_tuple(rng, &s, shape.domain));
        if satisfies(&s, &ic, &next) {
            base = next;
        }
    }
    let n = rng.gen_range(1..=shape.txns);
    let txns: Vec<Transaction> = (1..=n)
        .map(|i| {
            let k = rng.gen_range(1..=shape.tuples_per_txn);
            Transaction::new(format!("T{i}"), (0..k).map(|_| gen_tuple(rng, &s, shape.domain))).unwrap()
        })
        .collect();
    let state = DatabaseState::from_tuples(s, base).unwrap();
    BlockchainDatabase::new(state, ic, txns).unwrap()
}

const VARS: [&str; 4] = ["x", "y", "z", "w"];

fn gen_term(rng: &mut StdRng, domain: i64, vars: &[&str]) -> Term {
    if !vars.is_empty() && rng.gen_bool(0.75) {
        Term::var(*vars.choose(rng).unwrap())
    } else {
        Term::Const(Value::Int(rng.gen_range(0..domain)))
    }
}

fn atom_over(rng: &mut StdRng, s: &Schema, domain: i64, vars: &[&str]) -> Atom {
    let rels: Vec<&RelationSchema> = s.relations().collect();
    let r = rels.choose(rng).unwrap();
    Atom::new(r.name(), (0..r.arity()).map(|_| gen_term(rng, domain, vars)))
}

/// A safe body with `k` positive atoms, optionally one negated atom, and an
/// optional comparison.
pub fn gen_body(rng: &mut StdRng, s: &Schema, domain: i64, k: usize, negation: bool) -> Body {
    let positive: Vec<Atom> = (0..k).map(|_| atom_over(rng, s, domain, &VARS)).collect();
    let bound: Vec<&str> = {
        let b = Body::new(positive.clone(), vec![], vec![]);
        let vs: BTreeSet<&str> = b.variables();
        VARS.iter().copied().filter(|v| vs.contains(v)).collect()
    };
    let negated = if negation {
        vec![atom_over(rng, s, domain, &bound)]
    } else {
        vec![]
    };
    let mut comparisons = Vec::new();
    if !bound.is_empty() && rng.gen_bool(0.3) {
        let op = *[CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Gt].choose(rng).unwrap();
        let left = Term::var(*bound.choose(rng).unwrap());
        comparisons.push(Comparison::new(left, op, gen_term(rng, domain, &bound)));
    }
    Body::new(positive, negated, comparisons)
}

pub fn gen_cq(rng: &mut StdRng, s: &Schema, domain: i64, k: usize, negation: bool) -> ConjunctiveQuery {
    ConjunctiveQuery::new("q", gen_body(rng, s, domain, k, negation)).unwrap()
}

pub fn gen_agg(
    rng: &mut StdRng,
    s: &Schema,
    domain: i64,
    func: AggregateFn,
    cmp: AggCmp,
    negation: bool,
) -> AggregateQuery {
    loop {
        let k = rng.gen_range(1..=2);
        let body = gen_body(rng, s, domain, k, negation);
        let vars: Vec<String> = VARS
            .iter()
            .filter(|v| body.variables().contains(*v))
            .map(|v| v.to_string())
            .collect();
        let chosen: Vec<String> = match func {
            AggregateFn::Count => vec![],
            _ if vars.is_empty() => continue,
            AggregateFn::CountDistinct => {
                let n = rng.gen_range(1..=vars.len().min(2));
                vars.choose_multiple(rng, n).cloned().collect()
            }
            _ => vec![vars.choose(rng).unwrap().clone()],
        };
        let threshold = Value::Int(rng.gen_range(0..=domain + 2));
        return AggregateQuery::new("q", func, chosen, body, cmp, threshold).unwrap();
    }
}

/// Random CNF with clause width 1..=3 over `vars` variables.
pub fn gen_cnf(rng: &mut StdRng, vars: usize, clauses: usize) -> CnfFormula {
    let cs = (0..clauses)
        .map(|_| {
            let w = rng.gen_range(1..=3.min(vars));
            let mut picked: Vec<usize> = (1..=vars).collect();
            picked.shuffle(rng);
            picked[..w]
                .iter()
                .map(|&v| if rng.gen_bool(0.5) { v as i64 } else { -(v as i64) })
                .collect()
        })
        .collect();
    CnfFormula::new(vars, cs).unwrap()
}

/// Disjoint random `t_in` / `t_out` over the pending labels; `t_out` is
/// non-empty.
pub fn gen_spec(rng: &mut StdRng, db: &BlockchainDatabase, bound: Option<usize>) -> SeparationSpec {
    let mut labels: Vec<&str> = db.pending().iter().map(|t| t.label()).collect();
    labels.shuffle(rng);
    let n_out = rng.gen_range(1..=labels.len().min(2));
    let n_in = rng.gen_range(0..=(labels.len() - n_out).min(2));
    SeparationSpec::new(
        labels[n_out..n_out + n_in].iter().copied(),
        labels[..n_out].iter().copied(),
        bound,
    )
}

/// Strict non-empty subsets of `t` (for minimality checks on small `T`).
pub fn strict_subsets(t: &TupleSet) -> Vec<TupleSet> {
    let items: Vec<&Tuple> = t.iter().collect();
    let n = items.len();
    (0u32..(1 << n) - 1)
        .map(|bits| {
            (0..n)
                .filter(|i| bits & (1 << i) != 0)
                .map(|i| items[i].clone())
                .collect()
        })
        .collect()
}
