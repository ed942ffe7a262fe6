//! Denial-constraint satisfaction: does some possible world make `q` true?
//!
//! The exhaustive oracle enumerates every world. The specialised routes are
//! the polynomial algorithms for particular query classes and constraint
//! types, selected by [`classify`].

use std::fmt;

use serde::Serialize;

use crate::chain::{
    enumerate_possible_worlds, is_possible_world, maximal_world, world_from_state, BlockchainDatabase, Transaction,
    World,
};
use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::query::{
    eval_aggregate, eval_boolean, satisfying_assignments, AggCmp, AggregateFn, AggregateQuery, Assignment, Bag, Body,
    ConjunctiveQuery,
};
use crate::schema::DatabaseState;
use crate::value::Value;
use crate::witness::{Answer, Goal, Search};
use crate::worlds::{Mask, WorldSpace};

/// Subset scans with more positive atoms than this get a cost warning.
pub const SUBSET_WARNING_THRESHOLD: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DenialConstraint {
    Conjunctive(ConjunctiveQuery),
    Aggregate(AggregateQuery),
}

impl DenialConstraint {
    pub fn name(&self) -> &str {
        match self {
            DenialConstraint::Conjunctive(q) => q.name(),
            DenialConstraint::Aggregate(q) => q.name(),
        }
    }

    pub fn body(&self) -> &Body {
        match self {
            DenialConstraint::Conjunctive(q) => q.body(),
            DenialConstraint::Aggregate(q) => q.body(),
        }
    }

    pub fn is_positive(&self) -> bool {
        self.body().is_positive()
    }

    /// Whether the query is true on `state`, i.e. the state violates it.
    pub fn eval(&self, state: &DatabaseState) -> Result<bool> {
        match self {
            DenialConstraint::Conjunctive(q) => eval_boolean(q, state),
            DenialConstraint::Aggregate(q) => eval_aggregate(q, state),
        }
    }
}

impl From<ConjunctiveQuery> for DenialConstraint {
    fn from(q: ConjunctiveQuery) -> Self {
        DenialConstraint::Conjunctive(q)
    }
}

impl From<AggregateQuery> for DenialConstraint {
    fn from(q: AggregateQuery) -> Self {
        DenialConstraint::Aggregate(q)
    }
}

impl fmt::Display for DenialConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenialConstraint::Conjunctive(q) => write!(f, "{q}"),
            DenialConstraint::Aggregate(q) => write!(f, "{q}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Complexity {
    #[serde(rename = "PTIME")]
    Ptime,
    #[serde(rename = "CoNP-complete")]
    ConpComplete,
    #[serde(rename = "CoNP (upper bound)")]
    ConpUpperBound,
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Complexity::Ptime => "PTIME",
            Complexity::ConpComplete => "CoNP-complete",
            Complexity::ConpUpperBound => "CoNP (upper bound)",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Enumerate every possible world.
    Oracle,
    /// Unions of at most k transactions, k = number of positive atoms.
    CqFd,
    /// Per mapping: drop transactions holding negated atoms, absorb the rest.
    CqInd,
    /// The small-subset scan applied to an aggregate query.
    AggSmallSubset,
    /// Evaluate on the unique maximal world.
    AggMaximalWorld,
    /// The per-mapping scan with the aggregated value above the threshold.
    AggMaxMapping,
    /// Exact goal-directed search over transactions providing needed tuples.
    WitnessSearch,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Oracle => "oracle",
            Algorithm::CqFd => "cq_fd",
            Algorithm::CqInd => "cq_ind",
            Algorithm::AggSmallSubset => "agg_small_subset",
            Algorithm::AggMaximalWorld => "agg_maximal_world",
            Algorithm::AggMaxMapping => "agg_max_mapping",
            Algorithm::WitnessSearch => "witness_search",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub complexity: Complexity,
    pub algorithm: Algorithm,
    pub notes: Vec<String>,
}

impl Classification {
    fn new(complexity: Complexity, algorithm: Algorithm) -> Self {
        Classification {
            complexity,
            algorithm,
            notes: Vec::new(),
        }
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub holds: bool,
    pub counterexample: Option<World>,
    pub algorithm: Algorithm,
    pub complexity: Complexity,
    pub notes: Vec<String>,
}

const NEGATION_SUBSET_NOTE: &str =
    "small-subset scan is unsound for this comparator when the body has negated atoms; using the oracle";

/// Complexity row and algorithm for a query under constraints of the given
/// types. Combinations without a specialised algorithm get the oracle.
pub fn classify(q: &DenialConstraint, ic: &ConstraintSet) -> Classification {
    use Algorithm::*;
    use Complexity::*;
    let kinds = ic.kinds();
    let fdish = kinds.key || kinds.fd;
    match q {
        DenialConstraint::Conjunctive(cq) => {
            if !kinds.ind {
                let c = Classification::new(Ptime, CqFd);
                let k = cq.body().positive.len();
                if k > SUBSET_WARNING_THRESHOLD {
                    c.note(format!("{k} positive atoms: subset scan is O(n^{k})"))
                } else {
                    c
                }
            } else if !fdish {
                Classification::new(Ptime, CqInd)
            } else {
                Classification::new(ConpComplete, WitnessSearch)
            }
        }
        DenialConstraint::Aggregate(a) => {
            let positive = a.is_positive();
            let (func, cmp) = (a.func(), a.cmp());
            let search = if positive || cmp == AggCmp::Gt {
                WitnessSearch
            } else {
                Oracle
            };
            if fdish && kinds.ind {
                return Classification::new(ConpComplete, search);
            }
            if kinds.ind {
                return match cmp {
                    AggCmp::Gt if positive => Classification::new(Ptime, AggMaximalWorld),
                    AggCmp::Gt if func == AggregateFn::Max => Classification::new(Ptime, AggMaxMapping),
                    _ => Classification::new(ConpComplete, search),
                };
            }
            // key/fd only, or no constraints at all
            if kinds.is_empty() && cmp == AggCmp::Gt && positive {
                return Classification::new(Ptime, AggMaximalWorld);
            }
            let small_subset_row = func == AggregateFn::Max || cmp == AggCmp::Lt;
            if !small_subset_row {
                return if kinds.is_empty() {
                    Classification::new(ConpUpperBound, search)
                } else {
                    Classification::new(ConpComplete, search)
                };
            }
            if positive || (func == AggregateFn::Max && cmp == AggCmp::Gt) {
                Classification::new(Ptime, AggSmallSubset)
            } else {
                Classification::new(Ptime, Oracle).note(NEGATION_SUBSET_NOTE)
            }
        }
    }
}

/// A satisfying assignment of the positive part over `ℛ ∪ ⋃𝒯`, with the
/// pending bits it needs present (`pos`) and absent (`neg`).
struct Candidate {
    h: Assignment,
    pos: Mask,
    neg: Mask,
}

impl Candidate {
    fn valid_in(&self, world: &Mask) -> bool {
        self.pos.is_subset(world) && self.neg.is_disjoint(world)
    }
}

fn everything(db: &BlockchainDatabase) -> Result<DatabaseState> {
    db.state()
        .with_tuples(db.pending().iter().flat_map(Transaction::tuples))
}

/// Candidates with `h(N) ∩ ℛ = ∅`, in assignment order.
fn candidates(db: &BlockchainDatabase, body: &Body, space: &WorldSpace) -> Result<Vec<Candidate>> {
    let all = everything(db)?;
    let mut out = Vec::new();
    for h in satisfying_assignments(&body.without_negation(), &all)? {
        let (pos, neg) = body.ground(&h);
        if neg.iter().any(|t| db.state().contains(t)) {
            continue;
        }
        let pos = space
            .mask_of(db.state(), &pos)
            .expect("positive atoms were matched in ℛ ∪ 𝒯");
        let mut neg_mask = space.empty_mask();
        for t in &neg {
            if let Some(m) = space.mask_of(db.state(), [t]) {
                neg_mask.union_with(&m);
            }
        }
        out.push(Candidate { h, pos, neg: neg_mask });
    }
    Ok(out)
}

fn query_true_in(q: &DenialConstraint, cands: &[Candidate], world: &Mask) -> Result<bool> {
    match q {
        DenialConstraint::Conjunctive(_) => Ok(cands.iter().any(|c| c.valid_in(world))),
        DenialConstraint::Aggregate(a) => {
            let bag: Bag = cands
                .iter()
                .filter(|c| c.valid_in(world))
                .map(|c| a.project(&c.h))
                .collect();
            a.decide(&bag)
        }
    }
}

fn verdict(c: &Classification, algorithm: Algorithm, counterexample: Option<World>) -> Verdict {
    Verdict {
        holds: counterexample.is_none(),
        counterexample,
        algorithm,
        complexity: c.complexity,
        notes: c.notes.clone(),
    }
}

/// Exhaustive check over every possible world; the counterexample is the
/// first violating world in size-then-label order.
pub fn holds_denial_oracle(
    db: &BlockchainDatabase,
    q: &DenialConstraint,
    max_transactions: Option<usize>,
) -> Result<Verdict> {
    db.check_guard(max_transactions)?;
    let class = classify(q, db.constraints());
    let space = db.world_space()?;
    let cands = candidates(db, q.body(), &space)?;
    let mut worlds: Vec<(Vec<&str>, Mask)> = space
        .reachable()
        .into_iter()
        .map(|m| {
            let labels = space
                .contained(&m)
                .into_iter()
                .map(|i| db.pending()[i].label())
                .collect();
            (labels, m)
        })
        .collect();
    worlds.sort_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));
    for (_, m) in &worlds {
        if query_true_in(q, &cands, m)? {
            let w = world_from_state(db, space.materialize(db.state(), m));
            return Ok(verdict(&class, Algorithm::Oracle, Some(w)));
        }
    }
    Ok(verdict(&class, Algorithm::Oracle, None))
}

/// Index subsets of `0..n` of size at most `k`, size-ascending then
/// lexicographic.
fn small_subsets(n: usize, k: usize, mut visit: impl FnMut(&[usize]) -> Result<bool>) -> Result<()> {
    fn rec(
        n: usize,
        size: usize,
        start: usize,
        cur: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]) -> Result<bool>,
    ) -> Result<bool> {
        if cur.len() == size {
            return visit(cur);
        }
        for i in start..n {
            cur.push(i);
            let go = rec(n, size, i + 1, cur, visit)?;
            cur.pop();
            if !go {
                return Ok(false);
            }
        }
        Ok(true)
    }
    for size in 0..=k.min(n) {
        if !rec(n, size, 0, &mut Vec::new(), &mut visit)? {
            break;
        }
    }
    Ok(())
}

fn subset_scan(db: &BlockchainDatabase, q: &DenialConstraint) -> Result<Option<World>> {
    let k = q.body().positive.len();
    let mut found = None;
    small_subsets(db.pending().len(), k, |idx| {
        let mut state = db.state().clone();
        for &i in idx {
            state.extend(db.pending()[i].tuples())?;
        }
        if is_possible_world(db, &state)? && q.eval(&state)? {
            found = Some(world_from_state(db, state));
            return Ok(false);
        }
        Ok(true)
    })?;
    Ok(found)
}

fn require_key_fd(db: &BlockchainDatabase) -> Result<()> {
    if db.constraints().kinds().ind {
        return Err(Error::Dispatch("route requires key/fd constraints only".into()));
    }
    Ok(())
}

fn require_ind(db: &BlockchainDatabase) -> Result<()> {
    if db.constraints().fds().next().is_some() {
        return Err(Error::Dispatch("route requires inclusion dependencies only".into()));
    }
    Ok(())
}

/// Small-subset scan under key/fd constraints.
pub fn holds_denial_cq_fd(db: &BlockchainDatabase, q: &ConjunctiveQuery) -> Result<Verdict> {
    require_key_fd(db)?;
    let dq = DenialConstraint::Conjunctive(q.clone());
    let class = classify(&dq, db.constraints());
    Ok(verdict(&class, Algorithm::CqFd, subset_scan(db, &dq)?))
}

/// Per-mapping scan under inclusion dependencies: for every candidate `h`,
/// drop the transactions holding an atom of `h(N)`, absorb the others to a
/// fixpoint and test whether `h(P)` made it in.
fn mapping_scan(
    db: &BlockchainDatabase,
    body: &Body,
    accept: impl Fn(&Assignment) -> Result<bool>,
) -> Result<Option<World>> {
    let space = db.world_space()?;
    for c in candidates(db, body, &space)? {
        if !accept(&c.h)? {
            continue;
        }
        let reach = space.closure(|t| space.txns[t].is_disjoint(&c.neg));
        if c.pos.is_subset(&reach) {
            return Ok(Some(world_from_state(db, space.materialize(db.state(), &reach))));
        }
    }
    Ok(None)
}

pub fn holds_denial_cq_ind(db: &BlockchainDatabase, q: &ConjunctiveQuery) -> Result<Verdict> {
    require_ind(db)?;
    let class = classify(&DenialConstraint::Conjunctive(q.clone()), db.constraints());
    Ok(verdict(
        &class,
        Algorithm::CqInd,
        mapping_scan(db, q.body(), |_| Ok(true))?,
    ))
}

fn has_negative_number(db: &BlockchainDatabase) -> Result<bool> {
    let zero = Value::Int(0);
    for t in everything(db)?.tuples() {
        for v in &t.values {
            if v.is_numeric() && v.compare_ordered(&zero)?.is_lt() {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// The polynomial aggregate routes. Fails with a dispatch error when the
/// query/constraint combination has none, or when SUM meets negative
/// values (shrinking or growing a world can then move the sum either way).
pub fn holds_denial_agg(db: &BlockchainDatabase, q: &AggregateQuery) -> Result<Verdict> {
    let dq = DenialConstraint::Aggregate(q.clone());
    let class = classify(&dq, db.constraints());
    let sum_guard = || -> Result<()> {
        if q.func() == AggregateFn::Sum && has_negative_number(db)? {
            return Err(Error::Dispatch(
                "sum over data with negative values has no polynomial route".into(),
            ));
        }
        Ok(())
    };
    let found = match class.algorithm {
        Algorithm::AggSmallSubset => {
            require_key_fd(db)?;
            sum_guard()?;
            subset_scan(db, &dq)?
        }
        Algorithm::AggMaximalWorld => {
            require_ind(db)?;
            sum_guard()?;
            let w = maximal_world(db)?;
            if eval_aggregate(q, &w.state)? {
                Some(w)
            } else {
                None
            }
        }
        Algorithm::AggMaxMapping => {
            require_ind(db)?;
            let x = &q.vars()[0];
            mapping_scan(db, q.body(), |h| h[x].compare_ordered(q.threshold()).map(|o| o.is_gt()))?
        }
        _ => {
            return Err(Error::Dispatch(format!(
                "{} under {} has no polynomial route ({})",
                q.name(),
                db.constraints().kinds(),
                class.complexity
            )))
        }
    };
    Ok(verdict(&class, class.algorithm, found))
}

/// Goal-directed search (see the `witness` module). Exact for conjunctive
/// queries, positive aggregates and `>` aggregates; SUM over negative
/// values and the remaining rows are refused with a dispatch error.
pub fn holds_denial_witness(db: &BlockchainDatabase, q: &DenialConstraint) -> Result<Verdict> {
    let class = classify(q, db.constraints());
    let space = db.world_space()?;
    let answers: Vec<Answer> = candidates(db, q.body(), &space)?
        .into_iter()
        .map(|c| Answer {
            row: match q {
                DenialConstraint::Aggregate(a) => a.project(&c.h),
                DenialConstraint::Conjunctive(_) => Vec::new(),
            },
            pos: c.pos,
            neg: c.neg,
        })
        .collect();
    let goal = match q {
        DenialConstraint::Conjunctive(_) => Goal::Exists,
        DenialConstraint::Aggregate(a) => {
            if !a.is_positive() && a.cmp() != AggCmp::Gt {
                return Err(Error::Dispatch(
                    "witness search needs a positive body unless the comparison is >".into(),
                ));
            }
            if a.func() == AggregateFn::Sum && has_negative_number(db)? {
                return Err(Error::Dispatch(
                    "sum over data with negative values is not monotone".into(),
                ));
            }
            Goal::Aggregate(a)
        }
    };
    let found = Search::new(&space, &answers, goal, q.is_positive()).run()?;
    let w = found.map(|m| world_from_state(db, space.materialize(db.state(), &m)));
    Ok(verdict(&class, Algorithm::WitnessSearch, w))
}

/// Classify, then run the matching polynomial route or the oracle.
pub fn holds_denial(db: &BlockchainDatabase, q: &DenialConstraint, max_transactions: Option<usize>) -> Result<Verdict> {
    let class = classify(q, db.constraints());
    let routed = match (q, class.algorithm) {
        (_, Algorithm::Oracle) => None,
        (_, Algorithm::WitnessSearch) => Some(holds_denial_witness(db, q)),
        (DenialConstraint::Conjunctive(cq), Algorithm::CqFd) => Some(holds_denial_cq_fd(db, cq)),
        (DenialConstraint::Conjunctive(cq), Algorithm::CqInd) => Some(holds_denial_cq_ind(db, cq)),
        (DenialConstraint::Aggregate(a), _) => Some(holds_denial_agg(db, a)),
        (DenialConstraint::Conjunctive(_), _) => unreachable!("aggregate route for a conjunctive query"),
    };
    match routed {
        Some(Err(Error::Dispatch(why))) => {
            let mut v = holds_denial_oracle(db, q, max_transactions)?;
            v.notes.push(format!("{why}; using the oracle"));
            Ok(v)
        }
        Some(r) => r,
        None => holds_denial_oracle(db, q, max_transactions),
    }
}

/// Check against the database extended with hypothetical transactions.
pub fn holds_denial_dry_run(
    db: &BlockchainDatabase,
    q: &DenialConstraint,
    hypothetical: impl IntoIterator<Item = Transaction>,
    max_transactions: Option<usize>,
) -> Result<Verdict> {
    holds_denial(&db.with_pending(hypothetical)?, q, max_transactions)
}

/// Reference semantics: materialise every world and evaluate directly.
pub fn holds_denial_naive(
    db: &BlockchainDatabase,
    q: &DenialConstraint,
    max_transactions: Option<usize>,
) -> Result<bool> {
    for w in enumerate_possible_worlds(db, max_transactions)? {
        if q.eval(&w.state)? {
            return Ok(false);
        }
    }
    Ok(true)
}
