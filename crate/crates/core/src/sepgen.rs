//! Separating transactions: a transaction that can join a world with every
//! transaction of `t_in`, and can never share a world with any transaction
//! of `t_out`.
//!
//! Three generators: the fd chase for key/fd constraints, the shared-constant
//! chase for inclusion dependencies, and an exhaustive search over
//! transactions of at most `k` tuples. Unbounded generation under a mix of
//! fds and inclusion dependencies is undecidable and is refused.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::chain::{BlockchainDatabase, Transaction};
use crate::constraints::{satisfies, satisfies_fds, ConstraintSet};
use crate::error::{Error, Result};
use crate::schema::{DatabaseState, Tuple};
use crate::value::Value;
use crate::worlds::WorldSpace;

/// Default cap on the number of candidate transactions bounded search may
/// examine.
pub const DEFAULT_MAX_CANDIDATES: u64 = 10_000_000;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SeparationSpec {
    pub t_in: BTreeSet<String>,
    pub t_out: BTreeSet<String>,
    pub bound: Option<usize>,
}

impl SeparationSpec {
    pub fn new<'a>(
        t_in: impl IntoIterator<Item = &'a str>,
        t_out: impl IntoIterator<Item = &'a str>,
        bound: Option<usize>,
    ) -> Self {
        SeparationSpec {
            t_in: t_in.into_iter().map(str::to_string).collect(),
            t_out: t_out.into_iter().map(str::to_string).collect(),
            bound,
        }
    }

    pub fn validate(&self, db: &BlockchainDatabase) -> Result<()> {
        for l in self.t_in.iter().chain(&self.t_out) {
            db.transaction(l)?;
        }
        if let Some(l) = self.t_in.intersection(&self.t_out).next() {
            return Err(Error::InvalidSpec(format!("`{l}` is in both t_in and t_out")));
        }
        if self.bound == Some(0) {
            return Err(Error::InvalidSpec("bound must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    NoSeparatingTransaction,
    TinInconsistent,
    UndecidableConstraintMix,
    BoundExhausted,
}

impl FailureReason {
    pub fn tag(self) -> &'static str {
        match self {
            FailureReason::NoSeparatingTransaction => "no-separating-transaction",
            FailureReason::TinInconsistent => "t_in-inconsistent",
            FailureReason::UndecidableConstraintMix => "undecidable-constraint-mix",
            FailureReason::BoundExhausted => "bound-exhausted",
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SepRoute {
    Fd,
    Ind,
    Bounded,
}

impl SepRoute {
    pub fn tag(self) -> &'static str {
        match self {
            SepRoute::Fd => "fd",
            SepRoute::Ind => "ind",
            SepRoute::Bounded => "bounded",
        }
    }
}

impl fmt::Display for SepRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeparationResult {
    /// `domain_relative` marks bounded-search answers that are only complete
    /// with respect to the candidate constant domain.
    Found {
        transaction: Transaction,
        route: SepRoute,
        domain_relative: bool,
    },
    /// The empty transaction already separates; nothing needs issuing.
    TriviallySeparating { route: SepRoute },
    Failed {
        reason: FailureReason,
        route: Option<SepRoute>,
    },
}

impl SeparationResult {
    pub fn transaction(&self) -> Option<&Transaction> {
        match self {
            SeparationResult::Found { transaction, .. } => Some(transaction),
            _ => None,
        }
    }

    pub fn failure(&self) -> Option<FailureReason> {
        match self {
            SeparationResult::Failed { reason, .. } => Some(*reason),
            _ => None,
        }
    }

    /// The generated tuples; empty for the trivial success.
    pub fn tuples(&self) -> Option<BTreeSet<Tuple>> {
        match self {
            SeparationResult::Found { transaction, .. } => Some(transaction.tuples().clone()),
            SeparationResult::TriviallySeparating { .. } => Some(BTreeSet::new()),
            SeparationResult::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_transactions: Option<usize>,
    pub max_candidates: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_transactions: None,
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }
}

/// Hands out `fresh#n` constants, starting past any already in use.
#[derive(Debug, Clone)]
pub struct FreshGen {
    next: u64,
}

impl FreshGen {
    pub fn for_database(db: &BlockchainDatabase) -> Self {
        FreshGen {
            next: db.max_fresh().map_or(1, |n| n + 1),
        }
    }

    pub fn starting_at(next: u64) -> Self {
        FreshGen { next }
    }

    pub fn next_value(&mut self) -> Value {
        let v = Value::Fresh(self.next);
        self.next += 1;
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    KeyFd,
    Ind,
    Mixed,
}

fn mode_of(ic: &ConstraintSet) -> Mode {
    let k = ic.kinds();
    match (k.key || k.fd, k.ind) {
        (_, false) => Mode::KeyFd,
        (false, true) => Mode::Ind,
        (true, true) => Mode::Mixed,
    }
}

/// Separation checks for one database and one pair of label sets.
struct Checker<'a> {
    db: &'a BlockchainDatabase,
    ins: Vec<&'a Transaction>,
    outs: Vec<&'a Transaction>,
    max_transactions: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Consistent,
    Inconsistent,
    Both,
}

impl<'a> Checker<'a> {
    fn new(
        db: &'a BlockchainDatabase,
        t_in: &BTreeSet<String>,
        t_out: &BTreeSet<String>,
        max_transactions: Option<usize>,
    ) -> Result<Self> {
        Ok(Checker {
            db,
            ins: t_in.iter().map(|l| db.transaction(l)).collect::<Result<_>>()?,
            outs: t_out.iter().map(|l| db.transaction(l)).collect::<Result<_>>()?,
            max_transactions,
        })
    }

    fn check(&self, t: &BTreeSet<Tuple>, part: Part, oracle: bool) -> Result<bool> {
        let mode = if oracle {
            Mode::Mixed
        } else {
            mode_of(self.db.constraints())
        };
        let consistent = || match mode {
            Mode::KeyFd => self.consistent_fd(t),
            Mode::Ind => self.by_maximal_world(t, Part::Consistent),
            Mode::Mixed => self.by_enumeration(t, Part::Consistent),
        };
        let inconsistent = || match mode {
            Mode::KeyFd => self.inconsistent_fd(t),
            Mode::Ind => self.by_maximal_world(t, Part::Inconsistent),
            Mode::Mixed => self.by_enumeration(t, Part::Inconsistent),
        };
        match part {
            Part::Consistent => consistent(),
            Part::Inconsistent => inconsistent(),
            Part::Both => Ok(consistent()? && inconsistent()?),
        }
    }

    fn consistent_fd(&self, t: &BTreeSet<Tuple>) -> Result<bool> {
        let mut s = self.db.state().with_tuples(t)?;
        for x in &self.ins {
            s.extend(x.tuples())?;
        }
        satisfies_fds(&s, self.db.constraints())
    }

    fn inconsistent_fd(&self, t: &BTreeSet<Tuple>) -> Result<bool> {
        let base = self.db.state().with_tuples(t)?;
        for o in &self.outs {
            if satisfies_fds(&base.with_tuples(o.tuples())?, self.db.constraints())? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn space(&self, t: &BTreeSet<Tuple>) -> Result<WorldSpace> {
        let mut txns: Vec<&BTreeSet<Tuple>> = self.db.pending().iter().map(Transaction::tuples).collect();
        if !t.is_empty() {
            txns.push(t);
        }
        WorldSpace::build(self.db.state(), self.db.constraints(), txns)
    }

    fn by_maximal_world(&self, t: &BTreeSet<Tuple>, part: Part) -> Result<bool> {
        let space = self.space(t)?;
        let reach = space.closure(|_| true);
        let base = self.db.state();
        let tm = space.mask_of(base, t).expect("candidate is pending");
        match part {
            Part::Consistent => Ok(tm.is_subset(&reach)
                && self
                    .ins
                    .iter()
                    .all(|x| space.mask_of(base, x.tuples()).expect("pending").is_subset(&reach))),
            _ => Ok(!tm.is_subset(&reach)
                || self
                    .outs
                    .iter()
                    .all(|o| !space.mask_of(base, o.tuples()).expect("pending").is_subset(&reach))),
        }
    }

    fn by_enumeration(&self, t: &BTreeSet<Tuple>, part: Part) -> Result<bool> {
        let extra = usize::from(!t.is_empty());
        let limit = self.max_transactions.unwrap_or(crate::chain::DEFAULT_MAX_TRANSACTIONS);
        if self.db.pending().len() + extra > limit {
            return Err(Error::Guard(format!(
                "{} pending transactions exceed the enumeration limit of {limit}",
                self.db.pending().len() + extra
            )));
        }
        let space = self.space(t)?;
        let base = self.db.state();
        let tm = space.mask_of(base, t).expect("candidate is pending");
        let worlds = space.reachable();
        match part {
            Part::Consistent => {
                let mut need = tm;
                for x in &self.ins {
                    need.union_with(&space.mask_of(base, x.tuples()).expect("pending"));
                }
                Ok(worlds.iter().any(|w| need.is_subset(w)))
            }
            _ => {
                let outs: Vec<_> = self
                    .outs
                    .iter()
                    .map(|o| space.mask_of(base, o.tuples()).expect("pending"))
                    .collect();
                Ok(worlds
                    .iter()
                    .filter(|w| tm.is_subset(w))
                    .all(|w| outs.iter().all(|o| !o.is_subset(w))))
            }
        }
    }
}

/// Some possible world of `(ℛ, IC, 𝒯 ∪ {T})` contains `T ∪ ⋃t_in`. An empty
/// `t` stands for not issuing anything.
pub fn is_mutually_consistent(
    db: &BlockchainDatabase,
    t: &BTreeSet<Tuple>,
    t_in: &BTreeSet<String>,
    max_transactions: Option<usize>,
) -> Result<bool> {
    Checker::new(db, t_in, &BTreeSet::new(), max_transactions)?.check(t, Part::Consistent, false)
}

/// No possible world of `(ℛ, IC, 𝒯 ∪ {T})` contains `T` together with any
/// transaction of `t_out`.
pub fn is_inconsistent_with(
    db: &BlockchainDatabase,
    t: &BTreeSet<Tuple>,
    t_out: &BTreeSet<String>,
    max_transactions: Option<usize>,
) -> Result<bool> {
    Checker::new(db, &BTreeSet::new(), t_out, max_transactions)?.check(t, Part::Inconsistent, false)
}

/// Uses the key/fd or IND shortcut when the constraint set allows it.
pub fn is_separating(
    db: &BlockchainDatabase,
    t: &BTreeSet<Tuple>,
    spec: &SeparationSpec,
    max_transactions: Option<usize>,
) -> Result<bool> {
    Checker::new(db, &spec.t_in, &spec.t_out, max_transactions)?.check(t, Part::Both, false)
}

/// Always enumerates every possible world.
pub fn is_separating_oracle(
    db: &BlockchainDatabase,
    t: &BTreeSet<Tuple>,
    spec: &SeparationSpec,
    max_transactions: Option<usize>,
) -> Result<bool> {
    Checker::new(db, &spec.t_in, &spec.t_out, max_transactions)?.check(t, Part::Both, true)
}

fn require_fd_only(ic: &ConstraintSet) -> Result<()> {
    if ic.kinds().ind {
        return Err(Error::Dispatch("fd chase requires key/fd constraints only".into()));
    }
    Ok(())
}

/// A tuple of `seed`'s relation equal to `seed` on `fixed`, fresh elsewhere,
/// then repaired against `context` until no fd `U → A` finds a context
/// tuple agreeing on `U` but not on `A`. `None` when the repairs cycle, i.e.
/// no tuple agreeing with the seed this way is consistent with `context`.
pub fn chase_fd<S: AsRef<str>>(
    seed: &Tuple,
    fixed: &[S],
    ic: &ConstraintSet,
    context: &DatabaseState,
    fresh: &mut FreshGen,
) -> Result<Option<Tuple>> {
    require_fd_only(ic)?;
    let schema = context.schema();
    let rel = schema.get(&seed.relation)?;
    let keep = rel.positions(fixed)?;
    let mut t = seed.clone();
    for (i, v) in t.values.iter_mut().enumerate() {
        if !keep.contains(&i) {
            *v = fresh.next_value();
        }
    }
    let fds: Vec<_> = ic
        .normalized_fds(schema)?
        .into_iter()
        .filter(|fd| fd.relation == seed.relation)
        .collect();
    let rows: Vec<&Vec<Value>> = context.rows(&seed.relation).collect();
    // every productive step copies a context value; far more steps than
    // cells times rows means the repairs are going round in circles
    let cap = (rel.arity() + 1) * (rows.len() + 1) * (fds.len() + 1);
    for _ in 0..cap {
        let mut changed = false;
        for fd in &fds {
            for row in &rows {
                if fd.lhs.iter().all(|&p| t.values[p] == row[p]) && t.values[fd.rhs] != row[fd.rhs] {
                    t.values[fd.rhs] = row[fd.rhs].clone();
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// First `(t_o, fd)` pair, in canonical order, whose chased tuple `t`
/// clashes with `t_o`.
pub fn contradict(
    t_out: &Transaction,
    context: &DatabaseState,
    ic: &ConstraintSet,
    fresh: &mut FreshGen,
) -> Result<Option<Tuple>> {
    require_fd_only(ic)?;
    let schema = context.schema().clone();
    for t_o in t_out.tuples() {
        let same_rel =
            DatabaseState::from_tuples(schema.clone(), context.tuples().filter(|x| x.relation == t_o.relation))?;
        for fd in ic.fds().filter(|fd| fd.relation() == t_o.relation) {
            let Some(t) = chase_fd(t_o, fd.lhs(), ic, &same_rel, fresh)? else {
                continue;
            };
            let pair = DatabaseState::from_tuples(schema.clone(), [t_o.clone(), t.clone()])?;
            if !satisfies(&pair, ic)? {
                return Ok(Some(t));
            }
        }
    }
    Ok(None)
}

fn output_label(db: &BlockchainDatabase) -> String {
    let taken = |l: &str| db.pending().iter().any(|t| t.label() == l);
    if !taken("SEP") {
        return "SEP".into();
    }
    (1..)
        .map(|i| format!("SEP{i}"))
        .find(|l| !taken(l))
        .expect("some label is free")
}

fn finish(
    db: &BlockchainDatabase,
    t: BTreeSet<Tuple>,
    route: SepRoute,
    domain_relative: bool,
) -> Result<SeparationResult> {
    if t.is_empty() {
        return Ok(SeparationResult::TriviallySeparating { route });
    }
    Ok(SeparationResult::Found {
        transaction: Transaction::new(output_label(db), t)?,
        route,
        domain_relative,
    })
}

/// Results up to this size are reduced to their smallest separating subset.
const EXACT_MINIMIZE: usize = 10;

/// Shrink a separating transaction. Separation is not monotone, so dropping
/// single tuples can get stuck above a smaller separating subset; small
/// results are scanned exhaustively, larger ones drop tuples to a fixpoint.
fn minimize(checker: &Checker<'_>, mut t: BTreeSet<Tuple>) -> Result<BTreeSet<Tuple>> {
    if t.len() <= EXACT_MINIMIZE {
        let all: Vec<&Tuple> = t.iter().collect();
        let mut masks: Vec<u32> = (0..(1u32 << all.len()) - 1).collect();
        masks.sort_by_key(|m| m.count_ones());
        for m in masks {
            let sub: BTreeSet<Tuple> = (0..all.len())
                .filter(|i| m & (1 << i) != 0)
                .map(|i| all[i].clone())
                .collect();
            if checker.check(&sub, Part::Both, false)? {
                return Ok(sub);
            }
        }
        return Ok(t);
    }
    loop {
        let before = t.len();
        for x in t.clone() {
            let mut smaller = t.clone();
            smaller.remove(&x);
            if checker.check(&smaller, Part::Both, false)? {
                t = smaller;
            }
        }
        if t.len() == before {
            return Ok(t);
        }
    }
}

fn fail(reason: FailureReason, route: SepRoute) -> SeparationResult {
    SeparationResult::Failed {
        reason,
        route: Some(route),
    }
}

/// Key/fd route: add one contradicting tuple per `t_out` transaction not
/// already contradicted, then drop redundant tuples in a single pass.
pub fn gen_min_sep_fd(db: &BlockchainDatabase, spec: &SeparationSpec, limits: &Limits) -> Result<SeparationResult> {
    spec.validate(db)?;
    let ic = db.constraints();
    require_fd_only(ic)?;
    let checker = Checker::new(db, &spec.t_in, &spec.t_out, limits.max_transactions)?;
    let mut r_star = db.state().clone();
    for x in &checker.ins {
        r_star.extend(x.tuples())?;
    }
    if !satisfies(&r_star, ic)? {
        return Ok(fail(FailureReason::TinInconsistent, SepRoute::Fd));
    }
    let mut fresh = FreshGen::for_database(db);
    let mut t: BTreeSet<Tuple> = BTreeSet::new();
    for t_o in &checker.outs {
        let probe = db.state().with_tuples(&t)?.with_tuples(t_o.tuples())?;
        if satisfies(&probe, ic)? {
            let context = r_star.with_tuples(&t)?;
            match contradict(t_o, &context, ic, &mut fresh)? {
                Some(x) => {
                    t.insert(x);
                }
                None => return Ok(fail(FailureReason::NoSeparatingTransaction, SepRoute::Fd)),
            }
        }
    }
    let t = minimize(&checker, t)?;
    finish(db, t, SepRoute::Fd, false)
}

/// Inclusion-dependency route: chase the `t_in` tuples, creating each
/// missing target tuple with the matched attributes copied and one shared
/// fresh constant everywhere else.
pub fn gen_min_sep_ind(db: &BlockchainDatabase, spec: &SeparationSpec, limits: &Limits) -> Result<SeparationResult> {
    spec.validate(db)?;
    let ic = db.constraints();
    if ic.fds().next().is_some() {
        return Err(Error::Dispatch(
            "inclusion chase requires inclusion dependencies only".into(),
        ));
    }
    let checker = Checker::new(db, &spec.t_in, &spec.t_out, limits.max_transactions)?;
    let schema = db.schema().clone();
    let c = FreshGen::for_database(db).next_value();

    let inds: Vec<_> = ic
        .inds()
        .map(|ind| -> Result<_> {
            Ok((
                ind.source().to_string(),
                schema.get(ind.source())?.positions(ind.source_attrs())?,
                ind.target().to_string(),
                schema.get(ind.target())?.positions(ind.target_attrs())?,
            ))
        })
        .collect::<Result<_>>()?;

    let mut known = db.state().clone();
    let mut queue: VecDeque<Tuple> = VecDeque::new();
    for x in &checker.ins {
        known.extend(x.tuples())?;
        queue.extend(x.tuples().iter().cloned());
    }
    let mut t: BTreeSet<Tuple> = BTreeSet::new();
    while let Some(s) = queue.pop_front() {
        for (src, sp, tgt, tp) in &inds {
            if &s.relation != src {
                continue;
            }
            let proj: Vec<&Value> = sp.iter().map(|&p| &s.values[p]).collect();
            let present = known
                .rows(tgt)
                .any(|row| tp.iter().zip(&proj).all(|(&p, v)| &row[p] == *v));
            if present {
                continue;
            }
            let arity = schema.get(tgt)?.arity();
            let mut vals = vec![c.clone(); arity];
            for (&p, v) in tp.iter().zip(&proj) {
                vals[p] = (*v).clone();
            }
            let new = Tuple::new(tgt.clone(), vals);
            known.insert(new.clone())?;
            t.insert(new.clone());
            queue.push_back(new);
        }
    }

    if !checker.check(&t, Part::Consistent, false)? {
        // Chased tuples and t_in tuples can depend on each other so that
        // neither goes first; issuing them together breaks the cycle.
        for x in &checker.ins {
            t.extend(x.tuples().iter().filter(|x| !db.state().contains(x)).cloned());
        }
    }
    if !checker.check(&t, Part::Inconsistent, false)? {
        return Ok(fail(FailureReason::NoSeparatingTransaction, SepRoute::Ind));
    }
    debug_assert!(checker.check(&t, Part::Consistent, false)?);
    let t = minimize(&checker, t)?;
    finish(db, t, SepRoute::Ind, false)
}

/// Union-find over (relation, attribute position), joined along inclusion
/// dependencies: values only ever meet within one class.
fn column_classes(db: &BlockchainDatabase) -> Result<BTreeMap<(String, usize), usize>> {
    let schema = db.schema();
    let cols: Vec<(String, usize)> = schema
        .relations()
        .flat_map(|r| (0..r.arity()).map(move |i| (r.name().to_string(), i)))
        .collect();
    let index: BTreeMap<(String, usize), usize> = cols.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
    let mut parent: Vec<usize> = (0..cols.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for ind in db.constraints().inds() {
        let sp = schema.get(ind.source())?.positions(ind.source_attrs())?;
        let tp = schema.get(ind.target())?.positions(ind.target_attrs())?;
        for (a, b) in sp.into_iter().zip(tp) {
            let x = find(&mut parent, index[&(ind.source().to_string(), a)]);
            let y = find(&mut parent, index[&(ind.target().to_string(), b)]);
            parent[x] = y;
        }
    }
    let mut out = BTreeMap::new();
    for (c, &i) in &index {
        out.insert(c.clone(), find(&mut parent, i));
    }
    Ok(out)
}

fn binomial_sum(n: u64, k: u64) -> u64 {
    let mut total: u64 = 0;
    let mut c: u64 = 1;
    for s in 0..=k.min(n) {
        total = total.saturating_add(c);
        c = c.saturating_mul(n - s) / (s + 1);
    }
    total
}

struct Candidates {
    tuples: Vec<Tuple>,
    classes: BTreeMap<(String, usize), usize>,
    /// First fresh index handed to each column class.
    fresh_base: BTreeMap<usize, u64>,
}

/// Candidate tuples for bounded search, in canonical order.
fn bounded_candidates(db: &BlockchainDatabase, checker: &Checker<'_>, k: usize) -> Result<Candidates> {
    let schema = db.schema();
    let classes = column_classes(db)?;
    let mode = mode_of(db.constraints());

    let mut domain: BTreeMap<usize, BTreeSet<Value>> = BTreeMap::new();
    for &class in classes.values() {
        domain.entry(class).or_default();
    }
    let sources = db.state().tuples().chain(
        checker
            .ins
            .iter()
            .chain(&checker.outs)
            .flat_map(|x| x.tuples().iter().cloned()),
    );
    for t in sources {
        for (i, v) in t.values.iter().enumerate() {
            domain
                .get_mut(&classes[&(t.relation.clone(), i)])
                .expect("class")
                .insert(v.clone());
        }
    }
    let n_fresh = k.min(checker.outs.len()).max(1);
    let mut fresh = FreshGen::for_database(db);
    let mut fresh_base = BTreeMap::new();
    for (&class, vals) in domain.iter_mut() {
        fresh_base.insert(class, fresh.next);
        for _ in 0..n_fresh {
            vals.insert(fresh.next_value());
        }
    }

    let targets: BTreeSet<&str> = db.constraints().inds().map(|i| i.target()).collect();
    let normalized = db.constraints().normalized_fds(schema)?;
    let out_tuples: Vec<&Tuple> = checker.outs.iter().flat_map(|x| x.tuples()).collect();

    let mut cands = Vec::new();
    for rel in schema.relations() {
        if mode == Mode::Ind && !targets.contains(rel.name()) {
            continue;
        }
        let cols: Vec<Vec<Value>> = (0..rel.arity())
            .map(|i| domain[&classes[&(rel.name().to_string(), i)]].iter().cloned().collect())
            .collect();
        let mut idx = vec![0usize; rel.arity()];
        if cols.iter().any(Vec::is_empty) {
            continue;
        }
        loop {
            let t = Tuple::new(rel.name(), idx.iter().enumerate().map(|(i, &j)| cols[i][j].clone()));
            let relevant = match mode {
                // a tuple can only clash with a t_out tuple it matches on
                // some fd's left-hand side
                Mode::KeyFd => out_tuples.iter().any(|o| {
                    o.relation == t.relation
                        && normalized
                            .iter()
                            .any(|fd| fd.relation == t.relation && fd.lhs.iter().all(|&p| o.values[p] == t.values[p]))
                }),
                _ => true,
            };
            if relevant && !db.state().contains(&t) {
                cands.push(t);
            }
            let mut pos = rel.arity();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < cols[pos].len() {
                    break;
                }
                idx[pos] = 0;
                if pos == 0 {
                    pos = usize::MAX;
                    break;
                }
            }
            if pos == usize::MAX {
                break;
            }
        }
    }
    cands.sort();
    cands.dedup();
    Ok(Candidates {
        tuples: cands,
        classes,
        fresh_base,
    })
}

/// Fresh constants are interchangeable, so only subsets using an initial
/// run of them in each column class need checking.
fn fresh_prefix_ok(subset: &[&Tuple], c: &Candidates) -> bool {
    let mut used: BTreeMap<usize, BTreeSet<u64>> = BTreeMap::new();
    for t in subset {
        for (i, v) in t.values.iter().enumerate() {
            if let Value::Fresh(n) = v {
                used.entry(c.classes[&(t.relation.clone(), i)]).or_default().insert(*n);
            }
        }
    }
    used.iter()
        .all(|(class, s)| s.iter().enumerate().all(|(r, &n)| n == c.fresh_base[class] + r as u64))
}

type IndShape = (String, Vec<usize>, String, Vec<usize>);

/// Bounded search under inclusion dependencies alone. In a smallest
/// separating transaction every tuple witnesses a requirement that the
/// maximal world built without it leaves open, so only such witnesses are
/// added. All sets of the first size that works are visited and the
/// canonically first is returned, as the exhaustive scan would.
struct IndSearch<'a> {
    db: &'a BlockchainDatabase,
    checker: &'a Checker<'a>,
    c: &'a Candidates,
    inds: Vec<IndShape>,
    /// Candidate indices per (dependency, target projection).
    witnesses: HashMap<(usize, Vec<Value>), Vec<usize>>,
    budget: u64,
    seen: HashSet<Vec<usize>>,
    best: Option<Vec<usize>>,
}

impl<'a> IndSearch<'a> {
    fn new(db: &'a BlockchainDatabase, checker: &'a Checker<'a>, c: &'a Candidates, limits: &Limits) -> Result<Self> {
        let schema = db.schema();
        let inds: Vec<IndShape> = db
            .constraints()
            .inds()
            .map(|ind| -> Result<_> {
                Ok((
                    ind.source().to_string(),
                    schema.get(ind.source())?.positions(ind.source_attrs())?,
                    ind.target().to_string(),
                    schema.get(ind.target())?.positions(ind.target_attrs())?,
                ))
            })
            .collect::<Result<_>>()?;
        let mut witnesses: HashMap<(usize, Vec<Value>), Vec<usize>> = HashMap::new();
        for (d, (_, _, tgt, tp)) in inds.iter().enumerate() {
            for (i, t) in c.tuples.iter().enumerate() {
                if &t.relation == tgt {
                    let key = tp.iter().map(|&p| t.values[p].clone()).collect();
                    witnesses.entry((d, key)).or_default().push(i);
                }
            }
        }
        Ok(IndSearch {
            db,
            checker,
            c,
            inds,
            witnesses,
            budget: limits.max_candidates,
            seen: HashSet::new(),
            best: None,
        })
    }

    fn run(mut self, k: usize) -> Result<Option<BTreeSet<Tuple>>> {
        for size in 1..=k.min(self.c.tuples.len()) {
            self.seen.clear();
            self.visit(Vec::new(), size)?;
            if let Some(best) = self.best.take() {
                return Ok(Some(self.tuples(&best)));
            }
        }
        Ok(None)
    }

    fn tuples(&self, idx: &[usize]) -> BTreeSet<Tuple> {
        idx.iter().map(|&i| self.c.tuples[i].clone()).collect()
    }

    fn visit(&mut self, idx: Vec<usize>, size: usize) -> Result<()> {
        if !self.seen.insert(idx.clone()) {
            return Ok(());
        }
        if self.budget == 0 {
            return Err(Error::Guard(
                "bounded search under inclusion dependencies exceeded its node limit".into(),
            ));
        }
        self.budget -= 1;
        let t = self.tuples(&idx);
        if idx.len() == size {
            let subset: Vec<&Tuple> = t.iter().collect();
            if self.best.as_ref().is_none_or(|b| &idx < b)
                && fresh_prefix_ok(&subset, self.c)
                && self.checker.check(&t, Part::Both, false)?
            {
                self.best = Some(idx);
            }
            return Ok(());
        }

        let space = self.checker.space(&t)?;
        let reach = space.closure(|_| true);
        let base = self.db.state();
        if !t.is_empty() && space.mask_of(base, &t).expect("candidate is pending").is_subset(&reach) {
            // Any larger transaction that still gets appended only grows
            // the maximal world.
            let absorbed = |x: &Transaction| space.mask_of(base, x.tuples()).expect("pending").is_subset(&reach);
            if self.checker.outs.iter().any(|o| absorbed(o)) {
                return Ok(());
            }
        }
        let mut world = base.clone();
        for i in reach.ones() {
            world.insert(space.tuples[i].clone())?;
        }
        let must: BTreeSet<&Tuple> = t
            .iter()
            .chain(self.checker.ins.iter().flat_map(|x| x.tuples()))
            .filter(|x| !world.contains(x))
            .collect();

        // Open requirements of tuples outside the maximal world. Those of
        // tuples that must be appended, with no pending witness, are forced.
        let mut open: Vec<(usize, Vec<Value>)> = Vec::new();
        let mut forced: Vec<(usize, Vec<Value>)> = Vec::new();
        for s in space.tuples.iter().filter(|s| !world.contains(s)) {
            for (d, (src, sp, tgt, tp)) in self.inds.iter().enumerate() {
                if &s.relation != src {
                    continue;
                }
                let key: Vec<Value> = sp.iter().map(|&p| s.values[p].clone()).collect();
                let met = |row: &[Value]| tp.iter().zip(&key).all(|(&p, v)| &row[p] == v);
                if world.rows(tgt).any(|row| met(row)) {
                    continue;
                }
                if must.contains(s) && !space.tuples.iter().any(|x| &x.relation == tgt && met(&x.values)) {
                    forced.push((d, key.clone()));
                }
                open.push((d, key));
            }
        }
        if open.is_empty() {
            return Ok(());
        }

        // Distinct projections onto the same target columns need distinct
        // tuples.
        let mut groups: BTreeMap<&str, BTreeMap<&[usize], BTreeSet<&[Value]>>> = BTreeMap::new();
        for (d, key) in &forced {
            let (_, _, tgt, tp) = &self.inds[*d];
            groups.entry(tgt).or_default().entry(tp).or_default().insert(key);
        }
        let need: usize = groups
            .values()
            .map(|g| g.values().map(BTreeSet::len).max().unwrap_or(0))
            .sum();
        if idx.len() + need.max(1) > size {
            return Ok(());
        }

        let options = |reqs: &[(usize, Vec<Value>)]| -> Vec<usize> {
            let mut out: Vec<usize> = reqs
                .iter()
                .flat_map(|r| self.witnesses.get(r).into_iter().flatten().copied())
                .filter(|i| !idx.contains(i))
                .collect();
            out.sort_unstable();
            out.dedup();
            out
        };
        let branch = if forced.is_empty() {
            options(&open)
        } else {
            forced
                .iter()
                .map(|r| options(std::slice::from_ref(r)))
                .min_by_key(Vec::len)
                .expect("forced is non-empty")
        };
        for i in branch {
            let mut next = idx.clone();
            next.push(i);
            next.sort_unstable();
            self.visit(next, size)?;
        }
        Ok(())
    }
}

/// Exhaustive search over transactions of at most `k` candidate tuples,
/// smallest first.
pub fn gen_bounded_sep(db: &BlockchainDatabase, spec: &SeparationSpec, limits: &Limits) -> Result<SeparationResult> {
    spec.validate(db)?;
    let k = spec
        .bound
        .ok_or_else(|| Error::InvalidSpec("bounded search needs a bound".into()))?;
    let checker = Checker::new(db, &spec.t_in, &spec.t_out, limits.max_transactions)?;
    let domain_relative = mode_of(db.constraints()) != Mode::KeyFd;

    if checker.check(&BTreeSet::new(), Part::Both, false)? {
        return Ok(SeparationResult::TriviallySeparating {
            route: SepRoute::Bounded,
        });
    }
    // Added tuples never repair an fd violation.
    if !checker.consistent_fd(&BTreeSet::new())? {
        return Ok(fail(FailureReason::TinInconsistent, SepRoute::Bounded));
    }
    let c = bounded_candidates(db, &checker, k)?;
    if mode_of(db.constraints()) == Mode::Ind {
        return match IndSearch::new(db, &checker, &c, limits)?.run(k)? {
            Some(t) => finish(db, t, SepRoute::Bounded, domain_relative),
            None => Ok(fail(FailureReason::BoundExhausted, SepRoute::Bounded)),
        };
    }
    exhaustive(db, &checker, &c, k, limits, domain_relative)
}

fn exhaustive(
    db: &BlockchainDatabase,
    checker: &Checker<'_>,
    c: &Candidates,
    k: usize,
    limits: &Limits,
    domain_relative: bool,
) -> Result<SeparationResult> {
    let cands = &c.tuples;
    let space = binomial_sum(cands.len() as u64, k as u64);
    if space > limits.max_candidates {
        return Err(Error::Guard(format!(
            "bounded search over {} candidate tuples with k = {k} would examine about {space} transactions (limit {})",
            cands.len(),
            limits.max_candidates
        )));
    }
    for size in 1..=k.min(cands.len()) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let subset: Vec<&Tuple> = idx.iter().map(|&i| &cands[i]).collect();
            if fresh_prefix_ok(&subset, c) {
                let t: BTreeSet<Tuple> = subset.into_iter().cloned().collect();
                if checker.check(&t, Part::Both, false)? {
                    return finish(db, t, SepRoute::Bounded, domain_relative);
                }
            }
            // next combination in lexicographic order
            let mut i = size;
            while i > 0 && idx[i - 1] == cands.len() - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    Ok(fail(FailureReason::BoundExhausted, SepRoute::Bounded))
}

/// Route by bound and constraint types.
pub fn gen_sep(db: &BlockchainDatabase, spec: &SeparationSpec, limits: &Limits) -> Result<SeparationResult> {
    spec.validate(db)?;
    if spec.bound.is_some() {
        return gen_bounded_sep(db, spec, limits);
    }
    match mode_of(db.constraints()) {
        Mode::KeyFd => gen_min_sep_fd(db, spec, limits),
        Mode::Ind => gen_min_sep_ind(db, spec, limits),
        Mode::Mixed => {
            // An fd conflict inside `t_in` is decidable whatever the mix.
            let mut s = db.state().clone();
            for l in &spec.t_in {
                s.extend(db.transaction(l)?.tuples())?;
            }
            let reason = if satisfies_fds(&s, db.constraints())? {
                FailureReason::UndecidableConstraintMix
            } else {
                FailureReason::TinInconsistent
            };
            Ok(SeparationResult::Failed { reason, route: None })
        }
    }
}
