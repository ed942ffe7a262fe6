//! The blockchain database: a committed state, its integrity constraints
//! and a pool of pending insert-only transactions.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::constraints::{satisfies, satisfies_fds, satisfies_inds, violations, ConstraintSet};
use crate::error::{Error, Result};
use crate::schema::{DatabaseState, Schema, Tuple};
use crate::value::Value;
use crate::worlds::WorldSpace;

/// Pending pools larger than this are refused by the exhaustive routines
/// unless the caller raises the limit.
pub const DEFAULT_MAX_TRANSACTIONS: usize = 20;

/// A labelled, non-empty set of tuples to be inserted atomically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transaction {
    label: String,
    tuples: BTreeSet<Tuple>,
}

impl Transaction {
    pub fn new(label: impl Into<String>, tuples: impl IntoIterator<Item = Tuple>) -> Result<Self> {
        let label = label.into();
        let tuples: BTreeSet<Tuple> = tuples.into_iter().collect();
        if tuples.is_empty() {
            return Err(Error::EmptyTransaction(label));
        }
        Ok(Transaction { label, tuples })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn tuples(&self) -> &BTreeSet<Tuple> {
        &self.tuples
    }

    pub fn relabeled(&self, label: impl Into<String>) -> Transaction {
        Transaction {
            label: label.into(),
            tuples: self.tuples.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockchainDatabase {
    state: DatabaseState,
    ic: ConstraintSet,
    pending: Vec<Transaction>,
}

impl BlockchainDatabase {
    /// Validates `state |= ic`, tuple arities and label uniqueness. Pending
    /// transactions are kept ordered by label.
    pub fn new(
        state: DatabaseState,
        ic: ConstraintSet,
        pending: impl IntoIterator<Item = Transaction>,
    ) -> Result<Self> {
        let mut pending: Vec<Transaction> = pending.into_iter().collect();
        pending.sort_by(|a, b| a.label.cmp(&b.label));
        for w in pending.windows(2) {
            if w[0].label == w[1].label {
                return Err(Error::DuplicateLabel(w[0].label.clone()));
            }
        }
        for t in &pending {
            for tuple in &t.tuples {
                state.schema().check_tuple(tuple)?;
            }
        }
        // resolves every constraint against the schema as a side effect
        ic.normalized_fds(state.schema())?;
        let v = violations(&state, &ic)?;
        if let Some(first) = v.first() {
            return Err(Error::StateViolatesConstraints(format!("{first:?}")));
        }
        Ok(BlockchainDatabase { state, ic, pending })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        self.state.schema()
    }

    pub fn state(&self) -> &DatabaseState {
        &self.state
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.ic
    }

    pub fn pending(&self) -> &[Transaction] {
        &self.pending
    }

    pub fn transaction(&self, label: &str) -> Result<&Transaction> {
        self.pending
            .iter()
            .find(|t| t.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// The same database with extra pending transactions (a dry run).
    pub fn with_pending(&self, extra: impl IntoIterator<Item = Transaction>) -> Result<Self> {
        BlockchainDatabase::new(
            self.state.clone(),
            self.ic.clone(),
            self.pending.iter().cloned().chain(extra),
        )
    }

    pub fn with_constraints(&self, ic: ConstraintSet) -> Result<Self> {
        BlockchainDatabase::new(self.state.clone(), ic, self.pending.iter().cloned())
    }

    /// `state ∪ ⋃ pending[labels]`.
    pub fn state_with<'a>(&self, labels: impl IntoIterator<Item = &'a str>) -> Result<DatabaseState> {
        let mut s = self.state.clone();
        for l in labels {
            s.extend(self.transaction(l)?.tuples())?;
        }
        Ok(s)
    }

    /// Largest index used by fresh constants anywhere in the database.
    pub fn max_fresh(&self) -> Option<u64> {
        self.state
            .tuples()
            .chain(self.pending.iter().flat_map(|t| t.tuples.iter().cloned()))
            .flat_map(|t| t.values)
            .filter_map(|v| match v {
                Value::Fresh(n) => Some(n),
                _ => None,
            })
            .max()
    }

    pub(crate) fn world_space(&self) -> Result<WorldSpace> {
        WorldSpace::build(&self.state, &self.ic, self.pending.iter().map(|t| t.tuples.iter()))
    }

    pub(crate) fn check_guard(&self, max_transactions: Option<usize>) -> Result<()> {
        let limit = max_transactions.unwrap_or(DEFAULT_MAX_TRANSACTIONS);
        if self.pending.len() > limit {
            return Err(Error::Guard(format!(
                "{} pending transactions exceed the enumeration limit of {limit}",
                self.pending.len()
            )));
        }
        Ok(())
    }
}

/// A possible world with the labels of every pending transaction it contains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    pub state: DatabaseState,
    pub labels: BTreeSet<String>,
}

impl World {
    /// Size-then-lexicographic order on label sets.
    pub fn canonical_key(&self) -> (usize, Vec<&str>) {
        (self.labels.len(), self.labels.iter().map(String::as_str).collect())
    }
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("R")?;
        for l in &self.labels {
            write!(f, " ∪ {l}")?;
        }
        Ok(())
    }
}

pub(crate) fn world_from_state(db: &BlockchainDatabase, state: DatabaseState) -> World {
    let labels = db
        .pending
        .iter()
        .filter(|t| state.contains_all(&t.tuples))
        .map(|t| t.label.clone())
        .collect();
    World { state, labels }
}

/// One can-append step: whether `current ∪ t` satisfies `ic`.
pub fn can_append_step(current: &DatabaseState, t: &Transaction, ic: &ConstraintSet) -> Result<bool> {
    satisfies(&current.with_tuples(t.tuples())?, ic)
}

/// Polynomial recognition of possible worlds: reject key/fd violations,
/// require the candidate to be exactly the base plus the pending
/// transactions it contains, then absorb those transactions greedily while
/// the inclusion dependencies stay satisfied.
pub fn is_possible_world(db: &BlockchainDatabase, candidate: &DatabaseState) -> Result<bool> {
    if candidate.schema() != db.schema() {
        return Err(Error::Schema("candidate state uses a different schema".into()));
    }
    if !satisfies_fds(candidate, &db.ic)? {
        return Ok(false);
    }
    let mut remaining: Vec<&Transaction> = db
        .pending
        .iter()
        .filter(|t| candidate.contains_all(&t.tuples))
        .collect();
    let mut reach = db.state.clone();
    for t in &remaining {
        reach.extend(t.tuples())?;
    }
    if &reach != candidate {
        return Ok(false);
    }
    let mut current = db.state.clone();
    loop {
        if &current == candidate {
            return Ok(true);
        }
        let mut next = None;
        for (i, t) in remaining.iter().enumerate() {
            let grown = current.with_tuples(t.tuples())?;
            if satisfies_inds(&grown, &db.ic)? {
                next = Some((i, grown));
                break;
            }
        }
        match next {
            Some((i, grown)) => {
                remaining.remove(i);
                current = grown;
            }
            None => return Ok(false),
        }
    }
}

/// Every possible world, deduplicated by state, in canonical order.
/// Exponential; refuses pools larger than `max_transactions` (default 20).
pub fn enumerate_possible_worlds(db: &BlockchainDatabase, max_transactions: Option<usize>) -> Result<Vec<World>> {
    db.check_guard(max_transactions)?;
    let space = db.world_space()?;
    let mut worlds: Vec<World> = space
        .reachable()
        .into_iter()
        .map(|m| World {
            state: space.materialize(&db.state, &m),
            labels: space
                .contained(&m)
                .into_iter()
                .map(|i| db.pending[i].label.clone())
                .collect(),
        })
        .collect();
    worlds.sort_by(|a, b| a.canonical_key().cmp(&b.canonical_key()));
    Ok(worlds)
}

/// The unique maximal world under inclusion dependencies only, obtained by
/// absorbing transactions until nothing more can be added.
pub fn maximal_world(db: &BlockchainDatabase) -> Result<World> {
    if db.ic.fds().next().is_some() {
        return Err(Error::Dispatch("maximal world requires IND-only constraint set".into()));
    }
    let mut current = db.state.clone();
    let mut remaining: Vec<&Transaction> = db.pending.iter().collect();
    loop {
        let mut progressed = false;
        let mut i = 0;
        while i < remaining.len() {
            let grown = current.with_tuples(remaining[i].tuples())?;
            if satisfies(&grown, &db.ic)? {
                current = grown;
                remaining.remove(i);
                progressed = true;
            } else {
                i += 1;
            }
        }
        if !progressed {
            return Ok(world_from_state(db, current));
        }
    }
}
