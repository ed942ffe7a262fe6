//! Compiled form of a pending pool for fast world exploration.
//!
//! Every pending tuple that is not already in the current state gets a bit.
//! Key/fd violations are pairwise, so they compile to a conflict graph;
//! inclusion dependencies compile to, per tuple, the sets of tuples that can
//! serve as its witness. Absorbing a transaction into a world that satisfies
//! the constraints then only needs to look at the newly added tuples.

use std::collections::{HashMap, HashSet, VecDeque};

use fixedbitset::FixedBitSet;

use crate::constraints::ConstraintSet;
use crate::error::Result;
use crate::schema::{DatabaseState, Tuple};
use crate::value::Value;

pub(crate) type Mask = FixedBitSet;

#[derive(Debug, Clone)]
pub(crate) struct WorldSpace {
    pub tuples: Vec<Tuple>,
    index: HashMap<Tuple, usize>,
    pub txns: Vec<Mask>,
    dead: Mask,
    /// Per tuple, the tuples it violates a key/fd with.
    pub conflicts: Vec<Mask>,
    /// Per tuple, one mask of acceptable witnesses per inclusion dependency
    /// not already met by the base state.
    pub requirements: Vec<Vec<Mask>>,
}

impl WorldSpace {
    pub fn build<'a, I, T>(base: &DatabaseState, ic: &ConstraintSet, txns: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = &'a Tuple>,
    {
        let schema = base.schema().clone();
        let txn_tuples: Vec<Vec<&Tuple>> = txns.into_iter().map(|t| t.into_iter().collect()).collect();

        let mut tuples: Vec<Tuple> = Vec::new();
        for t in txn_tuples.iter().flatten() {
            schema.check_tuple(t)?;
            if !base.contains(t) {
                tuples.push((*t).clone());
            }
        }
        tuples.sort();
        tuples.dedup();
        let n = tuples.len();
        let index: HashMap<Tuple, usize> = tuples.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();

        let txns: Vec<Mask> = txn_tuples
            .iter()
            .map(|ts| {
                let mut m = Mask::with_capacity(n);
                for t in ts {
                    if let Some(&i) = index.get(*t) {
                        m.insert(i);
                    }
                }
                m
            })
            .collect();

        let fds = ic.normalized_fds(&schema)?;
        let mut dead = Mask::with_capacity(n);
        let mut conflicts = vec![Mask::with_capacity(n); n];
        for fd in &fds {
            let members: Vec<usize> = (0..n).filter(|&i| tuples[i].relation == fd.relation).collect();
            for &i in &members {
                if base
                    .rows(&fd.relation)
                    .any(|row| fd.violated_by(&tuples[i].values, row))
                {
                    dead.insert(i);
                }
            }
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    if fd.violated_by(&tuples[i].values, &tuples[j].values) {
                        conflicts[i].insert(j);
                        conflicts[j].insert(i);
                    }
                }
            }
        }

        let mut requirements = vec![Vec::new(); n];
        for ind in ic.inds() {
            let src = schema.get(ind.source())?.positions(ind.source_attrs())?;
            let tgt = schema.get(ind.target())?.positions(ind.target_attrs())?;
            let in_base: HashSet<Vec<&Value>> = base
                .rows(ind.target())
                .map(|row| tgt.iter().map(|&p| &row[p]).collect())
                .collect();
            let mut providers: HashMap<Vec<&Value>, Mask> = HashMap::new();
            for (j, t) in tuples.iter().enumerate() {
                if t.relation == ind.target() {
                    providers
                        .entry(tgt.iter().map(|&p| &t.values[p]).collect())
                        .or_insert_with(|| Mask::with_capacity(n))
                        .insert(j);
                }
            }
            for (i, t) in tuples.iter().enumerate() {
                if t.relation != ind.source() {
                    continue;
                }
                let key: Vec<&Value> = src.iter().map(|&p| &t.values[p]).collect();
                if in_base.contains(&key) {
                    continue;
                }
                let p = providers.get(&key).cloned().unwrap_or_else(|| Mask::with_capacity(n));
                requirements[i].push(p);
            }
        }

        Ok(WorldSpace {
            tuples,
            index,
            txns,
            dead,
            conflicts,
            requirements,
        })
    }

    pub fn empty_mask(&self) -> Mask {
        Mask::with_capacity(self.tuples.len())
    }

    /// Bits of `tuples` outside the base state; `None` if some tuple is
    /// neither in the base nor pending.
    pub fn mask_of<'a>(&self, base: &DatabaseState, tuples: impl IntoIterator<Item = &'a Tuple>) -> Option<Mask> {
        let mut m = self.empty_mask();
        for t in tuples {
            match self.index.get(t) {
                Some(&i) => m.insert(i),
                None if base.contains(t) => {}
                None => return None,
            }
        }
        Some(m)
    }

    /// Whether `world ∪ txn` satisfies the constraints, given that `world` does.
    pub fn can_absorb(&self, world: &Mask, txn: usize) -> bool {
        let mask = &self.txns[txn];
        let mut next = world.clone();
        next.union_with(mask);
        mask.difference(world).all(|i| {
            !self.dead.contains(i)
                && self.conflicts[i].is_disjoint(&next)
                && self.requirements[i].iter().all(|p| !p.is_disjoint(&next))
        })
    }

    /// Whether the transaction alone is free of key/fd violations, with
    /// itself and with the base state.
    pub fn fd_consistent(&self, txn: usize) -> bool {
        let m = &self.txns[txn];
        m.ones()
            .all(|i| !self.dead.contains(i) && self.conflicts[i].is_disjoint(m))
    }

    /// All worlds reachable from the empty mask, in discovery order.
    pub fn reachable(&self) -> Vec<Mask> {
        let start = self.empty_mask();
        let mut seen: HashSet<Mask> = HashSet::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        seen.insert(start.clone());
        queue.push_back(start);
        while let Some(w) = queue.pop_front() {
            for t in 0..self.txns.len() {
                if self.txns[t].is_subset(&w) || !self.can_absorb(&w, t) {
                    continue;
                }
                let mut next = w.clone();
                next.union_with(&self.txns[t]);
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
            order.push(w);
        }
        order
    }

    /// Greedy absorption to a fixpoint over the transactions allowed by
    /// `allowed`. Unique when there are no key/fd constraints.
    pub fn closure(&self, allowed: impl Fn(usize) -> bool) -> Mask {
        let mut w = self.empty_mask();
        loop {
            let mut progressed = false;
            for t in 0..self.txns.len() {
                if allowed(t) && !self.txns[t].is_subset(&w) && self.can_absorb(&w, t) {
                    w.union_with(&self.txns[t]);
                    progressed = true;
                }
            }
            if !progressed {
                return w;
            }
        }
    }

    /// Indices of transactions whose tuples all lie in the world.
    pub fn contained(&self, world: &Mask) -> Vec<usize> {
        (0..self.txns.len())
            .filter(|&t| self.txns[t].is_subset(world))
            .collect()
    }

    pub fn materialize(&self, base: &DatabaseState, world: &Mask) -> DatabaseState {
        let mut s = base.clone();
        for i in world.ones() {
            s.insert(self.tuples[i].clone())
                .expect("tuples were schema-checked at build time");
        }
        s
    }
}
