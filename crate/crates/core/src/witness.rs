//! Goal-directed search for a world that makes a denial query true.
//!
//! A world is grown from ℛ by committing to pending transactions, each one
//! chosen because it provides a tuple that is still needed: a tuple in the
//! image of an answer the search has decided to realise, or a witness for an
//! inclusion dependency of a committed transaction that cannot be appended
//! yet. Once every committed transaction can be appended the committed set
//! is a possible world.
//!
//! Any world `W` where a set of answers is valid contains such a grown world
//! `W0 ⊆ W` where the same answers are valid: follow the append order of `W`
//! when picking providers. Negated tuples absent from `W` stay absent from
//! `W0`, and with a positive body `W0` has no answer `W` lacks. The search is
//! therefore exact for conjunctive queries, for aggregates over positive
//! bodies whose value only grows with the bag, and for `>` comparisons with
//! negation.

use std::collections::HashSet;

use fixedbitset::FixedBitSet;

use crate::error::Result;
use crate::query::{aggregate_apply, AggCmp, AggregateQuery, Bag};
use crate::value::Value;
use crate::worlds::{Mask, WorldSpace};

/// A satisfying assignment of the positive atoms, as the pending tuples it
/// needs present and absent, with the aggregated row.
pub(crate) struct Answer {
    pub pos: Mask,
    pub neg: Mask,
    pub row: Vec<Value>,
}

impl Answer {
    fn valid_in(&self, world: &Mask) -> bool {
        self.pos.is_subset(world) && self.neg.is_disjoint(world)
    }
}

pub(crate) enum Goal<'a> {
    /// Some answer is valid.
    Exists,
    Aggregate(&'a AggregateQuery),
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Node {
    chosen: FixedBitSet,
    world: Mask,
    required: Mask,
    forbidden: Mask,
    excluded: FixedBitSet,
}

pub(crate) struct Search<'a> {
    space: &'a WorldSpace,
    answers: &'a [Answer],
    goal: Goal<'a>,
    positive: bool,
    holders: Vec<Vec<usize>>,
    viable: Vec<bool>,
    seen: HashSet<Node>,
    /// Stop at the first closed world instead of extending it.
    realize: bool,
}

impl<'a> Search<'a> {
    pub fn new(space: &'a WorldSpace, answers: &'a [Answer], goal: Goal<'a>, positive: bool) -> Self {
        let mut holders = vec![Vec::new(); space.tuples.len()];
        for (t, m) in space.txns.iter().enumerate() {
            for i in m.ones() {
                holders[i].push(t);
            }
        }
        let viable = (0..space.txns.len()).map(|t| space.fd_consistent(t)).collect();
        Search {
            space,
            answers,
            goal,
            positive,
            holders,
            viable,
            seen: HashSet::new(),
            realize: false,
        }
    }

    /// A world where the goal holds, if any.
    pub fn run(mut self) -> Result<Option<Mask>> {
        let root = self.root(self.space.empty_mask(), self.space.empty_mask());
        match self.goal {
            Goal::Aggregate(q) if !self.positive && q.cmp() == AggCmp::Gt => {
                // Realising an answer here can rule others out, so answers are
                // settled first and each chosen set is only checked for a
                // world.
                self.realize = true;
                let w = self.world_for(&root.required, &root.forbidden)?;
                match w {
                    Some(w) => self.settle(0, &FixedBitSet::with_capacity(self.answers.len()), &root, w),
                    None => Ok(None),
                }
            }
            _ => self.explore(root),
        }
    }

    fn root(&self, required: Mask, forbidden: Mask) -> Node {
        Node {
            chosen: FixedBitSet::with_capacity(self.space.txns.len()),
            world: self.space.empty_mask(),
            required,
            forbidden,
            excluded: FixedBitSet::with_capacity(self.answers.len()),
        }
    }

    /// Some world containing `required` and avoiding `forbidden`.
    fn world_for(&mut self, required: &Mask, forbidden: &Mask) -> Result<Option<Mask>> {
        self.seen.clear();
        self.explore(self.root(required.clone(), forbidden.clone()))
    }

    /// Decides answers `j..` in order, include first. `n` carries the tuples
    /// the answers taken so far need present and absent, `w` a world for it.
    fn settle(&mut self, j: usize, taken: &FixedBitSet, n: &Node, w: Mask) -> Result<Option<Mask>> {
        if self.accept(&w)? {
            return Ok(Some(w));
        }
        let Goal::Aggregate(q) = self.goal else { return Ok(None) };
        let bag = self.bag(
            self.answers
                .iter()
                .enumerate()
                .filter(|&(k, a)| taken.contains(k) || (k >= j && self.compatible(a, n)))
                .map(|(_, a)| a),
        );
        if bag.is_empty() || aggregate_apply(q.func(), &bag)?.compare_ordered(q.threshold())?.is_le() {
            return Ok(None);
        }
        let Some(a) = self.answers.get(j) else { return Ok(None) };
        if self.compatible(a, n) {
            let mut take = n.clone();
            take.required.union_with(&a.pos);
            take.forbidden.union_with(&a.neg);
            let found = if a.valid_in(&w) {
                Some(w.clone())
            } else {
                self.world_for(&take.required, &take.forbidden)?
            };
            if let Some(found) = found {
                let mut taken = taken.clone();
                taken.insert(j);
                if let Some(r) = self.settle(j + 1, &taken, &take, found)? {
                    return Ok(Some(r));
                }
            }
        }
        self.settle(j + 1, taken, n, w)
    }

    fn bag<'b>(&self, answers: impl Iterator<Item = &'b Answer>) -> Bag {
        answers.map(|a| a.row.clone()).collect()
    }

    fn accept(&self, world: &Mask) -> Result<bool> {
        match self.goal {
            Goal::Exists => Ok(self.answers.iter().any(|a| a.valid_in(world))),
            Goal::Aggregate(q) => q.decide(&self.bag(self.answers.iter().filter(|a| a.valid_in(world)))),
        }
    }

    /// With a positive body the bag only grows; past the threshold of a `<`
    /// or `=` comparison no extension can succeed.
    fn overshoots(&self, world: &Mask) -> Result<bool> {
        let Goal::Aggregate(q) = self.goal else {
            return Ok(false);
        };
        if !self.positive || q.cmp() == AggCmp::Gt {
            return Ok(false);
        }
        let bag = self.bag(self.answers.iter().filter(|a| a.pos.is_subset(world)));
        if bag.is_empty() {
            return Ok(false);
        }
        let ord = aggregate_apply(q.func(), &bag)?.compare_ordered(q.threshold())?;
        Ok(match q.cmp() {
            AggCmp::Lt => ord.is_ge(),
            _ => ord.is_gt(),
        })
    }

    fn compatible(&self, a: &Answer, n: &Node) -> bool {
        a.pos.is_disjoint(&n.forbidden) && a.neg.is_disjoint(&n.world) && a.neg.is_disjoint(&n.required)
    }

    /// Every answer still allowed to end up valid, aggregated, cannot reach
    /// the threshold of a `>` or `=` comparison.
    fn out_of_reach(&self, n: &Node) -> Result<bool> {
        let Goal::Aggregate(q) = self.goal else {
            return Ok(false);
        };
        if q.cmp() == AggCmp::Lt {
            return Ok(false);
        }
        let bag = self.bag(self.answers.iter().enumerate().filter_map(|(j, a)| {
            (a.valid_in(&n.world) || (!n.excluded.contains(j) && self.compatible(a, n))).then_some(a)
        }));
        if bag.is_empty() {
            return Ok(true);
        }
        let ord = aggregate_apply(q.func(), &bag)?.compare_ordered(q.threshold())?;
        Ok(match q.cmp() {
            AggCmp::Gt => ord.is_le(),
            _ => ord.is_lt(),
        })
    }

    fn eligible(&self, t: usize, n: &Node) -> bool {
        let m = &self.space.txns[t];
        !n.chosen.contains(t)
            && self.viable[t]
            && m.is_disjoint(&n.forbidden)
            && m.difference(&n.world)
                .all(|i| self.space.conflicts[i].is_disjoint(&n.world))
    }

    fn providers(&self, bits: &Mask, n: &Node) -> Vec<usize> {
        let mut out: Vec<usize> = bits
            .ones()
            .flat_map(|i| self.holders[i].iter().copied())
            .filter(|&t| self.eligible(t, n))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn commit(&self, n: &Node, t: usize) -> Node {
        let mut next = n.clone();
        next.chosen.insert(t);
        next.world.union_with(&self.space.txns[t]);
        next
    }

    fn explore(&mut self, n: Node) -> Result<Option<Mask>> {
        if self.seen.contains(&n) || self.overshoots(&n.world)? {
            return Ok(None);
        }
        self.seen.insert(n.clone());

        let absorbed = self.space.closure(|t| n.chosen.contains(t));
        // Requirements no committed transaction provides must be met by a
        // new one; keep the one with the fewest options.
        let mut forced: Option<Vec<usize>> = None;
        let consider = |ps: Vec<usize>, forced: &mut Option<Vec<usize>>| {
            if forced.as_ref().is_none_or(|f| ps.len() < f.len()) {
                *forced = Some(ps);
            }
        };
        let missing = n.required.difference(&n.world).collect::<Vec<_>>();
        for i in missing {
            let mut bit = self.space.empty_mask();
            bit.insert(i);
            consider(self.providers(&bit, &n), &mut forced);
        }
        let mut cyclic: Vec<usize> = Vec::new();
        let mut stuck = false;
        for t in n.chosen.ones() {
            let m = &self.space.txns[t];
            if m.is_subset(&absorbed) {
                continue;
            }
            stuck = true;
            let mut next = absorbed.clone();
            next.union_with(m);
            for i in m.difference(&absorbed) {
                for p in &self.space.requirements[i] {
                    if !p.is_disjoint(&next) {
                        continue;
                    }
                    let ps = self.providers(p, &n);
                    if p.is_disjoint(&n.world) {
                        consider(ps, &mut forced);
                    } else {
                        cyclic.extend(ps);
                    }
                }
            }
        }

        if let Some(ps) = forced {
            for t in ps {
                if let Some(w) = self.explore(self.commit(&n, t))? {
                    return Ok(Some(w));
                }
            }
            return Ok(None);
        }
        if stuck {
            // Every open requirement has a committed but unappendable
            // provider: some other provider must come first.
            cyclic.sort_unstable();
            cyclic.dedup();
            for t in cyclic {
                if let Some(w) = self.explore(self.commit(&n, t))? {
                    return Ok(Some(w));
                }
            }
            return Ok(None);
        }

        if self.realize || self.accept(&n.world)? {
            return Ok(Some(n.world));
        }
        let Some(j) = (0..self.answers.len()).find(|&j| {
            let a = &self.answers[j];
            !n.excluded.contains(j) && !a.valid_in(&n.world) && self.compatible(a, &n)
        }) else {
            return Ok(None);
        };
        let a = &self.answers[j];
        let mut take = n.clone();
        take.required.union_with(&a.pos);
        take.forbidden.union_with(&a.neg);
        if let Some(w) = self.explore(take)? {
            return Ok(Some(w));
        }
        let mut skip = n;
        skip.excluded.insert(j);
        if self.out_of_reach(&skip)? {
            return Ok(None);
        }
        self.explore(skip)
    }
}
