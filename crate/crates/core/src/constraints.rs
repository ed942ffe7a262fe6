//! Keys, functional dependencies and inclusion dependencies, and checking
//! whether a state satisfies them.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::schema::{DatabaseState, RelationSchema, Schema, Tuple};
use crate::value::Value;

/// `relation: lhs -> rhs`. Attribute lists are kept in schema order without
/// duplicates, so two dependencies over the same sets compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunctionalDependency {
    relation: String,
    lhs: Vec<String>,
    rhs: Vec<String>,
    is_key: bool,
}

fn schema_ordered<S: AsRef<str>>(rel: &RelationSchema, attrs: &[S]) -> Result<Vec<String>> {
    let mut positions = rel.positions(attrs)?;
    positions.sort_unstable();
    positions.dedup();
    Ok(positions.into_iter().map(|p| rel.attributes()[p].clone()).collect())
}

impl FunctionalDependency {
    pub fn new<S: AsRef<str>, U: AsRef<str>>(schema: &Schema, relation: &str, lhs: &[S], rhs: &[U]) -> Result<Self> {
        let rel = schema.get(relation)?;
        let lhs = schema_ordered(rel, lhs)?;
        let rhs = schema_ordered(rel, rhs)?;
        if lhs.is_empty() {
            return Err(Error::Schema(format!(
                "functional dependency on `{relation}` has an empty left-hand side"
            )));
        }
        if rhs.is_empty() {
            return Err(Error::Schema(format!(
                "functional dependency on `{relation}` has an empty right-hand side"
            )));
        }
        let is_key = rhs.len() == rel.arity();
        Ok(FunctionalDependency {
            relation: relation.to_string(),
            lhs,
            rhs,
            is_key,
        })
    }

    /// `key relation(attrs)`: the attributes determine the whole tuple.
    pub fn key<S: AsRef<str>>(schema: &Schema, relation: &str, attrs: &[S]) -> Result<Self> {
        let all: Vec<String> = schema.get(relation)?.attributes().to_vec();
        Self::new(schema, relation, attrs, &all)
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn lhs(&self) -> &[String] {
        &self.lhs
    }

    pub fn rhs(&self) -> &[String] {
        &self.rhs
    }

    pub fn is_key(&self) -> bool {
        self.is_key
    }
}

impl fmt::Display for FunctionalDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_key {
            write!(f, "key {}({})", self.relation, self.lhs.join(", "))
        } else {
            write!(
                f,
                "fd {}: {} -> {}",
                self.relation,
                self.lhs.join(", "),
                self.rhs.join(", ")
            )
        }
    }
}

/// `source[attrs] <= target[attrs]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InclusionDependency {
    source: String,
    source_attrs: Vec<String>,
    target: String,
    target_attrs: Vec<String>,
}

impl InclusionDependency {
    pub fn new<S: AsRef<str>>(
        schema: &Schema,
        source: &str,
        source_attrs: &[S],
        target: &str,
        target_attrs: &[S],
    ) -> Result<Self> {
        if source_attrs.len() != target_attrs.len() {
            return Err(Error::Schema(format!(
                "inclusion dependency {source} <= {target}: attribute lists differ in length"
            )));
        }
        if source_attrs.is_empty() {
            return Err(Error::Schema(format!(
                "inclusion dependency {source} <= {target}: empty attribute list"
            )));
        }
        for (rel, attrs) in [(source, source_attrs), (target, target_attrs)] {
            let positions = schema.get(rel)?.positions(attrs)?;
            let distinct: BTreeSet<_> = positions.iter().collect();
            if distinct.len() != positions.len() {
                return Err(Error::Schema(format!(
                    "inclusion dependency {source} <= {target}: repeated attribute in `{rel}`"
                )));
            }
        }
        Ok(InclusionDependency {
            source: source.to_string(),
            source_attrs: source_attrs.iter().map(|a| a.as_ref().to_string()).collect(),
            target: target.to_string(),
            target_attrs: target_attrs.iter().map(|a| a.as_ref().to_string()).collect(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn source_attrs(&self) -> &[String] {
        &self.source_attrs
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn target_attrs(&self) -> &[String] {
        &self.target_attrs
    }
}

impl fmt::Display for InclusionDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ind {}[{}] <= {}[{}]",
            self.source,
            self.source_attrs.join(", "),
            self.target,
            self.target_attrs.join(", ")
        )
    }
}

/// Which constraint types occur in a set (never asserted by the user).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct ConstraintKinds {
    pub key: bool,
    pub fd: bool,
    pub ind: bool,
}

impl ConstraintKinds {
    /// No inclusion dependencies.
    pub fn key_fd_only(&self) -> bool {
        !self.ind
    }

    /// No keys or functional dependencies.
    pub fn ind_only(&self) -> bool {
        !self.key && !self.fd
    }

    pub fn is_empty(&self) -> bool {
        !self.key && !self.fd && !self.ind
    }
}

impl fmt::Display for ConstraintKinds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.key, "key"), (self.fd, "fd"), (self.ind, "ind")]
            .into_iter()
            .filter_map(|(b, n)| b.then_some(n))
            .collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    fds: BTreeSet<FunctionalDependency>,
    inds: BTreeSet<InclusionDependency>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_fd(&mut self, fd: FunctionalDependency) {
        self.fds.insert(fd);
    }

    pub fn add_ind(&mut self, ind: InclusionDependency) {
        self.inds.insert(ind);
    }

    pub fn with_fd(mut self, fd: FunctionalDependency) -> Self {
        self.add_fd(fd);
        self
    }

    pub fn with_ind(mut self, ind: InclusionDependency) -> Self {
        self.add_ind(ind);
        self
    }

    pub fn fds(&self) -> impl Iterator<Item = &FunctionalDependency> {
        self.fds.iter()
    }

    pub fn inds(&self) -> impl Iterator<Item = &InclusionDependency> {
        self.inds.iter()
    }

    pub fn kinds(&self) -> ConstraintKinds {
        ConstraintKinds {
            key: self.fds.iter().any(|f| f.is_key),
            fd: self.fds.iter().any(|f| !f.is_key),
            ind: !self.inds.is_empty(),
        }
    }

    /// The same set without inclusion dependencies.
    pub fn fds_only(&self) -> ConstraintSet {
        ConstraintSet {
            fds: self.fds.clone(),
            inds: BTreeSet::new(),
        }
    }

    /// The same set without keys and functional dependencies.
    pub fn inds_only(&self) -> ConstraintSet {
        ConstraintSet {
            fds: BTreeSet::new(),
            inds: self.inds.clone(),
        }
    }

    /// Dependencies rewritten to single-attribute right-hand sides, trivial
    /// ones (rhs within lhs) dropped, in canonical order.
    pub fn normalized_fds(&self, schema: &Schema) -> Result<Vec<NormalizedFd>> {
        let mut out = BTreeSet::new();
        for fd in &self.fds {
            let rel = schema.get(&fd.relation)?;
            let lhs = rel.positions(&fd.lhs)?;
            for a in rel.positions(&fd.rhs)? {
                if !lhs.contains(&a) {
                    out.insert(NormalizedFd {
                        relation: fd.relation.clone(),
                        lhs: lhs.clone(),
                        rhs: a,
                    });
                }
            }
        }
        Ok(out.into_iter().collect())
    }
}

/// `relation: lhs -> rhs` with a single right-hand attribute, by position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NormalizedFd {
    pub relation: String,
    pub lhs: Vec<usize>,
    pub rhs: usize,
}

impl NormalizedFd {
    /// Whether two rows of the relation violate this dependency.
    pub fn violated_by(&self, a: &[Value], b: &[Value]) -> bool {
        self.lhs.iter().all(|&p| a[p] == b[p]) && a[self.rhs] != b[self.rhs]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Fd {
        constraint: String,
        tuples: [String; 2],
        #[serde(skip)]
        witnesses: (Tuple, Tuple),
    },
    Ind {
        constraint: String,
        tuple: String,
        #[serde(skip)]
        witness: Tuple,
    },
}

fn fd_violating_pairs(state: &DatabaseState, fd: &FunctionalDependency) -> Result<Vec<(Tuple, Tuple)>> {
    let rel = state.schema().get(&fd.relation)?;
    let lhs = rel.positions(&fd.lhs)?;
    let rhs = rel.positions(&fd.rhs)?;
    let mut groups: HashMap<Vec<&Value>, Vec<&Vec<Value>>> = HashMap::new();
    for row in state.rows(&fd.relation) {
        groups
            .entry(lhs.iter().map(|&p| &row[p]).collect())
            .or_default()
            .push(row);
    }
    let mut pairs = Vec::new();
    for rows in groups.values() {
        for (i, a) in rows.iter().enumerate() {
            for b in &rows[i + 1..] {
                if rhs.iter().any(|&p| a[p] != b[p]) {
                    let (x, y) = if a <= b { (a, b) } else { (b, a) };
                    pairs.push((
                        Tuple::new(fd.relation.clone(), x.iter().cloned()),
                        Tuple::new(fd.relation.clone(), y.iter().cloned()),
                    ));
                }
            }
        }
    }
    pairs.sort();
    Ok(pairs)
}

fn ind_unmatched(state: &DatabaseState, ind: &InclusionDependency) -> Result<Vec<Tuple>> {
    let schema = state.schema();
    let src = schema.get(&ind.source)?.positions(&ind.source_attrs)?;
    let tgt = schema.get(&ind.target)?.positions(&ind.target_attrs)?;
    let available: HashSet<Vec<&Value>> = state
        .rows(&ind.target)
        .map(|row| tgt.iter().map(|&p| &row[p]).collect())
        .collect();
    Ok(state
        .rows(&ind.source)
        .filter(|row| !available.contains(&src.iter().map(|&p| &row[p]).collect::<Vec<_>>()))
        .map(|row| Tuple::new(ind.source.clone(), row.iter().cloned()))
        .collect())
}

/// True iff no two tuples agree on the lhs and disagree on the rhs.
pub fn check_fd(state: &DatabaseState, fd: &FunctionalDependency) -> Result<bool> {
    let rel = state.schema().get(&fd.relation)?;
    let lhs = rel.positions(&fd.lhs)?;
    let rhs = rel.positions(&fd.rhs)?;
    let mut seen: HashMap<Vec<&Value>, Vec<&Value>> = HashMap::new();
    for row in state.rows(&fd.relation) {
        let key: Vec<&Value> = lhs.iter().map(|&p| &row[p]).collect();
        let val: Vec<&Value> = rhs.iter().map(|&p| &row[p]).collect();
        match seen.get(&key) {
            Some(prev) if *prev != val => return Ok(false),
            Some(_) => {}
            None => {
                seen.insert(key, val);
            }
        }
    }
    Ok(true)
}

/// True iff every source projection occurs as a target projection.
pub fn check_ind(state: &DatabaseState, ind: &InclusionDependency) -> Result<bool> {
    Ok(ind_unmatched(state, ind)?.is_empty())
}

pub fn satisfies(state: &DatabaseState, ic: &ConstraintSet) -> Result<bool> {
    for fd in ic.fds() {
        if !check_fd(state, fd)? {
            return Ok(false);
        }
    }
    for ind in ic.inds() {
        if !check_ind(state, ind)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Only the key and functional dependencies of `ic`.
pub fn satisfies_fds(state: &DatabaseState, ic: &ConstraintSet) -> Result<bool> {
    for fd in ic.fds() {
        if !check_fd(state, fd)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Only the inclusion dependencies of `ic`.
pub fn satisfies_inds(state: &DatabaseState, ic: &ConstraintSet) -> Result<bool> {
    for ind in ic.inds() {
        if !check_ind(state, ind)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every violated constraint with its witnesses; empty iff `satisfies`.
pub fn violations(state: &DatabaseState, ic: &ConstraintSet) -> Result<Vec<Violation>> {
    let mut out = Vec::new();
    for fd in ic.fds() {
        for (a, b) in fd_violating_pairs(state, fd)? {
            out.push(Violation::Fd {
                constraint: fd.to_string(),
                tuples: [a.to_string(), b.to_string()],
                witnesses: (a, b),
            });
        }
    }
    for ind in ic.inds() {
        for t in ind_unmatched(state, ind)? {
            out.push(Violation::Ind {
                constraint: ind.to_string(),
                tuple: t.to_string(),
                witness: t,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn schema() -> Arc<Schema> {
        Arc::new(
            Schema::new()
                .with(RelationSchema::new("R", ["A", "B"]).unwrap())
                .unwrap()
                .with(RelationSchema::new("S", ["C"]).unwrap())
                .unwrap(),
        )
    }

    fn r(a: Value, b: i64) -> Tuple {
        Tuple::new("R", [a, Value::Int(b)])
    }

    #[test]
    fn fd_violation_detected() {
        let s = schema();
        let fd = FunctionalDependency::new(&s, "R", &["A"], &["B"]).unwrap();
        let st = DatabaseState::from_tuples(s.clone(), [r("a".into(), 1), r("a".into(), 2)]).unwrap();
        assert!(!check_fd(&st, &fd).unwrap());
        assert!(check_fd(&DatabaseState::new(s), &fd).unwrap());
    }

    #[test]
    fn ind_requires_witness() {
        let s = schema();
        let ind = InclusionDependency::new(&s, "S", &["C"], "R", &["A"]).unwrap();
        let st = DatabaseState::from_tuples(s.clone(), [Tuple::new("S", [Value::Int(9)])]).unwrap();
        assert!(!check_ind(&st, &ind).unwrap());
        let v = violations(&st, &ConstraintSet::new().with_ind(ind.clone())).unwrap();
        assert_eq!(v.len(), 1);
        assert!(matches!(&v[0], Violation::Ind { witness, .. } if witness.values == vec![Value::Int(9)]));
        assert!(check_ind(&DatabaseState::new(s), &ind).unwrap());
    }

    #[test]
    fn key_flag_is_derived() {
        let s = schema();
        let key = FunctionalDependency::key(&s, "R", &["A"]).unwrap();
        assert!(key.is_key());
        let fd = FunctionalDependency::new(&s, "R", &["A"], &["B"]).unwrap();
        assert!(!fd.is_key());
        let ic = ConstraintSet::new().with_fd(key.clone());
        assert_eq!(
            ic.kinds(),
            ConstraintKinds {
                key: true,
                fd: false,
                ind: false
            }
        );
        // key R(A) normalises to the single dependency A -> B
        assert_eq!(
            ic.normalized_fds(&s).unwrap(),
            vec![NormalizedFd {
                relation: "R".into(),
                lhs: vec![0],
                rhs: 1
            }]
        );
    }

    #[test]
    fn schema_errors() {
        let s = schema();
        assert!(matches!(
            FunctionalDependency::new(&s, "Q", &["A"], &["B"]),
            Err(Error::UnknownRelation(_))
        ));
        assert!(matches!(
            FunctionalDependency::new(&s, "R", &["Z"], &["B"]),
            Err(Error::UnknownAttribute { .. })
        ));
        assert!(InclusionDependency::new(&s, "S", &["C"], "R", &["A", "B"]).is_err());
    }
}
