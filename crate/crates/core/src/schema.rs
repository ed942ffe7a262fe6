//! Relation schemas, tuples and database states (sets of tuples).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelationSchema {
    name: String,
    attributes: Vec<String>,
}

impl RelationSchema {
    pub fn new<S: Into<String>>(name: impl Into<String>, attributes: impl IntoIterator<Item = S>) -> Result<Self> {
        let name = name.into();
        let attributes: Vec<String> = attributes.into_iter().map(Into::into).collect();
        if attributes.is_empty() {
            return Err(Error::Schema(format!("relation `{name}` has no attributes")));
        }
        let mut seen = BTreeSet::new();
        for a in &attributes {
            if !seen.insert(a.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute `{a}` in relation `{name}`")));
            }
        }
        Ok(RelationSchema { name, attributes })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn position(&self, attribute: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a == attribute)
            .ok_or_else(|| Error::UnknownAttribute {
                relation: self.name.clone(),
                attribute: attribute.to_string(),
            })
    }

    pub fn positions<S: AsRef<str>>(&self, attributes: &[S]) -> Result<Vec<usize>> {
        attributes.iter().map(|a| self.position(a.as_ref())).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    relations: BTreeMap<String, RelationSchema>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, relation: RelationSchema) -> Result<()> {
        if self.relations.contains_key(relation.name()) {
            return Err(Error::Schema(format!("relation `{}` declared twice", relation.name())));
        }
        self.relations.insert(relation.name.clone(), relation);
        Ok(())
    }

    pub fn with(mut self, relation: RelationSchema) -> Result<Self> {
        self.add(relation)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Result<&RelationSchema> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.relations.contains_key(name)
    }

    /// Relations in name order.
    pub fn relations(&self) -> impl Iterator<Item = &RelationSchema> {
        self.relations.values()
    }

    pub fn check_tuple(&self, tuple: &Tuple) -> Result<()> {
        let rel = self.get(&tuple.relation)?;
        if rel.arity() != tuple.values.len() {
            return Err(Error::Arity {
                relation: tuple.relation.clone(),
                expected: rel.arity(),
                found: tuple.values.len(),
            });
        }
        Ok(())
    }
}

/// A ground fact `relation(values...)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tuple {
    pub relation: String,
    pub values: Vec<Value>,
}

impl Tuple {
    pub fn new(relation: impl Into<String>, values: impl IntoIterator<Item = Value>) -> Self {
        Tuple {
            relation: relation.into(),
            values: values.into_iter().collect(),
        }
    }

    pub fn project(&self, positions: &[usize]) -> Vec<Value> {
        positions.iter().map(|&p| self.values[p].clone()).collect()
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// A set of tuples conforming to a shared schema. Relations without tuples
/// are not stored, so structural equality is set equality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatabaseState {
    schema: Arc<Schema>,
    relations: BTreeMap<String, BTreeSet<Vec<Value>>>,
}

impl DatabaseState {
    pub fn new(schema: Arc<Schema>) -> Self {
        DatabaseState {
            schema,
            relations: BTreeMap::new(),
        }
    }

    pub fn from_tuples(schema: Arc<Schema>, tuples: impl IntoIterator<Item = Tuple>) -> Result<Self> {
        let mut state = DatabaseState::new(schema);
        for t in tuples {
            state.insert(t)?;
        }
        Ok(state)
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// Inserts a tuple; returns whether it was new. Re-inserting is a no-op.
    pub fn insert(&mut self, tuple: Tuple) -> Result<bool> {
        self.schema.check_tuple(&tuple)?;
        Ok(self.relations.entry(tuple.relation).or_default().insert(tuple.values))
    }

    pub fn extend<'a>(&mut self, tuples: impl IntoIterator<Item = &'a Tuple>) -> Result<()> {
        for t in tuples {
            self.insert(t.clone())?;
        }
        Ok(())
    }

    pub fn contains(&self, tuple: &Tuple) -> bool {
        self.relations
            .get(&tuple.relation)
            .is_some_and(|rows| rows.contains(&tuple.values))
    }

    pub fn contains_all<'a>(&self, tuples: impl IntoIterator<Item = &'a Tuple>) -> bool {
        tuples.into_iter().all(|t| self.contains(t))
    }

    /// Rows of one relation in canonical order. Unknown relations yield nothing.
    pub fn rows(&self, relation: &str) -> impl Iterator<Item = &Vec<Value>> {
        self.relations.get(relation).into_iter().flatten()
    }

    pub fn relation_len(&self, relation: &str) -> usize {
        self.relations.get(relation).map_or(0, BTreeSet::len)
    }

    /// All tuples, relations by name and rows in canonical order.
    pub fn tuples(&self) -> impl Iterator<Item = Tuple> + '_ {
        self.relations
            .iter()
            .flat_map(|(r, rows)| rows.iter().map(move |v| Tuple::new(r.clone(), v.iter().cloned())))
    }

    pub fn len(&self) -> usize {
        self.relations.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn is_subset(&self, other: &DatabaseState) -> bool {
        self.relations
            .iter()
            .all(|(r, rows)| other.relations.get(r).is_some_and(|o| rows.is_subset(o)))
    }

    pub fn union(&self, other: &DatabaseState) -> Result<DatabaseState> {
        let mut out = self.clone();
        for (r, rows) in &other.relations {
            out.schema.get(r)?;
            out.relations.entry(r.clone()).or_default().extend(rows.iter().cloned());
        }
        Ok(out)
    }

    pub fn with_tuples<'a>(&self, tuples: impl IntoIterator<Item = &'a Tuple>) -> Result<DatabaseState> {
        let mut out = self.clone();
        out.extend(tuples)?;
        Ok(out)
    }

    /// Every constant occurring in the state, in canonical order.
    pub fn active_domain(&self) -> BTreeSet<Value> {
        self.relations
            .values()
            .flatten()
            .flat_map(|row| row.iter().cloned())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Arc<Schema> {
        Arc::new(
            Schema::new()
                .with(RelationSchema::new("R", ["A", "B"]).unwrap())
                .unwrap(),
        )
    }

    #[test]
    fn duplicate_attributes_rejected() {
        assert!(RelationSchema::new("R", ["A", "A"]).is_err());
    }

    #[test]
    fn set_semantics_and_arity() {
        let mut s = DatabaseState::new(schema());
        assert!(s.insert(Tuple::new("R", [Value::Int(1), Value::Int(2)])).unwrap());
        assert!(!s.insert(Tuple::new("R", [Value::Int(1), Value::Int(2)])).unwrap());
        assert_eq!(s.len(), 1);
        assert!(matches!(
            s.insert(Tuple::new("R", [Value::Int(1)])),
            Err(Error::Arity { .. })
        ));
        assert!(matches!(
            s.insert(Tuple::new("S", [Value::Int(1)])),
            Err(Error::UnknownRelation(_))
        ));
    }

    #[test]
    fn subset_and_union() {
        let a = DatabaseState::from_tuples(schema(), [Tuple::new("R", [Value::Int(1), Value::Int(2)])]).unwrap();
        let b = DatabaseState::from_tuples(schema(), [Tuple::new("R", [Value::Int(3), Value::Int(4)])]).unwrap();
        let u = a.union(&b).unwrap();
        assert!(a.is_subset(&u) && b.is_subset(&u) && !u.is_subset(&a));
        assert_eq!(u.len(), 2);
        assert!(DatabaseState::new(schema()).is_subset(&a));
    }
}
