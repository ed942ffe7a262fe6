//! Output records shared by the text and structured renderings. Every field
//! printed in text mode is a field of the record, so the JSON form carries
//! the same information.

use std::fmt::Write;

use serde::Serialize;

use crate::chain::World;
use crate::constraints::ConstraintSet;
use crate::denial::{Algorithm, Classification, Complexity, DenialConstraint, Verdict};
use crate::sepgen::SeparationResult;

use super::serialize::serialize_transaction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorldRecord {
    pub world: String,
    pub labels: Vec<String>,
}

impl From<&World> for WorldRecord {
    fn from(w: &World) -> Self {
        WorldRecord {
            world: w.to_string(),
            labels: w.labels.iter().cloned().collect(),
        }
    }
}

pub fn world_records(worlds: &[World]) -> Vec<WorldRecord> {
    worlds.iter().map(WorldRecord::from).collect()
}

pub fn worlds_text(records: &[WorldRecord]) -> String {
    records.iter().map(|r| format!("{}\n", r.world)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerdictRecord {
    pub query: String,
    pub verdict: &'static str,
    pub algorithm: Algorithm,
    pub complexity: Complexity,
    pub counterexample: Option<WorldRecord>,
    pub notes: Vec<String>,
}

impl VerdictRecord {
    pub fn new(q: &DenialConstraint, v: &Verdict) -> Self {
        VerdictRecord {
            query: q.name().to_string(),
            verdict: if v.holds { "holds" } else { "violated" },
            algorithm: v.algorithm,
            complexity: v.complexity,
            counterexample: v.counterexample.as_ref().map(WorldRecord::from),
            notes: v.notes.clone(),
        }
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "{}: {}\n  algorithm: {}\n  complexity: {}\n",
            self.query, self.verdict, self.algorithm, self.complexity
        );
        if let Some(w) = &self.counterexample {
            let _ = writeln!(s, "  counterexample: {}", w.world);
        }
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassificationRecord {
    pub query: String,
    pub query_class: String,
    pub constraints: String,
    pub complexity: Complexity,
    pub algorithm: Algorithm,
    pub notes: Vec<String>,
}

impl ClassificationRecord {
    pub fn new(q: &DenialConstraint, ic: &ConstraintSet, c: &Classification) -> Self {
        let query_class = match q {
            DenialConstraint::Conjunctive(_) => "cq".to_string(),
            DenialConstraint::Aggregate(a) => format!("{} {}", a.func(), a.cmp().symbol()),
        };
        let query_class = if q.is_positive() {
            query_class
        } else {
            format!("{query_class} with negation")
        };
        ClassificationRecord {
            query: q.name().to_string(),
            query_class,
            constraints: ic.kinds().to_string(),
            complexity: c.complexity,
            algorithm: c.algorithm,
            notes: c.notes.clone(),
        }
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "{}: {} under {}\n  complexity: {}\n  algorithm: {}\n",
            self.query, self.query_class, self.constraints, self.complexity, self.algorithm
        );
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeparationRecord {
    pub status: &'static str,
    pub route: Option<&'static str>,
    pub reason: Option<&'static str>,
    pub domain_relative: Option<bool>,
    pub transaction: Option<String>,
}

impl From<&SeparationResult> for SeparationRecord {
    fn from(r: &SeparationResult) -> Self {
        match r {
            SeparationResult::Found {
                transaction,
                route,
                domain_relative,
            } => SeparationRecord {
                status: "found",
                route: Some(route.tag()),
                reason: None,
                domain_relative: Some(*domain_relative),
                transaction: Some(serialize_transaction(transaction)),
            },
            SeparationResult::TriviallySeparating { route } => SeparationRecord {
                status: "trivially-separating",
                route: Some(route.tag()),
                reason: None,
                domain_relative: None,
                transaction: None,
            },
            SeparationResult::Failed { reason, route } => SeparationRecord {
                status: "failed",
                route: route.map(|r| r.tag()),
                reason: Some(reason.tag()),
                domain_relative: None,
                transaction: None,
            },
        }
    }
}

impl SeparationRecord {
    /// A found transaction is printed in `txn` syntax, preceded by comment
    /// lines, so the output can be appended to a bundle as is.
    pub fn text(&self) -> String {
        let mut s = format!("# status: {}\n", self.status);
        if let Some(r) = self.route {
            let _ = writeln!(s, "# route: {r}");
        }
        if let Some(r) = self.reason {
            let _ = writeln!(s, "# reason: {r}");
        }
        if let Some(d) = self.domain_relative {
            let _ = writeln!(s, "# domain_relative: {d}");
        }
        if let Some(t) = &self.transaction {
            s.push_str(t);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationRecord {
    pub ok: bool,
    pub relations: usize,
    pub constraints: String,
    pub state_tuples: usize,
    pub transactions: usize,
    pub diagnostics: Vec<String>,
}

impl ValidationRecord {
    pub fn text(&self) -> String {
        let mut s = String::new();
        for d in &self.diagnostics {
            let _ = writeln!(s, "error: {d}");
        }
        if self.ok {
            let _ = writeln!(
                s,
                "ok: {} relations, constraints {}, {} state tuples, {} transactions",
                self.relations, self.constraints, self.state_tuples, self.transactions
            );
        }
        s
    }
}
