//! Text formats: `.bcdb` bundles, `.dq` denial constraints, separation
//! specs, and the records printed by the command line.
//!
//! ```text
//! relation R(A, B)          # schema
//! key R(A)                  # key, fd R: A -> B, ind R[B] <= S[C]
//! state R(1, "x y")         # tuples of the current state
//! txn T1 { R(2, b); }       # pending transactions
//!
//! deny q :- R(x, y), !S(y), x != 3
//! deny q2 [sum(a) :- R(a, b)] > 5
//! separate in = {T1} out = {T2} bound = 2
//! ```
//!
//! In data positions bare identifiers are symbols; in queries they are
//! variables and symbols must be quoted. `fresh#N` denotes a generated
//! constant.

mod lexer;
mod parser;
mod report;
mod serialize;
mod source;

use std::path::Path;

use crate::error::Error;

pub use parser::{parse_bundle, parse_queries, parse_query, parse_separation, parse_transactions, parse_value};
pub use report::{
    world_records, worlds_text, ClassificationRecord, SeparationRecord, ValidationRecord, VerdictRecord, WorldRecord,
};
pub use serialize::{serialize_bundle, serialize_problem, serialize_separation, serialize_transaction};
pub use source::{parse_dimacs, parse_hitting_set, HittingSetInstance};

/// Text together with the name it was read from, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDocument {
    pub origin: String,
    pub text: String,
}

impl SourceDocument {
    pub fn new(origin: impl Into<String>, text: impl Into<String>) -> Self {
        SourceDocument {
            origin: origin.into(),
            text: text.into(),
        }
    }

    /// Reads a file; invalid UTF-8 is reported as a parse error at the
    /// first bad byte.
    pub fn read(path: &Path) -> std::io::Result<std::result::Result<Self, Error>> {
        let bytes = std::fs::read(path)?;
        let origin = path.display().to_string();
        Ok(match String::from_utf8(bytes) {
            Ok(text) => Ok(SourceDocument { origin, text }),
            Err(e) => {
                let good = &e.as_bytes()[..e.utf8_error().valid_up_to()];
                let prefix = String::from_utf8_lossy(good);
                let line = prefix.matches('\n').count() + 1;
                let col = prefix.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
                Err(Error::Parse {
                    line,
                    col,
                    message: "invalid UTF-8".into(),
                })
            }
        })
    }

    /// `origin:line:col: message` for positioned errors, `origin: message`
    /// otherwise.
    pub fn diagnostic(&self, e: &Error) -> String {
        match e {
            Error::Parse { line, col, message } => format!("{}:{line}:{col}: {message}", self.origin),
            other => format!("{}: {other}", self.origin),
        }
    }
}
