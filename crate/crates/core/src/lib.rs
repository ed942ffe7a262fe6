//! Blockchain databases: a relational state with integrity constraints and a
//! pool of pending insert-only transactions, interpreted under possible-world
//! semantics.

pub mod chain;
pub mod constraints;
pub mod denial;
pub mod error;
pub mod query;
pub mod reductions;
pub mod schema;
pub mod sepgen;
pub mod textio;
pub mod value;
mod witness;
mod worlds;

pub use chain::{BlockchainDatabase, Transaction, World};
pub use constraints::{ConstraintKinds, ConstraintSet, FunctionalDependency, InclusionDependency};
pub use error::{Error, Result};
pub use schema::{DatabaseState, RelationSchema, Schema, Tuple};
pub use value::Value;
