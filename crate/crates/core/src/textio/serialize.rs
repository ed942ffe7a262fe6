use std::fmt::Write;

use crate::chain::{BlockchainDatabase, Transaction};
use crate::reductions::Problem;
use crate::sepgen::SeparationSpec;
use crate::value::{is_bare_identifier, quote};

pub(crate) fn label(l: &str) -> String {
    if is_bare_identifier(l) {
        l.to_string()
    } else {
        quote(l)
    }
}

fn labels<'a>(ls: impl IntoIterator<Item = &'a String>) -> String {
    ls.into_iter().map(|l| label(l)).collect::<Vec<_>>().join(", ")
}

/// `txn LABEL { … }` with one tuple per line in canonical order.
pub fn serialize_transaction(t: &Transaction) -> String {
    let mut s = format!("txn {} {{\n", label(t.label()));
    for tuple in t.tuples() {
        let _ = writeln!(s, "  {tuple};");
    }
    s.push_str("}\n");
    s
}

/// Canonical bundle text: relations, constraints, state and transactions,
/// each section sorted and separated by a blank line.
pub fn serialize_bundle(db: &BlockchainDatabase) -> String {
    let mut sections: Vec<String> = Vec::new();
    let relations: String = db
        .schema()
        .relations()
        .map(|r| format!("relation {}({})\n", r.name(), r.attributes().join(", ")))
        .collect();
    sections.push(relations);
    let ic = db.constraints();
    let constraints: String = ic
        .fds()
        .map(ToString::to_string)
        .chain(ic.inds().map(ToString::to_string))
        .map(|l| l + "\n")
        .collect();
    sections.push(constraints);
    sections.push(db.state().tuples().map(|t| format!("state {t}\n")).collect());
    sections.extend(db.pending().iter().map(serialize_transaction));
    sections.retain(|s| !s.is_empty());
    sections.join("\n")
}

pub fn serialize_separation(spec: &SeparationSpec) -> String {
    let mut s = format!(
        "separate in = {{{}}} out = {{{}}}",
        labels(&spec.t_in),
        labels(&spec.t_out)
    );
    if let Some(b) = spec.bound {
        let _ = write!(s, " bound = {b}");
    }
    s.push('\n');
    s
}

/// The query (`.dq`) or separation spec text of a generated instance.
pub fn serialize_problem(problem: &Problem) -> String {
    match problem {
        Problem::Denial(q) => format!("{q}\n"),
        Problem::Separation(spec) => serialize_separation(spec),
    }
}
