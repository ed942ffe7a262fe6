//! Readers for the source problems of the reductions: DIMACS CNF and a
//! small line format for hitting set.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::reductions::CnfFormula;
use crate::value::Value;

use super::parser::parse_value;

fn at(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col: 1,
        message: message.into(),
    }
}

/// DIMACS CNF: `c` comment lines, a `p cnf VARS CLAUSES` header, clauses as
/// literals terminated by `0`.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["p", "cnf", v, c] if header.is_none() => {
                    let v = v.parse().map_err(|_| at(n, format!("bad variable count `{v}`")))?;
                    let c = c.parse().map_err(|_| at(n, format!("bad clause count `{c}`")))?;
                    header = Some((v, c));
                }
                _ => return Err(at(n, "expected a single `p cnf VARS CLAUSES` header")),
            }
            continue;
        }
        if header.is_none() {
            return Err(at(n, "clause before the `p cnf` header"));
        }
        for lit in line.split_whitespace() {
            let l: i64 = lit.parse().map_err(|_| at(n, format!("bad literal `{lit}`")))?;
            if l == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                current.push(l);
            }
        }
    }
    let (vars, count) = header.ok_or_else(|| at(1, "missing `p cnf` header"))?;
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != count {
        return Err(at(
            1,
            format!("header announces {count} clauses, found {}", clauses.len()),
        ));
    }
    CnfFormula::new(vars, clauses)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HittingSetInstance {
    pub universe: BTreeSet<Value>,
    pub sets: Vec<BTreeSet<Value>>,
    pub k: usize,
}

/// Lines `universe a b c`, `set a b` (repeatable) and `k 2`; `#` comments.
pub fn parse_hitting_set(text: &str) -> Result<HittingSetInstance> {
    let mut universe = None;
    let mut sets = Vec::new();
    let mut k = None;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut words = line.split_whitespace();
        let Some(kw) = words.next() else { continue };
        let values = || -> Result<BTreeSet<Value>> {
            line.split_whitespace()
                .skip(1)
                .map(|w| parse_value(w).map_err(|e| at(n, e.to_string())))
                .collect()
        };
        match kw {
            "universe" if universe.is_none() => universe = Some(values()?),
            "set" => sets.push(values()?),
            "k" if k.is_none() => {
                let w = words.next().ok_or_else(|| at(n, "missing value for k"))?;
                k = Some(w.parse::<usize>().map_err(|_| at(n, format!("bad k `{w}`")))?);
            }
            other => {
                return Err(at(
                    n,
                    format!("unexpected `{other}`; expected universe, set or k (once each)"),
                ))
            }
        }
    }
    Ok(HittingSetInstance {
        universe: universe.ok_or_else(|| at(1, "missing `universe` line"))?,
        sets,
        k: k.ok_or_else(|| at(1, "missing `k` line"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimacs() {
        let f = parse_dimacs("c example\np cnf 3 2\n1 -2 0\n2 3\n0\n").unwrap();
        assert_eq!(f.vars(), 3);
        assert_eq!(f.clauses(), &[vec![1, -2], vec![2, 3]]);
        assert!(parse_dimacs("p cnf 2 2\n1 0\n").is_err());
        assert!(parse_dimacs("1 0\n").is_err());
        assert!(parse_dimacs("p cnf 1 1\n2 0\n").is_err());
    }

    #[test]
    fn hitting_set() {
        let h = parse_hitting_set("universe a b c\nset a b\nset b c # two\nk 1\n").unwrap();
        assert_eq!(h.sets.len(), 2);
        assert_eq!(h.k, 1);
        assert!(parse_hitting_set("set a\nk 1").is_err());
    }
}
