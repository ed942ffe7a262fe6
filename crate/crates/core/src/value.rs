//! Constants stored in tuples.
//!
//! Numbers are exact: integers are `i64`, non-integral amounts are
//! [`Decimal`]s. A decimal that normalises to an integral value is stored as
//! [`Value::Int`], so structural equality coincides with numeric equality.

use std::cmp::Ordering;
use std::fmt;

use rust_decimal::Decimal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Int(i64),
    Dec(Decimal),
    Sym(String),
    /// Synthetic constant created by the generators. Never equal to a
    /// user-supplied value.
    Fresh(u64),
}

impl Value {
    pub fn sym(s: impl Into<String>) -> Self {
        Value::Sym(s.into())
    }

    /// Builds a numeric value, collapsing integral decimals to `Int`.
    pub fn number(d: Decimal) -> Self {
        let d = d.normalize();
        if d.scale() == 0 {
            if let Ok(i) = i64::try_from(d.mantissa()) {
                return Value::Int(i);
            }
        }
        Value::Dec(d)
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Dec(_))
    }

    pub fn as_decimal(&self) -> Option<Decimal> {
        match self {
            Value::Int(i) => Some(Decimal::from(*i)),
            Value::Dec(d) => Some(*d),
            _ => None,
        }
    }

    /// Order comparison used by `<` and `>`. Only numbers are ordered.
    pub fn compare_ordered(&self, other: &Value) -> Result<Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Ok(a.cmp(b)),
            _ => match (self.as_decimal(), other.as_decimal()) {
                (Some(a), Some(b)) => Ok(a.cmp(&b)),
                _ => Err(Error::Type(format!(
                    "cannot order-compare {} with {}",
                    self.quoted(),
                    other.quoted()
                ))),
            },
        }
    }

    pub fn checked_add(&self, other: &Value) -> Result<Value> {
        if let (Value::Int(a), Value::Int(b)) = (self, other) {
            return a
                .checked_add(*b)
                .map(Value::Int)
                .ok_or_else(|| Error::Overflow(format!("{a} + {b}")));
        }
        let (a, b) = match (self.as_decimal(), other.as_decimal()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Type(format!(
                    "cannot add {} and {}",
                    self.quoted(),
                    other.quoted()
                )))
            }
        };
        a.checked_add(b)
            .map(Value::number)
            .ok_or_else(|| Error::Overflow(format!("{a} + {b}")))
    }

    pub fn checked_mul_count(&self, count: usize) -> Result<Value> {
        let n = i64::try_from(count).map_err(|_| Error::Overflow("multiplicity".into()))?;
        match self {
            Value::Int(a) => a
                .checked_mul(n)
                .map(Value::Int)
                .ok_or_else(|| Error::Overflow(format!("{a} * {n}"))),
            Value::Dec(d) => d
                .checked_mul(Decimal::from(n))
                .map(Value::number)
                .ok_or_else(|| Error::Overflow(format!("{d} * {n}"))),
            other => Err(Error::Type(format!("cannot sum {}", other.quoted()))),
        }
    }

    /// Token form that is always read back as a constant, also inside
    /// queries where bare identifiers denote variables.
    pub fn quoted(&self) -> String {
        match self {
            Value::Sym(s) => quote(s),
            other => other.to_string(),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Int(_) | Value::Dec(_) => 0,
            Value::Sym(_) => 1,
            Value::Fresh(_) => 2,
        }
    }
}

/// Canonical total order: numbers (numerically), then symbols, then fresh
/// constants by index.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Sym(a), Value::Sym(b)) => a.cmp(b),
            (Value::Fresh(a), Value::Fresh(b)) => a.cmp(b),
            _ if self.rank() == 0 && other.rank() == 0 => {
                let (a, b) = (self.as_decimal().unwrap(), other.as_decimal().unwrap());
                a.cmp(&b)
                    .then_with(|| self.rank_within_numeric().cmp(&other.rank_within_numeric()))
            }
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Value {
    fn rank_within_numeric(&self) -> u8 {
        matches!(self, Value::Dec(_)) as u8
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Sym(s.to_string())
    }
}

pub(crate) fn is_bare_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Data-position rendering: symbols print bare when they lex as an
/// identifier, otherwise quoted.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Dec(d) => {
                let s = d.normalize().to_string();
                if s.contains('.') {
                    f.write_str(&s)
                } else {
                    write!(f, "{s}.0")
                }
            }
            Value::Sym(s) if is_bare_identifier(s) => f.write_str(s),
            Value::Sym(s) => f.write_str(&quote(s)),
            Value::Fresh(n) => write!(f, "fresh#{n}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    fn dec(s: &str) -> Value {
        Value::number(Decimal::from_str(s).unwrap())
    }

    #[test]
    fn integral_decimals_collapse() {
        assert_eq!(dec("1.000"), Value::Int(1));
        assert_eq!(dec("0.50"), dec("0.5"));
        assert!(matches!(dec("0.5"), Value::Dec(_)));
    }

    #[test]
    fn mixed_numeric_order() {
        assert_eq!(Value::Int(3).compare_ordered(&dec("0.5")).unwrap(), Ordering::Greater);
        assert_eq!(dec("2.5").compare_ordered(&Value::Int(3)).unwrap(), Ordering::Less);
        assert!(Value::sym("a").compare_ordered(&Value::Int(1)).is_err());
        assert!(Value::Fresh(0).compare_ordered(&Value::Int(1)).is_err());
    }

    #[test]
    fn canonical_order_groups_kinds() {
        let mut v = vec![
            Value::Fresh(1),
            Value::sym("b"),
            dec("0.5"),
            Value::Int(1),
            Value::sym("a"),
        ];
        v.sort();
        assert_eq!(
            v,
            vec![
                dec("0.5"),
                Value::Int(1),
                Value::sym("a"),
                Value::sym("b"),
                Value::Fresh(1)
            ]
        );
    }

    #[test]
    fn exact_sums() {
        let s = dec("0.1").checked_add(&dec("0.2")).unwrap();
        assert_eq!(s, dec("0.3"));
        assert_eq!(dec("0.5").checked_add(&dec("0.5")).unwrap(), Value::Int(1));
        assert!(Value::Int(i64::MAX).checked_add(&Value::Int(1)).is_err());
    }

    #[test]
    fn display_tokens() {
        assert_eq!(Value::sym("U1Pk").to_string(), "U1Pk");
        assert_eq!(Value::sym("Alice PK").to_string(), "\"Alice PK\"");
        assert_eq!(Value::sym("x").quoted(), "\"x\"");
        assert_eq!(Value::Fresh(3).to_string(), "fresh#3");
        assert_eq!(dec("2.50").to_string(), "2.5");
    }
}
