use std::collections::BTreeSet;
use std::sync::Arc;

use crate::chain::{BlockchainDatabase, Transaction};
use crate::constraints::{ConstraintSet, FunctionalDependency, InclusionDependency};
use crate::denial::DenialConstraint;
use crate::error::{Error, Result};
use crate::query::{AggCmp, AggregateFn, AggregateQuery, Atom, Body, CmpOp, Comparison, ConjunctiveQuery, Term};
use crate::schema::{DatabaseState, RelationSchema, Schema, Tuple};
use crate::sepgen::SeparationSpec;
use crate::value::Value;

use super::lexer::{lex, Tok, Token};

const DEFAULT_QUERY_NAME: &str = "q";

const ORDER_GUIDANCE: &str =
    "comparisons are =, !=, < and >; write `x <= c` as `x < c` or `x = c` (over integers, `x < c + 1`)";
const AGG_GUIDANCE: &str =
    "aggregate comparators are =, < and >; over integers `<= c` is `< c + 1` and `>= c` is `> c - 1`";

/// A parsed `txn` block: label, label token, tuples with their tokens.
type RawTxn = (String, Token, Vec<(Tuple, Token)>);

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(text: &str) -> Result<Self> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &str) -> Result<T> {
        let t = self.peek();
        Err(t.error(format!("expected {expected}, found {}", t.tok.describe())))
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        let hit = self.at_punct(p);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_punct(&mut self, p: &str) -> Result<Token> {
        if self.at_punct(p) {
            Ok(self.bump())
        } else {
            self.unexpected(&format!("`{p}`"))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<Token> {
        if self.at_keyword(kw) {
            Ok(self.bump())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Token)> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                Ok((s, self.bump()))
            }
            _ => self.unexpected(what),
        }
    }

    fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    fn expect_eof(&mut self) -> Result<()> {
        if self.at_eof() {
            Ok(())
        } else {
            self.unexpected("end of input")
        }
    }

    /// `open item (, item)* close`, allowing an empty list.
    fn list<T>(&mut self, open: &str, close: &str, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        self.expect_punct(open)?;
        let mut out = Vec::new();
        if self.eat_punct(close) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat_punct(close) {
                return Ok(out);
            }
            if !self.eat_punct(",") {
                return self.unexpected(&format!("`,` or `{close}`"));
            }
        }
    }

    fn names(&mut self, open: &str, close: &str, what: &str) -> Result<Vec<String>> {
        self.list(open, close, |p| p.ident(what).map(|(s, _)| s))
    }

    /// Comma-separated attribute names up to (not including) the next token
    /// that is not a comma.
    fn bare_names(&mut self) -> Result<Vec<String>> {
        let mut out = vec![self.ident("an attribute name")?.0];
        while self.eat_punct(",") {
            out.push(self.ident("an attribute name")?.0);
        }
        Ok(out)
    }

    fn label(&mut self) -> Result<(String, Token)> {
        match &self.peek().tok {
            Tok::Ident(s) | Tok::Str(s) => {
                let s = s.clone();
                Ok((s, self.bump()))
            }
            _ => self.unexpected("a transaction label"),
        }
    }

    /// A constant in a data position: bare identifiers are symbols.
    fn data_value(&mut self) -> Result<Value> {
        let v = match &self.peek().tok {
            Tok::Ident(s) | Tok::Str(s) => Value::sym(s.clone()),
            Tok::Num(v) => v.clone(),
            Tok::Fresh(n) => Value::Fresh(*n),
            _ => return self.unexpected("a value"),
        };
        self.bump();
        Ok(v)
    }

    fn tuple(&mut self) -> Result<(Tuple, Token)> {
        let (rel, at) = self.ident("a relation name")?;
        let values = self.list("(", ")", Parser::data_value)?;
        Ok((Tuple::new(rel, values), at))
    }

    /// A term in a query position: bare identifiers are variables.
    fn term(&mut self) -> Result<Term> {
        let t = match &self.peek().tok {
            Tok::Ident(s) => Term::Var(s.clone()),
            Tok::Str(s) => Term::Const(Value::sym(s.clone())),
            Tok::Num(v) => Term::Const(v.clone()),
            Tok::Fresh(n) => Term::Const(Value::Fresh(*n)),
            _ => return self.unexpected("a variable or constant"),
        };
        self.bump();
        Ok(t)
    }

    fn atom(&mut self) -> Result<Atom> {
        let (rel, _) = self.ident("a relation name")?;
        let terms = self.list("(", ")", Parser::term)?;
        Ok(Atom::new(rel, terms))
    }

    fn cmp_op(&mut self) -> Result<CmpOp> {
        let op = match &self.peek().tok {
            Tok::Punct("=") => CmpOp::Eq,
            Tok::Punct("!=") => CmpOp::Ne,
            Tok::Punct("<") => CmpOp::Lt,
            Tok::Punct(">") => CmpOp::Gt,
            Tok::Punct(p @ ("<=" | ">=")) => {
                return Err(self.peek().error(format!("`{p}` is not supported: {ORDER_GUIDANCE}")));
            }
            _ => return self.unexpected("a comparison operator"),
        };
        self.bump();
        Ok(op)
    }

    fn body(&mut self, stop: &[&str]) -> Result<Body> {
        let mut body = Body::default();
        loop {
            if self.eat_punct("!") {
                body.negated.push(self.atom()?);
            } else if matches!(self.peek().tok, Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Punct("(")) {
                body.positive.push(self.atom()?);
            } else {
                let left = self.term()?;
                let op = self.cmp_op()?;
                let right = self.term()?;
                body.comparisons.push(Comparison::new(left, op, right));
            }
            if !self.eat_punct(",") {
                break;
            }
        }
        if !stop.iter().any(|s| self.at_punct(s)) && !(stop.is_empty() && (self.at_eof() || self.at_keyword("deny"))) {
            return self.unexpected("`,` or the end of the query");
        }
        Ok(body)
    }

    fn query(&mut self) -> Result<DenialConstraint> {
        self.expect_keyword("deny")?;
        let name = match (&self.peek().tok, self.peek_at(1)) {
            (Tok::Ident(s), Tok::Punct(":-" | "[")) => {
                let s = s.clone();
                self.bump();
                s
            }
            _ => DEFAULT_QUERY_NAME.to_string(),
        };
        if self.eat_punct(":-") {
            let body = self.body(&[])?;
            return Ok(ConjunctiveQuery::new(name, body)?.into());
        }
        if !self.eat_punct("[") {
            return self.unexpected("a query name, `:-` or `[`");
        }
        let (fname, ftok) = self.ident("an aggregate function")?;
        let func = match fname.as_str() {
            "count" => AggregateFn::Count,
            "countd" => AggregateFn::CountDistinct,
            "sum" => AggregateFn::Sum,
            "max" => AggregateFn::Max,
            other => {
                return Err(ftok.error(format!(
                    "unknown aggregate `{other}`; expected count, countd, sum or max"
                )));
            }
        };
        let vars = self.names("(", ")", "a variable")?;
        self.expect_punct(":-")?;
        let body = self.body(&["]"])?;
        self.expect_punct("]")?;
        let cmp = match &self.peek().tok {
            Tok::Punct("=") => AggCmp::Eq,
            Tok::Punct("<") => AggCmp::Lt,
            Tok::Punct(">") => AggCmp::Gt,
            Tok::Punct(p @ ("<=" | ">=" | "!=")) => {
                return Err(self.peek().error(format!("`{p}` is not supported: {AGG_GUIDANCE}")));
            }
            _ => return self.unexpected("`=`, `<` or `>`"),
        };
        self.bump();
        let threshold = match &self.peek().tok {
            Tok::Num(v) => v.clone(),
            _ => return self.unexpected("a numeric threshold"),
        };
        self.bump();
        Ok(AggregateQuery::new(name, func, vars, body, cmp, threshold)?.into())
    }

    fn txn(&mut self) -> Result<RawTxn> {
        self.expect_keyword("txn")?;
        let (label, at) = self.label()?;
        self.expect_punct("{")?;
        let mut tuples = Vec::new();
        while !self.eat_punct("}") {
            tuples.push(self.tuple()?);
            if !self.eat_punct(";") && !self.at_punct("}") {
                return self.unexpected("`;` or `}`");
            }
        }
        Ok((label, at, tuples))
    }
}

fn positioned(at: &Token, e: Error) -> Error {
    match e {
        Error::Parse { .. } => e,
        other => at.error(other.to_string()),
    }
}

enum Stmt {
    Key(Token, String, Vec<String>),
    Fd(Token, String, Vec<String>, Vec<String>),
    Ind(Token, String, Vec<String>, String, Vec<String>),
    State(Tuple, Token),
    Txn(String, Token, Vec<(Tuple, Token)>),
}

fn build_transactions(schema: &Schema, txns: Vec<RawTxn>, seen: &mut BTreeSet<String>) -> Result<Vec<Transaction>> {
    let mut out = Vec::new();
    for (label, at, tuples) in txns {
        if !seen.insert(label.clone()) {
            return Err(at.error(format!("duplicate transaction label `{label}`")));
        }
        for (t, tat) in &tuples {
            schema.check_tuple(t).map_err(|e| positioned(tat, e))?;
        }
        out.push(Transaction::new(label, tuples.into_iter().map(|(t, _)| t)).map_err(|e| positioned(&at, e))?);
    }
    Ok(out)
}

/// Parses and validates a `.bcdb` bundle.
pub fn parse_bundle(text: &str) -> Result<BlockchainDatabase> {
    let mut p = Parser::new(text)?;
    let mut schema = Schema::new();
    let mut stmts = Vec::new();
    while !p.at_eof() {
        let (kw, at) = p.ident("a statement (relation, key, fd, ind, state or txn)")?;
        match kw.as_str() {
            "relation" => {
                let (name, nat) = p.ident("a relation name")?;
                let attrs = p.names("(", ")", "an attribute name")?;
                let rel = RelationSchema::new(name, attrs).map_err(|e| positioned(&nat, e))?;
                schema.add(rel).map_err(|e| positioned(&nat, e))?;
            }
            "key" => {
                let (rel, _) = p.ident("a relation name")?;
                let attrs = p.names("(", ")", "an attribute name")?;
                stmts.push(Stmt::Key(at, rel, attrs));
            }
            "fd" => {
                let (rel, _) = p.ident("a relation name")?;
                p.expect_punct(":")?;
                let lhs = p.bare_names()?;
                p.expect_punct("->")?;
                let rhs = p.bare_names()?;
                stmts.push(Stmt::Fd(at, rel, lhs, rhs));
            }
            "ind" => {
                let (src, _) = p.ident("a relation name")?;
                let sa = p.names("[", "]", "an attribute name")?;
                p.expect_punct("<=")?;
                let (tgt, _) = p.ident("a relation name")?;
                let ta = p.names("[", "]", "an attribute name")?;
                stmts.push(Stmt::Ind(at, src, sa, tgt, ta));
            }
            "state" => {
                let (t, tat) = p.tuple()?;
                stmts.push(Stmt::State(t, tat));
            }
            "txn" => {
                p.pos -= 1;
                let (label, lat, tuples) = p.txn()?;
                stmts.push(Stmt::Txn(label, lat, tuples));
            }
            other => {
                return Err(at.error(format!(
                    "unknown statement `{other}`; expected relation, key, fd, ind, state or txn"
                )))
            }
        }
    }

    let schema = Arc::new(schema);
    let mut ic = ConstraintSet::new();
    let mut state = DatabaseState::new(schema.clone());
    let mut txns = Vec::new();
    for s in stmts {
        match s {
            Stmt::Key(at, rel, attrs) => {
                ic.add_fd(FunctionalDependency::key(&schema, &rel, &attrs).map_err(|e| positioned(&at, e))?)
            }
            Stmt::Fd(at, rel, lhs, rhs) => {
                ic.add_fd(FunctionalDependency::new(&schema, &rel, &lhs, &rhs).map_err(|e| positioned(&at, e))?)
            }
            Stmt::Ind(at, src, sa, tgt, ta) => {
                ic.add_ind(InclusionDependency::new(&schema, &src, &sa, &tgt, &ta).map_err(|e| positioned(&at, e))?)
            }
            Stmt::State(t, at) => {
                state.insert(t).map_err(|e| positioned(&at, e))?;
            }
            Stmt::Txn(label, at, tuples) => txns.push((label, at, tuples)),
        }
    }
    let pending = build_transactions(&schema, txns, &mut BTreeSet::new())?;
    BlockchainDatabase::new(state, ic, pending)
}

/// Parses a file of `txn` blocks against an existing schema, e.g. the
/// hypothetical transactions of a dry run.
pub fn parse_transactions(text: &str, schema: &Schema) -> Result<Vec<Transaction>> {
    let mut p = Parser::new(text)?;
    let mut txns = Vec::new();
    while !p.at_eof() {
        txns.push(p.txn()?);
    }
    build_transactions(schema, txns, &mut BTreeSet::new())
}

/// Parses exactly one denial constraint.
pub fn parse_query(text: &str) -> Result<DenialConstraint> {
    let mut p = Parser::new(text)?;
    let q = p.query()?;
    p.expect_eof()?;
    Ok(q)
}

/// Parses one or more denial constraints.
pub fn parse_queries(text: &str) -> Result<Vec<DenialConstraint>> {
    let mut p = Parser::new(text)?;
    let mut out = vec![p.query()?];
    while !p.at_eof() {
        out.push(p.query()?);
    }
    Ok(out)
}

/// `separate in = {T1, T3} out = {T5} bound = 2`; the bound is optional.
pub fn parse_separation(text: &str) -> Result<SeparationSpec> {
    let mut p = Parser::new(text)?;
    p.expect_keyword("separate")?;
    let mut sets = Vec::new();
    for kw in ["in", "out"] {
        p.expect_keyword(kw)?;
        p.expect_punct("=")?;
        let labels = p.list("{", "}", |p| p.label().map(|(s, _)| s))?;
        sets.push(labels.into_iter().collect::<BTreeSet<String>>());
    }
    let bound = if p.at_keyword("bound") {
        p.bump();
        p.expect_punct("=")?;
        let t = p.peek().clone();
        match t.tok {
            Tok::Num(Value::Int(n)) if n >= 0 => {
                p.bump();
                Some(usize::try_from(n).map_err(|_| t.error("bound out of range"))?)
            }
            _ => return p.unexpected("a non-negative integer bound"),
        }
    } else {
        None
    };
    p.expect_eof()?;
    let t_out = sets.pop().unwrap_or_default();
    let t_in = sets.pop().unwrap_or_default();
    Ok(SeparationSpec { t_in, t_out, bound })
}

/// Parses a single constant in data syntax.
pub fn parse_value(text: &str) -> Result<Value> {
    let mut p = Parser::new(text)?;
    let v = p.data_value()?;
    p.expect_eof()?;
    Ok(v)
}
