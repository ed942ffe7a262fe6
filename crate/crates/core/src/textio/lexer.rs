use rust_decimal::Decimal;

use crate::error::{Error, Result};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Num(Value),
    Fresh(u64),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(s) => format!("string {}", crate::value::quote(s)),
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Fresh(n) => format!("`fresh#{n}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

impl Token {
    pub(crate) fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }
}

const PUNCT2: [(&str, &str); 5] = [(":-", ":-"), ("->", "->"), ("!=", "!="), ("<=", "<="), (">=", ">=")];
const PUNCT1: [(char, &str); 13] = [
    ('(', "("),
    (')', ")"),
    ('[', "["),
    (']', "]"),
    ('{', "{"),
    ('}', "}"),
    (',', ","),
    (';', ";"),
    (':', ":"),
    ('=', "="),
    ('<', "<"),
    ('>', ">"),
    ('!', "!"),
];
const UNICODE: [(char, &str); 4] = [('≠', "!="), ('≤', "<="), ('≥', ">="), ('¬', "!")];

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub(crate) fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let at = |i: usize| chars.get(i).copied();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while let Some(c) = at(i) {
        let err = |col: usize, message: String| Error::Parse { line, col, message };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while at(i).is_some_and(|c| c != '\n') {
                i += 1;
                col += 1;
            }
            continue;
        }
        let start = i;
        let tok = if ident_start(c) {
            while at(i).is_some_and(ident_char) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            if word == "fresh" && at(i) == Some('#') && at(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                i += 1;
                let digits_from = i;
                while at(i).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                }
                let digits: String = chars[digits_from..i].iter().collect();
                let n = digits
                    .parse::<u64>()
                    .map_err(|_| err(col, format!("fresh index `{digits}` out of range")))?;
                Tok::Fresh(n)
            } else {
                Tok::Ident(word)
            }
        } else if c.is_ascii_digit() || (c == '-' && at(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            i += 1;
            while at(i).is_some_and(|d| d.is_ascii_digit()) {
                i += 1;
            }
            let mut decimal = false;
            if at(i) == Some('.') {
                if !at(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    return Err(err(
                        col + (i - start),
                        "expected a digit after the decimal point".into(),
                    ));
                }
                decimal = true;
                i += 1;
                while at(i).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = if decimal {
                Decimal::from_str_exact(&s)
                    .map(Value::number)
                    .map_err(|_| err(col, format!("decimal `{s}` is out of range")))?
            } else {
                s.parse::<i64>()
                    .map(Value::Int)
                    .map_err(|_| err(col, format!("integer `{s}` is out of range")))?
            };
            Tok::Num(v)
        } else if c == '"' {
            i += 1;
            let mut s = String::new();
            loop {
                match at(i) {
                    None | Some('\n') => return Err(err(col, "unterminated string".into())),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        let e = match at(i + 1) {
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('r') => '\r',
                            other => {
                                let shown = other.map_or("end of line".to_string(), |c| format!("`\\{c}`"));
                                return Err(err(col + (i - start), format!("unknown escape {shown}")));
                            }
                        };
                        s.push(e);
                        i += 2;
                    }
                    Some(c) => {
                        s.push(c);
                        i += 1;
                    }
                }
            }
            Tok::Str(s)
        } else if let Some((_, p)) = PUNCT2
            .iter()
            .find(|(p, _)| at(i) == p.chars().next() && at(i + 1) == p.chars().nth(1))
        {
            i += 2;
            Tok::Punct(p)
        } else if let Some((_, p)) = PUNCT1.iter().chain(UNICODE.iter()).find(|(ch, _)| *ch == c) {
            i += 1;
            Tok::Punct(p)
        } else if c == '.' && at(i + 1).is_some_and(|d| d.is_ascii_digit()) {
            return Err(err(col, "a decimal needs a digit before the point".into()));
        } else {
            return Err(err(col, format!("unexpected character {c:?}")));
        };
        out.push(Token { tok, line, col });
        col += i - start;
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
