//! SPDX license expressions.
//!
//! Precedence from tightest: `+`, `WITH`, `AND`, `OR`. Binary operators are
//! left-associative and must be written in upper case.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character {ch:?} at offset {offset}")]
    BadChar { ch: char, offset: usize },
    #[error("unexpected {found} at offset {offset}")]
    Unexpected { found: String, offset: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unbalanced parenthesis at offset {offset}")]
    Unbalanced { offset: usize },
    #[error("WITH at offset {offset} must follow a single license id")]
    WithOnNonId { offset: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LicenseId {
    pub id: String,
    pub or_later: bool,
}

impl LicenseId {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            or_later: false,
        }
    }
}

impl fmt::Display for LicenseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.id, if self.or_later { "+" } else { "" })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LicenseExpr {
    Id(LicenseId),
    With {
        license: LicenseId,
        exception: String,
    },
    And(Box<LicenseExpr>, Box<LicenseExpr>),
    Or(Box<LicenseExpr>, Box<LicenseExpr>),
}

impl LicenseExpr {
    pub fn id(id: &str) -> Self {
        LicenseExpr::Id(LicenseId::new(id))
    }

    pub fn and(l: LicenseExpr, r: LicenseExpr) -> Self {
        LicenseExpr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: LicenseExpr, r: LicenseExpr) -> Self {
        LicenseExpr::Or(Box::new(l), Box::new(r))
    }

    /// License ids in order of appearance, duplicates included.
    pub fn licenses(&self) -> Vec<&LicenseId> {
        let mut out = Vec::new();
        self.visit(&mut |node| match node {
            LicenseExpr::Id(l) | LicenseExpr::With { license: l, .. } => out.push(l),
            _ => {}
        });
        out
    }

    pub fn exceptions(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |node| {
            if let LicenseExpr::With { exception, .. } = node {
                out.push(exception.as_str());
            }
        });
        out
    }

    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a LicenseExpr)) {
        f(self);
        if let LicenseExpr::And(l, r) | LicenseExpr::Or(l, r) = self {
            l.visit(f);
            r.visit(f);
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            LicenseExpr::And(l, r) | LicenseExpr::Or(l, r) => 1 + l.depth().max(r.depth()),
            _ => 1,
        }
    }
}

impl fmt::Display for LicenseExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LicenseExpr::Id(l) => write!(f, "{l}"),
            LicenseExpr::With { license, exception } => write!(f, "{license} WITH {exception}"),
            LicenseExpr::Or(l, r) => {
                write!(f, "{l} OR ")?;
                match **r {
                    LicenseExpr::Or(..) => write!(f, "({r})"),
                    _ => write!(f, "{r}"),
                }
            }
            LicenseExpr::And(l, r) => {
                match **l {
                    LicenseExpr::Or(..) => write!(f, "({l})")?,
                    _ => write!(f, "{l}")?,
                }
                f.write_str(" AND ")?;
                match **r {
                    LicenseExpr::Or(..) | LicenseExpr::And(..) => write!(f, "({r})"),
                    _ => write!(f, "{r}"),
                }
            }
        }
    }
}

impl FromStr for LicenseExpr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_license_expr(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    And,
    Or,
    With,
    Ident { id: String, plus: bool },
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Open => f.write_str("'('"),
            Tok::Close => f.write_str("')'"),
            Tok::And => f.write_str("AND"),
            Tok::Or => f.write_str("OR"),
            Tok::With => f.write_str("WITH"),
            Tok::Ident { id, plus } => write!(f, "identifier {id}{}", if *plus { "+" } else { "" }),
        }
    }
}

fn is_id_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '.' || c == '-'
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(offset, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                out.push((Tok::Open, offset));
            }
            ')' => {
                chars.next();
                out.push((Tok::Close, offset));
            }
            c if is_id_char(c) => {
                let mut word = String::new();
                while let Some(&(_, c)) = chars.peek().filter(|(_, c)| is_id_char(*c)) {
                    word.push(c);
                    chars.next();
                }
                let plus = chars.next_if(|(_, c)| *c == '+').is_some();
                let tok = match (word.as_str(), plus) {
                    ("AND", false) => Tok::And,
                    ("OR", false) => Tok::Or,
                    ("WITH", false) => Tok::With,
                    _ => Tok::Ident { id: word, plus },
                };
                out.push((tok, offset));
            }
            other => return Err(ExprError::BadChar { ch: other, offset }),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, o)| *o)
            .unwrap_or(usize::MAX)
    }

    fn next(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn unexpected(&self) -> ExprError {
        match self.toks.get(self.pos) {
            Some((Tok::Close, offset)) => ExprError::Unbalanced { offset: *offset },
            Some((t, offset)) => ExprError::Unexpected {
                found: t.to_string(),
                offset: *offset,
            },
            None => ExprError::UnexpectedEnd,
        }
    }

    fn expr(&mut self) -> Result<LicenseExpr, ExprError> {
        let mut left = self.and_expr()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            left = LicenseExpr::or(left, self.and_expr()?);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<LicenseExpr, ExprError> {
        let mut left = self.with_expr()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            left = LicenseExpr::and(left, self.with_expr()?);
        }
        Ok(left)
    }

    fn with_expr(&mut self) -> Result<LicenseExpr, ExprError> {
        let primary = self.primary()?;
        if self.peek() != Some(&Tok::With) {
            return Ok(primary);
        }
        let with_offset = self.offset();
        self.pos += 1;
        let LicenseExpr::Id(license) = primary else {
            return Err(ExprError::WithOnNonId {
                offset: with_offset,
            });
        };
        match self.next() {
            Some((Tok::Ident { id, plus: false }, _)) => Ok(LicenseExpr::With {
                license,
                exception: id,
            }),
            Some(_) => {
                self.pos -= 1;
                Err(self.unexpected())
            }
            None => Err(ExprError::UnexpectedEnd),
        }
    }

    fn primary(&mut self) -> Result<LicenseExpr, ExprError> {
        match self.next() {
            Some((Tok::Ident { id, plus }, _)) => {
                Ok(LicenseExpr::Id(LicenseId { id, or_later: plus }))
            }
            Some((Tok::Open, offset)) => {
                let inner = self.expr()?;
                match self.next() {
                    Some((Tok::Close, _)) => Ok(inner),
                    None => Err(ExprError::Unbalanced { offset }),
                    Some(_) => {
                        self.pos -= 1;
                        Err(self.unexpected())
                    }
                }
            }
            Some(_) => {
                self.pos -= 1;
                Err(self.unexpected())
            }
            None => Err(ExprError::UnexpectedEnd),
        }
    }
}

pub fn parse_license_expr(text: &str) -> Result<LicenseExpr, ExprError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(ExprError::Empty);
    }
    let mut p = Parser { toks, pos: 0 };
    let expr = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> LicenseExpr {
        parse_license_expr(s).unwrap()
    }

    #[test]
    fn basic_shapes() {
        assert_eq!(p("MIT"), LicenseExpr::id("MIT"));
        assert_eq!(
            p("MIT OR Apache-2.0"),
            LicenseExpr::or(LicenseExpr::id("MIT"), LicenseExpr::id("Apache-2.0"))
        );
        assert_eq!(
            p("A AND B OR C"),
            LicenseExpr::or(
                LicenseExpr::and(LicenseExpr::id("A"), LicenseExpr::id("B")),
                LicenseExpr::id("C")
            )
        );
        assert_eq!(
            p("GPL-2.0-or-later WITH Classpath-exception-2.0"),
            LicenseExpr::With {
                license: LicenseId::new("GPL-2.0-or-later"),
                exception: "Classpath-exception-2.0".into()
            }
        );
        assert_eq!(
            p("GPL-2.0+"),
            LicenseExpr::Id(LicenseId {
                id: "GPL-2.0".into(),
                or_later: true
            })
        );
        assert_eq!(p("(MIT)"), LicenseExpr::id("MIT"));
    }

    #[test]
    fn errors() {
        assert_eq!(parse_license_expr("  "), Err(ExprError::Empty));
        assert!(matches!(
            parse_license_expr("(MIT"),
            Err(ExprError::Unbalanced { offset: 0 })
        ));
        assert!(matches!(
            parse_license_expr("MIT)"),
            Err(ExprError::Unbalanced { offset: 3 })
        ));
        assert!(matches!(
            parse_license_expr("(A OR B) WITH E"),
            Err(ExprError::WithOnNonId { .. })
        ));
        assert!(matches!(
            parse_license_expr("MIT and Apache-2.0"),
            Err(ExprError::Unexpected { .. })
        ));
        assert!(matches!(
            parse_license_expr("MIT/X"),
            Err(ExprError::BadChar { ch: '/', .. })
        ));
        assert_eq!(parse_license_expr("MIT OR"), Err(ExprError::UnexpectedEnd));
        assert!(parse_license_expr("A WITH B+").is_err());
    }

    #[test]
    fn printer_uses_minimal_parentheses() {
        for (input, printed) in [
            ("(A AND B) OR C", "A AND B OR C"),
            ("A AND (B OR C)", "A AND (B OR C)"),
            ("A OR (B OR C)", "A OR (B OR C)"),
            ("(A OR B) OR C", "A OR B OR C"),
            ("A AND (B AND C)", "A AND (B AND C)"),
            ("(A OR B) AND C", "(A OR B) AND C"),
        ] {
            assert_eq!(p(input).to_string(), printed);
            assert_eq!(p(printed), p(input));
        }
    }
}
