//! Recursive-descent parser for the concrete MITL syntax.
//!
//! Grammar (precedence low to high):
//! ```text
//! conj   := until ('&' until)*
//! until  := unary ('U' interval unary)?          (right-associative)
//! unary  := '!' unary | 'X' unary
//!         | 'F' interval unary
//!         | 'G' interval? unary                  (bare G means [0,inf))
//!         | 'true' | ident | '(' conj ')'
//! interval := '[' nat ',' (nat | 'inf') ']'
//! ```

use super::{Formula, Interval};
use std::collections::BTreeSet;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown proposition `{name}` at byte {pos} (alphabet: {alphabet:?})")]
    UnknownProposition {
        pos: usize,
        name: String,
        alphabet: Vec<String>,
    },
    #[error("malformed interval at byte {pos}: lower {lower} > upper {upper}")]
    MalformedInterval { pos: usize, lower: u32, upper: u32 },
}

/// Parse `text` into a formula over the given proposition alphabet.
pub fn parse(text: &str, alphabet: &BTreeSet<String>) -> Result<Formula, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        alphabet,
    };
    p.skip_ws();
    if p.pos >= p.src.len() {
        return Err(ParseError::Syntax {
            pos: 0,
            msg: "empty formula".into(),
        });
    }
    let f = p.conj()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(ParseError::Syntax {
            pos: p.pos,
            msg: format!("unexpected trailing input `{}`", p.rest()),
        });
    }
    Ok(f)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    alphabet: &'a BTreeSet<String>,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> String {
        String::from_utf8_lossy(&self.src[self.pos.min(self.src.len())..]).into_owned()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError::Syntax {
                pos: self.pos,
                msg: format!("expected `{}`", c as char),
            })
        }
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.until()?;
        while self.peek() == Some(b'&') {
            self.pos += 1;
            let r = self.until()?;
            f = Formula::and(f, r);
        }
        Ok(f)
    }

    fn until(&mut self) -> Result<Formula, ParseError> {
        let left = self.unary()?;
        if self.peek_keyword("U") {
            self.pos += 1;
            let iv = self.interval()?;
            let right = self.until()?;
            return Ok(Formula::until(left, right, iv));
        }
        Ok(left)
    }

    /// True when the next token is exactly the keyword `kw` (not an identifier
    /// prefix such as `Urgent`).
    fn peek_keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let bytes = kw.as_bytes();
        if !self.src[self.pos..].starts_with(bytes) {
            return false;
        }
        match self.src.get(self.pos + bytes.len()) {
            Some(c) if c.is_ascii_alphanumeric() || *c == b'_' => false,
            _ => true,
        }
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(b'(') => {
                self.pos += 1;
                let f = self.conj()?;
                self.eat(b')')?;
                Ok(f)
            }
            Some(_) if self.peek_keyword("X") => {
                self.pos += 1;
                Ok(Formula::next(self.unary()?))
            }
            Some(_) if self.peek_keyword("F") => {
                self.pos += 1;
                let iv = self.interval()?;
                Ok(Formula::eventually(self.unary()?, iv))
            }
            Some(_) if self.peek_keyword("G") => {
                self.pos += 1;
                let iv = if self.peek() == Some(b'[') {
                    self.interval()?
                } else {
                    Interval::full()
                };
                Ok(Formula::always(self.unary()?, iv))
            }
            Some(_) if self.peek_keyword("true") => {
                self.pos += 4;
                Ok(Formula::True)
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let name = self.ident();
                if self.alphabet.contains(&name) {
                    Ok(Formula::Atom(name))
                } else {
                    Err(ParseError::UnknownProposition {
                        pos: start,
                        name,
                        alphabet: self.alphabet.iter().cloned().collect(),
                    })
                }
            }
            _ => Err(ParseError::Syntax {
                pos: self.pos,
                msg: "expected formula".into(),
            }),
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn nat(&mut self) -> Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ParseError::Syntax {
                pos: start,
                msg: "expected number".into(),
            });
        }
        String::from_utf8_lossy(&self.src[start..self.pos])
            .parse()
            .map_err(|_| ParseError::Syntax {
                pos: start,
                msg: "number out of range".into(),
            })
    }

    fn interval(&mut self) -> Result<Interval, ParseError> {
        let start = self.pos;
        self.eat(b'[')?;
        let lo = self.nat()?;
        self.eat(b',')?;
        let hi = if self.peek_keyword("inf") {
            self.pos += 3;
            None
        } else {
            Some(self.nat()?)
        };
        self.eat(b']')?;
        Interval::new(lo, hi).map_err(|e| ParseError::MalformedInterval {
            pos: start,
            lower: e.lower,
            upper: e.upper.unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> BTreeSet<String> {
        ["a", "b"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_recurrence_formula() {
        // G (F[5,10] a & F[15,20] b) → □_[0,∞) (◇_[5,10] a ∧ ◇_[15,20] b)
        let f = parse("G (F[5,10] a & F[15,20] b)", &ab()).unwrap();
        let expect = Formula::always(
            Formula::and(
                Formula::eventually(Formula::atom("a"), Interval::bounded(5, 10).unwrap()),
                Formula::eventually(Formula::atom("b"), Interval::bounded(15, 20).unwrap()),
            ),
            Interval::full(),
        );
        assert_eq!(f, expect);
    }

    #[test]
    fn parses_true() {
        assert_eq!(parse("true", &ab()).unwrap(), Formula::True);
    }

    #[test]
    fn rejects_malformed_interval() {
        let err = parse("a U[10,5] b", &ab()).unwrap_err();
        assert!(matches!(
            err,
            ParseError::MalformedInterval { lower: 10, upper: 5, .. }
        ));
    }

    #[test]
    fn rejects_unknown_proposition() {
        let err = parse("F[0,3] c", &ab()).unwrap_err();
        assert!(matches!(err, ParseError::UnknownProposition { ref name, .. } if name == "c"));
    }

    #[test]
    fn precedence_until_binds_tighter_than_and() {
        // a U[0,2] b & b  ==  (a U[0,2] b) & b
        let f = parse("a U[0,2] b & b", &ab()).unwrap();
        let expect = Formula::and(
            Formula::until(Formula::atom("a"), Formula::atom("b"), Interval::bounded(0, 2).unwrap()),
            Formula::atom("b"),
        );
        assert_eq!(f, expect);
    }

    #[test]
    fn unary_binds_tighter_than_until() {
        // !a U[0,2] X b == (!a) U[0,2] (X b)
        let f = parse("!a U[0,2] X b", &ab()).unwrap();
        let expect = Formula::until(
            Formula::not(Formula::atom("a")),
            Formula::next(Formula::atom("b")),
            Interval::bounded(0, 2).unwrap(),
        );
        assert_eq!(f, expect);
    }

    #[test]
    fn unbounded_interval_and_parens() {
        let f = parse("G[5,inf] (a & !b)", &ab()).unwrap();
        let expect = Formula::always(
            Formula::and(Formula::atom("a"), Formula::not(Formula::atom("b"))),
            Interval::unbounded(5),
        );
        assert_eq!(f, expect);
    }

    #[test]
    fn error_positions_are_reported() {
        let err = parse("F[1,2] (a & )", &ab()).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { pos: 12, .. }), "{err:?}");
    }
}
