//! MITL formulas over discrete time: abstract syntax, a concrete-text parser,
//! and a brute-force satisfaction oracle over lasso words.

mod cycle_reset;
mod oracle;
mod parse;

pub use cycle_reset::cycle_reset_verdict;
pub use oracle::satisfies;
pub use parse::{parse, ParseError};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// Discrete time interval `[lower, upper]` with `upper = None` encoding ∞.
///
/// Serialized as a two-element array `[lo, hi|null]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(u32, Option<u32>)", into = "(u32, Option<u32>)")]
pub struct Interval {
    lower: u32,
    upper: Option<u32>,
}

impl Interval {
    pub fn new(lower: u32, upper: Option<u32>) -> Result<Self, MalformedInterval> {
        match upper {
            Some(u) if u < lower => Err(MalformedInterval { lower, upper }),
            _ => Ok(Interval { lower, upper }),
        }
    }

    pub fn bounded(lower: u32, upper: u32) -> Result<Self, MalformedInterval> {
        Self::new(lower, Some(upper))
    }

    pub fn unbounded(lower: u32) -> Self {
        Interval { lower, upper: None }
    }

    pub fn full() -> Self {
        Interval { lower: 0, upper: None }
    }

    pub fn lower(&self) -> u32 {
        self.lower
    }

    pub fn upper(&self) -> Option<u32> {
        self.upper
    }

    pub fn contains(&self, t: u32) -> bool {
        t >= self.lower && self.upper.map_or(true, |u| t <= u)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.upper {
            Some(u) => write!(f, "[{},{}]", self.lower, u),
            None => write!(f, "[{},inf)", self.lower),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("malformed interval: lower {lower} > upper {}", upper.map(|u| u.to_string()).unwrap_or_default())]
pub struct MalformedInterval {
    pub lower: u32,
    pub upper: Option<u32>,
}

impl TryFrom<(u32, Option<u32>)> for Interval {
    type Error = MalformedInterval;
    fn try_from((lower, upper): (u32, Option<u32>)) -> Result<Self, Self::Error> {
        Interval::new(lower, upper)
    }
}

impl From<Interval> for (u32, Option<u32>) {
    fn from(i: Interval) -> Self {
        (i.lower, i.upper)
    }
}

/// MITL abstract syntax.
///
/// `Eventually` and `Always` are stored explicitly but are definable by the
/// rewrites `◇_I φ ≡ true U_I φ` and `□_I φ ≡ ¬◇_I ¬φ`; the oracle treats the
/// explicit forms and the expansions identically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    True,
    Atom(String),
    And(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>, Interval),
    Eventually(Box<Formula>, Interval),
    Always(Box<Formula>, Interval),
}

impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula::Atom(name.to_string())
    }

    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn until(l: Formula, r: Formula, i: Interval) -> Formula {
        Formula::Until(Box::new(l), Box::new(r), i)
    }

    pub fn eventually(f: Formula, i: Interval) -> Formula {
        Formula::Eventually(Box::new(f), i)
    }

    pub fn always(f: Formula, i: Interval) -> Formula {
        Formula::Always(Box::new(f), i)
    }

    /// Expand the derived operators into the base grammar.
    pub fn expand_derived(&self) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::Atom(p) => Formula::Atom(p.clone()),
            Formula::And(l, r) => Formula::and(l.expand_derived(), r.expand_derived()),
            Formula::Not(f) => Formula::not(f.expand_derived()),
            Formula::Next(f) => Formula::next(f.expand_derived()),
            Formula::Until(l, r, i) => Formula::until(l.expand_derived(), r.expand_derived(), *i),
            Formula::Eventually(f, i) => Formula::until(Formula::True, f.expand_derived(), *i),
            Formula::Always(f, i) => Formula::not(Formula::until(
                Formula::True,
                Formula::not(f.expand_derived()),
                *i,
            )),
        }
    }

    /// All atomic propositions mentioned in the formula.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True => {}
            Formula::Atom(p) => {
                out.insert(p.clone());
            }
            Formula::And(l, r) | Formula::Until(l, r, _) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
            Formula::Not(f) | Formula::Next(f) | Formula::Eventually(f, _) | Formula::Always(f, _) => {
                f.collect_atoms(out)
            }
        }
    }

    /// Indented s-expression rendering, used by `--dump-ast`.
    pub fn to_sexpr(&self) -> String {
        let mut s = String::new();
        self.write_sexpr(&mut s, 0);
        s
    }

    fn write_sexpr(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        match self {
            Formula::True => out.push_str(&format!("{pad}true\n")),
            Formula::Atom(p) => out.push_str(&format!("{pad}(atom {p})\n")),
            Formula::And(l, r) => {
                out.push_str(&format!("{pad}(and\n"));
                l.write_sexpr(out, depth + 1);
                r.write_sexpr(out, depth + 1);
                out.push_str(&format!("{pad})\n"));
            }
            Formula::Not(f) => {
                out.push_str(&format!("{pad}(not\n"));
                f.write_sexpr(out, depth + 1);
                out.push_str(&format!("{pad})\n"));
            }
            Formula::Next(f) => {
                out.push_str(&format!("{pad}(next\n"));
                f.write_sexpr(out, depth + 1);
                out.push_str(&format!("{pad})\n"));
            }
            Formula::Until(l, r, i) => {
                out.push_str(&format!("{pad}(until {i}\n"));
                l.write_sexpr(out, depth + 1);
                r.write_sexpr(out, depth + 1);
                out.push_str(&format!("{pad})\n"));
            }
            Formula::Eventually(f, i) => {
                out.push_str(&format!("{pad}(eventually {i}\n"));
                f.write_sexpr(out, depth + 1);
                out.push_str(&format!("{pad})\n"));
            }
            Formula::Always(f, i) => {
                out.push_str(&format!("{pad}(always {i}\n"));
                f.write_sexpr(out, depth + 1);
                out.push_str(&format!("{pad})\n"));
            }
        }
    }
}

/// A label set attached to one word position.
pub type Labels = BTreeSet<String>;

/// Infinite word `prefix · cycle^ω` over `2^Π`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LassoWord {
    pub prefix: Vec<Labels>,
    pub cycle: Vec<Labels>,
}

impl LassoWord {
    pub fn new(prefix: Vec<Labels>, cycle: Vec<Labels>) -> Result<Self, EmptyCycle> {
        if cycle.is_empty() {
            return Err(EmptyCycle);
        }
        Ok(LassoWord { prefix, cycle })
    }

    /// Label set at absolute position `i`.
    pub fn at(&self, i: usize) -> &Labels {
        if i < self.prefix.len() {
            &self.prefix[i]
        } else {
            &self.cycle[(i - self.prefix.len()) % self.cycle.len()]
        }
    }

    /// Canonical representative of position `i`: positions with the same
    /// canonical value index identical suffixes of the word.
    pub fn canonical(&self, i: usize) -> usize {
        if i < self.prefix.len() {
            i
        } else {
            self.prefix.len() + (i - self.prefix.len()) % self.cycle.len()
        }
    }

    /// Unroll the first `n` positions into a finite label sequence.
    pub fn unroll(&self, n: usize) -> Vec<Labels> {
        (0..n).map(|i| self.at(i).clone()).collect()
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.prefix
            .iter()
            .chain(self.cycle.iter())
            .flat_map(|s| s.iter().cloned())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, thiserror::Error, PartialEq, Eq)]
#[error("lasso cycle must be non-empty")]
pub struct EmptyCycle;
