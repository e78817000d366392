//! Brute-force satisfaction oracle over lasso words.
//!
//! Verdicts at position `i` depend only on the canonical representative of
//! `i`, so results are memoized on (subformula identity, canonical position);
//! unbounded operators terminate because one full cycle past the later of
//! `i + lower` and the prefix end covers every reachable suffix.

use super::{Formula, LassoWord};
use std::collections::HashMap;

/// Evaluate `(word, position) ⊨ formula`.
pub fn satisfies(word: &LassoWord, position: usize, formula: &Formula) -> bool {
    let mut ev = Evaluator {
        word,
        memo: HashMap::new(),
    };
    ev.eval(formula, position)
}

struct Evaluator<'a> {
    word: &'a LassoWord,
    // keyed on (subformula address, canonical position)
    memo: HashMap<(usize, usize), bool>,
}

impl<'a> Evaluator<'a> {
    fn eval(&mut self, f: &Formula, i: usize) -> bool {
        let key = (f as *const Formula as usize, self.word.canonical(i));
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let v = match f {
            Formula::True => true,
            Formula::Atom(p) => self.word.at(i).contains(p),
            Formula::And(l, r) => self.eval(l, i) && self.eval(r, i),
            Formula::Not(g) => !self.eval(g, i),
            Formula::Next(g) => self.eval(g, i + 1),
            Formula::Until(l, r, iv) => self.until(l, Some(r), i, iv.lower(), iv.upper()),
            Formula::Eventually(g, iv) => self.until(&Formula::True, Some(g), i, iv.lower(), iv.upper()),
            Formula::Always(g, iv) => !self.until_not(g, i, iv.lower(), iv.upper()),
        };
        self.memo.insert(key, v);
        v
    }

    /// One full cycle past both `i + lower` and the prefix end; scanning this
    /// far touches every canonical position a witness could occupy.
    fn scan_limit(&self, i: usize, lower: u32) -> usize {
        (i + lower as usize).max(self.word.prefix.len()) + self.word.cycle.len()
    }

    /// `left U_[lower,upper] right` evaluated at `i` by direct quantification.
    fn until(
        &mut self,
        left: &Formula,
        right: Option<&Formula>,
        i: usize,
        lower: u32,
        upper: Option<u32>,
    ) -> bool {
        let right = right.expect("until needs a right operand");
        let limit = match upper {
            Some(u) => i + u as usize,
            None => self.scan_limit(i, lower),
        };
        for j in i..=limit {
            if (j - i) as u32 >= lower && self.eval(right, j) {
                return true;
            }
            if !self.eval(left, j) {
                return false;
            }
        }
        false
    }

    /// `◇_[lower,upper] ¬g` at `i`, used for the Always case.
    fn until_not(&mut self, g: &Formula, i: usize, lower: u32, upper: Option<u32>) -> bool {
        let limit = match upper {
            Some(u) => i + u as usize,
            None => self.scan_limit(i, lower),
        };
        for j in i..=limit {
            if (j - i) as u32 >= lower && !self.eval(g, j) {
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mitl::{Interval, Labels};

    fn l(props: &[&str]) -> Labels {
        props.iter().map(|s| s.to_string()).collect()
    }

    fn word(prefix: &[&[&str]], cycle: &[&[&str]]) -> LassoWord {
        LassoWord::new(
            prefix.iter().map(|p| l(p)).collect(),
            cycle.iter().map(|p| l(p)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn eventually_within_window() {
        // ({},{},{a}) then cycle ({}): ◇_[2,4] a holds at 0 (witness j=2);
        // ◇_[3,4] a does not (a only at position 2).
        let w = word(&[&[], &[], &["a"]], &[&[]]);
        let in_window = Formula::eventually(Formula::atom("a"), Interval::bounded(2, 4).unwrap());
        let off_window = Formula::eventually(Formula::atom("a"), Interval::bounded(3, 4).unwrap());
        assert!(satisfies(&w, 0, &in_window));
        assert!(!satisfies(&w, 0, &off_window));
    }

    #[test]
    fn true_everywhere() {
        let w = word(&[], &[&["a"], &[]]);
        for i in 0..10 {
            assert!(satisfies(&w, i, &Formula::True));
        }
    }

    #[test]
    fn always_on_constant_cycle() {
        let w = word(&[], &[&["a"]]);
        let f = Formula::always(Formula::atom("a"), Interval::full());
        assert!(satisfies(&w, 0, &f));
    }

    #[test]
    fn unbounded_eventually_false_when_absent() {
        let w = word(&[&["a"]], &[&[]]);
        let f = Formula::eventually(Formula::atom("a"), Interval::unbounded(1));
        assert!(!satisfies(&w, 0, &f));
        assert!(satisfies(&w, 0, &Formula::eventually(Formula::atom("a"), Interval::full())));
    }

    #[test]
    fn until_requires_left_to_hold() {
        // b at 3 but a broken at 1 → a U_[0,5] b false at 0.
        let w = word(&[&["a"], &[], &["a"], &["b"]], &[&[]]);
        let f = Formula::until(Formula::atom("a"), Formula::atom("b"), Interval::bounded(0, 5).unwrap());
        assert!(!satisfies(&w, 0, &f));
        // from position 2 the left side holds up to the witness
        assert!(satisfies(&w, 2, &f));
    }

    #[test]
    fn next_shifts_position() {
        let w = word(&[&[], &["a"]], &[&[]]);
        let f = Formula::next(Formula::atom("a"));
        assert!(satisfies(&w, 0, &f));
        assert!(!satisfies(&w, 1, &f));
    }

    #[test]
    fn recurrence_formula_on_periodic_word() {
        // cycle of length 4 with a at phase 1 and b at phase 3:
        // □(◇_[0,3] a ∧ ◇_[0,3] b) holds at 0.
        let w = word(&[], &[&[], &["a"], &[], &["b"]]);
        let f = Formula::always(
            Formula::and(
                Formula::eventually(Formula::atom("a"), Interval::bounded(0, 3).unwrap()),
                Formula::eventually(Formula::atom("b"), Interval::bounded(0, 3).unwrap()),
            ),
            Interval::full(),
        );
        assert!(satisfies(&w, 0, &f));
        let tight = Formula::always(
            Formula::eventually(Formula::atom("a"), Interval::bounded(0, 2).unwrap()),
            Interval::full(),
        );
        assert!(!satisfies(&w, 0, &tight));
    }
}
