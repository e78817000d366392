//! Cycle-reset reading of `∧_k □◇_{I_k} p_k` over lasso words.
//!
//! Time is measured by a single clock that starts at 1 on the first position
//! of each cycle and resets when the last stage completes. A cycle succeeds
//! when the first occurrence of each stage proposition (after the previous
//! stage's completion) falls inside that stage's window; an occurrence below
//! the window, or a missing occurrence by a finite deadline, fails the cycle.
//! With `strict_revisit`, observing an earlier completed stage's proposition
//! before the current stage completes also fails. The word satisfies the
//! specification when every cycle succeeds forever, which on a lasso is
//! decided by memoizing canonical cycle-start positions.
//!
//! This is a direct quantifier-style interpretation on the word and shares no
//! machinery with the automaton it serves as ground truth for.

use super::{Interval, LassoWord};
use std::collections::HashSet;

/// Decide the cycle-reset reading of the staged recurrence specification.
pub fn cycle_reset_verdict(
    word: &LassoWord,
    stages: &[(String, Interval)],
    strict_revisit: bool,
) -> bool {
    assert!(!stages.is_empty(), "at least one stage required");
    let mut seen_starts: HashSet<usize> = HashSet::new();
    // `start` is the absolute word position consumed at clock 1.
    let mut start = 0usize;
    loop {
        if !seen_starts.insert(word.canonical(start)) {
            // same canonical start reached again: the cycle pattern repeats
            // successfully forever
            return true;
        }
        let mut prev_clock = 0u32;
        for (k, (prop, window)) in stages.iter().enumerate() {
            let earlier: Vec<&String> = stages[..k].iter().map(|(p, _)| p).collect();
            match first_occurrence(word, start, prev_clock, prop, window, &earlier, strict_revisit)
            {
                Some(clock) => prev_clock = clock,
                None => return false,
            }
        }
        start += prev_clock as usize;
    }
}

/// Clock of the first valid occurrence of `prop` strictly after `after`, or
/// `None` when the cycle fails first.
fn first_occurrence(
    word: &LassoWord,
    start: usize,
    after: u32,
    prop: &str,
    window: &Interval,
    earlier: &[&String],
    strict_revisit: bool,
) -> Option<u32> {
    // With an infinite upper bound the occurrence positions are periodic past
    // the prefix, so one full cycle beyond both the scan start and the prefix
    // end decides existence.
    let scan_to: u32 = match window.upper() {
        Some(u) => u + 1,
        None => {
            let horizon =
                (start + after as usize).max(word.prefix.len()) + word.cycle.len();
            (horizon - start) as u32
        }
    };
    for clock in (after + 1)..=scan_to {
        let labels = word.at(start + clock as usize - 1);
        if labels.contains(prop) {
            return if window.contains(clock) { Some(clock) } else { None };
        }
        if strict_revisit && earlier.iter().any(|p| labels.contains(p.as_str())) {
            return None;
        }
        if let Some(u) = window.upper() {
            if clock > u {
                // deadline passed without the proposition
                return None;
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mitl::Labels;

    fn l(props: &[&str]) -> Labels {
        props.iter().map(|s| s.to_string()).collect()
    }

    fn stages(v: &[(&str, u32, Option<u32>)]) -> Vec<(String, Interval)> {
        v.iter()
            .map(|(p, lo, hi)| (p.to_string(), Interval::new(*lo, *hi).unwrap()))
            .collect()
    }

    /// Word whose prefix carries the given labels at the given positions and
    /// is empty elsewhere, followed by an all-empty cycle.
    fn sparse_word(len: usize, at: &[(usize, &str)]) -> LassoWord {
        let mut prefix = vec![l(&[]); len];
        for (i, p) in at {
            prefix[*i] = l(&[p]);
        }
        LassoWord::new(prefix, vec![l(&[])]).unwrap()
    }

    #[test]
    fn single_cycle_then_empty_tail_fails_second_cycle() {
        // a at clock 6 (position 5), b at clock 17 (position 16); the tail is
        // empty so the second cycle misses its a-deadline.
        let w = sparse_word(30, &[(5, "a"), (16, "b")]);
        let st = stages(&[("a", 5, Some(10)), ("b", 15, Some(20))]);
        assert!(!cycle_reset_verdict(&w, &st, false));
    }

    #[test]
    fn periodic_word_satisfies_forever() {
        // cycle of length 2: a at phase 0, b at phase 1, windows wide enough.
        let w = LassoWord::new(vec![], vec![l(&["a"]), l(&["b"])]).unwrap();
        let st = stages(&[("a", 0, Some(2)), ("b", 0, Some(2))]);
        assert!(cycle_reset_verdict(&w, &st, false));
    }

    #[test]
    fn early_occurrence_fails() {
        let w = LassoWord::new(vec![], vec![l(&["a"]), l(&["b"])]).unwrap();
        // first a arrives at clock 1 < lower bound 2
        let st = stages(&[("a", 2, Some(4)), ("b", 0, Some(4))]);
        assert!(!cycle_reset_verdict(&w, &st, false));
    }

    #[test]
    fn strict_revisit_fails_on_earlier_prop() {
        // a at phases 0 and 1, b at phase 2: the revisit of a before b
        // completes fails only under the strict flag.
        let w = LassoWord::new(vec![], vec![l(&["a"]), l(&["a"]), l(&["b"])]).unwrap();
        let st = stages(&[("a", 0, Some(3)), ("b", 0, Some(3))]);
        assert!(cycle_reset_verdict(&w, &st, false));
        assert!(!cycle_reset_verdict(&w, &st, true));
    }

    #[test]
    fn unbounded_window_waits_indefinitely() {
        let w = LassoWord::new(vec![l(&[]); 7], vec![l(&["a"]), l(&[]), l(&["b"]), l(&[])]).unwrap();
        let st = stages(&[("a", 2, None), ("b", 1, None)]);
        assert!(cycle_reset_verdict(&w, &st, false));
        // missing proposition under an unbounded window is still a failure
        let st2 = stages(&[("a", 0, None), ("b", 0, None), ("c", 0, None)]);
        assert!(!cycle_reset_verdict(&w, &st2, false));
    }
}
