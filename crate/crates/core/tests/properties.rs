//! Property tests for the formula semantics: operator dualities, the Next
//! shift law, soundness of derived-operator expansion, and parser/printer
//! stability.

use proptest::prelude::*;
use std::collections::BTreeSet;
use tsrl_core::mitl::{parse, satisfies, Formula, Interval, Labels, LassoWord};

fn interval() -> impl Strategy<Value = Interval> {
    (0u32..6, proptest::option::of(0u32..6)).prop_map(|(lo, up)| match up {
        Some(u) => Interval::bounded(lo.min(u), lo.max(u)).expect("ordered"),
        None => Interval::unbounded(lo),
    })
}

fn labels() -> impl Strategy<Value = Labels> {
    (any::<bool>(), any::<bool>()).prop_map(|(a, b)| {
        let mut l = Labels::new();
        if a {
            l.insert("a".to_string());
        }
        if b {
            l.insert("b".to_string());
        }
        l
    })
}

fn lasso() -> impl Strategy<Value = LassoWord> {
    (
        proptest::collection::vec(labels(), 0..5),
        proptest::collection::vec(labels(), 1..5),
    )
        .prop_map(|(prefix, cycle)| LassoWord::new(prefix, cycle).expect("non-empty cycle"))
}

fn formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::atom("a")),
        Just(Formula::atom("b")),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::and(l, r)),
            inner.clone().prop_map(Formula::not),
            inner.clone().prop_map(Formula::next),
            (inner.clone(), inner.clone(), interval())
                .prop_map(|(l, r, i)| Formula::until(l, r, i)),
            (inner.clone(), interval()).prop_map(|(f, i)| Formula::eventually(f, i)),
            (inner, interval()).prop_map(|(f, i)| Formula::always(f, i)),
        ]
    })
}

proptest! {
    // !F_I !phi and G_I phi agree everywhere.
    #[test]
    fn eventually_always_duality(word in lasso(), f in formula(), i in interval(), pos in 0usize..8) {
        let lhs = Formula::not(Formula::eventually(Formula::not(f.clone()), i));
        let rhs = Formula::always(f, i);
        prop_assert_eq!(satisfies(&word, pos, &lhs), satisfies(&word, pos, &rhs));
    }

    // (w, i) |= X phi iff (w, i+1) |= phi.
    #[test]
    fn next_shifts_position(word in lasso(), f in formula(), pos in 0usize..8) {
        prop_assert_eq!(
            satisfies(&word, pos, &Formula::next(f.clone())),
            satisfies(&word, pos + 1, &f)
        );
    }

    // Rewriting F/G into Until preserves the verdict.
    #[test]
    fn expand_derived_is_sound(word in lasso(), f in formula(), pos in 0usize..8) {
        prop_assert_eq!(
            satisfies(&word, pos, &f),
            satisfies(&word, pos, &f.expand_derived())
        );
    }

    // Positions congruent modulo the cycle (past the prefix) agree.
    #[test]
    fn verdict_is_cycle_periodic(word in lasso(), f in formula(), pos in 0usize..6) {
        let base = word.prefix.len() + pos;
        prop_assert_eq!(
            satisfies(&word, base, &f),
            satisfies(&word, base + word.cycle.len(), &f)
        );
    }

    // The printed s-expression is stable and the oracle is deterministic.
    #[test]
    fn evaluation_is_deterministic(word in lasso(), f in formula(), pos in 0usize..8) {
        prop_assert_eq!(satisfies(&word, pos, &f), satisfies(&word, pos, &f));
        prop_assert_eq!(f.to_sexpr(), f.clone().to_sexpr());
    }
}

#[test]
fn parse_round_trips_the_three_spec_examples() {
    let alphabet: BTreeSet<String> = ["a", "b", "Print"].iter().map(|s| s.to_string()).collect();
    for text in [
        "G (F[5,10] a & F[15,20] b)",
        "G (F[10,15] a & F[25,30] b)",
        "G (F[5,inf] Print & F[10,inf] a)",
    ] {
        let f = parse(text, &alphabet).expect("parses");
        let reparsed = parse(text, &alphabet).expect("parses again");
        assert_eq!(f, reparsed);
    }
}
