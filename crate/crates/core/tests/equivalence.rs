//! The compiled automaton and the independent per-cycle scan oracle must
//! agree on every lasso word. Acceptance is characterized finitely: the word
//! satisfies the staged specification iff the number of completed cycles
//! keeps growing as the unrolling gets longer (runs over lassos are
//! eventually periodic, so a stalled cycle count stays stalled).

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tsrl_core::automata::{build_recurrence_automaton, run_word, RunVerdict};
use tsrl_core::mitl::{cycle_reset_verdict, Interval, Labels, LassoWord};

fn labels_from_bits(bits: u32) -> Labels {
    let mut l = Labels::new();
    if bits & 1 != 0 {
        l.insert("a".to_string());
    }
    if bits & 2 != 0 {
        l.insert("b".to_string());
    }
    l
}

fn all_words(max_prefix: usize, max_cycle: usize) -> Vec<LassoWord> {
    let mut words = Vec::new();
    let seqs = |len: usize| -> Vec<Vec<Labels>> {
        let mut out = vec![Vec::new()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0u32..4).map(move |bits| {
                        let mut s = s.clone();
                        s.push(labels_from_bits(bits));
                        s
                    })
                })
                .collect();
        }
        out
    };
    for p in 0..=max_prefix {
        for c in 1..=max_cycle {
            for prefix in seqs(p) {
                for cycle in seqs(c) {
                    words.push(LassoWord::new(prefix.clone(), cycle).expect("non-empty"));
                }
            }
        }
    }
    words
}

fn interval_specs() -> Vec<(Interval, Interval)> {
    let mut intervals = Vec::new();
    for lo in 0..=4u32 {
        for up in lo..=4 {
            intervals.push(Interval::bounded(lo, up).expect("ordered"));
        }
        if lo <= 2 {
            intervals.push(Interval::unbounded(lo));
        }
    }
    let mut specs = Vec::new();
    for &i1 in &intervals {
        for &i2 in &intervals {
            specs.push((i1, i2));
        }
    }
    specs
}

/// True iff the automaton accepts the lasso: cycle completions strictly
/// increase between two unrollings long past the transient.
fn automaton_accepts(
    stages: &[(String, Interval)],
    strict: bool,
    word: &LassoWord,
) -> bool {
    let aut = build_recurrence_automaton(stages, strict).expect("buildable");
    let cyc = word.cycle.len();
    // Transient bound: 3 automaton states x (max bound + 2) clock values x
    // cycle positions; 40 cycle repetitions dominates it for bounds <= 4.
    let r1 = 40;
    let n1 = word.prefix.len() + cyc * r1;
    let n2 = word.prefix.len() + cyc * 2 * r1;
    let v1 = run_word(&aut, &word.unroll(n1)).expect("deterministic");
    let v2 = run_word(&aut, &word.unroll(n2)).expect("deterministic");
    match (v1, v2) {
        (RunVerdict::Violated(_), _) | (_, RunVerdict::Violated(_)) => false,
        (RunVerdict::Alive(k1), RunVerdict::Alive(k2)) => k2 > k1,
    }
}

fn check_spec(stages: &[(String, Interval)], word: &LassoWord) {
    for strict in [false, true] {
        let accepted = automaton_accepts(stages, strict, word);
        let verdict = cycle_reset_verdict(word, stages, strict);
        assert_eq!(
            accepted, verdict,
            "disagreement: stages {stages:?}, strict {strict}, prefix {:?}, cycle {:?}",
            word.prefix, word.cycle
        );
    }
}

#[test]
fn automaton_matches_oracle_exhaustively() {
    let words = all_words(2, 2);
    let specs = interval_specs();
    for (i1, i2) in specs {
        let stages = vec![("a".to_string(), i1), ("b".to_string(), i2)];
        for word in &words {
            check_spec(&stages, word);
        }
    }
}

#[test]
fn automaton_matches_oracle_on_random_longer_lassos() {
    let mut rng = StdRng::seed_from_u64(20240817);
    let specs = interval_specs();
    for _ in 0..4000 {
        let p = rng.gen_range(0..8);
        let c = rng.gen_range(1..10);
        let prefix: Vec<Labels> = (0..p).map(|_| labels_from_bits(rng.gen_range(0..4))).collect();
        let cycle: Vec<Labels> = (0..c).map(|_| labels_from_bits(rng.gen_range(0..4))).collect();
        let word = LassoWord::new(prefix, cycle).expect("non-empty");
        let (i1, i2) = specs[rng.gen_range(0..specs.len())];
        let stages = vec![("a".to_string(), i1), ("b".to_string(), i2)];
        check_spec(&stages, &word);
    }
}

#[test]
fn three_stage_specs_also_agree() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..500 {
        let p = rng.gen_range(0..4);
        let c = rng.gen_range(1..6);
        let prefix: Vec<Labels> = (0..p).map(|_| labels_from_bits(rng.gen_range(0..4))).collect();
        let mut cycle: Vec<Labels> =
            (0..c).map(|_| labels_from_bits(rng.gen_range(0..4))).collect();
        if rng.gen_bool(0.5) {
            cycle[0].insert("c".to_string());
        }
        let word = LassoWord::new(prefix, cycle).expect("non-empty");
        let stages = vec![
            ("a".to_string(), Interval::bounded(0, rng.gen_range(0..4)).expect("ordered")),
            ("b".to_string(), Interval::bounded(1, rng.gen_range(1..5)).expect("ordered")),
            ("c".to_string(), Interval::bounded(2, rng.gen_range(2..6)).expect("ordered")),
        ];
        check_spec(&stages, &word);
    }
}
