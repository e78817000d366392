//! Timed limit-deterministic generalized Büchi automata: representation,
//! compilation of staged recurrence specifications, stepping against label
//! sequences under a single global clock, and DOT/JSON dumps.

use crate::mitl::{Interval, Labels};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;

/// Value of the single global clock: steps since the current cycle started.
/// It increments by one before the automaton reads each step's labels and
/// resets to zero when the last stage completes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClockState(pub u32);

/// Label-set guard: enabled when the labels intersect `required_any` (or it
/// is empty) and miss every proposition in `forbidden`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guard {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub required_any: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forbidden: Vec<String>,
}

impl Guard {
    pub fn tautology() -> Self {
        Guard { required_any: vec![], forbidden: vec![] }
    }

    pub fn enabled(&self, labels: &Labels) -> bool {
        (self.required_any.is_empty() || self.required_any.iter().any(|p| labels.contains(p)))
            && self.forbidden.iter().all(|p| !labels.contains(p))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub guard_labels: Guard,
    /// Clock guard; `None` enables the transition at every clock value.
    pub interval: Option<Interval>,
    /// Indices of accepting sets entered when this transition fires.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accepting: Vec<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cycle_completed: bool,
}

impl Transition {
    fn enabled(&self, labels: &Labels, clock: ClockState) -> bool {
        self.guard_labels.enabled(labels)
            && self.interval.map_or(true, |iv| iv.contains(clock.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedLdgba {
    /// State names, indexed by position.
    pub states: Vec<String>,
    pub alphabet: Vec<String>,
    pub intervals: Vec<Interval>,
    pub initial: usize,
    pub sink: Option<usize>,
    pub accepting_sets: Vec<Vec<usize>>,
    pub transitions: Vec<Transition>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilon_transitions: Vec<(usize, usize)>,
}

/// Result of consuming one label set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub next_state: usize,
    pub entered_accepting: Vec<usize>,
    pub violated: bool,
    pub cycle_completed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunVerdict {
    /// First 1-based step (equal to the clock value at that step) on which
    /// the automaton entered the sink.
    Violated(usize),
    /// Number of completed satisfaction cycles over the whole word.
    Alive(usize),
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("stage propositions must be pairwise distinct (duplicate `{0}`)")]
    DuplicateStageProposition(String),
    #[error("at least one stage is required")]
    NoStages,
    #[error("state {state} has {count} enabled transitions for labels {labels:?} at clock {clock} (expected exactly 1)")]
    NotDeterministic {
        state: usize,
        labels: Vec<String>,
        clock: u32,
        count: usize,
    },
    #[error("unknown dump format `{0}` (expected `dot` or `json`)")]
    UnknownFormat(String),
    #[error("json: {0}")]
    Json(String),
}

/// Clock guard check: true iff `lower <= clock <= upper`.
pub fn guard_eval(interval: Interval, clock: ClockState) -> bool {
    interval.contains(clock.0)
}

/// Compile an ordered list of (proposition, window) stages into a T-LDGBA.
///
/// The automaton has one state per stage plus a sink. Stage `k` waits for its
/// proposition inside its window, advancing to stage `(k+1) mod n`; the last
/// advance completes the cycle. Observing the proposition below the window,
/// or any step whose clock exceeds a finite upper bound, routes to the sink.
/// With `strict_revisit`, observing an earlier completed stage's proposition
/// (without the current one) also routes to the sink. Guards are built
/// pairwise disjoint so exactly one transition is enabled per input.
pub fn build_recurrence_automaton(
    stages: &[(String, Interval)],
    strict_revisit: bool,
) -> Result<TimedLdgba, AutomatonError> {
    if stages.is_empty() {
        return Err(AutomatonError::NoStages);
    }
    let mut seen = BTreeSet::new();
    for (p, _) in stages {
        if !seen.insert(p.clone()) {
            return Err(AutomatonError::DuplicateStageProposition(p.clone()));
        }
    }

    let n = stages.len();
    let sink = n;
    let mut states: Vec<String> = (0..n).map(|k| format!("q{k}")).collect();
    states.push("sink".to_string());

    let mut transitions = Vec::new();
    for (k, (prop, window)) in stages.iter().enumerate() {
        let earlier: Vec<String> = stages[..k].iter().map(|(p, _)| p.clone()).collect();
        let in_window = *window;
        let below_window = (window.lower() > 0)
            .then(|| Interval::bounded(0, window.lower() - 1).expect("lower > 0"));
        let above_window = window.upper().map(|u| Interval::unbounded(u + 1));
        let up_to_deadline = match window.upper() {
            Some(u) => Interval::bounded(0, u).expect("valid"),
            None => Interval::full(),
        };

        // advance
        transitions.push(Transition {
            from: k,
            to: (k + 1) % n,
            guard_labels: Guard { required_any: vec![prop.clone()], forbidden: vec![] },
            interval: Some(in_window),
            accepting: vec![k],
            cycle_completed: k == n - 1,
        });
        // early arrival
        if let Some(iv) = below_window {
            transitions.push(Transition {
                from: k,
                to: sink,
                guard_labels: Guard { required_any: vec![prop.clone()], forbidden: vec![] },
                interval: Some(iv),
                accepting: vec![],
                cycle_completed: false,
            });
        }
        // missed deadline: fires on the first step whose clock exceeds the
        // upper bound, regardless of labels
        if let Some(iv) = above_window {
            transitions.push(Transition {
                from: k,
                to: sink,
                guard_labels: Guard::tautology(),
                interval: Some(iv),
                accepting: vec![],
                cycle_completed: false,
            });
        }
        // invalid revisit of a completed stage
        if strict_revisit && !earlier.is_empty() {
            transitions.push(Transition {
                from: k,
                to: sink,
                guard_labels: Guard {
                    required_any: earlier.clone(),
                    forbidden: vec![prop.clone()],
                },
                interval: Some(up_to_deadline),
                accepting: vec![],
                cycle_completed: false,
            });
        }
        // waiting self-loop
        let mut loop_forbidden = vec![prop.clone()];
        if strict_revisit {
            loop_forbidden.extend(earlier.iter().cloned());
        }
        transitions.push(Transition {
            from: k,
            to: k,
            guard_labels: Guard { required_any: vec![], forbidden: loop_forbidden },
            interval: Some(up_to_deadline),
            accepting: vec![],
            cycle_completed: false,
        });
    }
    // absorbing sink self-loop, unconditionally enabled
    transitions.push(Transition {
        from: sink,
        to: sink,
        guard_labels: Guard::tautology(),
        interval: None,
        accepting: vec![],
        cycle_completed: false,
    });

    let mut intervals: Vec<Interval> = stages.iter().map(|(_, iv)| *iv).collect();
    intervals.dedup();

    Ok(TimedLdgba {
        states,
        alphabet: stages.iter().map(|(p, _)| p.clone()).collect(),
        intervals,
        initial: 0,
        sink: Some(sink),
        accepting_sets: (0..n).map(|k| vec![(k + 1) % n]).collect(),
        transitions,
        epsilon_transitions: vec![],
    })
}

/// Consume one label set from state `q` at the (already incremented) clock.
pub fn automaton_step(
    aut: &TimedLdgba,
    q: usize,
    labels: &Labels,
    clock: ClockState,
) -> Result<StepOutcome, AutomatonError> {
    let enabled: Vec<&Transition> = aut
        .transitions
        .iter()
        .filter(|t| t.from == q && t.enabled(labels, clock))
        .collect();
    if enabled.len() != 1 {
        return Err(AutomatonError::NotDeterministic {
            state: q,
            labels: labels.iter().cloned().collect(),
            clock: clock.0,
            count: enabled.len(),
        });
    }
    let t = enabled[0];
    let violated = Some(t.to) == aut.sink && Some(q) != aut.sink;
    Ok(StepOutcome {
        next_state: t.to,
        entered_accepting: if violated { vec![] } else { t.accepting.clone() },
        violated,
        cycle_completed: t.cycle_completed,
    })
}

/// Fold `automaton_step` over a finite word from the initial configuration.
pub fn run_word(aut: &TimedLdgba, word: &[Labels]) -> Result<RunVerdict, AutomatonError> {
    let mut q = aut.initial;
    let mut clock = ClockState(0);
    let mut cycles = 0usize;
    for (i, labels) in word.iter().enumerate() {
        clock.0 += 1;
        let out = automaton_step(aut, q, labels, clock)?;
        if out.violated {
            return Ok(RunVerdict::Violated(i + 1));
        }
        if out.cycle_completed {
            cycles += 1;
            clock.0 = 0;
        }
        q = out.next_state;
    }
    Ok(RunVerdict::Alive(cycles))
}

/// Largest finite interval bound mentioned by the automaton, if any.
pub fn max_finite_bound(aut: &TimedLdgba) -> Option<u32> {
    aut.intervals
        .iter()
        .filter_map(|iv| iv.upper())
        .chain(aut.intervals.iter().map(|iv| iv.lower()))
        .max()
}

/// Serialize to DOT or JSON. JSON dumps round-trip through `load_json`.
pub fn dump(aut: &TimedLdgba, format: &str) -> Result<String, AutomatonError> {
    match format {
        "json" => serde_json::to_string_pretty(aut)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| AutomatonError::Json(e.to_string())),
        "dot" => Ok(dump_dot(aut)),
        other => Err(AutomatonError::UnknownFormat(other.to_string())),
    }
}

pub fn load_json(text: &str) -> Result<TimedLdgba, AutomatonError> {
    serde_json::from_str(text).map_err(|e| AutomatonError::Json(e.to_string()))
}

fn dump_dot(aut: &TimedLdgba) -> String {
    let mut out = String::from("digraph tldgba {\n  rankdir=LR;\n");
    let accepting: BTreeSet<usize> = aut.accepting_sets.iter().flatten().copied().collect();
    for (i, name) in aut.states.iter().enumerate() {
        let shape = if Some(i) == aut.sink {
            "box"
        } else if accepting.contains(&i) {
            "doublecircle"
        } else {
            "circle"
        };
        let _ = writeln!(out, "  {i} [label=\"{name}\", shape={shape}];");
    }
    let _ = writeln!(out, "  init [shape=point];\n  init -> {};", aut.initial);
    for t in &aut.transitions {
        let mut label = String::new();
        if !t.guard_labels.required_any.is_empty() {
            label.push_str(&t.guard_labels.required_any.join("|"));
        } else {
            label.push('T');
        }
        for f in &t.guard_labels.forbidden {
            let _ = write!(label, " &!{f}");
        }
        if let Some(iv) = t.interval {
            let _ = write!(label, " @{iv}");
        }
        if !t.accepting.is_empty() {
            let _ = write!(label, " {{F{:?}}}", t.accepting);
        }
        let _ = writeln!(out, "  {} -> {} [label=\"{label}\"];", t.from, t.to);
    }
    for (from, to) in &aut.epsilon_transitions {
        let _ = writeln!(out, "  {from} -> {to} [label=\"eps\", style=dashed];");
    }
    out.push_str("}\n");
    out
}
