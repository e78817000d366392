//! On-the-fly synchronization of an environment with a timed automaton:
//! product states, the constrained transition/observation behavior, the
//! reward signal, and an explicit small-scale enumeration used as a test
//! oracle.

use crate::automata::{automaton_step, AutomatonError, ClockState, TimedLdgba};
use crate::envs::{mdp_step, observe, Action, Cell, EnvError, MapSpec, Obs};
use crate::num::Scalar;
use rand::Rng;
use serde::Serialize;
use std::collections::HashMap;

/// Product configuration `⟨cell, automaton state, clock⟩`. The automaton
/// state and clock are always exactly known, even in POMDP mode; the cell is
/// hidden from the learner there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ProductState {
    pub cell: Cell,
    pub q: usize,
    pub clock: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardSpec<S: Scalar> {
    /// Reward granted per accepting-set entry.
    pub accept_reward: S,
    /// Added for every non-stay action; zero or negative.
    pub movement_penalty: S,
}

impl<S: Scalar> Default for RewardSpec<S> {
    fn default() -> Self {
        RewardSpec {
            accept_reward: S::from_f64_lossy(100.0),
            movement_penalty: S::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductStepResult<S: Scalar> {
    pub next: ProductState,
    pub observation: Obs,
    pub reward: S,
    pub done: bool,
    pub accepting_entered: Vec<usize>,
    pub cycle_completed: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ProductError {
    #[error("cannot step from the sink state")]
    SteppedFromSink,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error("product enumeration exceeds {max} states")]
    TooLarge { max: usize },
    #[error("clock bound {bound} too small; need at least {need}")]
    ClockBoundTooSmall { bound: u32, need: u32 },
}

/// One synchronized step: environment move, clock tick, automaton transition
/// on the labels of the landing cell, reward, and (in POMDP mode) an
/// observation of the landing cell.
pub fn product_step<S: Scalar, R: Rng>(
    env: &MapSpec,
    aut: &TimedLdgba,
    state: ProductState,
    action: Action,
    reward: &RewardSpec<S>,
    rng: &mut R,
) -> Result<ProductStepResult<S>, ProductError> {
    if Some(state.q) == aut.sink {
        return Err(ProductError::SteppedFromSink);
    }
    let next_cell = mdp_step(&env.grid, state.cell, action, rng)?;
    let clock = ClockState(state.clock + 1);
    let labels = env.grid.labels_at(next_cell);
    let out = automaton_step(aut, state.q, &labels, clock)?;
    let observation = observe(&env.observation, &env.grid, next_cell, rng);
    Ok(assemble(next_cell, clock, out, action, reward, observation))
}

fn assemble<S: Scalar>(
    next_cell: Cell,
    clock: ClockState,
    out: crate::automata::StepOutcome,
    action: Action,
    reward: &RewardSpec<S>,
    observation: Obs,
) -> ProductStepResult<S> {
    let next_clock = if out.cycle_completed { 0 } else { clock.0 };
    let r = if out.violated {
        // sink entry yields zero total, movement penalty included
        S::zero()
    } else {
        let accept = S::from_f64_lossy(out.entered_accepting.len() as f64) * reward.accept_reward;
        let movement = if action == Action::Stay {
            S::zero()
        } else {
            reward.movement_penalty
        };
        accept + movement
    };
    ProductStepResult {
        next: ProductState {
            cell: next_cell,
            q: out.next_state,
            clock: next_clock,
        },
        observation,
        reward: r,
        done: out.violated,
        accepting_entered: out.entered_accepting,
        cycle_completed: out.cycle_completed,
    }
}

/// An ε-move of the automaton: consumes no environment step, keeps the cell
/// and clock fixed. Only exercised by automata that carry ε-transitions; the
/// fragment compiler emits none.
pub fn epsilon_step<S: Scalar>(
    aut: &TimedLdgba,
    state: ProductState,
    epsilon_index: usize,
) -> Result<ProductStepResult<S>, ProductError> {
    if Some(state.q) == aut.sink {
        return Err(ProductError::SteppedFromSink);
    }
    let &(from, to) = aut
        .epsilon_transitions
        .get(epsilon_index)
        .filter(|(from, _)| *from == state.q)
        .ok_or(AutomatonError::NotDeterministic {
            state: state.q,
            labels: vec!["<epsilon>".into()],
            clock: state.clock,
            count: 0,
        })?;
    debug_assert_eq!(from, state.q);
    Ok(ProductStepResult {
        next: ProductState {
            cell: state.cell,
            q: to,
            clock: state.clock,
        },
        observation: Obs::Cell(state.cell),
        reward: S::zero(),
        done: false,
        accepting_entered: vec![],
        cycle_completed: false,
    })
}

/// Explicitly enumerated product over cells × automaton states × clocks,
/// with exact transition probabilities and rewards. Used as a ground-truth
/// oracle at tiny scale.
#[derive(Debug, Clone, Serialize)]
pub struct EnumeratedProduct<S: Scalar> {
    pub states: Vec<ProductState>,
    pub initial: usize,
    pub n_actions: usize,
    pub actions: Vec<Action>,
    /// `transitions[state][action]` = list of (next state index, probability,
    /// reward). Absorbing (sink) states have no outgoing entries.
    pub transitions: Vec<Vec<Vec<(usize, f64, S)>>>,
    pub absorbing: Vec<bool>,
}

const MAX_PRODUCT_STATES: usize = 1_000_000;

/// Breadth-first enumeration from the initial product state. `clock_bound`
/// must exceed every finite interval bound by at least 2 and every lower
/// bound by at least 1; clocks saturate there, which is sound because all
/// guards are constant past that point.
pub fn enumerate_product<S: Scalar>(
    env: &MapSpec,
    aut: &TimedLdgba,
    reward: &RewardSpec<S>,
    clock_bound: u32,
) -> Result<EnumeratedProduct<S>, ProductError> {
    let need = aut
        .intervals
        .iter()
        .map(|iv| match iv.upper() {
            Some(u) => u + 2,
            None => iv.lower() + 1,
        })
        .max()
        .unwrap_or(1);
    if clock_bound < need {
        return Err(ProductError::ClockBoundTooSmall { bound: clock_bound, need });
    }

    let mut index: HashMap<ProductState, usize> = HashMap::new();
    let mut states: Vec<ProductState> = Vec::new();
    let mut queue: Vec<usize> = Vec::new();
    let s0 = ProductState {
        cell: env.grid.start,
        q: aut.initial,
        clock: 0,
    };
    index.insert(s0, 0);
    states.push(s0);
    queue.push(0);

    let actions = env.grid.actions.clone();
    let mut transitions: Vec<Vec<Vec<(usize, f64, S)>>> = Vec::new();
    let mut absorbing: Vec<bool> = Vec::new();

    let mut head = 0;
    while head < queue.len() {
        let si = queue[head];
        head += 1;
        let s = states[si];
        let is_sink = Some(s.q) == aut.sink;
        if transitions.len() <= si {
            transitions.resize(si + 1, Vec::new());
            absorbing.resize(si + 1, false);
        }
        absorbing[si] = is_sink;
        if is_sink {
            continue;
        }
        let mut per_action = Vec::with_capacity(actions.len());
        for &a in &actions {
            let env_dist = env.grid.transition_dist(s.cell, a)?;
            let mut out: Vec<(usize, f64, S)> = Vec::new();
            for (next_cell, p) in env_dist {
                let clock = ClockState((s.clock + 1).min(clock_bound));
                let labels = env.grid.labels_at(next_cell);
                let step = automaton_step(aut, s.q, &labels, clock)?;
                let res = assemble(next_cell, clock, step, a, reward, Obs::Cell(next_cell));
                let mut ns = res.next;
                ns.clock = ns.clock.min(clock_bound);
                let ni = match index.get(&ns) {
                    Some(&i) => i,
                    None => {
                        let i = states.len();
                        if i >= MAX_PRODUCT_STATES {
                            return Err(ProductError::TooLarge { max: MAX_PRODUCT_STATES });
                        }
                        index.insert(ns, i);
                        states.push(ns);
                        queue.push(i);
                        i
                    }
                };
                match out.iter_mut().find(|(j, _, r)| *j == ni && *r == res.reward) {
                    Some((_, q, _)) => *q += p,
                    None => out.push((ni, p, res.reward)),
                }
            }
            per_action.push(out);
        }
        transitions[si] = per_action;
    }
    transitions.resize(states.len(), Vec::new());
    absorbing.resize(states.len(), false);
    for (i, s) in states.iter().enumerate() {
        if Some(s.q) == aut.sink {
            absorbing[i] = true;
        }
    }

    Ok(EnumeratedProduct {
        states,
        initial: 0,
        n_actions: actions.len(),
        actions,
        transitions,
        absorbing,
    })
}

impl<S: Scalar> EnumeratedProduct<S> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }
}
