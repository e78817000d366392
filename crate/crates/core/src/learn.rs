//! Tabular Q-learning over product states (MDP) or fixed-window
//! observation-history keys (POMDP), with a periodically synced target table
//! and optional uniform experience replay.

use crate::automata::TimedLdgba;
use crate::envs::{Action, MapSpec, Obs};
use crate::num::Scalar;
use crate::product::{product_step, ProductError, ProductState, RewardSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

/// Key under which Q-values are stored.
///
/// MDP mode uses the exact product state. POMDP mode replaces the hidden cell
/// with the last `k` (observation, action) pairs; the window is shorter than
/// `k` right after an episode start. The automaton state and clock are known
/// exactly in both modes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LearnerKey {
    Mdp {
        cell: (u32, u32),
        q: usize,
        clock: u32,
    },
    Pomdp {
        window: Vec<(Obs, Action)>,
        q: usize,
        clock: u32,
    },
}

impl fmt::Display for LearnerKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerKey::Mdp { cell, q, clock } => {
                write!(f, "s={},{}|q={q}|c={clock}", cell.0, cell.1)
            }
            LearnerKey::Pomdp { window, q, clock } => {
                write!(f, "w=")?;
                for (o, a) in window {
                    write!(f, "({o};{a})")?;
                }
                write!(f, "|q={q}|c={clock}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    /// Fraction of episodes over which epsilon decays linearly from start to
    /// end; it stays at `end` afterwards.
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule { start: 1.0, end: 0.05, decay_fraction: 0.7 }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, episode: usize, total_episodes: usize) -> f64 {
        let span = (total_episodes as f64 * self.decay_fraction).max(1.0);
        let t = (episode as f64 / span).min(1.0);
        self.start + (self.end - self.start) * t
    }
}

/// Evaluation and target value tables plus learning hyperparameters.
#[derive(Debug, Clone)]
pub struct QTable<S: Scalar> {
    eval_values: HashMap<LearnerKey, Vec<S>>,
    target_values: HashMap<LearnerKey, Vec<S>>,
    pub n_actions: usize,
    pub alpha: S,
    pub gamma: S,
}

impl<S: Scalar> QTable<S> {
    pub fn new(n_actions: usize, alpha: S, gamma: S) -> Self {
        assert!(n_actions > 0);
        assert!(alpha > S::zero() && alpha <= S::one(), "alpha in (0,1]");
        assert!(gamma >= S::zero() && gamma <= S::one(), "gamma in [0,1]");
        QTable {
            eval_values: HashMap::new(),
            target_values: HashMap::new(),
            n_actions,
            alpha,
            gamma,
        }
    }

    /// Evaluation values for a key; unseen keys read as all-zero.
    pub fn eval(&self, key: &LearnerKey) -> Vec<S> {
        self.eval_values
            .get(key)
            .cloned()
            .unwrap_or_else(|| vec![S::zero(); self.n_actions])
    }

    fn target_max(&self, key: &LearnerKey) -> S {
        self.target_values
            .get(key)
            .map(|v| v.iter().cloned().fold(S::neg_infinity(), S::max))
            .unwrap_or_else(S::zero)
    }

    /// Copy the evaluation table into the target table.
    pub fn sync_target(&mut self) {
        self.target_values = self.eval_values.clone();
    }

    pub fn len(&self) -> usize {
        self.eval_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eval_values.is_empty()
    }

    /// Greedy action: argmax of the evaluation values, ties broken by the
    /// lowest action index.
    pub fn greedy_action(&self, key: &LearnerKey) -> usize {
        let vals = self.eval(key);
        let mut best = 0;
        for (i, v) in vals.iter().enumerate().skip(1) {
            if *v > vals[best] {
                best = i;
            }
        }
        best
    }

    /// Serialize as a JSON object with entries sorted by key, for
    /// reproducible diffs. Each entry carries the structured key (for
    /// reloading), its display form (for reading), and the action values.
    pub fn to_sorted_json(&self) -> String {
        let sorted: BTreeMap<&LearnerKey, &Vec<S>> = self.eval_values.iter().collect();
        let entries: Vec<serde_json::Value> = sorted
            .into_iter()
            .map(|(k, v)| {
                serde_json::json!({ "key": k, "label": k.to_string(), "q": v })
            })
            .collect();
        let body = serde_json::json!({
            "n_actions": self.n_actions,
            "alpha": self.alpha.to_f64_lossy(),
            "gamma": self.gamma.to_f64_lossy(),
            "entries": entries,
        });
        serde_json::to_string_pretty(&body).expect("serializable") + "\n"
    }

    /// Inverse of [`to_sorted_json`](Self::to_sorted_json); the target table
    /// is restored as a copy of the evaluation table.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        struct Entry<S> {
            key: LearnerKey,
            q: Vec<S>,
        }
        #[derive(Deserialize)]
        struct File<S> {
            n_actions: usize,
            alpha: f64,
            gamma: f64,
            entries: Vec<Entry<S>>,
        }
        let file: File<S> = serde_json::from_str(text)?;
        let mut table = QTable::new(
            file.n_actions,
            S::from_f64_lossy(file.alpha),
            S::from_f64_lossy(file.gamma),
        );
        for e in file.entries {
            table.eval_values.insert(e.key, e.q);
        }
        table.sync_target();
        Ok(table)
    }
}

/// One Bellman update (the DQN update realized on tables): writes and
/// returns `Q_e + α·(r + γ·max_a' Q_t(next) − Q_e)`; the bootstrap term is
/// dropped on terminal transitions.
pub fn q_update<S: Scalar>(
    table: &mut QTable<S>,
    key: &LearnerKey,
    action: usize,
    reward: S,
    next_key: &LearnerKey,
    done: bool,
) -> S {
    let bootstrap = if done { S::zero() } else { table.target_max(next_key) };
    let n = table.n_actions;
    let entry = table
        .eval_values
        .entry(key.clone())
        .or_insert_with(|| vec![S::zero(); n]);
    let q = entry[action];
    let updated = q + table.alpha * (reward + table.gamma * bootstrap - q);
    entry[action] = updated;
    updated
}

/// ε-greedy action selection over the evaluation table.
pub fn select_action<S: Scalar, R: Rng>(
    table: &QTable<S>,
    key: &LearnerKey,
    epsilon: f64,
    rng: &mut R,
) -> usize {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..table.n_actions)
    } else {
        table.greedy_action(key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayParams {
    pub capacity: usize,
    pub batch: usize,
}

/// FIFO replay buffer with uniform sampling.
pub struct ReplayBuffer<S: Scalar> {
    capacity: usize,
    items: VecDeque<(LearnerKey, usize, S, LearnerKey, bool)>,
}

impl<S: Scalar> ReplayBuffer<S> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer { capacity, items: VecDeque::new() }
    }

    pub fn push(&mut self, item: (LearnerKey, usize, S, LearnerKey, bool)) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn sample<'a, R: Rng>(
        &'a self,
        batch: usize,
        rng: &mut R,
    ) -> Vec<&'a (LearnerKey, usize, S, LearnerKey, bool)> {
        (0..batch)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mdp,
    Pomdp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub episodes: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    /// Steps between target-table syncs.
    pub sync_period: u64,
    pub replay: Option<ReplayParams>,
    /// Observation-history window length in POMDP mode.
    pub window: usize,
    pub horizon: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            episodes: 20_000,
            alpha: 0.1,
            gamma: 0.95,
            epsilon: EpsilonSchedule::default(),
            sync_period: 500,
            replay: None,
            window: 4,
            horizon: 60,
        }
    }
}

/// Per-episode point on the learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint<S: Scalar> {
    pub episode: usize,
    pub cumulative_reward: S,
    pub moving_avg_100: S,
}

/// Maintains the learner key along a rollout.
#[derive(Debug, Clone)]
pub struct KeyTracker {
    mode: Mode,
    window_len: usize,
    window: VecDeque<(Obs, Action)>,
}

impl KeyTracker {
    pub fn new(mode: Mode, window_len: usize) -> Self {
        KeyTracker { mode, window_len, window: VecDeque::new() }
    }

    pub fn reset(&mut self) {
        self.window.clear();
    }

    pub fn key(&self, state: &ProductState) -> LearnerKey {
        match self.mode {
            Mode::Mdp => LearnerKey::Mdp {
                cell: (state.cell.x, state.cell.y),
                q: state.q,
                clock: state.clock,
            },
            Mode::Pomdp => LearnerKey::Pomdp {
                window: self.window.iter().cloned().collect(),
                q: state.q,
                clock: state.clock,
            },
        }
    }

    pub fn push(&mut self, obs: Obs, action: Action) {
        if self.mode == Mode::Mdp {
            return;
        }
        if self.window.len() == self.window_len {
            self.window.pop_front();
        }
        self.window.push_back((obs, action));
    }
}

/// Run ε-greedy Q-learning on the product process.
pub fn train<S: Scalar>(
    env: &MapSpec,
    aut: &TimedLdgba,
    reward: &RewardSpec<S>,
    params: &Hyperparams,
    mode: Mode,
    seed: u64,
) -> Result<(QTable<S>, Vec<CurvePoint<S>>), ProductError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = QTable::new(
        env.grid.actions.len(),
        S::from_f64_lossy(params.alpha),
        S::from_f64_lossy(params.gamma),
    );
    let mut replay = params.replay.map(|p| ReplayBuffer::<S>::new(p.capacity));
    let mut curve = Vec::with_capacity(params.episodes);
    let mut recent: VecDeque<S> = VecDeque::with_capacity(100);
    let mut global_step: u64 = 0;

    for episode in 0..params.episodes {
        let epsilon = params.epsilon.at(episode, params.episodes);
        let mut state = ProductState { cell: env.grid.start, q: aut.initial, clock: 0 };
        let mut tracker = KeyTracker::new(mode, params.window);
        let mut cum = S::zero();

        for _ in 0..params.horizon {
            let key = tracker.key(&state);
            let ai = select_action(&table, &key, epsilon, &mut rng);
            let action = env.grid.actions[ai];
            let res = product_step(env, aut, state, action, reward, &mut rng)?;
            tracker.push(res.observation, action);
            let next_key = tracker.key(&res.next);
            cum = cum + res.reward;

            match (&mut replay, params.replay) {
                (Some(buf), Some(rp)) => {
                    buf.push((key, ai, res.reward, next_key, res.done));
                    if buf.len() >= rp.batch {
                        let batch: Vec<_> = buf
                            .sample(rp.batch, &mut rng)
                            .into_iter()
                            .cloned()
                            .collect();
                        for (k, a, r, nk, d) in &batch {
                            q_update(&mut table, k, *a, *r, nk, *d);
                        }
                    }
                }
                _ => {
                    q_update(&mut table, &key, ai, res.reward, &next_key, res.done);
                }
            }

            global_step += 1;
            if global_step % params.sync_period == 0 {
                table.sync_target();
            }
            if res.done {
                break;
            }
            state = res.next;
        }

        if recent.len() == 100 {
            recent.pop_front();
        }
        recent.push_back(cum);
        let avg = recent.iter().fold(S::zero(), |a, b| a + *b)
            / S::from_f64_lossy(recent.len() as f64);
        curve.push(CurvePoint { episode, cumulative_reward: cum, moving_avg_100: avg });
    }
    Ok((table, curve))
}
