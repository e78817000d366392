//! Policy evaluation: rollouts, success-rate aggregation with Wilson
//! intervals, trace/report export, and a value-iteration oracle over the
//! explicit product enumeration.

use crate::automata::TimedLdgba;
use crate::envs::{Action, MapSpec};
use crate::learn::{KeyTracker, Mode, QTable};
use crate::num::Scalar;
use crate::product::{product_step, EnumeratedProduct, ProductError, ProductState, RewardSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

pub enum Policy<'a, S: Scalar> {
    /// Greedy over a learned table.
    Greedy(&'a QTable<S>),
    /// Fixed action sequence, padded with its last action.
    Scripted(Vec<Action>),
    Uniform,
}

impl<'a, S: Scalar> Policy<'a, S> {
    fn choose<R: Rng>(
        &self,
        env: &MapSpec,
        tracker: &KeyTracker,
        state: &ProductState,
        t: usize,
        rng: &mut R,
    ) -> Action {
        match self {
            Policy::Greedy(table) => {
                let key = tracker.key(state);
                env.grid.actions[table.greedy_action(&key)]
            }
            Policy::Scripted(seq) => *seq.get(t).or_else(|| seq.last()).expect("non-empty script"),
            Policy::Uniform => env.grid.actions[rng.gen_range(0..env.grid.actions.len())],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalStatus {
    Sink,
    Horizon,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord<S: Scalar> {
    pub t: usize,
    pub cell: (u32, u32),
    pub observation: String,
    pub action: String,
    pub q: usize,
    pub clock: u32,
    pub reward: S,
    pub accepting: Vec<usize>,
    pub cycle_completed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeTrace<S: Scalar> {
    pub seed: u64,
    pub steps: Vec<StepRecord<S>>,
    pub status: TerminalStatus,
    pub cycles_completed: usize,
    pub cumulative_reward: S,
    /// Non-stay actions taken.
    pub movement_steps: usize,
}

impl<S: Scalar> EpisodeTrace<S> {
    /// Success: at least one completed cycle and no sink entry.
    pub fn success(&self) -> bool {
        self.cycles_completed >= 1 && self.status != TerminalStatus::Sink
    }

    /// Clocks at which each accepting set was entered.
    pub fn accepting_clocks(&self, set_index: usize) -> Vec<u32> {
        self.steps
            .iter()
            .filter(|s| s.accepting.contains(&set_index))
            .map(|s| s.clock)
            .collect()
    }
}

/// Roll out one episode; stops on sink entry or at the horizon.
pub fn rollout<S: Scalar>(
    env: &MapSpec,
    aut: &TimedLdgba,
    policy: &Policy<'_, S>,
    reward: &RewardSpec<S>,
    horizon: usize,
    mode: Mode,
    window: usize,
    seed: u64,
) -> Result<EpisodeTrace<S>, ProductError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ProductState { cell: env.grid.start, q: aut.initial, clock: 0 };
    let mut tracker = KeyTracker::new(mode, window);
    let mut steps = Vec::new();
    let mut cycles = 0usize;
    let mut cum = S::zero();
    let mut movement = 0usize;
    let mut status = TerminalStatus::Horizon;

    for t in 0..horizon {
        let action = policy.choose(env, &tracker, &state, t, &mut rng);
        let res = product_step(env, aut, state, action, reward, &mut rng)?;
        tracker.push(res.observation, action);
        cum = cum + res.reward;
        if action != Action::Stay {
            movement += 1;
        }
        if res.cycle_completed {
            cycles += 1;
        }
        steps.push(StepRecord {
            t,
            cell: (res.next.cell.x, res.next.cell.y),
            observation: res.observation.to_string(),
            action: action.to_string(),
            q: res.next.q,
            clock: if res.cycle_completed { state.clock + 1 } else { res.next.clock },
            reward: res.reward,
            accepting: res.accepting_entered.clone(),
            cycle_completed: res.cycle_completed,
        });
        if res.done {
            status = TerminalStatus::Sink;
            break;
        }
        state = res.next;
    }

    Ok(EpisodeTrace {
        seed,
        steps,
        status,
        cycles_completed: cycles,
        cumulative_reward: cum,
        movement_steps: movement,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport<S: Scalar> {
    pub n_episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub mean_cycles: f64,
    pub mean_cumulative_reward: S,
    pub mean_movement_steps_per_cycle: Option<f64>,
    /// Per accepting set: histogram of clock values at entry.
    pub accepting_clock_hist: Vec<BTreeMap<u32, u64>>,
}

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64;
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * ((p * (1.0 - p) + z2 / (4.0 * n_f)) / n_f).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Run `n` independent rollouts with seeds derived from `seed` and aggregate.
#[allow(clippy::too_many_arguments)]
pub fn success_rate<S: Scalar>(
    env: &MapSpec,
    aut: &TimedLdgba,
    policy: &Policy<'_, S>,
    reward: &RewardSpec<S>,
    horizon: usize,
    mode: Mode,
    window: usize,
    n: usize,
    seed: u64,
) -> Result<(EvalReport<S>, Vec<EpisodeTrace<S>>), ProductError> {
    assert!(n >= 1);
    let mut traces = Vec::with_capacity(n);
    for i in 0..n {
        let ep_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
        traces.push(rollout(env, aut, policy, reward, horizon, mode, window, ep_seed)?);
    }
    let successes = traces.iter().filter(|t| t.success()).count();
    let (lo, hi) = wilson_interval(successes, n);
    let total_cycles: usize = traces.iter().map(|t| t.cycles_completed).sum();
    let total_movement: usize = traces.iter().map(|t| t.movement_steps).sum();
    let mean_reward = traces
        .iter()
        .fold(S::zero(), |a, t| a + t.cumulative_reward)
        / S::from_f64_lossy(n as f64);
    let n_sets = aut.accepting_sets.len();
    let mut hist: Vec<BTreeMap<u32, u64>> = vec![BTreeMap::new(); n_sets];
    for t in &traces {
        for step in &t.steps {
            for &s in &step.accepting {
                *hist[s].entry(step.clock).or_default() += 1;
            }
        }
    }
    let report = EvalReport {
        n_episodes: n,
        successes,
        success_rate: successes as f64 / n as f64,
        wilson_low: lo,
        wilson_high: hi,
        mean_cycles: total_cycles as f64 / n as f64,
        mean_cumulative_reward: mean_reward,
        mean_movement_steps_per_cycle: (total_cycles > 0)
            .then(|| total_movement as f64 / total_cycles as f64),
        accepting_clock_hist: hist,
    };
    Ok((report, traces))
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("value iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("io error writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

const MAX_VI_SWEEPS: usize = 100_000;

/// Bellman-optimality iteration to sup-norm `tolerance`; returns optimal
/// values and a greedy policy over the enumerated product states.
pub fn value_iteration<S: Scalar>(
    product: &EnumeratedProduct<S>,
    gamma: S,
    tolerance: f64,
) -> Result<(Vec<S>, Vec<usize>), EvalError> {
    assert!(gamma < S::one(), "gamma must be < 1");
    let n = product.states.len();
    let mut values = vec![S::zero(); n];
    for sweep in 0..MAX_VI_SWEEPS {
        let mut delta = 0.0f64;
        for i in 0..n {
            if product.absorbing[i] {
                continue;
            }
            let mut best = S::neg_infinity();
            for outs in &product.transitions[i] {
                let mut q = S::zero();
                for &(j, p, r) in outs {
                    q = q + S::from_f64_lossy(p) * (r + gamma * values[j]);
                }
                if q > best {
                    best = q;
                }
            }
            let d = (best - values[i]).abs().to_f64_lossy();
            if d > delta {
                delta = d;
            }
            values[i] = best;
        }
        if delta <= tolerance {
            let policy = greedy_from_values(product, gamma, &values);
            return Ok((values, policy));
        }
        let _ = sweep;
    }
    Err(EvalError::NoConvergence(MAX_VI_SWEEPS))
}

fn greedy_from_values<S: Scalar>(
    product: &EnumeratedProduct<S>,
    gamma: S,
    values: &[S],
) -> Vec<usize> {
    (0..product.states.len())
        .map(|i| {
            if product.absorbing[i] {
                return 0;
            }
            let mut best = 0usize;
            let mut best_q = S::neg_infinity();
            for (a, outs) in product.transitions[i].iter().enumerate() {
                let mut q = S::zero();
                for &(j, p, r) in outs {
                    q = q + S::from_f64_lossy(p) * (r + gamma * values[j]);
                }
                if q > best_q {
                    best_q = q;
                    best = a;
                }
            }
            best
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<(), EvalError> {
    let io = |source| EvalError::Io { path: path.display().to_string(), source };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes())
        .map_err(|source| EvalError::Io { path: path.display().to_string(), source })
}

/// Traces as JSONL: a header object, then one object per step.
pub fn export_traces<S: Scalar>(
    traces: &[EpisodeTrace<S>],
    config_hash: &str,
    path: &Path,
) -> Result<(), EvalError> {
    let mut out = String::new();
    for trace in traces {
        let header = serde_json::json!({
            "seed": trace.seed,
            "config_hash": config_hash,
            "status": trace.status,
            "cycles_completed": trace.cycles_completed,
        });
        out.push_str(&header.to_string());
        out.push('\n');
        for step in &trace.steps {
            out.push_str(&serde_json::to_string(step).expect("serializable"));
            out.push('\n');
        }
    }
    write_file(path, &out)
}

pub fn export_report<S: Scalar>(report: &EvalReport<S>, path: &Path) -> Result<(), EvalError> {
    let body = serde_json::to_string_pretty(report).expect("serializable") + "\n";
    write_file(path, &body)
}

/// Learning curve as CSV with a fixed header.
pub fn export_curve<S: Scalar>(
    curve: &[crate::learn::CurvePoint<S>],
    path: &Path,
) -> Result<(), EvalError> {
    let mut out = String::from("episode,cumulative_reward,moving_avg_100\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{}\n",
            p.episode, p.cumulative_reward, p.moving_avg_100
        ));
    }
    write_file(path, &out)
}
