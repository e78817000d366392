//! Command-line front end: parse and check formulas against lasso words,
//! compile the recurrence fragment to a timed automaton, train and evaluate
//! policies on the bundled grid maps, and dump the enumerated product.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use tsrl_core::automata::{self, build_recurrence_automaton, run_word, RunVerdict, TimedLdgba};
use tsrl_core::envs::{load_map, MapSpec, ObservationSpec};
use tsrl_core::eval::{
    export_curve, export_report, export_traces, success_rate, Policy,
};
use tsrl_core::fragment::stages_from_formula;
use tsrl_core::learn::{train, Hyperparams, Mode, QTable};
use tsrl_core::mitl::{parse, satisfies, Formula, Labels, LassoWord};
use tsrl_core::product::{enumerate_product, RewardSpec};

#[derive(Parser)]
#[command(name = "tsrl", version, about = "Timed-specification reinforcement learning on grid worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a formula on a lasso word with the brute-force oracle and,
    /// for the recurrence fragment, the compiled automaton.
    Check {
        /// Formula text, e.g. "G (F[5,10] a & F[15,20] b)".
        #[arg(long)]
        formula: String,
        /// JSON word file: {"prefix": [["a"], []], "cycle": [["b"]]}.
        #[arg(long)]
        word: PathBuf,
        /// Print the parsed AST as an indented s-expression.
        #[arg(long)]
        dump_ast: bool,
        /// Enable the invalid-revisit violation in the compiled automaton.
        #[arg(long)]
        strict_revisit: bool,
    },
    /// Compile the config's formula to a timed automaton and write DOT and
    /// JSON dumps.
    Automaton {
        #[command(flatten)]
        common: CommonArgs,
        /// Print the parsed AST as an indented s-expression.
        #[arg(long)]
        dump_ast: bool,
    },
    /// Train a Q-table on the config's product and write the table and the
    /// learning curve.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Training seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Roll out the greedy policy from a trained table and write a report
    /// and per-episode traces.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Seed of the training run whose table to load; also seeds the
        /// evaluation episodes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of evaluation episodes.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Evaluate with deterministic transitions regardless of the map's
        /// slip probability.
        #[arg(long)]
        deterministic: bool,
    },
    /// Enumerate the finite product MDP and dump it as JSON.
    DumpProduct {
        #[command(flatten)]
        common: CommonArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        dump_product: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output root; overrides the TSRL_OUT environment variable and the
    /// default `runs/`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's strict_revisit flag.
    #[arg(long)]
    strict_revisit: Option<bool>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardConfig {
    accept: f64,
    movement_penalty: f64,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    formula: String,
    map: PathBuf,
    mode: Mode,
    #[serde(default)]
    strict_revisit: bool,
    #[serde(default)]
    deterministic: bool,
    reward: RewardConfig,
    learner: Hyperparams,
}

/// Everything loaded and validated from a config file.
struct Instance {
    env: MapSpec,
    aut: TimedLdgba,
    formula: Formula,
    reward: RewardSpec<f64>,
    params: Hyperparams,
    mode: Mode,
    hash: String,
}

fn load_instance(path: &Path, strict_override: Option<bool>) -> Result<Instance> {
    let config_text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let config: RunConfig =
        serde_json::from_str(&config_text).with_context(|| format!("parsing {}", path.display()))?;

    let map_path = if config.map.is_relative() {
        path.parent()
            .map(|p| p.join(&config.map))
            .filter(|p| p.exists())
            .unwrap_or(config.map.clone())
    } else {
        config.map.clone()
    };
    let map_text = std::fs::read_to_string(&map_path)
        .with_context(|| format!("reading map {}", map_path.display()))?;
    let mut env = load_map(&map_path)?;

    let strict = strict_override.unwrap_or(config.strict_revisit);
    let formula = parse(&config.formula, &env.grid.alphabet())
        .map_err(|e| anyhow!("formula: {e}"))?;
    let stages = stages_from_formula(&formula)?;
    let aut = build_recurrence_automaton(&stages, strict)?;

    match (&config.mode, &env.observation) {
        (Mode::Mdp, ObservationSpec::Full) => {}
        (Mode::Pomdp, ObservationSpec::Full) => {
            bail!("mode pomdp but map observation is full")
        }
        (Mode::Mdp, _) => bail!("mode mdp but map observation is partial"),
        (Mode::Pomdp, _) => {}
    }

    if config.deterministic {
        env.grid.deterministic = true;
    }

    // The hash covers the config and map bytes plus the effective strictness
    // flag, so a table trained under one instance is never silently reused
    // for another.
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    hasher.update(map_text.as_bytes());
    hasher.update([strict as u8]);
    let hash = hex::encode(hasher.finalize())[..12].to_string();

    Ok(Instance {
        env,
        aut,
        formula,
        reward: RewardSpec {
            accept_reward: config.reward.accept,
            movement_penalty: config.reward.movement_penalty,
        },
        params: config.learner,
        mode: config.mode,
        hash,
    })
}

fn out_dir(common: &CommonArgs, hash: &str, seed: u64) -> PathBuf {
    out_root(common).join(hash).join(seed.to_string())
}

fn out_root(common: &CommonArgs) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os("TSRL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct WordFile {
    #[serde(default)]
    prefix: Vec<Vec<String>>,
    cycle: Vec<Vec<String>>,
}

fn load_word(path: &Path) -> Result<LassoWord> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading word {}", path.display()))?;
    let file: WordFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let to_labels = |v: Vec<Vec<String>>| -> Vec<Labels> {
        v.into_iter().map(|l| l.into_iter().collect()).collect()
    };
    LassoWord::new(to_labels(file.prefix), to_labels(file.cycle))
        .map_err(|e| anyhow!("word: {e}"))
}

fn cmd_check(formula_text: &str, word_path: &Path, dump_ast: bool, strict: bool) -> Result<()> {
    let word = load_word(word_path)?;
    let mut alphabet: BTreeSet<String> = word.alphabet();
    // Atoms mentioned by the formula but absent from the word are legal; add
    // them by parsing once against an open alphabet.
    let formula = match parse(formula_text, &alphabet) {
        Ok(f) => f,
        Err(_) => {
            let open: BTreeSet<String> = formula_atoms(formula_text);
            alphabet.extend(open.iter().cloned());
            parse(formula_text, &alphabet).map_err(|e| anyhow!("formula: {e}"))?
        }
    };
    if dump_ast {
        println!("{}", formula.to_sexpr());
    }
    let sat = satisfies(&word, 0, &formula);
    let verdict = if sat { "SAT" } else { "UNSAT" };

    match stages_from_formula(&formula) {
        Ok(stages) => {
            let aut = build_recurrence_automaton(&stages, strict)?;
            // Unroll far enough that every finite guard is exercised in at
            // least two cycle traversals.
            let bound = automata::max_finite_bound(&aut).unwrap_or(0) as usize;
            let cycles = (2 * bound + 4) / word.cycle.len().max(1) + 2;
            let n = word.prefix.len() + word.cycle.len() * cycles;
            match run_word(&aut, &word.unroll(n))? {
                RunVerdict::Violated(step) => println!("{verdict} / automaton: violated({step})"),
                RunVerdict::Alive(k) => println!("{verdict} / automaton: alive({k})"),
            }
        }
        Err(_) => println!("{verdict}"),
    }
    Ok(())
}

/// Crude identifier scan used only to widen the alphabet for `check`.
fn formula_atoms(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut cur = String::new();
    for ch in text.chars().chain([' ']) {
        if ch.is_alphanumeric() || ch == '_' {
            cur.push(ch);
        } else if !cur.is_empty() {
            let word = std::mem::take(&mut cur);
            let keyword = matches!(word.as_str(), "true" | "U" | "X" | "F" | "G" | "inf")
                || word.chars().all(|c| c.is_ascii_digit());
            if !keyword {
                out.insert(word);
            }
        }
    }
    out
}

fn cmd_automaton(common: &CommonArgs, dump_ast: bool) -> Result<()> {
    let inst = load_instance(&common.config, common.strict_revisit)?;
    if dump_ast {
        println!("{}", inst.formula.to_sexpr());
    }
    let dir = out_root(common).join(&inst.hash);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("automaton.dot"), automata::dump(&inst.aut, "dot")?)?;
    std::fs::write(dir.join("automaton.json"), automata::dump(&inst.aut, "json")?)?;
    println!(
        "{} states, {} transitions -> {}",
        inst.aut.states.len(),
        inst.aut.transitions.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_train(common: &CommonArgs, seed: u64) -> Result<()> {
    let inst = load_instance(&common.config, common.strict_revisit)?;
    let dir = out_dir(common, &inst.hash, seed);
    std::fs::create_dir_all(&dir)?;
    let (table, curve) = train(&inst.env, &inst.aut, &inst.reward, &inst.params, inst.mode, seed)?;
    std::fs::write(dir.join("qtable.json"), table.to_sorted_json())?;
    export_curve(&curve, &dir.join("curve.csv"))?;
    std::fs::write(dir.join("automaton.dot"), automata::dump(&inst.aut, "dot")?)?;
    println!(
        "trained {} episodes, {} table entries -> {}",
        inst.params.episodes,
        table.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_eval(common: &CommonArgs, seed: u64, n: usize, deterministic: bool) -> Result<()> {
    let mut inst = load_instance(&common.config, common.strict_revisit)?;
    if deterministic {
        inst.env.grid.deterministic = true;
    }
    let dir = out_dir(common, &inst.hash, seed);
    let table_path = dir.join("qtable.json");
    let text = std::fs::read_to_string(&table_path).with_context(|| {
        format!(
            "no trained table at {} (config hash mismatch, or train has not run)",
            table_path.display()
        )
    })?;
    let table = QTable::<f64>::from_json(&text)?;
    if table.n_actions != inst.env.grid.actions.len() {
        bail!(
            "table has {} actions but the map has {}",
            table.n_actions,
            inst.env.grid.actions.len()
        );
    }
    let (report, traces) = success_rate(
        &inst.env,
        &inst.aut,
        &Policy::Greedy(&table),
        &inst.reward,
        inst.params.horizon,
        inst.mode,
        inst.params.window,
        n,
        seed,
    )?;
    export_report(&report, &dir.join("report.json"))?;
    export_traces(&traces, &inst.hash, &dir.join("traces.jsonl"))?;
    println!(
        "success_rate {:.3} over {} episodes (wilson [{:.3}, {:.3}]) -> {}",
        report.success_rate,
        n,
        report.wilson_low,
        report.wilson_high,
        dir.display()
    );
    Ok(())
}

fn cmd_dump_product(common: &CommonArgs, out: Option<&Path>) -> Result<()> {
    let inst = load_instance(&common.config, common.strict_revisit)?;
    let bound = automata::max_finite_bound(&inst.aut).map(|b| b + 2).unwrap_or(2).max(
        inst.aut
            .intervals
            .iter()
            .map(|iv| iv.lower() + 1)
            .max()
            .unwrap_or(1),
    );
    let product = enumerate_product(&inst.env, &inst.aut, &inst.reward, bound)?;
    let json = product.to_json();
    match out {
        Some(path) => {
            std::fs::write(path, &json)?;
            println!("{} product states -> {}", product.states.len(), path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Check { formula, word, dump_ast, strict_revisit } => {
            cmd_check(formula, word, *dump_ast, *strict_revisit)
        }
        Command::Automaton { common, dump_ast } => cmd_automaton(common, *dump_ast),
        Command::Train { common, seed } => cmd_train(common, *seed),
        Command::Eval { common, seed, n, deterministic } => {
            cmd_eval(common, *seed, *n, *deterministic)
        }
        Command::DumpProduct { common, dump_product } => {
            cmd_dump_product(common, dump_product.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Parse and validation problems in user-supplied files are usage errors
    // (exit 2); anything surfacing after a valid instance is loaded is a
    // runtime failure (exit 1).
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let usage = err.to_string().contains("parsing")
                || err.to_string().contains("formula:")
                || err.to_string().contains("word:")
                || err.to_string().contains("reading");
            if usage {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
