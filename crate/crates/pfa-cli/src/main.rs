//! `pfa` — exact probabilistic-automaton toolkit on the command line.
//!
//! Exit codes: 0 on success or a verified property, 1 when a counterexample
//! or validation violation was found, 2 on usage or parse errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num::{BigRational, One};

use pfa::analysis::{equivalence_sweep, estimate_value, isolation_probe, SweepConfig};
use pfa::dot::render_thread_tree;
use pfa::format::{parse, parse_word, serialize};
use pfa::rational::{decimal, parse_rational};
use pfa::reduce::onecoin::OneCoinReduction;
use pfa::reduce::thirds::ThirdsReduction;
use pfa::reduce::value::ValueReduction;
use pfa::{display_word, Letter, Pfa, Word};

#[derive(Parser)]
#[command(
    name = "pfa",
    version,
    about = "Simple probabilistic finite automata: exact acceptance, one-coin reductions, verification",
    after_help = "Words are dot-separated letter tokens (empty string = empty word).\n\
                  Automaton files:\n\
                  \n\
                  \tpfa\n\
                  \tstates: q0 q1\n\
                  \talphabet: a b\n\
                  \tinitial: q0\n\
                  \taccepting: q1\n\
                  \ttrans a q0 -> 1/2 q0, 1/2 q1\n\
                  \n\
                  Probabilities are N/D or integers; unlisted rows are identity self-loops.\n\
                  Gadget letters: check[a,q] apply[a,q] star merge finish sharp."
)]
struct Cli {
    /// Output format: human text or key=value lines.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Kv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// One probabilistic transition, exact equivalence on image words.
    OneCoin,
    /// Probabilities {0, 1/3, 2/3, 1}, convergence under sharp schedules.
    Thirds,
    /// One probabilistic transition, value preserved at 1 (thirds-normalizes
    /// simple inputs first).
    Value,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural invariants of an automaton file.
    Validate { file: PathBuf },
    /// Exact acceptance probability of a word.
    Accept {
        file: PathBuf,
        #[arg(long)]
        word: String,
    },
    /// Exhaustive lower bound on the value over bounded-length words.
    Value {
        file: PathBuf,
        #[arg(long)]
        max_len: usize,
        /// Search the one-coin reduction restricted to its image language
        /// (max-len counts source letters).
        #[arg(long)]
        restrict_image: bool,
    },
    /// Smallest observed gap between acceptance probabilities and lambda.
    Isolate {
        file: PathBuf,
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        max_len: usize,
    },
    /// Build a reduction and emit the target automaton.
    Reduce {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Write the target document here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Threshold for value mode; only 1 is supported.
        #[arg(long)]
        lambda: Option<String>,
    },
    /// Encode a source word through a reduction's morphism.
    Encode {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        word: String,
        /// Sharps per letter (thirds mode only).
        #[arg(long)]
        p: Option<usize>,
    },
    /// Mechanically verify a reduction on all bounded-length words.
    Verify {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        max_len: usize,
        /// Schedule bound for thirds (sharp rounds) and value (finish blocks).
        #[arg(long)]
        p_max: Option<usize>,
    },
    /// Run all three reductions over seeded random instances.
    Sweep {
        #[arg(long)]
        trials: u32,
        #[arg(long)]
        states: usize,
        #[arg(long)]
        letters: usize,
        #[arg(long)]
        max_len: usize,
        #[arg(long)]
        seed: u64,
    },
    /// DOT export of the thread tree of a computation.
    Dot {
        file: PathBuf,
        #[arg(long)]
        word: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(file: &PathBuf) -> Result<Pfa> {
    let text = fs::read_to_string(file)
        .with_context(|| format!("cannot read {}", file.display()))?;
    let p = parse(&text).with_context(|| format!("{}", file.display()))?;
    Ok(p)
}

fn word_arg(text: &str) -> Result<Word> {
    parse_word(text).map_err(|m| anyhow::anyhow!("invalid word: {m}"))
}

fn lambda_arg(text: &str) -> Result<BigRational> {
    parse_rational(text).map_err(|m| anyhow::anyhow!("invalid lambda: {m}"))
}

/// Thirds-normalizes simple inputs, then builds the value reduction.
fn value_pipeline(p: &Pfa) -> Result<ValueReduction> {
    let reduction = if p.is_thirds() {
        ValueReduction::build(p)?
    } else {
        let thirds = ThirdsReduction::build(p)
            .context("value mode needs a simple or thirds-form automaton")?;
        ValueReduction::build(&thirds.target)?
    };
    Ok(reduction)
}

fn kv(word: &[Letter]) -> String {
    word.iter()
        .map(Letter::token)
        .collect::<Vec<_>>()
        .join(".")
}

fn run(cli: Cli) -> Result<ExitCode> {
    let format = cli.format;
    match cli.command {
        Command::Validate { file } => {
            let p = load(&file)?;
            let violations = p.validate();
            match format {
                Format::Text => {
                    if violations.is_empty() {
                        println!("ok: {} states, {} letters", p.n_states(), p.alphabet.len());
                    } else {
                        for v in &violations {
                            println!("violation: {v}");
                        }
                    }
                }
                Format::Kv => {
                    println!("ok={}", violations.is_empty());
                    println!("violations={}", violations.len());
                    for (i, v) in violations.iter().enumerate() {
                        println!("violation.{i}={v}");
                    }
                }
            }
            Ok(exit_flag(violations.is_empty()))
        }
        Command::Accept { file, word } => {
            let p = load(&file)?;
            let w = word_arg(&word)?;
            let prob = p.accept_prob(&w)?;
            match format {
                Format::Text => println!("Pr({}) = {} ≈ {}", display_word(&w), prob, decimal(&prob, 6)),
                Format::Kv => {
                    println!("word={}", kv(&w));
                    println!("prob={prob}");
                    println!("decimal={}", decimal(&prob, 6));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Value {
            file,
            max_len,
            restrict_image,
        } => {
            let p = load(&file)?;
            let estimate = if restrict_image {
                let reduction = OneCoinReduction::build(&p)?;
                let dfa = reduction.image_dfa();
                let block = 3 * p.n_states() + 1;
                estimate_value(&reduction.target, max_len * block, Some(&dfa))?
            } else {
                estimate_value(&p, max_len, None)?
            };
            match format {
                Format::Text => println!(
                    "{estimate} ≈ {}",
                    decimal(&estimate.best_prob, 6)
                ),
                Format::Kv => {
                    println!("best_word={}", kv(&estimate.best_word));
                    println!("best_prob={}", estimate.best_prob);
                    println!("decimal={}", decimal(&estimate.best_prob, 6));
                    println!("words_explored={}", estimate.words_explored);
                    println!("length_bound={}", estimate.length_bound);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Isolate {
            file,
            lambda,
            max_len,
        } => {
            let p = load(&file)?;
            let lambda = lambda_arg(&lambda)?;
            let report = isolation_probe(&p, &lambda, max_len)?;
            match format {
                Format::Text => println!("{report} ≈ {}", decimal(&report.min_gap, 6)),
                Format::Kv => {
                    println!("lambda={}", report.lambda);
                    println!("min_gap={}", report.min_gap);
                    println!("decimal={}", decimal(&report.min_gap, 6));
                    println!("witness={}", kv(&report.witness));
                    println!("words_explored={}", report.words_explored);
                    println!("length_bound={}", report.length_bound);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Reduce {
            file,
            mode,
            out,
            lambda,
        } => {
            let p = load(&file)?;
            if let Some(lambda) = &lambda {
                let lambda = lambda_arg(lambda)?;
                if !(mode == Mode::Value && lambda.is_one()) {
                    bail!(
                        "lambda = {lambda} is not supported: only the lambda = 1 \
                         value construction is implemented"
                    );
                }
            }
            let target = match mode {
                Mode::OneCoin => OneCoinReduction::build(&p)?.target,
                Mode::Thirds => ThirdsReduction::build(&p)?.target,
                Mode::Value => value_pipeline(&p)?.target,
            };
            let doc = serialize(&target);
            match out {
                Some(path) => {
                    fs::write(&path, &doc)
                        .with_context(|| format!("cannot write {}", path.display()))?;
                    match format {
                        Format::Text => println!(
                            "wrote {}: {} states, {} letters, {} probabilistic transitions",
                            path.display(),
                            target.n_states(),
                            target.alphabet.len(),
                            target.prob_transitions().len()
                        ),
                        Format::Kv => {
                            println!("out={}", path.display());
                            println!("states={}", target.n_states());
                            println!("letters={}", target.alphabet.len());
                            println!("prob_transitions={}", target.prob_transitions().len());
                        }
                    }
                }
                None => print!("{doc}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Encode { file, mode, word, p } => {
            let automaton = load(&file)?;
            let w = word_arg(&word)?;
            let encoded = match mode {
                Mode::OneCoin => OneCoinReduction::build(&automaton)?.encode(&w)?,
                Mode::Thirds => ThirdsReduction::build(&automaton)?.encode(&w, p.unwrap_or(1))?,
                Mode::Value => value_pipeline(&automaton)?.encode(&w)?,
            };
            match format {
                Format::Text => println!("{}", display_word(&encoded)),
                Format::Kv => println!("encoded={}", kv(&encoded)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            file,
            mode,
            max_len,
            p_max,
        } => {
            let p = load(&file)?;
            let (verified, words_checked, failures) = match mode {
                Mode::OneCoin => {
                    let reduction = OneCoinReduction::build(&p)?;
                    let report = reduction.verify(max_len)?;
                    let failures: Vec<String> = report
                        .counterexamples
                        .iter()
                        .map(|c| {
                            format!(
                                "{}: source {} ≠ target {}",
                                display_word(&c.word),
                                c.source_prob,
                                c.target_prob
                            )
                        })
                        .collect();
                    (report.verified(), report.words_checked, failures)
                }
                Mode::Thirds => {
                    let reduction = ThirdsReduction::build(&p)?;
                    let p_max = p_max.unwrap_or(8);
                    let mut failures = Vec::new();
                    let words = p.words_up_to(max_len);
                    for word in &words {
                        let report = reduction.verify(word, p_max)?;
                        if !report.verified() {
                            failures.push(report.to_string());
                        }
                    }
                    (failures.is_empty(), words.len(), failures)
                }
                Mode::Value => {
                    let reduction = value_pipeline(&p)?;
                    let p_max = p_max.unwrap_or(5);
                    let mut failures = Vec::new();
                    let words = reduction.source.words_up_to(max_len);
                    for word in &words {
                        let report = reduction.verify(word, p_max)?;
                        if !report.verified() {
                            failures.push(report.to_string());
                        }
                    }
                    (failures.is_empty(), words.len(), failures)
                }
            };
            match format {
                Format::Text => {
                    if verified {
                        println!("verified, {words_checked} words");
                    } else {
                        for failure in &failures {
                            println!("counterexample: {failure}");
                        }
                    }
                }
                Format::Kv => {
                    println!("verified={verified}");
                    println!("words_checked={words_checked}");
                    for (i, failure) in failures.iter().enumerate() {
                        println!("counterexample.{i}={failure}");
                    }
                }
            }
            Ok(exit_flag(verified))
        }
        Command::Sweep {
            trials,
            states,
            letters,
            max_len,
            seed,
        } => {
            let report = equivalence_sweep(&SweepConfig::new(trials, states, letters, max_len, seed));
            match format {
                Format::Text => println!("{report}"),
                Format::Kv => {
                    println!("trials={}", report.trials);
                    println!("failures={}", report.failures.len());
                    for (i, failure) in report.failures.iter().enumerate() {
                        println!(
                            "failure.{i}=trial {} seed {} {}: {}",
                            failure.trial, failure.seed, failure.phase, failure.detail
                        );
                    }
                }
            }
            Ok(exit_flag(report.passed()))
        }
        Command::Dot { file, word } => {
            let p = load(&file)?;
            let w = word_arg(&word)?;
            print!("{}", render_thread_tree(&p, &w)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn exit_flag(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
