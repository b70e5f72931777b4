//! Desk-scale analysis: value estimation, isolation probing, seeded random
//! instances and cross-construction sweeps.

use std::collections::BTreeSet;
use std::fmt;

use num::{BigRational, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::automaton::{display_word, Distribution, Letter, Pfa, PfaError, Word};
use crate::rational::{in_unit_interval, rat};
use crate::reduce::onecoin::OneCoinReduction;
use crate::reduce::thirds::ThirdsReduction;
use crate::reduce::value::ValueReduction;
use crate::syntactic::SyntacticDfa;

/// The best acceptance probability found among bounded-length words; a lower
/// bound on the automaton's value.
#[derive(Clone, Debug)]
pub struct ValueEstimate {
    pub best_word: Word,
    pub best_prob: BigRational,
    pub words_explored: usize,
    pub length_bound: usize,
}

impl fmt::Display for ValueEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "best {} at {} ({} words, length ≤ {})",
            self.best_prob,
            display_word(&self.best_word),
            self.words_explored,
            self.length_bound
        )
    }
}

/// The smallest observed distance between an acceptance probability and a
/// target `lambda`. A semi-test: isolation itself is undecidable, so this
/// only ever reports what bounded exploration found.
#[derive(Clone, Debug)]
pub struct IsolationReport {
    pub lambda: BigRational,
    pub min_gap: BigRational,
    pub witness: Word,
    pub words_explored: usize,
    pub length_bound: usize,
}

impl fmt::Display for IsolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "min gap to {} is {} at {} ({} words, length ≤ {})",
            self.lambda,
            self.min_gap,
            display_word(&self.witness),
            self.words_explored,
            self.length_bound
        )
    }
}

/// Breadth-first exploration of all words up to `max_len`, memoized on the
/// exact reached distribution (and checker state, when restricted): two
/// prefixes that induce the same distribution share their continuations.
/// Visits every explored word in shortest-first, then lexicographic order.
fn explore(
    p: &Pfa,
    max_len: usize,
    restrict_to: Option<&SyntacticDfa>,
    mut visit: impl FnMut(&Word, &BigRational),
) -> Result<usize, PfaError> {
    let live = restrict_to.map(|dfa| dfa.can_reach_accepting());
    let dfa_start = restrict_to.map(|dfa| dfa.start).unwrap_or(0);

    let mut explored = 0usize;
    let mut consider = |word: &Word, dfa_state: usize, dist: &Distribution| {
        explored += 1;
        let in_language = match restrict_to {
            Some(dfa) => dfa.accepting.contains(&dfa_state),
            None => true,
        };
        if in_language {
            visit(word, &dist.mass_on(&p.accepting));
        }
    };

    let start = (dfa_start, p.initial_dirac());
    let mut seen: BTreeSet<(usize, Distribution)> = BTreeSet::new();
    consider(&Vec::new(), start.0, &start.1);
    seen.insert(start.clone());
    let mut frontier: Vec<(usize, Distribution, Word)> = vec![(start.0, start.1, Vec::new())];

    for _ in 0..max_len {
        let mut next = Vec::new();
        for (dfa_state, dist, word) in &frontier {
            for letter in &p.alphabet {
                let next_dfa = match restrict_to {
                    Some(dfa) => {
                        let s = dfa.step(*dfa_state, letter);
                        if !live.as_ref().expect("restricted")[s] {
                            continue;
                        }
                        s
                    }
                    None => 0,
                };
                let next_dist = p.step(dist, letter)?;
                let mut next_word = word.clone();
                next_word.push(letter.clone());
                consider(&next_word, next_dfa, &next_dist);
                if seen.insert((next_dfa, next_dist.clone())) {
                    next.push((next_dfa, next_dist, next_word));
                }
            }
        }
        frontier = next;
    }
    Ok(explored)
}

/// Exhaustive lower bound on the value over words of length at most
/// `max_len`, optionally restricted to the language of a checker DFA.
/// Ties break toward the shortest, then lexicographically first word.
pub fn estimate_value(
    p: &Pfa,
    max_len: usize,
    restrict_to: Option<&SyntacticDfa>,
) -> Result<ValueEstimate, PfaError> {
    let mut best: Option<(BigRational, Word)> = None;
    let explored = explore(p, max_len, restrict_to, |word, prob| {
        let better = match &best {
            Some((b, _)) => prob > b,
            None => true,
        };
        if better {
            best = Some((prob.clone(), word.clone()));
        }
    })?;
    let (best_prob, best_word) = best.unwrap_or((BigRational::zero(), Vec::new()));
    Ok(ValueEstimate {
        best_word,
        best_prob,
        words_explored: explored,
        length_bound: max_len,
    })
}

/// Reports the smallest observed gap `|accept(w) − lambda|` over words of
/// length at most `max_len`.
pub fn isolation_probe(
    p: &Pfa,
    lambda: &BigRational,
    max_len: usize,
) -> Result<IsolationReport, PfaError> {
    if !in_unit_interval(lambda) {
        return Err(PfaError::LambdaOutOfRange(lambda.to_string()));
    }
    let mut best: Option<(BigRational, Word)> = None;
    let explored = explore(p, max_len, None, |word, prob| {
        let gap = (prob - lambda).abs();
        let better = match &best {
            Some((b, _)) => gap < *b,
            None => true,
        };
        if better {
            best = Some((gap, word.clone()));
        }
    })?;
    let (min_gap, witness) = best.expect("the empty word is always explored");
    Ok(IsolationReport {
        lambda: lambda.clone(),
        min_gap,
        witness,
        words_explored: explored,
        length_bound: max_len,
    })
}

fn letter_name(i: usize) -> String {
    if i < 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("a{i}")
    }
}

fn random_pfa(
    states: usize,
    letters: usize,
    seed: u64,
    split_weights: (BigRational, BigRational),
) -> Pfa {
    assert!(states >= 1 && letters >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..states).map(|i| format!("q{i}")).collect();
    let alphabet: Vec<Letter> = (0..letters).map(|i| Letter::src(letter_name(i))).collect();
    let mut p = Pfa::new(names, alphabet, 0);
    let mut any_split = false;
    for li in 0..letters {
        for s in 0..states {
            if states >= 2 && rng.gen_bool(0.5) {
                let t0 = rng.gen_range(0..states);
                let mut t1 = rng.gen_range(0..states - 1);
                if t1 >= t0 {
                    t1 += 1;
                }
                p.matrices[li].set_row(
                    s,
                    vec![(t0, split_weights.0.clone()), (t1, split_weights.1.clone())],
                );
                any_split = true;
            } else {
                p.matrices[li].set_row_det(s, rng.gen_range(0..states));
            }
        }
    }
    // Keep at least one probabilistic row so reductions are exercised.
    if states >= 2 && !any_split {
        let li = rng.gen_range(0..letters);
        let s = rng.gen_range(0..states);
        p.matrices[li].set_row(s, vec![(0, split_weights.0.clone()), (1, split_weights.1.clone())]);
    }
    p.initial = rng.gen_range(0..states);
    for s in 0..states {
        if rng.gen_bool(0.5) {
            p.accepting.insert(s);
        }
    }
    p
}

/// A seeded random simple PFA: every row is deterministic or a fair split
/// over two distinct states. Bit-for-bit reproducible per seed.
pub fn random_simple_pfa(states: usize, letters: usize, seed: u64) -> Pfa {
    random_pfa(states, letters, seed, (rat(1, 2), rat(1, 2)))
}

/// A seeded random thirds-form PFA: every row is deterministic or a 1/3–2/3
/// split over two distinct states.
pub fn random_thirds_pfa(states: usize, letters: usize, seed: u64) -> Pfa {
    random_pfa(states, letters, seed, (rat(1, 3), rat(2, 3)))
}

/// A seeded random exact distribution over `n` states with small rational
/// entries.
pub fn random_distribution(n: usize, seed: u64) -> Distribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let raw: Vec<BigRational> = (0..n)
            .map(|_| BigRational::from_integer(rng.gen_range(0..100u32).into()))
            .collect();
        let total: BigRational = raw.iter().sum();
        if total.is_zero() {
            continue;
        }
        let mass = raw.into_iter().map(|m| m / &total).collect();
        return Distribution::from_masses(mass).expect("normalized by construction");
    }
}

/// Settings for [`equivalence_sweep`]. `new` picks bounds that keep a
/// 50-trial sweep well under a minute; the word-length and sharp/finish
/// budgets of the heavier phases can be raised individually.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub trials: u32,
    pub max_states: usize,
    pub max_letters: usize,
    /// Word length bound for the one-coin equivalence phase.
    pub max_len: usize,
    pub seed: u64,
    pub thirds_word_len: usize,
    pub thirds_p_max: usize,
    pub value_word_len: usize,
    pub value_p_max: usize,
}

impl SweepConfig {
    pub fn new(trials: u32, max_states: usize, max_letters: usize, max_len: usize, seed: u64) -> Self {
        SweepConfig {
            trials,
            max_states,
            max_letters,
            max_len,
            seed,
            thirds_word_len: max_len.min(2),
            thirds_p_max: 6,
            value_word_len: max_len.min(1),
            value_p_max: 3,
        }
    }
}

/// One failed check inside a sweep.
#[derive(Clone, Debug)]
pub struct SweepFailure {
    pub trial: u32,
    pub seed: u64,
    pub phase: String,
    pub detail: String,
}

/// Aggregated outcome of a randomized cross-construction sweep.
#[derive(Clone, Debug)]
pub struct SweepReport {
    pub trials: u32,
    pub failures: Vec<SweepFailure>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "{} trials passed", self.trials)
        } else {
            writeln!(f, "{} failures in {} trials:", self.failures.len(), self.trials)?;
            for failure in &self.failures {
                writeln!(
                    f,
                    "  trial {} (seed {}) {}: {}",
                    failure.trial, failure.seed, failure.phase, failure.detail
                )?;
            }
            Ok(())
        }
    }
}

/// For each seeded random simple instance: builds the one-coin reduction and
/// verifies the exact equivalence on all words up to `max_len`; builds the
/// thirds reduction and verifies convergence; chains the thirds target into
/// the value-preserving reduction and verifies the recycling law.
pub fn equivalence_sweep(config: &SweepConfig) -> SweepReport {
    let mut meta = ChaCha8Rng::seed_from_u64(config.seed);
    let mut failures = Vec::new();
    for trial in 0..config.trials {
        let states = meta.gen_range(1..=config.max_states);
        let letters = meta.gen_range(1..=config.max_letters);
        let instance_seed = meta.gen::<u64>();
        let instance = random_simple_pfa(states, letters, instance_seed);
        let fail = |phase: &str, detail: String, failures: &mut Vec<SweepFailure>| {
            failures.push(SweepFailure {
                trial,
                seed: instance_seed,
                phase: phase.to_string(),
                detail,
            });
        };

        // One coin: exact equivalence on all bounded words.
        match OneCoinReduction::build(&instance) {
            Ok(reduction) => {
                if reduction.target.prob_transitions().len() != 1 {
                    fail(
                        "one-coin",
                        "target does not have exactly one probabilistic transition".into(),
                        &mut failures,
                    );
                }
                if !reduction.target.is_simple() {
                    fail("one-coin", "target is not simple".into(), &mut failures);
                }
                match reduction.verify(config.max_len) {
                    Ok(report) if report.verified() => {}
                    Ok(report) => fail("one-coin", report.to_string(), &mut failures),
                    Err(e) => fail("one-coin", e.to_string(), &mut failures),
                }
            }
            Err(e) => fail("one-coin", e.to_string(), &mut failures),
        }

        // Thirds: monotone convergence from below on all bounded words.
        let thirds = match ThirdsReduction::build(&instance) {
            Ok(thirds) => {
                if !thirds.target.is_thirds() {
                    fail("thirds", "target is not in thirds form".into(), &mut failures);
                }
                for word in instance.words_up_to(config.thirds_word_len) {
                    match thirds.verify(&word, config.thirds_p_max) {
                        Ok(report) if report.verified() => {}
                        Ok(report) => fail("thirds", report.to_string(), &mut failures),
                        Err(e) => fail("thirds", e.to_string(), &mut failures),
                    }
                }
                Some(thirds)
            }
            Err(e) => {
                fail("thirds", e.to_string(), &mut failures);
                None
            }
        };

        // Value: recycling law over the thirds target.
        if let Some(thirds) = thirds {
            match ValueReduction::build(&thirds.target) {
                Ok(value) => {
                    for word in thirds.target.words_up_to(config.value_word_len) {
                        match value.verify(&word, config.value_p_max) {
                            Ok(report) if report.verified() => {}
                            Ok(report) => fail("value", report.to_string(), &mut failures),
                            Err(e) => fail("value", e.to_string(), &mut failures),
                        }
                    }
                }
                Err(e) => fail("value", e.to_string(), &mut failures),
            }
        }
    }
    SweepReport {
        trials: config.trials,
        failures,
    }
}
