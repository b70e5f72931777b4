//! One-coin simulation: any simple PFA is simulated by a simple PFA with a
//! single probabilistic transition, exactly, on the image of a letter-wise
//! morphism.
//!
//! Each source letter `a` is encoded as a sweep over all states
//! `check[a,q0]·star·apply[a,q0] ⋯ check[a,q_{n-1}]·star·apply[a,q_{n-1}]·merge`:
//! `check[a,q]` moves the thread sitting on `q` to the shared coin state
//! `s_star`, `star` flips the one coin, `apply[a,q]` routes the two outcomes
//! to barred copies of the targets of `M_a(q)`, and `merge` flushes the
//! barred copies back onto the originals. Off-image words are *not*
//! rejected — the automaton forgets which state was checked while it sits on
//! `s_star` — which is exactly what [`OneCoinReduction::image_escape_witness`]
//! demonstrates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{BigRational, One, Zero};

use crate::automaton::{display_word, Distribution, Letter, Pfa, PfaError, StateId, Word};
use crate::morphism::Morphism;
use crate::rational::rat;
use crate::reduce::fresh_name;
use crate::syntactic::SyntacticDfa;

/// The shape of a validated simple row: deterministic, or a fair split over
/// two distinct states.
pub(crate) enum SimpleRow {
    Det(StateId),
    Split(StateId, StateId),
}

pub(crate) fn classify_simple_row(
    p: &Pfa,
    letter_index: usize,
    state: StateId,
) -> Result<SimpleRow, PfaError> {
    let row = p.matrices[letter_index].row(state);
    let half = rat(1, 2);
    match row {
        [(t, p)] if p.is_one() => Ok(SimpleRow::Det(*t)),
        [(t0, p0), (t1, p1)] if *p0 == half && *p1 == half => Ok(SimpleRow::Split(*t0, *t1)),
        _ => Err(PfaError::NotSimple {
            letter: p.alphabet[letter_index].token(),
            state: p.states[state].clone(),
            value: row
                .first()
                .map(|(_, v)| v.to_string())
                .unwrap_or_else(|| BigRational::zero().to_string()),
        }),
    }
}

/// A simple PFA together with its one-coin simulator and the encoding
/// morphism.
#[derive(Clone, Debug)]
pub struct OneCoinReduction {
    pub source: Pfa,
    pub target: Pfa,
    pub morphism: Morphism,
    /// Target id of each source state.
    pub orig: Vec<StateId>,
    /// Target id of each barred copy.
    pub barred: Vec<StateId>,
    pub s_star: StateId,
    pub s0: StateId,
    pub s1: StateId,
}

impl OneCoinReduction {
    /// Builds the one-coin simulator of a valid simple PFA.
    pub fn build(source: &Pfa) -> Result<Self, PfaError> {
        if let Some(v) = source.validate().first() {
            return Err(PfaError::Invalid(v.to_string()));
        }
        source.require_simple()?;
        let n = source.n_states();

        let mut taken = BTreeSet::new();
        let mut states = Vec::new();
        let orig: Vec<StateId> = source
            .states
            .iter()
            .map(|name| {
                states.push(fresh_name(name, &mut taken));
                states.len() - 1
            })
            .collect();
        let barred: Vec<StateId> = source
            .states
            .iter()
            .map(|name| {
                states.push(fresh_name(&format!("bar[{name}]"), &mut taken));
                states.len() - 1
            })
            .collect();
        let s_star = states.len();
        states.push(fresh_name("s_star", &mut taken));
        let s0 = states.len();
        states.push(fresh_name("s0", &mut taken));
        let s1 = states.len();
        states.push(fresh_name("s1", &mut taken));

        let mut alphabet = Vec::new();
        for a in &source.alphabet {
            for q in &source.states {
                alphabet.push(Letter::check(a.clone(), q.clone()));
                alphabet.push(Letter::apply(a.clone(), q.clone()));
            }
        }
        alphabet.push(Letter::Star);
        alphabet.push(Letter::Merge);

        let mut target = Pfa::new(states, alphabet, orig[source.initial]);
        target.accepting = source.accepting.iter().map(|&f| orig[f]).collect();

        for (ai, a) in source.alphabet.iter().enumerate() {
            for (qi, qname) in source.states.iter().enumerate() {
                let check = Letter::check(a.clone(), qname.clone());
                target.matrix_mut(&check)?.set_row_det(orig[qi], s_star);

                let apply = Letter::apply(a.clone(), qname.clone());
                let (to0, to1) = match classify_simple_row(source, ai, qi)? {
                    SimpleRow::Det(r) => (barred[r], barred[r]),
                    SimpleRow::Split(r0, r1) => (barred[r0], barred[r1]),
                };
                let apply_matrix = target.matrix_mut(&apply)?;
                apply_matrix.set_row_det(s0, to0);
                apply_matrix.set_row_det(s1, to1);
            }
        }
        target
            .matrix_mut(&Letter::Star)?
            .set_row(s_star, vec![(s0, rat(1, 2)), (s1, rat(1, 2))]);
        let merge_matrix = target.matrix_mut(&Letter::Merge)?;
        for qi in 0..n {
            merge_matrix.set_row_det(barred[qi], orig[qi]);
        }

        let mut images = BTreeMap::new();
        for a in &source.alphabet {
            let mut image = Vec::with_capacity(3 * n + 1);
            for q in &source.states {
                image.push(Letter::check(a.clone(), q.clone()));
                image.push(Letter::Star);
                image.push(Letter::apply(a.clone(), q.clone()));
            }
            image.push(Letter::Merge);
            images.insert(a.clone(), image);
        }

        Ok(OneCoinReduction {
            source: source.clone(),
            target,
            morphism: Morphism::new(images),
            orig,
            barred,
            s_star,
            s0,
            s1,
        })
    }

    /// Encodes a source word into the target alphabet.
    pub fn encode(&self, word: &[Letter]) -> Result<Word, PfaError> {
        self.morphism.encode(word)
    }

    /// Checks `accept(source, w) = accept(target, encode(w))` exactly for
    /// every source word of length up to `max_len`.
    pub fn verify(&self, max_len: usize) -> Result<OneCoinReport, PfaError> {
        let words = self.source.words_up_to(max_len);
        let mut counterexamples = Vec::new();
        for word in &words {
            let source_prob = self.source.accept_prob(word)?;
            let target_prob = self.target.accept_prob(&self.encode(word)?)?;
            if source_prob != target_prob {
                counterexamples.push(OneCoinCounterexample {
                    word: word.clone(),
                    source_prob,
                    target_prob,
                });
            }
        }
        Ok(OneCoinReport {
            words_checked: words.len(),
            max_len,
            counterexamples,
        })
    }

    /// A complete DFA for the image language `{encode(w) | w}`.
    pub fn image_dfa(&self) -> SyntacticDfa {
        let blocks: Vec<Word> = self
            .source
            .alphabet
            .iter()
            .map(|a| self.morphism.image(a).expect("image exists").clone())
            .collect();
        SyntacticDfa::block_star(self.target.alphabet.clone(), &blocks)
    }

    /// Produces a word outside the image language that the target still
    /// processes with positive mass through the coin state: a `check[a,q]`
    /// answered by a mismatched `apply[a,q']`. Returns `None` for sources
    /// with fewer than two states, where no mismatch is constructible.
    pub fn image_escape_witness(&self) -> Option<EscapeWitness> {
        let n = self.source.n_states();
        if n < 2 {
            return None;
        }
        let a = self.source.alphabet.first()?.clone();
        let checked = self.source.initial;
        let mismatched = (0..n).find(|&q| q != checked)?;
        let word = vec![
            Letter::check(a.clone(), self.source.states[checked].clone()),
            Letter::Star,
            Letter::apply(a, self.source.states[mismatched].clone()),
            Letter::Merge,
        ];
        let after_check = self
            .target
            .run(&self.target.initial_dirac(), &word[..1])
            .expect("letters are in the target alphabet");
        let star_mass = after_check.get(self.s_star).clone();
        let acceptance = self.target.accept_prob(&word).expect("valid word");
        Some(EscapeWitness {
            word,
            star_mass,
            acceptance,
        })
    }

    /// Lifts a distribution over source states onto the target's original
    /// states.
    pub fn lift(&self, dist: &Distribution) -> Distribution {
        let mut mass = vec![BigRational::zero(); self.target.n_states()];
        for (s, m) in dist.support() {
            mass[self.orig[s]] = m.clone();
        }
        Distribution::from_masses(mass).expect("lift preserves total mass")
    }
}

/// Outcome of a bounded exhaustive equivalence check.
#[derive(Clone, Debug)]
pub struct OneCoinReport {
    pub words_checked: usize,
    pub max_len: usize,
    pub counterexamples: Vec<OneCoinCounterexample>,
}

#[derive(Clone, Debug)]
pub struct OneCoinCounterexample {
    pub word: Word,
    pub source_prob: BigRational,
    pub target_prob: BigRational,
}

impl OneCoinReport {
    pub fn verified(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

impl fmt::Display for OneCoinReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.verified() {
            write!(
                f,
                "verified, {} words (length ≤ {})",
                self.words_checked, self.max_len
            )
        } else {
            writeln!(
                f,
                "{} counterexamples among {} words:",
                self.counterexamples.len(),
                self.words_checked
            )?;
            for c in &self.counterexamples {
                writeln!(
                    f,
                    "  {}: source {} ≠ target {}",
                    display_word(&c.word),
                    c.source_prob,
                    c.target_prob
                )?;
            }
            Ok(())
        }
    }
}

/// A word outside the image language together with the evidence that the
/// target still processes it through the coin.
#[derive(Clone, Debug)]
pub struct EscapeWitness {
    pub word: Word,
    /// Mass sitting on `s_star` when the coin is about to flip.
    pub star_mass: BigRational,
    /// Exact acceptance probability of the witness.
    pub acceptance: BigRational,
}

impl fmt::Display for EscapeWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "off-image word {} flips the coin with mass {} (acceptance {})",
            display_word(&self.word),
            self.star_mass,
            self.acceptance
        )
    }
}
