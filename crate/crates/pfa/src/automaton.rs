//! Probabilistic finite automata with exact rational semantics.
//!
//! A [`Pfa`] is a finite set of states, an alphabet, one row-stochastic
//! transition matrix per letter, an initial state and a set of accepting
//! states. Reading a word evolves a [`Distribution`] over states; the
//! acceptance probability of a word is the mass on accepting states after
//! reading it from the initial Dirac distribution.
//!
//! All arithmetic is exact ([`BigRational`]); matrices are stored sparsely
//! (one `(target, probability)` list per row) since reduced automata are
//! dominated by identity rows.

use std::collections::BTreeSet;
use std::fmt;

use num::{BigRational, One, Zero};
use thiserror::Error;

use crate::rational::in_unit_interval;

/// Index into an automaton's state list.
pub type StateId = usize;

/// A word over an automaton's alphabet.
pub type Word = Vec<Letter>;

/// An alphabet symbol: either a plain named letter or one of the structured
/// letters introduced by the reductions. Structured letters live in their own
/// namespace and never collide with plain names.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    /// Plain letter of a source alphabet.
    Src(String),
    /// `check[a,q]`: announce that the transition of `a` from state `q` is
    /// about to be simulated.
    Check(Box<Letter>, String),
    /// `apply[a,q]`: apply the transition of `a` from state `q` to the coin
    /// outcome.
    Apply(Box<Letter>, String),
    /// `star`: the shared coin.
    Star,
    /// `merge`: flush barred copies back onto the originals.
    Merge,
    /// `finish`: end a block, recycling waiting mass and auditing accepted
    /// threads.
    Finish,
    /// `sharp`: drive a thirds-form coin synthesizer.
    Sharp,
}

impl Letter {
    pub fn src(name: impl Into<String>) -> Self {
        Letter::Src(name.into())
    }

    pub fn check(inner: Letter, state: impl Into<String>) -> Self {
        Letter::Check(Box::new(inner), state.into())
    }

    pub fn apply(inner: Letter, state: impl Into<String>) -> Self {
        Letter::Apply(Box::new(inner), state.into())
    }

    /// Canonical token form, as used in automaton files and on the CLI.
    pub fn token(&self) -> String {
        match self {
            Letter::Src(name) => name.clone(),
            Letter::Check(inner, q) => format!("check[{},{}]", inner.token(), q),
            Letter::Apply(inner, q) => format!("apply[{},{}]", inner.token(), q),
            Letter::Star => "star".to_string(),
            Letter::Merge => "merge".to_string(),
            Letter::Finish => "finish".to_string(),
            Letter::Sharp => "sharp".to_string(),
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

/// Dot-separated rendering of a word; the empty word renders as `ε`.
pub fn display_word(word: &[Letter]) -> String {
    if word.is_empty() {
        "ε".to_string()
    } else {
        word.iter()
            .map(Letter::token)
            .collect::<Vec<_>>()
            .join(".")
    }
}

/// A probability distribution over the states of one automaton.
/// Entries are exact rationals summing to 1.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Distribution {
    mass: Vec<BigRational>,
}

impl Distribution {
    /// The Dirac distribution putting all mass on `state`.
    pub fn dirac(n_states: usize, state: StateId) -> Self {
        assert!(state < n_states, "dirac state out of range");
        let mut mass = vec![BigRational::zero(); n_states];
        mass[state] = BigRational::one();
        Distribution { mass }
    }

    /// Builds a distribution from explicit masses, checking that they are in
    /// `[0,1]` and sum to exactly 1.
    pub fn from_masses(mass: Vec<BigRational>) -> Result<Self, PfaError> {
        if mass.iter().any(|m| !in_unit_interval(m)) {
            return Err(PfaError::InvalidDistribution(
                "entry outside [0,1]".to_string(),
            ));
        }
        let total: BigRational = mass.iter().sum();
        if !total.is_one() {
            return Err(PfaError::InvalidDistribution(format!(
                "mass sums to {total}, not 1"
            )));
        }
        Ok(Distribution { mass })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn get(&self, state: StateId) -> &BigRational {
        &self.mass[state]
    }

    pub fn masses(&self) -> &[BigRational] {
        &self.mass
    }

    /// States carrying nonzero mass, in index order.
    pub fn support(&self) -> impl Iterator<Item = (StateId, &BigRational)> {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_zero())
    }

    /// Total mass on a set of states.
    pub fn mass_on(&self, targets: &BTreeSet<StateId>) -> BigRational {
        targets.iter().map(|&t| self.mass[t].clone()).sum()
    }

    pub fn total(&self) -> BigRational {
        self.mass.iter().sum()
    }
}

/// One transition matrix: a sparse row per state, each row a distribution
/// over target states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(StateId, BigRational)>>,
}

impl TransitionMatrix {
    /// Identity matrix: every state loops to itself.
    pub fn identity(n_states: usize) -> Self {
        TransitionMatrix {
            rows: (0..n_states)
                .map(|s| vec![(s, BigRational::one())])
                .collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    /// The row for `state`, sorted by target index; zero entries are absent.
    pub fn row(&self, state: StateId) -> &[(StateId, BigRational)] {
        &self.rows[state]
    }

    /// Replaces a row. Duplicate targets are summed, zero entries dropped.
    pub fn set_row(&mut self, state: StateId, entries: Vec<(StateId, BigRational)>) {
        let mut merged: Vec<(StateId, BigRational)> = Vec::new();
        let mut sorted = entries;
        sorted.sort_by_key(|(t, _)| *t);
        for (t, p) in sorted {
            if p.is_zero() {
                continue;
            }
            match merged.last_mut() {
                Some((last, mass)) if *last == t => *mass += p,
                _ => merged.push((t, p)),
            }
        }
        self.rows[state] = merged;
    }

    /// Deterministic row to a single target.
    pub fn set_row_det(&mut self, state: StateId, target: StateId) {
        self.rows[state] = vec![(target, BigRational::one())];
    }

    pub fn is_identity_row(&self, state: StateId) -> bool {
        matches!(&self.rows[state][..], [(t, p)] if *t == state && p.is_one())
    }

    /// Row sum (1 for a valid row).
    pub fn row_sum(&self, state: StateId) -> BigRational {
        self.rows[state].iter().map(|(_, p)| p.clone()).sum()
    }
}

/// A (state, letter) pair whose row has an entry strictly between 0 and 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbTransition {
    pub source: StateId,
    pub letter: Letter,
}

impl fmt::Display for ProbTransition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.source, self.letter)
    }
}

/// A violated structural invariant, produced by [`Pfa::validate`].
/// Violations are data, not failures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    RowSum {
        letter: Letter,
        state: String,
        sum: BigRational,
    },
    EntryRange {
        letter: Letter,
        state: String,
        target: String,
        value: BigRational,
    },
    TargetOutOfRange {
        letter: Letter,
        state: String,
        target: StateId,
    },
    MatrixShape {
        letter: Letter,
    },
    MatrixCount {
        matrices: usize,
        letters: usize,
    },
    InitialOutOfRange {
        initial: StateId,
    },
    AcceptingOutOfRange {
        state: StateId,
    },
    DuplicateState {
        name: String,
    },
    DuplicateLetter {
        letter: Letter,
    },
    NoStates,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { letter, state, sum } => {
                write!(f, "row sum ≠ 1: letter `{letter}` from `{state}` sums to {sum}")
            }
            Violation::EntryRange {
                letter,
                state,
                target,
                value,
            } => write!(
                f,
                "entry outside [0,1]: letter `{letter}` from `{state}` to `{target}` is {value}"
            ),
            Violation::TargetOutOfRange {
                letter,
                state,
                target,
            } => write!(
                f,
                "target state #{target} out of range: letter `{letter}` from `{state}`"
            ),
            Violation::MatrixShape { letter } => {
                write!(f, "matrix for `{letter}` has the wrong number of rows")
            }
            Violation::MatrixCount { matrices, letters } => {
                write!(f, "{matrices} matrices for {letters} letters")
            }
            Violation::InitialOutOfRange { initial } => {
                write!(f, "initial state #{initial} out of range")
            }
            Violation::AcceptingOutOfRange { state } => {
                write!(f, "accepting state #{state} out of range")
            }
            Violation::DuplicateState { name } => write!(f, "duplicate state name `{name}`"),
            Violation::DuplicateLetter { letter } => write!(f, "duplicate letter `{letter}`"),
            Violation::NoStates => write!(f, "automaton has no states"),
        }
    }
}

/// Errors raised by operations on automata.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum PfaError {
    #[error("letter `{0}` is not in the alphabet")]
    UnknownLetter(String),
    #[error("state `{0}` is unknown")]
    UnknownState(String),
    #[error("automaton is not simple: letter `{letter}` from `{state}` has entry {value}")]
    NotSimple {
        letter: String,
        state: String,
        value: String,
    },
    #[error("automaton is not in thirds form: letter `{letter}` from `{state}` has entry {value}")]
    NotThirds {
        letter: String,
        state: String,
        value: String,
    },
    #[error(
        "row for letter `{letter}` from `{state}` is neither deterministic nor a 1/3–2/3 split over two states"
    )]
    UnsupportedThirdsRow { letter: String, state: String },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("lambda {0} is outside [0,1]")]
    LambdaOutOfRange(String),
    #[error("lambda = {0} is not supported: only the lambda = 1 construction is implemented")]
    UnsupportedLambda(String),
    #[error("automaton fails validation: {0}")]
    Invalid(String),
}

/// A probabilistic finite automaton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pfa {
    /// State names, in declaration order. Indices into this list are the
    /// [`StateId`]s used everywhere else.
    pub states: Vec<String>,
    /// Alphabet, in declaration order.
    pub alphabet: Vec<Letter>,
    /// One matrix per alphabet letter, parallel to `alphabet`.
    pub matrices: Vec<TransitionMatrix>,
    pub initial: StateId,
    pub accepting: BTreeSet<StateId>,
}

impl Pfa {
    /// A new automaton where every letter acts as the identity.
    pub fn new(states: Vec<String>, alphabet: Vec<Letter>, initial: StateId) -> Self {
        let n = states.len();
        let matrices = alphabet.iter().map(|_| TransitionMatrix::identity(n)).collect();
        Pfa {
            states,
            alphabet,
            matrices,
            initial,
            accepting: BTreeSet::new(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name)
    }

    pub fn state_name(&self, state: StateId) -> &str {
        &self.states[state]
    }

    pub fn letter_index(&self, letter: &Letter) -> Option<usize> {
        self.alphabet.iter().position(|l| l == letter)
    }

    pub fn matrix(&self, letter: &Letter) -> Result<&TransitionMatrix, PfaError> {
        self.letter_index(letter)
            .map(|i| &self.matrices[i])
            .ok_or_else(|| PfaError::UnknownLetter(letter.token()))
    }

    pub fn matrix_mut(&mut self, letter: &Letter) -> Result<&mut TransitionMatrix, PfaError> {
        let i = self
            .letter_index(letter)
            .ok_or_else(|| PfaError::UnknownLetter(letter.token()))?;
        Ok(&mut self.matrices[i])
    }

    /// The Dirac distribution on the initial state.
    pub fn initial_dirac(&self) -> Distribution {
        Distribution::dirac(self.n_states(), self.initial)
    }

    /// Checks every structural invariant and returns one entry per violation.
    /// An empty list means the automaton is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.n_states();
        if n == 0 {
            out.push(Violation::NoStates);
        }
        let mut seen_states = BTreeSet::new();
        for name in &self.states {
            if !seen_states.insert(name.clone()) {
                out.push(Violation::DuplicateState { name: name.clone() });
            }
        }
        let mut seen_letters = BTreeSet::new();
        for letter in &self.alphabet {
            if !seen_letters.insert(letter.clone()) {
                out.push(Violation::DuplicateLetter {
                    letter: letter.clone(),
                });
            }
        }
        if self.matrices.len() != self.alphabet.len() {
            out.push(Violation::MatrixCount {
                matrices: self.matrices.len(),
                letters: self.alphabet.len(),
            });
        }
        for (letter, matrix) in self.alphabet.iter().zip(&self.matrices) {
            if matrix.n_states() != n {
                out.push(Violation::MatrixShape {
                    letter: letter.clone(),
                });
                continue;
            }
            for s in 0..n {
                let mut bad_target = false;
                for (t, p) in matrix.row(s) {
                    if *t >= n {
                        out.push(Violation::TargetOutOfRange {
                            letter: letter.clone(),
                            state: self.states[s].clone(),
                            target: *t,
                        });
                        bad_target = true;
                        continue;
                    }
                    if !in_unit_interval(p) {
                        out.push(Violation::EntryRange {
                            letter: letter.clone(),
                            state: self.states[s].clone(),
                            target: self.states[*t].clone(),
                            value: p.clone(),
                        });
                    }
                }
                if bad_target {
                    continue;
                }
                let sum = matrix.row_sum(s);
                if !sum.is_one() {
                    out.push(Violation::RowSum {
                        letter: letter.clone(),
                        state: self.states[s].clone(),
                        sum,
                    });
                }
            }
        }
        if self.initial >= n {
            out.push(Violation::InitialOutOfRange {
                initial: self.initial,
            });
        }
        for &f in &self.accepting {
            if f >= n {
                out.push(Violation::AcceptingOutOfRange { state: f });
            }
        }
        out
    }

    /// One step: the distribution after reading `letter` from `dist`.
    pub fn step(&self, dist: &Distribution, letter: &Letter) -> Result<Distribution, PfaError> {
        let matrix = self.matrix(letter)?;
        let mut mass = vec![BigRational::zero(); self.n_states()];
        for (s, m) in dist.support() {
            for (t, p) in matrix.row(s) {
                mass[*t] += m * p;
            }
        }
        Ok(Distribution { mass })
    }

    /// Left fold of [`Pfa::step`] over a word; the empty word is the identity.
    pub fn run(&self, dist: &Distribution, word: &[Letter]) -> Result<Distribution, PfaError> {
        let mut current = dist.clone();
        for letter in word {
            current = self.step(&current, letter)?;
        }
        Ok(current)
    }

    /// Probability of reaching `targets` from `state` by reading `word`.
    pub fn reach_prob(
        &self,
        state: StateId,
        word: &[Letter],
        targets: &BTreeSet<StateId>,
    ) -> Result<BigRational, PfaError> {
        let start = Distribution::dirac(self.n_states(), state);
        Ok(self.run(&start, word)?.mass_on(targets))
    }

    /// Acceptance probability of `word` from the initial state.
    pub fn accept_prob(&self, word: &[Letter]) -> Result<BigRational, PfaError> {
        self.reach_prob(self.initial, word, &self.accepting)
    }

    /// All (state, letter) couples with an entry strictly between 0 and 1,
    /// ordered by state index then letter token.
    pub fn prob_transitions(&self) -> Vec<ProbTransition> {
        let mut out = Vec::new();
        for (letter, matrix) in self.alphabet.iter().zip(&self.matrices) {
            for s in 0..matrix.n_states() {
                if matrix.row(s).iter().any(|(_, p)| !p.is_one()) {
                    out.push(ProbTransition {
                        source: s,
                        letter: letter.clone(),
                    });
                }
            }
        }
        out.sort_by(|a, b| {
            a.source
                .cmp(&b.source)
                .then_with(|| a.letter.token().cmp(&b.letter.token()))
        });
        out
    }

    /// First matrix entry outside `allowed`, as display strings
    /// `(letter, state, value)`.
    fn entries_within(&self, allowed: &[BigRational]) -> Result<(), Box<(String, String, String)>> {
        for (letter, matrix) in self.alphabet.iter().zip(&self.matrices) {
            for s in 0..matrix.n_states() {
                for (_, p) in matrix.row(s) {
                    if !allowed.contains(p) {
                        return Err(Box::new((
                            letter.token(),
                            self.states[s].clone(),
                            p.to_string(),
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// True iff every matrix entry is 0, 1/2 or 1.
    pub fn is_simple(&self) -> bool {
        self.entries_within(&[crate::rational::rat(1, 2), BigRational::one()])
            .is_ok()
    }

    /// True iff every matrix entry is 0, 1/3, 2/3 or 1.
    pub fn is_thirds(&self) -> bool {
        self.entries_within(&[
            crate::rational::rat(1, 3),
            crate::rational::rat(2, 3),
            BigRational::one(),
        ])
        .is_ok()
    }

    /// As [`Pfa::is_simple`], but reporting the first offending entry.
    pub fn require_simple(&self) -> Result<(), PfaError> {
        self.entries_within(&[crate::rational::rat(1, 2), BigRational::one()])
            .map_err(|found| {
                let (letter, state, value) = *found;
                PfaError::NotSimple {
                    letter,
                    state,
                    value,
                }
            })
    }

    /// As [`Pfa::is_thirds`], but reporting the first offending entry.
    pub fn require_thirds(&self) -> Result<(), PfaError> {
        self.entries_within(&[
            crate::rational::rat(1, 3),
            crate::rational::rat(2, 3),
            BigRational::one(),
        ])
        .map_err(|found| {
            let (letter, state, value) = *found;
            PfaError::NotThirds {
                letter,
                state,
                value,
            }
        })
    }

    /// Enumerates all words over the alphabet with length `0..=max_len`,
    /// shortest first, lexicographic by letter declaration order within a
    /// length.
    pub fn words_up_to(&self, max_len: usize) -> Vec<Word> {
        let mut out: Vec<Word> = vec![Vec::new()];
        let mut level: Vec<Word> = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for word in &level {
                for letter in &self.alphabet {
                    let mut w = word.clone();
                    w.push(letter.clone());
                    next.push(w);
                }
            }
            out.extend(next.iter().cloned());
            level = next;
        }
        out
    }
}
