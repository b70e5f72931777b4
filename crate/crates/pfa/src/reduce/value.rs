//! Value-preserving single-coin simulation of a thirds-form PFA.
//!
//! The image block of a letter `a` is
//! `check[a,q0]·star·star·apply[a,q0] ⋯ check[a,q_{n-1}]·star·star·apply[a,q_{n-1}]·merge`.
//! Reading `star` twice from the coin state leaves half of the mass on `s1`,
//! a quarter on `s0` and a quarter still on `s_star`; the following `apply`
//! routes `s0` to the one-third target, `s1` to the two-thirds target, and
//! sweeps the residual quarter to `wait`. Each simulated letter therefore
//! advances three quarters of the mass and parks one quarter until the next
//! `finish`, which restarts parked mass from the initial state, sends
//! accepted threads into an embedded deterministic checker for the image
//! language, and drops everything else into an absorbing bottom state.
//!
//! The accepting states of the result are the checker's block boundaries, so
//! reading `(ŵ·finish)^p` accepts with probability
//! `Pr(w)·(1 − (1 − (3/4)^k)^p)`, which climbs to `Pr(w)` as `p` grows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{BigRational, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::automaton::{display_word, Distribution, Letter, Pfa, PfaError, StateId, Word};
use crate::morphism::Morphism;
use crate::rational::{rat, rat_pow};
use crate::reduce::fresh_name;
use crate::syntactic::SyntacticDfa;

/// The shape of a validated thirds-form row: deterministic, or a 1/3–2/3
/// split over two distinct states.
enum ThirdsRow {
    Det(StateId),
    Split { third: StateId, two_thirds: StateId },
}

fn classify_thirds_row(p: &Pfa, letter_index: usize, state: StateId) -> Result<ThirdsRow, PfaError> {
    let row = p.matrices[letter_index].row(state);
    let third = rat(1, 3);
    let two_thirds = rat(2, 3);
    match row {
        [(t, w)] if w.is_one() => Ok(ThirdsRow::Det(*t)),
        [(t0, w0), (t1, w1)] if *w0 == third && *w1 == two_thirds => Ok(ThirdsRow::Split {
            third: *t0,
            two_thirds: *t1,
        }),
        [(t0, w0), (t1, w1)] if *w0 == two_thirds && *w1 == third => Ok(ThirdsRow::Split {
            third: *t1,
            two_thirds: *t0,
        }),
        _ => Err(PfaError::UnsupportedThirdsRow {
            letter: p.alphabet[letter_index].token(),
            state: p.states[state].clone(),
        }),
    }
}

/// A thirds-form PFA together with its value-preserving single-coin
/// simulator, the encoding morphism and the syntactic checker.
#[derive(Clone, Debug)]
pub struct ValueReduction {
    pub source: Pfa,
    pub target: Pfa,
    pub morphism: Morphism,
    /// Standalone copy of the embedded checker for the image language
    /// `{ŵ·finish | w}*`.
    pub checker: SyntacticDfa,
    /// Target id of each source state.
    pub orig: Vec<StateId>,
    /// Target id of each barred copy.
    pub barred: Vec<StateId>,
    pub s_star: StateId,
    pub s0: StateId,
    pub s1: StateId,
    pub wait: StateId,
    pub bottom: StateId,
    /// Target id of each checker state; the checker's dead state maps to
    /// `bottom`.
    pub c_states: Vec<StateId>,
}

impl ValueReduction {
    /// Builds the simulator for the value-1 question. Equivalent to
    /// [`ValueReduction::build_lambda`] at `lambda = 1`.
    pub fn build(source: &Pfa) -> Result<Self, PfaError> {
        Self::build_lambda(source, &BigRational::one())
    }

    /// Reserved entry point for general thresholds. Only `lambda = 1` has a
    /// construction; anything else is refused.
    pub fn build_lambda(source: &Pfa, lambda: &BigRational) -> Result<Self, PfaError> {
        if !lambda.is_one() {
            return Err(PfaError::UnsupportedLambda(lambda.to_string()));
        }
        if let Some(v) = source.validate().first() {
            return Err(PfaError::Invalid(v.to_string()));
        }
        source.require_thirds()?;
        let n = source.n_states();

        // Validate all row shapes up front.
        let mut shapes: Vec<Vec<ThirdsRow>> = Vec::with_capacity(source.alphabet.len());
        for ai in 0..source.alphabet.len() {
            let mut per_state = Vec::with_capacity(n);
            for qi in 0..n {
                per_state.push(classify_thirds_row(source, ai, qi)?);
            }
            shapes.push(per_state);
        }

        let (alphabet, morphism) = value_alphabet_and_morphism(source);
        let checker = build_syntactic_dfa(source);

        // States: originals, barred copies, the gadget states, then the
        // checker (its dead state shared with bottom).
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
        let wait = states.len();
        states.push(fresh_name("wait", &mut taken));
        let bottom = states.len();
        states.push(fresh_name("bot", &mut taken));
        let c_states: Vec<StateId> = (0..checker.n_states())
            .map(|cs| {
                if cs == checker.dead {
                    bottom
                } else {
                    states.push(fresh_name(&checker.states[cs], &mut taken));
                    states.len() - 1
                }
            })
            .collect();

        let mut target = Pfa::new(states, alphabet, orig[source.initial]);
        target.accepting = checker.accepting.iter().map(|&f| c_states[f]).collect();

        for (li, letter) in target.alphabet.clone().iter().enumerate() {
            // Checker transitions carry over verbatim.
            for cs in 0..checker.n_states() {
                if cs == checker.dead {
                    continue;
                }
                let to = c_states[checker.delta[cs][li]];
                target.matrices[li].set_row_det(c_states[cs], to);
            }
            // The coin state answers star with the single probabilistic
            // transition and everything else by parking in wait.
            if *letter == Letter::Star {
                target.matrices[li].set_row(s_star, vec![(s_star, rat(1, 2)), (s0, rat(1, 2))]);
                target.matrices[li].set_row_det(s0, s1);
            } else {
                target.matrices[li].set_row_det(s_star, wait);
            }
            match letter {
                Letter::Check(_, qname) => {
                    let qi = source.state_index(qname).expect("check tags a source state");
                    target.matrices[li].set_row_det(orig[qi], s_star);
                }
                Letter::Apply(inner, qname) => {
                    let ai = source
                        .letter_index(inner)
                        .expect("apply tags a source letter");
                    let qi = source.state_index(qname).expect("apply tags a source state");
                    let (to0, to1) = match &shapes[ai][qi] {
                        ThirdsRow::Det(r) => (barred[*r], barred[*r]),
                        ThirdsRow::Split { third, two_thirds } => {
                            (barred[*third], barred[*two_thirds])
                        }
                    };
                    target.matrices[li].set_row_det(s0, to0);
                    target.matrices[li].set_row_det(s1, to1);
                }
                Letter::Merge => {
                    for qi in 0..n {
                        target.matrices[li].set_row_det(barred[qi], orig[qi]);
                    }
                }
                Letter::Finish => {
                    target.matrices[li].set_row_det(wait, orig[source.initial]);
                    let c_start = c_states[checker.start];
                    for qi in 0..n {
                        let to = if source.accepting.contains(&qi) {
                            c_start
                        } else {
                            bottom
                        };
                        target.matrices[li].set_row_det(orig[qi], to);
                        target.matrices[li].set_row_det(barred[qi], bottom);
                    }
                    target.matrices[li].set_row_det(s0, bottom);
                    target.matrices[li].set_row_det(s1, bottom);
                }
                _ => {}
            }
        }

        Ok(ValueReduction {
            source: source.clone(),
            target,
            morphism,
            checker,
            orig,
            barred,
            s_star,
            s0,
            s1,
            wait,
            bottom,
            c_states,
        })
    }

    /// Encodes a source word into the target alphabet (no trailing finish).
    pub fn encode(&self, word: &[Letter]) -> Result<Word, PfaError> {
        self.morphism.encode(word)
    }

    /// `encode(w)·finish`, the block whose repetitions recycle skipped mass.
    pub fn encode_block(&self, word: &[Letter]) -> Result<Word, PfaError> {
        let mut block = self.encode(word)?;
        block.push(Letter::Finish);
        Ok(block)
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

    /// Checks the recycling law
    /// `accept(target, (ŵ·finish)^p) = Pr(w)·(1 − (1 − (3/4)^k)^p)` exactly
    /// for `1 ≤ p ≤ p_max`, plus monotonicity and the `Pr(w)` bound.
    pub fn verify(&self, word: &[Letter], p_max: usize) -> Result<ValueReport, PfaError> {
        let k = word.len();
        let source_prob = self.source.accept_prob(word)?;
        let block = self.encode_block(word)?;
        let skip = BigRational::one() - rat_pow(&rat(3, 4), k as u32);
        let mut rows = Vec::with_capacity(p_max);
        let mut repeated = Vec::new();
        for p in 1..=p_max {
            repeated.extend(block.iter().cloned());
            let target_prob = self.target.accept_prob(&repeated)?;
            let closed_form =
                &source_prob * (BigRational::one() - rat_pow(&skip, p as u32));
            rows.push(ValueRow {
                p,
                target_prob,
                closed_form,
            });
        }
        let equal = rows.iter().all(|r| r.target_prob == r.closed_form);
        let monotone = rows.windows(2).all(|w| w[0].target_prob <= w[1].target_prob);
        let bounded = rows.iter().all(|r| r.target_prob <= source_prob);
        Ok(ValueReport {
            word: word.to_vec(),
            k,
            p_max,
            source_prob,
            rows,
            equal,
            monotone,
            bounded,
        })
    }

    /// Checks the single-block cap: every `u·finish` whose `u` simulates at
    /// least one transition is accepted with probability at most 3/4. `u`
    /// ranges over image blocks of source words with `1 ≤ |w| ≤ max_source_len`
    /// plus seeded off-image perturbations of each.
    pub fn key_observation_check(
        &self,
        max_source_len: usize,
        perturbations_per_block: usize,
        seed: u64,
    ) -> Result<KeyObservationReport, PfaError> {
        let cap = rat(3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = KeyObservationReport {
            blocks_checked: 0,
            perturbations_checked: 0,
            max_prob: BigRational::zero(),
            max_word: Vec::new(),
            violations: Vec::new(),
            cap_attained: false,
        };
        let note = |word: Word, prob: BigRational, report: &mut KeyObservationReport| {
            if prob > report.max_prob {
                report.max_prob = prob.clone();
                report.max_word = word.clone();
            }
            if prob == cap {
                report.cap_attained = true;
            }
            if prob > cap {
                report.violations.push((word, prob));
            }
        };
        for word in self.source.words_up_to(max_source_len) {
            if word.is_empty() {
                continue;
            }
            let image = self.encode(&word)?;
            let block = {
                let mut b = image.clone();
                b.push(Letter::Finish);
                b
            };
            let prob = self.target.accept_prob(&block)?;
            report.blocks_checked += 1;
            note(block, prob, &mut report);
            for _ in 0..perturbations_per_block {
                let perturbed = self.perturb_off_image(&image, &mut rng);
                let mut block = perturbed;
                block.push(Letter::Finish);
                let prob = self.target.accept_prob(&block)?;
                report.perturbations_checked += 1;
                note(block, prob, &mut report);
            }
        }
        Ok(report)
    }

    /// Draws an off-image variant of an image block. The edits keep every
    /// `check` in place (with its state tag) and never lengthen a `star`
    /// run, so each surviving thread still funnels through at least one coin
    /// resolution; inserting stars or dropping checks could let mass ride
    /// around the coin entirely and is deliberately not sampled.
    fn perturb_off_image(&self, image: &[Letter], rng: &mut ChaCha8Rng) -> Word {
        loop {
            let mut word = image.to_vec();
            match rng.gen_range(0..7u32) {
                // Retag an apply with arbitrary letter/state tags.
                0 => {
                    if let Some(pos) = pick_position(&word, rng, |l| {
                        matches!(l, Letter::Apply(_, _))
                    }) {
                        word[pos] = Letter::apply(self.random_letter(rng), self.random_state(rng));
                    }
                }
                // Retag a check's letter, keeping its state.
                1 => {
                    if let Some(pos) = pick_position(&word, rng, |l| {
                        matches!(l, Letter::Check(_, _))
                    }) {
                        if let Letter::Check(_, q) = &word[pos] {
                            word[pos] = Letter::check(self.random_letter(rng), q.clone());
                        }
                    }
                }
                // Delete a star (shortens a resolution).
                2 => {
                    if let Some(pos) = pick_position(&word, rng, |l| *l == Letter::Star) {
                        word.remove(pos);
                    }
                }
                // Early apply: replace a star by an apply.
                3 => {
                    if let Some(pos) = pick_position(&word, rng, |l| *l == Letter::Star) {
                        word[pos] = Letter::apply(self.random_letter(rng), self.random_state(rng));
                    }
                }
                // Insert a merge anywhere.
                4 => {
                    let pos = rng.gen_range(0..=word.len());
                    word.insert(pos, Letter::Merge);
                }
                // Insert a stray apply or check.
                5 => {
                    let pos = rng.gen_range(0..=word.len());
                    let stray = if rng.gen_bool(0.5) {
                        Letter::apply(self.random_letter(rng), self.random_state(rng))
                    } else {
                        Letter::check(self.random_letter(rng), self.random_state(rng))
                    };
                    word.insert(pos, stray);
                }
                // Delete an apply.
                _ => {
                    if let Some(pos) = pick_position(&word, rng, |l| {
                        matches!(l, Letter::Apply(_, _))
                    }) {
                        word.remove(pos);
                    }
                }
            }
            let mut with_finish = word.clone();
            with_finish.push(Letter::Finish);
            if !self.checker.accepts(&with_finish) {
                return word;
            }
        }
    }

    fn random_letter(&self, rng: &mut ChaCha8Rng) -> Letter {
        self.source.alphabet[rng.gen_range(0..self.source.alphabet.len())].clone()
    }

    fn random_state(&self, rng: &mut ChaCha8Rng) -> String {
        self.source.states[rng.gen_range(0..self.source.n_states())].clone()
    }

    /// Decodes a word over the target alphabet back to one source word per
    /// finish-terminated block, or explains where the image discipline
    /// breaks.
    pub fn recover_source_word(&self, word: &[Letter]) -> Recovery {
        let decomposition = block_decompose(word);
        if let Some(trailing) = &decomposition.trailing {
            return Recovery::Rejected {
                block: decomposition.blocks.len(),
                position: word.len() - trailing.len(),
                reason: "trailing letters after the last finish".to_string(),
            };
        }
        // Map from the head letter of each image block to its source letter.
        let heads: BTreeMap<Letter, Letter> = self
            .source
            .alphabet
            .iter()
            .map(|a| {
                let image = self.morphism.image(a).expect("image exists");
                (image[0].clone(), a.clone())
            })
            .collect();
        let mut decoded = Vec::new();
        let mut offset = 0usize;
        for (bi, block) in decomposition.blocks.iter().enumerate() {
            let mut source_word = Vec::new();
            let mut pos = 0usize;
            while pos < block.len() {
                let head = &block[pos];
                let Some(a) = heads.get(head) else {
                    return Recovery::Rejected {
                        block: bi,
                        position: offset + pos,
                        reason: format!("letter `{head}` does not start an image block"),
                    };
                };
                let image = self.morphism.image(a).expect("image exists");
                for (j, expected) in image.iter().enumerate() {
                    match block.get(pos + j) {
                        Some(got) if got == expected => {}
                        got => {
                            return Recovery::Rejected {
                                block: bi,
                                position: offset + pos + j,
                                reason: format!(
                                    "expected `{expected}` in the image of `{a}`, found {}",
                                    got.map(|g| format!("`{g}`"))
                                        .unwrap_or_else(|| "end of block".to_string())
                                ),
                            };
                        }
                    }
                }
                source_word.push(a.clone());
                pos += image.len();
            }
            decoded.push(source_word);
            offset += block.len() + 1; // account for the finish
        }
        Recovery::Decoded(decoded)
    }
}

/// The target alphabet (check/apply per letter-state pair, then star, merge,
/// finish) and the two-star block morphism of a source automaton.
fn value_alphabet_and_morphism(source: &Pfa) -> (Vec<Letter>, Morphism) {
    let mut alphabet = Vec::new();
    for a in &source.alphabet {
        for q in &source.states {
            alphabet.push(Letter::check(a.clone(), q.clone()));
            alphabet.push(Letter::apply(a.clone(), q.clone()));
        }
    }
    alphabet.push(Letter::Star);
    alphabet.push(Letter::Merge);
    alphabet.push(Letter::Finish);

    let mut images = BTreeMap::new();
    for a in &source.alphabet {
        let mut image = Vec::with_capacity(4 * source.n_states() + 1);
        for q in &source.states {
            image.push(Letter::check(a.clone(), q.clone()));
            image.push(Letter::Star);
            image.push(Letter::Star);
            image.push(Letter::apply(a.clone(), q.clone()));
        }
        image.push(Letter::Merge);
        images.insert(a.clone(), image);
    }
    (alphabet, Morphism::new(images))
}

/// Builds the complete DFA for the image language `{ŵ·finish | w ∈ A*}*` of
/// an automaton's value-reduction morphism. Purely syntactic: only the
/// alphabet and state names of `source` matter.
pub fn build_syntactic_dfa(source: &Pfa) -> SyntacticDfa {
    let (alphabet, morphism) = value_alphabet_and_morphism(source);
    let blocks: Vec<Word> = source
        .alphabet
        .iter()
        .map(|a| morphism.image(a).expect("image exists").clone())
        .collect();
    SyntacticDfa::block_star_with_finish(alphabet, &blocks)
}

/// A word over the reduction alphabet sliced at `finish` letters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockDecomposition {
    /// Finish-free contents of each finish-terminated block.
    pub blocks: Vec<Word>,
    /// Letters after the last finish, if any.
    pub trailing: Option<Word>,
}

/// Splits a word at `finish` letters.
pub fn block_decompose(word: &[Letter]) -> BlockDecomposition {
    let mut blocks = Vec::new();
    let mut current = Vec::new();
    for letter in word {
        if *letter == Letter::Finish {
            blocks.push(std::mem::take(&mut current));
        } else {
            current.push(letter.clone());
        }
    }
    BlockDecomposition {
        blocks,
        trailing: if current.is_empty() {
            None
        } else {
            Some(current)
        },
    }
}

/// Outcome of decoding a target word back to source words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Recovery {
    /// One source word per finish-terminated block.
    Decoded(Vec<Word>),
    /// The word leaves the image language; `position` is the index of the
    /// offending letter in the original word.
    Rejected {
        block: usize,
        position: usize,
        reason: String,
    },
}

/// One row of the recycling check.
#[derive(Clone, Debug)]
pub struct ValueRow {
    pub p: usize,
    pub target_prob: BigRational,
    pub closed_form: BigRational,
}

/// Outcome of the recycling check for one word.
#[derive(Clone, Debug)]
pub struct ValueReport {
    pub word: Word,
    pub k: usize,
    pub p_max: usize,
    pub source_prob: BigRational,
    pub rows: Vec<ValueRow>,
    pub equal: bool,
    pub monotone: bool,
    pub bounded: bool,
}

impl ValueReport {
    pub fn verified(&self) -> bool {
        self.equal && self.monotone && self.bounded
    }
}

impl fmt::Display for ValueReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "word {} (k = {}): source {}, recycling law {} for p ≤ {}, monotone: {}, bounded: {}",
            display_word(&self.word),
            self.k,
            self.source_prob,
            if self.equal { "holds exactly" } else { "FAILS" },
            self.p_max,
            self.monotone,
            self.bounded,
        )
    }
}

/// Outcome of the single-block cap check.
#[derive(Clone, Debug)]
pub struct KeyObservationReport {
    pub blocks_checked: usize,
    pub perturbations_checked: usize,
    pub max_prob: BigRational,
    pub max_word: Word,
    pub violations: Vec<(Word, BigRational)>,
    /// Whether the 3/4 cap was met exactly by some block.
    pub cap_attained: bool,
}

impl KeyObservationReport {
    pub fn verified(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for KeyObservationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} image blocks + {} perturbations: max single-block acceptance {}{}",
            self.blocks_checked,
            self.perturbations_checked,
            self.max_prob,
            if self.violations.is_empty() {
                " (≤ 3/4)"
            } else {
                " — CAP VIOLATED"
            }
        )
    }
}

fn pick_position(
    word: &[Letter],
    rng: &mut ChaCha8Rng,
    pred: impl Fn(&Letter) -> bool,
) -> Option<usize> {
    let candidates: Vec<usize> = word
        .iter()
        .enumerate()
        .filter(|(_, l)| pred(l))
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        None
    } else {
        Some(candidates[rng.gen_range(0..candidates.len())])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce::thirds::ThirdsReduction;

    /// Thirds-form single coin: q0 --a--> 1/3 r0 + 2/3 r1, F = {r0}.
    fn thirds_coin() -> Pfa {
        let mut p = Pfa::new(
            vec!["q0".into(), "r0".into(), "r1".into()],
            vec![Letter::src("a")],
            0,
        );
        p.matrices[0].set_row(0, vec![(1, rat(1, 3)), (2, rat(2, 3))]);
        p.accepting.insert(1);
        p
    }

    /// Deterministic one-letter acceptor: q0 --a--> f, F = {f}.
    fn det_acceptor() -> Pfa {
        let mut p = Pfa::new(vec!["q0".into(), "f".into()], vec![Letter::src("a")], 0);
        p.matrices[0].set_row_det(0, 1);
        p.accepting.insert(1);
        p
    }

    #[test]
    fn target_is_simple_with_one_probabilistic_transition() {
        let r = ValueReduction::build(&thirds_coin()).unwrap();
        assert!(r.target.validate().is_empty());
        assert!(r.target.is_simple());
        let pts = r.target.prob_transitions();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].source, r.s_star);
        assert_eq!(pts[0].letter, Letter::Star);
        // Accepting set is the checker boundary, not the source F.
        assert_eq!(r.target.accepting.len(), 1);
        assert!(r.target.accepting.contains(&r.c_states[r.checker.start]));
    }

    #[test]
    fn image_blocks_have_four_n_plus_one_letters() {
        let r = ValueReduction::build(&thirds_coin()).unwrap();
        let image = r.morphism.image(&Letter::src("a")).unwrap();
        assert_eq!(image.len(), 4 * 3 + 1);
    }

    #[test]
    fn per_letter_scaling_identity() {
        let r = ValueReduction::build(&thirds_coin()).unwrap();
        let a = Letter::src("a");
        let image = r.morphism.image(&a).unwrap().clone();
        for dist in [
            r.source.initial_dirac(),
            Distribution::from_masses(vec![rat(1, 5), rat(3, 5), rat(1, 5)]).unwrap(),
        ] {
            let after_source = r.source.step(&dist, &a).unwrap();
            let got = r.target.run(&r.lift(&dist), &image).unwrap();
            let mut expected = vec![BigRational::zero(); r.target.n_states()];
            for (s, m) in after_source.support() {
                expected[r.orig[s]] = rat(3, 4) * m;
            }
            expected[r.wait] = rat(1, 4);
            assert_eq!(got, Distribution::from_masses(expected).unwrap());
        }
    }

    #[test]
    fn recycling_law_frozen_values() {
        // k = 1 and source probability 1: p = 1 gives 3/4, p = 2 gives 15/16.
        let r = ValueReduction::build(&det_acceptor()).unwrap();
        let w = vec![Letter::src("a")];
        let block = r.encode_block(&w).unwrap();
        assert_eq!(r.target.accept_prob(&block).unwrap(), rat(3, 4));
        let twice: Word = block.iter().chain(block.iter()).cloned().collect();
        assert_eq!(r.target.accept_prob(&twice).unwrap(), rat(15, 16));
        let report = r.verify(&w, 6).unwrap();
        assert!(report.verified());
    }

    #[test]
    fn recycling_law_on_probabilistic_words() {
        let r = ValueReduction::build(&thirds_coin()).unwrap();
        for word in r.source.words_up_to(2) {
            let report = r.verify(&word, 8).unwrap();
            assert!(report.verified(), "word {}", display_word(&word));
        }
    }

    #[test]
    fn zero_probability_words_never_accept() {
        let mut p = thirds_coin();
        p.accepting.clear();
        let r = ValueReduction::build(&p).unwrap();
        let report = r.verify(&[Letter::src("a")], 5).unwrap();
        assert!(report.verified());
        assert!(report.rows.iter().all(|row| row.target_prob.is_zero()));
    }

    #[test]
    fn empty_word_blocks_follow_the_initial_indicator() {
        // (finish)^p accepts iff the initial state is accepting; the closed
        // form with k = 0 degenerates to the same value.
        let mut p = det_acceptor();
        let r = ValueReduction::build(&p).unwrap();
        assert!(r.verify(&[], 4).unwrap().rows.iter().all(|row| row.target_prob.is_zero()));
        p.accepting.insert(0);
        let r = ValueReduction::build(&p).unwrap();
        let report = r.verify(&[], 4).unwrap();
        assert!(report.verified());
        assert!(report.rows.iter().all(|row| row.target_prob.is_one()));
    }

    #[test]
    fn key_observation_cap_attained_at_deterministic_one_letter_word() {
        let r = ValueReduction::build(&det_acceptor()).unwrap();
        let report = r.key_observation_check(2, 25, 7).unwrap();
        assert!(report.verified(), "violations: {:?}", report.violations);
        assert!(report.cap_attained);
        assert_eq!(report.max_prob, rat(3, 4));
    }

    #[test]
    fn key_observation_holds_on_probabilistic_instances() {
        let r = ValueReduction::build(&thirds_coin()).unwrap();
        let report = r.key_observation_check(2, 40, 11).unwrap();
        assert!(report.verified(), "violations: {:?}", report.violations);
        assert!(report.max_prob <= rat(3, 4));
    }

    #[test]
    fn checker_accepts_exactly_the_image_language() {
        let r = ValueReduction::build(&thirds_coin()).unwrap();
        let a = Letter::src("a");
        assert!(r.checker.accepts(&[]));
        assert!(r.checker.accepts(&[Letter::Finish]));
        let block = r.encode_block(std::slice::from_ref(&a)).unwrap();
        assert!(r.checker.accepts(&block));
        let double: Word = block.iter().chain(block.iter()).cloned().collect();
        assert!(r.checker.accepts(&double));
        // ŵ without the finish sits mid-block.
        assert!(!r.checker.accepts(&r.encode(std::slice::from_ref(&a)).unwrap()));
        // A mismatched apply tag falls off the trie.
        let mut bad = r.encode(&[a]).unwrap();
        let apply_pos = bad
            .iter()
            .position(|l| matches!(l, Letter::Apply(_, _)))
            .unwrap();
        bad[apply_pos] = Letter::apply(Letter::src("a"), "r1".to_string());
        bad.push(Letter::Finish);
        assert!(!r.checker.accepts(&bad));
    }

    #[test]
    fn block_decomposition_cases() {
        let r = ValueReduction::build(&thirds_coin()).unwrap();
        let a = Letter::src("a");
        assert_eq!(
            block_decompose(&[]),
            BlockDecomposition {
                blocks: vec![],
                trailing: None
            }
        );
        let block = r.encode_block(std::slice::from_ref(&a)).unwrap();
        let double: Word = block.iter().chain(block.iter()).cloned().collect();
        let d = block_decompose(&double);
        assert_eq!(d.blocks.len(), 2);
        assert!(d.trailing.is_none());
        let bare = r.encode(&[a]).unwrap();
        let d = block_decompose(&bare);
        assert!(d.blocks.is_empty());
        assert_eq!(d.trailing, Some(bare));
    }

    #[test]
    fn recover_decodes_image_words_and_rejects_mismatches() {
        let r = ValueReduction::build(&thirds_coin()).unwrap();
        let a = Letter::src("a");
        let block = r.encode_block(std::slice::from_ref(&a)).unwrap();
        let triple: Word = block
            .iter()
            .chain(block.iter())
            .chain(block.iter())
            .cloned()
            .collect();
        assert_eq!(
            r.recover_source_word(&triple),
            Recovery::Decoded(vec![vec![a.clone()]; 3])
        );
        assert_eq!(r.recover_source_word(&[]), Recovery::Decoded(vec![]));

        let mut bad = r.encode(std::slice::from_ref(&a)).unwrap();
        let apply_pos = bad
            .iter()
            .position(|l| matches!(l, Letter::Apply(_, _)))
            .unwrap();
        bad[apply_pos] = Letter::apply(a.clone(), "r0".to_string());
        bad.push(Letter::Finish);
        match r.recover_source_word(&bad) {
            Recovery::Rejected { block, position, .. } => {
                assert_eq!(block, 0);
                assert_eq!(position, apply_pos);
            }
            other => panic!("expected rejection, got {other:?}"),
        }

        let bare = r.encode(&[a]).unwrap();
        assert!(matches!(
            r.recover_source_word(&bare),
            Recovery::Rejected { .. }
        ));
    }

    #[test]
    fn one_coin_escape_witness_is_rejected_by_the_syntactic_dfa() {
        let simple = {
            let mut p = Pfa::new(
                vec!["q0".into(), "q1".into()],
                vec![Letter::src("a")],
                0,
            );
            p.matrices[0].set_row(0, vec![(0, rat(1, 2)), (1, rat(1, 2))]);
            p.accepting.insert(1);
            p
        };
        let onecoin = crate::reduce::onecoin::OneCoinReduction::build(&simple).unwrap();
        let witness = onecoin.image_escape_witness().unwrap();
        let dfa = build_syntactic_dfa(&simple);
        assert!(!dfa.accepts(&witness.word));
        assert!(dfa.first_deviation(&witness.word).is_some());
    }

    #[test]
    fn checker_mass_stays_at_boundaries_on_image_words() {
        // Once a thread sits on the embedded checker's boundary, reading any
        // image block keeps it accepting exactly at block boundaries.
        let r = ValueReduction::build(&thirds_coin()).unwrap();
        let boundary = r.c_states[r.checker.start];
        let mut dist = Distribution::dirac(r.target.n_states(), boundary);
        for word in [vec![Letter::src("a")], vec![], vec![Letter::src("a"); 2]] {
            let block = r.encode_block(&word).unwrap();
            dist = r.target.run(&dist, &block).unwrap();
            assert!(dist.get(boundary).is_one(), "word {}", display_word(&word));
        }
    }

    #[test]
    fn value_one_sources_admit_words_arbitrarily_close_to_one() {
        // Thirds-form absorbing coin: q0 --a--> 1/3 q0 + 2/3 f, f absorbing
        // accepting. Its value is 1 but no word attains it; for any eps some
        // (ŵ·finish)^p is accepted above 1 − eps. Pr(a^m) = 1 − 3^(−m) and
        // the recycling law give 1 − accept ≤ 3^(−m) + (1 − (3/4)^m)^p, so
        // (m, p) can be read off the closed form; the run itself is exact.
        let mut p = Pfa::new(vec!["q0".into(), "f".into()], vec![Letter::src("a")], 0);
        p.matrices[0].set_row(0, vec![(0, rat(1, 3)), (1, rat(2, 3))]);
        p.accepting.insert(1);
        let r = ValueReduction::build(&p).unwrap();
        for (eps, m, reps) in [
            (rat(1, 10), 3usize, 6usize),
            (rat(1, 100), 5, 20),
            (rat(1, 1000), 7, 64),
        ] {
            let block = r.encode_block(&vec![Letter::src("a"); m]).unwrap();
            let mut dist = r.target.initial_dirac();
            for _ in 0..reps {
                dist = r.target.run(&dist, &block).unwrap();
            }
            let accepted = dist.mass_on(&r.target.accepting);
            let threshold = BigRational::one() - &eps;
            assert!(
                accepted > threshold,
                "m = {m}, p = {reps}: {accepted} ≤ 1 - {eps}"
            );
        }
    }

    #[test]
    fn thirds_pipeline_composes() {
        // Simple -> thirds -> value; the composed target still satisfies the
        // recycling law against the thirds automaton.
        let mut simple = Pfa::new(
            vec!["q0".into(), "q1".into()],
            vec![Letter::src("a")],
            0,
        );
        simple.matrices[0].set_row(0, vec![(0, rat(1, 2)), (1, rat(1, 2))]);
        simple.accepting.insert(1);
        let thirds = ThirdsReduction::build(&simple).unwrap();
        let value = ValueReduction::build(&thirds.target).unwrap();
        let word = vec![Letter::src("a"), Letter::Sharp, Letter::Sharp];
        let report = value.verify(&word, 4).unwrap();
        assert!(report.verified());
        assert_eq!(report.source_prob, rat(2, 9));
    }

    #[test]
    fn general_lambda_is_refused() {
        let err = ValueReduction::build_lambda(&thirds_coin(), &rat(1, 2)).unwrap_err();
        assert!(matches!(err, PfaError::UnsupportedLambda(_)));
    }

    #[test]
    fn non_thirds_input_is_rejected() {
        let mut simple = Pfa::new(
            vec!["q0".into(), "q1".into()],
            vec![Letter::src("a")],
            0,
        );
        simple.matrices[0].set_row(0, vec![(0, rat(1, 2)), (1, rat(1, 2))]);
        let err = ValueReduction::build(&simple).unwrap_err();
        assert!(matches!(err, PfaError::NotThirds { .. }));
    }
}
