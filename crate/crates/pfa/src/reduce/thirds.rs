//! Coin synthesis from thirds: every fair coin of a simple PFA is replaced
//! by a `sharp`-driven gadget whose probabilities are 0, 1/3, 2/3 or 1.
//!
//! For a probabilistic couple `(q, a)` with `M_a(q) = ½r0 + ½r1`, the letter
//! `a` now moves `q` deterministically into a fresh entry state `g`; from
//! there `sharp` picks a third/two-thirds twice. When the two picks differ
//! the coin is resolved (`r0` and `r1` each with probability 2/9 per round),
//! otherwise the gadget returns to `g` (probability 5/9) and the next round
//! retries. Interleaving `sharp^p` after each source letter therefore
//! approaches the source acceptance probability from below as `p` grows.
//!
//! Mass still inside a gadget when the next source letter arrives has missed
//! its transition; it falls into a dead sink rather than rejoining the run,
//! so unresolved mass is never accepting and the approach is monotone.

use std::fmt;

use num::BigRational;

use crate::automaton::{display_word, Letter, Pfa, PfaError, StateId, Word};
use crate::rational::{rat, rat_pow};
use crate::reduce::fresh_name;
use crate::reduce::onecoin::{classify_simple_row, SimpleRow};

/// One instantiated coin-synthesizer gadget.
#[derive(Clone, Debug)]
pub struct CoinGadget {
    /// Alphabet index of the replaced letter in the source.
    pub letter_index: usize,
    /// Source state whose row was replaced.
    pub state: StateId,
    /// Entry state `g`; reached deterministically by the replaced letter.
    pub entry: StateId,
    /// First-pick states `h0` (a third) and `h1` (two thirds).
    pub half0: StateId,
    pub half1: StateId,
    /// The two targets of the original fair coin.
    pub r0: StateId,
    pub r1: StateId,
}

/// A simple PFA together with its thirds-form simulator.
#[derive(Clone, Debug)]
pub struct ThirdsReduction {
    pub source: Pfa,
    pub target: Pfa,
    pub gadgets: Vec<CoinGadget>,
    /// Sink for mass caught mid-gadget by a source letter; absent when the
    /// source is deterministic.
    pub dead: Option<StateId>,
}

impl ThirdsReduction {
    /// Builds the thirds-form simulator of a valid simple PFA.
    pub fn build(source: &Pfa) -> Result<Self, PfaError> {
        if let Some(v) = source.validate().first() {
            return Err(PfaError::Invalid(v.to_string()));
        }
        source.require_simple()?;
        if source.alphabet.contains(&Letter::Sharp) {
            return Err(PfaError::Invalid(
                "source alphabet already contains `sharp`".to_string(),
            ));
        }
        let n = source.n_states();

        // Locate the probabilistic couples first to know the state count.
        let mut couples = Vec::new();
        for (ai, a) in source.alphabet.iter().enumerate() {
            for qi in 0..n {
                if let SimpleRow::Split(r0, r1) = classify_simple_row(source, ai, qi)? {
                    couples.push((ai, qi, a.clone(), r0, r1));
                }
            }
        }

        let mut taken: std::collections::BTreeSet<String> =
            source.states.iter().cloned().collect();
        let mut states = source.states.clone();
        let mut gadgets = Vec::new();
        for &(ai, qi, ref a, r0, r1) in &couples {
            let tag = format!("{},{}", a.token(), source.states[qi]);
            let entry = states.len();
            states.push(fresh_name(&format!("g[{tag}]"), &mut taken));
            let half0 = states.len();
            states.push(fresh_name(&format!("h0[{tag}]"), &mut taken));
            let half1 = states.len();
            states.push(fresh_name(&format!("h1[{tag}]"), &mut taken));
            gadgets.push(CoinGadget {
                letter_index: ai,
                state: qi,
                entry,
                half0,
                half1,
                r0,
                r1,
            });
        }
        let dead = if gadgets.is_empty() {
            None
        } else {
            states.push(fresh_name("dead", &mut taken));
            Some(states.len() - 1)
        };

        let mut alphabet = source.alphabet.clone();
        alphabet.push(Letter::Sharp);
        let big_n = states.len();

        let mut target = Pfa::new(states, alphabet, source.initial);
        target.accepting = source.accepting.clone();

        // Source rows carry over verbatim (states keep their indices).
        for (ai, _) in source.alphabet.iter().enumerate() {
            for qi in 0..n {
                let row = source.matrices[ai].row(qi).to_vec();
                target.matrices[ai].set_row(qi, row);
            }
        }
        // Replaced rows enter their gadget; sharp runs the two picks.
        let third = rat(1, 3);
        let two_thirds = rat(2, 3);
        let sharp_index = target.alphabet.len() - 1;
        for g in &gadgets {
            target.matrices[g.letter_index].set_row_det(g.state, g.entry);
            target.matrices[sharp_index].set_row(
                g.entry,
                vec![(g.half0, third.clone()), (g.half1, two_thirds.clone())],
            );
            target.matrices[sharp_index].set_row(
                g.half0,
                vec![(g.entry, third.clone()), (g.r0, two_thirds.clone())],
            );
            target.matrices[sharp_index].set_row(
                g.half1,
                vec![(g.entry, two_thirds.clone()), (g.r1, third.clone())],
            );
            // A source letter arriving mid-gadget kills the thread.
            if let Some(dead) = dead {
                for ai in 0..source.alphabet.len() {
                    target.matrices[ai].set_row_det(g.entry, dead);
                    target.matrices[ai].set_row_det(g.half0, dead);
                    target.matrices[ai].set_row_det(g.half1, dead);
                }
            }
        }
        debug_assert_eq!(target.n_states(), big_n);

        Ok(ThirdsReduction {
            source: source.clone(),
            target,
            gadgets,
            dead,
        })
    }

    /// Interleaves `sharp^p` after each letter of a source word.
    pub fn encode(&self, word: &[Letter], p: usize) -> Result<Word, PfaError> {
        let mut out = Vec::with_capacity(word.len() * (p + 1));
        for letter in word {
            if self.source.letter_index(letter).is_none() {
                return Err(PfaError::UnknownLetter(letter.token()));
            }
            out.push(letter.clone());
            out.extend(std::iter::repeat_n(Letter::Sharp, p));
        }
        Ok(out)
    }

    /// Checks, for `f(p) = accept(target, encode(w, 2p))` with `p` up to
    /// `p_max`: monotonicity in `p`, the exact upper bound `f(p) ≤ Pr(w)`,
    /// and that the remaining residual is within the geometric envelope
    /// `Pr(w)·k·(5/9)^p_max`.
    pub fn verify(&self, word: &[Letter], p_max: usize) -> Result<ThirdsReport, PfaError> {
        let source_prob = self.source.accept_prob(word)?;
        let mut values = Vec::with_capacity(p_max + 1);
        for p in 0..=p_max {
            let encoded = self.encode(word, 2 * p)?;
            values.push(self.target.accept_prob(&encoded)?);
        }
        let monotone = values.windows(2).all(|w| w[0] <= w[1]);
        let bounded = values.iter().all(|v| *v <= source_prob);
        let residual = &source_prob - values.last().expect("p_max >= 0");
        let residual_bound = &source_prob
            * BigRational::from_integer(num::BigInt::from(word.len()))
            * rat_pow(&rat(5, 9), p_max as u32);
        let residual_within_bound = residual <= residual_bound;
        Ok(ThirdsReport {
            word: word.to_vec(),
            p_max,
            source_prob,
            values,
            monotone,
            bounded,
            residual,
            residual_bound,
            residual_within_bound,
        })
    }
}

/// Outcome of a `sharp`-schedule convergence check for one word.
#[derive(Clone, Debug)]
pub struct ThirdsReport {
    pub word: Word,
    pub p_max: usize,
    pub source_prob: BigRational,
    /// `values[p] = accept(target, encode(word, 2p))`.
    pub values: Vec<BigRational>,
    pub monotone: bool,
    pub bounded: bool,
    pub residual: BigRational,
    pub residual_bound: BigRational,
    pub residual_within_bound: bool,
}

impl ThirdsReport {
    pub fn verified(&self) -> bool {
        self.monotone && self.bounded && self.residual_within_bound
    }
}

impl fmt::Display for ThirdsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "word {}: source {}, f({}) = {}, residual {} (bound {}), monotone: {}, bounded: {}",
            display_word(&self.word),
            self.source_prob,
            self.p_max,
            self.values.last().map(|v| v.to_string()).unwrap_or_default(),
            self.residual,
            self.residual_bound,
            self.monotone,
            self.bounded,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::Distribution;
    use num::{One, Zero};

    /// Single fair coin: q0 --a--> {r0, r1}, F = {r0}.
    fn single_coin() -> Pfa {
        let mut p = Pfa::new(
            vec!["q0".into(), "r0".into(), "r1".into()],
            vec![Letter::src("a")],
            0,
        );
        p.matrices[0].set_row(0, vec![(1, rat(1, 2)), (2, rat(1, 2))]);
        p.accepting.insert(1);
        p
    }

    #[test]
    fn target_is_thirds_with_no_halves() {
        let r = ThirdsReduction::build(&single_coin()).unwrap();
        assert!(r.target.validate().is_empty());
        assert!(r.target.is_thirds());
        assert!(!r.target.is_simple() || r.target.prob_transitions().is_empty());
        assert_eq!(r.gadgets.len(), 1);
        assert_eq!(r.target.alphabet.last(), Some(&Letter::Sharp));
    }

    #[test]
    fn encode_interleaves_sharps() {
        let r = ThirdsReduction::build(&single_coin()).unwrap();
        let a = Letter::src("a");
        assert_eq!(r.encode(&[], 5).unwrap(), Vec::<Letter>::new());
        assert_eq!(
            r.encode(std::slice::from_ref(&a), 2).unwrap(),
            vec![a.clone(), Letter::Sharp, Letter::Sharp]
        );
        assert_eq!(
            r.encode(&[a.clone(), a.clone()], 1).unwrap(),
            vec![a.clone(), Letter::Sharp, a, Letter::Sharp]
        );
        assert!(r.encode(&[Letter::Sharp], 1).is_err());
    }

    #[test]
    fn resolved_mass_follows_the_geometric_series() {
        // Independent oracle: resolution adds 2/9·(5/9)^j per round, so the
        // mass on r0 after a·sharp^(2p) is the partial geometric sum.
        let r = ThirdsReduction::build(&single_coin()).unwrap();
        let a = Letter::src("a");
        for p in 0..=20u32 {
            let mut series = BigRational::zero();
            for j in 0..p {
                series += rat(2, 9) * rat_pow(&rat(5, 9), j);
            }
            let word = r.encode(std::slice::from_ref(&a), 2 * p as usize).unwrap();
            let got = r.target.accept_prob(&word).unwrap();
            assert_eq!(got, series, "p = {p}");
            // Closed form of the same sum.
            assert_eq!(got, rat(1, 2) * (BigRational::one() - rat_pow(&rat(5, 9), p)));
        }
    }

    #[test]
    fn gadget_round_law() {
        // From the gadget entry, each full round leaves equal mass on r0 and
        // r1 and keeps (5/9)^p inside the gadget.
        let r = ThirdsReduction::build(&single_coin()).unwrap();
        let g = &r.gadgets[0];
        let n = r.target.n_states();
        for p in 0..6usize {
            let word = vec![Letter::Sharp; 2 * p];
            let dist = r
                .target
                .run(&Distribution::dirac(n, g.entry), &word)
                .unwrap();
            assert_eq!(dist.get(g.r0), dist.get(g.r1));
            let interior =
                dist.get(g.entry).clone() + dist.get(g.half0) + dist.get(g.half1);
            assert_eq!(interior, rat_pow(&rat(5, 9), p as u32));
        }
    }

    #[test]
    fn no_sharps_keeps_mass_in_the_gadget() {
        let r = ThirdsReduction::build(&single_coin()).unwrap();
        let a = Letter::src("a");
        let word = r.encode(&[a], 0).unwrap();
        assert_eq!(r.target.accept_prob(&word).unwrap(), BigRational::zero());
    }

    #[test]
    fn deterministic_source_gains_only_an_inert_sharp() {
        let mut det = single_coin();
        det.matrices[0].set_row_det(0, 1);
        let r = ThirdsReduction::build(&det).unwrap();
        assert!(r.gadgets.is_empty());
        assert!(r.dead.is_none());
        assert_eq!(r.target.n_states(), det.n_states());
        let a = Letter::src("a");
        for p in 0..4 {
            let report = r.verify(std::slice::from_ref(&a), p.max(1)).unwrap();
            assert!(report.verified());
            assert!(report.values.iter().all(|v| *v == report.source_prob));
        }
    }

    #[test]
    fn two_sequential_coins_square_the_rate() {
        // q0 --a--> {m0, m1}, m0 --b--> {f, z}, accept {f}: the only
        // accepting path resolves two coins, so f(p) is the square of the
        // single-coin rate.
        let mut p = Pfa::new(
            vec![
                "q0".into(),
                "m0".into(),
                "m1".into(),
                "f".into(),
                "z".into(),
            ],
            vec![Letter::src("a"), Letter::src("b")],
            0,
        );
        p.matrices[0].set_row(0, vec![(1, rat(1, 2)), (2, rat(1, 2))]);
        p.matrices[1].set_row(1, vec![(3, rat(1, 2)), (4, rat(1, 2))]);
        p.matrices[1].set_row_det(2, 4);
        p.accepting.insert(3);
        let r = ThirdsReduction::build(&p).unwrap();
        let w = vec![Letter::src("a"), Letter::src("b")];
        assert_eq!(p.accept_prob(&w).unwrap(), rat(1, 4));
        for steps in 0..=8u32 {
            let rate = rat(1, 2) * (BigRational::one() - rat_pow(&rat(5, 9), steps));
            let encoded = r.encode(&w, 2 * steps as usize).unwrap();
            assert_eq!(
                r.target.accept_prob(&encoded).unwrap(),
                &rate * &rate,
                "p = {steps}"
            );
        }
    }

    #[test]
    fn verify_reports_convergence() {
        let r = ThirdsReduction::build(&single_coin()).unwrap();
        let report = r.verify(&[Letter::src("a")], 10).unwrap();
        assert!(report.verified());
        assert_eq!(report.source_prob, rat(1, 2));
        assert_eq!(report.values[0], BigRational::zero());
        assert!(report.residual > BigRational::zero());
    }

    #[test]
    fn rejects_non_simple_and_sharp_sources() {
        let mut thirds = single_coin();
        thirds.matrices[0].set_row(0, vec![(1, rat(1, 3)), (2, rat(2, 3))]);
        assert!(ThirdsReduction::build(&thirds).is_err());

        let mut sharped = Pfa::new(vec!["q0".into()], vec![Letter::Sharp], 0);
        sharped.accepting.insert(0);
        assert!(ThirdsReduction::build(&sharped).is_err());
    }
}
