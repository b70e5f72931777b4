//! # pfa
//!
//! A toolkit for *simple* probabilistic finite automata (all transition
//! probabilities in {0, 1/2, 1}) with exact rational semantics throughout.
//!
//! The crate provides:
//!
//! * [`Pfa`] — states, alphabet, one row-stochastic matrix per letter,
//!   acceptance probabilities computed exactly ([`automaton`]);
//! * the **one-coin reduction** ([`reduce::onecoin`]): any simple PFA is
//!   simulated, up to a regular image language, by one with a single
//!   probabilistic transition;
//! * the **thirds reduction** ([`reduce::thirds`]): each fair coin is
//!   synthesized from probabilities {0, 1/3, 2/3, 1} by a `sharp`-driven
//!   gadget, preserving acceptance in the limit;
//! * the **value-preserving reduction** ([`reduce::value`]): a single-coin
//!   automaton with the same value 1, built from a delay gadget and an
//!   embedded syntactic checker for the image language;
//! * mechanical verifiers for all three constructions, exact to the last
//!   rational;
//! * desk-scale analysis ([`analysis`]): value estimation, isolation probing,
//!   seeded random instances and cross-construction sweeps;
//! * a line-oriented file format ([`format`]) and a DOT export of the
//!   thread-tree view of a computation ([`dot`]).
//!
//! ```
//! use pfa::{Letter, Pfa, rational::rat};
//!
//! // A two-state automaton: `a` flips a fair coin from q0, q1 is absorbing.
//! let mut coin = Pfa::new(vec!["q0".into(), "q1".into()], vec![Letter::src("a")], 0);
//! coin.matrices[0].set_row(0, vec![(0, rat(1, 2)), (1, rat(1, 2))]);
//! coin.accepting.insert(1);
//!
//! let w = vec![Letter::src("a"), Letter::src("a")];
//! assert_eq!(coin.accept_prob(&w).unwrap(), rat(3, 4));
//!
//! let reduction = pfa::reduce::onecoin::OneCoinReduction::build(&coin).unwrap();
//! assert_eq!(reduction.target.prob_transitions().len(), 1);
//! let report = reduction.verify(4).unwrap();
//! assert!(report.counterexamples.is_empty());
//! ```

#![forbid(unsafe_code)]

pub mod analysis;
pub mod automaton;
pub mod dot;
pub mod format;
pub mod morphism;
pub mod rational;
pub mod reduce;
pub mod syntactic;

pub use automaton::{
    display_word, Distribution, Letter, Pfa, PfaError, ProbTransition, StateId, TransitionMatrix,
    Violation, Word,
};
pub use morphism::Morphism;
pub use syntactic::SyntacticDfa;
