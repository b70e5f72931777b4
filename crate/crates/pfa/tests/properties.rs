//! Property tests over seeded random instances.

use num::{BigRational, One, Zero};
use proptest::prelude::*;

use pfa::analysis::{estimate_value, isolation_probe, random_simple_pfa, random_thirds_pfa};
use pfa::format::{parse, serialize};
use pfa::rational::rat;
use pfa::reduce::onecoin::OneCoinReduction;
use pfa::reduce::thirds::ThirdsReduction;
use pfa::{Distribution, Pfa, Word};

fn word_from_indices(p: &Pfa, indices: &[usize]) -> Word {
    indices
        .iter()
        .map(|i| p.alphabet[i % p.alphabet.len()].clone())
        .collect()
}

/// A random simple instance plus a word over its alphabet.
fn instance_and_word() -> impl Strategy<Value = (Pfa, Word, Word)> {
    (1usize..=4, 1usize..=2, any::<u64>(), proptest::collection::vec(0usize..8, 0..6), proptest::collection::vec(0usize..8, 0..6))
        .prop_map(|(states, letters, seed, u, v)| {
            let p = random_simple_pfa(states, letters, seed);
            let u = word_from_indices(&p, &u);
            let v = word_from_indices(&p, &v);
            (p, u, v)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mass_is_conserved_and_probabilities_stay_in_range((p, u, v) in instance_and_word()) {
        let word: Word = u.iter().chain(v.iter()).cloned().collect();
        let dist = p.run(&p.initial_dirac(), &word).unwrap();
        prop_assert!(dist.total().is_one());
        let prob = p.accept_prob(&word).unwrap();
        prop_assert!(prob >= BigRational::zero() && prob <= BigRational::one());
    }

    #[test]
    fn running_is_a_monoid_action((p, u, v) in instance_and_word()) {
        let d = p.initial_dirac();
        let uv: Word = u.iter().chain(v.iter()).cloned().collect();
        let via_concat = p.run(&d, &uv).unwrap();
        let via_steps = p.run(&p.run(&d, &u).unwrap(), &v).unwrap();
        prop_assert_eq!(via_concat, via_steps);
    }

    #[test]
    fn run_is_linear_in_the_distribution((p, u, _v) in instance_and_word(), num in 0i64..=4) {
        prop_assume!(p.n_states() >= 2);
        let alpha = rat(num, 4);
        let d1 = Distribution::dirac(p.n_states(), 0);
        let d2 = Distribution::dirac(p.n_states(), p.n_states() - 1);
        let mixed = Distribution::from_masses(
            (0..p.n_states())
                .map(|s| &alpha * d1.get(s) + (BigRational::one() - &alpha) * d2.get(s))
                .collect(),
        )
        .unwrap();
        let lhs = p.run(&mixed, &u).unwrap();
        let r1 = p.run(&d1, &u).unwrap();
        let r2 = p.run(&d2, &u).unwrap();
        for s in 0..p.n_states() {
            let rhs = &alpha * r1.get(s) + (BigRational::one() - &alpha) * r2.get(s);
            prop_assert_eq!(lhs.get(s), &rhs);
        }
    }

    #[test]
    fn deterministic_automata_accept_zero_one(states in 1usize..=4, letters in 1usize..=2, seed in any::<u64>(), idx in proptest::collection::vec(0usize..8, 0..6)) {
        let mut p = random_simple_pfa(states, letters, seed);
        // Collapse every probabilistic row onto its first target.
        for matrix in &mut p.matrices {
            for s in 0..states {
                if let Some((t, _)) = matrix.row(s).first().cloned() {
                    matrix.set_row_det(s, t);
                }
            }
        }
        prop_assert!(p.prob_transitions().is_empty());
        let word = word_from_indices(&p, &idx);
        let prob = p.accept_prob(&word).unwrap();
        prop_assert!(prob.is_zero() || prob.is_one());
    }

    #[test]
    fn morphism_encoding_is_homomorphic((p, u, v) in instance_and_word()) {
        let reduction = OneCoinReduction::build(&p).unwrap();
        let uv: Word = u.iter().chain(v.iter()).cloned().collect();
        let mut concat = reduction.encode(&u).unwrap();
        concat.extend(reduction.encode(&v).unwrap());
        prop_assert_eq!(reduction.encode(&uv).unwrap(), concat);
        prop_assert!(reduction.encode(&[]).unwrap().is_empty());
    }

    #[test]
    fn one_coin_equivalence_on_random_words((p, u, _v) in instance_and_word()) {
        let reduction = OneCoinReduction::build(&p).unwrap();
        let encoded = reduction.encode(&u).unwrap();
        prop_assert_eq!(
            p.accept_prob(&u).unwrap(),
            reduction.target.accept_prob(&encoded).unwrap()
        );
    }

    #[test]
    fn serialization_round_trips(states in 1usize..=4, letters in 1usize..=2, seed in any::<u64>()) {
        let p = random_simple_pfa(states, letters, seed);
        prop_assert_eq!(&parse(&serialize(&p)).unwrap(), &p);
        let onecoin = OneCoinReduction::build(&p).unwrap().target;
        prop_assert_eq!(&parse(&serialize(&onecoin)).unwrap(), &onecoin);
        let thirds = ThirdsReduction::build(&p).unwrap().target;
        prop_assert_eq!(&parse(&serialize(&thirds)).unwrap(), &thirds);
    }

    #[test]
    fn generated_instances_are_well_formed(states in 1usize..=5, letters in 1usize..=3, seed in any::<u64>()) {
        let simple = random_simple_pfa(states, letters, seed);
        prop_assert!(simple.validate().is_empty());
        prop_assert!(simple.is_simple());
        if states >= 2 {
            prop_assert!(!simple.prob_transitions().is_empty());
        }
        let thirds = random_thirds_pfa(states, letters, seed);
        prop_assert!(thirds.validate().is_empty());
        prop_assert!(thirds.is_thirds());
    }

    #[test]
    fn probing_the_estimate_gives_zero_gap(states in 1usize..=3, letters in 1usize..=2, seed in any::<u64>()) {
        let p = random_simple_pfa(states, letters, seed);
        let estimate = estimate_value(&p, 3, None).unwrap();
        let report = isolation_probe(&p, &estimate.best_prob, 3).unwrap();
        prop_assert!(report.min_gap.is_zero());
    }
}
