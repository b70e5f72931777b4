//! Deterministic checkers for the image languages of the reductions.
//!
//! Both reductions encode source words block-wise, so their image languages
//! are star-closures over a finite set of blocks. [`SyntacticDfa`] is a
//! complete DFA built as a trie over those blocks: any deviation falls into
//! an absorbing dead state, and acceptance happens exactly at block
//! boundaries.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::automaton::{Letter, Word};

/// A complete deterministic automaton over a gadget alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntacticDfa {
    /// State names: block-boundary and trie states `c0, c1, …`, then `bot`.
    pub states: Vec<String>,
    pub alphabet: Vec<Letter>,
    /// `delta[state][letter_index]`, total.
    pub delta: Vec<Vec<usize>>,
    pub start: usize,
    pub accepting: BTreeSet<usize>,
    /// Absorbing non-accepting sink; also the image of unknown letters.
    pub dead: usize,
}

impl SyntacticDfa {
    /// DFA for `{b_1 | … | b_k}*`: blocks chain back to a single accepting
    /// boundary state. Blocks must be nonempty and prefix-free.
    pub fn block_star(alphabet: Vec<Letter>, blocks: &[Word]) -> Self {
        Self::build(alphabet, blocks, false)
    }

    /// DFA for `({b_1 | … | b_k}* · finish)*`: any number of blocks, then
    /// `finish`, repeated. Accepting exactly after each `finish` (and at ε).
    pub fn block_star_with_finish(alphabet: Vec<Letter>, blocks: &[Word]) -> Self {
        Self::build(alphabet, blocks, true)
    }

    fn build(alphabet: Vec<Letter>, blocks: &[Word], with_finish: bool) -> Self {
        let letter_index: BTreeMap<Letter, usize> = alphabet
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        assert_eq!(
            letter_index.len(),
            alphabet.len(),
            "alphabet has duplicates"
        );

        // State 0 is the outer boundary; with `finish`, state 1 is the inner
        // boundary reached after each complete block.
        let outer = 0usize;
        let inner = if with_finish { 1 } else { 0 };
        let n_boundaries = if with_finish { 2 } else { 1 };
        let mut n_states = n_boundaries;

        // Trie over the blocks: edges[(state, letter)] = state. Blocks must
        // be prefix-free so no trie node doubles as a boundary.
        let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for block in blocks {
            assert!(!block.is_empty(), "empty image block");
            let mut cur = outer;
            for (pos, letter) in block.iter().enumerate() {
                let li = *letter_index.get(letter).expect("block letter not in alphabet");
                let last = pos + 1 == block.len();
                let next = match edges.get(&(cur, li)) {
                    Some(&existing) => {
                        let existing_is_boundary = existing < n_boundaries;
                        assert_eq!(
                            existing_is_boundary, last,
                            "blocks are not prefix-free"
                        );
                        existing
                    }
                    None => {
                        let next = if last {
                            inner
                        } else {
                            let s = n_states;
                            n_states += 1;
                            s
                        };
                        edges.insert((cur, li), next);
                        next
                    }
                };
                cur = next;
            }
        }
        // Inner boundary starts blocks exactly like the outer one.
        if with_finish {
            let outer_edges: Vec<((usize, usize), usize)> = edges
                .iter()
                .filter(|((s, _), _)| *s == outer)
                .map(|((s, l), t)| ((*s, *l), *t))
                .collect();
            for ((_, li), t) in outer_edges {
                edges.insert((inner, li), t);
            }
        }

        let dead = n_states;
        n_states += 1;
        let mut delta = vec![vec![dead; alphabet.len()]; n_states];
        for ((s, li), t) in &edges {
            delta[*s][*li] = *t;
        }
        if with_finish {
            let fi = *letter_index
                .get(&Letter::Finish)
                .expect("finish letter missing from alphabet");
            delta[outer][fi] = outer;
            delta[inner][fi] = outer;
        }

        let mut states: Vec<String> = (0..n_states - 1).map(|i| format!("c{i}")).collect();
        states.push("bot".to_string());

        SyntacticDfa {
            states,
            alphabet,
            delta,
            start: outer,
            accepting: [outer].into_iter().collect(),
            dead,
        }
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn letter_index(&self, letter: &Letter) -> Option<usize> {
        self.alphabet.iter().position(|l| l == letter)
    }

    /// One transition; letters outside the alphabet fall to the dead state.
    pub fn step(&self, state: usize, letter: &Letter) -> usize {
        match self.letter_index(letter) {
            Some(li) => self.delta[state][li],
            None => self.dead,
        }
    }

    /// The state reached from `start` after reading `word`.
    pub fn run(&self, word: &[Letter]) -> usize {
        word.iter().fold(self.start, |s, l| self.step(s, l))
    }

    pub fn accepts(&self, word: &[Letter]) -> bool {
        self.accepting.contains(&self.run(word))
    }

    /// Position (0-based) of the letter that first drives the run into the
    /// dead state, if any.
    pub fn first_deviation(&self, word: &[Letter]) -> Option<usize> {
        let mut state = self.start;
        for (i, letter) in word.iter().enumerate() {
            state = self.step(state, letter);
            if state == self.dead {
                return Some(i);
            }
        }
        None
    }

    /// For each state, whether some accepting state is still reachable.
    /// Used to prune restricted searches.
    pub fn can_reach_accepting(&self) -> Vec<bool> {
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); self.n_states()];
        for (s, row) in self.delta.iter().enumerate() {
            for &t in row {
                rev[t].push(s);
            }
        }
        let mut ok = vec![false; self.n_states()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &f in &self.accepting {
            ok[f] = true;
            queue.push_back(f);
        }
        while let Some(t) = queue.pop_front() {
            for &s in &rev[t] {
                if !ok[s] {
                    ok[s] = true;
                    queue.push_back(s);
                }
            }
        }
        ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn letters() -> (Letter, Letter, Letter) {
        (Letter::src("x"), Letter::src("y"), Letter::src("z"))
    }

    #[test]
    fn block_star_accepts_exactly_block_sequences() {
        let (x, y, z) = letters();
        let alphabet = vec![x.clone(), y.clone(), z.clone()];
        let blocks = vec![vec![x.clone(), y.clone()], vec![z.clone()]];
        let dfa = SyntacticDfa::block_star(alphabet, &blocks);

        assert!(dfa.accepts(&[]));
        assert!(dfa.accepts(&[x.clone(), y.clone()]));
        assert!(dfa.accepts(&[z.clone(), x.clone(), y.clone(), z.clone()]));
        assert!(!dfa.accepts(std::slice::from_ref(&x)));
        assert!(!dfa.accepts(std::slice::from_ref(&y)));
        assert!(!dfa.accepts(&[x.clone(), z.clone()]));
        assert_eq!(dfa.first_deviation(&[x.clone(), z.clone()]), Some(1));
        assert_eq!(dfa.first_deviation(&[x.clone(), y.clone()]), None);
    }

    #[test]
    fn finish_variant_accepts_at_finish_boundaries_only() {
        let (x, y, _) = letters();
        let alphabet = vec![x.clone(), y.clone(), Letter::Finish];
        let blocks = vec![vec![x.clone(), y.clone()]];
        let dfa = SyntacticDfa::block_star_with_finish(alphabet, &blocks);

        assert!(dfa.accepts(&[]));
        assert!(dfa.accepts(&[Letter::Finish]));
        assert!(!dfa.accepts(&[x.clone(), y.clone()]));
        assert!(dfa.accepts(&[x.clone(), y.clone(), Letter::Finish]));
        assert!(dfa.accepts(&[
            x.clone(),
            y.clone(),
            x.clone(),
            y.clone(),
            Letter::Finish,
            Letter::Finish,
        ]));
        assert!(!dfa.accepts(std::slice::from_ref(&y)));
    }

    #[test]
    fn unknown_letters_fall_dead() {
        let (x, y, z) = letters();
        let dfa = SyntacticDfa::block_star(vec![x.clone(), y.clone()], &[vec![x.clone()]]);
        assert_eq!(dfa.run(std::slice::from_ref(&z)), dfa.dead);
        assert!(!dfa.accepts(&[z]));
    }

    #[test]
    fn reachability_prunes_dead_state_only_here() {
        let (x, y, _) = letters();
        let dfa = SyntacticDfa::block_star(vec![x.clone(), y.clone()], &[vec![x, y]]);
        let ok = dfa.can_reach_accepting();
        assert!(ok[dfa.start]);
        assert!(!ok[dfa.dead]);
    }
}
