//! Letter-to-word morphisms between alphabets.

use std::collections::BTreeMap;

use crate::automaton::{Letter, PfaError, Word};

/// A morphism from a source alphabet into words over a target alphabet,
/// extended homomorphically: `encode(uv) = encode(u)·encode(v)` and
/// `encode(ε) = ε`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Morphism {
    images: BTreeMap<Letter, Word>,
}

impl Morphism {
    pub fn new(images: BTreeMap<Letter, Word>) -> Self {
        Morphism { images }
    }

    /// The image of a single letter.
    pub fn image(&self, letter: &Letter) -> Result<&Word, PfaError> {
        self.images
            .get(letter)
            .ok_or_else(|| PfaError::UnknownLetter(letter.token()))
    }

    /// Source letters with an image, in letter order.
    pub fn domain(&self) -> impl Iterator<Item = &Letter> {
        self.images.keys()
    }

    /// Homomorphic extension to words.
    pub fn encode(&self, word: &[Letter]) -> Result<Word, PfaError> {
        let mut out = Vec::new();
        for letter in word {
            out.extend(self.image(letter)?.iter().cloned());
        }
        Ok(out)
    }
}
