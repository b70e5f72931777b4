//! Simulation constructions over simple probabilistic automata.
//!
//! * [`onecoin`] — simulate any simple PFA by one with a single
//!   probabilistic transition, exactly, up to a regular image language.
//! * [`thirds`] — synthesize fair coins from probabilities {0, 1/3, 2/3, 1}
//!   with a `sharp`-driven gadget, preserving acceptance in the limit.
//! * [`value`] — a value-1-preserving single-coin simulation built from a
//!   delay gadget and an embedded checker for the image language.

use std::collections::BTreeSet;

pub mod onecoin;
pub mod thirds;
pub mod value;

/// Picks `base` or, on collision with an already-taken name, `base` with
/// enough trailing underscores to be fresh. Registers the result.
pub(crate) fn fresh_name(base: &str, taken: &mut BTreeSet<String>) -> String {
    let mut name = base.to_string();
    while !taken.insert(name.clone()) {
        name.push('_');
    }
    name
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_name_disambiguates() {
        let mut taken = BTreeSet::new();
        assert_eq!(fresh_name("s0", &mut taken), "s0");
        assert_eq!(fresh_name("s0", &mut taken), "s0_");
        assert_eq!(fresh_name("s0", &mut taken), "s0__");
    }
}
