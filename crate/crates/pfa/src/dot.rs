//! Thread-tree view of a computation and its DOT export.
//!
//! Reading a word spawns parallel threads: probabilistic transitions branch,
//! and threads landing on the same state at the same depth merge, so each
//! depth holds at most `|Q|` distinct nodes. The DOT export draws one node
//! per occupied `(state, depth)` pair, labels each depth column with the
//! letter read, and shows merges as nodes with in-degree ≥ 2.

use std::fmt::Write;

use num::{BigRational, One};

use crate::automaton::{Letter, Pfa, PfaError, StateId, Word};

/// One occupied `(state, depth)` node.
#[derive(Clone, Debug)]
pub struct ThreadNode {
    pub state: StateId,
    /// Total probability mass on this state at this depth.
    pub mass: BigRational,
    /// Outgoing edges to the next depth: `(target state, edge probability)`.
    pub children: Vec<(StateId, BigRational)>,
}

/// The computation tree of one word.
#[derive(Clone, Debug)]
pub struct ThreadTree {
    pub word: Word,
    /// `levels[d]` holds the occupied nodes at depth `d`, in state order.
    pub levels: Vec<Vec<ThreadNode>>,
}

impl ThreadTree {
    /// Number of distinct occupied states at a depth.
    pub fn width(&self, depth: usize) -> usize {
        self.levels[depth].len()
    }

    /// Number of edges from depth `depth - 1` into `(state, depth)`.
    pub fn in_degree(&self, depth: usize, state: StateId) -> usize {
        if depth == 0 {
            return 0;
        }
        self.levels[depth - 1]
            .iter()
            .flat_map(|n| n.children.iter())
            .filter(|(t, _)| *t == state)
            .count()
    }

    /// Whether some node at `depth` branches (has ≥ 2 children).
    pub fn has_branch_at(&self, depth: usize) -> bool {
        self.levels[depth].iter().any(|n| n.children.len() >= 2)
    }
}

/// Builds the thread tree of `word` from the initial Dirac distribution.
pub fn thread_tree(p: &Pfa, word: &[Letter]) -> Result<ThreadTree, PfaError> {
    let mut levels = Vec::with_capacity(word.len() + 1);
    let mut current = p.initial_dirac();
    for letter in word {
        let matrix = p.matrix(letter)?;
        let nodes = current
            .support()
            .map(|(s, m)| ThreadNode {
                state: s,
                mass: m.clone(),
                children: matrix.row(s).to_vec(),
            })
            .collect();
        levels.push(nodes);
        current = p.step(&current, letter)?;
    }
    levels.push(
        current
            .support()
            .map(|(s, m)| ThreadNode {
                state: s,
                mass: m.clone(),
                children: Vec::new(),
            })
            .collect(),
    );
    Ok(ThreadTree {
        word: word.to_vec(),
        levels,
    })
}

fn quote(text: &str) -> String {
    let escaped = text.replace('\\', "\\\\").replace('"', "\\\"");
    format!("\"{escaped}\"")
}

/// Renders the thread tree as a DOT digraph. Node ids are deterministic
/// (`s_<state>_<depth>`), so identical inputs produce identical output.
pub fn render_thread_tree(p: &Pfa, word: &[Letter]) -> Result<String, PfaError> {
    let tree = thread_tree(p, word)?;
    let mut out = String::new();
    out.push_str("digraph thread_tree {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=ellipse];\n");

    // Depth ruler labeled by the letters read.
    for d in 0..tree.levels.len() {
        let label = if d == 0 {
            String::new()
        } else {
            tree.word[d - 1].token()
        };
        writeln!(
            out,
            "  {} [shape=none, label={}];",
            quote(&format!("d{d}")),
            quote(&label)
        )
        .expect("write to string");
    }
    for d in 1..tree.levels.len() {
        writeln!(
            out,
            "  {} -> {} [style=invis];",
            quote(&format!("d{}", d - 1)),
            quote(&format!("d{d}"))
        )
        .expect("write to string");
    }

    let node_id = |state: StateId, depth: usize| format!("s_{}_{}", p.states[state], depth);
    for (d, nodes) in tree.levels.iter().enumerate() {
        for node in nodes {
            writeln!(
                out,
                "  {} [label={}];",
                quote(&node_id(node.state, d)),
                quote(&p.states[node.state])
            )
            .expect("write to string");
        }
        let mut rank: Vec<String> = vec![quote(&format!("d{d}"))];
        rank.extend(nodes.iter().map(|n| quote(&node_id(n.state, d))));
        writeln!(out, "  {{ rank=same; {}; }}", rank.join("; ")).expect("write to string");
    }
    for (d, nodes) in tree.levels.iter().enumerate() {
        for node in nodes {
            for (target, prob) in &node.children {
                let label = if prob.is_one() {
                    String::new()
                } else {
                    format!(" [label={}]", quote(&prob.to_string()))
                };
                writeln!(
                    out,
                    "  {} -> {}{};",
                    quote(&node_id(node.state, d)),
                    quote(&node_id(*target, d + 1)),
                    label
                )
                .expect("write to string");
            }
        }
    }
    out.push_str("}\n");
    Ok(out)
}
