//! Line-oriented automaton files and word syntax.
//!
//! ```text
//! # a fair coin
//! pfa
//! states: q0 q1
//! alphabet: a b
//! initial: q0
//! accepting: q1
//! trans a q0 -> 1/2 q0, 1/2 q1
//! ```
//!
//! Probabilities are written `N/D` or as integers; rows that are not listed
//! default to identity self-loops. Structured letters are written
//! `check[a,q]`, `apply[a,q]`, `star`, `merge`, `finish`, `sharp`. Words on
//! the command line are dot-separated letter tokens; the empty string is the
//! empty word.
//!
//! [`serialize`] emits a canonical form — declaration order, identity rows
//! omitted, probabilities in lowest terms — and `parse(serialize(p)) == p`
//! for every valid automaton.

use std::fmt;

use thiserror::Error;

use crate::automaton::{Letter, Pfa, Word};
use crate::rational::parse_rational;

/// A parse failure with a 1-based line and column.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

const RESERVED: [&str; 6] = ["star", "merge", "finish", "sharp", "check", "apply"];

fn check_plain_name(token: &str) -> Result<(), String> {
    if token.is_empty() {
        return Err("empty name".to_string());
    }
    if RESERVED.contains(&token) {
        return Err(format!("`{token}` is reserved"));
    }
    if token == "->" {
        return Err("`->` is not a name".to_string());
    }
    for c in token.chars() {
        if c.is_whitespace() || matches!(c, ',' | '[' | ']' | '#' | '.' | ':') {
            return Err(format!("character `{c}` not allowed in plain name `{token}`"));
        }
    }
    Ok(())
}

fn check_state_name(token: &str) -> Result<(), String> {
    if token.is_empty() {
        return Err("empty state name".to_string());
    }
    if token == "->" {
        return Err("`->` is not a state name".to_string());
    }
    let mut depth = 0i32;
    for c in token.chars() {
        match c {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth < 0 {
                    return Err(format!("unbalanced brackets in `{token}`"));
                }
            }
            ',' if depth == 0 => {
                return Err(format!("top-level comma in state name `{token}`"));
            }
            '#' | '.' | ':' => {
                return Err(format!("character `{c}` not allowed in state name `{token}`"));
            }
            c if c.is_whitespace() => {
                return Err(format!("whitespace not allowed in state name `{token}`"));
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(format!("unbalanced brackets in `{token}`"));
    }
    Ok(())
}

/// Splits `body` at its first comma that sits outside any brackets.
fn split_top_level_comma(body: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    for (i, c) in body.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => return Some((&body[..i], &body[i + 1..])),
            _ => {}
        }
    }
    None
}

/// Parses one letter token (`a`, `star`, `check[a,q]`, …).
pub fn parse_letter_token(token: &str) -> Result<Letter, String> {
    match token {
        "star" => return Ok(Letter::Star),
        "merge" => return Ok(Letter::Merge),
        "finish" => return Ok(Letter::Finish),
        "sharp" => return Ok(Letter::Sharp),
        _ => {}
    }
    for (prefix, is_check) in [("check[", true), ("apply[", false)] {
        if let Some(rest) = token.strip_prefix(prefix) {
            let Some(body) = rest.strip_suffix(']') else {
                return Err(format!("missing `]` in `{token}`"));
            };
            let Some((inner, state)) = split_top_level_comma(body) else {
                return Err(format!("expected `letter,state` inside `{token}`"));
            };
            let inner = parse_letter_token(inner)?;
            check_state_name(state)?;
            return Ok(if is_check {
                Letter::check(inner, state)
            } else {
                Letter::apply(inner, state)
            });
        }
    }
    check_plain_name(token)?;
    Ok(Letter::src(token))
}

/// Parses a dot-separated word; the empty string is the empty word.
pub fn parse_word(text: &str) -> Result<Word, String> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split('.').map(parse_letter_token).collect()
}

/// Tokens of a line with their 1-based starting columns.
fn tokens_with_columns(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

/// Splits a transition right-hand side at top-level commas, tracking the
/// column of each piece.
fn split_entries(body: &str, base_column: usize) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0usize;
    for (i, c) in body.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push((base_column + start, &body[start..i]));
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push((base_column + start, &body[start..]));
    out
}

/// Parses an automaton document. Structural invariants that the grammar
/// cannot express (row sums, entry ranges) are left to [`Pfa::validate`].
pub fn parse(text: &str) -> Result<Pfa, ParseError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if !content.trim().is_empty() {
            lines.push((i + 1, content));
        }
    }
    let mut iter = lines.into_iter();

    let (line_no, header) = iter
        .next()
        .ok_or_else(|| ParseError::new(1, 1, "empty document, expected `pfa` header"))?;
    if header.trim() != "pfa" {
        return Err(ParseError::new(line_no, 1, "expected `pfa` header"));
    }

    let mut states: Vec<String> = Vec::new();
    let mut alphabet: Vec<Letter> = Vec::new();
    let mut initial: Option<usize> = None;
    let mut accepting: Vec<usize> = Vec::new();
    let mut automaton: Option<Pfa> = None;
    let mut seen_rows: Vec<(usize, usize)> = Vec::new();

    for (line_no, line) in iter {
        let tokens = tokens_with_columns(line);
        let (col0, directive) = tokens[0];
        if automaton.is_some() && directive != "trans" && directive != "accepting:" {
            return Err(ParseError::new(
                line_no,
                col0,
                format!("`{directive}` must come before `trans` lines"),
            ));
        }
        match directive {
            "states:" => {
                if !states.is_empty() {
                    return Err(ParseError::new(line_no, col0, "duplicate `states:` line"));
                }
                for &(col, tok) in &tokens[1..] {
                    check_state_name(tok).map_err(|m| ParseError::new(line_no, col, m))?;
                    if states.iter().any(|s| s == tok) {
                        return Err(ParseError::new(
                            line_no,
                            col,
                            format!("duplicate state `{tok}`"),
                        ));
                    }
                    states.push(tok.to_string());
                }
                if states.is_empty() {
                    return Err(ParseError::new(line_no, col0, "at least one state required"));
                }
            }
            "alphabet:" => {
                if states.is_empty() {
                    return Err(ParseError::new(line_no, col0, "`states:` must come first"));
                }
                if !alphabet.is_empty() {
                    return Err(ParseError::new(line_no, col0, "duplicate `alphabet:` line"));
                }
                for &(col, tok) in &tokens[1..] {
                    let letter =
                        parse_letter_token(tok).map_err(|m| ParseError::new(line_no, col, m))?;
                    if alphabet.contains(&letter) {
                        return Err(ParseError::new(
                            line_no,
                            col,
                            format!("duplicate letter `{tok}`"),
                        ));
                    }
                    alphabet.push(letter);
                }
            }
            "initial:" => {
                if states.is_empty() {
                    return Err(ParseError::new(line_no, col0, "`states:` must come first"));
                }
                if initial.is_some() {
                    return Err(ParseError::new(line_no, col0, "duplicate `initial:` line"));
                }
                let &(col, tok) = tokens
                    .get(1)
                    .ok_or_else(|| ParseError::new(line_no, col0, "missing initial state"))?;
                if tokens.len() > 2 {
                    return Err(ParseError::new(line_no, tokens[2].0, "expected one state"));
                }
                let idx = states.iter().position(|s| s == tok).ok_or_else(|| {
                    ParseError::new(line_no, col, format!("unknown state `{tok}`"))
                })?;
                initial = Some(idx);
            }
            "accepting:" => {
                for &(col, tok) in &tokens[1..] {
                    let idx = states.iter().position(|s| s == tok).ok_or_else(|| {
                        ParseError::new(line_no, col, format!("unknown accepting state `{tok}`"))
                    })?;
                    accepting.push(idx);
                }
            }
            "trans" => {
                if automaton.is_none() {
                    let init = initial.ok_or_else(|| {
                        ParseError::new(line_no, col0, "`initial:` must come before `trans`")
                    })?;
                    automaton = Some(Pfa::new(states.clone(), alphabet.clone(), init));
                }
                let automaton = automaton.as_mut().expect("just ensured");
                if tokens.len() < 4 {
                    return Err(ParseError::new(
                        line_no,
                        col0,
                        "expected `trans <letter> <state> -> <prob> <state>, ...`",
                    ));
                }
                let (lcol, ltok) = tokens[1];
                let letter =
                    parse_letter_token(ltok).map_err(|m| ParseError::new(line_no, lcol, m))?;
                let li = automaton.letter_index(&letter).ok_or_else(|| {
                    ParseError::new(line_no, lcol, format!("letter `{ltok}` not in alphabet"))
                })?;
                let (scol, stok) = tokens[2];
                let si = automaton.state_index(stok).ok_or_else(|| {
                    ParseError::new(line_no, scol, format!("unknown state `{stok}`"))
                })?;
                let (acol, arrow) = tokens[3];
                if arrow != "->" {
                    return Err(ParseError::new(line_no, acol, "expected `->`"));
                }
                if seen_rows.contains(&(li, si)) {
                    return Err(ParseError::new(
                        line_no,
                        col0,
                        format!("duplicate row for letter `{ltok}` from `{stok}`"),
                    ));
                }
                seen_rows.push((li, si));
                let rhs_start = acol - 1 + arrow.len();
                let rhs = &line[rhs_start..];
                let mut entries = Vec::new();
                for (ecol, entry) in split_entries(rhs, rhs_start + 1) {
                    let parts = tokens_with_columns(entry);
                    if parts.len() != 2 {
                        return Err(ParseError::new(
                            line_no,
                            ecol,
                            "expected `<prob> <state>` in transition entry",
                        ));
                    }
                    let (pcol, ptok) = parts[0];
                    let prob = parse_rational(ptok)
                        .map_err(|m| ParseError::new(line_no, ecol + pcol - 1, m))?;
                    let (tcol, ttok) = parts[1];
                    let ti = automaton.state_index(ttok).ok_or_else(|| {
                        ParseError::new(
                            line_no,
                            ecol + tcol - 1,
                            format!("unknown state `{ttok}`"),
                        )
                    })?;
                    entries.push((ti, prob));
                }
                automaton.matrices[li].set_row(si, entries);
            }
            other => {
                return Err(ParseError::new(
                    line_no,
                    col0,
                    format!("unknown directive `{other}`"),
                ));
            }
        }
    }

    if states.is_empty() {
        return Err(ParseError::new(1, 1, "missing `states:` line"));
    }
    let init = initial.ok_or_else(|| ParseError::new(1, 1, "missing `initial:` line"))?;
    let mut p = automaton.unwrap_or_else(|| Pfa::new(states, alphabet, init));
    p.accepting = accepting.into_iter().collect();
    Ok(p)
}

/// Canonical document form: declaration order, identity rows omitted,
/// probabilities in lowest terms.
pub fn serialize(p: &Pfa) -> String {
    use fmt::Write;
    let mut out = String::new();
    out.push_str("pfa\n");
    writeln!(out, "states: {}", p.states.join(" ")).expect("write to string");
    writeln!(
        out,
        "alphabet: {}",
        p.alphabet
            .iter()
            .map(Letter::token)
            .collect::<Vec<_>>()
            .join(" ")
    )
    .expect("write to string");
    writeln!(out, "initial: {}", p.states[p.initial]).expect("write to string");
    let accepting: Vec<&str> = p.accepting.iter().map(|&f| p.states[f].as_str()).collect();
    if accepting.is_empty() {
        out.push_str("accepting:\n");
    } else {
        writeln!(out, "accepting: {}", accepting.join(" ")).expect("write to string");
    }
    for (li, letter) in p.alphabet.iter().enumerate() {
        for s in 0..p.n_states() {
            if p.matrices[li].is_identity_row(s) {
                continue;
            }
            let row = p.matrices[li]
                .row(s)
                .iter()
                .map(|(t, prob)| format!("{} {}", prob, p.states[*t]))
                .collect::<Vec<_>>()
                .join(", ");
            writeln!(out, "trans {} {} -> {}", letter.token(), p.states[s], row)
                .expect("write to string");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    const COIN: &str = "\
# a fair coin
pfa
states: q0 q1
alphabet: a b
initial: q0
accepting: q1
trans a q0 -> 1/2 q0, 1/2 q1
trans b q0 -> 1 q1
";

    #[test]
    fn parses_the_coin_document() {
        let p = parse(COIN).unwrap();
        assert_eq!(p.states, vec!["q0", "q1"]);
        assert_eq!(p.alphabet.len(), 2);
        assert_eq!(p.initial, 0);
        assert!(p.accepting.contains(&1));
        assert!(p.validate().is_empty());
        assert_eq!(
            p.accept_prob(&[Letter::src("a"), Letter::src("a")]).unwrap(),
            rat(3, 4)
        );
    }

    #[test]
    fn minimal_document_has_identity_transitions() {
        let p = parse("pfa\nstates: q0\nalphabet: a\ninitial: q0\n").unwrap();
        assert!(p.validate().is_empty());
        assert!(p.accepting.is_empty());
        assert!(p.matrices[0].is_identity_row(0));
    }

    #[test]
    fn row_sum_errors_surface_in_validation_not_parsing() {
        let doc = "pfa\nstates: q0\nalphabet: a\ninitial: q0\ntrans a q0 -> 1/2 q0\n";
        let p = parse(doc).unwrap();
        assert_eq!(p.validate().len(), 1);
    }

    #[test]
    fn unknown_names_are_located() {
        let doc = "pfa\nstates: q0\nalphabet: a\ninitial: q0\naccepting: zz\n";
        let err = parse(doc).unwrap_err();
        assert_eq!(err.line, 5);
        assert!(err.message.contains("zz"));

        let doc = "pfa\nstates: q0\nalphabet: a\ninitial: qq\n";
        assert!(parse(doc).is_err());

        let doc = "pfa\nstates: q0\nalphabet: a\ninitial: q0\ntrans c q0 -> 1 q0\n";
        let err = parse(doc).unwrap_err();
        assert!(err.message.contains("not in alphabet"));
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let doc = "pfa\nstates: q0\nalphabet: a\ninitial: q0\n\
                   trans a q0 -> 1 q0\ntrans a q0 -> 1 q0\n";
        let err = parse(doc).unwrap_err();
        assert!(err.message.contains("duplicate row"));
    }

    #[test]
    fn gadget_letters_round_trip() {
        let doc = "pfa\nstates: q0 bar[q0] s_star\nalphabet: check[a,q0] star merge\n\
                   initial: q0\naccepting:\n\
                   trans check[a,q0] q0 -> 1 s_star\n\
                   trans star s_star -> 1/2 q0, 1/2 bar[q0]\n";
        let p = parse(doc).unwrap();
        assert_eq!(
            p.alphabet[0],
            Letter::check(Letter::src("a"), "q0")
        );
        let again = parse(&serialize(&p)).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn reserved_words_are_gadget_letters_not_plain_names() {
        assert!(matches!(parse_letter_token("star"), Ok(Letter::Star)));
        assert!(matches!(parse_letter_token("sharp"), Ok(Letter::Sharp)));
        // A bare `check` cannot be a plain letter…
        let doc = "pfa\nstates: q0\nalphabet: check\ninitial: q0\n";
        assert!(parse(doc).is_err());
        // …but state names live in their own namespace.
        let doc = "pfa\nstates: check\nalphabet: a\ninitial: check\n";
        assert!(parse(doc).is_ok());
    }

    #[test]
    fn word_syntax() {
        assert_eq!(parse_word("").unwrap(), Vec::<Letter>::new());
        assert_eq!(
            parse_word("a.b").unwrap(),
            vec![Letter::src("a"), Letter::src("b")]
        );
        assert_eq!(
            parse_word("check[a,q0].star").unwrap(),
            vec![Letter::check(Letter::src("a"), "q0"), Letter::Star]
        );
        assert!(parse_word("a..b").is_err());
    }

    #[test]
    fn nested_gadget_tokens_parse() {
        let tok = "check[check[a,q0],s0]";
        let letter = parse_letter_token(tok).unwrap();
        assert_eq!(letter.token(), tok);
        let sharp_tagged = parse_letter_token("apply[sharp,g[a,q0]]").unwrap();
        assert_eq!(sharp_tagged.token(), "apply[sharp,g[a,q0]]");
    }

    #[test]
    fn serialize_then_parse_is_identity_on_the_coin() {
        let p = parse(COIN).unwrap();
        let doc = serialize(&p);
        let again = parse(&doc).unwrap();
        assert_eq!(p, again);
        // Canonical form is stable.
        assert_eq!(doc, serialize(&again));
    }
}
