//! The `.mech` text format.
//!
//! ```text
//! # comments run to the end of the line
//! alternatives a b c
//! strategies T M1 M2 B      # agent 1
//! strategies L C1 C2 R      # agent 2
//! grid
//! T  a a a a
//! M1 a b a b
//! M2 a b c b
//! B  a b c c
//! ```
//!
//! Two-agent mechanisms use `grid`, one line per agent-1 strategy (any
//! order) listing outcomes in agent-2 order. Any number of agents can use
//! `table` followed by one `s1 s2 ... -> outcome` line per profile. Tokens
//! are separated by whitespace.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::mechanism::{validate, Mechanism, MechanismTable, Violation};
use crate::Q;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

#[derive(Clone, Debug)]
struct Token<'a> {
    text: &'a str,
    pos: Pos,
}

fn err(pos: Pos, message: impl Into<String>) -> Error {
    Error::Parse { line: pos.line, column: pos.column, message: message.into() }
}

/// Non-empty lines with comments removed, split into tokens with 1-based positions.
fn lines(text: &str) -> Vec<Vec<Token<'_>>> {
    text.lines()
        .enumerate()
        .filter_map(|(k, raw)| {
            let body = raw.split('#').next().unwrap_or("");
            let mut tokens = Vec::new();
            let mut start = None;
            for (i, ch) in body.char_indices().chain(std::iter::once((body.len(), ' '))) {
                match (ch.is_whitespace(), start) {
                    (false, None) => start = Some(i),
                    (true, Some(s)) => {
                        tokens.push(Token {
                            text: &body[s..i],
                            pos: Pos { line: k + 1, column: body[..s].chars().count() + 1 },
                        });
                        start = None;
                    }
                    _ => {}
                }
            }
            (!tokens.is_empty()).then_some(tokens)
        })
        .collect()
}

/// Parses a mechanism, reporting syntax and validation problems with positions.
pub fn parse_mechanism(text: &str) -> Result<Mechanism> {
    let lines = lines(text);
    let end = Pos { line: text.lines().count().max(1), column: 1 };
    let mut it = lines.iter().peekable();

    let first = it.next().ok_or_else(|| err(end, "empty input: expected `alternatives`"))?;
    if first[0].text != "alternatives" {
        return Err(err(first[0].pos, format!("expected `alternatives`, found `{}`", first[0].text)));
    }
    if first.len() < 2 {
        return Err(err(first[0].pos, "`alternatives` needs at least one label"));
    }
    let alternatives: Vec<&Token> = first[1..].iter().collect();
    let mut alt_index: HashMap<&str, usize> = HashMap::new();
    for (k, t) in alternatives.iter().enumerate() {
        if alt_index.insert(t.text, k).is_some() {
            return Err(err(t.pos, format!("alternative `{}` listed twice", t.text)));
        }
    }

    let mut strategies: Vec<Vec<&Token>> = Vec::new();
    while let Some(line) = it.peek() {
        if line[0].text != "strategies" {
            break;
        }
        if line.len() < 2 {
            return Err(err(line[0].pos, "`strategies` needs at least one label"));
        }
        let labels: Vec<&Token> = line[1..].iter().collect();
        for (k, t) in labels.iter().enumerate() {
            if labels[..k].iter().any(|o| o.text == t.text) {
                return Err(err(t.pos, format!("strategy `{}` listed twice", t.text)));
            }
        }
        strategies.push(labels);
        it.next();
    }
    if strategies.is_empty() {
        let pos = it.peek().map_or(end, |l| l[0].pos);
        return Err(err(pos, "expected at least one `strategies` line"));
    }
    let sizes: Vec<usize> = strategies.iter().map(Vec::len).collect();
    let n = sizes.len();
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * sizes[i + 1];
    }
    let total = strides[0] * sizes[0];
    let mut outcomes: Vec<Option<usize>> = vec![None; total];
    let mut origin: Vec<Option<Pos>> = vec![None; total];

    let lookup_alt = |t: &Token| {
        alt_index.get(t.text).copied().ok_or_else(|| err(t.pos, format!("unknown alternative `{}`", t.text)))
    };
    let lookup_strategy = |agent: usize, t: &Token| {
        strategies[agent]
            .iter()
            .position(|s| s.text == t.text)
            .ok_or_else(|| err(t.pos, format!("unknown strategy `{}` for agent {}", t.text, agent + 1)))
    };

    let section = it.next().ok_or_else(|| err(end, "expected `grid` or `table`"))?;
    // position of the line that defines each agent-1 strategy (grid) or profile
    let mut row_pos: Vec<Option<Pos>> = vec![None; sizes[0]];
    match (section[0].text, section.len()) {
        ("grid", 1) if n == 2 => {
            for line in it.by_ref() {
                let r = lookup_strategy(0, &line[0])?;
                if let Some(prev) = row_pos[r] {
                    return Err(err(
                        line[0].pos,
                        format!("row `{}` already given on line {}", line[0].text, prev.line),
                    ));
                }
                row_pos[r] = Some(line[0].pos);
                if line.len() - 1 != sizes[1] {
                    let pos = line.get(sizes[1] + 1).map_or(line[line.len() - 1].pos, |t| t.pos);
                    return Err(err(
                        pos,
                        format!("row `{}` has {} entries, expected {}", line[0].text, line.len() - 1, sizes[1]),
                    ));
                }
                for (c, t) in line[1..].iter().enumerate() {
                    outcomes[r * sizes[1] + c] = Some(lookup_alt(t)?);
                    origin[r * sizes[1] + c] = Some(t.pos);
                }
            }
        }
        ("grid", 1) => return Err(err(section[0].pos, format!("`grid` needs exactly two agents, found {n}"))),
        ("table", 1) => {
            for line in it.by_ref() {
                if line.len() != n + 2 || line[n].text != "->" {
                    return Err(err(line[0].pos, format!("expected {n} strategies, `->` and an outcome")));
                }
                let mut flat = 0;
                for (i, t) in line[..n].iter().enumerate() {
                    flat += lookup_strategy(i, t)? * strides[i];
                }
                if let Some(prev) = origin[flat] {
                    return Err(err(line[0].pos, format!("profile already given on line {}", prev.line)));
                }
                outcomes[flat] = Some(lookup_alt(&line[n + 1])?);
                origin[flat] = Some(line[0].pos);
            }
        }
        (word, _) => return Err(err(section[0].pos, format!("expected `grid` or `table`, found `{word}`"))),
    }

    let table = MechanismTable {
        alternatives: alternatives.iter().map(|t| t.text.to_string()).collect(),
        strategies: strategies.iter().map(|ls| ls.iter().map(|t| t.text.to_string()).collect()).collect(),
        outcomes,
    };
    let report = validate(&table);
    if let Some(v) = report.violations.first() {
        let pos = match v {
            Violation::DuplicateStrategies { agent, second, .. } => match (*agent, row_pos[*second]) {
                (0, Some(p)) => p,
                _ => strategies[*agent][*second].pos,
            },
            Violation::MissingOutcome { profile } => {
                if n == 2 {
                    row_pos[profile[0]].unwrap_or(strategies[0][profile[0]].pos)
                } else {
                    end
                }
            }
            _ => first[0].pos,
        };
        return Err(err(pos, report.to_string()));
    }
    Mechanism::try_from(table)
}

fn check_token(kind: &str, label: &str) -> Result<()> {
    if label.is_empty() || label.contains(char::is_whitespace) || label.contains('#') || label == "->" {
        return Err(Error::Precondition(format!("{kind} label {label:?} cannot be written in the text format")));
    }
    Ok(())
}

/// Writes `mech` in the text format; two-agent mechanisms use `grid`.
pub fn render_mechanism(mech: &Mechanism) -> Result<String> {
    for a in mech.alternatives().labels() {
        check_token("alternative", a)?;
    }
    for i in 0..mech.agents() {
        for s in mech.strategy_labels(i) {
            check_token("strategy", s)?;
        }
    }
    let mut out = String::new();
    writeln!(out, "alternatives {}", mech.alternatives().labels().join(" ")).expect("write to string");
    for i in 0..mech.agents() {
        writeln!(out, "strategies {}", mech.strategy_labels(i).join(" ")).expect("write to string");
    }
    if mech.agents() == 2 {
        out.push_str("grid\n");
        let width = mech.strategy_labels(0).iter().map(String::len).max().unwrap_or(1);
        for r in 0..mech.num_strategies(0) {
            write!(out, "{:width$}", mech.strategy_label(0, r)).expect("write to string");
            for c in 0..mech.num_strategies(1) {
                write!(out, " {}", mech.alternatives().label(mech.outcome(&[r, c]))).expect("write to string");
            }
            out.push('\n');
        }
    } else {
        out.push_str("table\n");
        for (k, p) in mech.profiles().enumerate() {
            let labels: Vec<&str> = p.iter().enumerate().map(|(i, &s)| mech.strategy_label(i, s)).collect();
            writeln!(out, "{} -> {}", labels.join(" "), mech.alternatives().label(mech.outcome_table()[k]))
                .expect("write to string");
        }
    }
    Ok(out)
}

/// Parses `p/q` or an integer.
pub fn parse_rational(text: &str) -> Result<Q> {
    let bad = || Error::InvalidDomain(format!("{text:?} is not a rational number (use p/q or an integer)"));
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text.trim(), "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den == BigInt::from(0) {
        return Err(bad());
    }
    Ok(Q::new(num, den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q;
    use crate::voting::{figure1, mechanism_a};

    const FIGURE1: &str = "\
# running example
alternatives a b c
strategies T M1 M2 B
strategies L C1 C2 R
grid
T  a a a a
M1 a b a b
M2 a b c b
B  a b c c
";

    #[test]
    fn parses_figure1() {
        assert_eq!(parse_mechanism(FIGURE1).unwrap(), figure1());
    }

    #[test]
    fn rows_in_any_order() {
        let shuffled = FIGURE1.replace("T  a a a a\n", "").replace("B  a b c c\n", "B  a b c c\nT  a a a a\n");
        assert_eq!(parse_mechanism(&shuffled).unwrap(), figure1());
    }

    #[test]
    fn round_trips() {
        for m in [figure1(), mechanism_a()] {
            assert_eq!(parse_mechanism(&render_mechanism(&m).unwrap()).unwrap(), m);
        }
        let three = Mechanism::new(
            vec!["x".into(), "y".into()],
            vec![vec!["p".into(), "q".into()]; 3],
            vec![0, 0, 0, 1, 0, 1, 1, 1],
        )
        .unwrap();
        let text = render_mechanism(&three).unwrap();
        assert!(text.contains("table"));
        assert_eq!(parse_mechanism(&text).unwrap(), three);
    }

    fn position(text: &str) -> (usize, usize, String) {
        match parse_mechanism(text) {
            Err(Error::Parse { line, column, message }) => (line, column, message),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_input() {
        assert_eq!(position("").0, 1);
        assert!(position("# only a comment\n").2.contains("empty"));
    }

    #[test]
    fn unknown_alternative_is_located() {
        let (line, column, message) = position(&FIGURE1.replace("M2 a b c b", "M2 a b z b"));
        assert_eq!((line, column), (8, 8));
        assert!(message.contains("`z`"));
    }

    #[test]
    fn duplicate_rows_are_reported() {
        let text = FIGURE1.replace("M2 a b c b", "M2 a b a b");
        let (line, _, message) = position(&text);
        assert_eq!(line, 8);
        assert!(message.contains("M1") && message.contains("M2"), "{message}");
    }

    #[test]
    fn missing_row_is_reported() {
        let (_, _, message) = position(&FIGURE1.replace("B  a b c c\n", ""));
        assert!(message.contains("no outcome"), "{message}");
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("5/2").unwrap(), q(5, 2));
        assert_eq!(parse_rational("3").unwrap(), q(3, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("0.5").is_err());
    }
}
