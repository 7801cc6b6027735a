//! Text formats for instances and solutions.
//!
//! Instance:
//!
//! ```text
//! maxatom 1
//! vars 3
//! # max(x1, x2) - 2 >= x3
//! atom 1 2 3 -2
//! ```
//!
//! Offsets are integers, decimals or `p/q`. `#` starts a comment; blank lines
//! are ignored. Solution:
//!
//! ```text
//! status sat
//! x1 0
//! x2 -inf
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Assignment, AtomSystem, ExtValue, MaxAtom, Offset, VarId};

pub const HEADER: &str = "maxatom 1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl FormatError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        FormatError {
            line,
            message: message.into(),
        }
    }
}

/// Non-blank lines with comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then_some((i + 1, body))
    })
}

fn last_line(text: &str) -> usize {
    text.lines().count().max(1)
}

fn parse_index(token: &str, line: usize, nvars: usize) -> Result<VarId, FormatError> {
    let i: usize = token
        .parse()
        .map_err(|_| FormatError::new(line, format!("bad variable index {token:?}")))?;
    if i == 0 || i > nvars {
        return Err(FormatError::new(
            line,
            format!("variable index {i} out of range 1..={nvars}"),
        ));
    }
    Ok(VarId::new(i))
}

pub fn parse_instance(text: &str) -> Result<AtomSystem, FormatError> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((line, other)) => {
            return Err(FormatError::new(line, format!("expected {HEADER:?}, found {other:?}")))
        }
        None => return Err(FormatError::new(last_line(text), "missing header")),
    }
    let nvars = match lines.next() {
        Some((line, body)) => {
            let mut tokens = body.split_whitespace();
            match (tokens.next(), tokens.next(), tokens.next()) {
                (Some("vars"), Some(n), None) => n
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n >= 1 && n <= u32::MAX as usize)
                    .ok_or_else(|| FormatError::new(line, format!("bad variable count {n:?}")))?,
                _ => return Err(FormatError::new(line, format!("expected \"vars <n>\", found {body:?}"))),
            }
        }
        None => return Err(FormatError::new(last_line(text), "missing \"vars <n>\" line")),
    };
    let mut system = AtomSystem::new(nvars).expect("nvars >= 1");
    for (line, body) in lines {
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let [keyword, i, j, k, r] = tokens[..] else {
            return Err(FormatError::new(line, format!("expected \"atom <i> <j> <k> <r>\", found {body:?}")));
        };
        if keyword != "atom" {
            return Err(FormatError::new(line, format!("unknown directive {keyword:?}")));
        }
        let z = parse_index(i, line, nvars)?;
        let y = parse_index(j, line, nvars)?;
        let x = parse_index(k, line, nvars)?;
        let offset: Offset = r
            .parse()
            .map_err(|e| FormatError::new(line, format!("{e}")))?;
        system
            .add_atom(MaxAtom::new(z, y, x, offset))
            .expect("indices checked");
    }
    Ok(system)
}

/// Canonical text: header, variable count, atoms in key order.
pub fn emit_instance(system: &AtomSystem) -> String {
    let mut out = format!("{HEADER}\nvars {}\n", system.nvars());
    for a in system.atoms() {
        writeln!(out, "atom {} {} {} {}", a.left1.index(), a.left2.index(), a.right.index(), a.offset)
            .expect("write to String");
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Solution {
    Sat(Assignment),
    Trivial,
}

pub fn emit_solution(solution: &Solution) -> String {
    match solution {
        Solution::Trivial => "status trivial\n".to_string(),
        Solution::Sat(a) => {
            let mut out = String::from("status sat\n");
            for (v, value) in a.iter() {
                writeln!(out, "{v} {value}").expect("write to String");
            }
            out
        }
    }
}

/// Parses a solution over `nvars` variables. Every variable must appear exactly once.
pub fn parse_solution(text: &str, nvars: usize) -> Result<Solution, FormatError> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, "status trivial")) => {
            if let Some((line, body)) = lines.next() {
                return Err(FormatError::new(line, format!("unexpected {body:?} after trivial status")));
            }
            return Ok(Solution::Trivial);
        }
        Some((_, "status sat")) => {}
        Some((line, other)) => {
            return Err(FormatError::new(line, format!("expected a status line, found {other:?}")))
        }
        None => return Err(FormatError::new(last_line(text), "missing status line")),
    }
    let mut values: Vec<Option<ExtValue>> = vec![None; nvars];
    for (line, body) in lines {
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let [name, value] = tokens[..] else {
            return Err(FormatError::new(line, format!("expected \"x<i> <value>\", found {body:?}")));
        };
        let index = name
            .strip_prefix('x')
            .ok_or_else(|| FormatError::new(line, format!("bad variable name {name:?}")))?;
        let v = parse_index(index, line, nvars)?;
        let value: ExtValue = value
            .parse()
            .map_err(|e| FormatError::new(line, format!("{e}")))?;
        if values[v.slot()].replace(value).is_some() {
            return Err(FormatError::new(line, format!("{v} assigned twice")));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(slot, v)| {
            v.ok_or_else(|| FormatError::new(last_line(text), format!("{} has no value", VarId::from_slot(slot))))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Solution::Sat(Assignment::from_values(values)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Rational;

    fn x(i: usize) -> VarId {
        VarId::new(i)
    }

    #[test]
    fn parse_examples() {
        let s = parse_instance("maxatom 1\nvars 3\natom 1 2 3 -2\n").unwrap();
        assert_eq!(s.nvars(), 3);
        assert_eq!(
            s.atoms().iter().copied().collect::<Vec<_>>(),
            vec![MaxAtom::new(x(1), x(2), x(3), -2)]
        );

        let s = parse_instance("maxatom 1\nvars 3\natom 2 1 3 3/2\n").unwrap();
        let atom = s.atoms().iter().next().unwrap();
        assert_eq!(atom.offset.value(), Rational::new(3, 2));
        assert_eq!((atom.left1, atom.left2), (x(1), x(2)));

        let err = parse_instance("maxatom 1\nvars 3\natom 1 2 9 0\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("out of range"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# header comment\n\nmaxatom 1   # trailing\nvars 2\n\n  atom 1 1 2 0.5 # half\n";
        let s = parse_instance(text).unwrap();
        assert_eq!(
            s.atoms().iter().copied().collect::<Vec<_>>(),
            vec![MaxAtom::single(x(1), x(2), Rational::new(1, 2))]
        );
    }

    #[test]
    fn malformed_inputs() {
        for (text, line) in [
            ("", 1),
            ("maxatom 2\nvars 1\n", 1),
            ("maxatom 1\n", 1),
            ("maxatom 1\nvars 0\n", 2),
            ("maxatom 1\nvars x\n", 2),
            ("maxatom 1\nvars 2\natom 1 2 1\n", 3),
            ("maxatom 1\nvars 2\natom 1 2 1 abc\n", 3),
            ("maxatom 1\nvars 2\n\natom 1 2 1 1/0\n", 4),
            ("maxatom 1\nvars 2\nclause 1 2 1 1\n", 3),
            ("maxatom 1\nvars 2\natom 0 2 1 1\n", 3),
        ] {
            let err = parse_instance(text).unwrap_err();
            assert_eq!(err.line, line, "{text:?}: {err}");
        }
    }

    #[test]
    fn canonical_round_trip() {
        let text = "maxatom 1\nvars 4\natom 3 1 2 -1.5\natom 4 4 1 2\natom 2 1 3 0\natom 1 3 2 -3/2\n";
        let s = parse_instance(text).unwrap();
        let emitted = emit_instance(&s);
        assert_eq!(
            emitted,
            "maxatom 1\nvars 4\natom 1 2 3 0\natom 1 3 2 -3/2\natom 4 4 1 2\n"
        );
        assert_eq!(parse_instance(&emitted).unwrap(), s);
        assert_eq!(emit_instance(&parse_instance(&emitted).unwrap()), emitted);
    }

    #[test]
    fn solution_round_trip() {
        let a = Assignment::from_values(vec![
            ExtValue::zero(),
            ExtValue::MinusInf,
            ExtValue::Finite(Rational::new(-7, 3)),
        ]);
        let text = emit_solution(&Solution::Sat(a.clone()));
        assert_eq!(text, "status sat\nx1 0\nx2 -inf\nx3 -7/3\n");
        assert_eq!(parse_solution(&text, 3).unwrap(), Solution::Sat(a));
        assert_eq!(parse_solution("status trivial\n", 3).unwrap(), Solution::Trivial);

        assert_eq!(parse_solution("status sat\nx1 0\n", 2).unwrap_err().line, 2);
        assert_eq!(parse_solution("status sat\nx1 0\nx1 1\n", 2).unwrap_err().line, 3);
        assert_eq!(parse_solution("status sat\nx3 0\n", 2).unwrap_err().line, 2);
        assert_eq!(parse_solution("status maybe\n", 2).unwrap_err().line, 1);
    }
}
