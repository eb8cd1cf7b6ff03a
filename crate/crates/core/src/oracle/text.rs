//! Plain-text form of a finite action:
//!
//! ```text
//! # comments and blank lines are ignored
//! group <n>
//! <n rows of n integers: row a, column b holds a∘b>
//! points <m>
//! <n rows of m integers: row g, column x holds g·x>
//! ```

use super::{FiniteAction, OracleError};

impl FiniteAction {
    pub fn to_text(&self) -> String {
        let row = |r: &[usize]| {
            r.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = format!("group {}\n", self.group_order());
        for r in self.composition_table() {
            out += &row(r);
            out.push('\n');
        }
        out += &format!("points {}\n", self.point_count());
        for r in self.action_table() {
            out += &row(r);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, OracleError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let n = header(&mut lines, "group")?;
        let compose = rows(&mut lines, n)?;
        let m = header(&mut lines, "points")?;
        let action = rows(&mut lines, n)?;
        if let Some(r) = action.iter().position(|r| r.len() != m) {
            return Err(OracleError::NotAnAction(format!(
                "action row {r} must have {m} entries"
            )));
        }
        if let Some((line, _)) = lines.next() {
            return Err(parse_error(line, "trailing content"));
        }
        Self::new(compose, action)
    }
}

fn parse_error(line: usize, message: &str) -> OracleError {
    OracleError::Parse {
        line,
        message: message.to_string(),
    }
}

fn header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<usize, OracleError> {
    let (line, l) = lines
        .next()
        .ok_or_else(|| parse_error(0, &format!("missing `{key}` header")))?;
    l.strip_prefix(key)
        .ok_or_else(|| parse_error(line, &format!("expected `{key} <count>`")))?
        .trim()
        .parse()
        .map_err(|_| parse_error(line, "bad count"))
}

fn rows<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    count: usize,
) -> Result<Vec<Vec<usize>>, OracleError> {
    (0..count)
        .map(|_| {
            let (line, l) = lines
                .next()
                .ok_or_else(|| parse_error(0, "table truncated"))?;
            l.split_whitespace()
                .map(|v| {
                    v.parse()
                        .map_err(|_| parse_error(line, &format!("bad integer {v:?}")))
                })
                .collect()
        })
        .collect()
}
