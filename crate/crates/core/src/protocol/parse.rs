use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::texts::texts;
use crate::env::Action;

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
pub const ACTION_OPEN: &str = "<ipython_cell>";
pub const ACTION_CLOSE: &str = "</ipython_cell>";

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseError {
    #[error("no think block")]
    NoThinkBlock,
    #[error("no action cell")]
    NoActionCell,
    #[error("unknown method")]
    UnknownMethod,
    #[error("malformed arguments")]
    MalformedArguments,
    #[error("multiple actions in one cell")]
    MultipleActions,
    #[error("empty action cell")]
    EmptyCell,
}

impl ParseError {
    /// Text returned to the agent on stderr.
    pub fn feedback(&self) -> &'static str {
        let e = &texts().errors;
        match self {
            ParseError::NoThinkBlock => &e.no_think_block,
            ParseError::NoActionCell => &e.no_action_cell,
            ParseError::UnknownMethod => &e.unknown_method,
            ParseError::MalformedArguments => &e.malformed_arguments,
            ParseError::MultipleActions => &e.multiple_actions,
            ParseError::EmptyCell => &e.empty_cell,
        }
    }
}

fn first_block<'a>(reply: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = reply.find(open)? + open.len();
    let len = reply[start..].find(close)?;
    Some(&reply[start..start + len])
}

/// Content of the first `<think>` block, trimmed.
pub fn parse_think(reply: &str) -> Result<String, ParseError> {
    first_block(reply, THINK_OPEN, THINK_CLOSE)
        .map(|s| s.trim().to_string())
        .ok_or(ParseError::NoThinkBlock)
}

/// Raw content of the first action cell, if any.
pub(crate) fn action_cell(reply: &str) -> Option<&str> {
    first_block(reply, ACTION_OPEN, ACTION_CLOSE)
}

/// Trimmed content of the first action cell, empty if there is none.
pub fn action_cell_content(reply: &str) -> String {
    action_cell(reply).map(|s| s.trim().to_string()).unwrap_or_default()
}

pub fn serialize_action_cell(action: &Action) -> String {
    format!("{ACTION_OPEN}{}{ACTION_CLOSE}", action.call_text())
}

struct Call<'a> {
    name: &'a str,
    args: &'a str,
}

fn strip_comments(src: &str) -> String {
    src.lines()
        .map(|line| match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

/// Splits cell source into `name(args)` calls separated by whitespace or `;`.
fn scan_calls(src: &str) -> Result<Vec<Call<'_>>, ParseError> {
    let mut calls = Vec::new();
    let mut rest = src;
    loop {
        rest = rest.trim_start_matches(|c: char| c.is_whitespace() || c == ';');
        if rest.is_empty() {
            return Ok(calls);
        }
        let ident_len = rest.find(|c: char| !is_ident_char(c)).unwrap_or(rest.len());
        if ident_len == 0 {
            // not a call at all, e.g. a stray literal or operator
            return Err(ParseError::UnknownMethod);
        }
        let name = &rest[..ident_len];
        let after = rest[ident_len..].trim_start();
        let Some(body) = after.strip_prefix('(') else {
            return Err(if is_known(name) {
                ParseError::MalformedArguments
            } else {
                ParseError::UnknownMethod
            });
        };
        let Some(close) = body.find(')') else {
            return Err(if is_known(name) {
                ParseError::MalformedArguments
            } else {
                ParseError::UnknownMethod
            });
        };
        calls.push(Call {
            name,
            args: &body[..close],
        });
        rest = &body[close + 1..];
    }
}

fn is_known(name: &str) -> bool {
    matches!(name, "mouse_move" | "mouse_click")
}

enum Coord {
    Int(i64),
    Real(f64),
}

fn parse_coord(arg: &str, keyword: &str) -> Result<Coord, ParseError> {
    let mut s = arg.trim();
    if let Some(v) = s.strip_prefix(keyword) {
        if let Some(v) = v.trim_start().strip_prefix('=') {
            s = v.trim();
        }
    }
    if s.is_empty() || !s.chars().all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E')) {
        return Err(ParseError::MalformedArguments);
    }
    if let Ok(i) = s.parse::<i64>() {
        return Ok(Coord::Int(i));
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Coord::Real(v)),
        _ => Err(ParseError::MalformedArguments),
    }
}

fn parse_move(args: &str) -> Result<Action, ParseError> {
    let parts: Vec<&str> = args.split(',').collect();
    if parts.len() != 2 {
        return Err(ParseError::MalformedArguments);
    }
    let x = parse_coord(parts[0], "x")?;
    let y = parse_coord(parts[1], "y")?;
    Ok(match (x, y) {
        (Coord::Int(x), Coord::Int(y)) => Action::MouseMove { x, y },
        (x, y) => {
            let f = |c: Coord| match c {
                Coord::Int(i) => i as f64,
                Coord::Real(v) => v,
            };
            Action::move_to(f(x), f(y))
        }
    })
}

/// Parses the first `<ipython_cell>` block against
/// `call := mouse_move(number, number) | mouse_click()`; exactly one call allowed.
pub fn parse_action_cell(reply: &str) -> Result<Action, ParseError> {
    let cell = action_cell(reply).ok_or(ParseError::NoActionCell)?;
    let src = strip_comments(cell);
    let calls = scan_calls(&src)?;
    match calls.as_slice() {
        [] => Err(ParseError::EmptyCell),
        [call] => match call.name {
            "mouse_move" => parse_move(call.args),
            "mouse_click" if call.args.trim().is_empty() => Ok(Action::MouseClick),
            "mouse_click" => Err(ParseError::MalformedArguments),
            _ => Err(ParseError::UnknownMethod),
        },
        _ => Err(ParseError::MultipleActions),
    }
}
