//! Step implementation documents.
//!
//! A `.process` file describes an operating-system command:
//!
//! ```json
//! { "name": "UploadNSD",
//!   "command": "maple run-step concat --in {info} --in {nsd} --out {out}",
//!   "parameters": [
//!     { "name": "info", "direction": "in",  "metamodel": "nsdinfo", "modelRef": "info" },
//!     { "name": "nsd",  "direction": "in",  "metamodel": "nsd",     "modelRef": "nsd" },
//!     { "name": "out",  "direction": "out", "metamodel": "nsdinfo", "modelRef": "out" } ] }
//! ```
//!
//! A `.builtin.json` file has the same shape with `op` in place of
//! `command` and runs in-process.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::procmodel::Direction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecParameter {
    pub name: String,
    pub direction: Direction,
    pub metamodel: String,
    /// Name of the process-model pin this parameter is bound to.
    #[serde(rename = "modelRef")]
    pub model_ref: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecSpec {
    pub name: String,
    pub command: String,
    #[serde(default)]
    pub parameters: Vec<SpecParameter>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinOp {
    Copy,
    Concat,
    Template,
    Fail,
}

impl BuiltinOp {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "copy" => Some(Self::Copy),
            "concat" => Some(Self::Concat),
            "template" => Some(Self::Template),
            "fail" => Some(Self::Fail),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Copy => "copy",
            Self::Concat => "concat",
            Self::Template => "template",
            Self::Fail => "fail",
        }
    }

    /// Checks input/output counts. `fail` accepts anything.
    pub fn check_arity(self, inputs: usize, outputs: usize) -> Result<(), String> {
        let ok = match self {
            Self::Copy | Self::Template => inputs == 1 && outputs == 1,
            Self::Concat => inputs >= 1 && outputs == 1,
            Self::Fail => true,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("`{self}` cannot take {inputs} input(s) and {outputs} output(s)"))
        }
    }
}

impl fmt::Display for BuiltinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinSpec {
    pub name: String,
    pub op: BuiltinOp,
    #[serde(default)]
    pub parameters: Vec<SpecParameter>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("command references unknown parameter `{0}`")]
    UnboundPlaceholder(String),
    #[error("{0}")]
    ArityMismatch(String),
}

fn syntax(message: impl Into<String>) -> SpecError {
    SpecError::Syntax { line: 0, column: 0, message: message.into() }
}

fn check_parameters(params: &[SpecParameter]) -> Result<(), SpecError> {
    let mut names = BTreeSet::new();
    let mut refs = BTreeSet::new();
    for p in params {
        if p.name.is_empty() || p.metamodel.is_empty() || p.model_ref.is_empty() {
            return Err(syntax(format!("parameter `{}` has an empty field", p.name)));
        }
        if !names.insert(p.name.as_str()) {
            return Err(syntax(format!("duplicate parameter name `{}`", p.name)));
        }
        if !refs.insert((p.model_ref.as_str(), p.direction)) {
            return Err(syntax(format!("duplicate {} modelRef `{}`", p.direction, p.model_ref)));
        }
    }
    Ok(())
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, SpecError> {
    serde_json::from_str(text).map_err(|e| SpecError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn parse_exec_spec(text: &str) -> Result<ExecSpec, SpecError> {
    let spec: ExecSpec = from_json(text)?;
    if spec.command.trim().is_empty() {
        return Err(syntax("empty command"));
    }
    check_parameters(&spec.parameters)?;
    for name in placeholders(&spec.command) {
        if !spec.parameters.iter().any(|p| p.name == name) {
            return Err(SpecError::UnboundPlaceholder(name));
        }
    }
    Ok(spec)
}

pub fn parse_builtin_spec(text: &str) -> Result<BuiltinSpec, SpecError> {
    let spec: BuiltinSpec = from_json(text)?;
    check_parameters(&spec.parameters)?;
    let ins = spec.parameters.iter().filter(|p| p.direction == Direction::In).count();
    spec.op.check_arity(ins, spec.parameters.len() - ins).map_err(SpecError::ArityMismatch)?;
    Ok(spec)
}

fn is_placeholder_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Splits `s` into literal text and `{name}` placeholders.
fn segments(s: &str) -> Vec<(bool, &str)> {
    let mut out = Vec::new();
    let mut rest = s;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if close > 0 && after[..close].chars().all(is_placeholder_char) => {
                if open > 0 {
                    out.push((false, &rest[..open]));
                }
                out.push((true, &after[..close]));
                rest = &after[close + 1..];
            }
            _ => {
                out.push((false, &rest[..=open]));
                rest = after;
            }
        }
    }
    if !rest.is_empty() {
        out.push((false, rest));
    }
    out
}

/// Placeholder names used in a command, in order of appearance.
pub fn placeholders(command: &str) -> Vec<String> {
    segments(command).into_iter().filter(|(p, _)| *p).map(|(_, n)| n.to_string()).collect()
}

/// Replaces every `{name}` in `word` via `lookup`. Unknown names are an
/// error.
pub fn substitute(word: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, SpecError> {
    let mut out = String::new();
    for (is_ph, text) in segments(word) {
        if is_ph {
            out.push_str(&lookup(text).ok_or_else(|| SpecError::UnboundPlaceholder(text.to_string()))?);
        } else {
            out.push_str(text);
        }
    }
    Ok(out)
}
