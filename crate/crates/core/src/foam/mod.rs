//! OpenFOAM ASCII dictionary support: parsing into a [`DictionaryTree`],
//! serializing back to text, and linting a set of case files for
//! cross-file inconsistencies.
//!
//! Comments are dropped on parse. `#include`-style directives and `#{ #}`
//! code blocks are kept as opaque entries so a parsed file serializes back
//! to something that re-parses to the same tree.

mod lexer;
mod lint;
mod parser;
mod write;

pub use lint::{lint_case, lint_case_with, FileParseError, Inconsistency, InconsistencyKind, LintReport};
pub use parser::parse;
pub use write::serialize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("line {line}, column {column}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, column: usize, expected: impl Into<String>, found: impl Into<String>) -> Self {
        ParseError { line, column, expected: expected.into(), found: found.into() }
    }
}

/// One value token inside an entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Word(String),
    /// Numeric literal, kept verbatim.
    Number(String),
    /// Contents of a double-quoted string, escapes kept verbatim.
    Str(String),
    /// `[0 2 -1 0 0 0 0]`
    Dimensions(Vec<Item>),
    List(Vec<Item>),
    Dict(Dictionary),
    /// `#{ ... #}` code block, kept verbatim including the markers.
    Verbatim(String),
}

impl Item {
    /// Text of a scalar-like item.
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Item::Word(s) | Item::Number(s) | Item::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Item::Number(s) => s.parse().ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    /// `key item item ...;` (possibly with no items, e.g. `$default;`)
    Value { key: String, items: Vec<Item> },
    /// `key { ... }`
    Dict { key: String, dict: Dictionary },
    /// `#include "file"` and friends; `args` is the raw rest of the line.
    Directive { name: String, args: String },
    /// Anonymous content, e.g. the `N ( ... )` body of a polyMesh boundary file.
    Bare(Vec<Item>),
}

impl Entry {
    pub fn key(&self) -> Option<&str> {
        match self {
            Entry::Value { key, .. } | Entry::Dict { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dictionary {
    pub entries: Vec<Entry>,
}

impl Dictionary {
    /// Last entry with this key, matching OpenFOAM's last-definition-wins rule.
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.key() == Some(key))
    }

    pub fn get_dict(&self, key: &str) -> Option<&Dictionary> {
        match self.get(key)? {
            Entry::Dict { dict, .. } => Some(dict),
            _ => None,
        }
    }

    pub fn get_items(&self, key: &str) -> Option<&[Item]> {
        match self.get(key)? {
            Entry::Value { items, .. } => Some(items),
            _ => None,
        }
    }

    /// First item of a value entry as text: `application icoFoam;` gives `icoFoam`.
    pub fn get_word(&self, key: &str) -> Option<&str> {
        self.get_items(key)?.first()?.as_text()
    }

    /// Replaces the last value entry with this key, or appends one.
    pub fn set_value(&mut self, key: &str, items: Vec<Item>) {
        match self.entries.iter_mut().rev().find(|e| e.key() == Some(key)) {
            Some(e) => *e = Entry::Value { key: key.to_string(), items },
            None => self.entries.push(Entry::Value { key: key.to_string(), items }),
        }
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.get(key).is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoamHeader {
    pub version: Option<String>,
    pub format: String,
    pub class: String,
    pub location: Option<String>,
    pub object: String,
    /// Any other header keys (`note`, `arch`, ...), in order.
    pub extra: Vec<Entry>,
}

impl FoamHeader {
    pub fn new(class: &str, location: Option<&str>, object: &str) -> Self {
        FoamHeader {
            version: Some("2.0".into()),
            format: "ascii".into(),
            class: class.into(),
            location: location.map(str::to_string),
            object: object.into(),
            extra: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DictionaryTree {
    pub header: Option<FoamHeader>,
    pub body: Dictionary,
}

#[cfg(test)]
mod tests;
