//! Import-statement extraction with a three-stage fallback:
//!
//! 1. strict parse of the source under the modern grammar;
//! 2. if that fails, a bounded legacy-syntax rewrite followed by a re-parse;
//! 3. if that fails too, a line-level token scan for `import X` and
//!    `from X import Y` forms.
//!
//! Exactly one stage produces the result for a given text, and every
//! statement carries that stage.

mod legacy;
mod lexer;
mod scan;
mod strict;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use legacy::{legacy_transform, LegacyFailure};
pub use scan::token_scan;
pub use strict::{strict_parse, StrictParseError, GRAMMAR_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStage {
    StrictParse,
    LegacyTransform,
    TokenScan,
}

impl ExtractionStage {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::StrictParse => "strict_parse",
            Self::LegacyTransform => "legacy_transform",
            Self::TokenScan => "token_scan",
        }
    }

    pub fn parse(value: &str) -> Option<Self> {
        match value {
            "strict_parse" => Some(Self::StrictParse),
            "legacy_transform" => Some(Self::LegacyTransform),
            "token_scan" => Some(Self::TokenScan),
            _ => None,
        }
    }
}

impl fmt::Display for ExtractionStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImportedName {
    pub name: String,
    pub alias: Option<String>,
}

impl ImportedName {
    pub fn new(name: impl Into<String>, alias: Option<&str>) -> Self {
        Self {
            name: name.into(),
            alias: alias.map(str::to_string),
        }
    }
}

/// One `import X [as A]` target or one `from M import ...` statement.
///
/// `import a, b` yields one statement per target; `from m import x, y`
/// yields a single statement with two `names`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImportStatement {
    pub module: String,
    pub names: Vec<ImportedName>,
    /// Alias of a plain `import X as A`; always `None` for from-imports.
    pub alias: Option<String>,
    pub relative_level: u32,
    pub is_star: bool,
    pub line: u32,
    pub stage: ExtractionStage,
}

impl ImportStatement {
    pub fn plain(module: &str, alias: Option<&str>, line: u32, stage: ExtractionStage) -> Self {
        Self {
            module: module.to_string(),
            names: Vec::new(),
            alias: alias.map(str::to_string),
            relative_level: 0,
            is_star: false,
            line,
            stage,
        }
    }

    pub fn from_import(
        module: &str,
        relative_level: u32,
        names: Vec<ImportedName>,
        line: u32,
        stage: ExtractionStage,
    ) -> Self {
        let is_star = names.len() == 1 && names[0].name == "*" && names[0].alias.is_none();
        Self {
            module: module.to_string(),
            names: if is_star { Vec::new() } else { names },
            alias: None,
            relative_level,
            is_star,
            line,
            stage,
        }
    }

    pub fn is_from_import(&self) -> bool {
        self.relative_level > 0 || self.is_star || !self.names.is_empty()
    }

    pub fn is_relative(&self) -> bool {
        self.relative_level > 0
    }
}

/// Dotted module path used as the tallying key for ecosystem tables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ImportString {
    pub value: String,
    pub top_level: String,
}

impl ImportString {
    /// `None` for an empty path.
    pub fn new(value: &str) -> Option<Self> {
        if value.is_empty() {
            return None;
        }
        Some(Self {
            value: value.to_string(),
            top_level: top_level_of(value).to_string(),
        })
    }
}

/// First dot-segment of a dotted path.
pub fn top_level_of(import_string: &str) -> &str {
    import_string.split('.').next().unwrap_or(import_string)
}

/// Tally keys for one statement. Relative imports produce none; imported
/// names never extend the key.
pub fn to_import_string(stmt: &ImportStatement) -> Vec<ImportString> {
    if stmt.is_relative() {
        return Vec::new();
    }
    ImportString::new(&stmt.module).into_iter().collect()
}

/// Runs the fallback chain over one source text.
pub fn extract_imports(source: &str) -> (Vec<ImportStatement>, ExtractionStage) {
    if let Ok(stmts) = strict_parse(source, ExtractionStage::StrictParse) {
        return (stmts, ExtractionStage::StrictParse);
    }
    if let Ok(stmts) = legacy::transform_and_parse(source) {
        return (stmts, ExtractionStage::LegacyTransform);
    }
    (token_scan(source), ExtractionStage::TokenScan)
}
