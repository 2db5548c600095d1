use std::panic::{catch_unwind, AssertUnwindSafe};

use rustpython_parser::ast::{self, Ranged, Stmt};
use rustpython_parser::Parse;

use super::{ExtractionStage, ImportStatement, ImportedName};

/// Parser identity stamped into run metadata.
pub const GRAMMAR_VERSION: &str = "rustpython-parser 0.4.0 (Python 3.12 grammar)";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error: {0}")]
pub struct StrictParseError(pub String);

struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    fn new(src: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(src.match_indices('\n').map(|(i, _)| i + 1));
        Self { starts }
    }

    fn line_of(&self, offset: usize) -> u32 {
        let idx = match self.starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        idx as u32 + 1
    }
}

/// Parses `source` under the strict grammar and returns every import node,
/// including those nested in functions, classes and control flow.
pub fn strict_parse(
    source: &str,
    stage: ExtractionStage,
) -> Result<Vec<ImportStatement>, StrictParseError> {
    let suite = catch_unwind(AssertUnwindSafe(|| ast::Suite::parse(source, "<source>")))
        .map_err(|_| StrictParseError("parser panicked".into()))?
        .map_err(|e| StrictParseError(e.to_string()))?;
    let lines = LineIndex::new(source);
    let mut out = Vec::new();
    collect(&suite, &lines, stage, &mut out);
    out.sort_by_key(|s| s.line);
    Ok(out)
}

fn collect(
    body: &[Stmt],
    lines: &LineIndex,
    stage: ExtractionStage,
    out: &mut Vec<ImportStatement>,
) {
    for stmt in body {
        match stmt {
            Stmt::Import(imp) => {
                let line = lines.line_of(imp.range().start().to_usize());
                for alias in &imp.names {
                    out.push(ImportStatement::plain(
                        alias.name.as_str(),
                        alias.asname.as_ref().map(|a| a.as_str()),
                        line,
                        stage,
                    ));
                }
            }
            Stmt::ImportFrom(imp) => {
                let line = lines.line_of(imp.range().start().to_usize());
                let names = imp
                    .names
                    .iter()
                    .map(|a| {
                        ImportedName::new(a.name.as_str(), a.asname.as_ref().map(|n| n.as_str()))
                    })
                    .collect();
                out.push(ImportStatement::from_import(
                    imp.module.as_ref().map(|m| m.as_str()).unwrap_or(""),
                    imp.level.map(|l| l.to_u32()).unwrap_or(0),
                    names,
                    line,
                    stage,
                ));
            }
            Stmt::FunctionDef(s) => collect(&s.body, lines, stage, out),
            Stmt::AsyncFunctionDef(s) => collect(&s.body, lines, stage, out),
            Stmt::ClassDef(s) => collect(&s.body, lines, stage, out),
            Stmt::For(s) => {
                collect(&s.body, lines, stage, out);
                collect(&s.orelse, lines, stage, out);
            }
            Stmt::AsyncFor(s) => {
                collect(&s.body, lines, stage, out);
                collect(&s.orelse, lines, stage, out);
            }
            Stmt::While(s) => {
                collect(&s.body, lines, stage, out);
                collect(&s.orelse, lines, stage, out);
            }
            Stmt::If(s) => {
                collect(&s.body, lines, stage, out);
                collect(&s.orelse, lines, stage, out);
            }
            Stmt::With(s) => collect(&s.body, lines, stage, out),
            Stmt::AsyncWith(s) => collect(&s.body, lines, stage, out),
            Stmt::Match(s) => {
                for case in &s.cases {
                    collect(&case.body, lines, stage, out);
                }
            }
            Stmt::Try(s) => {
                collect(&s.body, lines, stage, out);
                for ast::ExceptHandler::ExceptHandler(h) in &s.handlers {
                    collect(&h.body, lines, stage, out);
                }
                collect(&s.orelse, lines, stage, out);
                collect(&s.finalbody, lines, stage, out);
            }
            Stmt::TryStar(s) => {
                collect(&s.body, lines, stage, out);
                for ast::ExceptHandler::ExceptHandler(h) in &s.handlers {
                    collect(&h.body, lines, stage, out);
                }
                collect(&s.orelse, lines, stage, out);
                collect(&s.finalbody, lines, stage, out);
            }
            _ => {}
        }
    }
}
