//! Line-level import scanner, the last-resort stage. It works on physical
//! lines with only same-line quote tracking, so it never fails, and it will
//! pick up import-looking lines inside multi-line strings.

use super::{ExtractionStage, ImportStatement, ImportedName};

struct Stripped {
    code: String,
    depth_delta: i32,
    continues: bool,
}

/// Drops a `#` comment (outside quotes on this line) and reports the
/// bracket balance and whether the line ends in a backslash.
fn strip_line(line: &str) -> Stripped {
    let mut quote: Option<char> = None;
    let mut depth = 0;
    let mut escaped = false;
    let mut cut = line.len();
    for (i, c) in line.char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '#' => {
                cut = i;
                break;
            }
            '\'' | '"' => quote = Some(c),
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            _ => {}
        }
    }
    let code = line[..cut].trim_end();
    let continues = code.ends_with('\\');
    let code = code.strip_suffix('\\').unwrap_or(code);
    Stripped {
        code: code.to_string(),
        depth_delta: depth,
        continues,
    }
}

fn first_word(line: &str) -> &str {
    let t = line.trim_start();
    let end = t
        .find(|c: char| !(c.is_alphanumeric() || c == '_'))
        .unwrap_or(t.len());
    &t[..end]
}

/// Splits on `;` outside quotes and brackets.
fn split_statements(logical: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in logical.char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '\'' | '"' => quote = Some(c),
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ';' if depth <= 0 => {
                out.push(&logical[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&logical[start..]);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok<'a> {
    Word(&'a str),
    Dot,
    Comma,
    Open,
    Close,
    Star,
    Other,
}

fn lex(stmt: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut iter = stmt.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        match c {
            c if c.is_whitespace() => {}
            '.' => out.push(Tok::Dot),
            ',' => out.push(Tok::Comma),
            '(' => out.push(Tok::Open),
            ')' => out.push(Tok::Close),
            '*' => out.push(Tok::Star),
            c if c.is_alphabetic() || c == '_' => {
                let mut end = i + c.len_utf8();
                while let Some(&(j, d)) = iter.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        end = j + d.len_utf8();
                        iter.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Word(&stmt[i..end]));
            }
            _ => out.push(Tok::Other),
        }
    }
    out
}

const RESERVED: [&str; 4] = ["import", "from", "as", "def"];

struct Parser<'a> {
    toks: Vec<Tok<'a>>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok<'a>> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, tok: &Tok<'_>) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        self.eat(&Tok::Word(kw))
    }

    fn name(&mut self) -> Option<&'a str> {
        match self.peek() {
            Some(Tok::Word(w))
                if !RESERVED.contains(w) && !w.starts_with(|c: char| c.is_ascii_digit()) =>
            {
                let w = *w;
                self.pos += 1;
                Some(w)
            }
            _ => None,
        }
    }

    fn dotted(&mut self) -> Option<String> {
        let mut path = self.name()?.to_string();
        while self.peek() == Some(&Tok::Dot) {
            self.pos += 1;
            path.push('.');
            path.push_str(self.name()?);
        }
        Some(path)
    }

    fn alias(&mut self) -> Option<Option<&'a str>> {
        if self.keyword("as") {
            Some(Some(self.name()?))
        } else {
            Some(None)
        }
    }

    fn done(&self) -> bool {
        self.pos == self.toks.len()
    }

    fn import_stmt(&mut self, line: u32) -> Option<Vec<ImportStatement>> {
        let mut out = Vec::new();
        loop {
            let module = self.dotted()?;
            let alias = self.alias()?;
            out.push(ImportStatement::plain(
                &module,
                alias,
                line,
                ExtractionStage::TokenScan,
            ));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.done().then_some(out)
    }

    fn parse_from_stmt(&mut self, line: u32) -> Option<Vec<ImportStatement>> {
        let mut level = 0u32;
        while self.eat(&Tok::Dot) {
            level += 1;
        }
        let module = if level > 0 && self.peek() == Some(&Tok::Word("import")) {
            String::new()
        } else {
            self.dotted()?
        };
        if !self.keyword("import") {
            return None;
        }
        let names = if self.eat(&Tok::Star) {
            vec![ImportedName::new("*", None)]
        } else {
            let parens = self.eat(&Tok::Open);
            let mut names = Vec::new();
            loop {
                let name = self.name()?;
                let alias = self.alias()?;
                names.push(ImportedName::new(name, alias));
                if !self.eat(&Tok::Comma) {
                    break;
                }
                if parens && self.peek() == Some(&Tok::Close) {
                    break;
                }
            }
            if parens && !self.eat(&Tok::Close) {
                return None;
            }
            names
        };
        self.done().then(|| {
            vec![ImportStatement::from_import(
                &module,
                level,
                names,
                line,
                ExtractionStage::TokenScan,
            )]
        })
    }
}

fn parse_statement(stmt: &str, line: u32) -> Vec<ImportStatement> {
    let toks = lex(stmt);
    let mut p = Parser { toks, pos: 0 };
    let parsed = if p.keyword("import") {
        p.import_stmt(line)
    } else if p.keyword("from") {
        p.parse_from_stmt(line)
    } else {
        None
    };
    parsed.unwrap_or_default()
}

/// Lines opening with these cannot sit inside a bracket continuation, so
/// they end any unbalanced one (backslash continuations are left alone); this keeps one stray `(` from swallowing the
/// rest of a file.
const BREAKS_CONTINUATION: [&str; 4] = ["import", "from", "def", "class"];

/// Collects `import X` / `from X import Y` statements line by line.
pub fn token_scan(source: &str) -> Vec<ImportStatement> {
    let mut out = Vec::new();
    let mut logical = String::new();
    let mut start_line = 0u32;
    let mut depth = 0i32;
    let mut pending = false;
    let mut backslash = false;

    let flush = |logical: &mut String, start_line: u32, out: &mut Vec<ImportStatement>| {
        for stmt in split_statements(logical) {
            out.extend(parse_statement(stmt, start_line));
        }
        logical.clear();
    };

    for (idx, raw) in source.split('\n').enumerate() {
        let line_no = idx as u32 + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if pending && !backslash && BREAKS_CONTINUATION.contains(&first_word(raw)) {
            flush(&mut logical, start_line, &mut out);
            depth = 0;
            pending = false;
        }
        let stripped = strip_line(raw);
        if !pending {
            start_line = line_no;
        } else {
            logical.push(' ');
        }
        logical.push_str(&stripped.code);
        depth += stripped.depth_delta;
        backslash = stripped.continues;
        pending = backslash || depth > 0;
        if !pending {
            depth = 0;
            flush(&mut logical, start_line, &mut out);
        }
    }
    if !logical.is_empty() {
        flush(&mut logical, start_line, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExtractionStage::TokenScan;

    #[test]
    fn comma_targets_aliases_and_comment() {
        assert_eq!(
            token_scan("  import a.b, c as d  # note"),
            vec![
                ImportStatement::plain("a.b", None, 1, TokenScan),
                ImportStatement::plain("c", Some("d"), 1, TokenScan),
            ]
        );
    }

    #[test]
    fn parenthesized_from_import_spans_lines() {
        assert_eq!(
            token_scan("from pkg import (x,\n    y)"),
            vec![ImportStatement::from_import(
                "pkg",
                0,
                vec![ImportedName::new("x", None), ImportedName::new("y", None)],
                1,
                TokenScan
            )]
        );
    }

    #[test]
    fn identifier_prefix_is_not_a_keyword() {
        assert!(token_scan("important = 1").is_empty());
        assert!(token_scan("fromage = 2").is_empty());
    }

    #[test]
    fn backslash_and_semicolons() {
        let got = token_scan("import os; import sys\nfrom a import \\\n    b as c, d\n");
        let mods: Vec<_> = got.iter().map(|s| (s.module.as_str(), s.line)).collect();
        assert_eq!(mods, [("os", 1), ("sys", 1), ("a", 2)]);
        assert_eq!(
            got[2].names,
            vec![
                ImportedName::new("b", Some("c")),
                ImportedName::new("d", None)
            ]
        );
    }

    #[test]
    fn relative_and_star() {
        let got = token_scan("from . import x\nfrom ..pkg.sub import *\nfrom .. import (a, b,)\n");
        assert_eq!((got[0].module.as_str(), got[0].relative_level), ("", 1));
        assert_eq!(
            (
                got[1].module.as_str(),
                got[1].relative_level,
                got[1].is_star
            ),
            ("pkg.sub", 2, true)
        );
        assert_eq!(got[2].names.len(), 2);
    }

    #[test]
    fn malformed_lines_are_ignored() {
        assert!(token_scan("import\nfrom x\nfrom x import\nimport 3d\nimport a b\n").is_empty());
    }

    #[test]
    fn hash_inside_quotes_is_not_a_comment() {
        assert!(token_scan("x = '#'; import os")
            .iter()
            .any(|s| s.module == "os"));
    }

    #[test]
    fn unclosed_bracket_does_not_swallow_later_imports() {
        let got = token_scan("def broken(:\nimport os\nx = foo(\nfrom a import b\n");
        let mods: Vec<_> = got.iter().map(|s| (s.module.as_str(), s.line)).collect();
        assert_eq!(mods, [("os", 2), ("a", 4)]);
    }

    #[test]
    fn docstring_imports_are_collected() {
        let got = token_scan("\"\"\"\nimport fake\n\"\"\"\nimport real\n");
        let mods: Vec<_> = got.iter().map(|s| s.module.as_str()).collect();
        assert_eq!(mods, ["fake", "real"]);
    }
}
