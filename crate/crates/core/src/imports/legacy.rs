//! Bounded legacy-syntax rewrite set. Only constructs that commonly stop a
//! legacy file from parsing are handled:
//!
//! * `print x, y` / `print >>f, x` statements become calls
//! * `except E, v:` becomes `except E as v:`
//! * `` `x` `` becomes `repr(x)`
//! * `exec code [in g[, l]]` becomes `exec(code[, g[, l]])`
//! * octal literals `0NNN` become `0oNNN`
//! * `<>` becomes `!=`

use super::lexer::{logical_lines, Kind, Token};
use super::strict::strict_parse;
use super::{ExtractionStage, ImportStatement};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LegacyFailure {
    #[error("source could not be tokenized: {0}")]
    Untokenizable(String),
    #[error("no legacy rewrite applies")]
    NothingToRewrite,
    #[error("rewritten source still does not parse: {0}")]
    StillInvalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Edit {
    start: usize,
    end: usize,
    text: String,
}

impl Edit {
    fn replace(tok: &Token, text: &str) -> Self {
        Self {
            start: tok.start,
            end: tok.end,
            text: text.to_string(),
        }
    }

    fn insert(at: usize, text: &str) -> Self {
        Self {
            start: at,
            end: at,
            text: text.to_string(),
        }
    }
}

fn apply(src: &str, mut edits: Vec<Edit>) -> String {
    edits.sort_by_key(|e| (e.start, e.end));
    let mut out = String::with_capacity(src.len() + edits.len() * 8);
    let mut cursor = 0;
    for e in edits {
        debug_assert!(e.start >= cursor, "overlapping edits");
        if e.start < cursor {
            continue;
        }
        out.push_str(&src[cursor..e.start]);
        out.push_str(&e.text);
        cursor = e.end;
    }
    out.push_str(&src[cursor..]);
    out
}

fn is_op(tok: &Token, src: &str, op: &str) -> bool {
    tok.kind == Kind::Op && tok.text(src) == op
}

fn is_name(tok: &Token, src: &str, name: &str) -> bool {
    tok.kind == Kind::Name && tok.text(src) == name
}

/// Bracket depth before each token, relative to the slice start.
fn depths(tokens: &[Token], src: &str) -> Vec<i32> {
    let mut depth = 0;
    tokens
        .iter()
        .map(|t| {
            let before = depth;
            if t.kind == Kind::Op {
                match t.text(src) {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth -= 1,
                    _ => {}
                }
            }
            // Closers report the depth they return to.
            if depth < before {
                depth
            } else {
                before
            }
        })
        .collect()
}

const COMPOUND_HEADERS: [&str; 11] = [
    "if", "elif", "else", "for", "while", "try", "except", "finally", "with", "def", "class",
];

/// Token ranges of simple statements within one logical line: split on
/// top-level `;`, and after the colon of a compound header.
fn statements(line: &[Token], src: &str) -> Vec<std::ops::Range<usize>> {
    let depth = depths(line, src);
    let mut raw = Vec::new();
    let mut start = 0;
    for (i, t) in line.iter().enumerate() {
        if depth[i] == 0 && is_op(t, src, ";") {
            if start < i {
                raw.push(start..i);
            }
            start = i + 1;
        }
    }
    if start < line.len() {
        raw.push(start..line.len());
    }

    let mut out = Vec::with_capacity(raw.len());
    for seg in raw {
        let first = &line[seg.start];
        let header = first.kind == Kind::Name && COMPOUND_HEADERS.contains(&first.text(src));
        let colon = header
            .then(|| (seg.start..seg.end).find(|&i| depth[i] == 0 && is_op(&line[i], src, ":")))
            .flatten();
        match colon {
            Some(c) if c + 1 < seg.end => {
                out.push(seg.start..c + 1);
                out.push(c + 1..seg.end);
            }
            _ => out.push(seg),
        }
    }
    out
}

/// `print`/`exec` followed by one of these is already an expression.
fn continues_expression(next: &Token, src: &str) -> bool {
    if next.kind != Kind::Op {
        return false;
    }
    let text = next.text(src);
    matches!(
        text,
        "(" | "[" | "=" | "." | "," | ")" | "]" | "}" | ":" | ";"
    ) || (text.ends_with('=') && text.len() > 1)
}

fn octal_rewrite(text: &str) -> Option<String> {
    let digits = text.strip_suffix(['l', 'L']).unwrap_or(text);
    let rest = digits.strip_prefix('0')?;
    if rest.is_empty()
        || !rest.bytes().all(|b| (b'0'..=b'7').contains(&b))
        || rest.bytes().all(|b| b == b'0')
    {
        return None;
    }
    Some(format!("0o{rest}"))
}

fn token_local_edits(src: &str, lines: &[Vec<Token>]) -> Vec<Edit> {
    let mut edits = Vec::new();
    for line in lines {
        let ticks: Vec<&Token> = line.iter().filter(|t| t.kind == Kind::Backtick).collect();
        if !ticks.is_empty() && ticks.len().is_multiple_of(2) {
            for (i, t) in ticks.iter().enumerate() {
                edits.push(Edit::replace(t, if i % 2 == 0 { "repr(" } else { ")" }));
            }
        }
        for t in line {
            if is_op(t, src, "<>") {
                edits.push(Edit::replace(t, "!="));
            } else if t.kind == Kind::Number {
                if let Some(octal) = octal_rewrite(t.text(src)) {
                    edits.push(Edit::replace(t, &octal));
                }
            }
        }
        if line.first().is_some_and(|t| is_name(t, src, "except")) {
            let depth = depths(line, src);
            let colon = (0..line.len()).find(|&i| depth[i] == 0 && is_op(&line[i], src, ":"));
            if let Some(colon) = colon {
                if let Some(comma) =
                    (1..colon).find(|&i| depth[i] == 0 && is_op(&line[i], src, ","))
                {
                    edits.push(Edit::replace(&line[comma], " as"));
                }
            }
        }
    }
    edits
}

fn print_edits(src: &str, stmt: &[Token], depth: &[i32], edits: &mut Vec<Edit>) {
    let kw = &stmt[0];
    let Some(next) = stmt.get(1) else {
        edits.push(Edit::insert(kw.end, "()"));
        return;
    };
    if continues_expression(next, src) {
        return;
    }
    let last = stmt[stmt.len() - 1];
    let trailing_comma = stmt.len() > 2 && depth[stmt.len() - 1] == 0 && is_op(&last, src, ",");

    if is_op(next, src, ">>") {
        if stmt.len() < 3 {
            return;
        }
        let comma = (3..stmt.len()).find(|&i| depth[i] == 0 && is_op(&stmt[i], src, ","));
        let target_end = comma.map(|c| stmt[c].start).unwrap_or(last.end);
        let target = src[stmt[2].start..target_end].trim_end();
        let mut call = String::from("(");
        if let Some(c) = comma {
            let args_last = if trailing_comma && stmt.len() - 1 != c {
                stmt.len() - 2
            } else {
                stmt.len() - 1
            };
            if c < args_last {
                call.push_str(&src[stmt[c + 1].start..stmt[args_last].end]);
                if trailing_comma && stmt.len() - 1 != c {
                    call.push_str(", end=' '");
                }
                call.push_str(", ");
            }
        }
        call.push_str("file=");
        call.push_str(target);
        call.push(')');
        edits.push(Edit {
            start: kw.end,
            end: last.end,
            text: call,
        });
        return;
    }

    edits.push(Edit {
        start: kw.end,
        end: next.start,
        text: "(".into(),
    });
    if trailing_comma {
        edits.push(Edit::replace(&last, ", end=' ')"));
    } else {
        edits.push(Edit::insert(last.end, ")"));
    }
}

fn exec_edits(src: &str, stmt: &[Token], depth: &[i32], edits: &mut Vec<Edit>) {
    let Some(next) = stmt.get(1) else { return };
    if continues_expression(next, src) {
        return;
    }
    let kw = &stmt[0];
    edits.push(Edit {
        start: kw.end,
        end: next.start,
        text: "(".into(),
    });
    if let Some(i) = (2..stmt.len()).find(|&i| depth[i] == 0 && is_name(&stmt[i], src, "in")) {
        edits.push(Edit {
            start: stmt[i - 1].end,
            end: stmt[i].end,
            text: ",".into(),
        });
    }
    edits.push(Edit::insert(stmt[stmt.len() - 1].end, ")"));
}

fn statement_edits(src: &str, lines: &[Vec<Token>]) -> Vec<Edit> {
    let mut edits = Vec::new();
    for line in lines {
        for range in statements(line, src) {
            let stmt = &line[range];
            let depth = depths(stmt, src);
            if is_name(&stmt[0], src, "print") {
                print_edits(src, stmt, &depth, &mut edits);
            } else if is_name(&stmt[0], src, "exec") {
                exec_edits(src, stmt, &depth, &mut edits);
            }
        }
    }
    edits
}

fn rewrite(source: &str) -> Result<String, LegacyFailure> {
    let lines = logical_lines(source).map_err(|e| LegacyFailure::Untokenizable(e.0))?;
    let local = token_local_edits(source, &lines);
    let mut changed = !local.is_empty();
    let pass1 = apply(source, local);

    let lines = logical_lines(&pass1).map_err(|e| LegacyFailure::Untokenizable(e.0))?;
    let stmt = statement_edits(&pass1, &lines);
    changed |= !stmt.is_empty();
    if !changed {
        return Err(LegacyFailure::NothingToRewrite);
    }
    Ok(apply(&pass1, stmt))
}

/// Applies the rewrite set; succeeds only when the result parses under the
/// strict grammar.
pub fn legacy_transform(source: &str) -> Result<String, LegacyFailure> {
    let rewritten = rewrite(source)?;
    strict_parse(&rewritten, ExtractionStage::LegacyTransform)
        .map_err(|e| LegacyFailure::StillInvalid(e.0))?;
    Ok(rewritten)
}

pub(crate) fn transform_and_parse(source: &str) -> Result<Vec<ImportStatement>, LegacyFailure> {
    let rewritten = rewrite(source)?;
    strict_parse(&rewritten, ExtractionStage::LegacyTransform)
        .map_err(|e| LegacyFailure::StillInvalid(e.0))
}
