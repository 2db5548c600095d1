//! Minimal Python 2/3 tokenizer used by the legacy rewrite stage. It only
//! needs token boundaries, string/comment exclusion and logical-line
//! grouping; it does not validate anything else.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Name,
    Number,
    Str,
    Op,
    Backtick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Token {
    pub kind: Kind,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn text<'s>(&self, src: &'s str) -> &'s str {
        &src[self.start..self.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LexError(pub String);

const THREE_CHAR_OPS: [&str; 5] = ["**=", "//=", ">>=", "<<=", "..."];
const TWO_CHAR_OPS: [&str; 20] = [
    "<>", "!=", "==", "<=", ">=", "->", "**", "//", "<<", ">>", "+=", "-=", "*=", "/=", "%=", "&=",
    "|=", "^=", "@=", ":=",
];

fn is_string_prefix(s: &str) -> bool {
    s.len() <= 2
        && s.chars()
            .all(|c| matches!(c.to_ascii_lowercase(), 'r' | 'b' | 'u' | 'f'))
}

/// Splits `src` into logical lines of tokens (comments dropped).
pub(crate) fn logical_lines(src: &str) -> Result<Vec<Vec<Token>>, LexError> {
    let bytes = src.as_bytes();
    let mut lines = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    let mut depth: i32 = 0;
    let mut i = 0;

    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\x0c' | b'\r' => i += 1,
            b'\n' => {
                if depth <= 0 && !current.is_empty() {
                    lines.push(std::mem::take(&mut current));
                }
                i += 1;
            }
            b'\\' if matches!(bytes.get(i + 1), Some(b'\n')) => i += 2,
            b'\\' if bytes.get(i + 1) == Some(&b'\r') && bytes.get(i + 2) == Some(&b'\n') => i += 3,
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'"' | b'\'' => {
                let end = scan_string(bytes, i)?;
                current.push(Token {
                    kind: Kind::Str,
                    start: i,
                    end,
                });
                i = end;
            }
            b'`' => {
                current.push(Token {
                    kind: Kind::Backtick,
                    start: i,
                    end: i + 1,
                });
                i += 1;
            }
            b'0'..=b'9' => {
                let end = scan_number(bytes, i);
                current.push(Token {
                    kind: Kind::Number,
                    start: i,
                    end,
                });
                i = end;
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let end = scan_number(bytes, i);
                current.push(Token {
                    kind: Kind::Number,
                    start: i,
                    end,
                });
                i = end;
            }
            _ if c == b'_' || c.is_ascii_alphabetic() || c >= 0x80 => {
                let start = i;
                let rest = &src[i..];
                let len: usize = rest
                    .char_indices()
                    .find(|(_, ch)| !(ch.is_alphanumeric() || *ch == '_'))
                    .map(|(j, _)| j)
                    .unwrap_or(rest.len());
                if len == 0 {
                    // A non-identifier Unicode character; step over it whole.
                    let w = rest.chars().next().map(char::len_utf8).unwrap_or(1);
                    current.push(Token {
                        kind: Kind::Op,
                        start,
                        end: start + w,
                    });
                    i += w;
                    continue;
                }
                i += len;
                if is_string_prefix(&src[start..i]) && matches!(bytes.get(i), Some(b'"' | b'\'')) {
                    let end = scan_string(bytes, i)?;
                    current.push(Token {
                        kind: Kind::Str,
                        start,
                        end,
                    });
                    i = end;
                } else {
                    current.push(Token {
                        kind: Kind::Name,
                        start,
                        end: i,
                    });
                }
            }
            _ => {
                let rest = &src[i..];
                let len = if THREE_CHAR_OPS.iter().any(|op| rest.starts_with(op)) {
                    3
                } else if TWO_CHAR_OPS.iter().any(|op| rest.starts_with(op)) {
                    2
                } else {
                    1
                };
                match c {
                    b'(' | b'[' | b'{' => depth += 1,
                    b')' | b']' | b'}' => depth -= 1,
                    _ => {}
                }
                current.push(Token {
                    kind: Kind::Op,
                    start: i,
                    end: i + len,
                });
                i += len;
            }
        }
    }
    if !current.is_empty() {
        lines.push(current);
    }
    Ok(lines)
}

fn scan_string(bytes: &[u8], open: usize) -> Result<usize, LexError> {
    let quote = bytes[open];
    let triple = bytes.get(open + 1) == Some(&quote) && bytes.get(open + 2) == Some(&quote);
    let mut i = open + if triple { 3 } else { 1 };
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\\' {
            i += 2;
            continue;
        }
        if triple {
            if b == quote && bytes.get(i + 1) == Some(&quote) && bytes.get(i + 2) == Some(&quote) {
                return Ok(i + 3);
            }
        } else if b == quote {
            return Ok(i + 1);
        } else if b == b'\n' {
            break;
        }
        i += 1;
    }
    Err(LexError(format!(
        "unterminated string starting at byte {open}"
    )))
}

fn scan_number(bytes: &[u8], start: usize) -> usize {
    let mut i = start;
    while i < bytes.len() {
        let b = bytes[i];
        let exp_sign = (b == b'+' || b == b'-')
            && i > start
            && matches!(bytes[i - 1], b'e' | b'E')
            && !bytes[start..i].iter().any(|c| matches!(c, b'x' | b'X'));
        if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' || exp_sign {
            i += 1;
        } else {
            break;
        }
    }
    i
}
