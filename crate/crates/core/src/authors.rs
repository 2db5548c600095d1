//! Author-string heuristics: multi-author and organization flags, plus the
//! identity key used for per-author statistics.

use std::path::Path;

use serde::{Deserialize, Serialize};

pub const DEFAULT_AUTHOR_LISTS: &str = include_str!("../data/author_lists.txt");

#[derive(Debug, thiserror::Error)]
pub enum AuthorListError {
    #[error("author list line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("reading author lists {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorRecord {
    pub key: String,
    pub raw: String,
    pub is_multiple: bool,
    pub is_organization: bool,
}

/// Trimmed, whitespace-collapsed, case-folded author string.
pub fn author_key(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte offsets of `needle` in `hay` that sit on word boundaries.
fn bounded_matches<'a>(hay: &'a str, needle: &'a str) -> impl Iterator<Item = usize> + 'a {
    hay.match_indices(needle).filter_map(move |(i, _)| {
        let before = hay[..i].chars().next_back();
        let after = hay[i + needle.len()..].chars().next();
        let ok = before.is_none_or(|c| !is_word_char(c)) && after.is_none_or(|c| !is_word_char(c));
        ok.then_some(i)
    })
}

/// Comma, a space-delimited " and ", or "et al".
pub fn is_multiple_authors(raw: &str) -> bool {
    if raw.contains(',') {
        return true;
    }
    let spaced: Vec<&str> = raw.split_whitespace().collect();
    if spaced.windows(3).any(|w| w[1] == "and") {
        return true;
    }
    bounded_matches(raw, "et al").next().is_some()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthorLists {
    pub abbreviations: Vec<String>,
    pub tokens: Vec<String>,
}

impl Default for AuthorLists {
    fn default() -> Self {
        Self::parse(DEFAULT_AUTHOR_LISTS).expect("shipped author lists are valid")
    }
}

impl AuthorLists {
    pub fn load(path: &Path) -> Result<Self, AuthorListError> {
        let text = std::fs::read_to_string(path).map_err(|source| AuthorListError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, AuthorListError> {
        let mut lists = Self {
            abbreviations: Vec::new(),
            tokens: Vec::new(),
        };
        let mut section: Option<bool> = None;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[abbreviations]" => section = Some(true),
                "[tokens]" => section = Some(false),
                word => {
                    if word.chars().any(|c| !is_word_char(c)) {
                        return Err(AuthorListError::Syntax {
                            line: idx + 1,
                            reason: format!("{word:?} is not a single word"),
                        });
                    }
                    match section {
                        Some(true) => lists.abbreviations.push(word.to_string()),
                        Some(false) => lists.tokens.push(word.to_lowercase()),
                        None => {
                            return Err(AuthorListError::Syntax {
                                line: idx + 1,
                                reason: "entry before any [section]".into(),
                            })
                        }
                    }
                }
            }
        }
        Ok(lists)
    }

    pub fn is_organization(&self, raw: &str) -> bool {
        if self
            .abbreviations
            .iter()
            .any(|a| bounded_matches(raw, a).next().is_some())
        {
            return true;
        }
        let lower = raw.to_lowercase();
        self.tokens
            .iter()
            .any(|t| bounded_matches(&lower, t).next().is_some())
    }

    pub fn classify(&self, raw: &str) -> AuthorRecord {
        AuthorRecord {
            key: author_key(raw),
            raw: raw.to_string(),
            is_multiple: is_multiple_authors(raw),
            is_organization: self.is_organization(raw),
        }
    }
}

/// Organization check against the shipped lists.
pub fn is_organization(raw: &str) -> bool {
    AuthorLists::default().is_organization(raw)
}
