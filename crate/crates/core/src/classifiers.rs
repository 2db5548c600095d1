//! Trove classifier labels (`A :: B :: C`) and prefix/depth tallies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::stats::FrequencyTable;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifierError {
    #[error("malformed classifier {0:?}: empty segment")]
    Malformed(String),
    #[error("group depth {group_depth} must exceed prefix length {prefix_len}")]
    Depth {
        group_depth: usize,
        prefix_len: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassifierLabel {
    pub raw: String,
    pub segments: Vec<String>,
}

impl ClassifierLabel {
    pub fn category(&self) -> &str {
        &self.segments[0]
    }

    pub fn depth(&self) -> usize {
        self.segments.len()
    }

    pub fn joined(&self) -> String {
        self.segments.join(" :: ")
    }

    pub fn starts_with<S: AsRef<str>>(&self, prefix: &[S]) -> bool {
        prefix.len() <= self.segments.len()
            && prefix
                .iter()
                .zip(&self.segments)
                .all(|(p, s)| p.as_ref() == s)
    }
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn parse_classifier(raw: &str) -> Result<ClassifierLabel, ClassifierError> {
    let segments: Vec<String> = raw.split("::").map(collapse).collect();
    if segments.iter().any(String::is_empty) {
        return Err(ClassifierError::Malformed(raw.to_string()));
    }
    Ok(ClassifierLabel {
        raw: raw.to_string(),
        segments,
    })
}

/// How labels deeper than `group_depth` are keyed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    /// Key on the segments between the prefix and `group_depth`; shallower
    /// labels are skipped.
    #[default]
    ExactDepth,
    /// Key on the whole remainder after the prefix, joined with " :: ",
    /// for every label at least `group_depth` deep.
    Leaf,
}

/// Counts labels under `prefix`, grouped by the segments after it.
pub fn tally<S: AsRef<str>>(
    labels: &[ClassifierLabel],
    prefix: &[S],
    group_depth: usize,
    grouping: Grouping,
) -> Result<FrequencyTable, ClassifierError> {
    if group_depth <= prefix.len() {
        return Err(ClassifierError::Depth {
            group_depth,
            prefix_len: prefix.len(),
        });
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for label in labels {
        if !label.starts_with(prefix) || label.depth() < group_depth {
            continue;
        }
        let end = match grouping {
            Grouping::ExactDepth => group_depth,
            Grouping::Leaf => label.depth(),
        };
        *counts
            .entry(label.segments[prefix.len()..end].join(" :: "))
            .or_default() += 1;
    }
    Ok(FrequencyTable::from_counts(counts))
}
