use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::FrequencyTable;
use crate::imports::ImportString;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportKey {
    TopLevel,
    FullPath,
}

/// One import statement occurrence tagged with where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImportOccurrence {
    pub package: String,
    /// UTC year of the release's upload; `None` for untimed releases.
    pub year: Option<i32>,
    pub import: ImportString,
}

fn key_of(imp: &ImportString, key: ImportKey) -> &str {
    match key {
        ImportKey::TopLevel => &imp.top_level,
        ImportKey::FullPath => &imp.value,
    }
}

/// Every occurrence counts, across files and releases.
pub fn import_frequency<'a>(
    imports: impl IntoIterator<Item = &'a ImportString>,
    key: ImportKey,
) -> FrequencyTable {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for imp in imports {
        *counts.entry(key_of(imp, key)).or_default() += 1;
    }
    FrequencyTable::from_counts(counts)
}

pub fn imports_by_year<'a>(
    occurrences: impl IntoIterator<Item = &'a ImportOccurrence>,
) -> BTreeMap<i32, u64> {
    let mut out = BTreeMap::new();
    for occ in occurrences {
        if let Some(y) = occ.year {
            *out.entry(y).or_default() += 1;
        }
    }
    out
}

/// Distinct packages importing `top_level` in releases of each year.
pub fn unique_importing_packages_by_year<'a>(
    occurrences: impl IntoIterator<Item = &'a ImportOccurrence>,
    top_level: &str,
) -> BTreeMap<i32, u64> {
    let mut seen: BTreeMap<i32, BTreeSet<&str>> = BTreeMap::new();
    for occ in occurrences {
        if let (Some(y), true) = (occ.year, occ.import.top_level == top_level) {
            seen.entry(y).or_default().insert(&occ.package);
        }
    }
    seen.into_iter().map(|(y, s)| (y, s.len() as u64)).collect()
}

/// Mergeable import counts for sharded aggregation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImportTally {
    pub top_level: BTreeMap<String, u64>,
    pub full_path: BTreeMap<String, u64>,
    pub by_year: BTreeMap<i32, u64>,
    importers: BTreeMap<(String, i32), BTreeSet<String>>,
}

impl ImportTally {
    pub fn add(&mut self, occ: &ImportOccurrence) {
        *self
            .top_level
            .entry(occ.import.top_level.clone())
            .or_default() += 1;
        *self.full_path.entry(occ.import.value.clone()).or_default() += 1;
        if let Some(y) = occ.year {
            *self.by_year.entry(y).or_default() += 1;
            self.importers
                .entry((occ.import.top_level.clone(), y))
                .or_default()
                .insert(occ.package.clone());
        }
    }

    pub fn merge(&mut self, other: ImportTally) {
        for (k, c) in other.top_level {
            *self.top_level.entry(k).or_default() += c;
        }
        for (k, c) in other.full_path {
            *self.full_path.entry(k).or_default() += c;
        }
        for (y, c) in other.by_year {
            *self.by_year.entry(y).or_default() += c;
        }
        for (k, pkgs) in other.importers {
            self.importers.entry(k).or_default().extend(pkgs);
        }
    }

    pub fn frequency(&self, key: ImportKey) -> FrequencyTable {
        let m = match key {
            ImportKey::TopLevel => &self.top_level,
            ImportKey::FullPath => &self.full_path,
        };
        FrequencyTable::from_counts(m.iter().map(|(k, c)| (k.as_str(), *c)))
    }

    pub fn unique_importers(&self, top_level: &str) -> BTreeMap<i32, u64> {
        self.importers
            .iter()
            .filter(|((t, _), _)| t == top_level)
            .map(|((_, y), s)| (*y, s.len() as u64))
            .collect()
    }
}
