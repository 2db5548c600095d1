use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub key: String,
    pub count: u64,
    pub proportion: f64,
}

/// Rows sorted by count descending, then key ascending.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub rows: Vec<FrequencyRow>,
    pub total: u64,
}

impl FrequencyTable {
    pub fn from_counts<K: Into<String>>(counts: impl IntoIterator<Item = (K, u64)>) -> Self {
        let mut merged: BTreeMap<String, u64> = BTreeMap::new();
        for (k, c) in counts {
            *merged.entry(k.into()).or_default() += c;
        }
        let total: u64 = merged.values().sum();
        let mut rows: Vec<FrequencyRow> = merged
            .into_iter()
            .filter(|(_, c)| *c > 0)
            .map(|(key, count)| FrequencyRow {
                key,
                count,
                proportion: count as f64 / total as f64,
            })
            .collect();
        rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
        Self { rows, total }
    }

    /// First `k` rows; `total` and proportions still refer to the full table.
    pub fn top(&self, k: usize) -> Self {
        Self {
            rows: self.rows.iter().take(k).cloned().collect(),
            total: self.total,
        }
    }

    pub fn get(&self, key: &str) -> Option<&FrequencyRow> {
        self.rows.iter().find(|r| r.key == key)
    }

    pub fn proportion_sum(&self) -> f64 {
        self.rows.iter().map(|r| r.proportion).sum()
    }
}
