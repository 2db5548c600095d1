use std::collections::{BTreeMap, BTreeSet};

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::authors::author_key;
use crate::registry::PackageRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearlyActivity {
    pub year: i32,
    pub new_packages: u64,
    pub active_packages: u64,
    pub new_releases: u64,
    pub new_authors: u64,
}

/// Partial yearly counts over a shard of packages. Shards must hold
/// disjoint packages; merging is commutative and associative.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActivityTally {
    new_packages: BTreeMap<i32, u64>,
    active_packages: BTreeMap<i32, u64>,
    new_releases: BTreeMap<i32, u64>,
    author_first_year: BTreeMap<String, i32>,
}

impl ActivityTally {
    pub fn add(&mut self, pkg: &PackageRecord) {
        let years: Vec<i32> = pkg
            .releases
            .iter()
            .filter_map(|r| r.upload_time)
            .map(|t| t.year())
            .collect();
        let Some(&first) = years.iter().min() else {
            return;
        };
        *self.new_packages.entry(first).or_default() += 1;
        for y in years.iter().collect::<BTreeSet<_>>() {
            *self.active_packages.entry(*y).or_default() += 1;
        }
        for y in &years {
            *self.new_releases.entry(*y).or_default() += 1;
        }
        if let Some(key) = pkg
            .author
            .as_deref()
            .map(author_key)
            .filter(|k| !k.is_empty())
        {
            let slot = self.author_first_year.entry(key).or_insert(first);
            *slot = (*slot).min(first);
        }
    }

    pub fn merge(&mut self, other: ActivityTally) {
        for (dst, src) in [
            (&mut self.new_packages, other.new_packages),
            (&mut self.active_packages, other.active_packages),
            (&mut self.new_releases, other.new_releases),
        ] {
            for (y, c) in src {
                *dst.entry(y).or_default() += c;
            }
        }
        for (k, y) in other.author_first_year {
            let slot = self.author_first_year.entry(k).or_insert(y);
            *slot = (*slot).min(y);
        }
    }

    /// One row per year from the first to the last observed, gaps filled
    /// with zeros.
    pub fn finish(&self) -> Vec<YearlyActivity> {
        let mut new_authors: BTreeMap<i32, u64> = BTreeMap::new();
        for y in self.author_first_year.values() {
            *new_authors.entry(*y).or_default() += 1;
        }
        let (Some(first), Some(last)) = (
            self.active_packages.keys().next().copied(),
            self.active_packages.keys().next_back().copied(),
        ) else {
            return Vec::new();
        };
        let get = |m: &BTreeMap<i32, u64>, y| m.get(&y).copied().unwrap_or(0);
        (first..=last)
            .map(|year| YearlyActivity {
                year,
                new_packages: get(&self.new_packages, year),
                active_packages: get(&self.active_packages, year),
                new_releases: get(&self.new_releases, year),
                new_authors: get(&new_authors, year),
            })
            .collect()
    }
}

pub fn yearly_activity(packages: &[PackageRecord]) -> Vec<YearlyActivity> {
    let mut tally = ActivityTally::default();
    for p in packages {
        tally.add(p);
    }
    tally.finish()
}

/// Timestamped releases per package, for packages with at least one.
pub fn releases_per_package(packages: &[PackageRecord]) -> Vec<f64> {
    packages
        .iter()
        .map(|p| {
            p.releases
                .iter()
                .filter(|r| r.upload_time.is_some())
                .count()
        })
        .filter(|&n| n > 0)
        .map(|n| n as f64)
        .collect()
}

/// Days between consecutive timestamped releases, pooled over packages.
pub fn inter_release_gaps(packages: &[PackageRecord]) -> Vec<f64> {
    let mut out = Vec::new();
    for p in packages {
        let mut times: Vec<_> = p.releases.iter().filter_map(|r| r.upload_time).collect();
        times.sort();
        out.extend(
            times
                .windows(2)
                .map(|w| (w[1] - w[0]).num_milliseconds() as f64 / 86_400_000.0),
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeBasis {
    Release,
    Package,
}

/// KiB per release (sum of all its files) or per package (sum over
/// releases). Releases and packages without files are left out.
pub fn size_series(packages: &[PackageRecord], by: SizeBasis) -> Vec<f64> {
    let kib = |bytes: u64| bytes as f64 / 1024.0;
    match by {
        SizeBasis::Release => packages
            .iter()
            .flat_map(|p| &p.releases)
            .filter(|r| !r.files.is_empty())
            .map(|r| kib(r.size_bytes()))
            .collect(),
        SizeBasis::Package => packages
            .iter()
            .filter(|p| p.releases.iter().any(|r| !r.files.is_empty()))
            .map(|p| kib(p.releases.iter().map(|r| r.size_bytes()).sum()))
            .collect(),
    }
}
