//! Report tables computed from a populated store.

mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::authors::{author_key, AuthorLists, AuthorRecord};
use crate::classifiers::{parse_classifier, tally, ClassifierLabel, Grouping};
use crate::imports::to_import_string;
use crate::license::LicenseAssignment;
use crate::registry::PackageRecord;
use crate::stats::{
    cagr_between, distribution_summary, gini, inter_release_gaps, releases_per_package,
    size_series, ActivityTally, CagrConvention, FrequencyTable, ImportKey, ImportOccurrence,
    ImportTally, SizeBasis, YearlyActivity,
};
use crate::store::{Store, StoreError, StoredImport};

pub use table::{OutputFormat, Table, Value};

/// Subtopic tables grouped to the leaf label.
pub const SUBTOPICS: [(&str, &str); 2] = [
    ("Topic", "Software Development"),
    ("Topic", "Scientific/Engineering"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub cagr_convention: CagrConvention,
    /// CAGR endpoints; defaults to the first and last observed years.
    pub cagr_years: Option<(i32, i32)>,
    /// Top-level imports given a unique-importer series.
    pub top_importers: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            cagr_convention: CagrConvention::Inclusive,
            cagr_years: None,
            top_importers: 20,
        }
    }
}

/// Everything the report pass reads from the store.
#[derive(Debug, Clone, Default)]
pub struct ReportInput {
    pub packages: Vec<PackageRecord>,
    pub imports: Vec<StoredImport>,
    pub licenses: Vec<(String, LicenseAssignment)>,
    pub authors: Vec<(String, AuthorRecord)>,
}

impl ReportInput {
    pub fn load(store: &Store) -> Result<Self, StoreError> {
        Ok(Self {
            packages: store.load_packages()?,
            imports: store.load_imports()?,
            licenses: store.load_licenses()?,
            authors: store.load_authors()?,
        })
    }
}

/// Provenance written next to the report tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub corpus_id: String,
    pub tool_version: String,
    pub grammar_version: String,
    pub ruleset_version: String,
    pub author_lists_digest: String,
    pub cagr_convention: CagrConvention,
    pub cagr_years: Option<(i32, i32)>,
    pub store_counts: BTreeMap<String, u64>,
    pub source_files_by_stage: BTreeMap<String, u64>,
    pub malformed_classifiers: u64,
    pub tables: Vec<String>,
}

pub fn author_lists_digest(lists: &AuthorLists) -> String {
    let text = format!(
        "{}\n--\n{}",
        lists.abbreviations.join("\n"),
        lists.tokens.join("\n")
    );
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

/// Lowercase ASCII slug for file names.
pub fn slug(raw: &str) -> String {
    let mut out = String::new();
    for c in raw.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    out.trim_end_matches('_').to_string()
}

fn frequency_table(name: &str, key_column: &str, freq: &FrequencyTable) -> Table {
    let mut t = Table::new(name, &[key_column, "count", "proportion"]);
    for r in &freq.rows {
        t.push(vec![
            r.key.as_str().into(),
            r.count.into(),
            r.proportion.into(),
        ]);
    }
    t
}

fn summary_table(name: &str, series: &[(&str, &[f64])]) -> Table {
    let mut columns = vec!["statistic"];
    columns.extend(series.iter().map(|(n, _)| *n));
    let mut t = Table::new(name, &columns);
    let summaries: Vec<_> = series
        .iter()
        .map(|(_, v)| distribution_summary(v).ok())
        .collect();
    type Pick = fn(&crate::stats::DistributionSummary) -> Value;
    let stats: [(&str, Pick); 8] = [
        ("n", |s| s.n.into()),
        ("mean", |s| s.mean.into()),
        ("std", |s| s.std.into()),
        ("min", |s| s.min.into()),
        ("p25", |s| s.p25.into()),
        ("p50", |s| s.p50.into()),
        ("p75", |s| s.p75.into()),
        ("max", |s| s.max.into()),
    ];
    for (label, pick) in stats {
        let mut row = vec![Value::from(label)];
        for s in &summaries {
            row.push(match s {
                Some(s) => pick(s),
                None if label == "n" => Value::Int(0),
                None => Value::Null,
            });
        }
        t.push(row);
    }
    t
}

fn activity(packages: &[PackageRecord]) -> Vec<YearlyActivity> {
    packages
        .par_iter()
        .fold(ActivityTally::default, |mut t, p| {
            t.add(p);
            t
        })
        .reduce(ActivityTally::default, |mut a, b| {
            a.merge(b);
            a
        })
        .finish()
}

fn occurrences(imports: &[StoredImport]) -> Vec<ImportOccurrence> {
    imports
        .iter()
        .flat_map(|i| {
            to_import_string(&i.statement)
                .into_iter()
                .map(|import| ImportOccurrence {
                    package: i.package.clone(),
                    year: i.year,
                    import,
                })
        })
        .collect()
}

fn import_tally(occs: &[ImportOccurrence]) -> ImportTally {
    occs.par_iter()
        .fold(ImportTally::default, |mut t, o| {
            t.add(o);
            t
        })
        .reduce(ImportTally::default, |mut a, b| {
            a.merge(b);
            a
        })
}

struct AuthorSeries {
    packages: Vec<f64>,
    releases: Vec<f64>,
}

fn author_series(packages: &[PackageRecord]) -> AuthorSeries {
    let mut by_author: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for p in packages {
        let Some(key) = p
            .author
            .as_deref()
            .map(author_key)
            .filter(|k| !k.is_empty())
        else {
            continue;
        };
        let e = by_author.entry(key).or_default();
        e.0 += 1;
        e.1 += p
            .releases
            .iter()
            .filter(|r| r.upload_time.is_some())
            .count() as u64;
    }
    AuthorSeries {
        packages: by_author.values().map(|(p, _)| *p as f64).collect(),
        releases: by_author.values().map(|(_, r)| *r as f64).collect(),
    }
}

fn author_types(authors: &[(String, AuthorRecord)]) -> Table {
    // A key carries a flag when any of its spellings does.
    let mut keys: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
    for (_, a) in authors {
        let e = keys.entry(&a.key).or_default();
        e.0 |= a.is_organization;
        e.1 |= a.is_multiple;
    }
    let share = |n: usize, d: usize| {
        if d == 0 {
            Value::Null
        } else {
            Value::Float(n as f64 / d as f64)
        }
    };
    let mut t = Table::new(
        "author_types",
        &[
            "type",
            "author_strings",
            "author_string_share",
            "packages",
            "package_share",
        ],
    );
    let key_org = keys.values().filter(|f| f.0).count();
    let key_multi = keys.values().filter(|f| f.1).count();
    let pkg_org = authors.iter().filter(|(_, a)| a.is_organization).count();
    let pkg_multi = authors.iter().filter(|(_, a)| a.is_multiple).count();
    for (label, k, p) in [
        ("organization", key_org, pkg_org),
        ("multiple_authors", key_multi, pkg_multi),
    ] {
        t.push(vec![
            label.into(),
            k.into(),
            share(k, keys.len()),
            p.into(),
            share(p, authors.len()),
        ]);
    }
    t
}

fn cagr_table(
    activity: &[YearlyActivity],
    by_year: &BTreeMap<i32, u64>,
    opts: &ReportOptions,
) -> Table {
    let mut t = Table::new(
        "cagr",
        &[
            "measure",
            "start_year",
            "end_year",
            "v_start",
            "v_end",
            "n_years",
            "rate",
        ],
    );
    let endpoints = opts
        .cagr_years
        .or_else(|| Some((activity.first()?.year, activity.last()?.year)));
    let Some((y0, y1)) = endpoints else {
        return t;
    };
    let row = |y: i32| activity.iter().find(|a| a.year == y);
    type Measure = fn(&YearlyActivity) -> u64;
    let measures: [(&str, Measure); 4] = [
        ("new_packages", |a| a.new_packages),
        ("active_packages", |a| a.active_packages),
        ("new_releases", |a| a.new_releases),
        ("new_authors", |a| a.new_authors),
    ];
    let mut series: Vec<(&str, u64, u64)> = measures
        .iter()
        .map(|(name, f)| (*name, row(y0).map_or(0, f), row(y1).map_or(0, f)))
        .collect();
    let imp = |y| by_year.get(&y).copied().unwrap_or(0);
    series.push(("imports", imp(y0), imp(y1)));
    for (measure, v0, v1) in series {
        let g = cagr_between(
            measure,
            (y0, v0 as f64),
            (y1, v1 as f64),
            opts.cagr_convention,
        );
        t.push(vec![
            measure.into(),
            y0.into(),
            y1.into(),
            v0.into(),
            v1.into(),
            opts.cagr_convention.years(y0, y1).into(),
            g.ok().map(|g| g.rate).into(),
        ]);
    }
    t
}

fn license_tables(licenses: &[(String, LicenseAssignment)]) -> [Table; 3] {
    let families =
        FrequencyTable::from_counts(licenses.iter().map(|(_, a)| (a.family.report_label(), 1)));
    let gpl = FrequencyTable::from_counts(
        licenses
            .iter()
            .filter(|(_, a)| a.family.is_gpl_family())
            .map(|(_, a)| (format!("{} {}", a.name, a.version.as_str()), 1)),
    );
    let sources = FrequencyTable::from_counts(licenses.iter().map(|(_, a)| (a.source.as_str(), 1)));
    [
        frequency_table("license_families", "family", &families),
        frequency_table("gpl_versions", "license", &gpl),
        frequency_table("license_sources", "source", &sources),
    ]
}

fn classifier_tables(packages: &[PackageRecord]) -> (Vec<Table>, u64) {
    let mut labels: Vec<ClassifierLabel> = Vec::new();
    let mut malformed = 0u64;
    for raw in packages.iter().flat_map(|p| &p.classifiers) {
        match parse_classifier(raw) {
            Ok(l) => labels.push(l),
            Err(_) => malformed += 1,
        }
    }
    let categories: BTreeSet<&str> = labels.iter().map(ClassifierLabel::category).collect();
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    for category in categories {
        let name = format!("classifiers_{}", slug(category));
        if !names.insert(name.clone()) {
            tracing::warn!(
                category,
                "classifier category collides with another after slugging"
            );
            continue;
        }
        let freq =
            tally(&labels, &[category], 2, Grouping::ExactDepth).expect("depth 2 exceeds prefix 1");
        out.push(frequency_table(&name, "classifier", &freq));
    }
    for (a, b) in SUBTOPICS {
        let freq = tally(&labels, &[a, b], 3, Grouping::Leaf).expect("depth 3 exceeds prefix 2");
        out.push(frequency_table(
            &format!("classifiers_{}_{}", slug(a), slug(b)),
            "classifier",
            &freq,
        ));
    }
    (out, malformed)
}

/// Every report table, in a fixed order, plus the malformed-label count.
pub fn build_reports(input: &ReportInput, opts: &ReportOptions) -> (Vec<Table>, u64) {
    let mut tables = Vec::new();
    let act = activity(&input.packages);

    let mut yearly = Table::new(
        "yearly_activity",
        &[
            "year",
            "new_packages",
            "active_packages",
            "new_releases",
            "new_authors",
        ],
    );
    for a in &act {
        yearly.push(vec![
            a.year.into(),
            a.new_packages.into(),
            a.active_packages.into(),
            a.new_releases.into(),
            a.new_authors.into(),
        ]);
    }
    tables.push(yearly);

    let occs = occurrences(&input.imports);
    let imports = import_tally(&occs);
    tables.push(cagr_table(&act, &imports.by_year, opts));

    let rpp = releases_per_package(&input.packages);
    let gaps = inter_release_gaps(&input.packages);
    let authors = author_series(&input.packages);
    let rel_kib = size_series(&input.packages, SizeBasis::Release);
    let pkg_kib = size_series(&input.packages, SizeBasis::Package);

    let mut g = Table::new("gini", &["series", "n", "gini"]);
    for (name, series) in [
        ("releases_per_package", &rpp),
        ("packages_per_author", &authors.packages),
        ("releases_per_author", &authors.releases),
        ("package_size_kib", &pkg_kib),
    ] {
        g.push(vec![
            name.into(),
            series.len().into(),
            gini(series).ok().into(),
        ]);
    }
    tables.push(g);

    tables.push(summary_table(
        "releases_per_package",
        &[
            ("releases_per_package", &rpp),
            ("days_between_releases", &gaps),
        ],
    ));
    tables.push(summary_table(
        "per_author",
        &[
            ("packages_per_author", &authors.packages),
            ("releases_per_author", &authors.releases),
        ],
    ));
    tables.push(author_types(&input.authors));
    tables.push(summary_table(
        "sizes",
        &[("release_kib", &rel_kib), ("package_kib", &pkg_kib)],
    ));
    tables.extend(license_tables(&input.licenses));

    let (classifiers, malformed) = classifier_tables(&input.packages);
    tables.extend(classifiers);

    let mut by_year = Table::new("imports_by_year", &["year", "imports"]);
    for (y, c) in &imports.by_year {
        by_year.push(vec![(*y).into(), (*c).into()]);
    }
    tables.push(by_year);
    let top = imports.frequency(ImportKey::TopLevel);
    tables.push(frequency_table("imports_top_level", "top_level", &top));
    tables.push(frequency_table(
        "imports_full_path",
        "import_string",
        &imports.frequency(ImportKey::FullPath),
    ));

    let mut unique = Table::new("unique_importers", &["top_level", "year", "packages"]);
    let years: Vec<i32> = imports.by_year.keys().copied().collect();
    for row in top.top(opts.top_importers).rows {
        let series = imports.unique_importers(&row.key);
        if let (Some(&first), Some(&last)) = (years.first(), years.last()) {
            for y in first..=last {
                unique.push(vec![
                    row.key.as_str().into(),
                    y.into(),
                    series.get(&y).copied().unwrap_or(0).into(),
                ]);
            }
        }
    }
    tables.push(unique);
    (tables, malformed)
}

/// Writes each table as `<name>.<ext>` plus `run_metadata.json`.
pub fn write_reports(
    dir: &Path,
    tables: &[Table],
    meta: &RunMetadata,
    format: OutputFormat,
) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(tables.len() + 1);
    for t in tables {
        let path = dir.join(format!("{}.{}", t.name, format.extension()));
        std::fs::write(&path, t.render(format))?;
        written.push(path);
    }
    let path = dir.join("run_metadata.json");
    let mut text = serde_json::to_string_pretty(meta).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}
