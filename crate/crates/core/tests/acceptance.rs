//! One pass/fail line per acceptance criterion, then a single assertion.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pypi_census::archive::{decode_source, detect_format};
use pypi_census::classifiers::{parse_classifier, tally, Grouping};
use pypi_census::imports::{extract_imports, ExtractionStage, ImportStatement};
use pypi_census::license::{
    resolve_package_license, LicenseAssignment, LicenseFamily, LicenseFileSource, LicenseRuleSet,
    LicenseSource, LicenseVersion,
};
use pypi_census::registry::{
    normalize_package_name, MetadataOutcome, PackageRecord, RegistryClient, RegistrySource,
};
use pypi_census::stats::{cagr, distribution_summary, gini, inter_release_gaps, FrequencyTable};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fixture_packages() -> (RegistryClient, Vec<PackageRecord>, tempfile::TempDir) {
    let cache = tempfile::tempdir().unwrap();
    let client = RegistryClient::new(RegistrySource::fixture(
        fixtures().join("registry"),
        cache.path(),
    ))
    .unwrap();
    let names: std::collections::BTreeSet<String> = client
        .fetch_package_index()
        .unwrap()
        .iter()
        .map(|n| normalize_package_name(n).unwrap())
        .collect();
    let records = names
        .iter()
        .filter_map(|n| match client.fetch_package_metadata(n).unwrap() {
            MetadataOutcome::Found(r) => Some(r),
            MetadataOutcome::Gone => None,
        })
        .collect();
    (client, records, cache)
}

fn criterion_1() -> Outcome {
    // 2006 and 2018 rows of the yearly table, and the published rates.
    let rows = [
        ("new packages", 367.0, 39351.0, 43.28),
        ("active packages", 420.0, 64628.0, 47.31),
        ("new releases", 2324.0, 502029.0, 51.21),
        ("new authors", 216.0, 16064.0, 39.30),
    ];
    let mut worst = 0.0f64;
    for (label, a, b, published) in rows {
        let pct = cagr(a, b, 13).map_err(|e| e.to_string())? * 100.0;
        let diff = (pct - published).abs();
        worst = worst.max(diff);
        check(diff <= 0.005, || {
            format!("{label}: {pct:.4}% vs {published}%")
        })?;
    }
    let imports = cagr(91_896.0, 47_745_271.0, 13).map_err(|e| e.to_string())? * 100.0;
    check((imports - 61.7).abs() <= 0.1, || {
        format!("imports: {imports:.3}%")
    })?;
    Ok(format!(
        "max deviation {worst:.5} pp; imports {imports:.3}%"
    ))
}

fn criterion_2() -> Outcome {
    let published = [
        ("MIT", 60945, 0.340566),
        ("Unknown", 48742, 0.272375),
        ("GPL", 29403, 0.164307),
        ("BSD", 20094, 0.112287),
        ("Apache", 15004, 0.083844),
        ("Public Domain", 1194, 0.006672),
        ("Zope", 1150, 0.006426),
        ("ISC", 719, 0.004018),
        ("MPL", 712, 0.003979),
        ("PSFL", 524, 0.002928),
        ("Proprietary", 190, 0.001062),
        ("CC", 178, 0.000995),
        ("CeCILL", 72, 0.000402),
        ("zlib", 25, 0.000140),
    ];
    let t = FrequencyTable::from_counts(published.iter().map(|(k, c, _)| (*k, *c as u64)));
    check(t.total == 178_952, || format!("total {}", t.total))?;
    let mut worst = 0.0f64;
    for (key, _, p) in published {
        let row = t.get(key).ok_or_else(|| format!("{key} missing"))?;
        let diff = (row.proportion - p).abs();
        worst = worst.max(diff);
        check(diff <= 1e-5, || format!("{key}: {} vs {p}", row.proportion))?;
    }
    let order: Vec<_> = t.rows.iter().map(|r| r.key.as_str()).collect();
    let expected: Vec<_> = published.iter().map(|r| r.0).collect();
    check(order == expected, || format!("row order {order:?}"))?;
    Ok(format!("total 178952, max deviation {worst:.2e}"))
}

fn brute_gini(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mut s = 0.0;
    for a in x {
        for b in x {
            s += (a - b).abs();
        }
    }
    s / (2.0 * n * n * mean)
}

fn criterion_3() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x6121);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let n = rng.gen_range(1..=50);
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.15) {
                    0.0
                } else {
                    rng.gen_range(0.0..1000.0)
                }
            })
            .collect();
        if x.iter().all(|v| *v == 0.0) {
            x[0] = 1.0;
        }
        let g = gini(&x).map_err(|e| e.to_string())?;
        let diff = (g - brute_gini(&x)).abs();
        worst = worst.max(diff);
        check(diff <= 1e-12, || {
            format!("vector {i}: {g} vs {}", brute_gini(&x))
        })?;
        let bound = (n as f64 - 1.0) / n as f64;
        check((0.0..=bound + 1e-12).contains(&g), || {
            format!("vector {i}: {g} outside [0, {bound}]")
        })?;
        let c = rng.gen_range(1e-3..1e3);
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let gs = gini(&scaled).map_err(|e| e.to_string())?;
        check((gs - g).abs() <= 1e-12, || {
            format!("vector {i}: scale {c} gives {gs} vs {g}")
        })?;
    }
    for n in 2..=10usize {
        let mut x = vec![0.0; n];
        x[n - 1] = 7.0;
        let g = gini(&x).map_err(|e| e.to_string())?;
        let want = (n as f64 - 1.0) / n as f64;
        check((g - want).abs() <= 1e-12, || {
            format!("n={n}: {g} vs {want}")
        })?;
    }
    Ok(format!("1000 vectors, max oracle deviation {worst:.2e}"))
}

fn render(s: &ImportStatement) -> String {
    let names: Vec<String> = s
        .names
        .iter()
        .map(|n| match &n.alias {
            Some(a) => format!("{} as {a}", n.name),
            None => n.name.clone(),
        })
        .collect();
    if s.is_from_import() {
        let targets = if s.is_star {
            "*".to_string()
        } else {
            names.join(", ")
        };
        format!(
            "{} from {}{} import {targets}",
            s.line,
            ".".repeat(s.relative_level as usize),
            s.module
        )
    } else {
        match &s.alias {
            Some(a) => format!("{} import {} as {a}", s.line, s.module),
            None => format!("{} import {}", s.line, s.module),
        }
    }
}

fn criterion_4() -> Outcome {
    let dir = fixtures().join("imports");
    let oracle = std::fs::read_to_string(dir.join("oracle.txt")).map_err(|e| e.to_string())?;
    let mut expected: BTreeMap<String, (ExtractionStage, Vec<String>)> = BTreeMap::new();
    let mut current = String::new();
    for line in oracle
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        if let Some(rest) = line.strip_prefix('[') {
            let (file, stage) = rest.split_once("] ").ok_or("bad oracle header")?;
            current = file.to_string();
            let stage = ExtractionStage::parse(stage).ok_or("bad stage")?;
            expected.insert(current.clone(), (stage, Vec::new()));
        } else {
            expected
                .get_mut(&current)
                .ok_or("row before header")?
                .1
                .push(line.to_string());
        }
    }
    let mut sources = Vec::new();
    for file in expected.keys() {
        let bytes = std::fs::read(dir.join(file)).map_err(|e| format!("{file}: {e}"))?;
        sources.push((file.clone(), decode_source(&bytes)));
    }
    check(sources.len() >= 30, || {
        format!("only {} files", sources.len())
    })?;
    let start = Instant::now();
    let results: Vec<_> = sources
        .iter()
        .map(|(f, s)| (f, extract_imports(s)))
        .collect();
    let elapsed = start.elapsed();
    let mut stages = BTreeMap::new();
    for (file, (stmts, stage)) in results {
        let (want_stage, want_rows) = &expected[file];
        check(stage == *want_stage, || {
            format!("{file}: stage {stage}, expected {want_stage}")
        })?;
        let got: Vec<String> = stmts.iter().map(render).collect();
        check(&got == want_rows, || format!("{file}: got {got:?}"))?;
        *stages.entry(stage.as_str()).or_insert(0) += 1;
    }
    check(stages.len() == 3, || format!("stages covered {stages:?}"))?;
    check(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("{} files {stages:?} in {elapsed:?}", sources.len()))
}

/// License files that must never be consulted.
struct Poisoned;

impl LicenseFileSource for Poisoned {
    fn repo_file(&self, _: &str, _: &str, _: &str) -> Option<Vec<u8>> {
        Some(b"GNU AFFERO GENERAL PUBLIC LICENSE Version 3".to_vec())
    }
}

fn criterion_5() -> Outcome {
    let rules = LicenseRuleSet::default_rules();
    let bsd3 = (
        LicenseFamily::BSD,
        "BSD".to_string(),
        LicenseVersion::Version("3-Clause".into()),
    );
    for raw in ["New BSD", "BSD 3", "BSD 3 Clause License"] {
        let id = rules
            .normalize(raw)
            .ok_or_else(|| format!("{raw:?} not normalized"))?;
        check(
            (id.family, id.name.clone(), id.version.clone()) == bsd3,
            || format!("{raw:?} gave {id:?}"),
        )?;
    }

    let (client, packages, _cache) = fixture_packages();
    let want: BTreeMap<&str, LicenseSource> = [
        ("acme-core", LicenseSource::MetadataField),
        ("acme-utils", LicenseSource::MetadataField),
        ("py2-legacy", LicenseSource::MetadataField),
        ("http-kit", LicenseSource::MetadataField),
        ("jdoe-tools", LicenseSource::LicenseFile),
        ("zope-widgets", LicenseSource::LicenseFile),
        ("sci-kit-lite", LicenseSource::Classifier),
        ("multi-lic", LicenseSource::Classifier),
        ("acme-empty", LicenseSource::Unknown),
    ]
    .into_iter()
    .collect();
    let mut resolved: BTreeMap<String, LicenseAssignment> = BTreeMap::new();
    for p in &packages {
        let a = resolve_package_license(p, &rules, Some(&client));
        let expect = want
            .get(p.name.as_str())
            .ok_or_else(|| format!("unexpected package {}", p.name))?;
        check(a.source == *expect, || {
            format!("{}: source {:?}", p.name, a.source)
        })?;
        resolved.insert(p.name.clone(), a);
    }
    check(resolved.len() == want.len(), || {
        format!("resolved {}", resolved.len())
    })?;
    check(resolved["multi-lic"].ambiguous, || {
        "multi-lic not ambiguous".into()
    })?;
    check(
        resolved["acme-utils"].id().version == LicenseVersion::Version("3-Clause".into()),
        || format!("acme-utils {:?}", resolved["acme-utils"]),
    )?;

    // Mutating every tier below the one that answered leaves the result alone.
    let noise = [
        "License :: OSI Approved :: GNU Affero General Public License v3",
        "License :: Public Domain",
        "License :: OSI Approved :: Mozilla Public License 2.0 (MPL 2.0)",
    ];
    let mut mutations = 0;
    for p in &packages {
        let before = &resolved[&p.name];
        let mut m = p.clone();
        m.classifiers.extend(noise.iter().map(|s| s.to_string()));
        let files: &dyn LicenseFileSource = match before.source {
            LicenseSource::MetadataField => &Poisoned,
            _ => &client,
        };
        if matches!(
            before.source,
            LicenseSource::MetadataField | LicenseSource::LicenseFile
        ) {
            let after = resolve_package_license(&m, &rules, Some(files));
            check(&after == before, || {
                format!("{}: {after:?} after mutation", p.name)
            })?;
            mutations += 1;
        }
    }
    Ok(format!(
        "{} packages, 4 tiers, {mutations} mutated, BSD aliases agree",
        resolved.len()
    ))
}

fn run_fixture(dir: &Path, jobs: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let out = dir.join("out");
    let code = pypi_census::cli::run([
        "pypi-census".to_string(),
        "--fixture".into(),
        fixtures().join("registry").display().to_string(),
        "--cache-dir".into(),
        dir.join("cache").display().to_string(),
        "--store".into(),
        dir.join("census.db").display().to_string(),
        "--jobs".into(),
        jobs.into(),
        "run".into(),
        "--out-dir".into(),
        out.display().to_string(),
    ]);
    check(code == 0, || format!("exit code {code}"))?;
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(&out).map_err(|e| e.to_string())? {
        let p = e.map_err(|e| e.to_string())?.path();
        let bytes = std::fs::read(&p).map_err(|e| e.to_string())?;
        files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), bytes);
    }
    Ok(files)
}

fn criterion_6() -> Outcome {
    let (_, packages, _cache) = fixture_packages();
    let releases: usize = packages.iter().map(|p| p.releases.len()).sum();
    let authors: std::collections::BTreeSet<_> = packages
        .iter()
        .filter_map(|p| p.author.as_deref())
        .map(pypi_census::authors::author_key)
        .filter(|k| !k.contains(" and "))
        .collect();
    let formats: std::collections::BTreeSet<_> =
        std::fs::read_dir(fixtures().join("registry/files"))
            .map_err(|e| e.to_string())?
            .filter_map(|e| {
                detect_format(&e.ok()?.file_name().to_string_lossy()).map(|f| f.extension())
            })
            .collect();
    check((8..=10).contains(&packages.len()), || {
        format!("{} packages", packages.len())
    })?;
    check((3..=4).contains(&authors.len()), || {
        format!("authors {authors:?}")
    })?;
    check((18..=24).contains(&releases), || {
        format!("{releases} releases")
    })?;
    check(formats.len() == 7, || format!("formats {formats:?}"))?;

    let start = Instant::now();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let c = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_fixture(a.path(), "8")?;
    let second = run_fixture(b.path(), "8")?;
    let single = run_fixture(c.path(), "1")?;
    let elapsed = start.elapsed();
    check(first == second, || "two runs differ".into())?;
    check(first == single, || "--jobs 1 and --jobs 8 differ".into())?;
    let golden_dir = fixtures().join("golden");
    for (name, bytes) in &first {
        let want =
            std::fs::read(golden_dir.join(name)).map_err(|e| format!("golden {name}: {e}"))?;
        check(&want == bytes, || format!("{name} differs from golden"))?;
    }
    let golden_count = std::fs::read_dir(&golden_dir)
        .map_err(|e| e.to_string())?
        .count();
    check(golden_count == first.len(), || {
        "golden file set differs".into()
    })?;
    check(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{} packages, {} authors, {releases} releases, 7 formats, {} files identical, {elapsed:?}",
        packages.len(),
        authors.len(),
        first.len()
    ))
}

fn oracle_percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn criterion_7() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x7a7a);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let n = rng.gen_range(1..=200);
        let x: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    rng.gen_range(0..5) as f64
                } else {
                    rng.gen_range(-50.0..500.0)
                }
            })
            .collect();
        let s = distribution_summary(&x).map_err(|e| e.to_string())?;
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let mean = x.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let pairs = [
            ("mean", s.mean, mean),
            ("std", s.std, std),
            ("min", s.min, sorted[0]),
            ("p25", s.p25, oracle_percentile(&sorted, 0.25)),
            ("p50", s.p50, oracle_percentile(&sorted, 0.50)),
            ("p75", s.p75, oracle_percentile(&sorted, 0.75)),
            ("max", s.max, sorted[n - 1]),
        ];
        for (label, got, want) in pairs {
            let diff = (got - want).abs();
            worst = worst.max(diff);
            check(diff <= 1e-12, || {
                format!("vector {i} {label}: {got} vs {want}")
            })?;
        }
        check(s.n == n, || format!("vector {i}: n {}", s.n))?;
    }
    let (_, packages, _cache) = fixture_packages();
    let zope: Vec<_> = packages
        .into_iter()
        .filter(|p| p.name == "zope-widgets")
        .collect();
    let gaps = inter_release_gaps(&zope);
    let min = distribution_summary(&gaps).map_err(|e| e.to_string())?.min;
    check(min == 0.0, || {
        format!("identical timestamps give gap {min}")
    })?;
    Ok(format!(
        "1000 vectors, max deviation {worst:.2e}; identical-timestamp gap 0"
    ))
}

fn criterion_8() -> Outcome {
    let label = parse_classifier("Topic :: Software Development :: Libraries :: Python Modules")
        .map_err(|e| e.to_string())?;
    check(
        label.segments
            == [
                "Topic",
                "Software Development",
                "Libraries",
                "Python Modules",
            ],
        || format!("segments {:?}", label.segments),
    )?;
    let labels: Vec<_> = [
        "Topic :: Software Development :: Libraries :: Python Modules",
        "Topic :: Software Development :: Libraries :: Python Modules",
        "Topic :: Software Development :: Libraries",
        "Topic :: Software Development :: Testing",
        "Topic :: Software Development",
        "Topic :: Scientific/Engineering :: Physics",
    ]
    .iter()
    .map(|r| parse_classifier(r).unwrap())
    .collect();
    let t = tally(
        &labels,
        &["Topic", "Software Development"],
        3,
        Grouping::Leaf,
    )
    .map_err(|e| e.to_string())?;
    let rows: Vec<_> = t.rows.iter().map(|r| (r.key.as_str(), r.count)).collect();
    check(
        rows == [
            ("Libraries :: Python Modules", 2),
            ("Libraries", 1),
            ("Testing", 1),
        ],
        || format!("leaf rows {rows:?}"),
    )?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files = run_fixture(dir.path(), "4")?;
    let mut tallies = 0;
    for (name, bytes) in &files {
        if !name.ends_with(".csv") {
            continue;
        }
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        let headers = r.headers().map_err(|e| e.to_string())?.clone();
        let cols: Vec<usize> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| *h == "proportion")
            .map(|(i, _)| i)
            .collect();
        if cols.is_empty() {
            continue;
        }
        let records: Vec<_> = r
            .records()
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        if records.is_empty() {
            continue;
        }
        for c in cols {
            let sum: f64 = records
                .iter()
                .map(|rec| rec[c].parse::<f64>().unwrap_or(f64::NAN))
                .sum();
            check((sum - 1.0).abs() <= 1e-9, || {
                format!("{name}: proportions sum to {sum}")
            })?;
            tallies += 1;
        }
    }
    check(tallies >= 8, || format!("only {tallies} tallies found"))?;
    Ok(format!(
        "4 segments, leaf grouping ok, {tallies} tallies sum to 1"
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("growth rates", criterion_1),
        ("license family proportions", criterion_2),
        ("gini properties", criterion_3),
        ("import extraction corpus", criterion_4),
        ("license cascade", criterion_5),
        ("hermetic fixture run", criterion_6),
        ("distribution summary", criterion_7),
        ("classifier parsing and tallies", criterion_8),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result =
            catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".to_string()));
        match result {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", i + 1),
            Err(reason) => {
                println!("criterion {} ({name}): FAIL: {reason}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
