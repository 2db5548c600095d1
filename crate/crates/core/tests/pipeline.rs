use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pypi_census::cli;
use pypi_census::pipeline::{Pipeline, PipelineOptions, Stage};
use pypi_census::registry::{
    normalize_package_name, MetadataOutcome, RegistryClient, RegistrySource,
};
use pypi_census::store::{Store, ViewParams};
use tempfile::TempDir;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn registry() -> PathBuf {
    fixtures().join("registry")
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn cli(&self, args: &[&str]) -> i32 {
        let reg = registry();
        let cache = self.path("cache");
        let store = self.path("census.db");
        let mut argv: Vec<String> = vec![
            "pypi-census".into(),
            "--fixture".into(),
            reg.display().to_string(),
            "--cache-dir".into(),
            cache.display().to_string(),
            "--store".into(),
            store.display().to_string(),
        ];
        argv.extend(args.iter().map(|a| a.to_string()));
        cli::run(argv)
    }

    fn full(&self, jobs: &str, output: &str) -> PathBuf {
        let out = self.path("out");
        let code = self.cli(&[
            "--jobs",
            jobs,
            "run",
            "--out-dir",
            out.to_str().unwrap(),
            "--output",
            output,
        ]);
        assert_eq!(code, 0, "fixture run exit code");
        out
    }

    fn store(&self) -> Store {
        Store::open(self.path("census.db")).unwrap()
    }
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn csv_rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            headers
                .iter()
                .zip(rec.unwrap().iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

#[test]
fn fixture_run_matches_golden_output() {
    let run = Run::new();
    let start = Instant::now();
    let out = run.full("8", "csv");
    assert!(start.elapsed() < Duration::from_secs(30));
    let got = read_dir(&out);
    let golden_dir = fixtures().join("golden");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let _ = std::fs::remove_dir_all(&golden_dir);
        std::fs::create_dir_all(&golden_dir).unwrap();
        for (name, bytes) in &got {
            std::fs::write(golden_dir.join(name), bytes).unwrap();
        }
    }
    let want = read_dir(&golden_dir);
    assert_eq!(
        got.keys().collect::<Vec<_>>(),
        want.keys().collect::<Vec<_>>()
    );
    for (name, bytes) in &want {
        assert!(
            &got[name] == bytes,
            "{name} differs from golden:\n{}",
            String::from_utf8_lossy(&got[name])
        );
    }
}

#[test]
fn runs_are_byte_identical_across_repeats_and_job_counts() {
    for format in ["csv", "json"] {
        let a = Run::new();
        let b = Run::new();
        let c = Run::new();
        let one = read_dir(&a.full("1", format));
        let eight = read_dir(&b.full("8", format));
        let again = read_dir(&c.full("8", format));
        assert_eq!(one, eight, "{format}: jobs 1 vs 8");
        assert_eq!(eight, again, "{format}: repeat");
    }
}

#[test]
fn hand_counted_series() {
    let run = Run::new();
    let out = run.full("4", "csv");

    let activity: Vec<_> = csv_rows(&out.join("yearly_activity.csv"))
        .into_iter()
        .map(|r| {
            (
                r["year"].clone(),
                r["new_packages"].clone(),
                r["active_packages"].clone(),
                r["new_releases"].clone(),
                r["new_authors"].clone(),
            )
        })
        .collect();
    let expect = |y: &str, a: &str, b: &str, c: &str, d: &str| {
        (
            y.to_string(),
            a.to_string(),
            b.to_string(),
            c.to_string(),
            d.to_string(),
        )
    };
    assert_eq!(
        activity,
        vec![
            expect("2015", "3", "3", "3", "3"),
            expect("2016", "3", "5", "6", "0"),
            expect("2017", "1", "5", "6", "1"),
            expect("2018", "2", "5", "5", "0"),
        ]
    );

    let by_year: Vec<_> = csv_rows(&out.join("imports_by_year.csv"))
        .into_iter()
        .map(|r| (r["year"].clone(), r["imports"].clone()))
        .collect();
    assert_eq!(
        by_year,
        [
            ("2015", "7"),
            ("2016", "16"),
            ("2017", "23"),
            ("2018", "14")
        ]
        .map(|(a, b)| (a.to_string(), b.to_string()))
    );

    let os: Vec<_> = csv_rows(&out.join("unique_importers.csv"))
        .into_iter()
        .filter(|r| r["top_level"] == "os")
        .map(|r| (r["year"].clone(), r["packages"].clone()))
        .collect();
    assert_eq!(
        os,
        [("2015", "2"), ("2016", "2"), ("2017", "3"), ("2018", "2")]
            .map(|(a, b)| (a.to_string(), b.to_string()))
    );

    let sources: BTreeMap<_, _> = csv_rows(&out.join("license_sources.csv"))
        .into_iter()
        .map(|r| (r["source"].clone(), r["count"].clone()))
        .collect();
    assert_eq!(sources["metadata_field"], "4");
    assert_eq!(sources["classifier"], "2");
    assert_eq!(sources["license_file"], "2");
    assert_eq!(sources["unknown"], "1");

    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("run_metadata.json")).unwrap()).unwrap();
    let stages = &meta["source_files_by_stage"];
    assert_eq!(stages["strict_parse"], 27);
    assert_eq!(stages["legacy_transform"], 2);
    assert_eq!(stages["token_scan"], 1);
}

#[test]
fn proportions_sum_to_one_in_every_tally() {
    let run = Run::new();
    let out = run.full("2", "csv");
    let mut checked = 0;
    for (name, _) in read_dir(&out) {
        if !name.ends_with(".csv") {
            continue;
        }
        let rows = csv_rows(&out.join(&name));
        let Some(first) = rows.first() else { continue };
        for col in first.keys().filter(|k| k.ends_with("proportion")) {
            let sum: f64 = rows.iter().map(|r| r[col].parse::<f64>().unwrap()).sum();
            assert!((sum - 1.0).abs() <= 1e-9, "{name}.{col} sums to {sum}");
            checked += 1;
        }
    }
    assert!(checked >= 8, "only {checked} proportion columns");
}

#[test]
fn limit_processes_one_package() {
    let run = Run::new();
    assert_eq!(run.cli(&["fetch-index"]), 0);
    assert_eq!(run.cli(&["--limit", "1", "fetch-metadata"]), 0);
    let names: Vec<_> = run
        .store()
        .load_packages()
        .unwrap()
        .into_iter()
        .map(|p| p.name)
        .collect();
    assert_eq!(names, ["acme-core"]);
}

#[test]
fn stage_order_and_schema_errors() {
    let run = Run::new();
    assert_eq!(run.cli(&["fetch-index"]), 0);
    assert_eq!(run.cli(&["stats"]), cli::EXIT_USAGE);
    assert_eq!(run.cli(&["scan-imports"]), cli::EXIT_USAGE);

    let s = run.store();
    s.set_meta("schema_version", "99").unwrap();
    drop(s);
    assert_eq!(run.cli(&["fetch-index"]), cli::EXIT_STORE);
}

#[test]
fn rerun_reuses_cache_and_scan_state() {
    let run = Run::new();
    run.full("4", "csv");
    let store = run.store();
    let client =
        RegistryClient::new(RegistrySource::fixture(registry(), run.path("cache"))).unwrap();
    let opts = PipelineOptions {
        out_dir: run.path("again"),
        ..PipelineOptions::default()
    };
    let p = Pipeline::new(&store, Some(&client), opts).unwrap();
    let summaries = p.run(&[Stage::Sdists, Stage::Scan]).unwrap();
    assert_eq!(
        client.transport_calls(),
        0,
        "cached archives were refetched"
    );
    let scan = summaries.iter().find(|s| s.stage == Stage::Scan).unwrap();
    assert_eq!(scan.processed, 0);
    assert!(store.pending_scans(false).unwrap().is_empty());
}

#[test]
fn imports_with_year_view() {
    let run = Run::new();
    run.full("4", "csv");
    let rows = run
        .store()
        .query(
            "imports_with_year",
            &ViewParams {
                package: Some("acme-core".into()),
                limit: None,
            },
        )
        .unwrap();
    let year = rows.columns.iter().position(|c| c == "year").unwrap();
    let module = rows.columns.iter().position(|c| c == "module").unwrap();
    let got: Vec<String> = rows
        .rows
        .iter()
        .map(|r| serde_json::to_string(&(&r[year], &r[module])).unwrap())
        .collect();
    assert_eq!(
        got,
        [
            r#"[2015,"os"]"#,
            r#"[2015,"sys"]"#,
            r#"[2015,"setuptools"]"#,
            r#"[2016,"os"]"#,
            r#"[2016,"sys"]"#,
            r#"[2016,"os.path"]"#,
            r#"[2016,"collections"]"#,
            r#"[2016,"setuptools"]"#,
            r#"[2017,"os"]"#,
            r#"[2017,"sys"]"#,
            r#"[2017,"json"]"#,
            r#"[2017,"os.path"]"#,
            r#"[2017,"collections"]"#,
            r#"[2017,"setuptools"]"#,
        ]
    );
}

#[test]
fn concurrent_upserts_from_separate_connections() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("census.db");
    drop(Store::open(&db).unwrap());
    let client = RegistryClient::new(RegistrySource::fixture(
        registry(),
        dir.path().join("cache"),
    ))
    .unwrap();
    let mut names: Vec<String> = client
        .fetch_package_index()
        .unwrap()
        .iter()
        .map(|n| normalize_package_name(n).unwrap())
        .collect();
    names.sort();
    names.dedup();
    let records: Vec<_> = names
        .iter()
        .filter_map(|n| match client.fetch_package_metadata(n).unwrap() {
            MetadataOutcome::Found(r) => Some(r),
            MetadataOutcome::Gone => None,
        })
        .collect();
    std::thread::scope(|s| {
        for t in 0..4 {
            let records = &records;
            let db = &db;
            s.spawn(move || {
                let store = Store::open(db).unwrap();
                for round in 0..3 {
                    for (i, r) in records.iter().enumerate() {
                        if (i + round + t) % 2 == 0 {
                            store.upsert_package(r).unwrap();
                        }
                    }
                }
            });
        }
    });
    let store = Store::open(&db).unwrap();
    let mut names: Vec<_> = records.iter().map(|r| r.name.clone()).collect();
    names.sort();
    names.dedup();
    let stored: Vec<_> = store
        .load_packages()
        .unwrap()
        .into_iter()
        .map(|p| p.name)
        .collect();
    assert_eq!(stored, names);
    let sequential = Store::open_in_memory().unwrap();
    for r in &records {
        sequential.upsert_package(r).unwrap();
    }
    assert_eq!(store.counts().unwrap(), sequential.counts().unwrap());
}
