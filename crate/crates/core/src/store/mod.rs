//! Embedded SQLite store. Extraction stages write here and the statistics
//! pass reads back, so the two can run separately.
//!
//! One connection per [`Store`]; the pipeline funnels all writes through a
//! single committer and readers open their own handles.

mod views;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, SecondsFormat, Utc};
use rusqlite::{params, Connection, OptionalExtension, Transaction};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::authors::AuthorRecord;
use crate::imports::{ExtractionStage, ImportStatement, ImportedName};
use crate::license::{LicenseAssignment, LicenseFamily, LicenseSource, LicenseVersion};
use crate::registry::{parse_timestamp, DistFile, PackageRecord, PackageType, ReleaseRecord};

pub use views::{Cell, ViewParams, ViewRows, VIEWS};

pub const SCHEMA_VERSION: u32 = 1;
const SCHEMA: &str = include_str!("schema.sql");

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store {path}: {source}")]
    Sqlite {
        path: String,
        #[source]
        source: rusqlite::Error,
    },
    #[error(
        "store schema version {found} does not match expected {expected}; use a fresh --store path"
    )]
    SchemaMismatch { found: String, expected: u32 },
    #[error("release {0} does not exist")]
    ForeignKey(i64),
    #[error("unknown view {0:?}; known views: {known}", known = VIEWS.join(", "))]
    UnknownView(String),
    #[error("corrupt row in {table}: {reason}")]
    Corrupt { table: &'static str, reason: String },
}

type Result<T> = std::result::Result<T, StoreError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanState {
    Scanned,
    Failed,
    NoSdist,
}

impl ScanState {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Scanned => "scanned",
            Self::Failed => "failed",
            Self::NoSdist => "no_sdist",
        }
    }
}

/// Statements extracted from one source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScannedFile {
    pub archive: String,
    pub path: String,
    pub stage: ExtractionStage,
    pub statements: Vec<ImportStatement>,
}

/// A release whose source distributions still need scanning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingRelease {
    pub release_id: i64,
    pub package: String,
    pub version: String,
    pub sdists: Vec<DistFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSnapshot {
    pub corpus_id: String,
    pub created_at: DateTime<Utc>,
    pub counts: BTreeMap<String, u64>,
    pub tool_versions: BTreeMap<String, String>,
}

/// One stored import occurrence with its release context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredImport {
    pub package: String,
    pub version: String,
    pub year: Option<i32>,
    pub archive: String,
    pub file_path: String,
    pub statement: ImportStatement,
}

pub struct Store {
    conn: Connection,
    path: PathBuf,
}

fn ts(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Micros, true)
}

fn files_digest(files: &[DistFile]) -> String {
    let mut rows: Vec<String> = files
        .iter()
        .map(|f| {
            format!(
                "{}\t{}\t{}\t{}\t{}\t{}",
                f.filename,
                f.package_type.as_str(),
                f.size_bytes,
                ts(&f.upload_time),
                f.url,
                f.sha256.as_deref().unwrap_or("")
            )
        })
        .collect();
    rows.sort();
    hex::encode(Sha256::digest(rows.join("\n").as_bytes()))
}

impl Store {
    /// Opens or creates the store, refusing files with another schema version.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let conn = Connection::open(&path).map_err(|source| StoreError::Sqlite {
            path: path.display().to_string(),
            source,
        })?;
        let store = Self { conn, path };
        store.init()?;
        Ok(store)
    }

    pub fn open_in_memory() -> Result<Self> {
        let conn = Connection::open_in_memory().map_err(|source| StoreError::Sqlite {
            path: ":memory:".into(),
            source,
        })?;
        let store = Self {
            conn,
            path: PathBuf::from(":memory:"),
        };
        store.init()?;
        Ok(store)
    }

    fn err(&self) -> impl Fn(rusqlite::Error) -> StoreError + '_ {
        move |source| StoreError::Sqlite {
            path: self.path.display().to_string(),
            source,
        }
    }

    fn init(&self) -> Result<()> {
        let e = self.err();
        self.conn
            .busy_timeout(Duration::from_secs(30))
            .map_err(&e)?;
        self.conn
            .execute_batch(
                "PRAGMA journal_mode = WAL; PRAGMA foreign_keys = ON; PRAGMA synchronous = NORMAL;",
            )
            .map_err(&e)?;
        let has_meta: bool = self
            .conn
            .query_row(
                "SELECT count(*) FROM sqlite_master WHERE type = 'table' AND name = 'meta'",
                [],
                |r| r.get::<_, i64>(0),
            )
            .map_err(&e)?
            > 0;
        if has_meta {
            let found: Option<String> = self
                .conn
                .query_row(
                    "SELECT value FROM meta WHERE key = 'schema_version'",
                    [],
                    |r| r.get(0),
                )
                .optional()
                .map_err(&e)?;
            match found {
                Some(v) if v == SCHEMA_VERSION.to_string() => return Ok(()),
                other => {
                    return Err(StoreError::SchemaMismatch {
                        found: other.unwrap_or_else(|| "missing".into()),
                        expected: SCHEMA_VERSION,
                    })
                }
            }
        }
        let tables: i64 = self
            .conn
            .query_row(
                "SELECT count(*) FROM sqlite_master WHERE type = 'table'",
                [],
                |r| r.get(0),
            )
            .map_err(&e)?;
        if tables > 0 {
            return Err(StoreError::SchemaMismatch {
                found: "foreign database".into(),
                expected: SCHEMA_VERSION,
            });
        }
        let tx = self.conn.unchecked_transaction().map_err(&e)?;
        tx.execute_batch(SCHEMA).map_err(&e)?;
        tx.execute(
            "INSERT INTO meta (key, value) VALUES ('schema_version', ?1), ('created_at', ?2)",
            params![SCHEMA_VERSION.to_string(), ts(&Utc::now())],
        )
        .map_err(&e)?;
        tx.commit().map_err(&e)?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn set_meta(&self, key: &str, value: &str) -> Result<()> {
        self.conn
            .execute(
                "INSERT INTO meta (key, value) VALUES (?1, ?2)
                 ON CONFLICT (key) DO UPDATE SET value = excluded.value",
                params![key, value],
            )
            .map_err(self.err())?;
        Ok(())
    }

    pub fn meta(&self, key: &str) -> Result<Option<String>> {
        self.conn
            .query_row("SELECT value FROM meta WHERE key = ?1", [key], |r| r.get(0))
            .optional()
            .map_err(self.err())
    }

    /// Replaces the stored index listing.
    pub fn record_index(&self, raw_names: &[String]) -> Result<()> {
        let e = self.err();
        let tx = self.conn.unchecked_transaction().map_err(&e)?;
        tx.execute("DELETE FROM index_entries", []).map_err(&e)?;
        {
            let mut stmt = tx
                .prepare("INSERT INTO index_entries (position, raw_name) VALUES (?1, ?2)")
                .map_err(&e)?;
            for (i, n) in raw_names.iter().enumerate() {
                stmt.execute(params![i as i64, n]).map_err(&e)?;
            }
        }
        tx.commit().map_err(&e)
    }

    pub fn index_names(&self) -> Result<Vec<String>> {
        let mut stmt = self
            .conn
            .prepare("SELECT raw_name FROM index_entries ORDER BY position")
            .map_err(self.err())?;
        let rows = stmt
            .query_map([], |r| r.get(0))
            .map_err(self.err())?
            .collect::<rusqlite::Result<Vec<String>>>()
            .map_err(self.err())?;
        Ok(rows)
    }

    /// Inserts or replaces a package's metadata. Releases whose file lists
    /// are unchanged keep their id, scan status and import rows.
    pub fn upsert_package(&self, pkg: &PackageRecord) -> Result<i64> {
        let e = self.err();
        let tx = self.conn.unchecked_transaction().map_err(&e)?;
        let id = Self::upsert_in(&tx, pkg).map_err(&e)?;
        tx.commit().map_err(&e)?;
        Ok(id)
    }

    fn upsert_in(tx: &Transaction<'_>, pkg: &PackageRecord) -> rusqlite::Result<i64> {
        let classifiers = serde_json::to_string(&pkg.classifiers).expect("string list serializes");
        let package_id: i64 = tx.query_row(
            "INSERT INTO packages (name, raw_name, author, maintainer, home_page, license_field, classifiers, gone)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, 0)
             ON CONFLICT (name) DO UPDATE SET
                raw_name = excluded.raw_name, author = excluded.author,
                maintainer = excluded.maintainer, home_page = excluded.home_page,
                license_field = excluded.license_field, classifiers = excluded.classifiers,
                gone = 0
             RETURNING id",
            params![
                pkg.name,
                pkg.raw_name,
                pkg.author,
                pkg.maintainer,
                pkg.home_page,
                pkg.license_field,
                classifiers
            ],
            |r| r.get(0),
        )?;

        let mut existing: BTreeMap<String, (i64, String)> = BTreeMap::new();
        {
            let mut stmt =
                tx.prepare("SELECT version, id, files_digest FROM releases WHERE package_id = ?1")?;
            let rows = stmt.query_map([package_id], |r| {
                Ok((r.get::<_, String>(0)?, (r.get(1)?, r.get(2)?)))
            })?;
            for row in rows {
                let (v, rest) = row?;
                existing.insert(v, rest);
            }
        }

        for (position, rel) in pkg.releases.iter().enumerate() {
            let digest = files_digest(&rel.files);
            let upload = rel.upload_time.as_ref().map(ts);
            let release_id = match existing.remove(&rel.version) {
                Some((id, old)) if old == digest => {
                    tx.execute(
                        "UPDATE releases SET upload_time = ?2, position = ?3 WHERE id = ?1",
                        params![id, upload, position as i64],
                    )?;
                    continue;
                }
                Some((id, _)) => {
                    for table in ["files", "imports", "source_files", "scan_status"] {
                        tx.execute(&format!("DELETE FROM {table} WHERE release_id = ?1"), [id])?;
                    }
                    tx.execute(
                        "UPDATE releases SET upload_time = ?2, files_digest = ?3, position = ?4 WHERE id = ?1",
                        params![id, upload, digest, position as i64],
                    )?;
                    id
                }
                None => tx.query_row(
                    "INSERT INTO releases (package_id, version, upload_time, files_digest, position)
                     VALUES (?1, ?2, ?3, ?4, ?5) RETURNING id",
                    params![package_id, rel.version, upload, digest, position as i64],
                    |r| r.get(0),
                )?,
            };
            let mut stmt = tx.prepare_cached(
                "INSERT INTO files (release_id, filename, package_type, size_bytes, upload_time, url, sha256)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
            )?;
            for f in &rel.files {
                stmt.execute(params![
                    release_id,
                    f.filename,
                    f.package_type.as_str(),
                    f.size_bytes as i64,
                    ts(&f.upload_time),
                    f.url,
                    f.sha256
                ])?;
            }
        }
        for (_, (id, _)) in existing {
            tx.execute("DELETE FROM releases WHERE id = ?1", [id])?;
        }
        Ok(package_id)
    }

    /// Flags a package the registry no longer serves.
    pub fn mark_gone(&self, name: &str, raw_name: &str) -> Result<()> {
        self.conn
            .execute(
                "INSERT INTO packages (name, raw_name, gone) VALUES (?1, ?2, 1)
                 ON CONFLICT (name) DO UPDATE SET gone = 1",
                params![name, raw_name],
            )
            .map_err(self.err())?;
        Ok(())
    }

    pub fn package_id(&self, name: &str) -> Result<Option<i64>> {
        self.conn
            .query_row("SELECT id FROM packages WHERE name = ?1", [name], |r| {
                r.get(0)
            })
            .optional()
            .map_err(self.err())
    }

    pub fn release_id(&self, package: &str, version: &str) -> Result<Option<i64>> {
        self.conn
            .query_row(
                "SELECT r.id FROM releases r JOIN packages p ON p.id = r.package_id
                 WHERE p.name = ?1 AND r.version = ?2",
                params![package, version],
                |r| r.get(0),
            )
            .optional()
            .map_err(self.err())
    }

    fn release_exists(&self, release_id: i64) -> Result<bool> {
        self.conn
            .query_row("SELECT 1 FROM releases WHERE id = ?1", [release_id], |_| {
                Ok(())
            })
            .optional()
            .map(|o| o.is_some())
            .map_err(self.err())
    }

    /// Replaces every import row for a release and marks it scanned.
    pub fn record_imports(
        &self,
        release_id: i64,
        files: &[ScannedFile],
        archives: usize,
    ) -> Result<usize> {
        if !self.release_exists(release_id)? {
            return Err(StoreError::ForeignKey(release_id));
        }
        let e = self.err();
        let tx = self.conn.unchecked_transaction().map_err(&e)?;
        for table in ["imports", "source_files"] {
            tx.execute(
                &format!("DELETE FROM {table} WHERE release_id = ?1"),
                [release_id],
            )
            .map_err(&e)?;
        }
        let mut count = 0;
        {
            let mut file_stmt = tx
                .prepare("INSERT INTO source_files (release_id, archive, path, stage, statements) VALUES (?1, ?2, ?3, ?4, ?5)")
                .map_err(&e)?;
            let mut imp_stmt = tx
                .prepare(
                    "INSERT INTO imports (release_id, archive, file_path, seq, line, module, names, alias, level, is_star, stage)
                     VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11)",
                )
                .map_err(&e)?;
            for f in files {
                file_stmt
                    .execute(params![
                        release_id,
                        f.archive,
                        f.path,
                        f.stage.as_str(),
                        f.statements.len() as i64
                    ])
                    .map_err(&e)?;
                for (seq, s) in f.statements.iter().enumerate() {
                    let names = serde_json::to_string(&s.names).expect("names serialize");
                    imp_stmt
                        .execute(params![
                            release_id,
                            f.archive,
                            f.path,
                            seq as i64,
                            s.line,
                            s.module,
                            names,
                            s.alias,
                            s.relative_level,
                            s.is_star,
                            s.stage.as_str()
                        ])
                        .map_err(&e)?;
                    count += 1;
                }
            }
        }
        tx.execute(
            "INSERT INTO scan_status (release_id, status, archives, python_sources, detail) VALUES (?1, 'scanned', ?2, ?3, NULL)
             ON CONFLICT (release_id) DO UPDATE SET status = 'scanned', archives = excluded.archives,
                python_sources = excluded.python_sources, detail = NULL",
            params![release_id, archives as i64, files.len() as i64],
        )
        .map_err(&e)?;
        tx.commit().map_err(&e)?;
        Ok(count)
    }

    /// Records a release that was not (or could not be) scanned.
    pub fn record_scan_state(
        &self,
        release_id: i64,
        state: ScanState,
        detail: Option<&str>,
    ) -> Result<()> {
        if !self.release_exists(release_id)? {
            return Err(StoreError::ForeignKey(release_id));
        }
        self.conn
            .execute(
                "INSERT INTO scan_status (release_id, status, detail) VALUES (?1, ?2, ?3)
                 ON CONFLICT (release_id) DO UPDATE SET status = excluded.status, detail = excluded.detail",
                params![release_id, state.as_str(), detail],
            )
            .map_err(self.err())?;
        Ok(())
    }

    pub fn scan_state(&self, release_id: i64) -> Result<Option<ScanState>> {
        let s: Option<String> = self
            .conn
            .query_row(
                "SELECT status FROM scan_status WHERE release_id = ?1",
                [release_id],
                |r| r.get(0),
            )
            .optional()
            .map_err(self.err())?;
        Ok(s.map(|s| match s.as_str() {
            "scanned" => ScanState::Scanned,
            "no_sdist" => ScanState::NoSdist,
            _ => ScanState::Failed,
        }))
    }

    /// Releases without a successful scan, in package then release order.
    pub fn pending_scans(&self, include_failed: bool) -> Result<Vec<PendingRelease>> {
        let sql = "SELECT r.id, p.name, r.version FROM releases r
                   JOIN packages p ON p.id = r.package_id
                   LEFT JOIN scan_status s ON s.release_id = r.id
                   WHERE p.gone = 0 AND (s.status IS NULL OR (?1 AND s.status = 'failed'))
                   ORDER BY p.name, r.position";
        let mut stmt = self.conn.prepare(sql).map_err(self.err())?;
        let heads = stmt
            .query_map([include_failed], |r| {
                Ok((r.get::<_, i64>(0)?, r.get(1)?, r.get(2)?))
            })
            .map_err(self.err())?
            .collect::<rusqlite::Result<Vec<(i64, String, String)>>>()
            .map_err(self.err())?;
        heads
            .into_iter()
            .map(|(release_id, package, version)| {
                let sdists = self
                    .release_files(release_id)?
                    .into_iter()
                    .filter(|f| f.package_type == PackageType::Sdist)
                    .collect();
                Ok(PendingRelease {
                    release_id,
                    package,
                    version,
                    sdists,
                })
            })
            .collect()
    }

    fn release_files(&self, release_id: i64) -> Result<Vec<DistFile>> {
        let mut stmt = self
            .conn
            .prepare_cached(
                "SELECT filename, package_type, size_bytes, upload_time, url, sha256 FROM files
                 WHERE release_id = ?1 ORDER BY filename, id",
            )
            .map_err(self.err())?;
        let rows = stmt
            .query_map([release_id], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, i64>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, Option<String>>(5)?,
                ))
            })
            .map_err(self.err())?
            .collect::<rusqlite::Result<Vec<_>>>()
            .map_err(self.err())?;
        rows.into_iter()
            .map(|(filename, kind, size, upload, url, sha256)| {
                let upload_time = parse_timestamp(&upload).ok_or_else(|| StoreError::Corrupt {
                    table: "files",
                    reason: format!("bad timestamp {upload:?}"),
                })?;
                Ok(DistFile {
                    filename,
                    package_type: PackageType::from_registry(&kind),
                    size_bytes: size.max(0) as u64,
                    upload_time,
                    url,
                    sha256,
                })
            })
            .collect()
    }

    /// Every package still served by the registry, by name.
    pub fn load_packages(&self) -> Result<Vec<PackageRecord>> {
        let mut stmt = self
            .conn
            .prepare(
                "SELECT id, name, raw_name, author, maintainer, home_page, license_field, classifiers
                 FROM packages WHERE gone = 0 ORDER BY name",
            )
            .map_err(self.err())?;
        type Head = (
            i64,
            String,
            String,
            Option<String>,
            Option<String>,
            Option<String>,
            Option<String>,
            String,
        );
        let heads = stmt
            .query_map([], |r| {
                Ok((
                    r.get(0)?,
                    r.get(1)?,
                    r.get(2)?,
                    r.get(3)?,
                    r.get(4)?,
                    r.get(5)?,
                    r.get(6)?,
                    r.get(7)?,
                ))
            })
            .map_err(self.err())?
            .collect::<rusqlite::Result<Vec<Head>>>()
            .map_err(self.err())?;
        let mut rel_stmt = self
            .conn
            .prepare("SELECT id, version FROM releases WHERE package_id = ?1 ORDER BY position")
            .map_err(self.err())?;
        let mut out = Vec::with_capacity(heads.len());
        for (id, name, raw_name, author, maintainer, home_page, license_field, classifiers) in heads
        {
            let rels = rel_stmt
                .query_map([id], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?)))
                .map_err(self.err())?
                .collect::<rusqlite::Result<Vec<_>>>()
                .map_err(self.err())?;
            let mut releases = Vec::with_capacity(rels.len());
            for (rid, version) in rels {
                releases.push(ReleaseRecord::new(version, self.release_files(rid)?));
            }
            let classifiers: Vec<String> =
                serde_json::from_str(&classifiers).map_err(|e| StoreError::Corrupt {
                    table: "packages",
                    reason: e.to_string(),
                })?;
            out.push(PackageRecord {
                name,
                raw_name,
                author,
                maintainer,
                home_page,
                license_field,
                classifiers,
                releases,
            });
        }
        Ok(out)
    }

    /// Import occurrences in a fixed order: package, release, archive,
    /// file, statement.
    pub fn load_imports(&self) -> Result<Vec<StoredImport>> {
        let mut stmt = self
            .conn
            .prepare(
                "SELECT p.name, r.version, r.upload_time, i.archive, i.file_path, i.line, i.module,
                        i.names, i.alias, i.level, i.is_star, i.stage
                 FROM imports i JOIN releases r ON r.id = i.release_id JOIN packages p ON p.id = r.package_id
                 WHERE p.gone = 0
                 ORDER BY p.name, r.position, i.archive, i.file_path, i.seq",
            )
            .map_err(self.err())?;
        let rows = stmt
            .query_map([], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, Option<String>>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, u32>(5)?,
                    r.get::<_, String>(6)?,
                    r.get::<_, String>(7)?,
                    r.get::<_, Option<String>>(8)?,
                    r.get::<_, u32>(9)?,
                    r.get::<_, bool>(10)?,
                    r.get::<_, String>(11)?,
                ))
            })
            .map_err(self.err())?
            .collect::<rusqlite::Result<Vec<_>>>()
            .map_err(self.err())?;
        rows.into_iter()
            .map(
                |(
                    package,
                    version,
                    upload,
                    archive,
                    file_path,
                    line,
                    module,
                    names,
                    alias,
                    level,
                    is_star,
                    stage,
                )| {
                    let corrupt = |reason: String| StoreError::Corrupt {
                        table: "imports",
                        reason,
                    };
                    let names: Vec<ImportedName> =
                        serde_json::from_str(&names).map_err(|e| corrupt(e.to_string()))?;
                    let stage = ExtractionStage::parse(&stage)
                        .ok_or_else(|| corrupt(format!("stage {stage:?}")))?;
                    Ok(StoredImport {
                        package,
                        version,
                        year: upload
                            .as_deref()
                            .and_then(parse_timestamp)
                            .map(|t| chrono::Datelike::year(&t)),
                        archive,
                        file_path,
                        statement: ImportStatement {
                            module,
                            names,
                            alias,
                            relative_level: level,
                            is_star,
                            line,
                            stage,
                        },
                    })
                },
            )
            .collect()
    }

    /// Count of scanned source files per extraction stage.
    pub fn stage_counts(&self) -> Result<BTreeMap<String, u64>> {
        let mut stmt = self
            .conn
            .prepare("SELECT stage, count(*) FROM source_files GROUP BY stage ORDER BY stage")
            .map_err(self.err())?;
        let rows = stmt
            .query_map([], |r| {
                Ok((r.get::<_, String>(0)?, r.get::<_, i64>(1)? as u64))
            })
            .map_err(self.err())?
            .collect::<rusqlite::Result<BTreeMap<_, _>>>()
            .map_err(self.err())?;
        Ok(rows)
    }

    pub fn record_license(&self, package: &str, a: &LicenseAssignment) -> Result<()> {
        let n = self
            .conn
            .execute(
                "INSERT INTO licenses (package_id, family, name, version, source, ambiguous)
                 SELECT id, ?2, ?3, ?4, ?5, ?6 FROM packages WHERE name = ?1
                 ON CONFLICT (package_id) DO UPDATE SET family = excluded.family, name = excluded.name,
                    version = excluded.version, source = excluded.source, ambiguous = excluded.ambiguous",
                params![package, a.family.as_str(), a.name, a.version.as_str(), a.source.as_str(), a.ambiguous],
            )
            .map_err(self.err())?;
        if n == 0 {
            return Err(StoreError::Corrupt {
                table: "licenses",
                reason: format!("no package named {package:?}"),
            });
        }
        Ok(())
    }

    pub fn load_licenses(&self) -> Result<Vec<(String, LicenseAssignment)>> {
        let mut stmt = self
            .conn
            .prepare(
                "SELECT p.name, l.family, l.name, l.version, l.source, l.ambiguous
                 FROM licenses l JOIN packages p ON p.id = l.package_id WHERE p.gone = 0 ORDER BY p.name",
            )
            .map_err(self.err())?;
        let rows = stmt
            .query_map([], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, bool>(5)?,
                ))
            })
            .map_err(self.err())?
            .collect::<rusqlite::Result<Vec<_>>>()
            .map_err(self.err())?;
        rows.into_iter()
            .map(|(pkg, family, name, version, source, ambiguous)| {
                let corrupt = |reason: String| StoreError::Corrupt {
                    table: "licenses",
                    reason,
                };
                Ok((
                    pkg,
                    LicenseAssignment {
                        family: LicenseFamily::parse(&family)
                            .ok_or_else(|| corrupt(family.clone()))?,
                        name,
                        version: LicenseVersion::parse(&version),
                        source: LicenseSource::parse(&source)
                            .ok_or_else(|| corrupt(source.clone()))?,
                        ambiguous,
                    },
                ))
            })
            .collect()
    }

    pub fn record_author(&self, package: &str, rec: &AuthorRecord) -> Result<()> {
        self.conn
            .execute(
                "INSERT INTO author_flags (package_id, author_key, raw, is_multiple, is_organization)
                 SELECT id, ?2, ?3, ?4, ?5 FROM packages WHERE name = ?1
                 ON CONFLICT (package_id) DO UPDATE SET author_key = excluded.author_key, raw = excluded.raw,
                    is_multiple = excluded.is_multiple, is_organization = excluded.is_organization",
                params![package, rec.key, rec.raw, rec.is_multiple, rec.is_organization],
            )
            .map_err(self.err())?;
        Ok(())
    }

    pub fn load_authors(&self) -> Result<Vec<(String, AuthorRecord)>> {
        let mut stmt = self
            .conn
            .prepare(
                "SELECT p.name, a.author_key, a.raw, a.is_multiple, a.is_organization
                 FROM author_flags a JOIN packages p ON p.id = a.package_id WHERE p.gone = 0 ORDER BY p.name",
            )
            .map_err(self.err())?;
        let rows = stmt
            .query_map([], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    AuthorRecord {
                        key: r.get(1)?,
                        raw: r.get(2)?,
                        is_multiple: r.get(3)?,
                        is_organization: r.get(4)?,
                    },
                ))
            })
            .map_err(self.err())?
            .collect::<rusqlite::Result<Vec<_>>>()
            .map_err(self.err())?;
        Ok(rows)
    }

    pub fn mark_stage(&self, stage: &str) -> Result<()> {
        self.conn
            .execute(
                "INSERT OR IGNORE INTO stages_completed (stage) VALUES (?1)",
                [stage],
            )
            .map_err(self.err())?;
        Ok(())
    }

    pub fn stage_completed(&self, stage: &str) -> Result<bool> {
        self.conn
            .query_row(
                "SELECT 1 FROM stages_completed WHERE stage = ?1",
                [stage],
                |_| Ok(()),
            )
            .optional()
            .map(|o| o.is_some())
            .map_err(self.err())
    }

    /// Clears a stage and every stage after it, for re-runs that change
    /// upstream data.
    pub fn clear_stages(&self, stages: &[&str]) -> Result<()> {
        for s in stages {
            self.conn
                .execute("DELETE FROM stages_completed WHERE stage = ?1", [s])
                .map_err(self.err())?;
        }
        Ok(())
    }

    pub fn counts(&self) -> Result<BTreeMap<String, u64>> {
        let mut out = BTreeMap::new();
        for table in [
            "index_entries",
            "packages",
            "releases",
            "files",
            "scan_status",
            "source_files",
            "imports",
            "licenses",
            "author_flags",
        ] {
            let n: i64 = self
                .conn
                .query_row(&format!("SELECT count(*) FROM {table}"), [], |r| r.get(0))
                .map_err(self.err())?;
            out.insert(table.to_string(), n as u64);
        }
        Ok(out)
    }

    pub fn snapshot(&self) -> Result<CorpusSnapshot> {
        let created = self.meta("created_at")?.unwrap_or_default();
        let mut tool_versions = BTreeMap::new();
        for key in ["grammar_version", "ruleset_version", "tool_version"] {
            if let Some(v) = self.meta(key)? {
                tool_versions.insert(key.to_string(), v);
            }
        }
        Ok(CorpusSnapshot {
            corpus_id: self.meta("corpus_id")?.unwrap_or_default(),
            created_at: parse_timestamp(&created).unwrap_or(DateTime::<Utc>::UNIX_EPOCH),
            counts: self.counts()?,
            tool_versions,
        })
    }

    /// Runs a catalog view.
    pub fn query(&self, view: &str, params: &ViewParams) -> Result<ViewRows> {
        views::run(&self.conn, &self.path, view, params)
    }
}
