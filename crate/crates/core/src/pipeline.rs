//! Stage orchestration: fetch, scan and resolve in parallel, commit through
//! the single store handle, then build reports.

use std::collections::HashSet;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use rayon::prelude::*;

use crate::archive::{detect_format, visit_python_sources, ArchiveFormat, ArchiveLimits};
use crate::authors::AuthorLists;
use crate::imports::{extract_imports, GRAMMAR_VERSION};
use crate::license::{resolve_package_license, LicenseFileSource, LicenseRuleSet};
use crate::registry::{
    normalize_package_name, DistFile, MetadataOutcome, RegistryClient, RegistryError,
};
use crate::report::{
    author_lists_digest, build_reports, write_reports, OutputFormat, ReportInput, ReportOptions,
    RunMetadata,
};
use crate::store::{PendingRelease, ScanState, ScannedFile, Store, StoreError};

/// Work is committed in batches of this many items.
const BATCH: usize = 64;
const WORKER_STACK: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Index,
    Metadata,
    Sdists,
    Scan,
    Licenses,
    Stats,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Self::Index,
        Self::Metadata,
        Self::Sdists,
        Self::Scan,
        Self::Licenses,
        Self::Stats,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Index => "index",
            Self::Metadata => "metadata",
            Self::Sdists => "sdists",
            Self::Scan => "scan",
            Self::Licenses => "licenses",
            Self::Stats => "stats",
        }
    }

    pub fn parse(value: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.as_str() == value)
    }

    pub fn requires(self) -> &'static [Stage] {
        match self {
            Self::Index => &[],
            Self::Metadata => &[Self::Index],
            Self::Sdists => &[Self::Metadata],
            Self::Scan => &[Self::Sdists],
            Self::Licenses => &[Self::Metadata],
            Self::Stats => &[Self::Scan, Self::Licenses],
        }
    }

    fn needs_registry(self) -> bool {
        !matches!(self, Self::Stats)
    }

    /// Stages whose results depend on this one, transitively.
    fn downstream(self) -> Vec<Stage> {
        Self::ALL
            .into_iter()
            .filter(|s| *s != self && s.depends_on(self))
            .collect()
    }

    fn depends_on(self, other: Stage) -> bool {
        self.requires()
            .iter()
            .any(|r| *r == other || r.depends_on(other))
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("writing reports to {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Store(StoreError::SchemaMismatch { .. }) => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub jobs: usize,
    /// Cap on packages taken from the index.
    pub limit: Option<usize>,
    pub rules: LicenseRuleSet,
    pub author_lists: AuthorLists,
    pub archive_limits: ArchiveLimits,
    pub rescan_failed: bool,
    pub corpus_id: Option<String>,
    pub report: ReportOptions,
    pub output: OutputFormat,
    pub out_dir: PathBuf,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            jobs: 8,
            limit: None,
            rules: LicenseRuleSet::default_rules(),
            author_lists: AuthorLists::default(),
            archive_limits: ArchiveLimits::default(),
            rescan_failed: false,
            corpus_id: None,
            report: ReportOptions::default(),
            output: OutputFormat::Csv,
            out_dir: PathBuf::from("reports"),
        }
    }
}

/// Outcome counts for one stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSummary {
    pub stage: Stage,
    pub processed: usize,
    pub failed: usize,
    /// Items deliberately not processed (gone packages, releases without a
    /// supported archive).
    pub skipped: usize,
}

impl StageSummary {
    fn new(stage: Stage) -> Self {
        Self {
            stage,
            processed: 0,
            failed: 0,
            skipped: 0,
        }
    }

    pub fn failure_rate(&self) -> f64 {
        let attempted = self.processed + self.failed;
        if attempted == 0 {
            0.0
        } else {
            self.failed as f64 / attempted as f64
        }
    }
}

pub struct Pipeline<'a> {
    store: &'a Store,
    client: Option<&'a RegistryClient>,
    opts: PipelineOptions,
    pool: rayon::ThreadPool,
}

enum ScanOutcome {
    Scanned {
        files: Vec<ScannedFile>,
        archives: usize,
    },
    NoSdist(String),
    Failed(String),
}

/// The sdist a release is scanned from: the earliest-uploaded file with a
/// supported archive extension, ties broken by filename.
pub fn choose_sdist(sdists: &[DistFile]) -> Option<(&DistFile, ArchiveFormat)> {
    sdists
        .iter()
        .filter_map(|f| detect_format(&f.filename).map(|fmt| (f, fmt)))
        .min_by(|(a, _), (b, _)| (a.upload_time, &a.filename).cmp(&(b.upload_time, &b.filename)))
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "worker panicked".into())
}

impl<'a> Pipeline<'a> {
    pub fn new(
        store: &'a Store,
        client: Option<&'a RegistryClient>,
        opts: PipelineOptions,
    ) -> Result<Self, PipelineError> {
        if opts.jobs == 0 {
            return Err(PipelineError::Usage("--jobs must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .stack_size(WORKER_STACK)
            .thread_name(|i| format!("census-worker-{i}"))
            .build()
            .map_err(|e| PipelineError::Usage(format!("cannot start worker pool: {e}")))?;
        Ok(Self {
            store,
            client,
            opts,
            pool,
        })
    }

    fn client(&self, stage: Stage) -> Result<&'a RegistryClient, PipelineError> {
        self.client
            .ok_or_else(|| PipelineError::Usage(format!("stage {stage} needs a registry source")))
    }

    /// Checks that every requested stage has its prerequisites either
    /// requested too or already completed in the store.
    pub fn check_order(&self, stages: &[Stage]) -> Result<(), PipelineError> {
        let requested: HashSet<Stage> = stages.iter().copied().collect();
        for s in stages {
            for dep in s.requires() {
                if !requested.contains(dep) && !self.store.stage_completed(dep.as_str())? {
                    return Err(PipelineError::Usage(format!(
                        "stage {s} requires stage {dep}, which has not completed for this store"
                    )));
                }
            }
            if s.needs_registry() && self.client.is_none() {
                return Err(PipelineError::Usage(format!(
                    "stage {s} needs a registry source"
                )));
            }
        }
        Ok(())
    }

    /// Runs the given stages in dependency order.
    pub fn run(&self, stages: &[Stage]) -> Result<Vec<StageSummary>, PipelineError> {
        let mut ordered: Vec<Stage> = stages.to_vec();
        ordered.sort();
        ordered.dedup();
        self.check_order(&ordered)?;
        let mut out = Vec::new();
        for stage in ordered {
            out.push(self.run_stage(stage)?);
        }
        Ok(out)
    }

    fn run_stage(&self, stage: Stage) -> Result<StageSummary, PipelineError> {
        let downstream: Vec<&str> = stage.downstream().iter().map(|s| s.as_str()).collect();
        self.store.clear_stages(&downstream)?;
        let summary = match stage {
            Stage::Index => self.index()?,
            Stage::Metadata => self.metadata()?,
            Stage::Sdists => self.sdists()?,
            Stage::Scan => self.scan()?,
            Stage::Licenses => self.licenses()?,
            Stage::Stats => self.stats()?,
        };
        self.store.mark_stage(stage.as_str())?;
        tracing::info!(
            stage = %stage,
            processed = summary.processed,
            failed = summary.failed,
            skipped = summary.skipped,
            "stage complete"
        );
        Ok(summary)
    }

    fn index(&self) -> Result<StageSummary, PipelineError> {
        let names = self.client(Stage::Index)?.fetch_package_index()?;
        self.store.record_index(&names)?;
        let corpus_id = match &self.opts.corpus_id {
            Some(id) => id.clone(),
            None => {
                use sha2::{Digest, Sha256};
                let digest = Sha256::digest(names.join("\n").as_bytes());
                format!("corpus-{}", hex::encode(&digest[..6]))
            }
        };
        self.store.set_meta("corpus_id", &corpus_id)?;
        let mut s = StageSummary::new(Stage::Index);
        s.processed = names.len();
        Ok(s)
    }

    /// Index names, normalized and deduplicated in listing order.
    fn package_names(&self) -> Result<(Vec<(String, String)>, usize), PipelineError> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut invalid = 0;
        for raw in self.store.index_names()? {
            match normalize_package_name(&raw) {
                Ok(name) => {
                    if seen.insert(name.clone()) {
                        out.push((name, raw));
                    }
                }
                Err(e) => {
                    tracing::warn!(raw, error = %e, "skipping index entry");
                    invalid += 1;
                }
            }
        }
        if let Some(limit) = self.opts.limit {
            out.truncate(limit);
        }
        Ok((out, invalid))
    }

    fn metadata(&self) -> Result<StageSummary, PipelineError> {
        let client = self.client(Stage::Metadata)?;
        let (names, invalid) = self.package_names()?;
        let mut s = StageSummary::new(Stage::Metadata);
        s.skipped = invalid;
        for chunk in names.chunks(BATCH) {
            let fetched: Vec<_> = self.pool.install(|| {
                chunk
                    .par_iter()
                    .map(|(name, _)| client.fetch_package_metadata(name))
                    .collect()
            });
            for ((name, raw), result) in chunk.iter().zip(fetched) {
                match result {
                    Ok(MetadataOutcome::Found(pkg)) => {
                        self.store.upsert_package(&pkg)?;
                        if let Some(author) = pkg.author.as_deref() {
                            self.store.record_author(
                                &pkg.name,
                                &self.opts.author_lists.classify(author),
                            )?;
                        }
                        s.processed += 1;
                    }
                    Ok(MetadataOutcome::Gone) => {
                        tracing::info!(package = %name, "package gone from registry");
                        self.store.mark_gone(name, raw)?;
                        s.skipped += 1;
                    }
                    Err(e) => {
                        tracing::warn!(package = %name, error = %e, "metadata fetch failed");
                        s.failed += 1;
                    }
                }
            }
        }
        Ok(s)
    }

    fn pending(&self) -> Result<Vec<PendingRelease>, PipelineError> {
        Ok(self.store.pending_scans(self.opts.rescan_failed)?)
    }

    fn sdists(&self) -> Result<StageSummary, PipelineError> {
        let client = self.client(Stage::Sdists)?;
        let pending = self.pending()?;
        let mut s = StageSummary::new(Stage::Sdists);
        let results: Vec<Option<Result<PathBuf, RegistryError>>> = self.pool.install(|| {
            pending
                .par_iter()
                .map(|p| choose_sdist(&p.sdists).map(|(f, _)| client.fetch_sdist(f)))
                .collect()
        });
        for (p, r) in pending.iter().zip(results) {
            match r {
                None => s.skipped += 1,
                Some(Ok(_)) => s.processed += 1,
                Some(Err(e)) => {
                    tracing::warn!(package = %p.package, version = %p.version, error = %e, "sdist fetch failed");
                    s.failed += 1;
                }
            }
        }
        Ok(s)
    }
}

fn scan_release(client: &RegistryClient, limits: ArchiveLimits, p: &PendingRelease) -> ScanOutcome {
    let Some((file, format)) = choose_sdist(&p.sdists) else {
        let detail = if p.sdists.is_empty() {
            "no source distribution".to_string()
        } else {
            "no sdist with a supported archive extension".to_string()
        };
        return ScanOutcome::NoSdist(detail);
    };
    let path = match client.fetch_sdist(file) {
        Ok(path) => path,
        Err(e) => return ScanOutcome::Failed(e.to_string()),
    };
    let mut files = Vec::new();
    let visited = catch_unwind(AssertUnwindSafe(|| {
        visit_python_sources(&path, format, limits, |entry, text| {
            let (statements, stage) = extract_imports(&text);
            files.push(ScannedFile {
                archive: file.filename.clone(),
                path: entry.path.clone(),
                stage,
                statements,
            });
        })
    }));
    match visited {
        Ok(Ok(_)) => ScanOutcome::Scanned { files, archives: 1 },
        Ok(Err(e)) => ScanOutcome::Failed(e.to_string()),
        Err(panic) => ScanOutcome::Failed(panic_message(panic.as_ref())),
    }
}

impl Pipeline<'_> {
    fn scan(&self) -> Result<StageSummary, PipelineError> {
        let client = self.client(Stage::Scan)?;
        let pending = self.pending()?;
        let mut s = StageSummary::new(Stage::Scan);
        for chunk in pending.chunks(BATCH) {
            let limits = self.opts.archive_limits;
            let outcomes: Vec<ScanOutcome> = self.pool.install(|| {
                chunk
                    .par_iter()
                    .map(|p| scan_release(client, limits, p))
                    .collect()
            });
            for (p, outcome) in chunk.iter().zip(outcomes) {
                match outcome {
                    ScanOutcome::Scanned { files, archives } => {
                        self.store.record_imports(p.release_id, &files, archives)?;
                        s.processed += 1;
                    }
                    ScanOutcome::NoSdist(detail) => {
                        self.store.record_scan_state(
                            p.release_id,
                            ScanState::NoSdist,
                            Some(&detail),
                        )?;
                        s.skipped += 1;
                    }
                    ScanOutcome::Failed(detail) => {
                        tracing::warn!(package = %p.package, version = %p.version, error = %detail, "scan failed");
                        self.store.record_scan_state(
                            p.release_id,
                            ScanState::Failed,
                            Some(&detail),
                        )?;
                        s.failed += 1;
                    }
                }
            }
        }
        Ok(s)
    }

    fn licenses(&self) -> Result<StageSummary, PipelineError> {
        let client = self.client(Stage::Licenses)?;
        let packages = self.store.load_packages()?;
        let rules = &self.opts.rules;
        let assigned: Vec<_> = self.pool.install(|| {
            packages
                .par_iter()
                .map(|p| resolve_package_license(p, rules, Some(client as &dyn LicenseFileSource)))
                .collect()
        });
        let mut s = StageSummary::new(Stage::Licenses);
        for (p, a) in packages.iter().zip(assigned) {
            self.store.record_license(&p.name, &a)?;
            s.processed += 1;
        }
        self.store.set_meta("ruleset_version", rules.version())?;
        Ok(s)
    }

    fn stats(&self) -> Result<StageSummary, PipelineError> {
        let input = ReportInput::load(self.store)?;
        let report_opts = &self.opts.report;
        let (tables, malformed) = self.pool.install(|| build_reports(&input, report_opts));
        let snapshot = self.store.snapshot()?;
        let meta = RunMetadata {
            corpus_id: snapshot.corpus_id,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            grammar_version: GRAMMAR_VERSION.to_string(),
            ruleset_version: self
                .store
                .meta("ruleset_version")?
                .unwrap_or_else(|| self.opts.rules.version().to_string()),
            author_lists_digest: author_lists_digest(&self.opts.author_lists),
            cagr_convention: self.opts.report.cagr_convention,
            cagr_years: self.opts.report.cagr_years,
            store_counts: snapshot.counts,
            source_files_by_stage: self.store.stage_counts()?,
            malformed_classifiers: malformed,
            tables: tables.iter().map(|t| t.name.clone()).collect(),
        };
        let dir = &self.opts.out_dir;
        write_reports(dir, &tables, &meta, self.opts.output).map_err(|source| {
            PipelineError::Output {
                path: dir.display().to_string(),
                source,
            }
        })?;
        let mut s = StageSummary::new(Stage::Stats);
        s.processed = tables.len();
        Ok(s)
    }
}
