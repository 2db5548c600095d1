//! Command-line front end. `run` returns the process exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::archive::{detect_format, visit_python_sources, ArchiveLimits};
use crate::authors::AuthorLists;
use crate::imports::{extract_imports, ExtractionStage, ImportStatement};
use crate::license::LicenseRuleSet;
use crate::pipeline::{Pipeline, PipelineError, PipelineOptions, Stage, StageSummary};
use crate::registry::{RegistryClient, RegistrySource, DEFAULT_USER_AGENT};
use crate::report::{OutputFormat, ReportOptions, Table, Value};
use crate::stats::CagrConvention;
use crate::store::{Cell, Store, ViewParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_STORE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "pypi-census",
    version,
    about = "Mine a Python package registry into ecosystem statistics"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Offline fixture directory mirroring the registry layout.
    #[arg(
        long,
        global = true,
        env = "PYPI_CENSUS_FIXTURE",
        conflicts_with = "base_url"
    )]
    pub fixture: Option<PathBuf>,
    /// Live registry base URL.
    #[arg(long, global = true, env = "PYPI_CENSUS_BASE_URL")]
    pub base_url: Option<String>,
    #[arg(
        long,
        global = true,
        env = "PYPI_CENSUS_CACHE",
        default_value = ".pypi-census-cache"
    )]
    pub cache_dir: PathBuf,
    /// Live-mode requests per second.
    #[arg(
        long,
        global = true,
        env = "PYPI_CENSUS_RATE_LIMIT",
        default_value_t = 5.0
    )]
    pub rate_limit: f64,
    #[arg(long, global = true, env = "PYPI_CENSUS_USER_AGENT", default_value = DEFAULT_USER_AGENT)]
    pub user_agent: String,
    #[arg(
        long,
        global = true,
        env = "PYPI_CENSUS_STORE",
        default_value = "census.db"
    )]
    pub store: PathBuf,
    /// Worker threads for every pool.
    #[arg(long, global = true, env = "PYPI_CENSUS_JOBS", default_value_t = 8)]
    pub jobs: usize,
    /// Process at most this many packages from the index.
    #[arg(long, global = true)]
    pub limit: Option<usize>,
    /// License rule file replacing the shipped rule set.
    #[arg(long, global = true)]
    pub rules: Option<PathBuf>,
    /// Organization abbreviation/token file replacing the shipped lists.
    #[arg(long, global = true)]
    pub author_lists: Option<PathBuf>,
    /// Per-stage item failure share above which the exit status is 1.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub max_failure_rate: f64,
    /// Retry releases whose previous scan failed.
    #[arg(long, global = true)]
    pub rescan_failed: bool,
    /// Log more (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long, default_value = "reports")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub output: OutputFormat,
    #[arg(long, value_enum, default_value_t = ConventionArg::Inclusive)]
    pub cagr_convention: ConventionArg,
    #[arg(long, requires = "cagr_end")]
    pub cagr_start: Option<i32>,
    #[arg(long, requires = "cagr_start")]
    pub cagr_end: Option<i32>,
    /// Identifier recorded with the reports; defaults to a digest of the index.
    #[arg(long)]
    pub corpus_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ConventionArg {
    /// Exponent counts both endpoint years.
    Inclusive,
    /// Exponent counts year intervals.
    Interval,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fetch the project index.
    FetchIndex,
    /// Fetch and store metadata for every indexed package.
    FetchMetadata,
    /// Download source archives of unscanned releases into the cache.
    FetchSdists,
    /// Extract import statements from cached source archives.
    ScanImports,
    /// Resolve each package's license.
    ResolveLicenses,
    /// Compute every report table from the store.
    Stats(ReportArgs),
    /// Print one store view.
    Report {
        /// View name; one of the store's catalog.
        #[arg(long)]
        view: String,
        #[arg(long)]
        package: Option<String>,
        #[arg(long = "rows")]
        rows: Option<u64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        output: OutputFormat,
    },
    /// Run several stages in dependency order.
    Run {
        /// Comma-separated subset of index,metadata,sdists,scan,licenses,stats.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "index,metadata,sdists,scan,licenses,stats"
        )]
        stages: Vec<String>,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Print the imports found in Python files or source archives.
    ExtractImports {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        output: OutputFormat,
    },
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn usage(msg: impl Into<String>) -> PipelineError {
    PipelineError::Usage(msg.into())
}

fn registry_source(g: &GlobalArgs) -> Result<RegistrySource, PipelineError> {
    let mut src = match (&g.fixture, &g.base_url) {
        (Some(root), _) => RegistrySource::fixture(root, &g.cache_dir),
        (None, Some(url)) => {
            RegistrySource::live(url.trim_end_matches('/'), &g.cache_dir, g.rate_limit)
        }
        (None, None) => RegistrySource::live("https://pypi.org", &g.cache_dir, g.rate_limit),
    };
    src.user_agent = g.user_agent.clone();
    src.validate().map_err(|e| usage(e.to_string()))?;
    Ok(src)
}

fn options(g: &GlobalArgs, report: Option<&ReportArgs>) -> Result<PipelineOptions, PipelineError> {
    let rules = match &g.rules {
        Some(p) => LicenseRuleSet::load(p).map_err(|e| usage(e.to_string()))?,
        None => LicenseRuleSet::default_rules(),
    };
    let author_lists = match &g.author_lists {
        Some(p) => AuthorLists::load(p).map_err(|e| usage(e.to_string()))?,
        None => AuthorLists::default(),
    };
    if !(0.0..=1.0).contains(&g.max_failure_rate) {
        return Err(usage("--max-failure-rate must be between 0 and 1"));
    }
    let mut opts = PipelineOptions {
        jobs: g.jobs,
        limit: g.limit,
        rules,
        author_lists,
        archive_limits: ArchiveLimits::default(),
        rescan_failed: g.rescan_failed,
        ..PipelineOptions::default()
    };
    if let Some(r) = report {
        opts.out_dir = r.out_dir.clone();
        opts.output = r.output;
        opts.corpus_id = r.corpus_id.clone();
        opts.report = ReportOptions {
            cagr_convention: match r.cagr_convention {
                ConventionArg::Inclusive => CagrConvention::Inclusive,
                ConventionArg::Interval => CagrConvention::Interval,
            },
            cagr_years: r.cagr_start.zip(r.cagr_end),
            ..ReportOptions::default()
        };
        if let Some((a, b)) = opts.report.cagr_years {
            if a >= b {
                return Err(usage("--cagr-start must be before --cagr-end"));
            }
        }
    }
    Ok(opts)
}

fn parse_stages(names: &[String]) -> Result<Vec<Stage>, PipelineError> {
    names
        .iter()
        .map(|n| n.trim())
        .filter(|n| !n.is_empty())
        .map(|n| Stage::parse(n).ok_or_else(|| usage(format!("unknown stage {n:?}"))))
        .collect()
}

fn run_stages(
    g: &GlobalArgs,
    stages: &[Stage],
    report: Option<&ReportArgs>,
) -> Result<Vec<StageSummary>, PipelineError> {
    let opts = options(g, report)?;
    let store = Store::open(&g.store)?;
    let needs_registry = stages.iter().any(|s| *s != Stage::Stats);
    let client = if needs_registry {
        Some(RegistryClient::new(registry_source(g)?).map_err(|e| usage(e.to_string()))?)
    } else {
        None
    };
    let pipeline = Pipeline::new(&store, client.as_ref(), opts)?;
    pipeline.run(stages)
}

fn cell_value(c: &Cell) -> Value {
    match c {
        Cell::Null => Value::Null,
        Cell::Int(v) => Value::Int(*v),
        Cell::Real(v) => Value::Float(*v),
        Cell::Text(s) => Value::Text(s.clone()),
    }
}

fn print_view(
    g: &GlobalArgs,
    view: &str,
    package: Option<String>,
    rows: Option<u64>,
    output: OutputFormat,
) -> Result<(), PipelineError> {
    let store = Store::open(&g.store)?;
    let result = store
        .query(
            view,
            &ViewParams {
                package,
                limit: rows,
            },
        )
        .map_err(|e| match e {
            crate::store::StoreError::UnknownView(_) => usage(e.to_string()),
            other => other.into(),
        })?;
    let cols: Vec<&str> = result.columns.iter().map(String::as_str).collect();
    let mut t = Table::new(view, &cols);
    for r in &result.rows {
        t.push(r.iter().map(cell_value).collect());
    }
    write_stdout(&t.render(output))
}

fn write_stdout(bytes: &[u8]) -> Result<(), PipelineError> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|source| PipelineError::Output {
            path: "<stdout>".into(),
            source,
        })
}

fn imports_table(
    path: &Path,
    file: &str,
    stmts: &[ImportStatement],
    stage: ExtractionStage,
    t: &mut Table,
) {
    for s in stmts {
        let names: Vec<String> = s
            .names
            .iter()
            .map(|n| match &n.alias {
                Some(a) => format!("{} as {a}", n.name),
                None => n.name.clone(),
            })
            .collect();
        t.push(vec![
            path.display().to_string().into(),
            file.into(),
            s.line.into(),
            s.module.as_str().into(),
            names.join(", ").into(),
            s.alias.clone().into(),
            s.relative_level.into(),
            Value::Int(s.is_star.into()),
            stage.as_str().into(),
        ]);
    }
}

fn extract_paths(paths: &[PathBuf], output: OutputFormat) -> Result<(), PipelineError> {
    let mut t = Table::new(
        "imports",
        &[
            "path", "file", "line", "module", "names", "alias", "level", "is_star", "stage",
        ],
    );
    for path in paths {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        if let Some(fmt) = detect_format(name) {
            let mut err = None;
            visit_python_sources(path, fmt, ArchiveLimits::default(), |entry, text| {
                let (stmts, stage) = extract_imports(&text);
                imports_table(path, &entry.path, &stmts, stage, &mut t);
            })
            .unwrap_or_else(|e| {
                err = Some(e);
                Default::default()
            });
            if let Some(e) = err {
                return Err(usage(e.to_string()));
            }
        } else {
            let bytes =
                std::fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let text = crate::archive::decode_source(&bytes);
            let (stmts, stage) = extract_imports(&text);
            imports_table(path, "", &stmts, stage, &mut t);
        }
    }
    write_stdout(&t.render(output))
}

fn exit_for(summaries: &[StageSummary], max_failure_rate: f64) -> i32 {
    let mut code = EXIT_OK;
    for s in summaries {
        eprintln!(
            "{}: {} processed, {} failed, {} skipped",
            s.stage, s.processed, s.failed, s.skipped
        );
        if s.failure_rate() > max_failure_rate {
            code = EXIT_PARTIAL;
        }
    }
    code
}

pub fn execute(cli: Cli) -> i32 {
    init_logging(cli.global.verbose);
    let g = &cli.global;
    let result = match &cli.command {
        Command::FetchIndex => run_stages(g, &[Stage::Index], None),
        Command::FetchMetadata => run_stages(g, &[Stage::Metadata], None),
        Command::FetchSdists => run_stages(g, &[Stage::Sdists], None),
        Command::ScanImports => run_stages(g, &[Stage::Scan], None),
        Command::ResolveLicenses => run_stages(g, &[Stage::Licenses], None),
        Command::Stats(r) => run_stages(g, &[Stage::Stats], Some(r)),
        Command::Run { stages, report } => parse_stages(stages).and_then(|s| {
            if s.is_empty() {
                Err(usage("--stages is empty"))
            } else {
                run_stages(g, &s, Some(report))
            }
        }),
        Command::Report {
            view,
            package,
            rows,
            output,
        } => print_view(g, view, package.clone(), *rows, *output).map(|_| Vec::new()),
        Command::ExtractImports { paths, output } => {
            extract_paths(paths, *output).map(|_| Vec::new())
        }
    };
    match result {
        Ok(summaries) => exit_for(&summaries, g.max_failure_rate),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }
    }
}
