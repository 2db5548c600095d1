//! Source-archive access: format detection, entry listing and decoded text
//! of `.py` members, all streamed without extracting to disk.

mod decode;

use std::cell::Cell;
use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

pub use decode::{declared_encoding, decode_source};

pub const DEFAULT_MAX_TOTAL_BYTES: u64 = 4 << 30;
pub const DEFAULT_MAX_ENTRY_BYTES: u64 = 16 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchiveFormat {
    Zip,
    Egg,
    Tar,
    TarGz,
    Tgz,
    TarBz2,
    Tbz,
}

impl ArchiveFormat {
    pub const ALL: [ArchiveFormat; 7] = [
        Self::Zip,
        Self::Egg,
        Self::Tar,
        Self::TarGz,
        Self::Tgz,
        Self::TarBz2,
        Self::Tbz,
    ];

    pub fn extension(self) -> &'static str {
        match self {
            Self::Zip => ".zip",
            Self::Egg => ".egg",
            Self::Tar => ".tar",
            Self::TarGz => ".tar.gz",
            Self::Tgz => ".tgz",
            Self::TarBz2 => ".tar.bz2",
            Self::Tbz => ".tbz",
        }
    }

    fn is_zip_container(self) -> bool {
        matches!(self, Self::Zip | Self::Egg)
    }
}

/// Maps a filename to its archive format by case-sensitive extension,
/// longest extension first. `None` means the file is not attempted.
pub fn detect_format(filename: &str) -> Option<ArchiveFormat> {
    const BY_LENGTH: [ArchiveFormat; 7] = [
        ArchiveFormat::TarBz2,
        ArchiveFormat::TarGz,
        ArchiveFormat::Tgz,
        ArchiveFormat::Tbz,
        ArchiveFormat::Tar,
        ArchiveFormat::Zip,
        ArchiveFormat::Egg,
    ];
    BY_LENGTH
        .into_iter()
        .find(|f| filename.len() > f.extension().len() && filename.ends_with(f.extension()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub path: String,
    pub size_bytes: u64,
    pub is_python_source: bool,
}

impl SourceEntry {
    fn new(path: String, size_bytes: u64) -> Self {
        let is_python_source = path.ends_with(".py");
        Self {
            path,
            size_bytes,
            is_python_source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchiveLimits {
    /// Cap on cumulative decompressed bytes read from one archive.
    pub max_total_bytes: u64,
    /// Source entries larger than this are skipped during analysis.
    pub max_entry_bytes: u64,
}

impl Default for ArchiveLimits {
    fn default() -> Self {
        Self {
            max_total_bytes: DEFAULT_MAX_TOTAL_BYTES,
            max_entry_bytes: DEFAULT_MAX_ENTRY_BYTES,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("{}: {source}", archive.display())]
    Io {
        archive: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: corrupt archive: {reason}", archive.display())]
    Corrupt { archive: PathBuf, reason: String },
    #[error("{}: decompressed size exceeds {limit} bytes", archive.display())]
    TooLarge { archive: PathBuf, limit: u64 },
    #[error("{}: no entry named {entry:?}", archive.display())]
    EntryMissing { archive: PathBuf, entry: String },
}

/// Counts decompressed bytes and fails the stream once the cap is passed.
struct CappedReader<R> {
    inner: R,
    read: Rc<Cell<u64>>,
    cap: u64,
    tripped: Rc<Cell<bool>>,
}

impl<R: Read> Read for CappedReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        let total = self.read.get() + n as u64;
        self.read.set(total);
        if total > self.cap {
            self.tripped.set(true);
            return Err(io::Error::other("decompression cap exceeded"));
        }
        Ok(n)
    }
}

/// Visitor decision for each enumerated entry.
enum Want {
    Skip,
    Content,
    Stop,
}

struct Walker<'a> {
    archive: &'a Path,
    limits: ArchiveLimits,
    tripped: Rc<Cell<bool>>,
}

impl Walker<'_> {
    fn err(&self, e: io::Error) -> ArchiveError {
        if self.tripped.get() {
            ArchiveError::TooLarge {
                archive: self.archive.to_path_buf(),
                limit: self.limits.max_total_bytes,
            }
        } else {
            ArchiveError::Corrupt {
                archive: self.archive.to_path_buf(),
                reason: e.to_string(),
            }
        }
    }

    fn walk<F>(&self, format: ArchiveFormat, mut visit: F) -> Result<(), ArchiveError>
    where
        F: FnMut(&SourceEntry, Option<Vec<u8>>) -> Want,
    {
        let file = File::open(self.archive).map_err(|e| ArchiveError::Io {
            archive: self.archive.to_path_buf(),
            source: e,
        })?;
        if format.is_zip_container() {
            return self.walk_zip(file, &mut visit);
        }
        let raw = BufReader::new(file);
        let decoded: Box<dyn Read> = match format {
            ArchiveFormat::Tar => Box::new(raw),
            ArchiveFormat::TarGz | ArchiveFormat::Tgz => {
                Box::new(flate2::read::MultiGzDecoder::new(raw))
            }
            ArchiveFormat::TarBz2 | ArchiveFormat::Tbz => {
                Box::new(bzip2::read::MultiBzDecoder::new(raw))
            }
            ArchiveFormat::Zip | ArchiveFormat::Egg => unreachable!(),
        };
        self.walk_tar(decoded, &mut visit)
    }

    fn walk_tar<F>(&self, stream: Box<dyn Read>, visit: &mut F) -> Result<(), ArchiveError>
    where
        F: FnMut(&SourceEntry, Option<Vec<u8>>) -> Want,
    {
        let capped = CappedReader {
            inner: stream,
            read: Rc::new(Cell::new(0)),
            cap: self.limits.max_total_bytes,
            tripped: Rc::clone(&self.tripped),
        };
        let mut archive = tar::Archive::new(capped);
        for entry in archive.entries().map_err(|e| self.err(e))? {
            let mut entry = entry.map_err(|e| self.err(e))?;
            let kind = entry.header().entry_type();
            if !(kind.is_file() || kind.is_contiguous()) {
                continue;
            }
            let path = entry
                .path()
                .map_err(|e| self.err(e))?
                .to_string_lossy()
                .replace('\\', "/");
            let meta = SourceEntry::new(path, entry.size());
            match visit(&meta, None) {
                Want::Skip => {}
                Want::Stop => return Ok(()),
                Want::Content => {
                    let mut buf = Vec::with_capacity(meta.size_bytes.min(1 << 20) as usize);
                    entry.read_to_end(&mut buf).map_err(|e| self.err(e))?;
                    if let Want::Stop = visit(&meta, Some(buf)) {
                        return Ok(());
                    }
                }
            }
        }
        Ok(())
    }

    fn walk_zip<F>(&self, file: File, visit: &mut F) -> Result<(), ArchiveError>
    where
        F: FnMut(&SourceEntry, Option<Vec<u8>>) -> Want,
    {
        let corrupt = |reason: String| ArchiveError::Corrupt {
            archive: self.archive.to_path_buf(),
            reason,
        };
        let mut zip =
            zip::ZipArchive::new(BufReader::new(file)).map_err(|e| corrupt(e.to_string()))?;
        let mut consumed = 0u64;
        for i in 0..zip.len() {
            let meta = {
                let raw = zip.by_index_raw(i).map_err(|e| corrupt(e.to_string()))?;
                let is_symlink = raw.unix_mode().is_some_and(|m| m & 0o170000 == 0o120000);
                if raw.is_dir() || is_symlink {
                    continue;
                }
                SourceEntry::new(raw.name().replace('\\', "/"), raw.size())
            };
            match visit(&meta, None) {
                Want::Skip => {}
                Want::Stop => return Ok(()),
                Want::Content => {
                    let mut entry = zip.by_index(i).map_err(|e| corrupt(e.to_string()))?;
                    let remaining = self.limits.max_total_bytes.saturating_sub(consumed);
                    let mut buf = Vec::new();
                    (&mut entry)
                        .take(remaining + 1)
                        .read_to_end(&mut buf)
                        .map_err(|e| corrupt(e.to_string()))?;
                    consumed += buf.len() as u64;
                    if consumed > self.limits.max_total_bytes {
                        return Err(ArchiveError::TooLarge {
                            archive: self.archive.to_path_buf(),
                            limit: self.limits.max_total_bytes,
                        });
                    }
                    if let Want::Stop = visit(&meta, Some(buf)) {
                        return Ok(());
                    }
                }
            }
        }
        Ok(())
    }
}

fn walker(archive: &Path, limits: ArchiveLimits) -> Walker<'_> {
    Walker {
        archive,
        limits,
        tripped: Rc::new(Cell::new(false)),
    }
}

/// Every file entry in archive order; directories and links are excluded.
pub fn list_source_entries(
    archive: &Path,
    format: ArchiveFormat,
) -> Result<Vec<SourceEntry>, ArchiveError> {
    list_source_entries_with(archive, format, ArchiveLimits::default())
}

pub fn list_source_entries_with(
    archive: &Path,
    format: ArchiveFormat,
    limits: ArchiveLimits,
) -> Result<Vec<SourceEntry>, ArchiveError> {
    let mut out = Vec::new();
    walker(archive, limits).walk(format, |entry, _| {
        out.push(entry.clone());
        Want::Skip
    })?;
    Ok(out)
}

/// Decoded text of one entry, located by path.
pub fn read_entry_text(
    archive: &Path,
    format: ArchiveFormat,
    entry: &SourceEntry,
) -> Result<String, ArchiveError> {
    let mut found = None;
    walker(archive, ArchiveLimits::default()).walk(format, |e, content| match content {
        None if e.path == entry.path => Want::Content,
        None => Want::Skip,
        Some(bytes) => {
            found = Some(decode_source(&bytes));
            Want::Stop
        }
    })?;
    found.ok_or_else(|| ArchiveError::EntryMissing {
        archive: archive.to_path_buf(),
        entry: entry.path.clone(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VisitSummary {
    pub entries: usize,
    pub python_sources: usize,
    pub skipped_oversize: usize,
}

/// Single streaming pass that hands every `.py` entry's decoded text to
/// `on_source`. Oversized sources are skipped with a warning.
pub fn visit_python_sources<F>(
    archive: &Path,
    format: ArchiveFormat,
    limits: ArchiveLimits,
    mut on_source: F,
) -> Result<VisitSummary, ArchiveError>
where
    F: FnMut(&SourceEntry, String),
{
    let mut summary = VisitSummary::default();
    walker(archive, limits).walk(format, |entry, content| match content {
        None => {
            summary.entries += 1;
            if !entry.is_python_source {
                return Want::Skip;
            }
            if entry.size_bytes > limits.max_entry_bytes {
                tracing::warn!(
                    archive = %archive.display(),
                    entry = %entry.path,
                    size = entry.size_bytes,
                    "skipping oversized source file"
                );
                summary.skipped_oversize += 1;
                return Want::Skip;
            }
            Want::Content
        }
        Some(bytes) => {
            summary.python_sources += 1;
            on_source(entry, decode_source(&bytes));
            Want::Skip
        }
    })?;
    Ok(summary)
}
