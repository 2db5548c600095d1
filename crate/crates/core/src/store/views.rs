//! Named read-only queries over the store, each with a fixed row order.

use std::path::Path;

use rusqlite::types::ValueRef;
use rusqlite::Connection;
use serde::Serialize;

use super::StoreError;

pub const VIEWS: [&str; 5] = [
    "activity_feed",
    "imports_with_year",
    "license_assignments",
    "author_flags",
    "sizes",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ViewParams {
    /// Restrict to one normalized package name.
    pub package: Option<String>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewRows {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

fn sql_for(view: &str) -> Option<&'static str> {
    Some(match view {
        "activity_feed" => {
            "SELECT p.name AS package, r.version, r.upload_time, p.author,
                    (SELECT count(*) FROM files f WHERE f.release_id = r.id) AS files
             FROM releases r JOIN packages p ON p.id = r.package_id
             WHERE p.gone = 0 AND (?1 IS NULL OR p.name = ?1)
             ORDER BY p.name, r.upload_time, r.version"
        }
        "imports_with_year" => {
            "SELECT p.name AS package, r.version, CAST(substr(r.upload_time, 1, 4) AS INTEGER) AS year,
                    i.archive, i.file_path, i.line, i.module, i.level, i.is_star, i.stage
             FROM imports i JOIN releases r ON r.id = i.release_id JOIN packages p ON p.id = r.package_id
             WHERE p.gone = 0 AND (?1 IS NULL OR p.name = ?1)
             ORDER BY p.name, r.upload_time, r.version, i.archive, i.file_path, i.line, i.seq"
        }
        "license_assignments" => {
            "SELECT p.name AS package, l.family, l.name, l.version, l.source, l.ambiguous
             FROM licenses l JOIN packages p ON p.id = l.package_id
             WHERE p.gone = 0 AND (?1 IS NULL OR p.name = ?1)
             ORDER BY p.name"
        }
        "author_flags" => {
            "SELECT p.name AS package, a.author_key, a.raw, a.is_multiple, a.is_organization
             FROM author_flags a JOIN packages p ON p.id = a.package_id
             WHERE p.gone = 0 AND (?1 IS NULL OR p.name = ?1)
             ORDER BY p.name"
        }
        "sizes" => {
            "SELECT p.name AS package, r.version, r.upload_time, sum(f.size_bytes) AS size_bytes
             FROM releases r JOIN packages p ON p.id = r.package_id JOIN files f ON f.release_id = r.id
             WHERE p.gone = 0 AND (?1 IS NULL OR p.name = ?1)
             GROUP BY r.id
             ORDER BY p.name, r.upload_time, r.version"
        }
        _ => return None,
    })
}

pub(super) fn run(
    conn: &Connection,
    path: &Path,
    view: &str,
    params: &ViewParams,
) -> Result<ViewRows, StoreError> {
    let sql = sql_for(view).ok_or_else(|| StoreError::UnknownView(view.to_string()))?;
    let sql = match params.limit {
        Some(n) => format!("{sql} LIMIT {n}"),
        None => sql.to_string(),
    };
    let e = |source| StoreError::Sqlite {
        path: path.display().to_string(),
        source,
    };
    let mut stmt = conn.prepare(&sql).map_err(e)?;
    let columns: Vec<String> = stmt
        .column_names()
        .into_iter()
        .map(str::to_string)
        .collect();
    let width = columns.len();
    let rows = stmt
        .query_map([params.package.as_deref()], |r| {
            (0..width)
                .map(|i| {
                    Ok(match r.get_ref(i)? {
                        ValueRef::Null => Cell::Null,
                        ValueRef::Integer(v) => Cell::Int(v),
                        ValueRef::Real(v) => Cell::Real(v),
                        ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
                        ValueRef::Blob(b) => Cell::Text(hex::encode(b)),
                    })
                })
                .collect::<rusqlite::Result<Vec<_>>>()
        })
        .map_err(e)?
        .collect::<rusqlite::Result<Vec<_>>>()
        .map_err(e)?;
    Ok(ViewRows { columns, rows })
}
