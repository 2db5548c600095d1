use std::collections::HashMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use super::{LicenseFamily, LicenseId, LicenseVersion};

/// Rule set shipped with the crate.
pub const DEFAULT_RULES: &str = include_str!("../../data/license_rules.tsv");

#[derive(Debug, thiserror::Error)]
pub enum LicenseRuleError {
    #[error("rule file line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("reading rule file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Lowercases and replaces every run of non-alphanumerics with one space.
pub fn fold(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut gap = false;
    for c in raw.chars() {
        if c.is_alphanumeric() {
            if gap && !out.is_empty() {
                out.push(' ');
            }
            gap = false;
            out.extend(c.to_lowercase());
        } else {
            gap = true;
        }
    }
    out
}

/// Scheme, `www.`, trailing slashes and page suffixes removed; lowercased.
pub fn normalize_url(raw: &str) -> String {
    let mut s = raw.trim().to_lowercase();
    for scheme in ["https://", "http://"] {
        if let Some(rest) = s.strip_prefix(scheme) {
            s = rest.to_string();
            break;
        }
    }
    if let Some(rest) = s.strip_prefix("www.") {
        s = rest.to_string();
    }
    for suffix in [".html", ".htm", ".php", ".txt"] {
        if let Some(rest) = s.strip_suffix(suffix) {
            s = rest.to_string();
            break;
        }
    }
    s.trim_end_matches('/').to_string()
}

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)https?://[^\s<>"'()\[\]]+"#).expect("static regex"));

#[derive(Debug, Clone)]
pub struct LicenseRuleSet {
    version: String,
    names: HashMap<String, LicenseId>,
    urls: Vec<(String, LicenseId)>,
    /// Folded phrase padded with spaces so matches land on word boundaries.
    phrases: Vec<(String, LicenseId)>,
    classifiers: HashMap<String, LicenseId>,
}

fn normalize_label(raw: &str) -> String {
    raw.split("::")
        .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join(" :: ")
}

impl LicenseRuleSet {
    pub fn default_rules() -> Self {
        Self::parse(DEFAULT_RULES).expect("shipped rule set is valid")
    }

    pub fn load(path: &Path) -> Result<Self, LicenseRuleError> {
        let text = std::fs::read_to_string(path).map_err(|source| LicenseRuleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, LicenseRuleError> {
        let mut set = Self {
            version: "unversioned".into(),
            names: HashMap::new(),
            urls: Vec::new(),
            phrases: Vec::new(),
            classifiers: HashMap::new(),
        };
        let mut targets: Vec<LicenseId> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |reason: String| LicenseRuleError::Syntax {
                line: line_no,
                reason,
            };
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("ruleset-version:") {
                    set.version = v.trim().to_string();
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [kind, pattern, family, name, version] = cols[..] else {
                return Err(err(format!(
                    "expected 5 tab-separated columns, got {}",
                    cols.len()
                )));
            };
            let family = LicenseFamily::parse(family)
                .ok_or_else(|| err(format!("unknown family {family:?}")))?;
            if family == LicenseFamily::Unknown {
                return Err(err("rules may not target the Unknown family".into()));
            }
            if name.is_empty() || pattern.is_empty() {
                return Err(err("empty pattern or name".into()));
            }
            let id = LicenseId::new(family, name, LicenseVersion::parse(version));
            match kind {
                "name" => {
                    let key = fold(pattern);
                    if let Some(prev) = set.names.get(&key) {
                        if *prev != id {
                            return Err(err(format!("name {pattern:?} already maps elsewhere")));
                        }
                    }
                    set.names.insert(key, id.clone());
                }
                "url" => set.urls.push((normalize_url(pattern), id.clone())),
                "phrase" => set
                    .phrases
                    .push((format!(" {} ", fold(pattern)), id.clone())),
                "classifier" => {
                    set.classifiers.insert(normalize_label(pattern), id.clone());
                }
                other => return Err(err(format!("unknown rule kind {other:?}"))),
            }
            if !targets.contains(&id) {
                targets.push(id);
            }
        }
        // Canonical strings always map back to their own id.
        for id in targets {
            set.names.entry(fold(&id.canonical_string())).or_insert(id);
        }
        // Stable sort keeps file order among equal lengths.
        set.urls.sort_by_key(|(p, _)| std::cmp::Reverse(p.len()));
        Ok(set)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn lookup_name(&self, raw: &str) -> Option<&LicenseId> {
        self.names.get(&fold(raw))
    }

    pub fn lookup_url(&self, url: &str) -> Option<&LicenseId> {
        let norm = normalize_url(url);
        self.urls
            .iter()
            .find(|(pattern, _)| norm.contains(pattern.as_str()))
            .map(|(_, id)| id)
    }

    /// The family whose phrase occurs earliest in the text wins (license
    /// texts open with their own title but often cite others further down);
    /// within that family the first matching rule in file order decides.
    pub fn lookup_phrase(&self, text: &str) -> Option<&LicenseId> {
        let folded = format!(" {} ", fold(text));
        let hits: Vec<(usize, &LicenseId)> = self
            .phrases
            .iter()
            .filter_map(|(phrase, id)| folded.find(phrase.as_str()).map(|pos| (pos, id)))
            .collect();
        let family = hits.iter().min_by_key(|(pos, _)| *pos)?.1.family;
        hits.iter()
            .find(|(_, id)| id.family == family)
            .map(|(_, id)| *id)
    }

    pub fn lookup_classifier(&self, label: &str) -> Option<&LicenseId> {
        self.classifiers.get(&normalize_label(label))
    }

    /// Name map, then URLs embedded in the string, then phrases over the
    /// whole text.
    pub fn normalize(&self, raw: &str) -> Option<LicenseId> {
        if raw.trim().is_empty() {
            return None;
        }
        if let Some(id) = self.lookup_name(raw) {
            return Some(id.clone());
        }
        for m in URL_RE.find_iter(raw) {
            let url = m.as_str().trim_end_matches(['.', ',', ';']);
            if let Some(id) = self.lookup_url(url) {
                return Some(id.clone());
            }
        }
        self.lookup_phrase(raw).cloned()
    }

    /// Every distinct id the rule set can produce.
    pub fn targets(&self) -> Vec<LicenseId> {
        let mut all: Vec<LicenseId> = self
            .names
            .values()
            .chain(self.urls.iter().map(|(_, id)| id))
            .chain(self.phrases.iter().map(|(_, id)| id))
            .chain(self.classifiers.values())
            .cloned()
            .collect();
        all.sort();
        all.dedup();
        all
    }
}
