use crate::registry::{PackageRecord, RegistryClient};

use super::{LicenseAssignment, LicenseId, LicenseRuleSet, LicenseSource};

/// Tried in order when the license field does not name a path.
pub const DEFAULT_LICENSE_FILES: [&str; 4] =
    ["LICENSE", "LICENSE.txt", "LICENSE.md", "LICENSE.rst"];

/// Reads single files out of a code-host repository.
pub trait LicenseFileSource {
    /// `None` when the file is missing or cannot be fetched.
    fn repo_file(&self, owner: &str, repo: &str, path: &str) -> Option<Vec<u8>>;
}

impl LicenseFileSource for RegistryClient {
    fn repo_file(&self, owner: &str, repo: &str, path: &str) -> Option<Vec<u8>> {
        match self.fetch_repo_file(owner, repo, path) {
            Ok(body) => body,
            Err(e) => {
                tracing::debug!(owner, repo, path, error = %e, "repository file fetch failed");
                None
            }
        }
    }
}

/// `(owner, repo)` for a GitHub project URL.
pub fn parse_repository_url(home_page: &str) -> Option<(String, String)> {
    let s = home_page.trim();
    let rest = s
        .strip_prefix("https://")
        .or_else(|| s.strip_prefix("http://"))?;
    let rest = rest.strip_prefix("www.").unwrap_or(rest);
    let (host, path) = rest.split_once('/')?;
    if !host.eq_ignore_ascii_case("github.com") {
        return None;
    }
    let mut parts = path.split(['/', '?', '#']).filter(|p| !p.is_empty());
    let owner = parts.next()?;
    let repo = parts.next()?;
    let repo = repo.strip_suffix(".git").unwrap_or(repo);
    let valid = |p: &str| {
        !p.is_empty()
            && p != "."
            && p != ".."
            && p.chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
    };
    (valid(owner) && valid(repo)).then(|| (owner.to_string(), repo.to_string()))
}

/// A repository-relative path when the license field looks like one
/// (`docs/COPYING`, `LICENSE.txt`).
fn license_field_path(field: &str) -> Option<String> {
    let f = field.trim();
    if f.is_empty() || f.chars().any(char::is_whitespace) || f.contains("://") {
        return None;
    }
    let f = f.trim_start_matches("./").trim_start_matches('/');
    if f.split('/').any(|seg| seg.is_empty() || seg == "..") {
        return None;
    }
    let file = f.rsplit('/').next().unwrap_or(f);
    let upper = file.to_ascii_uppercase();
    let named_like_license = ["LICENSE", "LICENCE", "COPYING"]
        .iter()
        .any(|p| upper.starts_with(p));
    let has_text_ext = [".txt", ".md", ".rst"]
        .iter()
        .any(|e| file.to_ascii_lowercase().ends_with(e));
    (f.contains('/') || named_like_license || has_text_ext).then(|| f.to_string())
}

/// License file text from the package's repository, if its home page is one.
pub fn fetch_license_file(
    source: &dyn LicenseFileSource,
    home_page: &str,
    license_field: Option<&str>,
) -> Option<String> {
    let (owner, repo) = parse_repository_url(home_page)?;
    if let Some(path) = license_field.and_then(license_field_path) {
        return source
            .repo_file(&owner, &repo, &path)
            .map(|b| String::from_utf8_lossy(&b).into_owned());
    }
    DEFAULT_LICENSE_FILES.iter().find_map(|name| {
        source
            .repo_file(&owner, &repo, name)
            .map(|b| String::from_utf8_lossy(&b).into_owned())
    })
}

pub fn resolve_from_license_file(text: &str, rules: &LicenseRuleSet) -> Option<LicenseAssignment> {
    rules
        .lookup_phrase(text)
        .cloned()
        .map(|id| LicenseAssignment::from_id(id, LicenseSource::LicenseFile))
}

/// Maps `License ::` labels; disagreeing labels give the ambiguous marker.
pub fn resolve_from_classifiers<S: AsRef<str>>(
    labels: &[S],
    rules: &LicenseRuleSet,
) -> Option<LicenseAssignment> {
    let mut found: Vec<&LicenseId> = labels
        .iter()
        .map(AsRef::as_ref)
        .filter(|l| l.trim_start().starts_with("License"))
        .filter_map(|l| rules.lookup_classifier(l))
        .collect();
    found.sort();
    found.dedup();
    match found.as_slice() {
        [] => None,
        [one] => Some(LicenseAssignment::from_id(
            (*one).clone(),
            LicenseSource::Classifier,
        )),
        _ => Some(LicenseAssignment::ambiguous_classifiers()),
    }
}

/// The full cascade. Each tier runs only when every earlier tier came up
/// empty.
pub fn resolve_package_license(
    pkg: &PackageRecord,
    rules: &LicenseRuleSet,
    files: Option<&dyn LicenseFileSource>,
) -> LicenseAssignment {
    if let Some(id) = pkg
        .license_field
        .as_deref()
        .and_then(|f| rules.normalize(f))
    {
        return LicenseAssignment::from_id(id, LicenseSource::MetadataField);
    }
    if let (Some(files), Some(home)) = (files, pkg.home_page.as_deref()) {
        if let Some(a) = fetch_license_file(files, home, pkg.license_field.as_deref())
            .and_then(|text| resolve_from_license_file(&text, rules))
        {
            return a;
        }
    }
    resolve_from_classifiers(&pkg.classifiers, rules).unwrap_or_else(LicenseAssignment::unknown)
}

#[cfg(test)]
mod tests {
    use std::cell::RefCell;
    use std::collections::HashMap;

    use super::*;
    use crate::license::{LicenseFamily, LicenseVersion};

    #[derive(Default)]
    struct Repo {
        files: HashMap<String, String>,
        requests: RefCell<Vec<String>>,
    }

    impl LicenseFileSource for Repo {
        fn repo_file(&self, owner: &str, repo: &str, path: &str) -> Option<Vec<u8>> {
            let key = format!("{owner}/{repo}/{path}");
            self.requests.borrow_mut().push(key.clone());
            self.files.get(&key).map(|s| s.as_bytes().to_vec())
        }
    }

    fn repo(files: &[(&str, &str)]) -> Repo {
        Repo {
            files: files
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            ..Repo::default()
        }
    }

    fn pkg(field: Option<&str>, home: Option<&str>, classifiers: &[&str]) -> PackageRecord {
        PackageRecord {
            name: "p".into(),
            raw_name: "p".into(),
            author: None,
            maintainer: None,
            home_page: home.map(str::to_string),
            license_field: field.map(str::to_string),
            classifiers: classifiers.iter().map(|s| s.to_string()).collect(),
            releases: Vec::new(),
        }
    }

    #[test]
    fn repository_urls() {
        assert_eq!(
            parse_repository_url("https://github.com/psf/requests"),
            Some(("psf".into(), "requests".into()))
        );
        assert_eq!(
            parse_repository_url("http://www.github.com/a/b.git/tree/master"),
            Some(("a".into(), "b".into()))
        );
        assert_eq!(parse_repository_url("https://example.org/a/b"), None);
        assert_eq!(parse_repository_url("https://github.com/onlyowner"), None);
        assert_eq!(parse_repository_url("github.com/a/b"), None);
    }

    #[test]
    fn path_like_fields() {
        assert_eq!(
            license_field_path("docs/COPYING").as_deref(),
            Some("docs/COPYING")
        );
        assert_eq!(
            license_field_path("LICENSE.txt").as_deref(),
            Some("LICENSE.txt")
        );
        assert_eq!(license_field_path("./COPYING").as_deref(), Some("COPYING"));
        assert_eq!(license_field_path("MIT"), None);
        assert_eq!(license_field_path("BSD License"), None);
        assert_eq!(license_field_path("../etc/passwd"), None);
        assert_eq!(license_field_path("http://x/y"), None);
    }

    #[test]
    fn default_names_are_tried_in_order() {
        let r = repo(&[
            ("o/r/LICENSE.md", "md text"),
            ("o/r/LICENSE.rst", "rst text"),
        ]);
        assert_eq!(
            fetch_license_file(&r, "https://github.com/o/r", None).as_deref(),
            Some("md text")
        );
        assert_eq!(
            *r.requests.borrow(),
            ["o/r/LICENSE", "o/r/LICENSE.txt", "o/r/LICENSE.md"]
        );
    }

    #[test]
    fn field_path_is_fetched_directly() {
        let r = repo(&[("o/r/docs/COPYING", "copying"), ("o/r/LICENSE", "default")]);
        assert_eq!(
            fetch_license_file(&r, "https://github.com/o/r", Some("docs/COPYING")).as_deref(),
            Some("copying")
        );
        assert_eq!(
            fetch_license_file(&r, "https://pypi.org/project/x", None),
            None
        );
    }

    #[test]
    fn classifier_conflicts_are_ambiguous() {
        let rules = LicenseRuleSet::default_rules();
        let mit = resolve_from_classifiers(
            &[
                "License :: OSI Approved :: MIT License",
                "Topic :: Utilities",
            ],
            &rules,
        )
        .unwrap();
        assert_eq!(
            (mit.family, mit.source, mit.ambiguous),
            (LicenseFamily::MIT, LicenseSource::Classifier, false)
        );
        let dup = resolve_from_classifiers(
            &[
                "License :: OSI Approved :: MIT License",
                "License :: OSI Approved :: MIT License",
            ],
            &rules,
        )
        .unwrap();
        assert!(!dup.ambiguous);
        let labels = [
            "License :: OSI Approved :: MIT License",
            "License :: OSI Approved :: BSD License",
            "License :: OSI Approved :: Apache Software License",
            "License :: OSI Approved :: GNU General Public License v2 (GPLv2)",
            "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
            "License :: OSI Approved :: GNU Lesser General Public License v3 (LGPLv3)",
            "License :: OSI Approved :: ISC License (ISCL)",
            "License :: OSI Approved :: Mozilla Public License 2.0 (MPL 2.0)",
            "License :: Public Domain",
        ];
        let amb = resolve_from_classifiers(&labels, &rules).unwrap();
        assert_eq!(amb.family, LicenseFamily::Unknown);
        assert_eq!(amb.source, LicenseSource::Classifier);
        assert!(amb.ambiguous);
        assert!(resolve_from_classifiers::<&str>(&[], &rules).is_none());
        assert!(resolve_from_classifiers(&["License :: OSI Approved"], &rules).is_none());
    }

    #[test]
    fn cascade_tiers() {
        let rules = LicenseRuleSet::default_rules();
        let gpl3 = std::fs::read_to_string("/usr/share/common-licenses/GPL-3")
            .unwrap_or_else(|_| "GNU GENERAL PUBLIC LICENSE\n Version 3, 29 June 2007".into());
        let r = repo(&[("o/r/LICENSE", gpl3.as_str())]);

        let a = resolve_package_license(
            &pkg(
                Some("BSD 3 Clause License"),
                Some("https://github.com/o/r"),
                &[],
            ),
            &rules,
            Some(&r),
        );
        assert_eq!(
            (a.family, a.version.clone(), a.source),
            (
                LicenseFamily::BSD,
                LicenseVersion::parse("3-Clause"),
                LicenseSource::MetadataField
            )
        );
        assert!(r.requests.borrow().is_empty());

        let a = resolve_package_license(
            &pkg(Some(""), Some("https://github.com/o/r"), &[]),
            &rules,
            Some(&r),
        );
        assert_eq!(
            (a.family, a.version, a.source),
            (
                LicenseFamily::GPL,
                LicenseVersion::parse("3"),
                LicenseSource::LicenseFile
            )
        );

        let a = resolve_package_license(
            &pkg(
                None,
                Some("https://example.org"),
                &["License :: OSI Approved :: ISC License (ISCL)"],
            ),
            &rules,
            Some(&r),
        );
        assert_eq!(
            (a.family, a.source),
            (LicenseFamily::ISC, LicenseSource::Classifier)
        );

        let a = resolve_package_license(&pkg(None, None, &[]), &rules, None);
        assert_eq!(a, LicenseAssignment::unknown());
    }
}
