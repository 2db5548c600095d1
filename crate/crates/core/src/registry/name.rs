use super::RegistryError;

/// Canonical registry form of a project name: lowercase ASCII with every run
/// of `-`, `_` and `.` collapsed to a single `-`.
///
/// Leading and trailing separators are dropped so the result always matches
/// `[a-z0-9]([a-z0-9-]*[a-z0-9])?`. Characters outside `[A-Za-z0-9._-]` are
/// rejected, since no registry accepts them in a project name.
pub fn normalize_package_name(raw: &str) -> Result<String, RegistryError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(RegistryError::InvalidName(raw.to_string()));
    }

    let mut out = String::with_capacity(trimmed.len());
    let mut pending_sep = false;
    for ch in trimmed.chars() {
        match ch {
            '-' | '_' | '.' => pending_sep = true,
            c if c.is_ascii_alphanumeric() => {
                if pending_sep && !out.is_empty() {
                    out.push('-');
                }
                pending_sep = false;
                out.push(c.to_ascii_lowercase());
            }
            _ => return Err(RegistryError::InvalidName(raw.to_string())),
        }
    }

    if out.is_empty() {
        return Err(RegistryError::InvalidName(raw.to_string()));
    }
    Ok(out)
}
