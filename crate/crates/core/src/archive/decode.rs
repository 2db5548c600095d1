use std::borrow::Cow;
use std::sync::OnceLock;

use regex::bytes::Regex;

fn coding_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^[ \t\x0c]*#.*?coding[:=][ \t]*([-\w.]+)").expect("static regex")
    })
}

/// The codec named by a source-encoding comment in the first two lines.
/// The second line only counts when the first is blank or a comment.
pub fn declared_encoding(bytes: &[u8]) -> Option<String> {
    let mut lines = bytes.splitn(3, |&b| b == b'\n');
    let first = lines.next().unwrap_or_default();
    let second = lines.next();
    let grab = |line: &[u8]| {
        coding_regex()
            .captures(line)
            .map(|c| String::from_utf8_lossy(&c[1]).into_owned())
    };
    if let Some(enc) = grab(first) {
        return Some(enc);
    }
    let first_trim = first.trim_ascii();
    if first_trim.is_empty() || first_trim.starts_with(b"#") {
        return second.and_then(grab);
    }
    None
}

fn is_latin1(name: &str) -> bool {
    matches!(
        name,
        "latin-1"
            | "latin1"
            | "iso-8859-1"
            | "iso8859-1"
            | "8859"
            | "cp819"
            | "l1"
            | "iso-latin-1"
            | "latin"
    )
}

fn lossy_utf8(bytes: &[u8]) -> String {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    match String::from_utf8_lossy(bytes) {
        Cow::Borrowed(s) => s.to_string(),
        Cow::Owned(s) => s,
    }
}

/// Decodes a Python source file. A declared codec wins; otherwise UTF-8 with
/// U+FFFD substituted for each invalid sequence. Never fails.
pub fn decode_source(bytes: &[u8]) -> String {
    if bytes.starts_with(b"\xEF\xBB\xBF") {
        return lossy_utf8(bytes);
    }
    let Some(declared) = declared_encoding(bytes) else {
        return lossy_utf8(bytes);
    };
    let lower = declared.to_ascii_lowercase();
    let name = lower.replace('_', "-");
    if name.starts_with("utf-8")
        || name.starts_with("utf8")
        || name == "ascii"
        || name == "us-ascii"
    {
        return lossy_utf8(bytes);
    }
    if is_latin1(&name) {
        return bytes.iter().map(|&b| b as char).collect();
    }
    let encoding = encoding_rs::Encoding::for_label(lower.as_bytes())
        .or_else(|| encoding_rs::Encoding::for_label(name.as_bytes()));
    match encoding {
        Some(enc) => enc.decode_without_bom_handling(bytes).0.into_owned(),
        None => {
            tracing::debug!(codec = %declared, "unknown source codec, decoding as UTF-8");
            lossy_utf8(bytes)
        }
    }
}
