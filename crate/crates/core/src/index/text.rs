//! CFD-aware text normalization shared by embedding and retrieval.

use std::sync::LazyLock;

use regex::Regex;

static CAMEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([a-z0-9])([A-Z])|([A-Z]+)([A-Z][a-z])").expect("camel regex"));
static UNIT_POWER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(m|s|kg|K|mol|A|cd|Pa|N|J|W|Hz)(\d)\b").expect("unit regex"));

/// Lowercases, splits camelCase identifiers (`icoFoam` becomes `ico foam`,
/// `RASModel` becomes `ras model`), and writes unit powers explicitly
/// (`m2/s` becomes `m^2/s`).
pub fn normalize(text: &str) -> String {
    let mut s = UNIT_POWER.replace_all(text, "$1^$2").into_owned();
    // One pass can leave overlapping boundaries (`aBcD`), so run to a fixed point.
    loop {
        let next = CAMEL.replace_all(&s, |c: &regex::Captures| match c.get(1) {
            Some(a) => format!("{} {}", a.as_str(), &c[2]),
            None => format!("{} {}", &c[3], &c[4]),
        });
        if next == s {
            break;
        }
        s = next.into_owned();
    }
    s.to_lowercase()
}

/// Normalized tokens: maximal runs of alphanumerics, `^`, `.` and `_`, with
/// leading and trailing dots trimmed.
pub fn tokens(text: &str) -> Vec<String> {
    normalize(text)
        .split(|c: char| !(c.is_alphanumeric() || c == '^' || c == '.' || c == '_'))
        .map(|t| t.trim_matches('.'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}
