use once_cell::sync::Lazy;
use regex::Regex;

static PR_REF: Lazy<Regex> = Lazy::new(|| Regex::new(r"\(#\d+\)|#\d+").unwrap());

/// First line of a raw commit message with pull-request references
/// (`(#1234)` or `#1234`) removed and whitespace collapsed.
pub fn preprocess_message(raw: &str) -> String {
    let first = raw.lines().next().unwrap_or("");
    let stripped = PR_REF.replace_all(first, " ");
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}
