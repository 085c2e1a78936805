//! `git --numstat` golden parsing.

use std::collections::BTreeMap;

/// Resolves numstat rename notation (`dir/{old => new}/f`, `old => new`)
/// to the destination path.
pub fn numstat_path(raw: &str) -> String {
    if let (Some(open), Some(close)) = (raw.find('{'), raw.find('}')) {
        let inner = &raw[open + 1..close];
        let new = inner.split(" => ").nth(1).unwrap_or(inner);
        let joined = format!("{}{}{}", &raw[..open], new, &raw[close + 1..]);
        return joined.replace("//", "/");
    }
    match raw.split_once(" => ") {
        Some((_, new)) => new.to_string(),
        None => raw.to_string(),
    }
}

/// path -> Some((added, deleted)), or None for binary entries (`-\t-`).
pub fn parse_numstat(text: &str) -> BTreeMap<String, Option<(usize, usize)>> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            let mut f = l.splitn(3, '\t');
            let (a, d, p) = (f.next().unwrap(), f.next().unwrap(), f.next().unwrap());
            let counts = match (a, d) {
                ("-", "-") => None,
                _ => Some((a.parse().unwrap(), d.parse().unwrap())),
            };
            (numstat_path(p), counts)
        })
        .collect()
}
