//! Deterministic synthetic corpora for tests, benchmarks and offline demos.
//!
//! Every generator is a pure function of its arguments: the same seed
//! always produces byte-identical records.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::commit::CommitRecord;
use crate::corpus::Rule;
use crate::diff::Language;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// A lowercase pseudo-word, distinct for every index.
pub fn pseudo_word(index: usize) -> String {
    let syllables = CONSONANTS.len() * VOWELS.len();
    let mut i = index;
    let mut out = String::new();
    for _ in 0..3 {
        let s = i % syllables;
        out.push(CONSONANTS[s / VOWELS.len()] as char);
        out.push(VOWELS[s % VOWELS.len()] as char);
        i /= syllables;
    }
    while i > 0 {
        out.push(CONSONANTS[i % CONSONANTS.len()] as char);
        i /= CONSONANTS.len();
    }
    out
}

/// 40 hex characters derived from `tag`.
pub fn fake_sha(tag: &str) -> String {
    hex::encode(Sha256::digest(tag.as_bytes()))[..40].to_string()
}

pub fn extension(lang: Language) -> &'static str {
    match lang {
        Language::Java => "java",
        Language::Cpp => "cpp",
        Language::Scala => "scala",
        Language::TypeScript => "ts",
        Language::Python => "py",
        Language::Lua => "lua",
        Language::Go => "go",
        Language::Rust => "rs",
        Language::Erlang => "erl",
        Language::Other => "md",
    }
}

fn base_date() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap()
}

/// Single-hunk modification of `path`.
pub fn file_diff(path: &str, before: &[String], removed: &[String], added: &[String], after: &[String]) -> String {
    let old = before.len() + removed.len() + after.len();
    let new = before.len() + added.len() + after.len();
    let mut d = format!(
        "diff --git a/{path} b/{path}\nindex 1a2b3c4..5d6e7f8 100644\n--- a/{path}\n+++ b/{path}\n@@ -1,{old} +1,{new} @@\n"
    );
    for l in before {
        d.push_str(&format!(" {l}\n"));
    }
    for l in removed {
        d.push_str(&format!("-{l}\n"));
    }
    for l in added {
        d.push_str(&format!("+{l}\n"));
    }
    for l in after {
        d.push_str(&format!(" {l}\n"));
    }
    d
}

pub fn record(diff: String, message: &str, repo: &str, sha: String, author: &str, date: DateTime<Utc>) -> CommitRecord {
    CommitRecord::from_diff(
        diff,
        message.to_string(),
        repo.to_string(),
        sha,
        author.to_string(),
        date,
    )
    .expect("synthetic diffs are well formed")
}

/// Code change built around three identifier words.
fn code_diff(lang: Language, words: &[String; 3], variant: &str) -> String {
    let [a, b, c] = words;
    let path = format!("src/{a}/{b}_{c}.{}", extension(lang));
    file_diff(
        &path,
        &[format!("// module {a} {b}")],
        &[format!("value {a}_{b}_limit = compute_{c}({a}, 10)")],
        &[
            format!("value {a}_{b}_limit = compute_{c}({a}, 20)"),
            format!("check_{b}({c}_{a})"),
        ],
        &[format!("// {variant}")],
    )
}

/// `pairs` twin pairs (2 × `pairs` commits) spread over `repos` projects.
/// The twins of a pair share their message and differ by one context line
/// of the diff; messages are unique across pairs.
pub fn twin_corpus(pairs: usize, repos: usize, seed: u64) -> Vec<CommitRecord> {
    let mut out = Vec::with_capacity(pairs * 2);
    for p in 0..pairs {
        let words = [pseudo_word(3 * p), pseudo_word(3 * p + 1), pseudo_word(3 * p + 2)];
        let lang = Language::MAINSTREAM[p % Language::MAINSTREAM.len()];
        let repo = format!("synthetic/project-{}", p % repos.max(1));
        let message = format!("Fix {} handling in {} {} module", words[0], words[1], words[2]);
        for (t, variant) in ["variant one", "variant two"].iter().enumerate() {
            out.push(record(
                code_diff(lang, &words, variant),
                &message,
                &repo,
                fake_sha(&format!("twin:{seed}:{p}:{t}")),
                "Dev Eloper",
                base_date() + Duration::hours((2 * p + t) as i64),
            ));
        }
    }
    out
}

const VERBS: &[&str] = &[
    "Fix", "Add", "Remove", "Update", "Refactor", "Improve", "Simplify", "Rename",
];

/// `n` commits over `repos` projects with a skewed language mix (mostly
/// Java); the first nine cover every mainstream language.
pub fn mixed_corpus(n: usize, repos: usize, seed: u64) -> Vec<CommitRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let lang = if i < Language::MAINSTREAM.len() {
                Language::MAINSTREAM[i]
            } else if rng.gen_bool(0.6) {
                Language::Java
            } else {
                Language::MAINSTREAM[rng.gen_range(0..Language::MAINSTREAM.len())]
            };
            let words = [
                pseudo_word(rng.gen_range(0..200)),
                pseudo_word(rng.gen_range(0..200)),
                pseudo_word(rng.gen_range(0..200)),
            ];
            let verb = VERBS[rng.gen_range(0..VERBS.len())];
            let message = format!("{verb} {} {} in {} code path", words[0], words[1], words[2]);
            record(
                code_diff(lang, &words, &format!("rev {i}")),
                &message,
                &format!("synthetic/project-{}", rng.gen_range(0..repos.max(1))),
                fake_sha(&format!("mixed:{seed}:{i}")),
                "Dev Eloper",
                base_date() + Duration::minutes(rng.gen_range(0..500_000)),
            )
        })
        .collect()
}

fn random_line(rng: &mut ChaCha8Rng, vocab: usize) -> String {
    let len = rng.gen_range(1..8);
    (0..len)
        .map(|_| pseudo_word(rng.gen_range(0..vocab.max(1))))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Random-token documents for retrieval tests: `repos` projects with
/// `docs_per_repo` commits each, drawing words from a small vocabulary so
/// documents overlap. Every tenth document duplicates an earlier diff of
/// the same project byte for byte.
pub fn retrieval_corpus(repos: usize, docs_per_repo: usize, vocab: usize, seed: u64) -> Vec<CommitRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(repos * docs_per_repo);
    for r in 0..repos {
        let repo = format!("synthetic/partition-{r:02}");
        let start = out.len();
        for i in 0..docs_per_repo {
            let diff = if i > 0 && i % 10 == 0 {
                let j = start + rng.gen_range(0..i);
                let earlier: &CommitRecord = &out[j];
                earlier.diff.clone()
            } else {
                let removed: Vec<String> = (0..rng.gen_range(0..3)).map(|_| random_line(&mut rng, vocab)).collect();
                let added: Vec<String> = (0..rng.gen_range(1..4)).map(|_| random_line(&mut rng, vocab)).collect();
                let ctx = vec![random_line(&mut rng, vocab)];
                let path = format!("src/f{}.java", rng.gen_range(0..5));
                file_diff(&path, &ctx, &removed, &added, &[])
            };
            let message = format!("Change {} in {} for {}", pseudo_word(i), pseudo_word(i + 1), repo);
            out.push(record(
                diff,
                &message,
                &repo,
                fake_sha(&format!("retrieval:{seed}:{r}:{i}")),
                "Dev Eloper",
                // Coarse dates so equal-score ties fall through to the sha.
                base_date() + Duration::days(rng.gen_range(0..20)),
            ));
        }
    }
    out
}

/// A 50-record corpus with planted violations, and the expected rejection
/// count per rule (R1..R5 order).
pub fn filter_corpus() -> (Vec<CommitRecord>, [usize; 5]) {
    let ok_msg = "Fix null check in request parser";
    let java = |i: usize| {
        file_diff(
            &format!("src/main/java/Foo{i}.java"),
            &["class Foo {".to_string()],
            &["  int a = 1;".to_string()],
            &["  int a = 2;".to_string()],
            &["}".to_string()],
        )
    };
    // Raw line count = 5 header lines + `body` added lines.
    let long_diff = |body: usize| {
        let added: Vec<String> = (0..body).map(|i| format!("  int v{i} = {i};")).collect();
        file_diff("src/Big.java", &[], &[], &added, &[])
    };
    let docs = file_diff(
        "docs/README.md",
        &["# Title".to_string()],
        &["old text".to_string()],
        &["new text".to_string()],
        &[],
    );
    let config = file_diff(
        "config/settings.json",
        &[],
        &["{\"a\": 1}".to_string()],
        &["{\"a\": 2}".to_string()],
        &[],
    );
    let words = |n: usize| (0..n).map(pseudo_word).collect::<Vec<_>>().join(" ");

    let mut rows: Vec<(String, String, &str)> = vec![
        // R1: message length
        (java(0), "Fix typo in parser".into(), "Dev"),
        (java(1), words(51), "Dev"),
        (java(2), "Cleanup".into(), "Dev"),
        // R1 fires before R4
        (java(3), "Bump lodash to latest".into(), "dependabot[bot]"),
        // R2: diff length
        (long_diff(296), ok_msg.into(), "Dev"),
        (long_diff(400), ok_msg.into(), "Dev"),
        // R3: no mainstream-language file
        (docs, "Update the installation guide for macOS".into(), "Dev"),
        (config, "Change default timeout in settings file".into(), "Dev"),
        // R4: bot authors
        (
            java(4),
            "Bump jackson version to latest release".into(),
            "dependabot[bot]",
        ),
        (
            java(5),
            "Update dependency versions across modules".into(),
            "Renovate[Bot]",
        ),
        // R5: merge / revert
        (java(6), "Merge branch 'main' into feature".into(), "Dev"),
        (java(7), "Revert \"Fix null check in parser\"".into(), "Dev"),
        (java(8), "Partially revert the parser change".into(), "Dev"),
        // Boundary cases that must be retained
        (java(9), "Add one two three four".into(), "Dev"),
        (java(10), words(50), "Dev"),
        (long_diff(295), ok_msg.into(), "Dev"),
        (java(11), "Handle emergency shutdown in merged config".into(), "Dev"),
        (java(12), "Fix bot detection in request router".into(), "Robotnik"),
    ];
    let mut i = 13;
    while rows.len() < 50 {
        rows.push((
            java(i),
            format!("Improve {} handling in {} module", pseudo_word(i), pseudo_word(i + 100)),
            "Dev",
        ));
        i += 1;
    }
    let records = rows
        .into_iter()
        .enumerate()
        .map(|(n, (diff, msg, author))| {
            record(
                diff,
                &msg,
                "synthetic/filters",
                fake_sha(&format!("filter:{n}")),
                author,
                base_date() + Duration::hours(n as i64),
            )
        })
        .collect();
    let mut expected = [0usize; 5];
    for (rule, n) in [
        (Rule::MessageLength, 4),
        (Rule::DiffLength, 2),
        (Rule::FileType, 2),
        (Rule::Bot, 2),
        (Rule::MergeRevert, 3),
    ] {
        expected[rule.index()] = n;
    }
    (records, expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::diff_line_count;

    #[test]
    fn pseudo_words_are_distinct_tokens() {
        let words: std::collections::HashSet<String> = (0..5000).map(pseudo_word).collect();
        assert_eq!(words.len(), 5000);
        assert!(words.iter().all(|w| w.chars().all(|c| c.is_ascii_lowercase())));
    }

    #[test]
    fn generators_are_deterministic_and_valid() {
        assert_eq!(mixed_corpus(30, 3, 7), mixed_corpus(30, 3, 7));
        assert_ne!(mixed_corpus(30, 3, 7), mixed_corpus(30, 3, 8));
        for r in twin_corpus(10, 2, 1)
            .iter()
            .chain(&mixed_corpus(20, 2, 1))
            .chain(&retrieval_corpus(2, 30, 40, 1))
        {
            r.validate().unwrap();
        }
    }

    #[test]
    fn twins_share_messages_but_not_diffs() {
        let c = twin_corpus(5, 2, 0);
        for pair in c.chunks(2) {
            assert_eq!(pair[0].message, pair[1].message);
            assert_ne!(pair[0].diff, pair[1].diff);
            assert_eq!(pair[0].repo_full_name, pair[1].repo_full_name);
        }
    }

    #[test]
    fn filter_corpus_boundaries() {
        let (records, expected) = filter_corpus();
        assert_eq!(records.len(), 50);
        assert_eq!(expected.iter().sum::<usize>(), 13);
        assert_eq!(diff_line_count(&records[4].diff), 301);
        assert_eq!(diff_line_count(&records[15].diff), 300);
    }
}
