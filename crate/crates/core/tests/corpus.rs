use std::path::Path;
use std::process::Command;

use chrono::{TimeZone, Utc};
use commitrag::corpus::{
    apply_filters, apply_filters_par, compute_stats, ingest, ingest_repo, preprocess_message, CorpusError,
    DiffLengthMode, FilterConfig, IngestOptions, Rule,
};
use commitrag::synthetic::{filter_corpus, mixed_corpus};
use commitrag::{count_loc, parse_diff, Tokenizer};

#[test]
fn planted_violations_are_counted_per_rule() {
    let (records, expected) = filter_corpus();
    assert_eq!(records.len(), 50);
    let (kept, report) = apply_filters(records.clone(), &FilterConfig::default());
    for (rule, want) in Rule::ALL.into_iter().zip(expected) {
        assert_eq!(report.rejected(rule), want, "{}", rule.code());
    }
    assert!(report.reconciles());
    assert_eq!(report.input, 50);
    assert_eq!(report.retained, kept.len());
    assert_eq!(report.retained + expected.iter().sum::<usize>(), 50);

    let (kept_par, report_par) = apply_filters_par(records, &FilterConfig::default());
    assert_eq!(kept_par, kept);
    assert_eq!(report_par, report);
}

#[test]
fn retained_records_satisfy_every_rule() {
    let (records, _) = filter_corpus();
    let cfg = FilterConfig::default();
    let (kept, _) = apply_filters(records, &cfg);
    for r in &kept {
        let words = r.message.split_whitespace().count();
        assert!((5..=50).contains(&words), "{:?}", r.message);
        assert!(r.diff.lines().count() <= 300);
        assert!(!r.author_name.to_lowercase().contains("[bot]"));
        assert!(cfg.check(r).is_none());
    }
}

#[test]
fn changed_line_mode_is_more_permissive() {
    let (records, _) = filter_corpus();
    let raw = FilterConfig::default();
    let changed = FilterConfig {
        diff_length_mode: DiffLengthMode::ChangedLines,
        ..FilterConfig::default()
    };
    let (_, a) = apply_filters(records.clone(), &raw);
    let (_, b) = apply_filters(records, &changed);
    assert!(b.rejected(Rule::DiffLength) <= a.rejected(Rule::DiffLength));
    assert!(a.reconciles() && b.reconciles());
}

fn lower_median(mut v: Vec<usize>) -> usize {
    v.sort();
    // Lower-middle for even lengths.
    v[v.len().div_ceil(2) - 1]
}

#[test]
fn stats_match_direct_computation() {
    let records = mixed_corpus(100, 4, 21);
    let tok = Tokenizer::new();
    let stats = compute_stats(&records, &tok).unwrap();

    let diff_lens: Vec<usize> = records.iter().map(|r| tok.tokenize(&r.diff).len()).collect();
    let msg_lens: Vec<usize> = records.iter().map(|r| tok.tokenize(&r.message).len()).collect();
    let files: Vec<usize> = records
        .iter()
        .map(|r| parse_diff(&r.diff).unwrap().paths().len())
        .collect();
    let lines: Vec<usize> = records
        .iter()
        .map(|r| count_loc(&parse_diff(&r.diff).unwrap()))
        .collect();

    assert_eq!(stats.records, 100);
    let mean = diff_lens.iter().sum::<usize>() as f64 / 100.0;
    assert!((stats.diff_tokens.mean - mean).abs() < 1e-9);
    assert_eq!(stats.diff_tokens.max, *diff_lens.iter().max().unwrap());
    assert_eq!(stats.diff_tokens.median, lower_median(diff_lens));
    let mean = msg_lens.iter().sum::<usize>() as f64 / 100.0;
    assert!((stats.message_tokens.mean - mean).abs() < 1e-9);
    assert_eq!(stats.message_tokens.max, *msg_lens.iter().max().unwrap());
    assert_eq!(stats.message_tokens.median, lower_median(msg_lens));
    assert_eq!(stats.median_files, lower_median(files));
    assert_eq!(stats.median_changed_lines, lower_median(lines));
}

#[test]
fn stats_hand_example() {
    // Message token counts 3, 7, 2, 4: mean 4, max 7, lower median 3.
    let mut records = mixed_corpus(4, 1, 0);
    for (r, m) in records.iter_mut().zip([
        "fix a bug",
        "Add getUserName() helper",
        "bump deps",
        "Remove dead code paths",
    ]) {
        r.message = m.into();
    }
    let s = compute_stats(&records, &Tokenizer::new()).unwrap();
    assert_eq!(s.message_tokens.max, 7);
    assert_eq!(s.message_tokens.median, 3);
    assert!((s.message_tokens.mean - 4.0).abs() < 1e-12);
}

fn git(dir: &Path, args: &[&str], date: &str) {
    let status = Command::new("git")
        .args(args)
        .current_dir(dir)
        .env("GIT_AUTHOR_NAME", "Fixture Author")
        .env("GIT_AUTHOR_EMAIL", "fixture@example.com")
        .env("GIT_COMMITTER_NAME", "Fixture Author")
        .env("GIT_COMMITTER_EMAIL", "fixture@example.com")
        .env("GIT_AUTHOR_DATE", date)
        .env("GIT_COMMITTER_DATE", date)
        .output()
        .expect("git runs");
    assert!(
        status.status.success(),
        "git {args:?}: {}",
        String::from_utf8_lossy(&status.stderr)
    );
}

/// Five linear commits plus a merge on `main`, with an `origin` remote.
fn fixture_repo(dir: &Path) {
    let d = "2021-03-01T10:00:00Z";
    git(dir, &["init", "-q", "-b", "main", "."], d);
    git(
        dir,
        &["remote", "add", "origin", "https://github.com/apache/fixture.git"],
        d,
    );
    let files = [
        ("src/A.java", "class A {}\n", "Add class A (#12)\n\nLonger body text."),
        ("src/b.py", "print('b')\n", "Add script b"),
        ("src/A.java", "class A { int x; }\n", "Add field x to A"),
        ("docs/notes.md", "notes\n", "Write notes"),
        ("src/b.py", "print('bb')\n", "Tweak output of b"),
    ];
    for (i, (path, body, msg)) in files.iter().enumerate() {
        let p = dir.join(path);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(&p, body).unwrap();
        let date = format!("2021-03-0{}T10:00:00Z", i + 1);
        git(dir, &["add", "-A"], &date);
        git(dir, &["commit", "-q", "-m", msg], &date);
    }
    git(dir, &["checkout", "-q", "-b", "side", "HEAD~1"], "2021-03-06T10:00:00Z");
    std::fs::write(dir.join("src/c.go"), "package c\n").unwrap();
    git(dir, &["add", "-A"], "2021-03-06T10:00:00Z");
    git(dir, &["commit", "-q", "-m", "Add package c"], "2021-03-06T10:00:00Z");
    git(dir, &["checkout", "-q", "main"], "2021-03-07T10:00:00Z");
    git(
        dir,
        &["merge", "-q", "--no-ff", "-m", "Merge branch side", "side"],
        "2021-03-07T10:00:00Z",
    );
}

#[test]
fn ingest_fixture_repository() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture_repo(dir);

    let epoch = Utc.timestamp_opt(0, 0).unwrap();
    let stream = ingest_repo(dir, "main", epoch).unwrap();
    assert_eq!(stream.repo_name(), "apache/fixture");
    let records: Vec<_> = stream.collect::<Result<_, _>>().unwrap();
    // Five linear commits plus the side-branch commit; the merge is skipped.
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| !r.message.starts_with("Merge")));
    for r in &records {
        let mut clean = r.clone();
        clean.message = preprocess_message(&r.message);
        clean.validate().unwrap();
        assert_eq!(r.sha.len(), 40);
        assert_eq!(r.repo_full_name, "apache/fixture");
        assert_eq!(r.loc, count_loc(&parse_diff(&r.diff).unwrap()));
    }
    let first = records.iter().find(|r| r.message.starts_with("Add class A")).unwrap();
    assert_eq!(preprocess_message(&first.message), "Add class A");
    assert_eq!(first.files, ["src/A.java"]);
    assert_eq!(first.date, Utc.with_ymd_and_hms(2021, 3, 1, 10, 0, 0).unwrap());

    let since = Utc.with_ymd_and_hms(2021, 3, 4, 0, 0, 0).unwrap();
    let recent: Vec<_> = ingest_repo(dir, "main", since)
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(recent.len(), 3);
    assert!(recent.iter().all(|r| r.date >= since));

    let later = Utc.with_ymd_and_hms(2030, 1, 1, 0, 0, 0).unwrap();
    assert_eq!(ingest_repo(dir, "main", later).unwrap().count(), 0);

    let mut opts = IngestOptions::new(dir, "main", epoch);
    opts.repo_name = Some("someone/else".into());
    assert_eq!(ingest(&opts).unwrap().repo_name(), "someone/else");

    assert!(matches!(
        ingest_repo(dir, "no-such-branch", epoch),
        Err(CorpusError::BranchNotFound(_))
    ));
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(
        ingest_repo(empty.path(), "main", epoch),
        Err(CorpusError::RepoNotFound(_))
    ));
}
