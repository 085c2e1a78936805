//! Parser output against `git show --numstat` for the same commits.
//! Regenerate the fixtures with `tests/fixtures/gen_diffs.sh`.

mod support;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use commitrag::synthetic::{mixed_corpus, twin_corpus};
use commitrag::{count_loc, diff_line_count, parse_diff};
use support::{numstat_path, parse_numstat};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/diffs")
}

#[test]
fn numstat_path_notation() {
    assert_eq!(numstat_path("src/lib/{end.rs => finish.rs}"), "src/lib/finish.rs");
    assert_eq!(numstat_path("src/{ => lib}/x.rs"), "src/lib/x.rs");
    assert_eq!(numstat_path("a.txt => b.txt"), "b.txt");
    assert_eq!(numstat_path("plain/path.go"), "plain/path.go");
}

#[test]
fn fixtures_match_numstat() {
    let mut checked = 0;
    for i in 0..25 {
        let name = format!("{i:02}");
        let raw = fs::read_to_string(fixture_dir().join(format!("{name}.diff"))).unwrap();
        let golden = parse_numstat(&fs::read_to_string(fixture_dir().join(format!("{name}.numstat"))).unwrap());
        let parsed = parse_diff(&raw).unwrap_or_else(|e| panic!("fixture {name}: {e}"));

        let got: BTreeMap<String, Option<(usize, usize)>> = parsed
            .file_changes
            .iter()
            .map(|fc| {
                let counts = (!fc.binary).then(|| (fc.added(), fc.deleted()));
                (fc.path().to_string(), counts)
            })
            .collect();
        assert_eq!(got, golden, "fixture {name}");

        let expected_loc: usize = golden.values().flatten().map(|(a, d)| a + d).sum();
        assert_eq!(count_loc(&parsed), expected_loc, "fixture {name}");
        assert!(diff_line_count(&raw) >= count_loc(&parsed));
        checked += 1;
    }
    assert_eq!(checked, 25);
}

#[test]
fn rename_and_binary_details() {
    let raw = fs::read_to_string(fixture_dir().join("09.diff")).unwrap();
    let fc = &parse_diff(&raw).unwrap().file_changes[0];
    assert_eq!(fc.old_path.as_deref(), Some("src/lib/end.rs"));
    assert_eq!(fc.new_path.as_deref(), Some("src/lib/finish.rs"));

    let raw = fs::read_to_string(fixture_dir().join("10.diff")).unwrap();
    let fc = &parse_diff(&raw).unwrap().file_changes[0];
    assert!(fc.binary && fc.hunks.is_empty());

    let raw = fs::read_to_string(fixture_dir().join("12.diff")).unwrap();
    let fc = &parse_diff(&raw).unwrap().file_changes[0];
    assert_eq!(fc.new_path, None);
    assert_eq!(fc.path(), "src/lib/finish.rs");
}

#[test]
fn loc_invariant_holds_corpus_wide() {
    let records = mixed_corpus(300, 5, 17).into_iter().chain(twin_corpus(50, 2, 3));
    for r in records {
        let parsed = parse_diff(&r.diff).unwrap();
        assert_eq!(r.loc, count_loc(&parsed), "{}", r.sha);
        assert_eq!(r.loc, parsed.added() + parsed.deleted());
        r.validate().unwrap();
    }
}
