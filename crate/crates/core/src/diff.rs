//! Unified diff parsing.
//!
//! Understands the `git diff` dialect (extended headers, renames, binary
//! markers, `\ No newline at end of file`) as well as plain `---`/`+++`
//! unified diffs. Hunk bodies are consumed by the counts in their
//! `@@ -a,b +c,d @@` header, so content lines that happen to look like
//! `---`/`+++` headers are classified correctly.

use std::fmt;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

static HUNK_HEADER: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(.*)$").unwrap());

const NO_NEWLINE_MARKER: &str = "\\ No newline at end of file";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DiffError {
    #[error("malformed diff at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: &'static str },
}

/// Source language of a changed file, derived from its extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Java,
    Cpp,
    Scala,
    TypeScript,
    Python,
    Lua,
    Go,
    Rust,
    Erlang,
    Other,
}

impl Language {
    /// The nine mainstream languages, in a fixed order.
    pub const MAINSTREAM: [Language; 9] = [
        Language::Java,
        Language::Cpp,
        Language::Scala,
        Language::TypeScript,
        Language::Python,
        Language::Lua,
        Language::Go,
        Language::Rust,
        Language::Erlang,
    ];

    pub fn from_path(path: &str) -> Language {
        let name = path.rsplit('/').next().unwrap_or(path);
        let ext = match name.rsplit_once('.') {
            Some((stem, ext)) if !stem.is_empty() => ext.to_ascii_lowercase(),
            _ => return Language::Other,
        };
        Language::from_extension(&ext)
    }

    pub fn from_extension(ext: &str) -> Language {
        match ext {
            "java" => Language::Java,
            "cpp" | "cc" | "cxx" | "c++" | "hpp" | "hh" | "hxx" | "h" => Language::Cpp,
            "scala" | "sc" => Language::Scala,
            "ts" | "tsx" | "mts" | "cts" => Language::TypeScript,
            "py" | "pyi" => Language::Python,
            "lua" => Language::Lua,
            "go" => Language::Go,
            "rs" => Language::Rust,
            "erl" | "hrl" => Language::Erlang,
            _ => Language::Other,
        }
    }

    pub fn is_mainstream(self) -> bool {
        self != Language::Other
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::Java => "java",
            Language::Cpp => "cpp",
            Language::Scala => "scala",
            Language::TypeScript => "typescript",
            Language::Python => "python",
            Language::Lua => "lua",
            Language::Go => "go",
            Language::Rust => "rust",
            Language::Erlang => "erlang",
            Language::Other => "other",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineKind {
    Added,
    Deleted,
    Context,
}

impl LineKind {
    fn prefix(self) -> char {
        match self {
            LineKind::Added => '+',
            LineKind::Deleted => '-',
            LineKind::Context => ' ',
        }
    }
}

/// One line of a hunk body. `text` excludes the prefix character and the
/// line terminator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffLine {
    pub kind: LineKind,
    pub text: String,
    /// Followed by a `\ No newline at end of file` marker.
    pub no_newline_at_eof: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
    /// Trailing text of the header line after the closing `@@`.
    pub section: String,
    pub lines: Vec<DiffLine>,
}

impl Hunk {
    pub fn added(&self) -> usize {
        self.count(LineKind::Added)
    }

    pub fn deleted(&self) -> usize {
        self.count(LineKind::Deleted)
    }

    fn count(&self, kind: LineKind) -> usize {
        self.lines.iter().filter(|l| l.kind == kind).count()
    }

    /// Renders the body back to unified-diff text, one `\n`-terminated line
    /// per entry.
    pub fn render_body(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push(line.kind.prefix());
            out.push_str(&line.text);
            out.push('\n');
            if line.no_newline_at_eof {
                out.push_str(NO_NEWLINE_MARKER);
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    /// `None` for newly created files.
    pub old_path: Option<String>,
    /// `None` for deleted files.
    pub new_path: Option<String>,
    pub binary: bool,
    pub language: Language,
    pub hunks: Vec<Hunk>,
}

impl FileChange {
    fn empty() -> Self {
        FileChange {
            old_path: None,
            new_path: None,
            binary: false,
            language: Language::Other,
            hunks: Vec::new(),
        }
    }

    /// The path the change refers to: the new path, or the old one for deletions.
    pub fn path(&self) -> &str {
        self.new_path.as_deref().or(self.old_path.as_deref()).unwrap_or("")
    }

    pub fn added(&self) -> usize {
        self.hunks.iter().map(Hunk::added).sum()
    }

    pub fn deleted(&self) -> usize {
        self.hunks.iter().map(Hunk::deleted).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedDiff {
    pub file_changes: Vec<FileChange>,
}

impl ParsedDiff {
    pub fn added(&self) -> usize {
        self.file_changes.iter().map(FileChange::added).sum()
    }

    pub fn deleted(&self) -> usize {
        self.file_changes.iter().map(FileChange::deleted).sum()
    }

    /// Paths of every changed file, in diff order, without duplicates.
    pub fn paths(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::with_capacity(self.file_changes.len());
        for fc in &self.file_changes {
            let p = fc.path();
            if !p.is_empty() && !out.iter().any(|seen| seen == p) {
                out.push(p.to_string());
            }
        }
        out
    }
}

/// Total changed lines (added + deleted) across all files.
pub fn count_loc(diff: &ParsedDiff) -> usize {
    diff.added() + diff.deleted()
}

/// Number of newline-delimited lines in a raw payload, headers included.
/// A final line without a trailing newline still counts.
pub fn diff_line_count(raw: &str) -> usize {
    if raw.is_empty() {
        return 0;
    }
    let newlines = raw.bytes().filter(|&b| b == b'\n').count();
    newlines + usize::from(!raw.ends_with('\n'))
}

/// Strips a git `a/`/`b/` prefix and maps `/dev/null` to `None`.
fn header_path(raw: &str) -> Option<String> {
    // `--- a/foo.txt\t2020-01-01 ...` timestamps from plain diff(1)
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end_matches('\r');
    let raw = unquote(raw);
    if raw == "/dev/null" {
        return None;
    }
    Some(strip_side_prefix(&raw).to_string())
}

fn strip_side_prefix(path: &str) -> &str {
    for prefix in ["a/", "b/", "i/", "w/", "c/", "o/"] {
        if let Some(rest) = path.strip_prefix(prefix) {
            return rest;
        }
    }
    path
}

fn unquote(s: &str) -> String {
    match s.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
        Some(inner) => {
            let mut out = String::with_capacity(inner.len());
            let mut chars = inner.chars();
            while let Some(c) = chars.next() {
                if c == '\\' {
                    match chars.next() {
                        Some('t') => out.push('\t'),
                        Some('n') => out.push('\n'),
                        Some(other) => out.push(other),
                        None => {}
                    }
                } else {
                    out.push(c);
                }
            }
            out
        }
        None => s.to_string(),
    }
}

/// Splits `a/x b/y` from a `diff --git` line. Later `---`/`+++` or rename
/// headers override whatever is guessed here.
fn git_header_paths(rest: &str) -> (Option<String>, Option<String>) {
    let rest = rest.trim_end_matches('\r');
    if let Some(quoted) = rest.strip_prefix('"') {
        if let Some(end) = quoted.find("\" ").map(|i| i + 1) {
            let (a, b) = rest.split_at(end + 1);
            return (header_path(a), header_path(b.trim_start()));
        }
    }
    // Prefer a split where both halves name the same path.
    let bytes = rest.len();
    if bytes % 2 == 1 {
        let mid = bytes / 2;
        if rest.is_char_boundary(mid) && rest.as_bytes()[mid] == b' ' {
            let (a, b) = (&rest[..mid], &rest[mid + 1..]);
            if strip_side_prefix(a) == strip_side_prefix(b) {
                return (header_path(a), header_path(b));
            }
        }
    }
    match rest.rfind(" b/") {
        Some(i) => (header_path(&rest[..i]), header_path(&rest[i + 1..])),
        None => match rest.split_once(' ') {
            Some((a, b)) => (header_path(a), header_path(b)),
            None => (header_path(rest), None),
        },
    }
}

struct Lines<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lines<'a> {
    /// Returns (offset, line without terminator).
    fn peek(&self) -> Option<(usize, &'a str)> {
        if self.pos >= self.src.len() {
            return None;
        }
        let rest = &self.src[self.pos..];
        let line = match rest.find('\n') {
            Some(i) => &rest[..i],
            None => rest,
        };
        Some((self.pos, line))
    }

    fn advance(&mut self) {
        if let Some((_, line)) = self.peek() {
            self.pos += line.len();
            if self.pos < self.src.len() {
                self.pos += 1; // '\n'
            }
        }
    }
}

/// Parses a unified diff. Empty input yields an empty change list.
pub fn parse_diff(raw: &str) -> Result<ParsedDiff, DiffError> {
    let mut files: Vec<FileChange> = Vec::new();
    let mut current: Option<FileChange> = None;
    let mut in_binary_patch = false;
    let mut lines = Lines { src: raw, pos: 0 };

    fn finish(files: &mut Vec<FileChange>, current: &mut Option<FileChange>) {
        if let Some(mut fc) = current.take() {
            fc.language = Language::from_path(fc.path());
            files.push(fc);
        }
    }

    while let Some((offset, line)) = lines.peek() {
        if let Some(rest) = line.strip_prefix("diff --git ") {
            finish(&mut files, &mut current);
            in_binary_patch = false;
            let (old, new) = git_header_paths(rest);
            current = Some(FileChange {
                old_path: old,
                new_path: new,
                ..FileChange::empty()
            });
            lines.advance();
            continue;
        }
        if in_binary_patch {
            lines.advance();
            continue;
        }
        if line.starts_with("@@") {
            let fc = current.as_mut().ok_or(DiffError::Malformed {
                offset,
                reason: "hunk outside of a file section",
            })?;
            let hunk = parse_hunk(&mut lines)?;
            fc.hunks.push(hunk);
            continue;
        }
        if let Some(rest) = line.strip_prefix("--- ") {
            // Plain unified diffs have no `diff --git` line between files.
            let needs_new = match &current {
                None => true,
                Some(fc) => !fc.hunks.is_empty() || fc.binary,
            };
            if needs_new {
                finish(&mut files, &mut current);
                current = Some(FileChange::empty());
            }
            if let Some(fc) = current.as_mut() {
                fc.old_path = header_path(rest);
            }
        } else if let Some(rest) = line.strip_prefix("+++ ") {
            if let Some(fc) = current.as_mut() {
                fc.new_path = header_path(rest);
            }
        } else if let Some(rest) = line.strip_prefix("rename from ") {
            if let Some(fc) = current.as_mut() {
                fc.old_path = Some(unquote(rest.trim_end_matches('\r')));
            }
        } else if let Some(rest) = line.strip_prefix("rename to ") {
            if let Some(fc) = current.as_mut() {
                fc.new_path = Some(unquote(rest.trim_end_matches('\r')));
            }
        } else if line.starts_with("new file mode") {
            if let Some(fc) = current.as_mut() {
                fc.old_path = None;
            }
        } else if line.starts_with("deleted file mode") {
            if let Some(fc) = current.as_mut() {
                fc.new_path = None;
            }
        } else if line.starts_with("Binary files ") && line.trim_end().ends_with(" differ") {
            if current.is_none() {
                current = Some(FileChange::empty());
            }
            if let Some(fc) = current.as_mut() {
                fc.binary = true;
            }
        } else if line.starts_with("GIT binary patch") {
            if let Some(fc) = current.as_mut() {
                fc.binary = true;
            }
            in_binary_patch = true;
        }
        lines.advance();
    }
    finish(&mut files, &mut current);
    Ok(ParsedDiff { file_changes: files })
}

fn parse_hunk(lines: &mut Lines<'_>) -> Result<Hunk, DiffError> {
    let (offset, header) = lines.peek().expect("caller peeked a header");
    let header = header.trim_end_matches('\r');
    let caps = HUNK_HEADER.captures(header).ok_or(DiffError::Malformed {
        offset,
        reason: "unparseable hunk header",
    })?;
    let num = |i: usize, default: u32| -> Result<u32, DiffError> {
        match caps.get(i) {
            Some(m) => m.as_str().parse().map_err(|_| DiffError::Malformed {
                offset,
                reason: "hunk range out of range",
            }),
            None => Ok(default),
        }
    };
    let mut hunk = Hunk {
        old_start: num(1, 0)?,
        old_len: num(2, 1)?,
        new_start: num(3, 0)?,
        new_len: num(4, 1)?,
        section: caps.get(5).map_or("", |m| m.as_str()).to_string(),
        lines: Vec::new(),
    };
    lines.advance();

    let (mut old_left, mut new_left) = (hunk.old_len, hunk.new_len);
    while old_left > 0 || new_left > 0 {
        let Some((offset, line)) = lines.peek() else {
            return Err(DiffError::Malformed {
                offset: raw_len(lines),
                reason: "hunk body ends before its declared line counts",
            });
        };
        let (kind, text) = match line.chars().next() {
            Some(' ') => (LineKind::Context, &line[1..]),
            Some('-') => (LineKind::Deleted, &line[1..]),
            Some('+') => (LineKind::Added, &line[1..]),
            Some('\\') => {
                mark_no_newline(&mut hunk, offset)?;
                lines.advance();
                continue;
            }
            _ => {
                return Err(DiffError::Malformed {
                    offset,
                    reason: "unexpected line inside hunk body",
                })
            }
        };
        let (dec_old, dec_new) = match kind {
            LineKind::Context => (1, 1),
            LineKind::Deleted => (1, 0),
            LineKind::Added => (0, 1),
        };
        if old_left < dec_old || new_left < dec_new {
            return Err(DiffError::Malformed {
                offset,
                reason: "hunk body exceeds its declared line counts",
            });
        }
        old_left -= dec_old;
        new_left -= dec_new;
        hunk.lines.push(DiffLine {
            kind,
            text: text.to_string(),
            no_newline_at_eof: false,
        });
        lines.advance();
    }
    // A trailing marker belongs to the last body line.
    if let Some((offset, line)) = lines.peek() {
        if line.starts_with('\\') {
            mark_no_newline(&mut hunk, offset)?;
            lines.advance();
        }
    }
    Ok(hunk)
}

fn raw_len(lines: &Lines<'_>) -> usize {
    lines.src.len()
}

fn mark_no_newline(hunk: &mut Hunk, offset: usize) -> Result<(), DiffError> {
    match hunk.lines.last_mut() {
        Some(last) => {
            last.no_newline_at_eof = true;
            Ok(())
        }
        None => Err(DiffError::Malformed {
            offset,
            reason: "no-newline marker before any hunk line",
        }),
    }
}
