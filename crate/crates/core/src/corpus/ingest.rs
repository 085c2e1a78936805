//! Streams commit records out of a local clone via the `git` binary.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdout, Command, Stdio};

use chrono::{DateTime, Utc};

use crate::commit::CommitRecord;
use crate::corpus::CorpusError;

const RECORD_SEP: u8 = 0x1e;
const FIELD_SEP: char = '\u{1f}';

fn git(dir: &Path) -> Command {
    let mut cmd = Command::new("git");
    cmd.arg("-C").arg(dir).args(["-c", "core.quotepath=off"]);
    cmd.stdin(Stdio::null());
    cmd
}

fn git_output(dir: &Path, args: &[&str]) -> Result<Option<String>, CorpusError> {
    let out = git(dir)
        .args(args)
        .stderr(Stdio::null())
        .output()
        .map_err(|e| CorpusError::Git(format!("cannot run git: {e}")))?;
    Ok(out
        .status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string()))
}

/// `owner/name` from the `origin` remote URL, if there is one.
pub fn detect_repo_name(git_dir: &Path) -> Option<String> {
    let url = git_output(git_dir, &["config", "--get", "remote.origin.url"]).ok()??;
    repo_name_from_url(&url)
}

fn repo_name_from_url(url: &str) -> Option<String> {
    let trimmed = url.trim_end_matches('/').trim_end_matches(".git");
    let mut parts = trimmed.rsplit(['/', ':']);
    let name = parts.next().filter(|s| !s.is_empty())?;
    let owner = parts.next().filter(|s| !s.is_empty())?;
    Some(format!("{owner}/{name}"))
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub git_dir: PathBuf,
    pub branch: String,
    pub since: DateTime<Utc>,
    /// Overrides the name derived from `origin` or the directory.
    pub repo_name: Option<String>,
}

impl IngestOptions {
    pub fn new(git_dir: impl Into<PathBuf>, branch: impl Into<String>, since: DateTime<Utc>) -> Self {
        IngestOptions {
            git_dir: git_dir.into(),
            branch: branch.into(),
            since,
            repo_name: None,
        }
    }
}

/// One raw record per non-merge commit on `branch` committed at or after
/// `since`. Messages are returned as written; see
/// [`preprocess_message`](crate::corpus::preprocess_message).
pub fn ingest_repo(git_dir: &Path, branch: &str, since: DateTime<Utc>) -> Result<CommitStream, CorpusError> {
    ingest(&IngestOptions::new(git_dir, branch, since))
}

pub fn ingest(opts: &IngestOptions) -> Result<CommitStream, CorpusError> {
    let dir = opts.git_dir.as_path();
    if !dir.is_dir() || git_output(dir, &["rev-parse", "--git-dir"])?.is_none() {
        return Err(CorpusError::RepoNotFound(dir.to_path_buf()));
    }
    let rev = format!("{}^{{commit}}", opts.branch);
    if git_output(dir, &["rev-parse", "--verify", "--quiet", &rev])?.is_none() {
        return Err(CorpusError::BranchNotFound(opts.branch.clone()));
    }
    let repo_name = opts
        .repo_name
        .clone()
        .or_else(|| detect_repo_name(dir))
        .or_else(|| {
            dir.canonicalize()
                .ok()
                .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        })
        .unwrap_or_else(|| "unknown".into());

    let mut cmd = git(dir);
    cmd.args([
        "log",
        "--no-merges",
        "--no-color",
        "--no-ext-diff",
        "--no-textconv",
        "-M",
        "-p",
        "--format=%x1e%H%x1f%an%x1f%cI%x1f%B%x1f",
    ]);
    let ts = opts.since.timestamp();
    if ts > 0 {
        cmd.arg(format!("--max-age={ts}"));
    }
    cmd.arg(&opts.branch).arg("--");
    let mut child = cmd
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| CorpusError::Git(format!("cannot run git log: {e}")))?;
    let stdout = child.stdout.take().expect("piped stdout");
    Ok(CommitStream {
        child: Some(child),
        reader: BufReader::new(stdout),
        repo_name,
        since: opts.since,
        started: false,
    })
}

/// Lazily parsed `git log` output.
pub struct CommitStream {
    child: Option<Child>,
    reader: BufReader<ChildStdout>,
    repo_name: String,
    since: DateTime<Utc>,
    started: bool,
}

impl CommitStream {
    pub fn repo_name(&self) -> &str {
        &self.repo_name
    }

    fn next_chunk(&mut self) -> Result<Option<Vec<u8>>, CorpusError> {
        loop {
            let mut buf = Vec::new();
            let n = self.reader.read_until(RECORD_SEP, &mut buf)?;
            if n == 0 {
                return Ok(None);
            }
            if buf.last() == Some(&RECORD_SEP) {
                buf.pop();
            }
            if !self.started {
                // Bytes before the first separator are not a record.
                self.started = true;
                continue;
            }
            return Ok(Some(buf));
        }
    }

    fn parse_chunk(&self, chunk: &[u8]) -> Result<CommitRecord, CorpusError> {
        let text = String::from_utf8_lossy(chunk);
        let mut fields = text.splitn(5, FIELD_SEP);
        let mut field = |name: &str| {
            fields
                .next()
                .map(str::to_string)
                .ok_or_else(|| CorpusError::Git(format!("git log record missing {name}")))
        };
        let sha = field("sha")?;
        let author = field("author")?;
        let date = field("date")?;
        let message = field("message")?;
        let diff = field("diff")?.trim_start_matches('\n').to_string();
        let date = DateTime::parse_from_rfc3339(date.trim())
            .map_err(|e| CorpusError::Git(format!("bad commit date {date:?}: {e}")))?
            .with_timezone(&Utc);
        let message = message.trim_end_matches('\n').to_string();
        Ok(CommitRecord::from_diff(
            diff,
            message,
            self.repo_name.clone(),
            sha.trim().to_string(),
            author,
            date,
        )?)
    }

    fn finish(&mut self) -> Result<(), CorpusError> {
        if let Some(mut child) = self.child.take() {
            let status = child.wait()?;
            if !status.success() {
                return Err(CorpusError::Git(format!("git log exited with {status}")));
            }
        }
        Ok(())
    }
}

impl Iterator for CommitStream {
    type Item = Result<CommitRecord, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.next_chunk() {
                Ok(Some(chunk)) => match self.parse_chunk(&chunk) {
                    Ok(rec) if rec.date < self.since => continue,
                    other => return Some(other),
                },
                Ok(None) => return self.finish().err().map(Err),
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

impl Drop for CommitStream {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
