//! On-disk index layout: `lexical.bin`, `vectors.bin` and `manifest.json`.
//!
//! All integers are little-endian. `vectors.bin` starts with a 16-byte
//! header (magic, version, count, dimension as u32) followed by row-major
//! f32 vectors in partition order (repository name ascending), documents
//! in insertion order.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::DateTime;
use serde::{Deserialize, Serialize};

use crate::retriever::index::{Document, Partition, RetrievalIndex};
use crate::retriever::RetrievalError;
use crate::scalar::Scalar;

pub const INDEX_FORMAT_VERSION: u32 = 1;
const LEXICAL_MAGIC: &[u8; 4] = b"CRLX";
const VECTOR_MAGIC: &[u8; 4] = b"CRVX";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    pub embed_model: String,
    pub dimension: usize,
    pub documents: usize,
    pub partitions: BTreeMap<String, usize>,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    /// SHA-256 of the corpus file the index was built from.
    pub corpus_sha256: Option<String>,
}

impl IndexManifest {
    pub fn read(dir: &Path) -> Result<Self, RetrievalError> {
        let text = fs::read_to_string(dir.join("manifest.json"))?;
        serde_json::from_str(&text).map_err(|e| RetrievalError::Format(format!("manifest.json: {e}")))
    }
}

fn bad(what: &str) -> RetrievalError {
    RetrievalError::Format(what.to_string())
}

struct Out<W: Write>(W);

impl<W: Write> Out<W> {
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn usize(&mut self, v: usize) -> std::io::Result<()> {
        let v = u32::try_from(v).map_err(|_| std::io::Error::other("value exceeds u32"))?;
        self.u32(v)
    }
    fn i64(&mut self, v: i64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn str(&mut self, s: &str) -> std::io::Result<()> {
        self.usize(s.len())?;
        self.0.write_all(s.as_bytes())
    }
}

struct In<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> In<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RetrievalError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| bad("truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, RetrievalError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize, RetrievalError> {
        self.u32().map(|v| v as usize)
    }
    fn i64(&mut self) -> Result<i64, RetrievalError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32, RetrievalError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String, RetrievalError> {
        let n = self.usize()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("invalid UTF-8 string"))
    }
    fn magic(&mut self, expected: &[u8; 4], file: &str) -> Result<(), RetrievalError> {
        if self.take(4)? != expected {
            return Err(bad(&format!("{file}: bad magic")));
        }
        let version = self.u32()?;
        if version != INDEX_FORMAT_VERSION {
            return Err(bad(&format!("{file}: unsupported version {version}")));
        }
        Ok(())
    }
}

impl<T: Scalar> RetrievalIndex<T> {
    pub fn manifest(&self, corpus_sha256: Option<&str>) -> IndexManifest {
        IndexManifest {
            format_version: INDEX_FORMAT_VERSION,
            embed_model: self.embed_model.clone(),
            dimension: self.dimension,
            documents: self.len(),
            partitions: self.partitions.iter().map(|(k, p)| (k.clone(), p.len())).collect(),
            bm25_k1: self.params.k1.to_f64_lossy(),
            bm25_b: self.params.b.to_f64_lossy(),
            corpus_sha256: corpus_sha256.map(str::to_string),
        }
    }

    pub fn save(&self, dir: &Path, corpus_sha256: Option<&str>) -> Result<(), RetrievalError> {
        fs::create_dir_all(dir)?;
        let mut lex = Out(BufWriter::new(fs::File::create(dir.join("lexical.bin"))?));
        lex.0.write_all(LEXICAL_MAGIC)?;
        lex.u32(INDEX_FORMAT_VERSION)?;
        lex.usize(self.partitions.len())?;
        for p in self.partitions.values() {
            lex.str(&p.repo)?;
            lex.usize(p.docs.len())?;
            for d in &p.docs {
                lex.str(&d.sha)?;
                lex.i64(d.date.timestamp())?;
                lex.u32(d.date.timestamp_subsec_nanos())?;
                lex.str(&d.diff)?;
                lex.str(&d.message)?;
                lex.usize(d.len)?;
            }
            lex.usize(p.term_names.len())?;
            for (term, list) in p.term_names.iter().zip(&p.postings) {
                lex.str(term)?;
                lex.usize(list.len())?;
                for &(doc, tf) in list {
                    lex.u32(doc)?;
                    lex.u32(tf)?;
                }
            }
        }
        lex.0.flush()?;

        let mut vec = Out(BufWriter::new(fs::File::create(dir.join("vectors.bin"))?));
        vec.0.write_all(VECTOR_MAGIC)?;
        vec.u32(INDEX_FORMAT_VERSION)?;
        vec.usize(self.len())?;
        vec.usize(self.dimension)?;
        for p in self.partitions.values() {
            for x in &p.rows {
                vec.0.write_all(&x.to_le_bytes())?;
            }
        }
        vec.0.flush()?;

        let manifest = serde_json::to_string_pretty(&self.manifest(corpus_sha256))
            .map_err(|e| RetrievalError::Format(e.to_string()))?;
        fs::write(dir.join("manifest.json"), manifest + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, RetrievalError> {
        let manifest = IndexManifest::read(dir)?;
        if manifest.format_version != INDEX_FORMAT_VERSION {
            return Err(bad("manifest.json: unsupported version"));
        }
        let lex_bytes = fs::read(dir.join("lexical.bin"))?;
        let vec_bytes = fs::read(dir.join("vectors.bin"))?;
        let mut lex = In {
            buf: &lex_bytes,
            pos: 0,
        };
        let mut vec = In {
            buf: &vec_bytes,
            pos: 0,
        };
        lex.magic(LEXICAL_MAGIC, "lexical.bin")?;
        vec.magic(VECTOR_MAGIC, "vectors.bin")?;
        let count = vec.usize()?;
        let dimension = vec.usize()?;
        if dimension != manifest.dimension || count != manifest.documents {
            return Err(bad("vectors.bin header disagrees with manifest.json"));
        }
        if vec_bytes.len() != 16 + count * dimension * 4 {
            return Err(bad("vectors.bin has the wrong size"));
        }

        let mut index = RetrievalIndex::new(dimension, manifest.embed_model.clone());
        let n_partitions = lex.usize()?;
        for _ in 0..n_partitions {
            let repo = lex.str()?;
            let n_docs = lex.usize()?;
            let mut p = Partition::<T>::new_for_load(repo.clone(), dimension);
            for i in 0..n_docs {
                let sha = lex.str()?;
                let secs = lex.i64()?;
                let nanos = lex.u32()?;
                let date = DateTime::from_timestamp(secs, nanos).ok_or_else(|| bad("bad timestamp"))?;
                let diff = lex.str()?;
                let message = lex.str()?;
                let len = lex.usize()?;
                p.total_len += len;
                if p.by_sha.insert(sha.clone(), i).is_some() {
                    return Err(bad("duplicate sha in partition"));
                }
                p.docs.push(Document {
                    sha,
                    date,
                    diff,
                    message,
                    len,
                });
                let row: Vec<f32> = (0..dimension).map(|_| vec.f32()).collect::<Result<_, _>>()?;
                p.push_row(row)?;
            }
            let n_terms = lex.usize()?;
            for t in 0..n_terms {
                let term = lex.str()?;
                let n_post = lex.usize()?;
                let mut list = Vec::with_capacity(n_post);
                for _ in 0..n_post {
                    let doc = lex.u32()?;
                    let tf = lex.u32()?;
                    if doc as usize >= n_docs || list.last().is_some_and(|&(d, _)| d >= doc) {
                        return Err(bad("corrupt postings list"));
                    }
                    list.push((doc, tf));
                }
                p.terms.insert(term.clone(), t);
                p.term_names.push(term);
                p.postings.push(list);
            }
            if manifest.partitions.get(&repo) != Some(&n_docs) {
                return Err(bad("lexical.bin disagrees with manifest.json"));
            }
            index.partitions.insert(repo, p);
        }
        if lex.pos != lex_bytes.len() || index.len() != count {
            return Err(bad("lexical.bin has trailing or missing data"));
        }
        Ok(index)
    }
}

impl<T: Scalar> Partition<T> {
    fn new_for_load(repo: String, dimension: usize) -> Self {
        Partition {
            repo,
            docs: Vec::new(),
            by_sha: HashMap::new(),
            terms: HashMap::new(),
            term_names: Vec::new(),
            postings: Vec::new(),
            total_len: 0,
            dimension,
            rows: Vec::new(),
            vectors: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retriever::{retrieve_with_vector, Query};
    use crate::tokenizer::tokenize;
    use chrono::Utc;

    fn sample() -> RetrievalIndex<f64> {
        let mut idx = RetrievalIndex::new(3, "hashing-3");
        let docs = [
            ("o/a", "s1", "+ int count = 0;", [0.1, 0.7, 0.2]),
            ("o/a", "s2", "- return null;", [0.9, 0.1, 0.3]),
            ("o/b", "s3", "+ fn main() {}", [0.3, 0.3, 0.3]),
        ];
        for (repo, sha, diff, v) in docs {
            let tokens = tokenize(diff).into_inner();
            let d = Document {
                sha: sha.into(),
                date: Utc::now(),
                diff: diff.into(),
                message: format!("message {sha}"),
                len: tokens.len(),
            };
            idx.insert(repo, d, &tokens, &v).unwrap();
        }
        idx
    }

    #[test]
    fn round_trip_preserves_retrieval() {
        let dir = tempfile::tempdir().unwrap();
        let idx = sample();
        idx.save(dir.path(), Some("abc")).unwrap();
        let back = RetrievalIndex::<f64>::load(dir.path()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.manifest(Some("abc")), idx.manifest(Some("abc")));
        for p in idx.partitions() {
            let q = p.docs()[0].diff.clone();
            let qv = p.vector(0).to_vec();
            let a = retrieve_with_vector(&Query::new(&q, 2, p.repo()), &qv, &idx);
            let b = retrieve_with_vector(&Query::new(&q, 2, p.repo()), &qv, &back);
            assert_eq!(format!("{a:?}"), format!("{b:?}"));
            let bp = back.partition(p.repo()).unwrap();
            assert_eq!(p.vectors, bp.vectors);
        }
        let header = fs::read(dir.path().join("vectors.bin")).unwrap();
        assert_eq!(&header[..4], VECTOR_MAGIC);
        assert_eq!(header.len(), 16 + 3 * 3 * 4);
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        sample().save(dir.path(), None).unwrap();
        let path = dir.path().join("vectors.bin");
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            RetrievalIndex::<f64>::load(dir.path()),
            Err(RetrievalError::Format(_))
        ));
    }
}
