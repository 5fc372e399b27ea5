//! Word-vector lexicons, concept lists, and the binary embedding cache.
//!
//! Text vectors use the common `.vec` layout: a `"<count> <dim>"` header,
//! then one `"<token> <f1> ... <fdim>"` line per word. Tokens are matched
//! byte-for-byte; there is no case folding and no subword synthesis.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{norm, MatDense};

/// A token -> dense vector table. Rows follow token order.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    matrix: MatDense,
    source_id: String,
}

impl PartialEq for EmbeddingSet {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
            && self.source_id == other.source_id
            && self.matrix.rows() == other.matrix.rows()
            && self.matrix.cols() == other.matrix.cols()
            && self
                .matrix
                .as_slice()
                .iter()
                .zip(other.matrix.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl EmbeddingSet {
    /// Validates and wraps a token list and its matrix.
    ///
    /// Tokens must be unique, one per row, and no row may be all zeros.
    pub fn new(tokens: Vec<String>, matrix: MatDense, source_id: impl Into<String>) -> Result<Self> {
        if tokens.len() != matrix.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} tokens for {} rows",
                tokens.len(),
                matrix.rows()
            )));
        }
        if !tokens.is_empty() && matrix.cols() == 0 {
            return Err(Error::ShapeMismatch("embedding dim must be >= 1".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::DuplicateToken {
                    path: "<memory>".into(),
                    line: i + 1,
                    token: t.clone(),
                });
            }
            if norm(matrix.row(i)) == 0.0 {
                return Err(Error::ZeroVectorToken(t.clone()));
            }
        }
        Ok(EmbeddingSet {
            tokens,
            index,
            matrix,
            source_id: source_id.into(),
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn matrix(&self) -> &MatDense {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.matrix.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    /// Extracts the given tokens in the given order. Any miss is an error.
    pub fn select<S: AsRef<str>>(&self, tokens: &[S]) -> Result<EmbeddingSet> {
        let mut idx = Vec::with_capacity(tokens.len());
        for t in tokens {
            let t = t.as_ref();
            idx.push(self.index_of(t).ok_or_else(|| Error::PivotMiss(t.to_string()))?);
        }
        let toks = idx.iter().map(|&i| self.tokens[i].clone()).collect();
        EmbeddingSet::new(toks, self.matrix.select_rows(&idx), self.source_id.clone())
    }

    /// Keeps the tokens that appear in `filter`, in this set's row order.
    /// Returns the subset and the filter entries that were not found.
    pub fn restrict(&self, filter: &ConceptList) -> (EmbeddingSet, Vec<String>) {
        let wanted: HashSet<&str> = filter.entries().iter().map(String::as_str).collect();
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| wanted.contains(self.tokens[i].as_str()))
            .collect();
        let missing = filter
            .entries()
            .iter()
            .filter(|t| !self.contains(t))
            .cloned()
            .collect();
        let toks = idx.iter().map(|&i| self.tokens[i].clone()).collect();
        let set = EmbeddingSet::new(toks, self.matrix.select_rows(&idx), self.source_id.clone())
            .expect("subset of a valid set is valid");
        (set, missing)
    }
}

/// An ordered, duplicate-free word list with a language tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptList {
    entries: Vec<String>,
    language_tag: String,
    excludes: BTreeSet<String>,
}

impl ConceptList {
    /// Builds a list from raw entries, dropping later duplicates.
    pub fn new<I, S>(entries: I, language_tag: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seen = HashSet::new();
        let entries = entries
            .into_iter()
            .map(Into::into)
            .filter(|e: &String| seen.insert(e.clone()))
            .collect();
        ConceptList {
            entries,
            language_tag: language_tag.into(),
            excludes: BTreeSet::new(),
        }
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn language_tag(&self) -> &str {
        &self.language_tag
    }

    pub fn excludes(&self) -> &BTreeSet<String> {
        &self.excludes
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.iter().any(|e| e == token)
    }

    /// Removes every excluded token and remembers the exclusion set.
    pub fn with_excludes<I, S>(mut self, excludes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.excludes.extend(excludes.into_iter().map(Into::into));
        let ex = &self.excludes;
        self.entries.retain(|e| !ex.contains(e));
        self
    }
}

/// Parses a concept list: UTF-8, one token per line, `#` comment lines and
/// blank lines ignored, duplicates dropped.
pub fn parse_concepts(text: &str, language_tag: &str) -> ConceptList {
    let lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    ConceptList::new(lines, language_tag)
}

pub fn load_concepts(path: impl AsRef<Path>, language_tag: &str) -> Result<ConceptList> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let list = parse_concepts(&text, language_tag);
    if list.is_empty() {
        return Err(Error::EmptyList { path: path.into() });
    }
    Ok(list)
}

/// Result of reading a text vector file.
#[derive(Debug, Clone)]
pub struct VecLoad {
    pub set: EmbeddingSet,
    /// Filter entries that the file does not contain, in filter order.
    pub missing: Vec<String>,
    /// Tokens skipped because their vector is all zeros (unfiltered loads only).
    pub dropped_zero: Vec<String>,
    /// Word count claimed by the header.
    pub header_count: usize,
}

/// Reads a `.vec` text file.
///
/// With a filter only the listed tokens are kept (and only their floats are
/// parsed); every line is still checked for the right field count. A
/// filtered token with a zero vector is an error; an unfiltered one is
/// dropped and listed in [`VecLoad::dropped_zero`].
pub fn load_vec_file(path: impl AsRef<Path>, filter: Option<&ConceptList>) -> Result<VecLoad> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_vec(BufReader::new(file), path, filter)
}

pub(crate) fn read_vec<R: BufRead>(
    reader: R,
    path: &Path,
    filter: Option<&ConceptList>,
) -> Result<VecLoad> {
    let wanted: Option<HashSet<&str>> =
        filter.map(|f| f.entries().iter().map(String::as_str).collect());
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => {
            return Err(Error::MalformedHeader {
                path: path.into(),
                header: String::new(),
            })
        }
    };
    let (header_count, dim) = parse_header(&header).ok_or_else(|| Error::MalformedHeader {
        path: path.into(),
        header: header.clone(),
    })?;

    let mut tokens = Vec::new();
    let mut values = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut dropped_zero = Vec::new();
    let mut row = Vec::with_capacity(dim);

    for (offset, line) in lines.enumerate() {
        let lineno = offset + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', ' ']);
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let token = fields.next().unwrap_or_default();
        let keep = wanted.as_ref().is_none_or(|w| w.contains(token));
        if !keep {
            let found = fields.count();
            if found != dim {
                return Err(Error::DimMismatchAtLine {
                    path: path.into(),
                    line: lineno,
                    expected: dim,
                    found,
                });
            }
            continue;
        }
        row.clear();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| Error::BadFloat {
                path: path.into(),
                line: lineno,
                value: f.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::BadFloat {
                    path: path.into(),
                    line: lineno,
                    value: f.to_string(),
                });
            }
            row.push(v);
        }
        if row.len() != dim {
            return Err(Error::DimMismatchAtLine {
                path: path.into(),
                line: lineno,
                expected: dim,
                found: row.len(),
            });
        }
        if seen.insert(token.to_string(), lineno).is_some() {
            return Err(Error::DuplicateToken {
                path: path.into(),
                line: lineno,
                token: token.to_string(),
            });
        }
        if norm(&row) == 0.0 {
            if wanted.is_some() {
                return Err(Error::ZeroVectorToken(token.to_string()));
            }
            dropped_zero.push(token.to_string());
            continue;
        }
        tokens.push(token.to_string());
        values.extend_from_slice(&row);
    }

    let missing = match filter {
        Some(f) => f
            .entries()
            .iter()
            .filter(|t| !seen.contains_key(t.as_str()))
            .cloned()
            .collect(),
        None => Vec::new(),
    };
    let matrix = MatDense::new(tokens.len(), dim, values)?;
    let set = EmbeddingSet::new(tokens, matrix, path.display().to_string())?;
    Ok(VecLoad {
        set,
        missing,
        dropped_zero,
        header_count,
    })
}

fn parse_header(header: &str) -> Option<(usize, usize)> {
    let header = header.trim_end_matches(['\r', ' ']);
    let (count, dim) = header.split_once(' ')?;
    let count: usize = count.parse().ok()?;
    let dim: usize = dim.parse().ok()?;
    (dim > 0).then_some((count, dim))
}

/// Writes an embedding set in the text `.vec` layout, using shortest
/// round-trip float formatting.
pub fn write_vec_file(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("{} {}\n", set.len(), set.dim());
    for (i, t) in set.tokens().iter().enumerate() {
        out.push_str(t);
        for v in set.row(i) {
            out.push(' ');
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub const CACHE_MAGIC: &[u8; 4] = b"LXM1";
pub const CACHE_VERSION: u16 = 1;
const DIGEST_LEN: usize = 32;

/// Serializes a set to the binary cache layout:
/// magic, `u16` version, payload, SHA-256 of everything before the trailer.
pub fn encode_cache(set: &EmbeddingSet) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    put_str(&mut buf, set.source_id());
    buf.extend_from_slice(&(set.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(set.dim() as u64).to_le_bytes());
    for t in set.tokens() {
        put_str(&mut buf, t);
    }
    for v in set.matrix().as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

pub fn decode_cache(bytes: &[u8]) -> Result<EmbeddingSet> {
    if bytes.len() < 4 || &bytes[..4] != CACHE_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < 6 + DIGEST_LEN {
        return Err(Error::TruncatedCache);
    }
    let (body, trailer) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(Error::ChecksumFailure);
    }
    let version = u16::from_le_bytes([body[4], body[5]]);
    if version != CACHE_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CACHE_VERSION,
        });
    }
    let mut cur = Cursor { buf: body, pos: 6 };
    let source_id = cur.string()?;
    let rows = cur.u64()? as usize;
    let dim = cur.u64()? as usize;
    let mut tokens = Vec::with_capacity(rows.min(1 << 20));
    for _ in 0..rows {
        tokens.push(cur.string()?);
    }
    let n = rows.checked_mul(dim).ok_or(Error::TruncatedCache)?;
    let mut values = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        values.push(f64::from_le_bytes(cur.take(8)?.try_into().unwrap()));
    }
    if cur.pos != body.len() {
        return Err(Error::TruncatedCache);
    }
    EmbeddingSet::new(tokens, MatDense::new(rows, dim, values)?, source_id)
}

pub fn write_cache(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_cache(set)).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cache(&bytes)
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::TruncatedCache)?;
        let s = self.buf.get(self.pos..end).ok_or(Error::TruncatedCache)?;
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::TruncatedCache)
    }
}
