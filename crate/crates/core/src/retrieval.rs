//! Chunking, indexing and lexical retrieval over documentation and cluster
//! descriptions.
//!
//! All token arithmetic uses [`count_tokens`]'s approximation: a token is a
//! maximal run of word characters or a maximal run of punctuation.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CHUNK_SIZE: usize = 5000;
pub const DEFAULT_OVERLAP: usize = 500;
pub const DEFAULT_TOP_K: usize = 4;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("invalid chunking: overlap {overlap} must be smaller than chunk size {chunk_size}")]
    InvalidChunking { chunk_size: usize, overlap: usize },
    #[error("cannot build an index without documents")]
    EmptyCorpus,
    #[error("failed to read documentation {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte ranges of the approximate tokens of `text`.
pub fn token_offsets(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut current: Option<(usize, bool)> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some((start, _)) = current.take() {
                out.push((start, i));
            }
            continue;
        }
        let word = is_word_char(c);
        match current {
            Some((_, w)) if w == word => {}
            Some((start, _)) => {
                out.push((start, i));
                current = Some((i, word));
            }
            None => current = Some((i, word)),
        }
    }
    if let Some((start, _)) = current {
        out.push((start, text.len()));
    }
    out
}

/// Approximate token count: word runs plus standalone punctuation runs.
pub fn count_tokens(text: &str) -> usize {
    token_offsets(text).len()
}

/// Lowercased alphanumeric terms used for scoring.
pub fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub ordinal: usize,
    /// Half-open span in approximate tokens.
    pub token_span: (usize, usize),
    pub text: String,
}

/// Token spans `[i*stride, i*stride + chunk_size)` clipped to `total`, emitted
/// until the end is covered.
pub fn chunk_spans(
    total: usize,
    chunk_size: usize,
    overlap: usize,
) -> Result<Vec<(usize, usize)>, RetrievalError> {
    if overlap >= chunk_size {
        return Err(RetrievalError::InvalidChunking {
            chunk_size,
            overlap,
        });
    }
    let stride = chunk_size - overlap;
    let mut spans = Vec::new();
    let mut start = 0;
    while start < total {
        let end = (start + chunk_size).min(total);
        spans.push((start, end));
        if end == total {
            break;
        }
        start += stride;
    }
    Ok(spans)
}

pub fn chunk_document(
    doc_id: &str,
    doc: &str,
    chunk_size: usize,
    overlap: usize,
) -> Result<Vec<Chunk>, RetrievalError> {
    let offsets = token_offsets(doc);
    let spans = chunk_spans(offsets.len(), chunk_size, overlap)?;
    Ok(spans
        .into_iter()
        .enumerate()
        .map(|(ordinal, (start, end))| Chunk {
            doc_id: doc_id.to_string(),
            ordinal,
            token_span: (start, end),
            text: doc[offsets[start].0..offsets[end - 1].1].to_string(),
        })
        .collect())
}

#[derive(Debug, Clone, Default)]
pub struct TermStats {
    pub document_frequency: HashMap<String, usize>,
    pub chunk_term_frequency: Vec<HashMap<String, usize>>,
    pub chunk_lengths: Vec<usize>,
    pub average_length: f64,
}

/// Immutable chunk index. Build once, share across threads.
#[derive(Debug, Clone)]
pub struct RetrievalIndex {
    chunks: Vec<Chunk>,
    stats: TermStats,
}

impl RetrievalIndex {
    pub fn build<'a, I>(docs: I, chunk_size: usize, overlap: usize) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut chunks = Vec::new();
        let mut any = false;
        for (doc_id, text) in docs {
            any = true;
            chunks.extend(chunk_document(doc_id, text, chunk_size, overlap)?);
        }
        if !any {
            return Err(RetrievalError::EmptyCorpus);
        }
        Ok(Self::from_chunks(chunks))
    }

    pub fn from_chunks(chunks: Vec<Chunk>) -> Self {
        let mut stats = TermStats::default();
        for chunk in &chunks {
            let mut tf: HashMap<String, usize> = HashMap::new();
            let chunk_terms = terms(&chunk.text);
            for t in &chunk_terms {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for t in tf.keys() {
                *stats.document_frequency.entry(t.clone()).or_default() += 1;
            }
            stats.chunk_lengths.push(chunk_terms.len());
            stats.chunk_term_frequency.push(tf);
        }
        let total: usize = stats.chunk_lengths.iter().sum();
        stats.average_length = if chunks.is_empty() {
            0.0
        } else {
            total as f64 / chunks.len() as f64
        };
        Self { chunks, stats }
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn stats(&self) -> &TermStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

/// Relevance of one indexed chunk to a (deduplicated) list of query terms.
pub trait RelevanceScorer {
    fn score(&self, index: &RetrievalIndex, chunk: usize, query_terms: &[String]) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct Bm25 {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25 {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl RelevanceScorer for Bm25 {
    fn score(&self, index: &RetrievalIndex, chunk: usize, query_terms: &[String]) -> f64 {
        let stats = index.stats();
        let n = index.len() as f64;
        let tf = &stats.chunk_term_frequency[chunk];
        let avg = if stats.average_length > 0.0 {
            stats.average_length
        } else {
            1.0
        };
        let norm = self.k1 * (1.0 - self.b + self.b * stats.chunk_lengths[chunk] as f64 / avg);
        query_terms
            .iter()
            .map(|term| {
                let f = *tf.get(term).unwrap_or(&0) as f64;
                if f == 0.0 {
                    return 0.0;
                }
                let df = *stats.document_frequency.get(term).unwrap_or(&0) as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                idf * f * (self.k1 + 1.0) / (f + norm)
            })
            .sum()
    }
}

fn query_terms(query: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in terms(query) {
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

/// Top-`k` chunks by descending score, ties by `(doc_id, ordinal)`.
pub fn retrieve_with<S: RelevanceScorer + ?Sized>(
    index: &RetrievalIndex,
    scorer: &S,
    query: &str,
    k: usize,
) -> Vec<Chunk> {
    let q = query_terms(query);
    let mut scored: Vec<(f64, &Chunk)> = index
        .chunks()
        .iter()
        .enumerate()
        .map(|(i, c)| (scorer.score(index, i, &q), c))
        .collect();
    scored.sort_by(|(sa, ca), (sb, cb)| {
        sb.total_cmp(sa)
            .then_with(|| ca.doc_id.cmp(&cb.doc_id))
            .then_with(|| ca.ordinal.cmp(&cb.ordinal))
    });
    scored.into_iter().take(k).map(|(_, c)| c.clone()).collect()
}

pub fn retrieve(index: &RetrievalIndex, query: &str, k: usize) -> Vec<Chunk> {
    retrieve_with(index, &Bm25::default(), query, k)
}

/// Reads `*.md` and `*.txt` files below `dir`, sorted by path. Each
/// document id is the path relative to `dir` with `/` separators.
pub fn load_corpus(dir: &Path) -> Result<Vec<(String, String)>, RetrievalError> {
    let mut docs = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| RetrievalError::Io {
            path: dir.display().to_string(),
            source: e.into(),
        })?;
        let path = entry.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if !entry.file_type().is_file() || !matches!(ext, "md" | "txt") {
            continue;
        }
        let text = std::fs::read_to_string(path).map_err(|source| RetrievalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let rel = path.strip_prefix(dir).unwrap_or(path);
        let id = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        docs.push((id, text));
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn token_counts() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("replicas: 2"), 3);
        assert_eq!(count_tokens("alpha beta"), count_tokens("alpha") + count_tokens("beta"));
        assert_eq!(count_tokens("memory: \"512Mi\""), 5);
    }

    #[test]
    fn chunk_counts_follow_stride() {
        let starts = |t: usize| -> Vec<usize> {
            chunk_spans(t, 5000, 500).unwrap().iter().map(|s| s.0).collect()
        };
        assert_eq!(starts(5000), vec![0]);
        assert_eq!(starts(9500), vec![0, 4500]);
        assert_eq!(starts(14000), vec![0, 4500, 9000]);
        assert_eq!(chunk_spans(14000, 5000, 500).unwrap().last(), Some(&(9000, 14000)));
        assert!(chunk_spans(0, 5000, 500).unwrap().is_empty());
    }

    #[test]
    fn overlap_must_be_smaller_than_chunk() {
        assert!(matches!(
            chunk_spans(10, 5, 5),
            Err(RetrievalError::InvalidChunking { .. })
        ));
    }

    #[test]
    fn chunk_text_lands_on_token_boundaries() {
        let doc = "alpha: beta, gamma delta";
        let chunks = chunk_document("d", doc, 3, 1).unwrap();
        let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, vec!["alpha: beta", "beta, gamma", "gamma delta"]);
    }

    #[test]
    fn index_over_documents() {
        let small = words(100);
        let idx = RetrievalIndex::build([("a", small.as_str())], 5000, 500).unwrap();
        assert_eq!(idx.len(), 1);

        let big = words(9500);
        let idx = RetrievalIndex::build([("a", big.as_str()), ("b", big.as_str())], 5000, 500).unwrap();
        assert_eq!(idx.len(), 4);
        let ids: Vec<(&str, usize)> = idx.chunks().iter().map(|c| (c.doc_id.as_str(), c.ordinal)).collect();
        assert_eq!(ids, vec![("a", 0), ("a", 1), ("b", 0), ("b", 1)]);

        let none: Vec<(&str, &str)> = Vec::new();
        assert!(matches!(
            RetrievalIndex::build(none, 5000, 500),
            Err(RetrievalError::EmptyCorpus)
        ));
    }

    #[test]
    fn retrieval_ranking() {
        let idx = RetrievalIndex::build([("only", "some text")], 10, 2).unwrap();
        assert_eq!(retrieve(&idx, "anything", 3).len(), 1);

        let idx = RetrievalIndex::build(
            [("a", "unrelated words here"), ("b", "worker memory limits")],
            100,
            10,
        )
        .unwrap();
        let got = retrieve(&idx, "worker memory", 2);
        assert_eq!(got[0].doc_id, "b");

        let idx = RetrievalIndex::build([("z", "same text"), ("a", "same text")], 100, 10).unwrap();
        let got = retrieve(&idx, "same", 2);
        assert_eq!(got[0].doc_id, "a");
        assert_eq!(got[1].doc_id, "z");
    }
}
