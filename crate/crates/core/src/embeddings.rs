//! Pretrained word vectors and the vocabulary-aligned embedding matrix.
//!
//! Vectors come in word2vec text format: an optional `count dim` header
//! line followed by one `token v1 v2 ... vdim` line per word. The parser is
//! line-driven ([`WordVectorParser::push_line`]) so large files can be
//! streamed by the caller.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use thiserror::Error;

use crate::rng;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbeddingError {
    #[error("line {line}: expected {expected} components, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: invalid component {value:?}")]
    NonNumeric { line: usize, value: String },
    #[error("no word vectors found")]
    Empty,
    #[error("dimension must be at least 1")]
    ZeroDim,
}

/// Token to dense vector map with a fixed dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorStore {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl WordVectorStore {
    pub fn new(dim: usize) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDim);
        }
        Ok(WordVectorStore {
            dim,
            vectors: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Inserts unless the token is already present. Returns whether it was
    /// inserted. Panics if the vector has the wrong length.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> bool {
        assert_eq!(vector.len(), self.dim, "vector length");
        let token = token.into();
        if self.vectors.contains_key(&token) {
            return false;
        }
        self.vectors.insert(token, vector);
        true
    }

    /// Parses a whole word2vec text document.
    pub fn parse(text: &str, expected_dim: usize) -> Result<Self, EmbeddingError> {
        let mut parser = WordVectorParser::new(expected_dim)?;
        for line in text.lines() {
            parser.push_line(line)?;
        }
        parser.finish()
    }

    /// Random vectors, uniform in [-1, 1), for the given tokens. Each token's
    /// vector depends only on `(token, seed)`, not on the order of `tokens`.
    pub fn synthetic<S: AsRef<str>>(tokens: &[S], dim: usize, seed: u64) -> Result<Self, EmbeddingError> {
        let mut store = WordVectorStore::new(dim)?;
        for t in tokens {
            let t = t.as_ref();
            let mut r = rng::seeded(rng::derive_seed(seed, &[rng::fnv1a(t.as_bytes())]));
            let v = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
            store.insert(t, v);
        }
        Ok(store)
    }

    /// Renders in word2vec text format with a header line. Components use
    /// the shortest representation that round-trips exactly.
    pub fn to_word2vec_text(&self) -> String {
        use core::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.len(), self.dim);
        for (tok, v) in &self.vectors {
            out.push_str(tok);
            for x in v {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }
}

/// Incremental word2vec text parser.
#[derive(Debug)]
pub struct WordVectorParser {
    store: WordVectorStore,
    line: usize,
    seen_data: bool,
    filter: Option<BTreeSet<String>>,
}

impl WordVectorParser {
    pub fn new(expected_dim: usize) -> Result<Self, EmbeddingError> {
        Ok(WordVectorParser {
            store: WordVectorStore::new(expected_dim)?,
            line: 0,
            seen_data: false,
            filter: None,
        })
    }

    /// Only keep vectors for these tokens. Every line is still validated.
    pub fn with_filter(mut self, tokens: BTreeSet<String>) -> Self {
        self.filter = Some(tokens);
        self
    }

    /// Feeds the next line (without its terminator).
    pub fn push_line(&mut self, raw: &str) -> Result<(), EmbeddingError> {
        self.line += 1;
        let line = raw.trim_end_matches(['\r', '\n']);
        let mut fields = line.split_ascii_whitespace();
        let Some(token) = fields.next() else {
            return Ok(());
        };
        let rest: Vec<&str> = fields.collect();
        let dim = self.store.dim;

        if self.line == 1 && rest.len() == 1 {
            if let (Ok(_), Ok(header_dim)) = (token.parse::<u64>(), rest[0].parse::<usize>()) {
                if header_dim != dim {
                    return Err(EmbeddingError::Dimension {
                        line: self.line,
                        expected: dim,
                        found: header_dim,
                    });
                }
                return Ok(());
            }
        }

        if rest.len() != dim {
            return Err(EmbeddingError::Dimension {
                line: self.line,
                expected: dim,
                found: rest.len(),
            });
        }
        let mut vector = Vec::with_capacity(dim);
        for field in rest {
            match field.parse::<f64>() {
                Ok(x) if x.is_finite() => vector.push(x),
                _ => {
                    return Err(EmbeddingError::NonNumeric {
                        line: self.line,
                        value: field.to_string(),
                    })
                }
            }
        }
        self.seen_data = true;
        if self.filter.as_ref().is_none_or(|f| f.contains(token)) {
            self.store.insert(token, vector);
        }
        Ok(())
    }

    pub fn finish(self) -> Result<WordVectorStore, EmbeddingError> {
        if !self.seen_data {
            return Err(EmbeddingError::Empty);
        }
        Ok(self.store)
    }
}

/// Row-major `(V + 2) x dim` matrix: row 0 padding (zeros), rows `1..=V`
/// vocabulary tokens, row `V + 1` the out-of-vocabulary vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
    coverage: f64,
}

impl EmbeddingMatrix {
    /// Builds from raw row-major data. Row 0 is forced to zeros.
    pub fn from_rows(rows: usize, dim: usize, mut data: Vec<f64>, coverage: f64) -> Self {
        assert!(rows >= 2 && dim >= 1, "matrix needs padding and OOV rows");
        assert_eq!(data.len(), rows * dim, "matrix data length");
        data[..dim].fill(0.0);
        EmbeddingMatrix {
            rows,
            dim,
            data,
            coverage,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fraction of vocabulary tokens that had a pretrained vector.
    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    /// Vocabulary size V.
    pub fn vocab_len(&self) -> usize {
        self.rows - 2
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Aligns pretrained vectors with vocabulary indices. Tokens without a
/// vector, and the OOV row, get the mean of all matched vectors (zeros
/// when nothing matched).
pub fn build_embedding_matrix(vocab: &Vocabulary, store: &WordVectorStore) -> EmbeddingMatrix {
    let v = vocab.len();
    let dim = store.dim();
    let rows = v + 2;
    let mut data = vec![0.0; rows * dim];
    let mut mean = vec![0.0; dim];
    let mut matched = 0usize;
    let mut missing = Vec::new();

    for (i, tok) in vocab.tokens().iter().enumerate() {
        let row = i + 1;
        match store.get(tok) {
            Some(vec) => {
                data[row * dim..(row + 1) * dim].copy_from_slice(vec);
                for (m, x) in mean.iter_mut().zip(vec) {
                    *m += x;
                }
                matched += 1;
            }
            None => missing.push(row),
        }
    }
    if matched > 0 {
        for m in &mut mean {
            *m /= matched as f64;
        }
    }
    for row in missing.into_iter().chain(core::iter::once(v + 1)) {
        data[row * dim..(row + 1) * dim].copy_from_slice(&mean);
    }
    let coverage = if v == 0 { 0.0 } else { matched as f64 / v as f64 };
    EmbeddingMatrix::from_rows(rows, dim, data, coverage)
}
